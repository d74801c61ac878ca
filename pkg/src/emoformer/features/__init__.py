from emoformer.features.container import (
    Archive,
    StoredFeature,
    decode_archive,
    decode_array,
    encode_archive,
    encode_array,
    list_features,
    load_archive,
    load_array,
    save_archive,
    save_array,
    save_feature,
)
from emoformer.features.mfcc import (
    FeatureSegment,
    MfccConfig,
    MfccMatrix,
    WindowFunction,
    extract_mfcc,
    frame_and_window,
    hz_to_mel,
    mel_filterbank,
    mel_to_hz,
    power_spectrum,
    pre_emphasis,
    segment,
)
from emoformer.features.registry import (
    FeatureContext,
    FeatureKind,
    FeatureSample,
    extract_features,
    feature_kind,
    known_feature_kinds,
)
from emoformer.features.xvector import (
    AffineLayer,
    XVector,
    XVectorModel,
    default_xvector_model,
    extract_xvector,
    frame_embed,
    load_xvector_model,
    save_xvector_model,
    stats_pool,
    xvector_model_from_configuration,
)
