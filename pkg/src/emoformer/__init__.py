from emoformer.errors import *
from emoformer.configuration import *
from emoformer.audio import *
from emoformer.augmentation import *
from emoformer.features import *
from emoformer.engine import *
from emoformer.model import *
from emoformer.training import *
from emoformer.version import get_version

VERSION = get_version()

declare_configuration(
    GENERAL_CONFIG_SECTION,
    DeclaredConfig(
        key='jobs',
        readable_name='Jobs',
        readable_description='Number of clips processed in parallel during loading, '
        'augmentation and feature extraction. Training is always sequential.',
        validation_type=int,
        default_value=1,
    ),
    DeclaredConfig(
        key='feature_kind',
        readable_name='Feature kind',
        readable_description='Model input: MFCC segments, x-vectors, or MFCC segments fused '
        'with the x-vector of their clip.',
        validation_type=FeatureKind,
        default_value=FeatureKind.MFCC,
    ),
    DeclaredConfig(
        key='emotions',
        readable_name='Emotions',
        readable_description='Emotion preset (5, 7, 10 or 23) or a comma separated list of '
        'emotion labels. Manifest entries with other labels are ignored.',
        validation_type=str,
        default_value='7',
    ),
)
