from emoformer.training.dataset import Dataset, dataset_from_samples
from emoformer.training.emotions import EARS_EMOTIONS, PRESETS, EmotionSet
from emoformer.training.experiment import (
    ExperimentConfig,
    ExperimentReport,
    Stage,
    feature_context,
    run_experiment,
    xvector_extractor,
)
from emoformer.training.inference import Prediction, Predictor, infer
from emoformer.training.labels import label_decode, label_encode, one_hot
from emoformer.training.manifest import (
    Manifest,
    ManifestEntry,
    Partition,
    read_manifest,
    require_augmentable,
    write_manifest,
)
from emoformer.training.metrics import (
    Metrics,
    aggregate_by_clip,
    compute_metrics,
    evaluate,
    evaluate_clips,
)
from emoformer.training.reports import (
    REPORT_FILES,
    confusion_frame,
    confusion_pgm,
    dump_json,
    prepare_output_directory,
    write_reports,
)
from emoformer.training.scaler import Scaler, standardize_apply, standardize_fit
from emoformer.training.split import split, split_validation, stratified_indices
from emoformer.training.trainer import (
    EarlyStopping,
    EpochRecord,
    History,
    TrainConfig,
    batch_indices,
    train,
)
