from emoformer.augmentation.plan import AugmentPlan
from emoformer.augmentation.transforms import augment_set, fix_length, pitch_shift, time_stretch
from emoformer.augmentation.vocoder import istft, phase_vocoder, stft
