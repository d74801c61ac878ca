from emoformer.audio.clip import AudioClip
from emoformer.audio.resample import resample, resample_by_ratio, resample_samples
from emoformer.audio.wav import load_wav, parse_wav_bytes, save_wav
from emoformer.configuration import DeclaredConfig, declare_configuration

declare_configuration(
    'audio',
    DeclaredConfig(
        key='sample_rate',
        readable_name='Sample rate',
        readable_description='Sample rate in Hz all clips are resampled to before augmentation '
        'and feature extraction.',
        validation_type=int,
        default_value=16000,
    ),
)
