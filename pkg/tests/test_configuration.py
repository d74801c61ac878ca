import io
import os
import re
import tempfile
import unittest
from pathlib import Path
from unittest import mock

import emoformer
from emoformer.configuration import (
    SEED_ENVIRONMENT_VARIABLE,
    DeclaredConfig,
    available_profiles,
    configuration_from_file,
    configuration_from_profile,
    default_configuration,
    print_configuration_file,
    with_environment_overrides,
)


def write_config(directory: str, name: str, text: str) -> Path:
    path = Path(directory) / name
    path.write_text(text, encoding='utf-8')
    return path


class ConfigurationTest(unittest.TestCase):

    def test_defaults(self):
        cfg = default_configuration()
        self.assertEqual(cfg.sample_rate, 16000)
        self.assertEqual(cfg.n_coeffs, 13)
        self.assertEqual(cfg.stretch_factors, (0.9, 1.1))
        self.assertEqual(cfg.feature_kind, emoformer.FeatureKind.MFCC)
        self.assertIsNone(cfg.max_epochs)

    def test_profiles(self):
        self.assertEqual(available_profiles(), {'desk', 'mfcc', 'xvector'})

        desk = configuration_from_profile('desk', default_configuration())
        self.assertEqual((desk.segment_frames, desk.overlap_frames), (64, 0))
        self.assertEqual(desk.target_seconds, 2.0)
        self.assertEqual(desk.sample_rate, 16000, 'Unset keys are inherited.')

        xvector = configuration_from_profile('xvector', default_configuration())
        self.assertEqual((xvector.max_epochs, xvector.patience), (20, 5))

    def test_unknown_profile(self):
        with self.assertRaises(KeyError):
            configuration_from_profile('studio')

    def test_toml_and_json_files(self):
        with tempfile.TemporaryDirectory() as directory:
            toml = write_config(directory, 'a.toml', '[mfcc]\nn_coeffs = 20\n')
            json_file = write_config(
                directory, 'b.json', '{"augment": {"pitch_semitones": [-1, 1]}}'
            )

            self.assertEqual(configuration_from_file(toml).n_coeffs, 20)
            self.assertEqual(configuration_from_file(json_file).pitch_semitones, (-1.0, 1.0))

    def test_unknown_key_is_rejected(self):
        with tempfile.TemporaryDirectory() as directory:
            path = write_config(directory, 'c.toml', '[mfcc]\nn_cofs = 20\n')
            with self.assertRaises(ValueError) as context:
                configuration_from_file(path)
        self.assertIn('mfcc.n_cofs', str(context.exception))

    def test_invalid_values(self):
        with tempfile.TemporaryDirectory() as directory:
            for name, text in (
                ('a.toml', '[mfcc]\nn_coeffs = 2.5\n'),
                ('b.toml', '[training]\naugment = 3\n'),
                ('c.toml', '[mfcc]\nn_coeffs = \n'),
                ('d.json', '{"mfcc": '),
            ):
                with self.subTest(name=name), self.assertRaises(ValueError):
                    configuration_from_file(write_config(directory, name, text))

    def test_string_values(self):
        declared = DeclaredConfig(
            key='factors', readable_name='', readable_description='', validation_type=tuple
        )
        self.assertEqual(declared.parse_value('0.9, 1.1'), (0.9, 1.1))
        self.assertIsNone(declared.parse_value('none'))
        with self.assertRaises(ValueError):
            declared.parse_value('0.9,fast')

    def test_seed_from_environment(self):
        with mock.patch.dict(os.environ, {SEED_ENVIRONMENT_VARIABLE: '17'}):
            self.assertEqual(with_environment_overrides(default_configuration()).seed, 17)
        with mock.patch.dict(os.environ, {SEED_ENVIRONMENT_VARIABLE: 'seventeen'}):
            with self.assertRaises(ValueError):
                with_environment_overrides(default_configuration())
        with mock.patch.dict(os.environ, {SEED_ENVIRONMENT_VARIABLE: ''}):
            self.assertEqual(with_environment_overrides(default_configuration()).seed, 0)

    def test_printed_configuration_can_be_loaded(self):
        out = io.StringIO()
        print_configuration_file(out, default_configuration())
        text = out.getvalue()
        for section in ('[general]', '[audio]', '[mfcc]', '[augment]', '[model]', '[training]'):
            self.assertIn(section, text)

        uncommented = re.sub(r'^#(\w+ = )', r'\1', text, flags=re.MULTILINE)
        with tempfile.TemporaryDirectory() as directory:
            cfg = configuration_from_file(write_config(directory, 'full.toml', uncommented))
        self.assertEqual(cfg.hop_ms, 10.0)
        self.assertEqual(cfg.window, 'hamming')

    def test_resolved_sections(self):
        sections = default_configuration().to_sections()
        self.assertEqual(sections['augment']['stretch_factors'], [0.9, 1.1])
        self.assertEqual(sections['general']['feature_kind'], 'mfcc')
