import argparse
import logging
import sys
from contextlib import nullcontext
from pathlib import Path
from typing import Any, NoReturn, Sequence

import numpy as np

import emoformer
from emoformer.utils import format_human_readable, parallel_map
from emoformer.version import build_metadata

log = logging.getLogger('emoformer.cli')

EXIT_SUCCESS = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

# ArgumentError, ShapeError, StratificationError and UnknownLabelError are ValueErrors.
VALIDATION_ERRORS = (
    ValueError,
    KeyError,
    emoformer.WavFormatError,
    emoformer.UnsupportedCodecError,
    emoformer.AudioIOError,
    emoformer.IntegrityError,
    emoformer.ConfigMismatchError,
    emoformer.BuildError,
    emoformer.LeakageError,
)


class UsageError(Exception):
    def __init__(self, prog: str, message: str):
        super().__init__(message)
        self.prog = prog
        self.message = message


class ArgumentParser(argparse.ArgumentParser):
    """Reports usage errors by raising, so they end with exit code 1."""

    def error(self, message: str) -> NoReturn:
        raise UsageError(self.prog, message)


def warn(msg: Any):
    print(msg, file=sys.stderr)


def exit_code(error: BaseException) -> int:
    if isinstance(error, emoformer.StageFailed):
        return exit_code(error.cause)
    if isinstance(error, emoformer.NumericFault):
        return EXIT_RUNTIME
    if isinstance(error, VALIDATION_ERRORS):
        return EXIT_VALIDATION
    return EXIT_RUNTIME


def configure_logging(args: argparse.Namespace):
    if getattr(args, 'verbose', False):
        level = logging.DEBUG
    elif getattr(args, 'quiet', False):
        level = logging.WARNING
    else:
        level = logging.INFO
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter('%(levelname)s %(name)s: %(message)s'))
    logger = logging.getLogger('emoformer')
    logger.handlers[:] = [handler]
    logger.setLevel(level)
    logger.propagate = False


def common_options() -> argparse.ArgumentParser:
    parent = ArgumentParser(add_help=False)
    emoformer.add_config_flag_to_parser(parent)
    parent.add_argument(
        '--profile',
        metavar='NAME',
        type=str,
        help='Load configuration defaults from a common profile.',
    )
    parent.add_argument(
        '--jobs',
        '-j',
        type=int,
        metavar='N',
        help='Number of clips processed in parallel.',
    )
    parent.add_argument(
        '--feature-kind',
        choices=[kind.value for kind in emoformer.FeatureKind],
        help='Model input: mfcc, xvector or fusion.',
    )
    parent.add_argument(
        '--emotions',
        metavar='SET',
        help='Emotion preset (5, 7, 10, 23) or comma separated labels.',
    )
    parent.add_argument(
        '--force',
        action='store_true',
        help='Overwrite existing output files.',
    )
    verbosity = parent.add_mutually_exclusive_group()
    verbosity.add_argument('--verbose', '-v', action='store_true', help='Log debug messages.')
    verbosity.add_argument('--quiet', '-q', action='store_true', help='Log warnings only.')
    emoformer.add_config_flags_group_to_parser(parent)
    return parent


def argument_parser() -> argparse.ArgumentParser:
    parser = ArgumentParser(
        prog='emoformer',
        description='Speech emotion recognition with MFCC and x-vector features and the '
        'EmoFormer network.',
        add_help=False,
    )
    parser.add_argument(
        '--help',
        '-h',
        action='store_true',
        help='Show this message and exit.',
    )
    parser.add_argument(
        '--version',
        action='store_true',
        help='Print version and build metadata as JSON and exit.',
    )
    parser.add_argument(
        '--list-profiles',
        action='store_true',
        help='List available profiles.',
    )
    parser.add_argument(
        '--print-config',
        metavar='FILE',
        nargs='?',
        default=None,
        const=sys.stdout,
        help='Print a configuration file with the current configuration to the given file. '
        'Prints to stdout if no file is given.',
    )
    parser.add_argument(
        '--base-profile',
        metavar='NAME',
        dest='root_profile',
        help='Profile used by --print-config.',
    )

    common = common_options()
    commands = parser.add_subparsers(dest='command', metavar='COMMAND')

    audio = commands.add_parser('audio', help='Audio file utilities.')
    audio_actions = audio.add_subparsers(dest='action', metavar='ACTION', required=True)
    resample = audio_actions.add_parser(
        'resample', parents=[common], help='Resample a WAV file to another rate.'
    )
    resample.add_argument('--rate', type=int, metavar='HZ', help='Target sample rate.')
    resample.add_argument('input', metavar='IN', help='Input WAV file.')
    resample.add_argument('output', metavar='OUT', help='Output WAV file (16-bit PCM).')
    resample.set_defaults(handler=run_resample)

    augment = commands.add_parser(
        'augment',
        parents=[common],
        help='Write augmented variants of every clip of a training manifest.',
    )
    augment.add_argument('--manifest', required=True, metavar='CSV', help='Training manifest.')
    augment.add_argument('--out-dir', required=True, metavar='DIR', help='Output directory.')
    augment.add_argument('--plan', metavar='JSON', help='Augmentation plan as JSON object.')
    augment.set_defaults(handler=run_augment)

    features = commands.add_parser('features', help='Extract and store features.')
    feature_actions = features.add_subparsers(dest='action', metavar='KIND', required=True)
    for kind in (emoformer.FeatureKind.MFCC, emoformer.FeatureKind.XVECTOR):
        action = feature_actions.add_parser(
            kind.value, parents=[common], help=f'Extract {kind.value} features.'
        )
        action.add_argument('--manifest', required=True, metavar='CSV', help='Input manifest.')
        action.add_argument('--out-dir', required=True, metavar='DIR', help='Output directory.')
        if kind == emoformer.FeatureKind.XVECTOR:
            action.add_argument('--weights', metavar='FILE', help='X-vector extractor weights.')
        action.set_defaults(handler=run_features, kind=kind)

    train = commands.add_parser(
        'train', parents=[common], help='Run a complete experiment and write its reports.'
    )
    train.add_argument('--manifest', required=True, metavar='CSV', help='Manifest of all clips.')
    train.add_argument('--out-dir', required=True, metavar='DIR', help='Report directory.')
    train.set_defaults(handler=run_train)

    evaluate = commands.add_parser(
        'eval', parents=[common], help='Evaluate a trained model on a manifest.'
    )
    evaluate.add_argument('--model', required=True, metavar='FILE', help='Trained model.emof.')
    evaluate.add_argument('--manifest', required=True, metavar='CSV', help='Test manifest.')
    evaluate.add_argument('--output', '-o', metavar='FILE', help='Write metrics JSON here.')
    evaluate.set_defaults(handler=run_eval)

    infer = commands.add_parser('infer', parents=[common], help='Classify a single WAV file.')
    infer.add_argument('--model', required=True, metavar='FILE', help='Trained model.emof.')
    infer.add_argument('input', metavar='WAV', help='Audio file to classify.')
    infer.set_defaults(handler=run_infer)

    model = commands.add_parser('model', help='Model inspection.')
    model_actions = model.add_subparsers(dest='action', metavar='ACTION', required=True)
    macs = model_actions.add_parser(
        'macs', parents=[common], help='Print the multiply-accumulate report as JSON.'
    )
    macs.add_argument('--shapes', action='store_true', help='Include the layer shape table.')
    macs.set_defaults(handler=run_macs)

    gradcheck = commands.add_parser(
        'gradcheck', parents=[common], help='Run the finite-difference gradient checks.'
    )
    gradcheck.add_argument('--op', action='append', metavar='NAME', help='Check only NAME.')
    gradcheck.add_argument('--seed', type=int, default=0, help='Seed of the random shapes.')
    gradcheck.set_defaults(handler=run_gradcheck)
    return parser


def get_configuration(args: argparse.Namespace) -> emoformer.Configuration:
    cfg = emoformer.default_configuration()
    if args.profile:
        cfg = emoformer.configuration_from_profile(args.profile, cfg)

    cfg = emoformer.configuration_from_args(args, cfg)

    if args.jobs is not None:
        cfg.jobs = args.jobs
    if args.feature_kind:
        cfg.feature_kind = emoformer.FeatureKind(args.feature_kind)
    if args.emotions:
        cfg.emotions = args.emotions
    return cfg


def refuse_existing(path: Path, force: bool):
    if path.exists() and not force:
        raise emoformer.ArgumentError(
            f'{path} already exists. Use --force to overwrite existing outputs.'
        )


def run_resample(args: argparse.Namespace, cfg: emoformer.Configuration) -> int:
    output = Path(args.output)
    refuse_existing(output, args.force)
    rate = args.rate or cfg.sample_rate
    clip = emoformer.resample(emoformer.load_wav(args.input), rate)
    emoformer.save_wav(clip, output)
    log.info('Wrote %s (%d samples at %d Hz)', output, len(clip), rate)
    return EXIT_SUCCESS


def run_augment(args: argparse.Namespace, cfg: emoformer.Configuration) -> int:
    # The manifest given here is by definition a training manifest.
    source = emoformer.read_manifest(args.manifest)
    manifest = emoformer.Manifest(source.entries, emoformer.Partition.TRAIN)
    emoformer.require_augmentable(manifest)
    if args.plan:
        plan = emoformer.AugmentPlan.from_json_file(args.plan)
    else:
        plan = emoformer.AugmentPlan.from_configuration(cfg)
    out_dir = emoformer.prepare_output_directory(args.out_dir, ('manifest.csv',), args.force)

    def augment_entry(item: tuple[int, emoformer.ManifestEntry]) -> list[emoformer.ManifestEntry]:
        number, entry = item
        written = []
        for variant in emoformer.augment_set(emoformer.load_wav(entry.path), plan):
            tag = variant.source_id.rsplit('#', 1)[-1].replace('=', '')
            path = out_dir / f'{number:05d}_{Path(entry.path).stem}_{tag}.wav'
            refuse_existing(path, args.force)
            emoformer.save_wav(variant, path)
            written.append(
                emoformer.ManifestEntry(
                    str(path), entry.label, entry.speaker, variant.duration_seconds
                )
            )
        return written

    groups = parallel_map(augment_entry, list(enumerate(manifest)), cfg.jobs or 1)
    entries = tuple(entry for group in groups for entry in group)
    emoformer.write_manifest(emoformer.Manifest(entries), out_dir / 'manifest.csv')
    log.info(
        'Wrote %d augmented clips from %d originals to %s', len(entries), len(manifest), out_dir
    )
    return EXIT_SUCCESS


def run_features(args: argparse.Namespace, cfg: emoformer.Configuration) -> int:
    manifest = emoformer.read_manifest(args.manifest)
    mfcc = emoformer.MfccConfig.from_configuration(cfg)
    xvector_model = None
    if args.kind == emoformer.FeatureKind.XVECTOR:
        if args.weights:
            xvector_model = emoformer.load_xvector_model(args.weights, mfcc.n_coeffs)
        else:
            xvector_model = emoformer.xvector_model_from_configuration(cfg, mfcc.n_coeffs)
    context = emoformer.FeatureContext(mfcc=mfcc, xvector_model=xvector_model)
    out_dir = emoformer.prepare_output_directory(args.out_dir, (), args.force)

    def extract(item: tuple[int, emoformer.ManifestEntry]) -> int:
        number, entry = item
        clip = emoformer.resample(emoformer.load_wav(entry.path), cfg.sample_rate)
        samples = emoformer.extract_features(args.kind, clip, context)
        for sample in samples:
            path = out_dir / f'{number:05d}_{Path(entry.path).stem}.{sample.index:03d}.emof'
            refuse_existing(path, args.force)
            emoformer.save_feature(
                path, sample.data.astype(np.float32), entry.path, entry.label, sample.index
            )
        return len(samples)

    counts = parallel_map(extract, list(enumerate(manifest)), cfg.jobs or 1)
    log.info('Wrote %d %s feature files to %s', sum(counts), args.kind, out_dir)
    return EXIT_SUCCESS


def run_train(args: argparse.Namespace, cfg: emoformer.Configuration) -> int:
    kind = emoformer.FeatureKind(cfg.feature_kind or emoformer.FeatureKind.MFCC)
    emotions = emoformer.EmotionSet.parse(cfg.emotions or '7')
    manifest = emoformer.read_manifest(args.manifest)
    emoformer.prepare_output_directory(args.out_dir, emoformer.REPORT_FILES, args.force)

    config = emoformer.ExperimentConfig.from_configuration(cfg, kind)
    report = emoformer.run_experiment(manifest, kind, emotions, config)
    out_dir = emoformer.write_reports(report, args.out_dir, force=True)

    summary = {
        'out_dir': str(out_dir),
        'accuracy': report.clip_metrics.accuracy,
        'f1': report.clip_metrics.macro_f1,
        'best_epoch': report.history.best_epoch,
    }
    print(emoformer.dump_json(summary), end='')
    return EXIT_SUCCESS


def run_eval(args: argparse.Namespace, cfg: emoformer.Configuration) -> int:
    predictor = emoformer.Predictor.load(args.model)
    manifest = emoformer.read_manifest(args.manifest).select(predictor.emotions)
    if not len(manifest):
        raise emoformer.ArgumentError(
            f'Manifest {args.manifest} has no clips labelled with the emotions of the model'
        )

    def predict(entry: emoformer.ManifestEntry) -> emoformer.Prediction:
        return predictor.predict_clip(emoformer.load_wav(entry.path))

    predictions = parallel_map(predict, manifest.entries, cfg.jobs or 1)
    y_true = [predictor.emotions.index(label) for label in manifest.labels]
    y_pred = [int(np.argmax(p.probabilities)) for p in predictions]
    metrics = emoformer.compute_metrics(y_true, y_pred, len(predictor.emotions))
    result = {
        'clips': len(manifest),
        'metrics': metrics.to_dict(predictor.emotions),
        'latency_seconds_per_clip': float(np.mean([p.latency_seconds for p in predictions])),
    }

    if args.output:
        output = Path(args.output)
        refuse_existing(output, args.force)
        output.write_text(emoformer.dump_json(result), encoding='utf-8')
    else:
        print(emoformer.dump_json(result), end='')
    return EXIT_SUCCESS


def run_infer(args: argparse.Namespace, cfg: emoformer.Configuration) -> int:
    prediction = emoformer.infer(args.input, args.model)
    print(emoformer.dump_json(prediction.to_dict()), end='')
    return EXIT_SUCCESS


def run_macs(args: argparse.Namespace, cfg: emoformer.Configuration) -> int:
    emotions = emoformer.EmotionSet.parse(cfg.emotions or '7')
    config = emoformer.EmoFormerConfig.from_configuration(cfg, num_classes=len(emotions))
    model = emoformer.build(config)
    result = emoformer.count_macs(model).to_dict()
    result['config'] = config.to_dict()
    result['sequence_modes'] = {
        mode: report.to_dict()
        for mode, report in emoformer.mac_reports_by_sequence_mode(config).items()
    }
    if args.shapes:
        result['shapes'] = [
            {'layer': row.layer, 'input': list(row.input_shape), 'output': list(row.output_shape)}
            for row in model.shape_table()
        ]
    print(emoformer.dump_json(result), end='')
    return EXIT_SUCCESS


def run_gradcheck(args: argparse.Namespace, cfg: emoformer.Configuration) -> int:
    if args.op:
        unknown = sorted(set(args.op) - set(emoformer.known_gradcheck_cases))
        if unknown:
            raise emoformer.ArgumentError(
                'Unknown operation(s): '
                + ', '.join(unknown)
                + '. Available: '
                + ', '.join(emoformer.known_gradcheck_cases)
            )
    results = emoformer.run_gradcheck_suite(seed=args.seed, only=args.op)
    for result in results:
        status = 'ok' if result.passed else 'FAILED'
        error = f'{result.max_relative_error:.3e}'
        print(f'{result.op:<22} {error}  (tolerance {result.tolerance:.0e}) {status}')

    failed = [result.op for result in results if not result.passed]
    if failed:
        warn('Gradient check failed for ' + format_human_readable(failed))
        return EXIT_RUNTIME
    return EXIT_SUCCESS


def main(argv: Sequence[str] | None = None) -> int:
    parser = argument_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        warn(f'{e.prog}: {e.message}')
        warn(f'Run `{e.prog} --help` to see the available options.')
        return EXIT_VALIDATION

    if args.help:
        parser.print_help()
        return EXIT_SUCCESS

    if args.version:
        print(emoformer.dump_json(build_metadata()), end='')
        return EXIT_SUCCESS

    if args.list_profiles:
        for profile in sorted(emoformer.available_profiles()):
            print(profile)
        return EXIT_SUCCESS

    if args.print_config:
        try:
            configuration = emoformer.default_configuration()
            if args.root_profile:
                configuration = emoformer.configuration_from_profile(
                    args.root_profile, configuration
                )
        except (ValueError, KeyError) as e:
            warn(f'Could not load configuration: {e}')
            return EXIT_VALIDATION
        with (
            open(args.print_config, 'w', encoding='utf-8')
            if isinstance(args.print_config, str)
            else nullcontext(args.print_config)
        ) as dst:
            emoformer.print_configuration_file(dst, configuration)
        return EXIT_SUCCESS

    if getattr(args, 'handler', None) is None:
        parser.print_help(sys.stderr)
        return EXIT_VALIDATION

    configure_logging(args)
    try:
        configuration = get_configuration(args)
    except (ValueError, KeyError) as e:
        warn(f'Could not load configuration: {e}')
        return EXIT_VALIDATION

    try:
        return args.handler(args, configuration)
    except Exception as e:
        log.debug('Command failed', exc_info=True)
        warn(f'{type(e).__name__}: {e}')
        return exit_code(e)


if __name__ == '__main__':
    sys.exit(main())
