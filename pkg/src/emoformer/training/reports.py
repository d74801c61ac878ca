import json
import logging
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from emoformer.errors import ArgumentError, AudioIOError
from emoformer.model import save_weights
from emoformer.training.emotions import EmotionSet
from emoformer.training.experiment import ExperimentReport

log = logging.getLogger(__name__)

REPORT_FILES = ('report.json', 'metrics.json', 'confusion.csv', 'confusion.pgm', 'model.emof')

# Edge length in pixels of one confusion matrix cell.
PGM_CELL_SIZE = 16


def dump_json(data: Any) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + '\n'


def confusion_frame(confusion: np.ndarray, emotions: EmotionSet) -> pd.DataFrame:
    frame = pd.DataFrame(confusion, index=list(emotions), columns=list(emotions))
    frame.index.name = 'true/predicted'
    return frame


def confusion_pgm(confusion: np.ndarray, cell_size: int = PGM_CELL_SIZE) -> bytes:
    """
    Binary PGM of the confusion matrix, one square per entry. Brightness is proportional
    to the count; the largest entry is white.
    """
    confusion = np.asarray(confusion, dtype=np.float64)
    peak = confusion.max() if confusion.size else 0.0
    levels = np.zeros_like(confusion) if peak == 0 else np.rint(255 * confusion / peak)
    image = np.kron(levels, np.ones((cell_size, cell_size))).astype(np.uint8)
    height, width = image.shape
    return f'P5\n{width} {height}\n255\n'.encode('ascii') + image.tobytes()


def prepare_output_directory(out_dir: str | Path, names: tuple[str, ...], force: bool) -> Path:
    """
    Creates the directory and refuses to overwrite existing outputs unless forced.

    :raises ArgumentError: If an output exists and force is not set.
    """
    out_dir = Path(out_dir)
    existing = [name for name in names if (out_dir / name).exists()]
    if existing and not force:
        raise ArgumentError(
            f'{out_dir / existing[0]} already exists. Use --force to overwrite existing outputs.'
        )
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise AudioIOError(out_dir, e) from e
    return out_dir


def write_reports(report: ExperimentReport, out_dir: str | Path, force: bool = False) -> Path:
    """
    Writes report.json, the timing-free metrics.json, the clip-level confusion matrix as CSV
    and PGM, and the trained model with everything inference needs.
    """
    out_dir = prepare_output_directory(out_dir, REPORT_FILES, force)
    confusion = report.clip_metrics.confusion
    try:
        (out_dir / 'report.json').write_text(dump_json(report.to_dict()), encoding='utf-8')
        (out_dir / 'metrics.json').write_text(dump_json(report.metrics_dict()), encoding='utf-8')
        confusion_frame(confusion, report.emotions).to_csv(out_dir / 'confusion.csv')
        (out_dir / 'confusion.pgm').write_bytes(confusion_pgm(confusion))
    except OSError as e:
        raise AudioIOError(out_dir, e) from e
    save_weights(report.model, out_dir / 'model.emof', metadata=report.model_metadata())
    log.info('Wrote experiment reports to %s', out_dir)
    return out_dir
