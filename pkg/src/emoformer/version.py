import platform
from importlib import metadata
from pathlib import Path
from subprocess import run
from typing import Optional

import numpy as np
import pandas
import scipy
import sklearn


def execute(*cmd: str) -> str | None:
    try:
        return run(
            cmd,
            capture_output=True,
            text=True,
            check=True,
            cwd=Path(__file__).parent,
        ).stdout.strip()
    except Exception:
        return None


def get_version() -> Optional[str]:
    tag = execute('git', 'describe', '--tags', '--always', '--dirty')
    if tag:
        date = execute('git', 'show', '-s', '--format=%cs', 'HEAD')
        return f'{tag} ({date})'
    try:
        return metadata.version('emoformer')
    except metadata.PackageNotFoundError:
        return None


def build_metadata() -> dict[str, str]:
    """Versions of everything that influences numerical results."""
    return {
        'emoformer': get_version() or 'unknown',
        'python': platform.python_version(),
        'numpy': np.__version__,
        'scipy': scipy.__version__,
        'scikit-learn': sklearn.__version__,
        'pandas': pandas.__version__,
    }
