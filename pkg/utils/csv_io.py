"""
CSV input/output
Sample tables with theta_* parameter columns and x_* data columns
"""

from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd

from core.errors import InputError
from core.kernels import SampleSet
from utils.logger import get_logger

logger = get_logger(__name__)

THETA_PREFIX = 'theta_'
X_PREFIX = 'x_'


def sample_frame(samples: SampleSet) -> pd.DataFrame:
    columns = {}
    if samples.has_thetas:
        for i in range(samples.p):
            columns[f'{THETA_PREFIX}{i}'] = samples.thetas[:, i]
    for j in range(samples.d):
        columns[f'{X_PREFIX}{j}'] = samples.points[:, j]
    return pd.DataFrame(columns)


def write_samples(path: Path, samples: SampleSet) -> Path:
    """Header row, theta_ columns first, floats at full round-trip precision"""
    return write_table(path, sample_frame(samples))


def write_table(path: Path, frame: pd.DataFrame) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        frame.to_csv(path, index=False, lineterminator='\n')
    except OSError as e:
        raise InputError(f"cannot write {path}: {e}") from e
    logger.debug(f"wrote {len(frame)} rows x {frame.shape[1]} columns to {path}")
    return path


def write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    return write_table(path, pd.DataFrame(list(rows), columns=list(header)))


def _numeric_frame(path: Path, frame: pd.DataFrame) -> pd.DataFrame:
    numeric = frame.apply(pd.to_numeric, errors='coerce')
    bad = numeric.isna() | ~np.isfinite(numeric.to_numpy(dtype=float, na_value=np.nan))
    if bad.to_numpy().any():
        row, col = np.argwhere(bad.to_numpy())[0]
        # +2: one header line, 1-based rows
        raise InputError(f"{path}: non-numeric or non-finite value {frame.iat[row, col]!r} "
                         f"at row {row + 2}, column '{frame.columns[col]}'")
    return numeric.astype(float)


def read_samples(path: Path, require_thetas: bool = False,
                 expected_columns: Optional[List[str]] = None) -> SampleSet:
    """Read a sample CSV; columns named theta_* become parameter labels"""
    path = Path(path)
    if not path.exists():
        raise InputError(f"data file not found: {path}")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise InputError(f"{path}: malformed CSV ({e})") from e

    if expected_columns is not None and list(frame.columns) != list(expected_columns):
        raise InputError(f"{path}: header {list(frame.columns)} does not match {list(expected_columns)}")
    if frame.empty:
        raise InputError(f"{path}: no data rows")

    theta_cols = [c for c in frame.columns if c.startswith(THETA_PREFIX)]
    data_cols = [c for c in frame.columns if not c.startswith(THETA_PREFIX)]
    if require_thetas and not theta_cols:
        raise InputError(f"{path}: joint sample needs theta_ columns (found {list(frame.columns)})")
    if not data_cols:
        raise InputError(f"{path}: no data columns")

    numeric = _numeric_frame(path, frame)
    thetas = numeric[theta_cols].to_numpy() if theta_cols else None
    return SampleSet(numeric[data_cols].to_numpy(), thetas)
