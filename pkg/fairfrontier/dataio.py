"""
fairfrontier Data I/O

CSV ingestion for datasets, score columns and external nuisance predictions,
plus the deterministic CSV writer used for every tabular artifact.
"""

import hashlib
import logging
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .core import B, R, Dataset
from .errors import InputError


logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.10g"


def _read_frame(path: Path) -> pd.DataFrame:
    if not Path(path).exists():
        raise InputError(f"Input file not found: {path}")
    try:
        return pd.read_csv(path)
    except pd.errors.ParserError as e:
        raise InputError(f"Malformed CSV {path}: {e}") from None
    except pd.errors.EmptyDataError:
        raise InputError(f"Empty CSV: {path}") from None


def _reject_missing(frame: pd.DataFrame, path: Path, columns: Sequence[str]) -> None:
    missing = frame[list(columns)].isna()
    if missing.values.any():
        row, col = np.argwhere(missing.values)[0]
        # header is line 1
        raise InputError(f"{path}: line {row + 2}: missing value in column '{columns[col]}'")


def file_digest(path: Path) -> str:
    """SHA-256 of the file bytes."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def load_dataset_csv(path: Path, y_column: str = "y", group_column: str = "g",
                     group_labels: Optional[Tuple[str, str]] = None,
                     covariates: Optional[Sequence[str]] = None) -> Dataset:
    """
    Read a dataset CSV.

    Required columns are the outcome and the group; every other column is a
    numeric covariate in file order unless `covariates` names a subset.
    Group labels map to (r, b) by first appearance unless pinned.
    """
    path = Path(path)
    frame = _read_frame(path)
    for col in (y_column, group_column):
        if col not in frame.columns:
            raise InputError(f"{path}: required column '{col}' not found (have {list(frame.columns)})")
    if covariates is None:
        covariates = [c for c in frame.columns if c not in (y_column, group_column)]
    if not covariates:
        raise InputError(f"{path}: no covariate columns")
    _reject_missing(frame, path, [y_column, group_column, *covariates])

    for col in [y_column, *covariates]:
        numeric = pd.to_numeric(frame[col], errors="coerce")
        if numeric.isna().any():
            row = int(np.flatnonzero(numeric.isna().values)[0])
            raise InputError(f"{path}: line {row + 2}: non-numeric value {frame[col].iloc[row]!r} in column '{col}'")
        frame[col] = numeric.astype(float)

    raw = frame[group_column].astype(str).values
    if group_labels is None:
        seen = list(dict.fromkeys(raw))
        if len(seen) != 2:
            raise InputError(f"{path}: expected exactly two group labels in '{group_column}', found {seen}")
        group_labels = (seen[0], seen[1])
    group_labels = (str(group_labels[0]), str(group_labels[1]))
    unknown = ~np.isin(raw, group_labels)
    if unknown.any():
        row = int(np.flatnonzero(unknown)[0])
        raise InputError(f"{path}: line {row + 2}: unknown group label {raw[row]!r}. "
                         f"Must be one of {list(group_labels)}")
    group = np.where(raw == group_labels[0], R, B).astype(np.int8)

    x = frame[list(covariates)].to_numpy(dtype=float)
    bad = ~np.isfinite(x).all(axis=1)
    if bad.any():
        raise InputError(f"{path}: line {int(np.flatnonzero(bad)[0]) + 2}: non-finite covariate")

    dataset = Dataset(frame[y_column].to_numpy(dtype=float), group, x, group_labels, tuple(covariates))
    logger.info(f"Loaded {path}: n={dataset.n}, d_x={dataset.d_x}, groups r={group_labels[0]!r} b={group_labels[1]!r}")
    return dataset


def load_score_column(path: Path, column: str, n: int) -> np.ndarray:
    """Read a status-quo score column a*(X_i) aligned to dataset rows."""
    frame = _read_frame(Path(path))
    if column not in frame.columns:
        raise InputError(f"{path}: score column '{column}' not found")
    _reject_missing(frame, Path(path), [column])
    scores = frame[column].to_numpy(dtype=float)
    if scores.shape[0] != n:
        raise InputError(f"{path}: {scores.shape[0]} scores for {n} observations")
    return scores


def load_external_predictions(path: Path, n: int) -> np.ndarray:
    """Two-column CSV of out-of-fold (Δθ^r, Δθ^b), one row per observation."""
    frame = _read_frame(Path(path))
    if frame.shape[1] != 2:
        raise InputError(f"{path}: expected 2 prediction columns, found {frame.shape[1]}")
    _reject_missing(frame, Path(path), list(frame.columns))
    values = frame.to_numpy(dtype=float)
    if values.shape[0] != n:
        raise InputError(f"{path}: {values.shape[0]} prediction rows for {n} observations")
    if not np.isfinite(values).all():
        raise InputError(f"{path}: non-finite prediction")
    return values


def write_csv(frame: pd.DataFrame, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.debug(f"Wrote {path} ({len(frame)} rows)")
    return path
