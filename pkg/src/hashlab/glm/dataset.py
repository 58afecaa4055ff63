"""Design-matrix construction from delimited tables.

Any table with a header row works. Predictors must be numeric columns;
interactions are products of two named columns. Subject ids may be any
hashable column and are coded to integers.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

INTERCEPT = "intercept"


class DatasetError(ValueError):
    """Malformed table or design request."""


@dataclass
class Dataset:
    x: np.ndarray
    columns: list[str]
    y: np.ndarray
    subjects: np.ndarray | None = None
    subject_labels: list[str] | None = None

    def __post_init__(self) -> None:
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.ndim != 2 or self.x.shape[0] != self.y.shape[0]:
            raise DatasetError(
                f"design is {self.x.shape}, response has {self.y.shape[0]} rows"
            )
        if len(self.columns) != self.x.shape[1]:
            raise DatasetError("one name per design column is required")
        if len(set(self.columns)) != len(self.columns):
            raise DatasetError(f"duplicate column names in {self.columns}")
        if not np.all(np.isfinite(self.x)) or not np.all(np.isfinite(self.y)):
            raise DatasetError("design and response must be finite (no missing cells)")
        if self.subjects is not None and len(self.subjects) != len(self.y):
            raise DatasetError("one subject id per observation is required")

    @property
    def n_obs(self) -> int:
        return self.x.shape[0]


def read_table(path: str | Path) -> pd.DataFrame:
    """Read a delimited table with a header row; the separator is sniffed."""
    frame = pd.read_csv(path, sep=None, engine="python")
    if frame.empty:
        raise DatasetError(f"table {path} has no rows")
    return frame


def build_dataset(
    frame: pd.DataFrame,
    response: str,
    predictors: Sequence[str],
    interactions: Sequence[str] = (),
    subject: str | None = None,
    intercept: bool = True,
) -> Dataset:
    """Assemble a Dataset; interaction terms are written "a:b"."""

    def numeric(col: str) -> np.ndarray:
        if col not in frame.columns:
            raise DatasetError(f"column {col!r} not in table ({list(frame.columns)})")
        values = pd.to_numeric(frame[col], errors="coerce").to_numpy(dtype=float)
        if np.isnan(values).any():
            raise DatasetError(f"column {col!r} has missing or non-numeric cells")
        return values

    y = numeric(response)
    names: list[str] = []
    cols: list[np.ndarray] = []
    if intercept:
        names.append(INTERCEPT)
        cols.append(np.ones(len(frame)))
    for col in predictors:
        names.append(col)
        cols.append(numeric(col))
    for spec in interactions:
        try:
            a, b = spec.split(":")
        except ValueError as exc:
            raise DatasetError(f"interaction {spec!r} must be 'a:b'") from exc
        names.append(f"{a}:{b}")
        cols.append(numeric(a) * numeric(b))

    subjects = None
    labels = None
    if subject is not None:
        if subject not in frame.columns:
            raise DatasetError(f"subject column {subject!r} not in table")
        codes, uniques = pd.factorize(frame[subject])
        subjects = codes.astype(int)
        labels = [str(u) for u in uniques]

    return Dataset(
        x=np.column_stack(cols),
        columns=names,
        y=y,
        subjects=subjects,
        subject_labels=labels,
    )
