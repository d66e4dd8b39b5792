"""Readers for the sample-dump CSV format.

Expected header: unit_id,a,ordering_id,draw_id,y_1,...,y_k. The reader is
deliberately standalone: this package talks to the generator pipeline only
through its documented files.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

__all__ = ["SampleTable", "read_sample_csv"]

META_COLUMNS = ["unit_id", "a", "ordering_id", "draw_id"]


class SampleTable:
    """Sample dump held as arrays, with outcome columns accessed by name."""

    def __init__(self, meta: np.ndarray, values: np.ndarray,
                 outcome_names: list[str]):
        self.meta = meta
        self.values = values
        self.outcome_names = list(outcome_names)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def column(self, name: str) -> np.ndarray:
        if name not in self.outcome_names:
            raise KeyError(
                f"column {name!r} not in {self.outcome_names}"
            )
        return self.values[:, self.outcome_names.index(name)]

    def filtered(self, unit_id=None, arm=None) -> "SampleTable":
        keep = np.ones(self.n, dtype=bool)
        if unit_id is not None:
            keep &= self.meta[:, 0] == unit_id
        if arm is not None:
            keep &= self.meta[:, 1] == arm
        return SampleTable(self.meta[keep], self.values[keep],
                           self.outcome_names)


def read_sample_csv(path) -> SampleTable:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if header[: len(META_COLUMNS)] != META_COLUMNS or len(header) <= 4:
            raise ValueError(f"{path}: header is not a sample dump")
        outcome_names = header[4:]
        meta_rows, value_rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: wrong number of fields")
            meta_rows.append([int(v) for v in row[:4]])
            value_rows.append([float(v) for v in row[4:]])
    meta = np.array(meta_rows, dtype=np.int64).reshape(-1, 4)
    values = np.array(value_rows, dtype=np.float64).reshape(
        -1, len(outcome_names)
    )
    return SampleTable(meta, values, outcome_names)
