"""File formats: dataset CSV, schema JSON, sample dumps, oracle sidecars.

All writers emit deterministic bytes for identical inputs (shortest
round-trip float formatting, fixed column order, no timestamps).
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import DataError
from .schema import Dataset, OutcomeSchema

__all__ = [
    "format_value",
    "write_schema_json",
    "read_schema_json",
    "write_dataset_csv",
    "read_dataset_csv",
    "write_samples_csv",
    "read_samples_csv",
]


def format_value(value: float, categorical: bool = False) -> str:
    """Shortest exact decimal for floats, bare integers for categories."""
    if categorical:
        return str(int(value))
    return repr(float(value))


def write_schema_json(schema: OutcomeSchema, path) -> None:
    Path(path).write_text(json.dumps(schema.to_dict(), indent=2, sort_keys=True) + "\n")


def read_schema_json(path) -> OutcomeSchema:
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read schema {path}: {exc}") from exc
    return OutcomeSchema.from_dict(payload)


def dataset_header(schema: OutcomeSchema, d_x: int) -> list[str]:
    return (
        [f"x_{i}" for i in range(d_x)]
        + ["a"]
        + [f"y_{i}" for i in range(1, schema.k + 1)]
    )


def write_dataset_csv(dataset: Dataset, path) -> None:
    schema = dataset.schema
    is_cat = [not schema.is_continuous(s) for s in range(schema.k)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(dataset_header(schema, dataset.covariate_dim))
        for j in range(dataset.n):
            row = [format_value(v) for v in dataset.X[j]]
            row.append(str(int(dataset.A[j])))
            row.extend(
                format_value(dataset.Y[j, s], categorical=is_cat[s])
                for s in range(schema.k)
            )
            writer.writerow(row)


def read_dataset_csv(path, schema: OutcomeSchema) -> Dataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        k = schema.k
        expected_tail = ["a"] + [f"y_{i}" for i in range(1, k + 1)]
        d_x = len(header) - 1 - k
        if d_x < 1 or header != [f"x_{i}" for i in range(d_x)] + expected_tail:
            raise DataError(f"{path}: header does not match dataset format")
        X_rows, A_rows, Y_rows = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: wrong number of fields")
            try:
                X_rows.append([float(v) for v in row[:d_x]])
                A_rows.append(int(row[d_x]))
                Y_rows.append([float(v) for v in row[d_x + 1 :]])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    if not X_rows:
        raise DataError(f"{path}: no data rows")
    return Dataset(
        schema,
        np.array(X_rows, dtype=np.float64),
        np.array(A_rows, dtype=np.int64),
        np.array(Y_rows, dtype=np.float64),
    )


def samples_header(k: int) -> list[str]:
    return ["unit_id", "a", "ordering_id", "draw_id"] + [
        f"y_{i}" for i in range(1, k + 1)
    ]


def write_samples_csv(path, schema: OutcomeSchema, rows) -> None:
    """rows: iterable of (unit_id, a, ordering_id, draw_id, y_values)."""
    is_cat = [not schema.is_continuous(s) for s in range(schema.k)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(samples_header(schema.k))
        for unit_id, a, ordering_id, draw_id, y in rows:
            record = [str(int(unit_id)), str(int(a)), str(int(ordering_id)),
                      str(int(draw_id))]
            record.extend(
                format_value(y[s], categorical=is_cat[s]) for s in range(schema.k)
            )
            writer.writerow(record)


def read_samples_csv(path, schema: OutcomeSchema):
    """Return (unit_id, a, ordering_id, draw_id, Y) arrays from a sample dump."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if header != samples_header(schema.k):
            raise DataError(f"{path}: header does not match sample dump format")
        meta, values = [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: wrong number of fields")
            try:
                meta.append([int(row[0]), int(row[1]), int(row[2]), int(row[3])])
                values.append([float(v) for v in row[4:]])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    meta = np.array(meta, dtype=np.int64).reshape(-1, 4)
    values = np.array(values, dtype=np.float64).reshape(-1, schema.k)
    return meta[:, 0], meta[:, 1], meta[:, 2], meta[:, 3], values
