"""Outcome schemas, observational records, orderings, and masking.

Conventions used throughout the package:
  * outcomes are indexed 1..k in public APIs (matching CSV columns y_1..y_k),
    0-based only inside array code;
  * categorical values are 1-based integers in [1, L];
  * treatments are binary, 0 or 1.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DataError
from .rngs import derive_rng

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"

__all__ = [
    "CONTINUOUS",
    "CATEGORICAL",
    "OutcomeSpec",
    "OutcomeSchema",
    "ObservationalRecord",
    "Dataset",
    "Ordering",
    "MaskTriple",
    "build_orderings",
    "masks_for_step",
    "validate_record",
]


@dataclass(frozen=True)
class OutcomeSpec:
    """One outcome slot: continuous, or categorical with num_categories levels."""

    name: str
    kind: str
    num_categories: Optional[int] = None

    def __post_init__(self):
        if self.kind not in (CONTINUOUS, CATEGORICAL):
            raise ValueError(f"unknown outcome kind {self.kind!r}")
        if self.kind == CATEGORICAL:
            if self.num_categories is None or self.num_categories < 2:
                raise ValueError(
                    f"categorical outcome {self.name!r} needs num_categories >= 2"
                )
        elif self.num_categories is not None:
            raise ValueError(
                f"continuous outcome {self.name!r} must not set num_categories"
            )


@dataclass(frozen=True)
class OutcomeSchema:
    """Ordered collection of k >= 1 outcome specs with unique names."""

    specs: tuple[OutcomeSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "specs", tuple(self.specs))
        if len(self.specs) < 1:
            raise ValueError("schema needs at least one outcome")
        names = [s.name for s in self.specs]
        if len(set(names)) != len(names):
            raise ValueError(f"outcome names must be unique, got {names}")

    @property
    def k(self) -> int:
        return len(self.specs)

    def is_continuous(self, slot: int) -> bool:
        """slot is 0-based."""
        return self.specs[slot].kind == CONTINUOUS

    def num_categories(self, slot: int) -> int:
        spec = self.specs[slot]
        if spec.kind != CATEGORICAL:
            raise ValueError(f"outcome {spec.name!r} is not categorical")
        return spec.num_categories

    @property
    def continuous_slots(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.k) if self.is_continuous(i))

    @property
    def categorical_slots(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.k) if not self.is_continuous(i))

    def to_dict(self) -> dict:
        return {
            "outcomes": [
                {
                    "name": s.name,
                    "kind": s.kind,
                    **(
                        {"num_categories": s.num_categories}
                        if s.kind == CATEGORICAL
                        else {}
                    ),
                }
                for s in self.specs
            ]
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "OutcomeSchema":
        try:
            specs = tuple(
                OutcomeSpec(
                    name=o["name"],
                    kind=o["kind"],
                    num_categories=o.get("num_categories"),
                )
                for o in payload["outcomes"]
            )
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed schema payload: {exc}") from exc
        return cls(specs)

    @classmethod
    def all_continuous(cls, names: Sequence[str]) -> "OutcomeSchema":
        return cls(tuple(OutcomeSpec(name, CONTINUOUS) for name in names))


@dataclass(frozen=True)
class ObservationalRecord:
    """One factual tuple (x, a, y) with y conforming to the schema."""

    x: np.ndarray
    a: int
    y: tuple

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=np.float64))
        object.__setattr__(self, "y", tuple(self.y))


def validate_record(record: ObservationalRecord, schema: OutcomeSchema) -> Optional[str]:
    """Return None if the record is valid, else a message for the first violation."""
    x = np.asarray(record.x, dtype=np.float64)
    if x.ndim != 1:
        return f"x: expected a vector, got ndim={x.ndim}"
    if not np.all(np.isfinite(x)):
        return "x: non-finite covariate value"
    if record.a not in (0, 1):
        return f"a: treatment must be 0 or 1, got {record.a!r}"
    if len(record.y) != schema.k:
        return f"y: expected {schema.k} outcome values, got {len(record.y)}"
    for slot, value in enumerate(record.y):
        spec = schema.specs[slot]
        if spec.kind == CONTINUOUS:
            v = float(value)
            if not math.isfinite(v):
                return f"y[{slot + 1}] ({spec.name}): non-finite continuous value"
        else:
            if float(value) != int(value):
                return f"y[{slot + 1}] ({spec.name}): category must be an integer"
            v = int(value)
            if not 1 <= v <= spec.num_categories:
                return (
                    f"y[{slot + 1}] ({spec.name}): category {v} outside "
                    f"1..{spec.num_categories}"
                )
    return None


class Dataset:
    """Observational dataset stored as arrays, with record-level access.

    X: (n, d_x) float64, A: (n,) int, Y: (n, k) float64 where categorical
    slots hold integer-valued floats.
    """

    def __init__(
        self,
        schema: OutcomeSchema,
        X: np.ndarray,
        A: np.ndarray,
        Y: np.ndarray,
        validate: bool = True,
    ):
        self.schema = schema
        self.X = np.asarray(X, dtype=np.float64)
        self.A = np.asarray(A, dtype=np.int64)
        self.Y = np.asarray(Y, dtype=np.float64)
        if self.X.ndim != 2:
            raise DataError("X must be (n, d_x)")
        n = self.X.shape[0]
        if self.A.shape != (n,) or self.Y.shape != (n, schema.k):
            raise DataError(
                f"shape mismatch: X {self.X.shape}, A {self.A.shape}, Y {self.Y.shape}"
            )
        if validate:
            problem = self._validate_arrays()
            if problem is not None:
                raise DataError(problem)

    def _validate_arrays(self) -> Optional[str]:
        if not np.all(np.isfinite(self.X)):
            return "non-finite covariate value"
        if not np.all((self.A == 0) | (self.A == 1)):
            return "treatment must be 0 or 1"
        for slot, spec in enumerate(self.schema.specs):
            col = self.Y[:, slot]
            if spec.kind == CONTINUOUS:
                if not np.all(np.isfinite(col)):
                    return f"non-finite value in continuous outcome {spec.name!r}"
            else:
                if not np.all(col == np.round(col)):
                    return f"non-integer value in categorical outcome {spec.name!r}"
                if not np.all((col >= 1) & (col <= spec.num_categories)):
                    return f"category outside 1..{spec.num_categories} in {spec.name!r}"
        return None

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def __len__(self) -> int:
        return self.n

    @property
    def covariate_dim(self) -> int:
        return self.X.shape[1]

    def record(self, j: int) -> ObservationalRecord:
        y = tuple(
            float(self.Y[j, s]) if self.schema.is_continuous(s) else int(self.Y[j, s])
            for s in range(self.schema.k)
        )
        return ObservationalRecord(x=self.X[j].copy(), a=int(self.A[j]), y=y)

    @property
    def records(self) -> list[ObservationalRecord]:
        return [self.record(j) for j in range(self.n)]

    @classmethod
    def from_records(
        cls, schema: OutcomeSchema, records: Iterable[ObservationalRecord]
    ) -> "Dataset":
        records = list(records)
        if not records:
            raise DataError("dataset needs at least one record")
        for j, rec in enumerate(records):
            problem = validate_record(rec, schema)
            if problem is not None:
                raise DataError(f"record {j}: {problem}")
        d = records[0].x.shape[0]
        if any(rec.x.shape != (d,) for rec in records):
            raise DataError("all records must share covariate_dim")
        X = np.stack([rec.x for rec in records])
        A = np.array([rec.a for rec in records], dtype=np.int64)
        Y = np.array([[float(v) for v in rec.y] for rec in records], dtype=np.float64)
        return cls(schema, X, A, Y, validate=False)

    def subset(self, indices: np.ndarray) -> "Dataset":
        indices = np.asarray(indices)
        return Dataset(
            self.schema, self.X[indices], self.A[indices], self.Y[indices],
            validate=False,
        )


@dataclass(frozen=True)
class Ordering:
    """A factorization order: permutation of outcome indices 1..k."""

    sigma: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "sigma", tuple(int(s) for s in self.sigma))
        k = len(self.sigma)
        if sorted(self.sigma) != list(range(1, k + 1)):
            raise ValueError(f"{self.sigma} is not a permutation of 1..{k}")

    @property
    def k(self) -> int:
        return len(self.sigma)

    def slot_at(self, position: int) -> int:
        """0-based slot generated at 1-based position."""
        return self.sigma[position - 1] - 1

    @classmethod
    def identity(cls, k: int) -> "Ordering":
        return cls(tuple(range(1, k + 1)))


@dataclass(frozen=True)
class MaskTriple:
    """Binary masks over the k outcome slots for one training step.

    input_mask marks factually observed outcomes, target_mask is one-hot at
    the slot whose loss is computed, conditional_mask marks the observed
    outcomes that condition the target.
    """

    input_mask: np.ndarray
    target_mask: np.ndarray
    conditional_mask: np.ndarray

    def __post_init__(self):
        for name in ("input_mask", "target_mask", "conditional_mask"):
            arr = np.asarray(getattr(self, name), dtype=np.int8)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        self.check()

    def check(self) -> None:
        k = self.input_mask.shape[0]
        if self.target_mask.shape != (k,) or self.conditional_mask.shape != (k,):
            raise ValueError("mask length mismatch")
        for name in ("input_mask", "target_mask", "conditional_mask"):
            arr = getattr(self, name)
            if not np.all((arr == 0) | (arr == 1)):
                raise ValueError(f"{name} must be binary")
        if int(self.target_mask.sum()) != 1:
            raise ValueError("target_mask must have exactly one bit set")
        if np.any(self.conditional_mask & self.target_mask):
            raise ValueError("a target slot cannot condition itself")
        if np.any(self.conditional_mask > self.input_mask):
            raise ValueError("only observed outcomes may condition")


def build_orderings(k: int, max_orderings: int = 8, seed: int = 0) -> list[Ordering]:
    """All k! orderings when they fit under max_orderings, else a uniform
    sample without replacement that always contains the identity.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if max_orderings < 1:
        raise ValueError("max_orderings must be >= 1")
    total = math.factorial(k)
    if total <= max_orderings:
        return [Ordering(p) for p in itertools.permutations(range(1, k + 1))]
    rng = derive_rng(seed, 0)
    identity = tuple(range(1, k + 1))
    chosen = [identity]
    seen = {identity}
    while len(chosen) < max_orderings:
        cand = tuple(int(v) for v in rng.permutation(k) + 1)
        if cand not in seen:
            seen.add(cand)
            chosen.append(cand)
    return [Ordering(p) for p in chosen]


def masks_for_step(
    ordering: Ordering, target_position: int, observed: np.ndarray
) -> MaskTriple:
    """Masks for training position `target_position` (1-based) of `ordering`.

    observed is the factual observation mask; the target slot must be
    observed, and only observed predecessors condition it.
    """
    k = ordering.k
    if not 1 <= target_position <= k:
        raise ValueError(f"target_position {target_position} outside 1..{k}")
    observed = np.asarray(observed, dtype=np.int8)
    if observed.shape != (k,):
        raise ValueError("observed mask length mismatch")
    target_slot = ordering.slot_at(target_position)
    if observed[target_slot] != 1:
        raise ValueError(
            f"outcome {target_slot + 1} is unobserved and cannot be a training target"
        )
    target = np.zeros(k, dtype=np.int8)
    target[target_slot] = 1
    conditional = np.zeros(k, dtype=np.int8)
    for pos in range(1, target_position):
        slot = ordering.slot_at(pos)
        if observed[slot]:
            conditional[slot] = 1
    return MaskTriple(
        input_mask=observed, target_mask=target, conditional_mask=conditional
    )
