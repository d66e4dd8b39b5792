"""Joint outcome model: hierarchical masked training over factorization
orderings, autoregressive sampling, ordering aggregation, and point
estimates (CAPO / CATE).

One amortized generator per outcome slot handles every conditioning subset
through its conditional mask, so k models cover all orderings. Training runs
a curriculum over conditioning-set sizes s = 0..k-1 (the marginals first,
then progressively larger conditioning sets), followed by one mixed stage
that samples s uniformly. At inference, draws follow an ordering: the first
slot is sampled from its (x, a)-conditional marginal, later slots condition
on the values already drawn.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .categorical import CategoricalModel, cat_sample, train_categorical
from .diffusion import (
    ConditionBatch,
    ConditionalScoreModel,
    DiffusionSchedule,
    ModelConfig,
    TrainStreams,
    reverse_sample,
    train_conditional_score,
)
from .nn import AdamState
from .rngs import as_rng, derive_int_seed, derive_rng
from .schema import Dataset, Ordering, OutcomeSchema, build_orderings

__all__ = [
    "TrainConfig",
    "Standardization",
    "SampleSet",
    "JointOutcomeModel",
    "hierarchical_train",
    "autoregressive_sample",
    "aggregate_orderings",
    "predict_capo",
    "predict_cate",
    "subset_mask_sampler",
]


@dataclass(frozen=True)
class TrainConfig:
    epochs_per_stage: int = 50
    batch_size: int = 256
    learning_rate: float = 1e-3
    max_orderings: int = 8
    seed: int = 0


@dataclass
class Standardization:
    """Per-slot train-split mean/std for continuous outcomes (categorical
    slots pass through unchanged)."""

    means: np.ndarray
    stds: np.ndarray

    @classmethod
    def fit(cls, dataset: Dataset) -> "Standardization":
        schema = dataset.schema
        means = np.zeros(schema.k)
        stds = np.ones(schema.k)
        for slot in schema.continuous_slots:
            col = dataset.Y[:, slot]
            means[slot] = col.mean()
            stds[slot] = max(col.std(), 1e-8)
        return cls(means=means, stds=stds)

    def standardize(self, Y: np.ndarray, schema: OutcomeSchema) -> np.ndarray:
        out = np.asarray(Y, dtype=np.float64).copy()
        for slot in schema.continuous_slots:
            out[..., slot] = (out[..., slot] - self.means[slot]) / self.stds[slot]
        return out

    def destandardize(self, Y: np.ndarray, schema: OutcomeSchema) -> np.ndarray:
        out = np.asarray(Y, dtype=np.float64).copy()
        for slot in schema.continuous_slots:
            out[..., slot] = out[..., slot] * self.stds[slot] + self.means[slot]
        return out

    def to_dict(self) -> dict:
        return {"means": self.means.tolist(), "stds": self.stds.tolist()}

    @classmethod
    def from_dict(cls, payload: dict) -> "Standardization":
        return cls(
            means=np.asarray(payload["means"], dtype=np.float64),
            stds=np.asarray(payload["stds"], dtype=np.float64),
        )


@dataclass
class SampleSet:
    """Generated joint outcome draws for one (x, a) context.

    draws is (n, k) in raw outcome units (categorical slots hold integer
    values); ordering_ids records which factorization produced each draw
    (-1 for slot-independent baselines).
    """

    schema: OutcomeSchema
    x: np.ndarray
    a: int
    draws: np.ndarray
    ordering_ids: np.ndarray

    @property
    def n(self) -> int:
        return self.draws.shape[0]

    def slot_values(self, slot: int) -> np.ndarray:
        return self.draws[:, slot]

    def conforms(self) -> bool:
        """True when every draw passes the schema's outcome checks."""
        for slot in range(self.schema.k):
            col = self.draws[:, slot]
            if self.schema.is_continuous(slot):
                if not np.all(np.isfinite(col)):
                    return False
            else:
                L = self.schema.num_categories(slot)
                if not np.all((col == np.round(col)) & (col >= 1) & (col <= L)):
                    return False
        return True


def subset_mask_sampler(slot: int, k: int, stage_size):
    """Mask sampler for one target slot: each visited record gets a uniform
    conditioning subset of the other slots.

    stage_size is a fixed int during staged training, or None for the mixed
    stage (size drawn uniformly from 0..k-1 per record).
    """
    others = np.array([j for j in range(k) if j != slot], dtype=np.int64)

    def sampler(indices, rng: np.random.Generator) -> np.ndarray:
        b = len(indices)
        mask = np.zeros((b, k), dtype=np.float64)
        if others.size == 0:
            return mask
        if stage_size is None:
            sizes = rng.integers(0, k, size=b)
        else:
            sizes = np.full(b, int(stage_size), dtype=np.int64)
        keys = rng.random((b, others.size))
        ranks = np.argsort(np.argsort(keys, axis=1), axis=1)
        chosen = ranks < sizes[:, None]
        mask[:, others] = chosen.astype(np.float64)
        return mask

    return sampler


class JointOutcomeModel:
    """Bank of per-slot conditional generators plus everything needed to
    sample the joint interventional distribution."""

    def __init__(
        self,
        schema: OutcomeSchema,
        d_x: int,
        orderings: list[Ordering],
        schedule: DiffusionSchedule,
        model_cfg: ModelConfig,
        train_cfg: TrainConfig,
    ):
        self.schema = schema
        self.d_x = d_x
        self.orderings = list(orderings)
        if not self.orderings:
            raise ValueError("need at least one ordering")
        self.schedule = schedule
        self.model_cfg = model_cfg
        self.train_cfg = train_cfg
        self.models = []
        for slot in range(schema.k):
            if schema.is_continuous(slot):
                self.models.append(
                    ConditionalScoreModel(schema, d_x, slot, model_cfg)
                )
            else:
                self.models.append(CategoricalModel(schema, d_x, slot, model_cfg))
        self.standardization = Standardization(
            means=np.zeros(schema.k), stds=np.ones(schema.k)
        )
        self.loss_traces: list[list[float]] = [[] for _ in range(schema.k)]

    @property
    def k(self) -> int:
        return self.schema.k

    @property
    def trained(self) -> bool:
        return all(m.trained for m in self.models)

    def init_params(self) -> None:
        for slot, model in enumerate(self.models):
            model.init_params(derive_int_seed(self.train_cfg.seed, 2, slot))

    def slot_seed(self, slot: int) -> int:
        return derive_int_seed(self.train_cfg.seed, 3, slot)

    def sample_set(self, x, a: int, n: int, rng) -> "SampleSet":
        """Ordering-aggregated joint draws at one (x, a)."""
        return aggregate_orderings(self, x, a, n, rng)


def hierarchical_train(
    dataset: Dataset,
    orderings: Optional[list[Ordering]] = None,
    schedule: Optional[DiffusionSchedule] = None,
    model_cfg: Optional[ModelConfig] = None,
    train_cfg: Optional[TrainConfig] = None,
) -> JointOutcomeModel:
    """Stage-wise masked training over conditioning-set sizes, then a mixed
    stage; every record contributes only its factual (x, a, y)."""
    schedule = schedule or DiffusionSchedule()
    model_cfg = model_cfg or ModelConfig()
    train_cfg = train_cfg or TrainConfig()
    schema = dataset.schema
    k = schema.k
    if orderings is None:
        orderings = build_orderings(k, train_cfg.max_orderings, train_cfg.seed)
    model = JointOutcomeModel(
        schema, dataset.covariate_dim, orderings, schedule, model_cfg, train_cfg
    )
    model.standardization = Standardization.fit(dataset)
    model.init_params()
    y_std = model.standardization.standardize(dataset.Y, schema)
    base_cond = ConditionBatch(
        dataset.X,
        dataset.A,
        y_std,
        np.zeros((dataset.n, k)),
    )
    stage_sizes = list(range(k)) + [None]  # None = mixed stage
    for slot, slot_model in enumerate(model.models):
        streams = TrainStreams.from_seed(model.slot_seed(slot))
        adam = AdamState.for_params(slot_model.params, train_cfg.learning_rate)
        for stage_size in stage_sizes:
            sampler = subset_mask_sampler(slot, k, stage_size)
            if schema.is_continuous(slot):
                trace = train_conditional_score(
                    slot_model,
                    schedule,
                    y_std[:, slot],
                    base_cond,
                    epochs=train_cfg.epochs_per_stage,
                    batch_size=train_cfg.batch_size,
                    mask_sampler=sampler,
                    adam=adam,
                    streams=streams,
                )
            else:
                trace = train_categorical(
                    slot_model,
                    dataset.Y[:, slot].astype(np.int64),
                    base_cond,
                    epochs=train_cfg.epochs_per_stage,
                    batch_size=train_cfg.batch_size,
                    mask_sampler=sampler,
                    adam=adam,
                    streams=streams,
                )
            model.loss_traces[slot].extend(trace)
    return model


def autoregressive_sample(
    model: JointOutcomeModel,
    x: np.ndarray,
    a: int,
    ordering: Ordering,
    n: int,
    rng,
) -> SampleSet:
    """n joint draws following one ordering: each slot is sampled conditional
    on the slots drawn before it."""
    if not model.trained:
        raise ValueError("model has not been trained")
    if n < 0:
        raise ValueError("n must be >= 0")
    rng = as_rng(rng)
    schema = model.schema
    k = schema.k
    x = np.asarray(x, dtype=np.float64)
    work = np.zeros((n, k))  # standardized continuous values, raw categories
    mask = np.zeros((n, k))
    x_tiled = np.repeat(x[None, :], n, axis=0)
    a_tiled = np.full(n, a, dtype=np.int64)
    if n > 0:
        for position in range(1, k + 1):
            slot = ordering.slot_at(position)
            cond = ConditionBatch(x_tiled, a_tiled, work.copy(), mask.copy())
            if schema.is_continuous(slot):
                work[:, slot] = reverse_sample(
                    model.models[slot], model.schedule, cond, n, rng
                )
            else:
                work[:, slot] = cat_sample(model.models[slot], cond, n, rng)
            mask[:, slot] = 1.0
    draws = model.standardization.destandardize(work, schema)
    for slot in schema.categorical_slots:
        draws[:, slot] = np.round(draws[:, slot])
    try:
        ordering_id = model.orderings.index(ordering)
    except ValueError:
        ordering_id = -1
    return SampleSet(
        schema=schema,
        x=x,
        a=int(a),
        draws=draws,
        ordering_ids=np.full(n, ordering_id, dtype=np.int64),
    )


def aggregate_orderings(
    model: JointOutcomeModel, x: np.ndarray, a: int, n_total: int, rng
) -> SampleSet:
    """Uniform mixture over the model's orderings: ceil(n_total / num
    orderings) draws per ordering, pooled with provenance tags."""
    rng = as_rng(rng)
    num = len(model.orderings)
    per = int(np.ceil(n_total / num)) if n_total > 0 else 0
    child_rngs = rng.spawn(num)
    parts = [
        autoregressive_sample(model, x, a, ordering, per, child)
        for ordering, child in zip(model.orderings, child_rngs)
    ]
    draws = (
        np.concatenate([p.draws for p in parts])
        if parts and per > 0
        else np.zeros((0, model.k))
    )
    ids = (
        np.concatenate([p.ordering_ids for p in parts])
        if parts and per > 0
        else np.zeros(0, dtype=np.int64)
    )
    return SampleSet(
        schema=model.schema,
        x=np.asarray(x, dtype=np.float64),
        a=int(a),
        draws=draws,
        ordering_ids=ids,
    )


def predict_capo(
    model, x: np.ndarray, a: int, outcome_index: int, n: int, rng=None
):
    """Sample-mean conditional average potential outcome for a continuous
    outcome (1-based index); categorical outcomes return the empirical
    probability vector over categories instead."""
    if rng is None:
        rng = derive_rng(model.train_cfg.seed, 9, a, outcome_index)
    samples = model.sample_set(x, a, n, rng)
    slot = outcome_index - 1
    values = samples.slot_values(slot)
    if model.schema.is_continuous(slot):
        return float(values.mean())
    L = model.schema.num_categories(slot)
    return np.bincount(values.astype(np.int64) - 1, minlength=L) / values.size


def predict_cate(model, x: np.ndarray, outcome_index: int, n: int, rng=None):
    """predict_capo at a=1 minus a=0 (per-arm sample size n)."""
    if rng is None:
        rng = derive_rng(model.train_cfg.seed, 10, outcome_index)
    capo0 = predict_capo(model, x, 0, outcome_index, n, rng)
    capo1 = predict_capo(model, x, 1, outcome_index, n, rng)
    if np.ndim(capo0) == 0:
        return float(capo1 - capo0)
    return capo1 - capo0
