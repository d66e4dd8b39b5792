"""Product-of-marginals baseline: one generator per outcome conditioned on
(x, a) only, never on other outcomes. Its joint is the product of the learned
marginals, so it shares the joint model's marginal quality while ignoring
cross-outcome dependence; that contrast is the point of keeping it around.

Training matches the joint model slot for slot: same losses, optimizer,
per-slot seed derivation, and total epoch budget, with the conditional mask
pinned to all-zeros.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .autoreg import JointOutcomeModel, SampleSet, Standardization, TrainConfig
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
from .rngs import as_rng, derive_int_seed
from .schema import Dataset, OutcomeSchema

__all__ = ["MarginalProductModel", "train_marginal_product",
           "sample_marginal_product"]


class MarginalProductModel:
    """k independent per-slot generators, each conditioned on (x, a) only."""

    def __init__(
        self,
        schema: OutcomeSchema,
        d_x: int,
        schedule: DiffusionSchedule,
        model_cfg: ModelConfig,
        train_cfg: TrainConfig,
    ):
        self.schema = schema
        self.d_x = d_x
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
        return sample_marginal_product(self, x, a, n, rng)


def train_marginal_product(
    dataset: Dataset,
    schedule: Optional[DiffusionSchedule] = None,
    model_cfg: Optional[ModelConfig] = None,
    train_cfg: Optional[TrainConfig] = None,
) -> MarginalProductModel:
    """Train each slot with an all-zero conditional mask for the same total
    epoch budget the hierarchical curriculum would spend on it."""
    schedule = schedule or DiffusionSchedule()
    model_cfg = model_cfg or ModelConfig()
    train_cfg = train_cfg or TrainConfig()
    schema = dataset.schema
    k = schema.k
    model = MarginalProductModel(
        schema, dataset.covariate_dim, schedule, model_cfg, train_cfg
    )
    model.standardization = Standardization.fit(dataset)
    model.init_params()
    y_std = model.standardization.standardize(dataset.Y, schema)
    base_cond = ConditionBatch(
        dataset.X, dataset.A, y_std, np.zeros((dataset.n, k))
    )
    total_epochs = train_cfg.epochs_per_stage * (k + 1)
    for slot, slot_model in enumerate(model.models):
        streams = TrainStreams.from_seed(model.slot_seed(slot))
        adam = AdamState.for_params(slot_model.params, train_cfg.learning_rate)
        if schema.is_continuous(slot):
            trace = train_conditional_score(
                slot_model,
                schedule,
                y_std[:, slot],
                base_cond,
                epochs=total_epochs,
                batch_size=train_cfg.batch_size,
                adam=adam,
                streams=streams,
            )
        else:
            trace = train_categorical(
                slot_model,
                dataset.Y[:, slot].astype(np.int64),
                base_cond,
                epochs=total_epochs,
                batch_size=train_cfg.batch_size,
                adam=adam,
                streams=streams,
            )
        model.loss_traces[slot].extend(trace)
    return model


def sample_marginal_product(
    model: MarginalProductModel, x: np.ndarray, a: int, n: int, rng
) -> SampleSet:
    """n draws with every slot sampled independently given (x, a)."""
    if not model.trained:
        raise ValueError("model has not been trained")
    rng = as_rng(rng)
    schema = model.schema
    k = schema.k
    x = np.asarray(x, dtype=np.float64)
    work = np.zeros((n, k))
    if n > 0:
        cond = ConditionBatch(
            np.repeat(x[None, :], n, axis=0),
            np.full(n, a, dtype=np.int64),
            np.zeros((n, k)),
            np.zeros((n, k)),
        )
        for slot in range(k):
            if schema.is_continuous(slot):
                work[:, slot] = reverse_sample(
                    model.models[slot], model.schedule, cond, n, rng
                )
            else:
                work[:, slot] = cat_sample(model.models[slot], cond, n, rng)
    draws = model.standardization.destandardize(work, schema)
    for slot in schema.categorical_slots:
        draws[:, slot] = np.round(draws[:, slot])
    return SampleSet(
        schema=schema,
        x=x,
        a=int(a),
        draws=draws,
        ordering_ids=np.full(n, -1, dtype=np.int64),
    )
