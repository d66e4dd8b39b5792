"""Single-step conditional categorical generator for discrete outcome slots.

Categorical slots have no differentiable density, so instead of a score
network the slot gets a softmax classifier over its categories, trained with
cross-entropy and sampled in one shot. It shares the condition encoder design
with the continuous models but takes no time embedding.
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from .conditioning import ConditionEncoder
from .diffusion import ConditionBatch, ModelConfig, TrainStreams
from .errors import NumericError
from .nn import (
    AdamState,
    MlpSpec,
    ParamStore,
    adam_step,
    mlp_backward,
    mlp_forward_cached,
    mlp_init,
)
from .rngs import derive_rng
from .schema import OutcomeSchema

__all__ = ["CategoricalModel", "cat_forward", "ce_loss", "train_categorical",
           "cat_sample"]


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


class CategoricalModel:
    """Conditional pmf p(category | condition) for one categorical slot."""

    def __init__(self, schema: OutcomeSchema, d_x: int, slot: int,
                 cfg: ModelConfig):
        if schema.is_continuous(slot):
            raise ValueError(f"slot {slot} is not categorical")
        self.schema = schema
        self.d_x = d_x
        self.slot = slot
        self.cfg = cfg
        self.num_categories = schema.num_categories(slot)
        self.encoder = ConditionEncoder(schema, d_x, cfg.condition)
        self.mlp_spec = MlpSpec(cfg.emb_dim, cfg.cat_hidden, self.num_categories)
        emb = cfg.emb_dim
        entries = self.encoder.param_entries()
        entries += [("cproj.w", (emb, self.encoder.out_dim)), ("cproj.b", (emb,))]
        entries += self.mlp_spec.param_entries(prefix="mlp.")
        self.params = ParamStore.build(entries)
        self.trained = False

    def init_params(self, seed: int) -> None:
        rng = derive_rng(seed, 0)
        self.encoder.init_params(self.params, rng)
        limit = np.sqrt(6.0 / self.encoder.out_dim)
        self.params.view("cproj.w")[...] = rng.uniform(
            -limit, limit, size=(self.cfg.emb_dim, self.encoder.out_dim)
        )
        self.params.view("cproj.b")[...] = 0.0
        mlp_init(self.mlp_spec, self.params, rng, prefix="mlp.")

    def logits(self, cond: ConditionBatch):
        cond_vec, enc_cache = self.encoder.forward(
            self.params, cond.x, cond.a, cond.y_values, cond.mask, self.slot
        )
        h = cond_vec @ self.params.view("cproj.w").T + self.params.view("cproj.b")
        out, mlp_cache = mlp_forward_cached(self.mlp_spec, self.params, h, "mlp.")
        return out, (cond_vec, enc_cache, mlp_cache)

    def forward(self, cond: ConditionBatch) -> np.ndarray:
        """Probability vectors, one row per condition; rows sum to 1."""
        logits, _ = self.logits(cond)
        return _softmax(logits)

    def backward(self, cache, upstream_logits: np.ndarray) -> ParamStore:
        cond_vec, enc_cache, mlp_cache = cache
        grads = self.params.zeros_like()
        dh = mlp_backward(
            self.mlp_spec, self.params, mlp_cache, upstream_logits, grads, "mlp."
        )
        grads.view("cproj.w")[...] += dh.T @ cond_vec
        grads.view("cproj.b")[...] += dh.sum(axis=0)
        d_cond_vec = dh @ self.params.view("cproj.w")
        self.encoder.backward(self.params, enc_cache, d_cond_vec, grads)
        return grads

    def hyperparameters(self) -> dict:
        return {
            "kind": "categorical",
            "slot": self.slot,
            "d_x": self.d_x,
            "num_categories": self.num_categories,
            "emb_dim": self.cfg.emb_dim,
            "denoiser_hidden": list(self.cfg.denoiser_hidden),
            "cat_hidden": list(self.cfg.cat_hidden),
            "x_hidden": self.cfg.condition.x_hidden,
            "x_emb_dim": self.cfg.condition.x_emb_dim,
            "token_dim": self.cfg.condition.token_dim,
            "loss_weighting": self.cfg.loss_weighting,
        }


def cat_forward(model: CategoricalModel, cond: ConditionBatch) -> np.ndarray:
    """Conditional probability vectors; rows are valid pmfs."""
    return model.forward(cond)


def ce_loss(model: CategoricalModel, labels: np.ndarray, cond: ConditionBatch):
    """Mean cross-entropy of 1-based labels under the model, with gradients."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("batch must be nonempty")
    if not np.all((labels >= 1) & (labels <= model.num_categories)):
        raise ValueError(f"labels outside 1..{model.num_categories}")
    idx = labels.astype(np.int64) - 1
    logits, cache = model.logits(cond)
    probs = _softmax(logits)
    n = labels.shape[0]
    loss = float(-np.mean(np.log(probs[np.arange(n), idx])))
    upstream = probs.copy()
    upstream[np.arange(n), idx] -= 1.0
    upstream /= n
    grads = model.backward(cache, upstream)
    return loss, grads


def train_categorical(
    model: CategoricalModel,
    labels: np.ndarray,
    cond: ConditionBatch,
    epochs: int,
    batch_size: int,
    seed: int = 0,
    learning_rate: float = 1e-3,
    mask_sampler: Optional[Callable] = None,
    adam: Optional[AdamState] = None,
    streams: Optional[TrainStreams] = None,
) -> list[float]:
    """Adam-driven cross-entropy minimization; returns per-epoch loss trace."""
    labels = np.asarray(labels)
    n = labels.shape[0]
    if n == 0:
        raise ValueError("training view must be nonempty")
    if streams is None:
        streams = TrainStreams.from_seed(seed)
    if adam is None:
        adam = AdamState.for_params(model.params, learning_rate)
    trace = []
    for epoch in range(epochs):
        order = streams.shuffle.permutation(n)
        batch_losses = []
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            batch_cond = cond.take(idx)
            if mask_sampler is not None:
                batch_cond = ConditionBatch(
                    batch_cond.x, batch_cond.a, batch_cond.y_values,
                    mask_sampler(idx, streams.mask),
                )
            loss, grads = ce_loss(model, labels[idx], batch_cond)
            if not np.isfinite(loss):
                raise NumericError(
                    f"non-finite loss at epoch {epoch}, slot {model.slot}"
                )
            adam_step(adam, model.params, grads)
            batch_losses.append(loss)
        trace.append(float(np.mean(batch_losses)))
    model.trained = True
    return trace


def cat_sample(
    model: CategoricalModel,
    cond: ConditionBatch,
    n: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """n i.i.d. 1-based category draws from the conditional pmf; cond holds
    one shared row or n per-draw rows."""
    if not model.trained:
        raise ValueError("model has not been trained")
    if cond.n == 1 and n > 1:
        probs = np.repeat(model.forward(cond), n, axis=0)
    elif cond.n == n:
        probs = model.forward(cond)
    else:
        raise ValueError(f"condition rows {cond.n} != requested draws {n}")
    cdf = np.cumsum(probs, axis=1)
    u = rng.random(n)
    draws = (u[:, None] > cdf).sum(axis=1) + 1
    return np.minimum(draws, model.num_categories).astype(np.int64)
