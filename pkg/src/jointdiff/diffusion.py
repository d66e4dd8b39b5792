"""Conditional score diffusion for one continuous outcome slot.

Variance-preserving forward SDE with a linear beta schedule, so the
perturbation kernel is closed form: y_t = alpha(t) y_0 + sigma(t) eps with
alpha(t) = exp(-0.5 int beta) and alpha^2 + sigma^2 = 1. The score network is
trained by denoising score matching and sampled with reverse-time
Euler-Maruyama. Internally the network predicts the scaled residual
(raw = sigma * score), which keeps the regression target standard normal at
every noise level; the exposed score is raw / sigma.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .conditioning import ConditionConfig, ConditionEncoder
from .errors import NumericError
from .nn import (
    AdamState,
    MlpSpec,
    ParamStore,
    adam_step,
    mlp_backward,
    mlp_forward_cached,
    mlp_init,
    sinusoidal_time_embed,
)
from .rngs import derive_rng
from .schema import OutcomeSchema

__all__ = [
    "DiffusionSchedule",
    "ModelConfig",
    "ConditionBatch",
    "ConditionalScoreModel",
    "TrainStreams",
    "schedule_coefficients",
    "forward_perturb",
    "dsm_loss",
    "train_conditional_score",
    "reverse_sample",
    "reverse_sample_scorefn",
]


@dataclass(frozen=True)
class DiffusionSchedule:
    """Variance-preserving schedule: beta(t) linear from beta_min to beta_max."""

    beta_min: float = 0.1
    beta_max: float = 20.0
    time_horizon: float = 1.0
    num_steps: int = 200
    t_min: float = 1e-3

    def __post_init__(self):
        if not 0.0 < self.beta_min < self.beta_max:
            raise ValueError("need 0 < beta_min < beta_max")
        if self.time_horizon <= 0.0:
            raise ValueError("time_horizon must be positive")
        if self.num_steps < 2:
            raise ValueError("num_steps must be >= 2")
        if not 0.0 < self.t_min < self.time_horizon:
            raise ValueError("t_min must lie in (0, time_horizon)")

    def beta(self, t):
        return self.beta_min + (self.beta_max - self.beta_min) * (
            np.asarray(t, dtype=np.float64) / self.time_horizon
        )

    def to_dict(self) -> dict:
        return {
            "beta_min": self.beta_min,
            "beta_max": self.beta_max,
            "time_horizon": self.time_horizon,
            "num_steps": self.num_steps,
            "t_min": self.t_min,
        }


def schedule_coefficients(schedule: DiffusionSchedule, t):
    """(alpha, sigma, beta) at time t; t may be scalar or array in [0, T]."""
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < 0.0) or np.any(t_arr > schedule.time_horizon):
        raise ValueError("t outside [0, time_horizon]")
    integral = schedule.beta_min * t_arr + (
        schedule.beta_max - schedule.beta_min
    ) * t_arr**2 / (2.0 * schedule.time_horizon)
    alpha = np.exp(-0.5 * integral)
    sigma = np.sqrt(np.maximum(1.0 - alpha**2, 0.0))
    return alpha, sigma, schedule.beta(t_arr)


def forward_perturb(schedule: DiffusionSchedule, y0, t, noise):
    """Perturbed state and its exact score target -noise/sigma (needs t > 0)."""
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr <= 0.0):
        raise ValueError("score target is undefined at t = 0; sample t >= t_min")
    alpha, sigma, _ = schedule_coefficients(schedule, t_arr)
    y0 = np.asarray(y0, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    y_t = alpha * y0 + sigma * noise
    return y_t, -noise / sigma


@dataclass(frozen=True)
class ModelConfig:
    """Widths for the per-slot generators."""

    emb_dim: int = 64
    denoiser_hidden: tuple[int, ...] = (128, 128, 128)
    cat_hidden: tuple[int, ...] = (128,)
    condition: ConditionConfig = field(default_factory=ConditionConfig)
    loss_weighting: str = "sigma2"  # "sigma2" or "g2"

    def __post_init__(self):
        if self.emb_dim % 2 != 0:
            raise ValueError("emb_dim must be even (time embedding)")
        if self.loss_weighting not in ("sigma2", "g2"):
            raise ValueError("loss_weighting must be 'sigma2' or 'g2'")


@dataclass
class ConditionBatch:
    """Conditioning inputs for n chains: covariates, treatment, outcome
    values available for conditioning (standardized if continuous), mask."""

    x: np.ndarray
    a: np.ndarray
    y_values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=np.float64))
        n = self.x.shape[0]
        self.a = np.broadcast_to(np.asarray(self.a, dtype=np.int64), (n,))
        self.y_values = np.atleast_2d(np.asarray(self.y_values, dtype=np.float64))
        if self.y_values.shape[0] == 1 and n > 1:
            self.y_values = np.broadcast_to(self.y_values, (n, self.y_values.shape[1]))
        self.mask = np.atleast_2d(np.asarray(self.mask, dtype=np.float64))
        if self.mask.shape[0] == 1 and n > 1:
            self.mask = np.broadcast_to(self.mask, (n, self.mask.shape[1]))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def take(self, indices) -> "ConditionBatch":
        return ConditionBatch(
            self.x[indices], self.a[indices], self.y_values[indices],
            self.mask[indices],
        )

    @classmethod
    def single(cls, x, a, y_values, mask) -> "ConditionBatch":
        return cls(
            np.asarray(x, dtype=np.float64)[None, :],
            np.array([a]),
            np.asarray(y_values, dtype=np.float64)[None, :],
            np.asarray(mask, dtype=np.float64)[None, :],
        )


class ConditionalScoreModel:
    """Score network s(y, t | condition) for one continuous outcome slot."""

    def __init__(self, schema: OutcomeSchema, d_x: int, slot: int,
                 cfg: ModelConfig):
        if not schema.is_continuous(slot):
            raise ValueError(f"slot {slot} is not continuous")
        self.schema = schema
        self.d_x = d_x
        self.slot = slot
        self.cfg = cfg
        self.encoder = ConditionEncoder(schema, d_x, cfg.condition)
        self.mlp_spec = MlpSpec(cfg.emb_dim, cfg.denoiser_hidden, 1)
        emb = cfg.emb_dim
        entries = self.encoder.param_entries()
        entries += [
            ("yproj.w", (emb,)),
            ("yproj.b", (emb,)),
            ("cproj.w", (emb, self.encoder.out_dim)),
            ("cproj.b", (emb,)),
        ]
        entries += self.mlp_spec.param_entries(prefix="mlp.")
        self.params = ParamStore.build(entries)
        self.trained = False

    def init_params(self, seed: int) -> None:
        rng = derive_rng(seed, 0)
        self.encoder.init_params(self.params, rng)
        emb = self.cfg.emb_dim
        self.params.view("yproj.w")[...] = rng.uniform(-1.0, 1.0, size=emb)
        self.params.view("yproj.b")[...] = 0.0
        limit = np.sqrt(6.0 / self.encoder.out_dim)
        self.params.view("cproj.w")[...] = rng.uniform(
            -limit, limit, size=(emb, self.encoder.out_dim)
        )
        self.params.view("cproj.b")[...] = 0.0
        mlp_init(self.mlp_spec, self.params, rng, prefix="mlp.")

    def condition_embedding(self, cond: ConditionBatch):
        """Encoder output and its projection into the diffusion embedding."""
        cond_vec, enc_cache = self.encoder.forward(
            self.params, cond.x, cond.a, cond.y_values, cond.mask, self.slot
        )
        c_emb = cond_vec @ self.params.view("cproj.w").T + self.params.view("cproj.b")
        return cond_vec, c_emb, enc_cache

    def raw_forward(self, y, t, cond: ConditionBatch):
        """Scaled-residual output (raw = sigma * score) with backward cache."""
        y = np.asarray(y, dtype=np.float64)
        t = np.broadcast_to(np.asarray(t, dtype=np.float64), y.shape)
        cond_vec, c_emb, enc_cache = self.condition_embedding(cond)
        h = (
            y[:, None] * self.params.view("yproj.w")[None, :]
            + self.params.view("yproj.b")[None, :]
            + c_emb
            + sinusoidal_time_embed(t, self.cfg.emb_dim)
        )
        raw, mlp_cache = mlp_forward_cached(self.mlp_spec, self.params, h, "mlp.")
        cache = (y, cond_vec, enc_cache, mlp_cache)
        return raw[:, 0], cache

    def raw_backward(self, cache, upstream: np.ndarray) -> ParamStore:
        """Parameter gradients of <upstream, raw_forward output>."""
        y, cond_vec, enc_cache, mlp_cache = cache
        grads = self.params.zeros_like()
        dh = mlp_backward(
            self.mlp_spec, self.params, mlp_cache, upstream[:, None], grads, "mlp."
        )
        grads.view("yproj.w")[...] += (dh * y[:, None]).sum(axis=0)
        grads.view("yproj.b")[...] += dh.sum(axis=0)
        grads.view("cproj.w")[...] += dh.T @ cond_vec
        grads.view("cproj.b")[...] += dh.sum(axis=0)
        d_cond_vec = dh @ self.params.view("cproj.w")
        self.encoder.backward(self.params, enc_cache, d_cond_vec, grads)
        return grads

    def score(self, y, t, cond: ConditionBatch, schedule: DiffusionSchedule):
        raw, _ = self.raw_forward(y, t, cond)
        _, sigma, _ = schedule_coefficients(schedule, t)
        return raw / sigma

    def hyperparameters(self) -> dict:
        return {
            "kind": "score",
            "slot": self.slot,
            "d_x": self.d_x,
            "emb_dim": self.cfg.emb_dim,
            "denoiser_hidden": list(self.cfg.denoiser_hidden),
            "cat_hidden": list(self.cfg.cat_hidden),
            "x_hidden": self.cfg.condition.x_hidden,
            "x_emb_dim": self.cfg.condition.x_emb_dim,
            "token_dim": self.cfg.condition.token_dim,
            "loss_weighting": self.cfg.loss_weighting,
        }


def _dsm_weight(schedule: DiffusionSchedule, t, weighting: str) -> np.ndarray:
    """lambda(t) / sigma(t)^2 applied to the scaled residual (raw + eps)^2."""
    if weighting == "sigma2":
        return np.ones_like(np.asarray(t, dtype=np.float64))
    _, sigma, beta = schedule_coefficients(schedule, t)
    return beta / sigma**2


def dsm_loss_given(
    model: ConditionalScoreModel,
    schedule: DiffusionSchedule,
    y0: np.ndarray,
    cond: ConditionBatch,
    t: np.ndarray,
    noise: np.ndarray,
):
    """Denoising score-matching loss and gradients at fixed (t, noise)."""
    y_t, _ = forward_perturb(schedule, y0, t, noise)
    raw, cache = model.raw_forward(y_t, t, cond)
    resid = raw + noise
    w = _dsm_weight(schedule, t, model.cfg.loss_weighting)
    n = y0.shape[0]
    loss = float(np.mean(w * resid**2))
    upstream = 2.0 * w * resid / n
    grads = model.raw_backward(cache, upstream)
    return loss, grads


def dsm_loss(
    model: ConditionalScoreModel,
    schedule: DiffusionSchedule,
    y0: np.ndarray,
    cond: ConditionBatch,
    rng: np.random.Generator,
):
    """Monte Carlo DSM loss over a batch: draws t and noise from rng."""
    y0 = np.asarray(y0, dtype=np.float64)
    if y0.size == 0:
        raise ValueError("batch must be nonempty")
    t = rng.uniform(schedule.t_min, schedule.time_horizon, size=y0.shape[0])
    noise = rng.standard_normal(y0.shape[0])
    return dsm_loss_given(model, schedule, y0, cond, t, noise)


@dataclass
class TrainStreams:
    """RNG substreams for one slot's training: batch shuffling, (t, noise)
    draws, and conditioning-mask sampling. Keeping them separate lets curricula
    that differ only in masking share identical shuffles and noise."""

    shuffle: np.random.Generator
    noise: np.random.Generator
    mask: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int) -> "TrainStreams":
        return cls(derive_rng(seed, 0), derive_rng(seed, 1), derive_rng(seed, 2))


def train_conditional_score(
    model: ConditionalScoreModel,
    schedule: DiffusionSchedule,
    y0: np.ndarray,
    cond: ConditionBatch,
    epochs: int,
    batch_size: int,
    seed: int = 0,
    learning_rate: float = 1e-3,
    mask_sampler: Optional[Callable] = None,
    adam: Optional[AdamState] = None,
    streams: Optional[TrainStreams] = None,
) -> list[float]:
    """Adam-driven DSM minimization; returns the per-epoch loss trace.

    mask_sampler(indices, rng) may override the conditioning mask per batch
    (used by the hierarchical curriculum); it draws from a dedicated stream so
    runs with and without it stay comparable. Passing `streams` and `adam`
    lets staged curricula continue one optimization across calls.
    """
    y0 = np.asarray(y0, dtype=np.float64)
    n = y0.shape[0]
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
            t = streams.noise.uniform(schedule.t_min, schedule.time_horizon, idx.size)
            eps = streams.noise.standard_normal(idx.size)
            loss, grads = dsm_loss_given(model, schedule, y0[idx], batch_cond, t, eps)
            if not np.isfinite(loss):
                raise NumericError(
                    f"non-finite loss at epoch {epoch}, slot {model.slot}"
                )
            adam_step(adam, model.params, grads)
            batch_losses.append(loss)
        trace.append(float(np.mean(batch_losses)))
    model.trained = True
    return trace


def reverse_sample_scorefn(
    schedule: DiffusionSchedule,
    score_fn: Callable[[np.ndarray, float], np.ndarray],
    n: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Euler-Maruyama integration of the reverse-time SDE from N(0,1) at T
    down to t_min, using score_fn(y, t) for the conditional score."""
    ts = np.linspace(schedule.time_horizon, schedule.t_min, schedule.num_steps + 1)
    y = rng.standard_normal(n)
    for i in range(schedule.num_steps):
        t = ts[i]
        dt = ts[i] - ts[i + 1]
        beta = float(schedule.beta(t))
        score = score_fn(y, t)
        drift = -0.5 * beta * y - beta * score
        y = y - drift * dt + np.sqrt(beta * dt) * rng.standard_normal(n)
        if not np.all(np.isfinite(y)):
            raise NumericError(f"non-finite sampler state at t={t:.4g}")
    return y


def reverse_sample(
    model: ConditionalScoreModel,
    schedule: DiffusionSchedule,
    cond: ConditionBatch,
    n: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """n reverse-diffusion draws; cond holds either one row (shared) or n rows
    (one chain per row). Returns standardized-space draws."""
    if not model.trained:
        raise ValueError("model has not been trained")
    if cond.n == 1 and n > 1:
        cond = ConditionBatch(
            np.repeat(cond.x, n, axis=0),
            np.repeat(cond.a, n),
            np.repeat(cond.y_values, n, axis=0),
            np.repeat(cond.mask, n, axis=0),
        )
    if cond.n != n:
        raise ValueError(f"condition rows {cond.n} != requested draws {n}")
    # The condition embedding does not depend on (y, t); hoist it out of the
    # integration loop.
    _, c_emb, _ = model.condition_embedding(cond)
    wy = model.params.view("yproj.w")
    by = model.params.view("yproj.b")

    def score_fn(y, t):
        t_vec = np.full(y.shape, t)
        h = (
            y[:, None] * wy[None, :]
            + by[None, :]
            + c_emb
            + sinusoidal_time_embed(t_vec, model.cfg.emb_dim)
        )
        raw, _ = mlp_forward_cached(model.mlp_spec, model.params, h, "mlp.")
        _, sigma, _ = schedule_coefficients(schedule, t)
        return raw[:, 0] / sigma

    return reverse_sample_scorefn(schedule, score_fn, n, rng)
