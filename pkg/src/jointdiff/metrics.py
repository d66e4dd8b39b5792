"""Distributional and point evaluation: exact-assignment Wasserstein-1,
Gaussian-KDE KL estimates, PEHE, and a correlation probe.

Mixed-type ground cost: Euclidean on continuous slots plus a 0/1 discrete
metric per categorical slot, combined under one square root. The empirical
W1 between equal-size sample sets is the exact minimum-cost perfect matching
divided by n; sets larger than `max_pairs` are subsampled with a recorded
seed because the assignment solve is O(n^3).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import logsumexp

from .schema import OutcomeSchema

__all__ = [
    "ground_cost",
    "cost_matrix",
    "solve_assignment",
    "empirical_w1",
    "W1Result",
    "DensityEstimate",
    "CategoricalPmf",
    "MixedDensity",
    "kde_fit",
    "pmf_fit",
    "mixed_density_fit",
    "empirical_kl",
    "pehe",
    "correlation_probe",
]

DEFAULT_MAX_PAIRS = 2000
BANDWIDTH_FLOOR = 1e-3
PMF_SMOOTHING = 1e-6


def _as_matrix(samples, k: int) -> np.ndarray:
    arr = getattr(samples, "draws", samples)
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.shape[1] != k:
        raise ValueError(f"expected {k} outcome columns, got {arr.shape[1]}")
    return arr


def ground_cost(u, v, schema: OutcomeSchema) -> float:
    """Mixed-type distance between two outcome vectors."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != (schema.k,) or v.shape != (schema.k,):
        raise ValueError("outcome vectors must match the schema length")
    total = 0.0
    for slot in range(schema.k):
        if schema.is_continuous(slot):
            total += (u[slot] - v[slot]) ** 2
        else:
            total += float(u[slot] != v[slot])
    return float(np.sqrt(total))


def cost_matrix(p, q, schema: OutcomeSchema) -> np.ndarray:
    """Pairwise ground costs between sample sets p (n, k) and q (m, k)."""
    P = _as_matrix(p, schema.k)
    Q = _as_matrix(q, schema.k)
    sq = np.zeros((P.shape[0], Q.shape[0]))
    for slot in range(schema.k):
        diff = P[:, slot : slot + 1] - Q[None, :, slot]
        if schema.is_continuous(slot):
            sq += diff**2
        else:
            sq += (diff != 0.0).astype(np.float64)
    return np.sqrt(sq)


def solve_assignment(cost: np.ndarray):
    """Exact minimum-cost perfect matching: (column permutation, total cost)."""
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ValueError("cost matrix must be square")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix entries must be finite")
    rows, cols = linear_sum_assignment(cost)
    return cols, float(cost[rows, cols].sum())


@dataclass(frozen=True)
class W1Result:
    value: float
    n: int
    subsampled: bool
    seed: int

    def __float__(self) -> float:
        return self.value


def empirical_w1(
    p,
    q,
    schema: OutcomeSchema,
    max_pairs: int = DEFAULT_MAX_PAIRS,
    seed: int = 0,
) -> W1Result:
    """Exact empirical Wasserstein-1 between two sample sets.

    Unequal sizes are matched by subsampling the larger set; sizes above
    max_pairs subsample both. Either event sets `subsampled`.
    """
    P = _as_matrix(p, schema.k)
    Q = _as_matrix(q, schema.k)
    if P.shape[0] == 0 or Q.shape[0] == 0:
        raise ValueError("sample sets must be nonempty")
    n = min(P.shape[0], Q.shape[0], max_pairs)
    subsampled = n < max(P.shape[0], Q.shape[0])
    rng = np.random.default_rng(seed)
    if P.shape[0] > n:
        P = P[rng.choice(P.shape[0], size=n, replace=False)]
    if Q.shape[0] > n:
        Q = Q[rng.choice(Q.shape[0], size=n, replace=False)]
    if schema.k == 1 and schema.is_continuous(0):
        # One continuous dimension: the optimal matching pairs sorted values
        # (rearrangement inequality), identical to the assignment optimum.
        total = float(np.abs(np.sort(P[:, 0]) - np.sort(Q[:, 0])).sum())
    else:
        _, total = solve_assignment(cost_matrix(P, Q, schema))
    return W1Result(value=total / n, n=n, subsampled=subsampled, seed=seed)


@dataclass
class DensityEstimate:
    """Product-Gaussian-kernel density over continuous columns.

    Scott's rule bandwidth per dimension with a small positive floor, so the
    estimate is strictly positive everywhere it is evaluated.
    """

    support: np.ndarray
    bandwidths: np.ndarray

    def log_density(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        squeeze = pts.ndim == 1 and self.support.shape[1] == 1
        if pts.ndim == 1:
            pts = pts[:, None] if squeeze else pts[None, :]
        n, d = self.support.shape
        z = (pts[:, None, :] - self.support[None, :, :]) / self.bandwidths
        log_kernel = -0.5 * np.sum(z**2, axis=2) - np.sum(
            np.log(self.bandwidths * np.sqrt(2.0 * np.pi))
        )
        return logsumexp(log_kernel, axis=1) - np.log(n)

    def density(self, points) -> np.ndarray:
        return np.exp(self.log_density(points))


def kde_fit(samples) -> DensityEstimate:
    """Fit the product-kernel KDE to an (n, d) continuous sample matrix."""
    arr = getattr(samples, "draws", samples)
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    n, d = arr.shape
    if n < 30:
        raise ValueError("need at least 30 samples for a density estimate")
    scott = n ** (-1.0 / (d + 4))
    bw = np.maximum(scott * arr.std(axis=0, ddof=1), BANDWIDTH_FLOOR)
    return DensityEstimate(support=arr.copy(), bandwidths=bw)


@dataclass
class CategoricalPmf:
    """Smoothed empirical pmf over 1-based categories."""

    probs: np.ndarray

    def log_density(self, labels) -> np.ndarray:
        idx = np.asarray(labels).astype(np.int64) - 1
        return np.log(self.probs[idx])


def pmf_fit(labels, num_categories: int,
            smoothing: float = PMF_SMOOTHING) -> CategoricalPmf:
    labels = np.asarray(labels).astype(np.int64)
    if np.any((labels < 1) | (labels > num_categories)):
        raise ValueError(f"labels outside 1..{num_categories}")
    counts = np.bincount(labels - 1, minlength=num_categories).astype(np.float64)
    probs = (counts + smoothing) / (labels.size + smoothing * num_categories)
    return CategoricalPmf(probs=probs)


@dataclass
class MixedDensity:
    """Joint density estimate for mixed-type sample matrices: product of the
    continuous-slice KDE and per-slot categorical pmfs. Slots are original
    schema positions."""

    continuous_slots: tuple[int, ...]
    categorical_slots: tuple[int, ...]
    kde: Optional[DensityEstimate]
    pmfs: dict[int, CategoricalPmf]

    def log_density(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        total = np.zeros(pts.shape[0])
        if self.kde is not None:
            total += self.kde.log_density(pts[:, list(self.continuous_slots)])
        for slot in self.categorical_slots:
            total += self.pmfs[slot].log_density(pts[:, slot])
        return total


def mixed_density_fit(samples, schema: OutcomeSchema) -> MixedDensity:
    """Fit a joint density estimate over a mixed-type (n, k) sample matrix."""
    arr = _as_matrix(samples, schema.k)
    cont = schema.continuous_slots
    cat = schema.categorical_slots
    kde = kde_fit(arr[:, list(cont)]) if cont else None
    pmfs = {
        slot: pmf_fit(arr[:, slot], schema.num_categories(slot)) for slot in cat
    }
    return MixedDensity(
        continuous_slots=cont, categorical_slots=cat, kde=kde, pmfs=pmfs
    )


def empirical_kl(samples_from_p, p_hat, q_hat) -> float:
    """Mean log-ratio log(p_hat/q_hat) over samples drawn from p.

    Estimation noise can push the value slightly negative; it is reported
    as-is.
    """
    log_p = p_hat.log_density(samples_from_p)
    log_q = q_hat.log_density(samples_from_p)
    return float(np.mean(log_p - log_q))


def pehe(predicted_cate, true_cate) -> float:
    """Root-mean-squared CATE error; (n, k) inputs average the per-outcome
    errors across the k outcomes."""
    pred = np.asarray(predicted_cate, dtype=np.float64)
    true = np.asarray(true_cate, dtype=np.float64)
    if pred.shape != true.shape:
        raise ValueError("predicted and true CATE shapes differ")
    if pred.size == 0:
        raise ValueError("empty input")
    if pred.ndim == 1:
        return float(np.sqrt(np.mean((pred - true) ** 2)))
    per_outcome = np.sqrt(np.mean((pred - true) ** 2, axis=0))
    return float(np.mean(per_outcome))


def correlation_probe(samples, slot_i: int, slot_j: int,
                      schema: Optional[OutcomeSchema] = None) -> float:
    """Pearson correlation between two continuous slots (0-based) of a
    sample set."""
    arr = getattr(samples, "draws", samples)
    arr = np.asarray(arr, dtype=np.float64)
    if schema is not None and not (
        schema.is_continuous(slot_i) and schema.is_continuous(slot_j)
    ):
        raise ValueError("correlation probe needs continuous slots")
    u, v = arr[:, slot_i], arr[:, slot_j]
    if u.shape[0] < 30:
        raise ValueError("need at least 30 draws")
    if u.std() == 0.0 or v.std() == 0.0:
        raise ValueError("zero variance in a probed slot")
    return float(np.corrcoef(u, v)[0, 1])
