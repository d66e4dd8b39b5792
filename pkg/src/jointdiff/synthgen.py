"""Synthetic data-generating processes with exact evaluation oracles.

Two bivariate-outcome DGPs over standard-normal covariates and a fair-coin
treatment:

  * RhoDgp: Y1 = f1(X,A) + e1, Y2 = rho*f1(X,A) + (1-rho)*f2(X,A) + e2 with
    independent Gaussian noise. rho in [0,1] dials the Y1-Y2 correlation from
    independent (0) to fully shared signal (1).
  * BivariateNormalDgp: (Y1, Y2) | X, A is exactly bivariate normal with
    covariate- and treatment-dependent means, log-linear variances, and a
    tanh-bounded correlation, so the joint conditional density, the
    conditional means, and hence CAPO/CATE are available in closed form.

Coefficients are sampled from Uniform(-1, 1); in the RhoDgp they are scaled
by 1/sqrt(d_x) so the signal stays O(1) against unit noise. Both generators
retain a per-unit potential-outcome table (noise-free means and noisy draws
for both treatment arms) for oracle evaluation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .rngs import as_rng, derive_rng
from .schema import CONTINUOUS, Dataset, OutcomeSchema, OutcomeSpec

__all__ = [
    "RhoDgpConfig",
    "BivariateNormalDgpConfig",
    "PotentialOutcomeTable",
    "generate_rho_dataset",
    "generate_bvn_dataset",
    "bvn_params",
    "bvn_true_density",
    "bvn_sample_joint",
    "rho_sample_joint",
    "oracle_capo_cate",
    "oracle_means",
    "split_dataset",
    "split_indices",
    "write_oracle_sidecar",
    "read_oracle_sidecar",
    "bivariate_schema",
]

COVARIATE_CLIP = 5.0  # keeps the RhoDgp exp/norm terms bounded
PROPENSITY = 0.5


def bivariate_schema() -> OutcomeSchema:
    return OutcomeSchema(
        (OutcomeSpec("y1", CONTINUOUS), OutcomeSpec("y2", CONTINUOUS))
    )


@dataclass(frozen=True)
class RhoDgpConfig:
    """Correlation-dial DGP. Vector coefficients have length d_x."""

    d_x: int
    rho: float
    sigma_noise: float
    coef_seed: int
    beta1: np.ndarray
    beta2: np.ndarray
    delta1: np.ndarray
    delta2: np.ndarray
    theta1: np.ndarray
    theta2: np.ndarray
    phi1: np.ndarray
    gamma: tuple[float, float, float]
    xi: tuple[float, float, float]
    alpha: tuple[float, float, float]
    eta: tuple[float, float, float]

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")
        if self.sigma_noise <= 0.0:
            raise ValueError("sigma_noise must be positive")
        for name in ("beta1", "beta2", "delta1", "delta2", "theta1", "theta2",
                     "phi1"):
            vec = np.asarray(getattr(self, name), dtype=np.float64)
            object.__setattr__(self, name, vec)
            if vec.shape != (self.d_x,):
                raise ValueError(f"{name} must have length d_x={self.d_x}")

    @classmethod
    def create(cls, d_x: int = 10, rho: float = 0.5, sigma_noise: float = 1.0,
               coef_seed: int = 0) -> "RhoDgpConfig":
        rng = derive_rng(coef_seed, 100)
        scale = 1.0 / np.sqrt(d_x)
        vec = lambda: rng.uniform(-1.0, 1.0, size=d_x) * scale
        tri = lambda: tuple(rng.uniform(-1.0, 1.0, size=3) * scale)
        return cls(
            d_x=d_x, rho=rho, sigma_noise=sigma_noise, coef_seed=coef_seed,
            beta1=vec(), beta2=vec(), delta1=vec(), delta2=vec(),
            theta1=vec(), theta2=vec(), phi1=vec(),
            gamma=tri(), xi=tri(), alpha=tri(), eta=tri(),
        )

    def f1(self, X: np.ndarray, A: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        A = np.asarray(A, dtype=np.float64)
        g1, g2, g3 = self.gamma
        a1, a2, a3 = self.alpha
        return (
            np.maximum(X @ self.beta1 + (X @ self.delta1) * A, 0.0)
            + g1 * A + g2 * A**2 + g3 * np.sin(A)
            + a1 * np.sum(X**2, axis=1)
            + a2 * np.exp(X @ self.theta1)
            + a3 * np.cos(X @ self.theta2)
        )

    def f2(self, X: np.ndarray, A: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        A = np.asarray(A, dtype=np.float64)
        x1, x2, x3 = self.xi
        e1, e2, e3 = self.eta
        norms = np.linalg.norm(X, axis=1)
        return (
            X @ self.beta2
            + x1 * A + x2 * A**2 + x3 * np.sin(A)
            + (X @ self.delta2) * A
            + e1 * np.log1p(norms)
            + e2 * np.sum(X**2, axis=1)
            + e3 * np.exp(X @ self.phi1)
        )

    def means(self, X: np.ndarray, A: np.ndarray) -> np.ndarray:
        """Noise-free (n, 2) outcome means."""
        f1 = self.f1(X, A)
        m2 = self.rho * f1 + (1.0 - self.rho) * self.f2(X, A)
        return np.column_stack([f1, m2])


@dataclass(frozen=True)
class BivariateNormalDgpConfig:
    """Closed-form conditional bivariate normal DGP."""

    d_x: int
    coef_seed: int
    beta1: np.ndarray
    beta2: float
    beta3: np.ndarray
    gamma1: np.ndarray
    gamma2: float
    gamma3: np.ndarray
    gamma4: float
    delta1: np.ndarray
    delta2: float
    delta3: np.ndarray
    delta4: float
    eta1: np.ndarray
    eta2: float

    def __post_init__(self):
        for name in ("beta1", "beta3", "gamma1", "gamma3", "delta1", "delta3",
                     "eta1"):
            vec = np.asarray(getattr(self, name), dtype=np.float64)
            object.__setattr__(self, name, vec)
            if vec.shape != (self.d_x,):
                raise ValueError(f"{name} must have length d_x={self.d_x}")
            if np.any(np.abs(vec) > 1.0):
                raise ValueError(f"{name} entries must lie in [-1, 1]")
        for name in ("beta2", "gamma2", "gamma4", "delta2", "delta4", "eta2"):
            if abs(getattr(self, name)) > 1.0:
                raise ValueError(f"{name} must lie in [-1, 1]")

    @classmethod
    def create(cls, d_x: int = 10, coef_seed: int = 0) -> "BivariateNormalDgpConfig":
        rng = derive_rng(coef_seed, 200)
        vec = lambda: rng.uniform(-1.0, 1.0, size=d_x)
        sca = lambda: float(rng.uniform(-1.0, 1.0))
        return cls(
            d_x=d_x, coef_seed=coef_seed,
            beta1=vec(), beta2=sca(), beta3=vec(),
            gamma1=vec(), gamma2=sca(), gamma3=vec(), gamma4=sca(),
            delta1=vec(), delta2=sca(), delta3=vec(), delta4=sca(),
            eta1=vec(), eta2=sca(),
        )

    def means(self, X: np.ndarray, A: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        A = np.asarray(A, dtype=np.float64)
        mu1 = X**2 @ self.beta1 + self.beta2 * A + (X @ self.beta3) * A
        mu2 = (
            X @ self.gamma1
            + self.gamma2 * A
            + (X @ self.gamma3) * A
            + self.gamma4 * np.log1p(np.linalg.norm(X, axis=1)) * A
        )
        return np.column_stack([mu1, mu2])

    def covariances(self, X: np.ndarray, A: np.ndarray):
        """(sigma1, sigma2, rho) arrays; variances are exp-linear, correlation
        tanh-bounded inside (-1, 1)."""
        X = np.atleast_2d(X)
        A = np.asarray(A, dtype=np.float64)
        var1 = np.exp(X @ self.delta1 + self.delta2 * A)
        var2 = np.exp(X @ self.delta3 + self.delta4 * A)
        rho = np.tanh(X @ self.eta1 + self.eta2 * A)
        return np.sqrt(var1), np.sqrt(var2), rho


def bvn_params(config: BivariateNormalDgpConfig, x: np.ndarray, a: int):
    """(mu (2,), Sigma (2,2)) at one unit; asserts positive definiteness."""
    x = np.asarray(x, dtype=np.float64)[None, :]
    a_arr = np.array([a], dtype=np.float64)
    mu = config.means(x, a_arr)[0]
    s1, s2, rho = (arr[0] for arr in config.covariances(x, a_arr))
    cov = np.array(
        [[s1**2, rho * s1 * s2], [rho * s1 * s2, s2**2]], dtype=np.float64
    )
    det = cov[0, 0] * cov[1, 1] - cov[0, 1] ** 2
    if not (cov[0, 0] > 0.0 and det > 0.0):
        raise ValueError("conditional covariance is not positive definite")
    return mu, cov


def bvn_true_density(config: BivariateNormalDgpConfig, x: np.ndarray, a: int,
                     y) -> np.ndarray:
    """Exact joint conditional density at y (one pair or an (m, 2) grid)."""
    mu, cov = bvn_params(config, x, a)
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    det = cov[0, 0] * cov[1, 1] - cov[0, 1] ** 2
    inv = np.array([[cov[1, 1], -cov[0, 1]], [-cov[0, 1], cov[0, 0]]]) / det
    diff = y - mu
    quad = (
        inv[0, 0] * diff[:, 0] ** 2
        + 2.0 * inv[0, 1] * diff[:, 0] * diff[:, 1]
        + inv[1, 1] * diff[:, 1] ** 2
    )
    dens = np.exp(-0.5 * quad) / (2.0 * np.pi * np.sqrt(det))
    return dens if dens.size > 1 else float(dens[0])


def _bvn_draw(config: BivariateNormalDgpConfig, X: np.ndarray, A: np.ndarray,
              rng: np.random.Generator) -> np.ndarray:
    mu = config.means(X, A)
    s1, s2, rho = config.covariances(X, A)
    z1 = rng.standard_normal(X.shape[0])
    z2 = rng.standard_normal(X.shape[0])
    y1 = mu[:, 0] + s1 * z1
    y2 = mu[:, 1] + s2 * (rho * z1 + np.sqrt(1.0 - rho**2) * z2)
    return np.column_stack([y1, y2])


def bvn_sample_joint(config: BivariateNormalDgpConfig, x: np.ndarray, a: int,
                     n: int, rng) -> np.ndarray:
    """n exact draws of (Y1, Y2) at one unit and arm; the evaluation oracle."""
    rng = as_rng(rng)
    X = np.repeat(np.asarray(x, dtype=np.float64)[None, :], n, axis=0)
    A = np.full(n, a, dtype=np.float64)
    return _bvn_draw(config, X, A, rng)


def rho_sample_joint(config: RhoDgpConfig, x: np.ndarray, a: int, n: int,
                     rng) -> np.ndarray:
    """n exact draws from the RhoDgp conditional at one unit and arm."""
    rng = as_rng(rng)
    X = np.repeat(np.asarray(x, dtype=np.float64)[None, :], n, axis=0)
    A = np.full(n, a, dtype=np.float64)
    means = config.means(X, A)
    return means + config.sigma_noise * rng.standard_normal((n, 2))


@dataclass
class PotentialOutcomeTable:
    """Per-unit ground truth for both arms: noise-free means and noisy draws.

    means and draws have shape (n, 2 arms, 2 outcomes), indexed by arm a.
    """

    means: np.ndarray
    draws: np.ndarray

    @property
    def n(self) -> int:
        return self.means.shape[0]

    def cate(self, slot: int) -> np.ndarray:
        """True per-unit treatment effect for outcome `slot` (0-based)."""
        return self.means[:, 1, slot] - self.means[:, 0, slot]


def _sample_covariates(d_x: int, n: int, rng: np.random.Generator) -> np.ndarray:
    X = rng.standard_normal((n, d_x))
    return np.clip(X, -COVARIATE_CLIP, COVARIATE_CLIP)


def generate_rho_dataset(config: RhoDgpConfig, n: int, seed: int):
    """Factual dataset plus the potential-outcome side table."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng_x = derive_rng(seed, 0)
    rng_a = derive_rng(seed, 1)
    rng_eps = derive_rng(seed, 2)
    X = _sample_covariates(config.d_x, n, rng_x)
    A = (rng_a.random(n) < PROPENSITY).astype(np.int64)
    means = np.stack(
        [config.means(X, np.full(n, a, dtype=np.float64)) for a in (0, 1)], axis=1
    )
    noise = config.sigma_noise * rng_eps.standard_normal((n, 2, 2))
    draws = means + noise
    table = PotentialOutcomeTable(means=means, draws=draws)
    Y = draws[np.arange(n), A]
    dataset = Dataset(bivariate_schema(), X, A, Y, validate=False)
    return dataset, table


def generate_bvn_dataset(config: BivariateNormalDgpConfig, n: int, seed: int):
    """Factual dataset plus the potential-outcome side table."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng_x = derive_rng(seed, 0)
    rng_a = derive_rng(seed, 1)
    rng_y = derive_rng(seed, 2)
    X = _sample_covariates(config.d_x, n, rng_x)
    A = (rng_a.random(n) < PROPENSITY).astype(np.int64)
    means = np.stack(
        [config.means(X, np.full(n, a, dtype=np.float64)) for a in (0, 1)], axis=1
    )
    draws = np.stack(
        [_bvn_draw(config, X, np.full(n, a, dtype=np.float64), rng_y)
         for a in (0, 1)],
        axis=1,
    )
    table = PotentialOutcomeTable(means=means, draws=draws)
    Y = draws[np.arange(n), A]
    dataset = Dataset(bivariate_schema(), X, A, Y, validate=False)
    return dataset, table


def oracle_means(config, x: np.ndarray, a: int) -> np.ndarray:
    """Noise-free conditional outcome means (2,) at one unit and arm."""
    X = np.asarray(x, dtype=np.float64)[None, :]
    A = np.array([a], dtype=np.float64)
    return config.means(X, A)[0]


def oracle_capo_cate(config, x: np.ndarray, outcome_index: int):
    """(capo_a0, capo_a1, cate) for the 1-based outcome_index, exact."""
    slot = outcome_index - 1
    if slot not in (0, 1):
        raise ValueError("outcome_index must be 1 or 2")
    capo0 = float(oracle_means(config, x, 0)[slot])
    capo1 = float(oracle_means(config, x, 1)[slot])
    return capo0, capo1, capo1 - capo0


def split_indices(n: int, test_fraction: float, seed: int):
    """Disjoint (train, test) row indices: ceil(n*(1-f)) train rows, rest test."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    n_train = int(np.ceil(n * (1.0 - test_fraction)))
    order = derive_rng(seed, 10).permutation(n)
    return order[:n_train], order[n_train:]


def split_dataset(dataset: Dataset, test_fraction: float, seed: int):
    """Disjoint (train, test) split of a dataset; deterministic under seed."""
    train_idx, test_idx = split_indices(dataset.n, test_fraction, seed)
    return dataset.subset(train_idx), dataset.subset(test_idx)


ORACLE_HEADER = ["unit_id", "a", "y1_mean", "y2_mean", "y1_draw", "y2_draw"]


def write_oracle_sidecar(table: PotentialOutcomeTable, path,
                         unit_ids=None) -> None:
    """Both-arm oracle rows per unit: means and one noisy draw each."""
    if unit_ids is None:
        unit_ids = np.arange(table.n)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ORACLE_HEADER)
        for j, unit in enumerate(unit_ids):
            for a in (0, 1):
                writer.writerow(
                    [str(int(unit)), str(a)]
                    + [repr(float(v)) for v in table.means[j, a]]
                    + [repr(float(v)) for v in table.draws[j, a]]
                )


def read_oracle_sidecar(path) -> dict:
    """{(unit_id, a): {"mean": (2,), "draw": (2,)}} from a sidecar CSV."""
    out = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ORACLE_HEADER:
            raise DataError(f"{path}: not an oracle sidecar")
        for row in reader:
            unit, a = int(row[0]), int(row[1])
            out[(unit, a)] = {
                "mean": np.array([float(row[2]), float(row[3])]),
                "draw": np.array([float(row[4]), float(row[5])]),
            }
    return out
