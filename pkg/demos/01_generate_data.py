"""Synthetic treatment-outcome data with built-in ground truth.

Two generators produce (covariates, binary treatment, two outcomes):

  * the correlation-dial generator: rho in [0, 1] interpolates the second
    outcome between an independent signal (rho=0) and the first outcome's
    signal (rho=1);
  * the bivariate-normal generator: the outcome pair is exactly Gaussian
    given (x, a), so densities, conditional means, and treatment effects
    are available in closed form.

Both keep a per-unit table of potential outcomes under BOTH arms, which the
factual dataset never reveals; that table is what evaluation measures
against.
"""

import numpy as np

from jointdiff import (
    BivariateNormalDgpConfig,
    RhoDgpConfig,
    bvn_sample_joint,
    generate_bvn_dataset,
    generate_rho_dataset,
    oracle_capo_cate,
    split_dataset,
)
from jointdiff.synthgen import bvn_params

print("=== correlation-dial generator ===")
for rho in (0.0, 0.5, 1.0):
    config = RhoDgpConfig.create(d_x=10, rho=rho, coef_seed=0)
    dataset, table = generate_rho_dataset(config, 20000, seed=1)
    r = np.corrcoef(dataset.Y[:, 0], dataset.Y[:, 1])[0, 1]
    print(f"rho={rho:.1f}: sample corr(Y1, Y2) across units = {r:+.3f}")

config = RhoDgpConfig.create(d_x=10, rho=0.5, coef_seed=0)
dataset, table = generate_rho_dataset(config, 100000, seed=1)
train, test = split_dataset(dataset, 0.2, seed=2)
print(f"\n{dataset.n} observations split into {train.n} train / {test.n} test")

x_probe = test.X[0]
capo0, capo1, cate = oracle_capo_cate(config, x_probe, outcome_index=1)
print(f"oracle CAPO(a=0)={capo0:+.3f}, CAPO(a=1)={capo1:+.3f}, "
      f"CATE={cate:+.3f} for outcome 1 at the first test unit")

print("\n=== bivariate-normal generator ===")
bvn = BivariateNormalDgpConfig.create(d_x=2, coef_seed=10)
dataset, _ = generate_bvn_dataset(bvn, 8000, seed=42)
x_probe = dataset.X[4]
mu, cov = bvn_params(bvn, x_probe, a=1)
rho_xa = cov[0, 1] / np.sqrt(cov[0, 0] * cov[1, 1])
print(f"at one unit under treatment: mu={mu.round(3)}, rho(x,a)={rho_xa:+.3f}")

draws = bvn_sample_joint(bvn, x_probe, 1, 50000, np.random.default_rng(3))
print(f"50k oracle draws: empirical corr = {np.corrcoef(draws.T)[0, 1]:+.3f} "
      f"(closed form {rho_xa:+.3f})")
