"""Why a joint model: matching marginals is not matching the joint.

Train the masked autoregressive joint model and the product-of-marginals
baseline on the same bivariate-normal data, then compare at strongly
correlated test units. Both models reproduce each outcome's marginal; only
the joint model reproduces how the outcomes co-vary, which shows up in the
correlation probe and in the joint Wasserstein distance to oracle draws.

Uses a slightly reduced training budget (about three minutes on CPU); the
acceptance suite runs the full version over 20 probe units.
"""

import numpy as np

from jointdiff import (
    BivariateNormalDgpConfig,
    DiffusionSchedule,
    ModelConfig,
    TrainConfig,
    aggregate_orderings,
    bvn_sample_joint,
    correlation_probe,
    empirical_w1,
    generate_bvn_dataset,
    hierarchical_train,
    sample_marginal_product,
    split_dataset,
    train_marginal_product,
)
from jointdiff.conditioning import ConditionConfig

config = BivariateNormalDgpConfig.create(d_x=2, coef_seed=10)
dataset, _ = generate_bvn_dataset(config, 8000, seed=42)
train, test = split_dataset(dataset, 0.2, seed=1)

schedule = DiffusionSchedule(num_steps=100)
model_cfg = ModelConfig(
    emb_dim=48, denoiser_hidden=(96, 96, 96),
    condition=ConditionConfig(x_hidden=48, x_emb_dim=24, token_dim=8),
)
train_cfg = TrainConfig(epochs_per_stage=70, batch_size=256, seed=0)

print("training the joint model (hierarchical masked curriculum)...")
joint = hierarchical_train(train, schedule=schedule, model_cfg=model_cfg,
                           train_cfg=train_cfg)
print("training the product-of-marginals baseline...")
baseline = train_marginal_product(train, schedule=schedule,
                                  model_cfg=model_cfg, train_cfg=train_cfg)

rho_test = config.covariances(test.X, np.zeros(test.n))[2]
probes = np.where(np.abs(rho_test) >= 0.7)[0][:5]
print(f"\n{'unit':>4} {'true rho':>9} {'joint r':>9} {'baseline r':>11} "
      f"{'joint W1':>9} {'baseline W1':>12}")
for j in probes:
    x = test.X[j]
    js = aggregate_orderings(joint, x, 0, 800, np.random.default_rng(100 + j))
    bs = sample_marginal_product(baseline, x, 0, 800,
                                 np.random.default_rng(200 + j))
    oracle = bvn_sample_joint(config, x, 0, 800, np.random.default_rng(300 + j))
    r_joint = correlation_probe(js.draws, 0, 1)
    r_base = correlation_probe(bs.draws, 0, 1)
    w1_joint = empirical_w1(js.draws, oracle, test.schema, max_pairs=800).value
    w1_base = empirical_w1(bs.draws, oracle, test.schema, max_pairs=800).value
    print(f"{j:>4} {rho_test[j]:>9.3f} {r_joint:>9.3f} {r_base:>11.3f} "
          f"{w1_joint:>9.3f} {w1_base:>12.3f}")

print("\nthe baseline's correlation hovers near zero regardless of the truth;")
print("the joint model tracks it, and its joint W1 to the oracle is lower.")
