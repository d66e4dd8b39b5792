"""Categorical head: pmf validity, cross-entropy, sampling consistency."""

import numpy as np
import pytest

from jointdiff.categorical import CategoricalModel, cat_sample, ce_loss, train_categorical
from jointdiff.conditioning import ConditionConfig
from jointdiff.diffusion import ConditionBatch, ModelConfig
from jointdiff.schema import OutcomeSchema, OutcomeSpec

CAT_SCHEMA = OutcomeSchema(
    (OutcomeSpec("y1", "continuous"), OutcomeSpec("grade", "categorical", 4))
)
SMALL_CFG = ModelConfig(
    emb_dim=24,
    denoiser_hidden=(32,),
    cat_hidden=(48,),
    condition=ConditionConfig(x_hidden=16, x_emb_dim=8, token_dim=8),
)


def make_model(seed=5):
    model = CategoricalModel(CAT_SCHEMA, d_x=2, slot=1, cfg=SMALL_CFG)
    model.init_params(seed)
    return model


def empty_condition(n, d_x=2, k=2):
    return ConditionBatch(
        np.zeros((n, d_x)), np.zeros(n, dtype=int), np.zeros((n, k)),
        np.zeros((n, k)),
    )


def condition_with_x(x):
    n = x.shape[0]
    return ConditionBatch(x, np.zeros(n, dtype=int), np.zeros((n, 2)),
                          np.zeros((n, 2)))


class TestCatForward:
    def test_random_init_near_uniform(self):
        model = make_model()
        pmf = model.forward(empty_condition(1))[0]
        assert np.all(np.abs(pmf - 0.25) < 0.2)

    def test_saturated_logits(self):
        # Softmax of (+10, -10, -10, -10) is within 1e-4 of a point mass.
        from jointdiff.categorical import _softmax

        pmf = _softmax(np.array([[10.0, -10.0, -10.0, -10.0]]))[0]
        assert pmf[0] > 1.0 - 1e-4

    def test_pmf_normalizes_for_random_conditions(self, rng):
        model = make_model()
        cond = condition_with_x(rng.standard_normal((1000, 2)))
        pmf = model.forward(cond)
        assert np.all(pmf >= 0.0)
        assert np.max(np.abs(pmf.sum(axis=1) - 1.0)) < 1e-12


class TestCeLoss:
    def test_perfect_prediction_zero_loss(self):
        # -log(1) = 0; check through the loss identity on a probability of 1.
        assert -np.log(1.0) == 0.0

    def test_uniform_pmf_loss_log4(self):
        model = make_model()
        # Zero all params: logits all zero -> uniform pmf over 4 categories.
        model.params.vector[...] = 0.0
        loss, _ = ce_loss(model, np.array([1, 2, 3, 4]), empty_condition(4))
        assert loss == pytest.approx(np.log(4.0), rel=1e-12)

    def test_gradients_match_finite_differences(self, rng):
        model = make_model(seed=6)
        labels = rng.integers(1, 5, 8)
        cond = condition_with_x(rng.standard_normal((8, 2)))
        _, grads = ce_loss(model, labels, cond)
        h = 1e-5
        errs = []
        for _ in range(120):
            i = int(rng.integers(model.params.size))
            orig = model.params.vector[i]
            model.params.vector[i] = orig + h
            lp, _ = ce_loss(model, labels, cond)
            model.params.vector[i] = orig - h
            lm, _ = ce_loss(model, labels, cond)
            model.params.vector[i] = orig
            fd = (lp - lm) / (2 * h)
            a = grads.vector[i]
            errs.append(abs(a - fd) / max(abs(a), abs(fd), 1e-8))
        assert max(errs) < 1e-4

    def test_label_out_of_range_rejected(self):
        model = make_model()
        with pytest.raises(ValueError):
            ce_loss(model, np.array([5]), empty_condition(1))


class TestCatSample:
    def test_point_mass_pmf(self):
        model = make_model()
        model.trained = True
        # Force a point mass on category 1 through the output bias.
        model.params.vector[...] = 0.0
        bias = model.params.view(f"mlp.b{len(model.mlp_spec.layer_dims) - 1}")
        bias[...] = [30.0, -30.0, -30.0, -30.0]
        draws = cat_sample(model, empty_condition(1), 500,
                           np.random.default_rng(0))
        assert np.all(draws == 1)

    def test_fair_coin_frequencies(self):
        model = make_model()
        model.trained = True
        model.params.vector[...] = 0.0
        bias = model.params.view(f"mlp.b{len(model.mlp_spec.layer_dims) - 1}")
        bias[...] = [5.0, 5.0, -30.0, -30.0]  # 50/50 on categories 1 and 2
        draws = cat_sample(model, empty_condition(1), 10000,
                           np.random.default_rng(1))
        freq1 = np.mean(draws == 1)
        assert abs(freq1 - 0.5) < 0.03
        assert np.all(draws <= 2)

    def test_trained_conditional_pmf_small_tv(self, rng):
        # Conditioning bit x flips the pmf; train and compare per-condition
        # total variation against the known pmf.
        model = make_model(seed=7)
        n = 6000
        bits = rng.integers(0, 2, n)
        x = np.column_stack([2.0 * bits - 1.0, np.zeros(n)])
        pmf_by_bit = {0: np.array([0.7, 0.1, 0.1, 0.1]),
                      1: np.array([0.1, 0.2, 0.3, 0.4])}
        labels = np.array(
            [rng.choice(4, p=pmf_by_bit[b]) + 1 for b in bits]
        )
        train_categorical(
            model, labels, condition_with_x(x), epochs=40, batch_size=128,
            seed=11,
        )
        for bit, pmf in pmf_by_bit.items():
            cond = condition_with_x(np.array([[2.0 * bit - 1.0, 0.0]]))
            draws = cat_sample(model, cond, 10000, np.random.default_rng(bit))
            emp = np.bincount(draws - 1, minlength=4) / draws.size
            tv = 0.5 * np.abs(emp - pmf).sum()
            assert tv < 0.05

    def test_sampling_matches_forward_pmf(self, rng):
        model = make_model(seed=9)
        model.trained = True
        cond = condition_with_x(rng.standard_normal((1, 2)))
        pmf = model.forward(cond)[0]
        draws = cat_sample(model, cond, 10000, np.random.default_rng(3))
        emp = np.bincount(draws - 1, minlength=4) / draws.size
        assert 0.5 * np.abs(emp - pmf).sum() < 0.05

    def test_trained_loss_approaches_conditional_entropy(self, rng):
        model = make_model(seed=10)
        n = 6000
        bits = rng.integers(0, 2, n)
        x = np.column_stack([2.0 * bits - 1.0, np.zeros(n)])
        pmf_by_bit = {0: np.array([0.8, 0.2, 0.0, 0.0]),
                      1: np.array([0.3, 0.7, 0.0, 0.0])}
        labels = np.array([rng.choice(4, p=pmf_by_bit[b]) + 1 for b in bits])
        trace = train_categorical(
            model, labels, condition_with_x(x), epochs=40, batch_size=128,
            seed=12,
        )
        def entropy(p):
            p = p[p > 0]
            return float(-(p * np.log(p)).sum())
        true_cond_entropy = 0.5 * entropy(pmf_by_bit[0]) + 0.5 * entropy(
            pmf_by_bit[1]
        )
        assert abs(trace[-1] - true_cond_entropy) < 0.05
