"""Schedule closure, perturbation kernel, DSM loss/gradients, training on
analytic Gaussian fixtures, and the reverse-time sampler."""

import numpy as np
import pytest

from jointdiff.conditioning import ConditionConfig
from jointdiff.diffusion import (
    ConditionBatch,
    ConditionalScoreModel,
    DiffusionSchedule,
    ModelConfig,
    dsm_loss,
    dsm_loss_given,
    forward_perturb,
    reverse_sample,
    reverse_sample_scorefn,
    schedule_coefficients,
    train_conditional_score,
)
from jointdiff.schema import OutcomeSchema, OutcomeSpec

SCALAR_SCHEMA = OutcomeSchema((OutcomeSpec("y", "continuous"),))

SMALL_CFG = ModelConfig(
    emb_dim=32,
    denoiser_hidden=(64, 64, 64),
    condition=ConditionConfig(x_hidden=16, x_emb_dim=8, token_dim=8),
)


def empty_condition(n, d_x=1, k=1):
    return ConditionBatch(
        np.zeros((n, d_x)), np.zeros(n, dtype=int), np.zeros((n, k)),
        np.zeros((n, k)),
    )


def scalar_model(seed=3, cfg=SMALL_CFG):
    model = ConditionalScoreModel(SCALAR_SCHEMA, d_x=1, slot=0, cfg=cfg)
    model.init_params(seed)
    return model


def wasserstein_1d(a, b):
    qa = np.sort(a)
    qb = np.sort(b)
    n = min(qa.size, qb.size)
    return float(np.abs(qa[:n] - qb[:n]).mean())


class TestSchedule:
    def test_no_perturbation_at_zero(self):
        alpha, sigma, beta = schedule_coefficients(DiffusionSchedule(), 0.0)
        assert alpha == 1.0 and sigma == 0.0 and beta == pytest.approx(0.1)

    def test_terminal_alpha_closed_form(self):
        # Linear schedule integral over [0, 1] is (0.1 + 20) / 2 = 10.05.
        alpha, _, _ = schedule_coefficients(DiffusionSchedule(), 1.0)
        assert alpha == pytest.approx(np.exp(-5.025), rel=1e-12)

    def test_variance_preserving_identity(self):
        sched = DiffusionSchedule()
        ts = np.linspace(0.0, 1.0, 1000)
        alpha, sigma, _ = schedule_coefficients(sched, ts)
        assert np.max(np.abs(alpha**2 + sigma**2 - 1.0)) < 1e-12
        assert np.all(np.diff(alpha) < 0.0)
        assert np.all(np.diff(sigma) > 0.0)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            schedule_coefficients(DiffusionSchedule(), 1.5)


class TestForwardPerturb:
    def test_zero_noise(self):
        sched = DiffusionSchedule()
        alpha, _, _ = schedule_coefficients(sched, 0.4)
        y_t, target = forward_perturb(sched, 2.0, 0.4, 0.0)
        assert y_t == pytest.approx(2.0 * alpha)
        assert target == 0.0

    def test_score_target_formula(self):
        # Pick t where sigma = 0.5; then y0=0, eps=1 gives y_t=0.5, target=-2.
        sched = DiffusionSchedule()
        from scipy.optimize import brentq

        t_half = brentq(
            lambda t: schedule_coefficients(sched, t)[1] - 0.5, 1e-4, 1.0
        )
        y_t, target = forward_perturb(sched, 0.0, t_half, 1.0)
        assert y_t == pytest.approx(0.5, abs=1e-9)
        assert target == pytest.approx(-2.0, abs=1e-8)

    def test_t_zero_rejected(self):
        with pytest.raises(ValueError):
            forward_perturb(DiffusionSchedule(), 1.0, 0.0, 1.0)

    def test_marginal_variance_monte_carlo(self, rng):
        # Var(y_t) at fixed (y0, t) equals sigma(t)^2; chi-square spread gives
        # se ~ sigma^2 sqrt(2/n).
        sched = DiffusionSchedule()
        t = 0.35
        _, sigma, _ = schedule_coefficients(sched, t)
        eps = rng.standard_normal(10000)
        y_t, _ = forward_perturb(sched, 1.3, t, eps)
        se = sigma**2 * np.sqrt(2.0 / 10000)
        assert abs(y_t.var() - sigma**2) < 3.0 * se


class TestDsmLoss:
    def test_zero_for_oracle_network(self, rng):
        # If raw output equals -eps exactly the loss vanishes; emulate by
        # checking the quadratic form at the optimum analytically instead of
        # training: loss(raw) = mean w (raw + eps)^2 so raw = -eps gives 0.
        sched = DiffusionSchedule()
        eps = rng.standard_normal(64)
        w = np.ones(64)
        assert float(np.mean(w * (-eps + eps) ** 2)) == 0.0

    def test_zero_network_unit_loss(self, rng):
        # With sigma^2 weighting, s=0 gives loss = mean eps^2 -> 1.
        model = scalar_model()
        model.params.vector[...] = 0.0
        sched = DiffusionSchedule()
        y0 = rng.standard_normal(4000)
        loss, _ = dsm_loss(model, sched, y0, empty_condition(4000), rng)
        assert loss == pytest.approx(1.0, abs=0.08)

    def test_nonnegative(self, rng):
        model = scalar_model()
        sched = DiffusionSchedule()
        for _ in range(5):
            loss, _ = dsm_loss(
                model, sched, rng.standard_normal(32), empty_condition(32), rng
            )
            assert loss >= 0.0

    def test_gradients_match_finite_differences(self, rng):
        model = scalar_model(seed=8)
        sched = DiffusionSchedule()
        y0 = rng.standard_normal(6)
        t = rng.uniform(0.05, 1.0, 6)
        eps = rng.standard_normal(6)
        cond = empty_condition(6)
        _, grads = dsm_loss_given(model, sched, y0, cond, t, eps)
        h = 1e-5
        errs = []
        for _ in range(120):
            i = int(rng.integers(model.params.size))
            orig = model.params.vector[i]
            model.params.vector[i] = orig + h
            lp, _ = dsm_loss_given(model, sched, y0, cond, t, eps)
            model.params.vector[i] = orig - h
            lm, _ = dsm_loss_given(model, sched, y0, cond, t, eps)
            model.params.vector[i] = orig
            fd = (lp - lm) / (2 * h)
            a = grads.vector[i]
            errs.append(abs(a - fd) / max(abs(a), abs(fd), 1e-8))
        assert max(errs) < 1e-4

    def test_g2_weighting_flag(self, rng):
        cfg = ModelConfig(
            emb_dim=32,
            denoiser_hidden=(64,),
            condition=ConditionConfig(x_hidden=16, x_emb_dim=8, token_dim=8),
            loss_weighting="g2",
        )
        model = scalar_model(cfg=cfg)
        model.params.vector[...] = 0.0
        sched = DiffusionSchedule()
        y0 = rng.standard_normal(16)
        t = np.full(16, 0.5)
        eps = rng.standard_normal(16)
        loss, _ = dsm_loss_given(model, sched, y0, empty_condition(16), t, eps)
        _, sigma, beta = schedule_coefficients(sched, 0.5)
        assert loss == pytest.approx(
            float(np.mean(beta / sigma**2 * eps**2)), rel=1e-12
        )


class TestTraining:
    def test_standard_normal_fixture(self, rng):
        model = scalar_model(seed=21)
        sched = DiffusionSchedule(num_steps=120)
        y = rng.standard_normal(4000)
        trace = train_conditional_score(
            model, sched, y, empty_condition(4000), epochs=50, batch_size=128,
            seed=31,
        )
        assert trace[-1] < trace[0]
        draws = reverse_sample(
            model, sched, empty_condition(1), 2000, np.random.default_rng(7)
        )
        assert -0.1 < draws.mean() < 0.1
        assert 0.85 < draws.std() < 1.15

    def test_shifted_normal_fixture(self, rng):
        model = scalar_model(seed=22)
        sched = DiffusionSchedule(num_steps=120)
        # Standardize outside the model like the orchestrator does: train on
        # raw shifted data here to confirm the engine handles mean 3 directly.
        y = 3.0 + rng.standard_normal(4000)
        train_conditional_score(
            model, sched, y, empty_condition(4000), epochs=60, batch_size=128,
            seed=32,
        )
        draws = reverse_sample(
            model, sched, empty_condition(1), 2000, np.random.default_rng(8)
        )
        assert 2.8 < draws.mean() < 3.2

    def test_condition_bit_flips_mean(self, rng):
        # x in {-1, +1} switches the target mean between -2 and +2.
        model = ConditionalScoreModel(SCALAR_SCHEMA, d_x=1, slot=0, cfg=SMALL_CFG)
        model.init_params(23)
        sched = DiffusionSchedule(num_steps=120)
        n = 4000
        bits = rng.integers(0, 2, n)
        x = (2.0 * bits - 1.0)[:, None]
        y = 2.0 * x[:, 0] + 0.5 * rng.standard_normal(n)
        cond = ConditionBatch(x, np.zeros(n, dtype=int), np.zeros((n, 1)),
                              np.zeros((n, 1)))
        train_conditional_score(
            model, sched, y, cond, epochs=60, batch_size=128, seed=33
        )
        for bit, target in ((0, -2.0), (1, 2.0)):
            cond_eval = ConditionBatch(
                np.full((1, 1), 2.0 * bit - 1.0), [0], np.zeros((1, 1)),
                np.zeros((1, 1)),
            )
            draws = reverse_sample(
                model, sched, cond_eval, 1500, np.random.default_rng(40 + bit)
            )
            assert abs(draws.mean() - target) < 0.3


class TestReverseSampler:
    def test_exact_score_recovers_standard_normal(self):
        # For N(0,1) data the perturbed marginal stays N(0,1), score = -y.
        sched = DiffusionSchedule(num_steps=200)
        draws = reverse_sample_scorefn(
            sched, lambda y, t: -y, 10000, np.random.default_rng(3)
        )
        target = np.random.default_rng(4).standard_normal(10000)
        assert abs(draws.mean()) < 0.05
        assert wasserstein_1d(draws, target) < 0.05

    def test_exact_score_recovers_shifted_mean(self):
        # For N(mu, 1) the perturbed marginal is N(alpha mu, 1).
        sched = DiffusionSchedule(num_steps=200)
        mu = 1.7

        def score_fn(y, t):
            alpha, _, _ = schedule_coefficients(sched, t)
            return -(y - alpha * mu)

        draws = reverse_sample_scorefn(
            sched, score_fn, 10000, np.random.default_rng(5)
        )
        assert abs(draws.mean() - mu) < 0.05

    def test_step_doubling_shift_small(self):
        coarse = DiffusionSchedule(num_steps=100)
        fine = DiffusionSchedule(num_steps=200)
        a = reverse_sample_scorefn(coarse, lambda y, t: -y, 10000,
                                   np.random.default_rng(6))
        b = reverse_sample_scorefn(fine, lambda y, t: -y, 10000,
                                   np.random.default_rng(7))
        assert wasserstein_1d(a, b) < 0.05

    def test_seeds_differ_but_statistics_agree(self):
        sched = DiffusionSchedule(num_steps=100)
        a = reverse_sample_scorefn(sched, lambda y, t: -y, 5000,
                                   np.random.default_rng(8))
        b = reverse_sample_scorefn(sched, lambda y, t: -y, 5000,
                                   np.random.default_rng(9))
        assert not np.array_equal(a, b)
        assert abs(a.mean() - b.mean()) < 0.06
        assert abs(a.std() - b.std()) < 0.06
