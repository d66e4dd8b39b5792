"""Hierarchical training, autoregressive sampling, ordering aggregation, and
point estimates, on fast Gaussian fixtures."""

import numpy as np
import pytest

import jointdiff.autoreg as autoreg
from jointdiff.autoreg import (
    JointOutcomeModel,
    TrainConfig,
    aggregate_orderings,
    autoregressive_sample,
    hierarchical_train,
    predict_capo,
    predict_cate,
    subset_mask_sampler,
)
from jointdiff.conditioning import ConditionConfig
from jointdiff.diffusion import (
    ConditionalScoreModel,
    ConditionBatch,
    DiffusionSchedule,
    ModelConfig,
    TrainStreams,
    reverse_sample,
    train_conditional_score,
)
from jointdiff.nn import AdamState
from jointdiff.rngs import derive_int_seed
from jointdiff.schema import Dataset, Ordering, OutcomeSchema, OutcomeSpec
from jointdiff.bundle import load_bundle, save_bundle

FAST_SCHED = DiffusionSchedule(num_steps=80)
FAST_CFG = ModelConfig(
    emb_dim=24,
    denoiser_hidden=(48, 48),
    cat_hidden=(48,),
    condition=ConditionConfig(x_hidden=16, x_emb_dim=8, token_dim=8),
)


def gaussian_pair_dataset(n=2500, rho=0.8, seed=0):
    """Two outcomes, fixed correlation, no covariate effect (d_x = 1)."""
    rng = np.random.default_rng(seed)
    schema = OutcomeSchema(
        (OutcomeSpec("y1", "continuous"), OutcomeSpec("y2", "continuous"))
    )
    z = rng.standard_normal((n, 2))
    y1 = z[:, 0]
    y2 = rho * z[:, 0] + np.sqrt(1.0 - rho**2) * z[:, 1]
    return Dataset(
        schema,
        rng.standard_normal((n, 1)) * 0.0,
        rng.integers(0, 2, n),
        np.column_stack([y1, y2]),
    )


def scalar_dataset(n=1500, mean=0.0, seed=1):
    rng = np.random.default_rng(seed)
    schema = OutcomeSchema((OutcomeSpec("y", "continuous"),))
    return Dataset(
        schema,
        np.zeros((n, 1)),
        rng.integers(0, 2, n),
        (mean + rng.standard_normal(n))[:, None],
    )


@pytest.fixture(scope="module")
def pair_model():
    ds = gaussian_pair_dataset()
    cfg = TrainConfig(epochs_per_stage=30, batch_size=128, seed=3)
    return ds, hierarchical_train(
        ds, schedule=FAST_SCHED, model_cfg=FAST_CFG, train_cfg=cfg
    )


@pytest.fixture(scope="module")
def scalar_model():
    ds = scalar_dataset()
    cfg = TrainConfig(epochs_per_stage=15, batch_size=128, seed=4)
    return ds, hierarchical_train(
        ds, schedule=FAST_SCHED, model_cfg=FAST_CFG, train_cfg=cfg
    )


def wasserstein_1d(a, b):
    qa, qb = np.sort(a), np.sort(b)
    n = min(qa.size, qb.size)
    return float(np.abs(qa[:n] - qb[:n]).mean())


class TestSubsetMaskSampler:
    def test_fixed_size_masks(self, rng):
        sampler = subset_mask_sampler(slot=1, k=4, stage_size=2)
        mask = sampler(np.arange(100), rng)
        assert mask.shape == (100, 4)
        assert np.all(mask[:, 1] == 0.0)
        assert np.all(mask.sum(axis=1) == 2.0)

    def test_mixed_sizes_span_range(self, rng):
        sampler = subset_mask_sampler(slot=0, k=3, stage_size=None)
        sizes = sampler(np.arange(2000), rng).sum(axis=1)
        assert set(sizes.astype(int).tolist()) == {0, 1, 2}

    def test_k1_always_empty(self, rng):
        sampler = subset_mask_sampler(slot=0, k=1, stage_size=None)
        assert np.all(sampler(np.arange(10), rng) == 0.0)

    def test_subsets_uniform(self, rng):
        # For k=3, slot 0, size 1: each other slot chosen about half the time.
        sampler = subset_mask_sampler(slot=0, k=3, stage_size=1)
        mask = sampler(np.arange(4000), rng)
        assert abs(mask[:, 1].mean() - 0.5) < 0.05
        assert abs(mask[:, 2].mean() - 0.5) < 0.05


class TestHierarchicalTrain:
    def test_k1_matches_direct_training(self):
        # Degenerate factorization: the curriculum is two stages of plain
        # conditional diffusion, so the trace must equal a direct run with the
        # same per-slot seed and twice the epochs.
        ds = scalar_dataset(n=800, seed=7)
        cfg = TrainConfig(epochs_per_stage=5, batch_size=128, seed=11)
        joint = hierarchical_train(
            ds, schedule=FAST_SCHED, model_cfg=FAST_CFG, train_cfg=cfg
        )
        direct = ConditionalScoreModel(ds.schema, 1, 0, FAST_CFG)
        direct.init_params(derive_int_seed(cfg.seed, 2, 0))
        y_std = joint.standardization.standardize(ds.Y, ds.schema)[:, 0]
        cond = ConditionBatch(ds.X, ds.A, y_std[:, None], np.zeros((ds.n, 1)))
        trace = train_conditional_score(
            direct,
            FAST_SCHED,
            y_std,
            cond,
            epochs=10,
            batch_size=128,
            streams=TrainStreams.from_seed(joint.slot_seed(0)),
            adam=AdamState.for_params(direct.params, cfg.learning_rate),
        )
        assert np.allclose(trace, joint.loss_traces[0], rtol=0, atol=0)
        assert np.array_equal(direct.params.vector, joint.models[0].params.vector)

    def test_conditional_mean_shifts_with_conditioning_value(self, pair_model):
        # p(y2 | y1) must move in the direction of sign(rho) * y1.
        ds, model = pair_model
        x = np.zeros(1)
        y_lo, y_hi = -1.5, 1.5
        means = {}
        for tag, y1 in (("lo", y_lo), ("hi", y_hi)):
            y1_std = (y1 - model.standardization.means[0]) / model.standardization.stds[0]
            cond = ConditionBatch(
                np.zeros((1, 1)), [0], np.array([[y1_std, 0.0]]),
                np.array([[1.0, 0.0]]),
            )
            draws = reverse_sample(
                model.models[1], model.schedule, cond, 800,
                np.random.default_rng(5),
            )
            means[tag] = (
                draws.mean() * model.standardization.stds[1]
                + model.standardization.means[1]
            )
        assert means["hi"] > means["lo"]  # rho > 0
        assert means["hi"] - means["lo"] > 1.0  # roughly 0.8 * (3.0) = 2.4

    def test_loss_trace_nonincreasing_smoothed(self, pair_model):
        _, model = pair_model
        for trace in model.loss_traces:
            arr = np.asarray(trace)
            window = 10
            smoothed = np.convolve(arr, np.ones(window) / window, mode="valid")
            # allow tiny numerical wiggle
            assert smoothed[-1] <= smoothed[0] + 0.05
            assert np.all(np.diff(smoothed) < 0.08)


class TestAutoregressiveSample:
    def test_k1_matches_direct_reverse_sample(self, scalar_model):
        ds, model = scalar_model
        x = np.zeros(1)
        sample = autoregressive_sample(
            model, x, 0, Ordering((1,)), 1500, np.random.default_rng(21)
        )
        cond = ConditionBatch(np.zeros((1, 1)), [0], np.zeros((1, 1)),
                              np.zeros((1, 1)))
        direct_std = reverse_sample(
            model.models[0], model.schedule, cond, 1500,
            np.random.default_rng(22),
        )
        direct = (
            direct_std * model.standardization.stds[0]
            + model.standardization.means[0]
        )
        assert wasserstein_1d(sample.draws[:, 0], direct) < 0.1

    def test_stubbed_chain_constant_draws(self, pair_model, monkeypatch):
        _, model = pair_model
        c1, c2 = 0.7, -1.3
        std = model.standardization

        def stub_reverse(slot_model, schedule, cond, n, rng):
            value = c1 if slot_model.slot == 0 else c2
            z = (value - std.means[slot_model.slot]) / std.stds[slot_model.slot]
            return np.full(n, z)

        monkeypatch.setattr(autoreg, "reverse_sample", stub_reverse)
        sample = autoregressive_sample(
            model, np.zeros(1), 1, Ordering((1, 2)), 40,
            np.random.default_rng(0),
        )
        assert np.allclose(sample.draws[:, 0], c1)
        assert np.allclose(sample.draws[:, 1], c2)

    def test_correlation_close_to_target(self, pair_model):
        ds, model = pair_model
        sample = autoregressive_sample(
            model, np.zeros(1), 0, Ordering((1, 2)), 1000,
            np.random.default_rng(33),
        )
        r = np.corrcoef(sample.draws[:, 0], sample.draws[:, 1])[0, 1]
        assert abs(r - 0.8) < 0.15

    def test_draws_conform_to_schema(self, pair_model):
        _, model = pair_model
        sample = autoregressive_sample(
            model, np.zeros(1), 1, Ordering((2, 1)), 50,
            np.random.default_rng(2),
        )
        assert sample.conforms()

    def test_determinism(self, pair_model):
        _, model = pair_model
        a = autoregressive_sample(model, np.zeros(1), 0, Ordering((1, 2)), 64,
                                  np.random.default_rng(77))
        b = autoregressive_sample(model, np.zeros(1), 0, Ordering((1, 2)), 64,
                                  np.random.default_rng(77))
        assert np.array_equal(a.draws, b.draws)

    def test_untrained_model_rejected(self):
        schema = OutcomeSchema((OutcomeSpec("y", "continuous"),))
        model = JointOutcomeModel(
            schema, 1, [Ordering((1,))], FAST_SCHED, FAST_CFG, TrainConfig()
        )
        with pytest.raises(ValueError):
            autoregressive_sample(model, np.zeros(1), 0, Ordering((1,)), 4,
                                  np.random.default_rng(0))


class TestAggregateOrderings:
    def test_single_ordering_equals_autoregressive(self, scalar_model):
        _, model = scalar_model
        agg = aggregate_orderings(model, np.zeros(1), 0, 200,
                                  np.random.default_rng(5))
        child = np.random.default_rng(5).spawn(1)[0]
        direct = autoregressive_sample(model, np.zeros(1), 0, Ordering((1,)),
                                       200, child)
        assert np.array_equal(agg.draws, direct.draws)

    def test_draw_counts_split_evenly(self, pair_model):
        _, model = pair_model
        assert len(model.orderings) == 2
        agg = aggregate_orderings(model, np.zeros(1), 0, 1000,
                                  np.random.default_rng(6))
        counts = np.bincount(agg.ordering_ids)
        assert counts.tolist() == [500, 500]

    def test_orderings_agree_on_joint(self, pair_model):
        # Both factorizations target the same joint; per-ordering marginal
        # projections should be close.
        _, model = pair_model
        agg = aggregate_orderings(model, np.zeros(1), 0, 1600,
                                  np.random.default_rng(7))
        part0 = agg.draws[agg.ordering_ids == 0]
        part1 = agg.draws[agg.ordering_ids == 1]
        for slot in (0, 1):
            assert wasserstein_1d(part0[:, slot], part1[:, slot]) < 0.2


class TestPointEstimates:
    def test_capo_close_to_truth(self, scalar_model):
        ds, model = scalar_model
        capo = predict_capo(model, np.zeros(1), 0, 1, 1500)
        assert abs(capo - 0.0) < 0.15

    def test_cate_zero_when_arms_identical(self, scalar_model, monkeypatch):
        _, model = scalar_model

        def stub_reverse(slot_model, schedule, cond, n, rng):
            return np.full(n, 0.25)

        monkeypatch.setattr(autoreg, "reverse_sample", stub_reverse)
        cate = predict_cate(model, np.zeros(1), 1, 200)
        assert cate == 0.0

    def test_monte_carlo_error_scaling(self, scalar_model):
        # Quadrupling n should roughly halve the spread of the estimator.
        _, model = scalar_model
        small = [
            predict_capo(model, np.zeros(1), 0, 1, 200,
                         rng=np.random.default_rng(1000 + i))
            for i in range(24)
        ]
        large = [
            predict_capo(model, np.zeros(1), 0, 1, 800,
                         rng=np.random.default_rng(2000 + i))
            for i in range(24)
        ]
        ratio = np.std(small) / np.std(large)
        assert 1.3 < ratio < 3.2


class TestBundleRoundtrip:
    def test_save_load_preserves_samples(self, pair_model, tmp_path):
        _, model = pair_model
        save_bundle(model, tmp_path / "bundle")
        loaded = load_bundle(tmp_path / "bundle")
        a = aggregate_orderings(model, np.zeros(1), 1, 64,
                                np.random.default_rng(3))
        b = aggregate_orderings(loaded, np.zeros(1), 1, 64,
                                np.random.default_rng(3))
        assert np.array_equal(a.draws, b.draws)
        assert [o.sigma for o in loaded.orderings] == [
            o.sigma for o in model.orderings
        ]
