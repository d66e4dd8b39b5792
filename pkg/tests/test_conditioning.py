"""Condition encoder: masking invariance and gradient exactness."""

import numpy as np
import pytest

from jointdiff.conditioning import ConditionConfig, ConditionEncoder, embed_condition
from jointdiff.nn import ParamStore


def make_encoder(schema, d_x=3):
    cfg = ConditionConfig(x_hidden=10, x_emb_dim=6, token_dim=5)
    enc = ConditionEncoder(schema, d_x, cfg)
    params = ParamStore.build(enc.param_entries())
    enc.init_params(params, np.random.default_rng(0))
    return enc, params


class TestMaskingInvariance:
    def test_all_zero_mask_depends_only_on_x_a_target(self, mixed_schema, rng):
        enc, params = make_encoder(mixed_schema)
        x = rng.standard_normal(3)
        base = embed_condition(enc, params, x, 1, [0.0, 1], [0, 0], target_index=1)
        other = embed_condition(enc, params, x, 1, [99.0, 2], [0, 0], target_index=1)
        assert np.array_equal(base, other)

    def test_hidden_slot_value_is_ignored(self, mixed_schema, rng):
        enc, params = make_encoder(mixed_schema)
        x = rng.standard_normal(3)
        base = embed_condition(enc, params, x, 0, [1.5, 1], [1, 0], target_index=2)
        poked = embed_condition(
            enc, params, x, 0, [1.5, 3], [1, 0], target_index=2
        )
        assert np.array_equal(base, poked)

    def test_masked_in_value_changes_embedding(self, mixed_schema, rng):
        enc, params = make_encoder(mixed_schema)
        x = rng.standard_normal(3)
        low = embed_condition(enc, params, x, 0, [0.1, 1], [1, 0], target_index=2)
        high = embed_condition(enc, params, x, 0, [2.5, 1], [1, 0], target_index=2)
        assert not np.array_equal(low, high)

    def test_distinct_categories_distinct_embeddings(self, mixed_schema, rng):
        enc, params = make_encoder(mixed_schema)
        x = rng.standard_normal(3)
        cat1 = embed_condition(enc, params, x, 0, [0.0, 1], [0, 1], target_index=1)
        cat2 = embed_condition(enc, params, x, 0, [0.0, 2], [0, 1], target_index=1)
        assert not np.array_equal(cat1, cat2)

    def test_target_index_changes_embedding(self, mixed_schema, rng):
        enc, params = make_encoder(mixed_schema)
        x = rng.standard_normal(3)
        t1 = embed_condition(enc, params, x, 0, [0.0, 1], [0, 0], target_index=1)
        t2 = embed_condition(enc, params, x, 0, [0.0, 1], [0, 0], target_index=2)
        assert not np.array_equal(t1, t2)

    def test_out_of_range_conditioning_category_rejected(self, mixed_schema, rng):
        enc, params = make_encoder(mixed_schema)
        x = rng.standard_normal(3)
        with pytest.raises(ValueError):
            embed_condition(enc, params, x, 0, [0.0, 7], [0, 1], target_index=1)


class TestEncoderGradients:
    def test_backward_matches_finite_differences(self, mixed_schema, rng):
        enc, params = make_encoder(mixed_schema)
        n = 6
        x = rng.standard_normal((n, 3))
        a = rng.integers(0, 2, n)
        y = np.column_stack([rng.standard_normal(n), rng.integers(1, 4, n)])
        mask = np.column_stack([rng.integers(0, 2, n), rng.integers(0, 2, n)])
        upstream = rng.standard_normal((n, enc.out_dim))

        def objective():
            out, _ = enc.forward(params, x, a, y, mask, target_slot=0)
            return float((upstream * out).sum())

        out, cache = enc.forward(params, x, a, y, mask, target_slot=0)
        grads = params.zeros_like()
        enc.backward(params, cache, upstream, grads)

        h = 1e-5
        errs = []
        for _ in range(150):
            i = int(rng.integers(params.size))
            orig = params.vector[i]
            params.vector[i] = orig + h
            fp = objective()
            params.vector[i] = orig - h
            fm = objective()
            params.vector[i] = orig
            fd = (fp - fm) / (2 * h)
            analytic = grads.vector[i]
            errs.append(abs(analytic - fd) / max(abs(analytic), abs(fd), 1e-8))
        assert max(errs) < 1e-4
