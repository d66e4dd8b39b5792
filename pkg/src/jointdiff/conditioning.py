"""Shared conditioning encoder for the per-slot generators.

Maps (covariates, treatment, already-available outcome values under a
conditional mask, target slot) into one flat embedding. Masked-out outcome
slots contribute a learned absent token, so the embedding is a function of
the masked values only; continuous conditioning values are expected in
standardized units.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import MlpSpec, ParamStore, mlp_backward, mlp_forward_cached, mlp_init
from .schema import OutcomeSchema

__all__ = ["ConditionConfig", "ConditionEncoder", "embed_condition"]


@dataclass(frozen=True)
class ConditionConfig:
    x_hidden: int = 64
    x_emb_dim: int = 32
    token_dim: int = 16


class ConditionEncoder:
    """Concatenates covariate MLP features with learned tokens for treatment,
    each outcome slot (value embed or absent token), and the target slot."""

    def __init__(self, schema: OutcomeSchema, d_x: int, cfg: ConditionConfig,
                 prefix: str = "cond."):
        self.schema = schema
        self.d_x = d_x
        self.cfg = cfg
        self.prefix = prefix
        self.x_spec = MlpSpec(d_x, (cfg.x_hidden,), cfg.x_emb_dim)

    @property
    def k(self) -> int:
        return self.schema.k

    @property
    def out_dim(self) -> int:
        return self.cfg.x_emb_dim + (self.k + 2) * self.cfg.token_dim

    def param_entries(self) -> list[tuple[str, tuple]]:
        p, tok = self.prefix, self.cfg.token_dim
        entries = list(self.x_spec.param_entries(prefix=f"{p}x."))
        entries.append((f"{p}a_tok", (2, tok)))
        for slot in range(self.k):
            if self.schema.is_continuous(slot):
                entries.append((f"{p}y{slot}.w", (tok,)))
                entries.append((f"{p}y{slot}.b", (tok,)))
            else:
                entries.append((f"{p}y{slot}.tab",
                                (self.schema.num_categories(slot), tok)))
        entries.append((f"{p}absent_tok", (self.k, tok)))
        entries.append((f"{p}target_tok", (self.k, tok)))
        return entries

    def init_params(self, params: ParamStore, rng: np.random.Generator) -> None:
        p = self.prefix
        mlp_init(self.x_spec, params, rng, prefix=f"{p}x.")
        for name, _ in self.param_entries():
            if name.startswith(f"{p}x."):
                continue
            view = params.view(name)
            view[...] = rng.normal(0.0, 0.1, size=view.shape)

    def _prepare(self, x, a, y_cond, mask):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        n = x.shape[0]
        if x.shape[1] != self.d_x:
            raise ValueError(f"x width {x.shape[1]} != covariate_dim {self.d_x}")
        a = np.broadcast_to(np.asarray(a, dtype=np.int64), (n,))
        if not np.all((a == 0) | (a == 1)):
            raise ValueError("treatment entries must be 0 or 1")
        y = np.asarray(y_cond, dtype=np.float64)
        y = np.broadcast_to(y, (n, self.k)) if y.ndim <= 2 else y
        m = np.asarray(mask, dtype=np.float64)
        m = np.broadcast_to(m, (n, self.k))
        if not np.all((m == 0) | (m == 1)):
            raise ValueError("conditional mask must be binary")
        # Sanitize: masked-out values are never read, so garbage there is fine,
        # but masked-in values must conform to the schema.
        vals = np.where(m == 1.0, y, 0.0)
        for slot in range(self.k):
            active = m[:, slot] == 1.0
            if not active.any():
                continue
            if self.schema.is_continuous(slot):
                if not np.all(np.isfinite(vals[active, slot])):
                    raise ValueError(f"non-finite conditioning value at slot {slot}")
            else:
                got = vals[active, slot]
                L = self.schema.num_categories(slot)
                if not np.all((got == np.round(got)) & (got >= 1) & (got <= L)):
                    raise ValueError(
                        f"conditioning category outside 1..{L} at slot {slot}"
                    )
        return x, a, vals, m

    def forward(self, params: ParamStore, x, a, y_cond, mask, target_slot: int):
        """Batched embedding: returns ((n, out_dim) array, cache)."""
        if not 0 <= target_slot < self.k:
            raise ValueError(f"target_slot {target_slot} outside 0..{self.k - 1}")
        x, a, vals, m = self._prepare(x, a, y_cond, mask)
        n = x.shape[0]
        p, tok = self.prefix, self.cfg.token_dim
        x_emb, x_cache = mlp_forward_cached(self.x_spec, params, x, prefix=f"{p}x.")
        pieces = [x_emb, params.view(f"{p}a_tok")[a]]
        absent = params.view(f"{p}absent_tok")
        cat_idx = {}
        for slot in range(self.k):
            m_col = m[:, slot : slot + 1]
            if self.schema.is_continuous(slot):
                w = params.view(f"{p}y{slot}.w")
                b = params.view(f"{p}y{slot}.b")
                present = vals[:, slot : slot + 1] * w[None, :] + b[None, :]
            else:
                idx = np.where(m[:, slot] == 1.0, vals[:, slot] - 1.0, 0.0).astype(
                    np.int64
                )
                cat_idx[slot] = idx
                present = params.view(f"{p}y{slot}.tab")[idx]
            pieces.append(m_col * present + (1.0 - m_col) * absent[slot][None, :])
        pieces.append(np.broadcast_to(
            params.view(f"{p}target_tok")[target_slot], (n, tok)
        ))
        out = np.concatenate(pieces, axis=1)
        cache = (x_cache, a, vals, m, cat_idx, target_slot, n)
        return out, cache

    def backward(self, params: ParamStore, cache, upstream: np.ndarray,
                 grads: ParamStore) -> None:
        """Accumulate parameter gradients of <upstream, forward output>."""
        x_cache, a, vals, m, cat_idx, target_slot, n = cache
        p, tok = self.prefix, self.cfg.token_dim
        if upstream.shape != (n, self.out_dim):
            raise ValueError("upstream shape mismatch")
        cursor = self.cfg.x_emb_dim
        mlp_backward(self.x_spec, params, x_cache, upstream[:, :cursor], grads,
                     prefix=f"{p}x.")
        g_a = upstream[:, cursor : cursor + tok]
        np.add.at(grads.view(f"{p}a_tok"), a, g_a)
        cursor += tok
        g_absent = grads.view(f"{p}absent_tok")
        for slot in range(self.k):
            g = upstream[:, cursor : cursor + tok]
            cursor += tok
            m_col = m[:, slot : slot + 1]
            g_present = m_col * g
            if self.schema.is_continuous(slot):
                grads.view(f"{p}y{slot}.w")[...] += (
                    g_present * vals[:, slot : slot + 1]
                ).sum(axis=0)
                grads.view(f"{p}y{slot}.b")[...] += g_present.sum(axis=0)
            else:
                np.add.at(grads.view(f"{p}y{slot}.tab"), cat_idx[slot], g_present)
            g_absent[slot] += ((1.0 - m_col) * g).sum(axis=0)
        grads.view(f"{p}target_tok")[target_slot] += upstream[:, cursor:].sum(axis=0)


def embed_condition(
    encoder: ConditionEncoder,
    params: ParamStore,
    x: np.ndarray,
    a: int,
    y_cond,
    conditional_mask,
    target_index: int,
) -> np.ndarray:
    """Single-record embedding; target_index is the 1-based outcome index."""
    out, _ = encoder.forward(
        params,
        np.asarray(x, dtype=np.float64)[None, :],
        np.array([a]),
        np.asarray(y_cond, dtype=np.float64)[None, :],
        np.asarray(conditional_mask, dtype=np.float64)[None, :],
        target_slot=target_index - 1,
    )
    return out[0]
