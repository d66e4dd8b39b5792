"""Minimal feed-forward substrate: flat parameter stores, SiLU MLPs with
hand-written reverse-mode gradients, Adam, and sinusoidal time features.

Everything is float64 numpy. Forward passes accept a single vector (input_dim,)
or a batch (n, input_dim) and return matching shape.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import expit as sigmoid

__all__ = [
    "ParamStore",
    "MlpSpec",
    "AdamState",
    "mlp_init",
    "mlp_forward",
    "mlp_forward_cached",
    "mlp_backward",
    "backprop_gradients",
    "adam_step",
    "sinusoidal_time_embed",
    "silu",
    "silu_grad",
]


def silu(z: np.ndarray) -> np.ndarray:
    return z * sigmoid(z)


def silu_grad(z: np.ndarray) -> np.ndarray:
    s = sigmoid(z)
    return s * (1.0 + z * (1.0 - s))


class ParamStore:
    """Flat float64 parameter vector plus a manifest of named tensor views.

    Manifest entries are (offset, shape); offsets are disjoint and cover the
    vector exactly. Views share memory with the flat vector, so in-place
    optimizer updates are visible through every view.
    """

    def __init__(self, vector: np.ndarray, manifest: dict[str, tuple[int, tuple]]):
        self.vector = np.asarray(vector, dtype=np.float64)
        self.manifest = dict(manifest)
        self._check_layout()

    def _check_layout(self) -> None:
        spans = sorted(
            (off, off + int(np.prod(shape, dtype=np.int64)))
            for off, shape in self.manifest.values()
        )
        cursor = 0
        for start, stop in spans:
            if start != cursor:
                raise ValueError("manifest offsets must be disjoint and contiguous")
            cursor = stop
        if cursor != self.vector.size:
            raise ValueError(
                f"manifest covers {cursor} values, vector has {self.vector.size}"
            )

    @classmethod
    def build(cls, entries: list[tuple[str, tuple]]) -> "ParamStore":
        """Zero-initialized store laid out in the order of `entries`."""
        manifest = {}
        offset = 0
        for name, shape in entries:
            if name in manifest:
                raise ValueError(f"duplicate parameter name {name!r}")
            size = int(np.prod(shape, dtype=np.int64))
            manifest[name] = (offset, tuple(int(s) for s in shape))
            offset += size
        return cls(np.zeros(offset, dtype=np.float64), manifest)

    def view(self, name: str) -> np.ndarray:
        offset, shape = self.manifest[name]
        size = int(np.prod(shape, dtype=np.int64))
        return self.vector[offset : offset + size].reshape(shape)

    def set(self, name: str, values: np.ndarray) -> None:
        self.view(name)[...] = values

    def zeros_like(self) -> "ParamStore":
        return ParamStore(np.zeros_like(self.vector), self.manifest)

    def copy(self) -> "ParamStore":
        return ParamStore(self.vector.copy(), self.manifest)

    @property
    def size(self) -> int:
        return self.vector.size

    def names(self) -> list[str]:
        return sorted(self.manifest, key=lambda n: self.manifest[n][0])


@dataclass(frozen=True)
class MlpSpec:
    """Feed-forward net: SiLU after each hidden layer, identity at output."""

    input_dim: int
    hidden_dims: tuple[int, ...]
    output_dim: int

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        dims = (self.input_dim, *self.hidden_dims, self.output_dim)
        if any(d < 1 for d in dims):
            raise ValueError(f"all dims must be >= 1, got {dims}")

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        dims = (self.input_dim, *self.hidden_dims, self.output_dim)
        return list(zip(dims[:-1], dims[1:]))

    def param_entries(self, prefix: str = "") -> list[tuple[str, tuple]]:
        entries = []
        for i, (fan_in, fan_out) in enumerate(self.layer_dims):
            entries.append((f"{prefix}w{i}", (fan_out, fan_in)))
            entries.append((f"{prefix}b{i}", (fan_out,)))
        return entries


def mlp_init(
    spec: MlpSpec, params: ParamStore, rng: np.random.Generator, prefix: str = ""
) -> None:
    """Kaiming-uniform weights (ReLU-family gain, which suits SiLU), zero biases."""
    for i, (fan_in, _) in enumerate(spec.layer_dims):
        limit = np.sqrt(6.0 / fan_in)
        w = params.view(f"{prefix}w{i}")
        w[...] = rng.uniform(-limit, limit, size=w.shape)
        params.view(f"{prefix}b{i}")[...] = 0.0


def _as_batch(x: np.ndarray, input_dim: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        if x.shape[0] != input_dim:
            raise ValueError(f"input length {x.shape[0]} != input_dim {input_dim}")
        return x[None, :], True
    if x.ndim == 2:
        if x.shape[1] != input_dim:
            raise ValueError(f"input width {x.shape[1]} != input_dim {input_dim}")
        return x, False
    raise ValueError("input must be 1-D or 2-D")


def mlp_forward_cached(
    spec: MlpSpec, params: ParamStore, inputs: np.ndarray, prefix: str = ""
):
    """Forward pass that also returns the activations needed by mlp_backward."""
    x, squeeze = _as_batch(inputs, spec.input_dim)
    n_layers = len(spec.layer_dims)
    pre, post = [], [x]
    h = x
    for i in range(n_layers):
        w = params.view(f"{prefix}w{i}")
        b = params.view(f"{prefix}b{i}")
        z = h @ w.T + b
        pre.append(z)
        h = silu(z) if i < n_layers - 1 else z
        post.append(h)
    out = h[0] if squeeze else h
    return out, (pre, post, squeeze)


def mlp_forward(
    spec: MlpSpec, params: ParamStore, inputs: np.ndarray, prefix: str = ""
) -> np.ndarray:
    out, _ = mlp_forward_cached(spec, params, inputs, prefix)
    return out


def mlp_backward(
    spec: MlpSpec,
    params: ParamStore,
    cache,
    upstream: np.ndarray,
    grads: ParamStore,
    prefix: str = "",
) -> np.ndarray:
    """Accumulate d<upstream, output>/dparams into `grads`; return input grad."""
    pre, post, squeeze = cache
    n_layers = len(spec.layer_dims)
    g = np.asarray(upstream, dtype=np.float64)
    if g.ndim == 1 and not squeeze:
        raise ValueError("upstream must be batched like the forward input")
    if g.ndim == 1:
        g = g[None, :]
    if g.shape != (post[0].shape[0], spec.output_dim):
        raise ValueError(f"upstream shape {g.shape} mismatches output")
    for i in reversed(range(n_layers)):
        if i < n_layers - 1:
            g = g * silu_grad(pre[i])
        grads.view(f"{prefix}w{i}")[...] += g.T @ post[i]
        grads.view(f"{prefix}b{i}")[...] += g.sum(axis=0)
        g = g @ params.view(f"{prefix}w{i}")
    return g[0] if squeeze else g


def backprop_gradients(
    spec: MlpSpec,
    params: ParamStore,
    inputs: np.ndarray,
    upstream: np.ndarray,
    prefix: str = "",
) -> tuple[ParamStore, np.ndarray]:
    """Exact gradients of <upstream, mlp(inputs)> w.r.t. params and inputs."""
    _, cache = mlp_forward_cached(spec, params, inputs, prefix)
    grads = params.zeros_like()
    input_grad = mlp_backward(spec, params, cache, upstream, grads, prefix)
    return grads, input_grad


@dataclass
class AdamState:
    """Bias-corrected Adam over a flat parameter vector."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: ParamStore, learning_rate: float = 1e-3) -> "AdamState":
        return cls(
            m=np.zeros_like(params.vector),
            v=np.zeros_like(params.vector),
            learning_rate=learning_rate,
        )


def adam_step(state: AdamState, params: ParamStore, grads: ParamStore) -> None:
    """One in-place Adam update."""
    g = grads.vector
    if g.shape != params.vector.shape:
        raise ValueError("gradient/parameter size mismatch")
    state.step += 1
    state.m += (1.0 - state.beta1) * (g - state.m)
    state.v += (1.0 - state.beta2) * (g * g - state.v)
    m_hat = state.m / (1.0 - state.beta1 ** state.step)
    v_hat = state.v / (1.0 - state.beta2 ** state.step)
    params.vector -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)


_TIME_FREQ_MAX = 1000.0


def sinusoidal_time_embed(t, dim: int) -> np.ndarray:
    """Geometric-frequency sin/cos features of t; accepts scalar or (n,) t.

    Frequencies span 1..1000 so times in [0, 1] separate on a fine grid while
    all entries stay in [-1, 1]; t=0 maps to (sin=0, cos=1).
    """
    if dim < 2 or dim % 2 != 0:
        raise ValueError("embedding dim must be even and >= 2")
    half = dim // 2
    if half == 1:
        freqs = np.array([1.0])
    else:
        freqs = np.exp(np.linspace(0.0, np.log(_TIME_FREQ_MAX), half))
    t_arr = np.asarray(t, dtype=np.float64)
    phase = t_arr[..., None] * freqs
    return np.concatenate([np.sin(phase), np.cos(phase)], axis=-1)
