"""Small dense networks with hand-written backprop and Adam.

Parameters are kept per layer but every gradient is also exposed as one flat
vector, which is what the gradient-surgery step operates on.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

ACTIVATIONS = ("tanh", "identity")


class NonFiniteError(ValueError):
    """Raised when a forward/backward pass or an update produces NaN/inf."""


@dataclass
class MlpNetwork:
    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    output_activation: str = "identity"

    def __post_init__(self) -> None:
        if len(self.layer_sizes) < 2:
            raise ValueError("an MLP needs at least an input and an output layer")
        if any(int(s) <= 0 for s in self.layer_sizes):
            raise ValueError(f"layer sizes must be positive, got {self.layer_sizes}")
        if self.output_activation not in ACTIVATIONS:
            raise ValueError(f"unknown output activation {self.output_activation!r}")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            expected = (self.layer_sizes[k], self.layer_sizes[k + 1])
            if w.shape != expected or b.shape != (expected[1],):
                raise ValueError(f"layer {k}: weight {w.shape} / bias {b.shape}, expected {expected}")

    @classmethod
    def create(
        cls,
        layer_sizes: Sequence[int],
        rng: np.random.Generator,
        output_activation: str = "identity",
    ) -> "MlpNetwork":
        """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init for weights and biases."""
        sizes = [int(s) for s in layer_sizes]
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            biases.append(rng.uniform(-bound, bound, size=fan_out))
        return cls(sizes, weights, biases, output_activation)

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def param_count(self) -> int:
        return sum(a * b + b for a, b in zip(self.layer_sizes[:-1], self.layer_sizes[1:]))

    def flatten(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b)
        return np.concatenate(parts)

    def unflatten(self, flat: np.ndarray) -> "MlpNetwork":
        """Return a new network of the same shape holding ``flat``."""
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.param_count,):
            raise ValueError(f"expected {self.param_count} parameters, got {flat.shape}")
        weights, biases, pos = [], [], 0
        for fan_in, fan_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            weights.append(flat[pos : pos + fan_in * fan_out].reshape(fan_in, fan_out).copy())
            pos += fan_in * fan_out
            biases.append(flat[pos : pos + fan_out].copy())
            pos += fan_out
        return MlpNetwork(list(self.layer_sizes), weights, biases, self.output_activation)

    def load_flat(self, flat: np.ndarray) -> None:
        other = self.unflatten(flat)
        self.weights, self.biases = other.weights, other.biases

    def copy(self) -> "MlpNetwork":
        return self.unflatten(self.flatten())


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    return np.tanh(z) if kind == "tanh" else z


def _check_input(net: MlpNetwork, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != net.layer_sizes[0] or x.ndim not in (1, 2):
        raise ValueError(
            f"input has trailing size {x.shape[-1] if x.ndim else 'scalar'}, "
            f"network expects {net.layer_sizes[0]}"
        )
    return x


def _forward_trace(net: MlpNetwork, x: np.ndarray, preact_offset: np.ndarray | None):
    activations = [x]
    h = x
    last = net.n_layers - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w + b
        if k == 0 and preact_offset is not None:
            z = z + preact_offset
        h = _activate(z, "tanh" if k < last else net.output_activation)
        activations.append(h)
    return activations


def mlp_forward(
    net: MlpNetwork, x: np.ndarray, preact_offset: np.ndarray | None = None
) -> np.ndarray:
    """Evaluate the network on one input vector or a batch of row vectors.

    ``preact_offset`` is added to the first layer's pre-activation; the critic
    uses it for its per-task input adapters.
    """
    x = _check_input(net, x)
    return _forward_trace(net, x, preact_offset)[-1]


@dataclass
class FlatGradient:
    values: np.ndarray
    tag: str = ""

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ValueError("flat gradient must be one-dimensional")
        if not np.all(np.isfinite(self.values)):
            raise NonFiniteError(f"non-finite entries in gradient {self.tag!r}")


def mlp_gradients(
    net: MlpNetwork,
    x: np.ndarray,
    output_cotangent: np.ndarray,
    preact_offset: np.ndarray | None = None,
    tag: str = "",
    return_first_delta: bool = False,
):
    """Gradient of <output, cotangent> w.r.t. the parameters and the input.

    For a batch the result is summed over rows. Returns
    ``(FlatGradient, input_gradient)``, plus the first-layer pre-activation
    gradient per row when ``return_first_delta`` is set.
    """
    x = _check_input(net, x)
    cot = np.asarray(output_cotangent, dtype=np.float64)
    out_shape = x.shape[:-1] + (net.layer_sizes[-1],)
    if cot.shape != out_shape:
        raise ValueError(f"cotangent shape {cot.shape} does not match output shape {out_shape}")

    acts = _forward_trace(net, x, preact_offset)
    last = net.n_layers - 1
    grads_w: list[np.ndarray] = [None] * net.n_layers  # type: ignore[list-item]
    grads_b: list[np.ndarray] = [None] * net.n_layers  # type: ignore[list-item]
    upstream = cot
    delta = cot
    for k in range(last, -1, -1):
        out = acts[k + 1]
        kind = "tanh" if k < last else net.output_activation
        delta = upstream * (1.0 - out * out) if kind == "tanh" else upstream
        if not np.all(np.isfinite(delta)):
            raise NonFiniteError(f"non-finite gradient at layer {k}")
        h_in = acts[k]
        if h_in.ndim == 1:
            grads_w[k] = np.outer(h_in, delta)
            grads_b[k] = delta.copy()
        else:
            grads_w[k] = h_in.T @ delta
            grads_b[k] = delta.sum(axis=0)
        upstream = delta @ net.weights[k].T
    parts = []
    for gw, gb in zip(grads_w, grads_b):
        parts.append(gw.ravel())
        parts.append(gb)
    flat = FlatGradient(np.concatenate(parts), tag)
    if return_first_delta:
        return flat, upstream, delta
    return flat, upstream


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, size: int, lr: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(np.zeros(size), np.zeros(size), 0, lr, beta1, beta2, eps)


def adam_step(
    params: np.ndarray, grad: FlatGradient | np.ndarray, state: AdamState
) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update. Pure: inputs are not modified."""
    g = grad.values if isinstance(grad, FlatGradient) else np.asarray(grad, dtype=np.float64)
    params = np.asarray(params, dtype=np.float64)
    if g.shape != params.shape or state.m.shape != params.shape:
        raise ValueError(f"shape mismatch: params {params.shape}, grad {g.shape}, state {state.m.shape}")
    if state.t < 0:
        raise ValueError("Adam step counter must be nonnegative")
    if not np.all(np.isfinite(g)):
        bad = np.flatnonzero(~np.isfinite(g))
        raise NonFiniteError(f"refusing Adam update: {bad.size} non-finite gradient entries (first at {bad[0]})")
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * g
    v = state.beta2 * state.v + (1.0 - state.beta2) * g * g
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_params = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_params, replace(state, m=m, v=v, t=t)


__all__ = [
    "AdamState",
    "FlatGradient",
    "MlpNetwork",
    "NonFiniteError",
    "adam_step",
    "mlp_forward",
    "mlp_gradients",
]
