"""Value-function approximator: a single-hidden-layer network with a fixed
random input layer, wrapped in a constrained expression V(x) = eta(x) - eta(0)
so V(0) = 0 holds exactly for any output weights."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import RngStream, seeded_uniform


def activation(z):
    """Swish: z * sigmoid(z)."""
    z = np.asarray(z, dtype=np.float64)
    out = z / (1.0 + np.exp(-z))
    return float(out) if out.ndim == 0 else out


def activation_derivative(z):
    """d/dz of swish: s(z) + z s(z)(1 - s(z)) with s the sigmoid."""
    z = np.asarray(z, dtype=np.float64)
    s = 1.0 / (1.0 + np.exp(-z))
    out = s + z * s * (1.0 - s)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ElmParams:
    """Fixed random input layer: weights W (N x n), biases b (N,)."""

    input_weights: np.ndarray
    biases: np.ndarray
    seed: int
    weight_scale: float
    activation_tag: str = "swish"

    def __post_init__(self):
        W = np.asarray(self.input_weights, dtype=np.float64)
        b = np.asarray(self.biases, dtype=np.float64)
        if W.ndim != 2 or b.ndim != 1 or W.shape[0] != b.shape[0]:
            raise ValueError("input weights must be N x n with N biases")
        W.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "input_weights", W)
        object.__setattr__(self, "biases", b)

    @property
    def hidden_count(self) -> int:
        return self.input_weights.shape[0]

    @property
    def state_dim(self) -> int:
        return self.input_weights.shape[1]


def init_elm(n: int, N: int, seed: int, weight_scale: float = 1.0) -> ElmParams:
    """Draw W and b i.i.d. uniform on [-weight_scale, weight_scale], seeded."""
    if n < 1 or N < 1:
        raise ValueError("state dim and hidden count must be >= 1")
    if weight_scale <= 0:
        raise ValueError("weight_scale must be positive")
    w_flat = seeded_uniform(RngStream(seed, "weights"), N * n, -weight_scale, weight_scale)
    b = seeded_uniform(RngStream(seed, "biases"), N, -weight_scale, weight_scale)
    return ElmParams(w_flat.reshape(N, n), b, seed=seed, weight_scale=weight_scale)


def hidden_features(elm: ElmParams, x: np.ndarray) -> np.ndarray:
    """Hidden activations h_j = swish(w_j . x + b_j) for one state."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (elm.state_dim,):
        raise ValueError(f"state must have shape ({elm.state_dim},)")
    return activation(elm.input_weights @ x + elm.biases)


def hidden_feature_jacobian(elm: ElmParams, x: np.ndarray) -> np.ndarray:
    """n x N matrix D(x) with column j = swish'(w_j . x + b_j) * w_j,
    so the value gradient is D(x) @ beta."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (elm.state_dim,):
        raise ValueError(f"state must have shape ({elm.state_dim},)")
    sp = activation_derivative(elm.input_weights @ x + elm.biases)
    return (elm.input_weights * sp[:, None]).T


def build_H(elm: ElmParams, X: np.ndarray) -> np.ndarray:
    """Feature matrix over a batch: H[i, j] = swish(w_j . x_i + b_j)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != elm.state_dim:
        raise ValueError(f"samples must have {elm.state_dim} columns")
    return activation(X @ elm.input_weights.T + elm.biases)


@dataclass
class ValueNetwork:
    """ELM features plus trainable output weights beta; the cached origin
    feature vector makes the constrained expression a cheap shift."""

    elm: ElmParams
    beta: np.ndarray
    anchor: np.ndarray = field(init=False)

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=np.float64)
        if beta.shape != (self.elm.hidden_count,):
            raise ValueError("beta must have one entry per hidden node")
        self.beta = beta
        self.anchor = hidden_features(self.elm, np.zeros(self.elm.state_dim))

    def with_beta(self, beta: np.ndarray) -> "ValueNetwork":
        return ValueNetwork(self.elm, np.asarray(beta, dtype=np.float64))


def eval_value(net: ValueNetwork, x: np.ndarray) -> float:
    """V(x) = beta . (h(x) - h(0)); zero at the origin for every beta."""
    return float(net.beta @ (hidden_features(net.elm, x) - net.anchor))


def eval_value_batch(net: ValueNetwork, X: np.ndarray) -> np.ndarray:
    H = build_H(net.elm, X)
    return (H - net.anchor) @ net.beta


def eval_value_gradient(net: ValueNetwork, x: np.ndarray) -> np.ndarray:
    """grad V(x) = D(x) @ beta (the anchor shift is constant)."""
    return hidden_feature_jacobian(net.elm, x) @ net.beta


def eval_value_gradient_batch(net: ValueNetwork, X: np.ndarray) -> np.ndarray:
    """Row i is grad V at X[i]; equals (swish'(Z) * beta) @ W."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Z = X @ net.elm.input_weights.T + net.elm.biases
    return (activation_derivative(Z) * net.beta) @ net.elm.input_weights
