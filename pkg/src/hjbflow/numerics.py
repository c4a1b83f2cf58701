"""Shared numerical kernels: SVD ridge solves, seeded RNG streams,
finite-difference oracles, and gradient clipping."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

# Stable per-purpose offsets so draws for one purpose never shift another.
_STREAM_TAGS = {
    "weights": 0x57454947,
    "biases": 0x42494153,
    "sampling": 0x53414D50,
    "init_beta": 0x494E4954,
}

SVD_CUTOFF_REL = 1e-12


@dataclass(frozen=True)
class RngStream:
    """A named, independently seeded random stream."""

    seed: int
    purpose: str

    def __post_init__(self):
        if self.purpose not in _STREAM_TAGS:
            raise ValueError(f"unknown rng purpose {self.purpose!r}")

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence([self.seed & 0xFFFFFFFFFFFFFFFF, _STREAM_TAGS[self.purpose]])
        )


def seeded_uniform(stream: RngStream, count: int, lo: float, hi: float) -> np.ndarray:
    """Deterministic uniform draws on [lo, hi) for a (seed, purpose) stream."""
    if not lo < hi:
        raise ValueError("seeded_uniform requires lo < hi")
    return stream.generator().uniform(lo, hi, size=count)


def ridge_pinv_solve(H: np.ndarray, T: np.ndarray, ridge: float) -> np.ndarray:
    """Solve min ||H b - T||^2 + ridge ||b||^2 via SVD.

    At ridge=0 this is the minimum-norm least-squares solution, with
    singular values below SVD_CUTOFF_REL * s_max treated as zero.
    """
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    H = np.asarray(H, dtype=np.float64)
    T = np.asarray(T, dtype=np.float64)
    U, s, Vt = np.linalg.svd(H, full_matrices=False)
    if ridge == 0.0:
        cutoff = SVD_CUTOFF_REL * (s[0] if s.size else 0.0)
        inv = np.where(s > cutoff, s / np.maximum(s**2, 1e-300), 0.0)
    else:
        inv = s / (s**2 + ridge)
    return Vt.T @ (inv * (U.T @ T))


def finite_difference_gradient(f: Callable[[np.ndarray], float], x: np.ndarray,
                               h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar function, step h per axis."""
    if h <= 0:
        raise ValueError("step must be positive")
    x = np.asarray(x, dtype=np.float64)
    g = np.empty_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2.0 * h)
    return g


def clip_global_norm(g: np.ndarray, max_norm: float) -> np.ndarray:
    """Rescale g so its Euclidean norm does not exceed max_norm."""
    if max_norm <= 0:
        raise ValueError("max_norm must be positive")
    norm = float(np.linalg.norm(g))
    if norm <= max_norm or norm == 0.0:
        return g
    return g * (max_norm / norm)
