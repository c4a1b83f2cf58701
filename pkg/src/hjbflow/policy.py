"""Closed-form feedback synthesis from the value gradient.

For quadratic control cost g(u) = u' R u the minimizing control is a function
of w = -B(x)' grad V only. Three variants are shipped:

- unconstrained: u = (1/2) R^-1 w
- constrained_paper: the piecewise map u_i = clamp(w_i, -alpha_i, alpha_i) + gamma_i
  (coincides with the projected quadratic minimizer exactly when R = I/2)
- constrained_clipped: componentwise projection of the unconstrained minimizer
  onto the control box (requires diagonal R)

All maps broadcast over a leading batch axis: w may be (m,) or (M, m).
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from .problems import ControlBounds, OcpInstance

POLICY_MODES = ("unconstrained", "constrained_paper", "constrained_clipped")


def _check_mode(mode: str, bounds: Optional[ControlBounds]) -> None:
    if mode not in POLICY_MODES:
        raise ValueError(f"unknown policy mode {mode!r}; known: {POLICY_MODES}")
    if mode != "unconstrained" and bounds is None:
        raise ValueError(f"policy mode {mode!r} requires control bounds")


def control_preimage(vx: np.ndarray, B: np.ndarray) -> np.ndarray:
    """w = -B' vx; with batches, vx is (M, n) and B is (M, n, m)."""
    vx = np.asarray(vx, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if vx.ndim == 1:
        if B.shape[0] != vx.shape[0]:
            raise ValueError("input map rows must match gradient length")
        return -(B.T @ vx)
    return -np.einsum("inm,in->im", B, vx)


def policy_unconstrained(w: np.ndarray, R: np.ndarray) -> np.ndarray:
    """u = (1/2) R^-1 w, the stationary point of -w'u + u'Ru."""
    w = np.asarray(w, dtype=np.float64)
    R = np.atleast_2d(np.asarray(R, dtype=np.float64))
    return 0.5 * np.linalg.solve(R, w[..., :, None])[..., 0] if w.ndim > 1 \
        else 0.5 * np.linalg.solve(R, w)


def policy_constrained_paper(w: np.ndarray, bounds: ControlBounds) -> np.ndarray:
    """Componentwise: w_i + gamma_i inside |w_i| < alpha_i, saturated at
    sgn(w_i) alpha_i + gamma_i otherwise."""
    w = np.asarray(w, dtype=np.float64)
    return np.clip(w, -bounds.alpha, bounds.alpha) + bounds.gamma


def policy_constrained_clipped(w: np.ndarray, R: np.ndarray,
                               bounds: ControlBounds) -> np.ndarray:
    """clamp((1/2) R^-1 w, u_min, u_max) componentwise; needs separable g,
    i.e. diagonal R."""
    R = np.atleast_2d(np.asarray(R, dtype=np.float64))
    if not np.allclose(R, np.diag(np.diag(R))):
        raise ValueError("componentwise projection requires diagonal control weight")
    w = np.asarray(w, dtype=np.float64)
    u_free = 0.5 * w / np.diag(R)
    return np.clip(u_free, bounds.u_min, bounds.u_max)


def optimal_control(w: np.ndarray, R: np.ndarray,
                    bounds: Optional[ControlBounds], mode: str) -> np.ndarray:
    _check_mode(mode, bounds)
    if mode == "unconstrained":
        return policy_unconstrained(w, R)
    if mode == "constrained_paper":
        return policy_constrained_paper(w, bounds)
    return policy_constrained_clipped(w, R, bounds)


def _g_quad(u: np.ndarray, R: np.ndarray) -> np.ndarray:
    return np.einsum("...i,ij,...j->...", u, np.atleast_2d(R), u)


def conjugate_value(w: np.ndarray, R: np.ndarray,
                    bounds: Optional[ControlBounds], mode: str):
    """Value of sup_u { u'w - u'Ru } over the selected control set.

    Unconstrained this is (1/4) w' R^-1 w; for the constrained modes it is
    evaluated through the envelope identity w'u*(w) - g(u*(w)) with u* from
    the matching policy, so residual and policy always agree.
    """
    _check_mode(mode, bounds)
    w = np.asarray(w, dtype=np.float64)
    if mode == "unconstrained":
        R = np.atleast_2d(np.asarray(R, dtype=np.float64))
        Rinv_w = np.linalg.solve(R, w[..., :, None])[..., 0] if w.ndim > 1 \
            else np.linalg.solve(R, w)
        out = 0.25 * np.einsum("...i,...i->...", w, Rinv_w)
    else:
        u = optimal_control(w, R, bounds, mode)
        out = np.einsum("...i,...i->...", w, u) - _g_quad(u, R)
    return float(out) if np.ndim(out) == 0 else out


def conjugate_gradient(w: np.ndarray, R: np.ndarray,
                       bounds: Optional[ControlBounds], mode: str) -> np.ndarray:
    """Exact gradient in w of conjugate_value for the selected mode.

    For unconstrained and clipped modes this is u*(w) (envelope property).
    The paper-form constrained map is not the true conjugate maximizer for
    general R, so its interior branch carries the extra chain-rule term
    u* + (w - 2 R u*); at R = I/2 the extra term vanishes and all modes agree.
    """
    _check_mode(mode, bounds)
    w = np.asarray(w, dtype=np.float64)
    u = optimal_control(w, R, bounds, mode)
    if mode != "constrained_paper":
        return u
    R = np.atleast_2d(np.asarray(R, dtype=np.float64))
    Ru = u @ R.T if w.ndim > 1 else R @ u
    interior = np.abs(w) < bounds.alpha
    return np.where(interior, u + w - 2.0 * Ru, u)


def synthesize_policy(net, problem: OcpInstance,
                      mode: str = "unconstrained") -> Callable[[np.ndarray], np.ndarray]:
    """Compose value gradient -> preimage -> control map into a feedback law."""
    from .network import eval_value_gradient

    _check_mode(mode, problem.bounds)

    def policy(x: np.ndarray) -> np.ndarray:
        vx = eval_value_gradient(net, np.asarray(x, dtype=np.float64))
        w = control_preimage(vx, problem.input_map(x))
        return optimal_control(w, problem.control_weight, problem.bounds, mode)

    return policy


def exact_feedback_policy(problem_name: str) -> Callable[[np.ndarray], np.ndarray]:
    """Analytic optimal feedback for the benchmarks that have one."""
    from .problems import exact_policy

    return lambda x: exact_policy(problem_name, x)
