"""Pointwise HJB residual, the training loss, and its analytic gradient in
the output weights.

The residual at a state x is

    r = grad V(x) . A(x) + r(x) - gstar(-B(x)' grad V(x))

where gstar is the conjugate of the control cost over the selected control
set. Training evaluates this over a fixed batch; everything that does not
depend on beta (features, drift, state cost, input map) is precomputed once
in ResidualWorkspace.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import ValueNetwork, activation, activation_derivative
from .policy import conjugate_gradient, conjugate_value, control_preimage
from .problems import OcpInstance


@dataclass
class ResidualBatch:
    """Residual evaluation over a point set, with loss decomposition."""

    points: np.ndarray
    residuals: np.ndarray
    loss: float
    grad_beta: np.ndarray
    reg_weight: float


def hjb_residual_from_gradient(vx: np.ndarray, problem: OcpInstance,
                               mode: str, x: np.ndarray) -> float:
    """Residual with an externally supplied value gradient (exact-solution
    substitutions use this path)."""
    x = np.asarray(x, dtype=np.float64)
    w = control_preimage(vx, problem.input_map(x))
    gstar = conjugate_value(w, problem.control_weight, problem.bounds, mode)
    return float(vx @ problem.drift(x) + problem.state_cost(x) - gstar)


def hjb_residual(net: ValueNetwork, problem: OcpInstance, mode: str,
                 x: np.ndarray) -> float:
    from .network import eval_value_gradient

    return hjb_residual_from_gradient(eval_value_gradient(net, x), problem, mode, x)


class ResidualWorkspace:
    """Precomputed feature and dynamics arrays over a fixed training batch."""

    def __init__(self, problem: OcpInstance, elm, mode: str, X: np.ndarray,
                 reg_weight: float, positivity_weight: float = 0.0):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[0] < 1:
            raise ValueError("training set must be non-empty")
        if reg_weight < 0:
            raise ValueError("regularization weight must be non-negative")
        if positivity_weight < 0:
            raise ValueError("positivity weight must be non-negative")
        self.problem = problem
        self.mode = mode
        self.X = X
        self.reg_weight = reg_weight
        self.positivity_weight = positivity_weight
        self.W = elm.input_weights
        Z = X @ self.W.T + elm.biases
        self.sprime = activation_derivative(Z)       # (M, N)
        if positivity_weight > 0.0:
            # Centered features h(x) - h(0), so Hc @ beta gives V on the batch.
            self.Hc = activation(Z) - activation(elm.biases)
        else:
            self.Hc = None
        self.A = problem.drift(X)                    # (M, n)
        self.rx = problem.state_cost(X)              # (M,)
        if problem.constant_input_map:
            self.B_const = problem.input_map(X[0])   # (n, m)
            self.B_batch = None
        else:
            self.B_const = None
            self.B_batch = problem.input_map(X)      # (M, n, m)
        self.M = X.shape[0]

    def _gradients(self, beta: np.ndarray) -> np.ndarray:
        return (self.sprime * beta) @ self.W         # (M, n)

    def residuals(self, beta: np.ndarray) -> np.ndarray:
        Vx = self._gradients(beta)
        if self.B_const is not None:
            w = -(Vx @ self.B_const)
        else:
            w = -np.einsum("inm,in->im", self.B_batch, Vx)
        gstar = conjugate_value(w, self.problem.control_weight,
                                self.problem.bounds, self.mode)
        return np.einsum("in,in->i", Vx, self.A) + self.rx - gstar

    def loss(self, beta: np.ndarray) -> float:
        r = self.residuals(beta)
        total = float(np.mean(r**2) + self.reg_weight * (beta @ beta))
        if self.Hc is not None:
            neg = np.minimum(self.Hc @ beta, 0.0)
            total += self.positivity_weight * float(np.mean(neg**2))
        return total

    def loss_and_grad(self, beta: np.ndarray) -> tuple[float, np.ndarray]:
        Vx = self._gradients(beta)
        if self.B_const is not None:
            w = -(Vx @ self.B_const)
        else:
            w = -np.einsum("inm,in->im", self.B_batch, Vx)
        R, bounds = self.problem.control_weight, self.problem.bounds
        gstar = conjugate_value(w, R, bounds, self.mode)
        r = np.einsum("in,in->i", Vx, self.A) + self.rx - gstar
        # d r / d beta = D(x)' (A + B dgstar/dw); dgstar/dw = u* except for the
        # paper-form constrained map, handled inside conjugate_gradient.
        gw = conjugate_gradient(w, R, bounds, self.mode)
        if self.B_const is not None:
            F = self.A + gw @ self.B_const.T
        else:
            F = self.A + np.einsum("inm,im->in", self.B_batch, gw)
        G = self.sprime * (F @ self.W.T)             # (M, N), rows D(x_i)' F_i
        grad = (2.0 / self.M) * (r @ G) + 2.0 * self.reg_weight * beta
        loss = float(np.mean(r**2) + self.reg_weight * (beta @ beta))
        if self.Hc is not None:
            # Hinge on negative values: the running cost is non-negative, so the
            # true value function is too; this term vanishes at the solution but
            # steers optimization away from the sign-flipped residual branch.
            neg = np.minimum(self.Hc @ beta, 0.0)
            loss += self.positivity_weight * float(np.mean(neg**2))
            grad += self.positivity_weight * (2.0 / self.M) * (neg @ self.Hc)
        return loss, grad

    def batch(self, beta: np.ndarray) -> ResidualBatch:
        loss, grad = self.loss_and_grad(beta)
        return ResidualBatch(self.X, self.residuals(beta), loss, grad,
                             self.reg_weight)


def loss(net: ValueNetwork, problem: OcpInstance, mode: str, X: np.ndarray,
         reg_weight: float) -> float:
    """Mean squared residual over X plus reg_weight * ||beta||^2."""
    ws = ResidualWorkspace(problem, net.elm, mode, X, reg_weight)
    return ws.loss(net.beta)


def loss_gradient_beta(net: ValueNetwork, problem: OcpInstance, mode: str,
                       X: np.ndarray, reg_weight: float) -> np.ndarray:
    ws = ResidualWorkspace(problem, net.elm, mode, X, reg_weight)
    return ws.loss_and_grad(net.beta)[1]
