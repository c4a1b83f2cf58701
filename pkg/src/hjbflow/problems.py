"""Control-affine infinite-horizon benchmark problems.

Each problem is an OcpInstance with dynamics xdot = A(x) + B(x) u and
separable running cost r(x) + u' R u. Drift, input map, and state cost all
accept a single state (n,) or a batch (M, n) of row states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class ControlBounds:
    """Box control constraints [u_min, u_max] with half-width and midpoint."""

    u_min: np.ndarray
    u_max: np.ndarray

    def __post_init__(self):
        u_min = np.atleast_1d(np.asarray(self.u_min, dtype=np.float64))
        u_max = np.atleast_1d(np.asarray(self.u_max, dtype=np.float64))
        if u_min.shape != u_max.shape:
            raise ValueError("u_min and u_max must have the same shape")
        if not np.all(u_min < u_max):
            raise ValueError("u_min must be strictly below u_max componentwise")
        object.__setattr__(self, "u_min", u_min)
        object.__setattr__(self, "u_max", u_max)

    @property
    def alpha(self) -> np.ndarray:
        return 0.5 * (self.u_max - self.u_min)

    @property
    def gamma(self) -> np.ndarray:
        return 0.5 * (self.u_max + self.u_min)


@dataclass(frozen=True)
class Domain:
    """Axis-aligned training box; must contain the origin so the boundary
    condition V(0)=0 sits inside the sampled region."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=np.float64))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=np.float64))
        if lower.shape != upper.shape:
            raise ValueError("domain bounds must have equal shape")
        if not np.all(lower < upper):
            raise ValueError("domain lower bounds must be below upper bounds")
        if not (np.all(lower <= 0.0) and np.all(upper >= 0.0)):
            raise ValueError("domain must contain the origin")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return self.lower.size

    def contains(self, x: np.ndarray) -> bool:
        x = np.asarray(x)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def diagonal(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))


@dataclass(frozen=True)
class OcpInstance:
    """A control-affine OCP: dynamics, separable quadratic-in-u cost, domain."""

    name: str
    state_dim: int
    control_dim: int
    drift: Callable[[np.ndarray], np.ndarray]
    input_map: Callable[[np.ndarray], np.ndarray]
    state_cost: Callable[[np.ndarray], np.ndarray]
    control_weight: np.ndarray  # R, m x m SPD
    state_weight: np.ndarray    # Q, n x n PSD (initial-fit target and quadratic r)
    domain: Domain
    bounds: Optional[ControlBounds] = None
    constant_input_map: bool = field(default=False)

    def __post_init__(self):
        R = np.atleast_2d(np.asarray(self.control_weight, dtype=np.float64))
        Q = np.atleast_2d(np.asarray(self.state_weight, dtype=np.float64))
        if R.shape != (self.control_dim, self.control_dim):
            raise ValueError("control weight must be m x m")
        if not np.allclose(R, R.T):
            raise ValueError("control weight must be symmetric")
        if np.any(np.linalg.eigvalsh(R) <= 0):
            raise ValueError("control weight must be positive definite")
        if Q.shape != (self.state_dim, self.state_dim):
            raise ValueError("state weight must be n x n")
        if self.domain.dim != self.state_dim:
            raise ValueError("domain dimension must match state dimension")
        object.__setattr__(self, "control_weight", R)
        object.__setattr__(self, "state_weight", Q)


def _quadratic_cost(Q: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    def r(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            return float(x @ Q @ x)
        return np.einsum("ij,jk,ik->i", x, Q, x)

    return r


def make_double_integrator() -> OcpInstance:
    """Planar double integrator, cost (1/2) int (x'x + u^2) dt on [-1,1]^2."""

    def drift(x):
        x = np.asarray(x, dtype=np.float64)
        out = np.zeros_like(x)
        out[..., 0] = x[..., 1]
        return out

    B = np.array([[0.0], [1.0]])

    def input_map(x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            return B
        return np.broadcast_to(B, (x.shape[0], 2, 1))

    Q = 0.5 * np.eye(2)
    return OcpInstance(
        name="double_integrator",
        state_dim=2,
        control_dim=1,
        drift=drift,
        input_map=input_map,
        state_cost=_quadratic_cost(Q),
        control_weight=np.array([[0.5]]),
        state_weight=Q,
        domain=Domain(np.array([-1.0, -1.0]), np.array([1.0, 1.0])),
        constant_input_map=True,
    )


def make_nonlinear_benchmark() -> OcpInstance:
    """Two-state nonlinear system with state-dependent input map and a known
    quadratic optimal value function; cost int (x'x + u^2) dt on [-1,1]^2."""

    def drift(x):
        x = np.asarray(x, dtype=np.float64)
        x1, x2 = x[..., 0], x[..., 1]
        out = np.empty_like(x)
        out[..., 0] = -x1 + x2
        out[..., 1] = -0.5 * (x1 + x2 - x1**2 * x2)
        return out

    def input_map(x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            return np.array([[0.0], [x[0]]])
        out = np.zeros((x.shape[0], 2, 1))
        out[:, 1, 0] = x[:, 0]
        return out

    Q = np.eye(2)
    return OcpInstance(
        name="nonlinear_benchmark",
        state_dim=2,
        control_dim=1,
        drift=drift,
        input_map=input_map,
        state_cost=_quadratic_cost(Q),
        control_weight=np.array([[1.0]]),
        state_weight=Q,
        domain=Domain(np.array([-1.0, -1.0]), np.array([1.0, 1.0])),
    )


def make_pendulum(
    mass: float = 1.0,
    length: float = 0.5,
    inertia_com: float = 1.0 / 12.0,
    gravity: float = 9.81,
    q: Optional[np.ndarray] = None,
    r_weight: float = 1.0,
    torque_limit: float = 2.0,
    domain: Optional[Domain] = None,
) -> OcpInstance:
    """Torque-limited inverted pendulum about the upright equilibrium.

    x1 is the angle from upright, x2 the angular rate. The default torque
    limit (2 N m) is below the peak gravity torque m*g*d (~4.9 N m), so the
    controller must pump energy to swing up from hanging states; saturation
    is active over most of the training box.
    """
    for name, val in (("mass", mass), ("length", length),
                      ("inertia_com", inertia_com), ("gravity", gravity),
                      ("r_weight", r_weight), ("torque_limit", torque_limit)):
        if val <= 0:
            raise ValueError(f"{name} must be positive")

    denom = inertia_com + mass * length**2
    a2 = mass * length * gravity / denom
    b2 = 1.0 / denom

    def drift(x):
        x = np.asarray(x, dtype=np.float64)
        out = np.empty_like(x)
        out[..., 0] = x[..., 1]
        out[..., 1] = a2 * np.sin(x[..., 0])
        return out

    B = np.array([[0.0], [b2]])

    def input_map(x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            return B
        return np.broadcast_to(B, (x.shape[0], 2, 1))

    Q = np.eye(2) if q is None else np.atleast_2d(np.asarray(q, dtype=np.float64))
    if domain is None:
        domain = Domain(np.array([-math.pi, -4.0]), np.array([math.pi, 4.0]))
    return OcpInstance(
        name="pendulum",
        state_dim=2,
        control_dim=1,
        drift=drift,
        input_map=input_map,
        state_cost=_quadratic_cost(Q),
        control_weight=np.array([[r_weight]]),
        state_weight=Q,
        domain=domain,
        bounds=ControlBounds(np.array([-torque_limit]), np.array([torque_limit])),
        constant_input_map=True,
    )


def make_detumbling(
    inertia: Optional[np.ndarray] = None,
    q: Optional[np.ndarray] = None,
    r: Optional[np.ndarray] = None,
    domain: Optional[Domain] = None,
) -> OcpInstance:
    """Rigid-body rate damping: xdot = I^-1 (u - x cross I x) on a box of
    body rates around zero."""
    I = np.diag([1.0, 2.0, 3.0]) if inertia is None else np.atleast_2d(
        np.asarray(inertia, dtype=np.float64))
    if I.shape != (3, 3):
        raise ValueError("inertia must be 3 x 3")
    if np.linalg.matrix_rank(I) < 3 or np.any(np.diag(I) <= 0):
        raise ValueError("inertia must be nonsingular with positive diagonal")
    I_inv = np.linalg.inv(I)

    def drift(x):
        x = np.asarray(x, dtype=np.float64)
        h = x @ I.T          # I x, works for (3,) and (M, 3)
        gyro = np.cross(x, h)
        return -(gyro @ I_inv.T)

    def input_map(x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            return I_inv
        return np.broadcast_to(I_inv, (x.shape[0], 3, 3))

    Q = np.eye(3) if q is None else np.atleast_2d(np.asarray(q, dtype=np.float64))
    R = np.eye(3) if r is None else np.atleast_2d(np.asarray(r, dtype=np.float64))
    if domain is None:
        domain = Domain(-np.ones(3), np.ones(3))
    return OcpInstance(
        name="detumbling",
        state_dim=3,
        control_dim=3,
        drift=drift,
        input_map=input_map,
        state_cost=_quadratic_cost(Q),
        control_weight=R,
        state_weight=Q,
        domain=domain,
        constant_input_map=True,
    )


REGISTRY: dict[str, Callable[..., OcpInstance]] = {
    "double_integrator": make_double_integrator,
    "nonlinear_benchmark": make_nonlinear_benchmark,
    "pendulum": make_pendulum,
    "detumbling": make_detumbling,
}


def make_problem(name: str, **kwargs) -> OcpInstance:
    if name not in REGISTRY:
        raise KeyError(f"unknown problem {name!r}; known: {sorted(REGISTRY)}")
    return REGISTRY[name](**kwargs)


def exact_value(problem: str, x: np.ndarray) -> float:
    """Closed-form optimal value, available for the two analytic benchmarks."""
    x = np.asarray(x, dtype=np.float64)
    if problem == "double_integrator":
        return float(0.5 * SQRT3 * (x[0]**2 + x[1]**2) + x[0] * x[1])
    if problem == "nonlinear_benchmark":
        return float(0.5 * x[0]**2 + x[1]**2)
    raise ValueError(f"no analytic value function for {problem!r}")


def exact_value_gradient(problem: str, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if problem == "double_integrator":
        return np.array([SQRT3 * x[0] + x[1], SQRT3 * x[1] + x[0]])
    if problem == "nonlinear_benchmark":
        return np.array([x[0], 2.0 * x[1]])
    raise ValueError(f"no analytic value function for {problem!r}")


def exact_policy(problem: str, x: np.ndarray) -> np.ndarray:
    """Closed-form optimal control for the analytic benchmarks."""
    x = np.asarray(x, dtype=np.float64)
    if problem == "double_integrator":
        return np.array([-SQRT3 * x[1] - x[0]])
    if problem == "nonlinear_benchmark":
        # -1/2 R^-1 B' grad V with grad V = (x1, 2 x2), B = (0, x1)
        return np.array([-x[0] * x[1]])
    raise ValueError(f"no analytic policy for {problem!r}")
