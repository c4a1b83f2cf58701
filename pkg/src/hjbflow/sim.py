"""Closed-loop evaluation: fixed-step RK4 under a feedback policy, running
cost accumulation, policy comparison, and Monte Carlo convergence studies."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .problems import OcpInstance


@dataclass
class Trajectory:
    times: np.ndarray             # (K,)
    states: np.ndarray            # (K, n)
    controls: np.ndarray          # (K, m)
    cumulative_costs: np.ndarray  # (K,), trapezoid accumulation of r(x)+u'Ru
    running_cost: float
    converged: bool
    convergence_time: Optional[float]
    diverged: bool = False


@dataclass
class MonteCarloReport:
    initial_conditions: np.ndarray
    converged: list[bool]
    convergence_times: list[Optional[float]]
    fraction_converged: float

    def to_dict(self) -> dict:
        return {
            "initial_conditions": self.initial_conditions.tolist(),
            "converged": self.converged,
            "convergence_times": [
                t if t is None else float(t) for t in self.convergence_times
            ],
            "fraction_converged": self.fraction_converged,
        }


def rk4_step(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray,
             dt: float) -> np.ndarray:
    """One classical Runge-Kutta step of xdot = f(x)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def closed_loop_field(problem: OcpInstance,
                      policy: Callable[[np.ndarray], np.ndarray]) -> Callable:
    """xdot = A(x) + B(x) u(x); the policy is re-evaluated at every RK stage."""

    def f(x: np.ndarray) -> np.ndarray:
        u = np.atleast_1d(policy(x))
        return problem.drift(x) + problem.input_map(x) @ u

    return f


def _running_cost(problem: OcpInstance, x: np.ndarray, u: np.ndarray) -> float:
    return float(problem.state_cost(x) + u @ problem.control_weight @ u)


def rollout(problem: OcpInstance, policy: Callable[[np.ndarray], np.ndarray],
            x0: np.ndarray, dt: float = 0.01, t_max: float = 20.0,
            stop_tol: float = 1e-3,
            escape_radius: Optional[float] = None) -> Trajectory:
    """Integrate the closed loop until t_max, convergence (||x|| < stop_tol),
    or escape; running cost accumulates by the trapezoid rule."""
    if dt <= 0 or t_max <= 0:
        raise ValueError("dt and t_max must be positive")
    if escape_radius is None:
        escape_radius = 10.0 * problem.domain.diagonal()
    f = closed_loop_field(problem, policy)
    x = np.asarray(x0, dtype=np.float64).copy()
    if x.shape != (problem.state_dim,):
        raise ValueError(f"initial state must have shape ({problem.state_dim},)")

    times = [0.0]
    states = [x.copy()]
    controls = [np.atleast_1d(policy(x)).copy()]
    costs = [0.0]
    cost = 0.0
    converged = bool(np.linalg.norm(x) < stop_tol)
    conv_time = 0.0 if converged else None
    diverged = False
    steps = int(round(t_max / dt))
    prev_l = _running_cost(problem, x, controls[-1])
    for k in range(1, steps + 1):
        if converged or diverged:
            break
        x = rk4_step(f, x, dt)
        if not np.all(np.isfinite(x)):
            raise FloatingPointError(f"non-finite state at step {k}")
        u = np.atleast_1d(policy(x))
        l_now = _running_cost(problem, x, u)
        cost += 0.5 * dt * (prev_l + l_now)
        prev_l = l_now
        times.append(k * dt)
        states.append(x.copy())
        controls.append(u.copy())
        costs.append(cost)
        if np.linalg.norm(x) < stop_tol:
            converged = True
            conv_time = k * dt
        elif np.linalg.norm(x) > escape_radius:
            diverged = True
    return Trajectory(
        times=np.asarray(times),
        states=np.vstack(states),
        controls=np.vstack(controls),
        cumulative_costs=np.asarray(costs),
        running_cost=cost,
        converged=converged,
        convergence_time=conv_time,
        diverged=diverged,
    )


def compare_rollouts(problem: OcpInstance, policy_a, policy_b, x0: np.ndarray,
                     dt: float = 0.01, t_max: float = 20.0) -> tuple[float, float]:
    """Max pointwise state deviation and running-cost difference between the
    two closed loops (stopping disabled so time grids align)."""
    traj_a = rollout(problem, policy_a, x0, dt=dt, t_max=t_max, stop_tol=0.0)
    traj_b = rollout(problem, policy_b, x0, dt=dt, t_max=t_max, stop_tol=0.0)
    k = min(len(traj_a.times), len(traj_b.times))
    dev = float(np.max(np.linalg.norm(traj_a.states[:k] - traj_b.states[:k],
                                      axis=1)))
    return dev, traj_a.running_cost - traj_b.running_cost


def monte_carlo(problem: OcpInstance, policy,
                initial_conditions: Sequence[np.ndarray],
                dt: float = 0.01, t_max: float = 20.0,
                stop_tol: float = 1e-3) -> MonteCarloReport:
    """Independent rollouts from the given initial conditions; divergence is
    recorded, never raised."""
    ics = np.atleast_2d(np.asarray(initial_conditions, dtype=np.float64))
    flags: list[bool] = []
    times: list[Optional[float]] = []
    for x0 in ics:
        try:
            traj = rollout(problem, policy, x0, dt=dt, t_max=t_max,
                           stop_tol=stop_tol)
            flags.append(traj.converged)
            times.append(traj.convergence_time)
        except FloatingPointError:
            flags.append(False)
            times.append(None)
    return MonteCarloReport(
        initial_conditions=ics,
        converged=flags,
        convergence_times=times,
        fraction_converged=float(np.mean(flags)),
    )
