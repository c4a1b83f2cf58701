"""Acceptance suite: one test per headline claim, each printing a single
PASS/FAIL line with the measured quantity and its pinned tolerance.

These tests train real models and are intentionally slow (the detumbling
run uses its full published budget). Run with `pytest tests/test_acceptance.py -v -s`.
"""

import math
import time

import numpy as np
import pytest

import hjbflow as hf
from hjbflow.numerics import RngStream, clip_global_norm, finite_difference_gradient, ridge_pinv_solve
from hjbflow.policy import POLICY_MODES, exact_feedback_policy
from hjbflow.problems import ControlBounds
from hjbflow.residual import ResidualWorkspace


def _report(name: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")


def _grid_error(net, problem_name: str) -> float:
    axes = [np.linspace(-1.0, 1.0, 101)] * 2
    mesh = np.meshgrid(*axes, indexing="ij")
    X = np.stack([m.ravel() for m in mesh], axis=1)
    V = hf.eval_value_batch(net, X)
    V_exact = np.array([hf.exact_value(problem_name, x) for x in X])
    return float(np.max(np.abs(V - V_exact)))


@pytest.fixture(scope="module")
def di_net():
    problem = hf.make_double_integrator()
    net, report = hf.train(problem, hf.TrainConfig())
    return problem, net, report


class TestCriterion1DoubleIntegratorValue:
    TOL = 1e-3

    def test_grid_max_abs_error(self, di_net):
        problem, net, report = di_net
        err = _grid_error(net, "double_integrator")
        ok = err < self.TOL
        _report("criterion 1 double-integrator value accuracy", ok,
                f"max|V-V*| = {err:.3e} on 101x101 grid (tol {self.TOL:.0e})")
        assert ok


class TestCriterion2NonlinearBenchmarkValue:
    TOL = 5e-4          # acceptance threshold
    STRETCH = 1e-4      # recorded stretch target

    def test_grid_max_abs_error(self):
        problem = hf.make_nonlinear_benchmark()
        net, report = hf.train(problem, hf.TrainConfig())
        err = _grid_error(net, "nonlinear_benchmark")
        ok = err < self.TOL
        stretch = "stretch 1e-4 met" if err < self.STRETCH else "stretch 1e-4 missed"
        _report("criterion 2 nonlinear-benchmark value accuracy", ok,
                f"max|V-V*| = {err:.3e} (tol {self.TOL:.0e}; {stretch})")
        assert ok


class TestCriterion3ClosedLoopFidelity:
    DEV_TOL = 1e-2
    COST_TOL = 5e-3

    def test_trained_vs_exact_trajectory(self, di_net):
        problem, net, _ = di_net
        x0 = np.array([0.8, -0.5])
        learned = hf.synthesize_policy(net, problem, "unconstrained")
        exact = exact_feedback_policy("double_integrator")
        dev, _ = hf.compare_rollouts(problem, learned, exact, x0,
                                     dt=1e-3, t_max=10.0)
        ok = dev < self.DEV_TOL
        _report("criterion 3 closed-loop state fidelity", ok,
                f"max state deviation = {dev:.3e} (tol {self.DEV_TOL:.0e})")
        assert ok

    def test_exact_rollout_cost_matches_value(self, di_net):
        problem, _, _ = di_net
        x0 = np.array([0.8, -0.5])
        traj = hf.rollout(problem, exact_feedback_policy("double_integrator"),
                          x0, dt=1e-3, t_max=10.0, stop_tol=0.0)
        gap = abs(traj.running_cost - hf.exact_value("double_integrator", x0))
        ok = gap < self.COST_TOL
        _report("criterion 3 rollout cost vs optimal value", ok,
                f"|J - V*(x0)| = {gap:.3e} (tol {self.COST_TOL:.0e})")
        assert ok


class TestCriterion4ExactResidualOracle:
    TOL = 1e-12

    @pytest.mark.parametrize("name", ["double_integrator", "nonlinear_benchmark"])
    def test_exact_solution_zeroes_residual(self, name):
        problem = hf.make_problem(name)
        rng = np.random.default_rng(0)
        X = rng.uniform(problem.domain.lower, problem.domain.upper, (1000, 2))
        worst = max(
            abs(hf.hjb_residual_from_gradient(
                hf.exact_value_gradient(name, x), problem, "unconstrained", x))
            for x in X)
        ok = worst < self.TOL
        _report(f"criterion 4 residual oracle ({name})", ok,
                f"max|r(V*)| = {worst:.3e} over 1000 points (tol {self.TOL:.0e})")
        assert ok


@pytest.fixture(scope="module")
def pendulum_net():
    """Torque-limited swing-up, trained with the best configuration found.

    The sampling box is enlarged 2x so the residual is enforced along the
    high-velocity swing-up arcs (|x2| up to ~8), the input weights are
    rescaled to keep the activations in range on that box, and the
    positivity hinge steers the optimizer away from the sign-flipped
    solution branch. Adam is skipped: on this problem it drags the
    analytic warm start toward a spurious branch before L-BFGS runs.
    """
    problem = hf.make_pendulum()
    config = hf.TrainConfig(hidden=400, num_points=10000, seed=0,
                            weight_scale=0.4, positivity_weight=10.0,
                            sampling_domain_scale=2.0, adam_epochs=0,
                            lbfgs_iters=3000,
                            policy_mode="constrained_clipped")
    net, _ = hf.train(problem, config)
    big_problem = hf.make_pendulum(
        domain=hf.Domain(2.0 * problem.domain.lower,
                         2.0 * problem.domain.upper))
    return problem, big_problem, net, config


class TestCriterion5PendulumGlobalConvergence:
    """50 random starts in the default box must reach ||x|| < 1e-2 in 20 s
    under the constrained policy learned for the default physics."""

    def test_monte_carlo_full_convergence(self, pendulum_net):
        problem, big_problem, net, config = pendulum_net
        policy = hf.synthesize_policy(net, big_problem, config.policy_mode)
        ics = RngStream(7, "sampling").generator().uniform(
            problem.domain.lower, problem.domain.upper, (50, 2))
        mc = hf.monte_carlo(big_problem, policy, ics, dt=0.01, t_max=20.0,
                            stop_tol=1e-2)
        ok = mc.fraction_converged == 1.0
        _report("criterion 5 pendulum global convergence", ok,
                f"fraction converged = {mc.fraction_converged:.2f} "
                f"over 50 ICs (required 1.00)")
        assert ok


class TestCriterion6DetumblingTraining:
    LOSS_TOL = 1e-4
    BUDGET_S = 30 * 60

    def test_full_budget_run(self):
        problem = hf.make_detumbling()
        config = hf.TrainConfig(hidden=400, num_points=25000, seed=0,
                                adam_epochs=5000, adam_lr=1e-3,
                                lbfgs_iters=1000, positivity_weight=1.0)
        t0 = time.time()
        net, report = hf.train(problem, config)
        wall = time.time() - t0
        loss_ok = report.final_loss <= self.LOSS_TOL

        policy = hf.synthesize_policy(net, problem, "unconstrained")
        ics = RngStream(7, "sampling").generator().uniform(-1.0, 1.0, (20, 3))
        mc = hf.monte_carlo(problem, policy, ics, dt=0.01, t_max=20.0,
                            stop_tol=1e-2)
        mc_ok = mc.fraction_converged == 1.0
        time_ok = wall < self.BUDGET_S
        _report("criterion 6 detumbling training", loss_ok and mc_ok and time_ok,
                f"final loss = {report.final_loss:.3e} (tol {self.LOSS_TOL:.0e}), "
                f"MC converged = {mc.fraction_converged:.2f}/1.00, "
                f"wall = {wall:.0f}s (target {self.BUDGET_S}s)")
        assert loss_ok and mc_ok and time_ok


class TestCriterion7GradientSuites:
    REL_TOL = 1e-6

    def test_value_gradient_100_configs(self):
        worst = 0.0
        count = 0
        for name in ("double_integrator", "nonlinear_benchmark", "pendulum",
                     "detumbling"):
            problem = hf.make_problem(name)
            rng = np.random.default_rng(1)
            for k in range(25):
                elm = hf.init_elm(problem.state_dim, 12, seed=k, weight_scale=1.0)
                net = hf.ValueNetwork(elm, rng.standard_normal(12))
                x = rng.uniform(problem.domain.lower, problem.domain.upper)
                g = hf.eval_value_gradient(net, x)
                fd = finite_difference_gradient(lambda y: hf.eval_value(net, y), x)
                worst = max(worst, np.linalg.norm(g - fd) /
                            max(np.linalg.norm(fd), 1e-12))
                count += 1
        ok = worst < self.REL_TOL and count == 100
        _report("criterion 7 value gradient vs finite differences", ok,
                f"worst rel err = {worst:.3e} over {count} configs "
                f"(tol {self.REL_TOL:.0e})")
        assert ok

    def test_loss_gradient_20_configs(self):
        worst = 0.0
        count = 0
        rng = np.random.default_rng(2)
        for name in ("double_integrator", "nonlinear_benchmark", "pendulum",
                     "detumbling"):
            problem = hf.make_problem(name)
            modes = POLICY_MODES if problem.bounds is not None else ("unconstrained",)
            for mode in modes:
                for k in range(3 if len(modes) > 1 else 5):
                    elm = hf.init_elm(problem.state_dim, 10, seed=10 + k,
                                      weight_scale=1.0)
                    X = rng.uniform(problem.domain.lower, problem.domain.upper,
                                    (25, problem.state_dim))
                    ws = ResidualWorkspace(problem, elm, mode, X, 1e-8)
                    beta = rng.standard_normal(10)
                    _, g = ws.loss_and_grad(beta)
                    fd = finite_difference_gradient(ws.loss, beta, h=1e-6)
                    worst = max(worst, np.linalg.norm(g - fd) /
                                max(np.linalg.norm(fd), 1e-12))
                    count += 1
        ok = worst < self.REL_TOL and count >= 20
        _report("criterion 7 loss gradient vs finite differences", ok,
                f"worst rel err = {worst:.3e} over {count} configs "
                f"(tol {self.REL_TOL:.0e})")
        assert ok


class TestCriterion8NumericsProperties:
    def test_ridge_normal_equations(self):
        rng = np.random.default_rng(3)
        worst = 0.0
        for _ in range(20):
            H = rng.standard_normal((150, 40))
            T = rng.standard_normal(150)
            ridge = 10.0 ** rng.uniform(-10, 0)
            b = ridge_pinv_solve(H, T, ridge)
            lhs = H.T @ (H @ b) + ridge * b
            rhs = H.T @ T
            worst = max(worst, np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs))
        ok = worst < 1e-10
        _report("criterion 8 ridge solve normal equations", ok,
                f"worst rel residual = {worst:.3e} (tol 1e-10)")
        assert ok

    def test_rk4_order(self):
        dts = [0.1, 0.05, 0.025, 0.0125]
        errs = []
        for dt in dts:
            x = np.array([1.0])
            for _ in range(round(1.0 / dt)):
                x = hf.rk4_step(lambda y: -y, x, dt)
            errs.append(abs(x[0] - math.exp(-1.0)))
        slope = float(np.polyfit(np.log(dts), np.log(errs), 1)[0])
        ok = abs(slope - 4.0) < 0.2
        _report("criterion 8 RK4 self-convergence order", ok,
                f"log-log slope = {slope:.3f} (required 4.0 +/- 0.2)")
        assert ok

    def test_fenchel_young_10000_pairs(self):
        rng = np.random.default_rng(4)
        bounds = ControlBounds(np.array([-2.0]), np.array([2.0]))
        violations = 0
        for _ in range(100):
            R = np.array([[rng.uniform(0.2, 3.0)]])
            w = rng.uniform(-8.0, 8.0, 1)
            star = hf.conjugate_value(w, R, bounds, "constrained_clipped")
            us = rng.uniform(-2.0, 2.0, 100)
            vals = us * w[0] - R[0, 0] * us**2
            violations += int(np.sum(vals > star + 1e-9))
        ok = violations == 0
        _report("criterion 8 Fenchel-Young inequality", ok,
                f"{violations} violations over 10000 (w,u) pairs (tol 1e-9)")
        assert ok

    def test_clip_global_norm_bound(self):
        rng = np.random.default_rng(5)
        worst = 0.0
        for _ in range(1000):
            g = rng.standard_normal(rng.integers(1, 50)) * 10 ** rng.uniform(-3, 3)
            bound = 10.0 ** rng.uniform(-3, 1)
            worst = max(worst, np.linalg.norm(clip_global_norm(g, bound)) / bound)
        ok = worst <= 1.0 + 1e-12
        _report("criterion 8 gradient clipping bound", ok,
                f"worst ||clipped||/bound = {worst:.12f} (must be <= 1)")
        assert ok


class TestCriterion9Reproducibility:
    CONFIG = """
[problem]
name = "nonlinear_benchmark"

[network]
hidden = 60
seed = 0

[train]
num_points = 800
adam_epochs = 50
lbfgs_iters = 300
"""

    def test_bitwise_identical_runs(self, tmp_path):
        from hjbflow.cli import main
        cfg = tmp_path / "cfg.toml"
        cfg.write_text(self.CONFIG)
        outputs = []
        for sub, threads in (("a", "1"), ("b", "8")):
            out = tmp_path / sub
            assert main(["train", "--config", str(cfg), "--out", str(out),
                         "--threads", threads]) == 0
            assert main(["evaluate", "--checkpoint", str(out / "checkpoint.bin"),
                         "--out", str(out), "--grid=-1:1:21;-1:1:21"]) == 0
            assert main(["simulate", "--checkpoint", str(out / "checkpoint.bin"),
                         "--out", str(out), "--x0", "0.5,0.5",
                         "--t-max", "2"]) == 0
            outputs.append(out)
        a, b = outputs
        same = all((a / f).read_bytes() == (b / f).read_bytes()
                   for f in ("checkpoint.bin", "loss_history.csv",
                             "value_grid.csv", "trajectory.csv"))
        _report("criterion 9 bitwise reproducibility", same,
                "checkpoint, loss history, value grid, trajectory identical "
                "across reruns and --threads" if same else
                "outputs differ between identical runs")
        assert same
