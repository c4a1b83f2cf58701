"""Command-line front end: train, evaluate, simulate, montecarlo, sweep.

Exit codes: 0 success, 2 usage/config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io as hio
from .network import eval_value_batch
from .numerics import RngStream
from .policy import POLICY_MODES, synthesize_policy
from .problems import exact_value
from .sim import monte_carlo, rollout
from .train import train

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _load_config(path: str, overrides: argparse.Namespace) -> hio.RunConfig:
    cfg = hio.load_run_config(path)
    if getattr(overrides, "seed", None) is not None:
        cfg.train.seed = overrides.seed
    if getattr(overrides, "policy_mode", None) is not None:
        cfg.train.policy_mode = overrides.policy_mode
    return cfg


def _train_one(cfg: hio.RunConfig, out: Path, tag: str = "") -> float:
    problem = hio.build_problem(cfg.problem_name, cfg.problem_params)
    net, report = train(problem, cfg.train)
    suffix = f"_{tag}" if tag else ""
    hio.save_checkpoint(out / f"checkpoint{suffix}.bin", net, cfg.problem_name,
                        cfg.problem_params, cfg.train.policy_mode,
                        train_config=report.config,
                        final_loss=report.final_loss)
    hio.write_json(out / f"train_report{suffix}.json", report.to_dict())
    hio.write_csv(
        out / f"loss_history{suffix}.csv",
        ["epoch", "loss", "stage", "lr"],
        [[i, float(l), report.stage_labels[i], float(report.lr_history[i])]
         for i, l in enumerate(report.loss_history)],
    )
    (out / f"config{suffix}.toml").write_text(hio.dump_run_config(cfg))
    return report.final_loss


def cmd_train(args: argparse.Namespace) -> int:
    try:
        cfg = _load_config(args.config, args)
    except (hio.ConfigError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        final_loss = _train_one(cfg, out)
    except FloatingPointError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"final loss {final_loss:.6e}; outputs in {out}")
    return EXIT_OK


def _parse_grid(spec: str, n: int) -> list[np.ndarray]:
    axes = []
    parts = spec.split(";") if ";" in spec else spec.split("/")
    if len(parts) != n:
        raise ValueError(f"grid spec must have {n} axes (lo:hi:count separated by ';')")
    for part in parts:
        lo, hi, count = part.split(":")
        axes.append(np.linspace(float(lo), float(hi), int(count)))
    return axes


def cmd_evaluate(args: argparse.Namespace) -> int:
    try:
        net, header = hio.load_checkpoint(args.checkpoint)
        problem = hio.build_problem(header["problem"], header["problem_params"])
        if args.grid:
            axes = _parse_grid(args.grid, problem.state_dim)
        else:
            axes = [np.linspace(problem.domain.lower[i], problem.domain.upper[i], 101)
                    for i in range(problem.state_dim)]
    except (ValueError, KeyError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    for i, ax in enumerate(axes):
        if ax[0] < problem.domain.lower[i] or ax[-1] > problem.domain.upper[i]:
            print(f"warning: grid axis {i+1} extends outside the training domain",
                  file=sys.stderr)
    mesh = np.meshgrid(*axes, indexing="ij")
    X = np.stack([m.ravel() for m in mesh], axis=1)
    V = eval_value_batch(net, X)
    try:
        V_exact = np.array([exact_value(header["problem"], x) for x in X])
    except ValueError:
        V_exact = None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    n = problem.state_dim
    header_cols = [f"x{i+1}" for i in range(n)] + ["value"]
    if V_exact is not None:
        err = np.abs(V - V_exact)
        header_cols += ["value_exact", "abs_error"]
        rows = [[*map(float, X[i]), float(V[i]), float(V_exact[i]), float(err[i])]
                for i in range(len(X))]
        print(f"max abs error {err.max():.6e}, rms error "
              f"{float(np.sqrt(np.mean(err**2))):.6e}")
    else:
        rows = [[*map(float, X[i]), float(V[i])] for i in range(len(X))]
    hio.write_csv(out / "value_grid.csv", header_cols, rows)
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    try:
        net, header = hio.load_checkpoint(args.checkpoint)
        problem = hio.build_problem(header["problem"], header["problem_params"])
        x0 = np.array([float(v) for v in args.x0.split(",")])
        if x0.shape != (problem.state_dim,):
            raise ValueError(f"--x0 must have {problem.state_dim} components")
        mode = args.policy_mode or header["policy_mode"]
    except (ValueError, KeyError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    policy = synthesize_policy(net, problem, mode)
    try:
        traj = rollout(problem, policy, x0, dt=args.dt, t_max=args.t_max)
    except FloatingPointError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    hio.write_csv(out / "trajectory.csv", *hio.trajectory_rows(traj))
    if args.compare_exact:
        from .policy import exact_feedback_policy
        from .sim import compare_rollouts

        try:
            exact = exact_feedback_policy(header["problem"])
        except ValueError as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_CONFIG
        traj_exact = rollout(problem, exact, x0, dt=args.dt, t_max=args.t_max)
        hio.write_csv(out / "trajectory_exact.csv", *hio.trajectory_rows(traj_exact))
        dev, dcost = compare_rollouts(problem, exact, policy, x0,
                                      dt=args.dt, t_max=args.t_max)
        hio.write_json(out / "deviation.json",
                       {"max_state_deviation": dev, "cost_difference": dcost})
        print(f"max state deviation {dev:.6e}, cost difference {dcost:.6e}")
    print(f"converged={traj.converged} cost={traj.running_cost:.6f}")
    return EXIT_OK


def cmd_montecarlo(args: argparse.Namespace) -> int:
    try:
        net, header = hio.load_checkpoint(args.checkpoint)
        problem = hio.build_problem(header["problem"], header["problem_params"])
        mode = args.policy_mode or header["policy_mode"]
    except (ValueError, KeyError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    rng = RngStream(args.seed, "sampling").generator()
    ics = rng.uniform(problem.domain.lower, problem.domain.upper,
                      size=(args.count, problem.state_dim))
    policy = synthesize_policy(net, problem, mode)
    report = monte_carlo(problem, policy, ics, dt=args.dt, t_max=args.t_max,
                         stop_tol=args.stop_tol)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    hio.write_json(out / "montecarlo.json", report.to_dict())
    for i, x0 in enumerate(ics):
        traj = rollout(problem, policy, x0, dt=args.dt, t_max=args.t_max,
                       stop_tol=args.stop_tol)
        hio.write_csv(out / f"trajectory_{i:03d}.csv", *hio.trajectory_rows(traj))
    print(f"fraction converged {report.fraction_converged:.3f}")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    try:
        cfg = _load_config(args.config, args)
        widths = [int(w) for w in args.widths.split(",") if w]
        if not widths:
            raise ValueError("at least one width required")
    except (hio.ConfigError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for width in widths:
        cfg.train.hidden = width
        try:
            final_loss = _train_one(cfg, out, tag=f"n{width}")
        except FloatingPointError as e:
            print(f"width {width}: numerical failure: {e}", file=sys.stderr)
            continue
        rows.append([f"{cfg.problem_name}_n{width}", width, float(final_loss)])
        print(f"width {width}: final loss {final_loss:.6e}")
    hio.write_csv(out / "sweep_summary.csv", ["name", "neurons", "final_loss"], rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hjbflow",
                                description="HJB feedback-controller toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--policy-mode", choices=POLICY_MODES, default=None)
        sp.add_argument("--threads", type=int, default=1,
                        help="worker hint; never affects numerical results")

    sp = sub.add_parser("train", help="train a value network from a config file")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=None)
    common(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("evaluate", help="evaluate a checkpoint on a state grid")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--grid", default=None,
                    help="per-axis lo:hi:count, axes separated by ';'")
    common(sp)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("simulate", help="closed-loop rollout from an initial state")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--x0", required=True, help="comma-separated initial state")
    sp.add_argument("--dt", type=float, default=0.01)
    sp.add_argument("--t-max", type=float, default=20.0)
    sp.add_argument("--compare-exact", action="store_true")
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("montecarlo", help="convergence study from sampled states")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--count", type=int, default=50)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--dt", type=float, default=0.01)
    sp.add_argument("--t-max", type=float, default=20.0)
    sp.add_argument("--stop-tol", type=float, default=1e-3)
    common(sp)
    sp.set_defaults(func=cmd_montecarlo)

    sp = sub.add_parser("sweep", help="train across hidden-layer widths")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--widths", required=True, help="comma-separated widths")
    sp.add_argument("--seed", type=int, default=None)
    common(sp)
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        # argparse exits itself (bad flags, --help); fold into our codes
        return EXIT_OK if e.code in (0, None) else EXIT_CONFIG
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
