"""Two-stage training of the value network.

Stage 1 fits the output weights analytically (ridge pseudoinverse) to a
quadratic initial guess x' Q x, or seeds them with small random values.
Stage 2 minimizes the HJB residual loss: Adam with plateau-halving learning
rate and global-norm gradient clipping, followed by L-BFGS with a strong
Wolfe line search. The best loss seen is tracked across all stages, so the
returned weights never regress.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, asdict

import numpy as np

from .network import ElmParams, ValueNetwork, build_H, init_elm
from .numerics import RngStream, clip_global_norm, ridge_pinv_solve
from .problems import Domain, OcpInstance
from .residual import ResidualWorkspace

SAMPLING_MODES = ("uniform_random", "grid", "latin_hypercube")
INIT_MODES = ("quadratic", "random")


@dataclass
class TrainConfig:
    hidden: int = 100
    num_points: int = 2500
    sampling: str = "uniform_random"
    seed: int = 0
    weight_scale: float = 1.0
    init_mode: str = "quadratic"
    init_scale: float = 2.0
    ridge: float = 1e-8
    reg_weight: float = 1e-12
    positivity_weight: float = 0.0
    sampling_domain_scale: float = 1.0
    adam_lr: float = 1e-3
    adam_epochs: int = 1000
    scheduler: str = "plateau_halving"
    scheduler_patience: int = 200
    scheduler_factor: float = 0.5
    clip_norm: float = 1.0
    lbfgs_iters: int = 5000
    lbfgs_memory: int = 50
    policy_mode: str = "unconstrained"

    def __post_init__(self):
        if self.hidden < 1 or self.num_points < 1 or self.adam_epochs < 0:
            raise ValueError("hidden, num_points must be >= 1 and epochs >= 0")
        if self.sampling not in SAMPLING_MODES:
            raise ValueError(f"unknown sampling mode {self.sampling!r}")
        if self.init_mode not in INIT_MODES:
            raise ValueError(f"unknown init mode {self.init_mode!r}")
        if self.clip_norm <= 0:
            raise ValueError("clip_norm must be positive")
        if self.ridge < 0 or self.reg_weight < 0:
            raise ValueError("ridge and reg_weight must be non-negative")
        if self.positivity_weight < 0:
            raise ValueError("positivity_weight must be non-negative")
        if self.sampling_domain_scale < 1.0:
            raise ValueError("sampling_domain_scale must be >= 1")


@dataclass
class TrainReport:
    loss_history: list[float]
    stage_boundaries: dict[str, int]
    lr_history: list[float]
    stage_labels: list[str]
    final_loss: float
    wall_time: dict[str, float]
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "loss_history": self.loss_history,
            "stage_boundaries": self.stage_boundaries,
            "final_loss": self.final_loss,
            "wall_time": self.wall_time,
            "config": self.config,
        }


def sample_training_points(domain: Domain, M: int, sampling: str,
                           seed: int) -> np.ndarray:
    """M points in the training box; deterministic for a fixed seed."""
    if M < 1:
        raise ValueError("need at least one training point")
    n = domain.dim
    lo, hi = domain.lower, domain.upper
    if sampling == "uniform_random":
        rng = RngStream(seed, "sampling").generator()
        return rng.uniform(lo, hi, size=(M, n))
    if sampling == "grid":
        per_axis = max(2, round(M ** (1.0 / n)))
        axes = [np.linspace(lo[i], hi[i], per_axis) for i in range(n)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)
    if sampling == "latin_hypercube":
        rng = RngStream(seed, "sampling").generator()
        pts = np.empty((M, n))
        for j in range(n):
            cells = (np.arange(M) + rng.uniform(size=M)) / M
            pts[:, j] = lo[j] + (hi[j] - lo[j]) * rng.permutation(cells)
        return pts
    raise ValueError(f"unknown sampling mode {sampling!r}")


def quadratic_targets(X: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Initial-guess targets t_i = x_i' Q x_i."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
    return np.einsum("ij,jk,ik->i", X, Q, X)


def elm_fit(elm: ElmParams, X: np.ndarray, targets: np.ndarray,
            ridge: float = 0.0) -> np.ndarray:
    """Analytic output-weight fit: minimize ||H b - T||^2 + ridge ||b||^2."""
    return ridge_pinv_solve(build_H(elm, X), np.asarray(targets, dtype=np.float64),
                            ridge)


class _BestTracker:
    def __init__(self, beta: np.ndarray, loss: float):
        self.beta = beta.copy()
        self.loss = loss

    def update(self, beta: np.ndarray, loss: float) -> None:
        if loss < self.loss:
            self.loss = loss
            self.beta = beta.copy()


def run_adam(ws: ResidualWorkspace, beta0: np.ndarray,
             config: TrainConfig) -> tuple[np.ndarray, list[float], list[float]]:
    """Full-batch Adam on the residual loss with gradient clipping and an
    optional plateau-halving schedule. Returns the best beta seen."""
    beta = beta0.copy()
    m = np.zeros_like(beta)
    v = np.zeros_like(beta)
    b1, b2, eps = 0.9, 0.999, 1e-8
    lr = config.adam_lr
    history: list[float] = []
    lrs: list[float] = []
    loss0 = ws.loss(beta)
    best = _BestTracker(beta, loss0)
    plateau_best = loss0
    since_improve = 0
    for t in range(1, config.adam_epochs + 1):
        loss, grad = ws.loss_and_grad(beta)
        if not np.isfinite(loss):
            raise FloatingPointError(
                f"non-finite loss at adam step {t}, "
                f"gradient norm {np.linalg.norm(grad):.3e}")
        best.update(beta, loss)
        history.append(loss)
        lrs.append(lr)
        if config.scheduler == "plateau_halving":
            if loss < plateau_best - 1e-12:
                plateau_best = loss
                since_improve = 0
            else:
                since_improve += 1
                if since_improve >= config.scheduler_patience:
                    lr *= config.scheduler_factor
                    since_improve = 0
        grad = clip_global_norm(grad, config.clip_norm)
        m = b1 * m + (1.0 - b1) * grad
        v = b2 * v + (1.0 - b2) * grad**2
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        beta = beta - lr * m_hat / (np.sqrt(v_hat) + eps)
    best.update(beta, ws.loss(beta))
    return best.beta, history, lrs


def run_lbfgs(ws: ResidualWorkspace, beta0: np.ndarray,
              config: TrainConfig) -> tuple[np.ndarray, list[float]]:
    """Limited-memory BFGS with strong Wolfe line search on the residual
    loss (scipy backend). A stationary start returns immediately; internal
    line-search failure terminates with the best beta so far."""
    from scipy.optimize import minimize

    history: list[float] = []
    best = _BestTracker(beta0, ws.loss(beta0))

    def objective(beta):
        f, g = ws.loss_and_grad(beta)
        # History records every evaluation (line-search probes included) so
        # no extra loss evaluations are needed to track progress.
        history.append(f)
        best.update(beta, f)
        return f, g

    res = minimize(
        objective, beta0, jac=True, method="L-BFGS-B",
        options=dict(maxiter=config.lbfgs_iters, maxcor=config.lbfgs_memory,
                     ftol=1e-18, gtol=1e-14, maxls=50),
    )
    best.update(np.asarray(res.x), ws.loss(np.asarray(res.x)))
    return best.beta, history


def train(problem: OcpInstance, config: TrainConfig) -> tuple[ValueNetwork, TrainReport]:
    """Run both training stages and assemble the report."""
    elm = init_elm(problem.state_dim, config.hidden, config.seed,
                   config.weight_scale)
    sample_domain = problem.domain
    if config.sampling_domain_scale != 1.0:
        # Enlarging the sampling box imposes the PDE on the tube that optimal
        # trajectories actually visit, which for aggressive dynamics extends
        # beyond the box initial conditions are drawn from.
        sample_domain = Domain(config.sampling_domain_scale * problem.domain.lower,
                               config.sampling_domain_scale * problem.domain.upper)
    X = sample_training_points(sample_domain, config.num_points,
                               config.sampling, config.seed)
    ws = ResidualWorkspace(problem, elm, config.policy_mode, X,
                           config.reg_weight, config.positivity_weight)

    t0 = time.perf_counter()
    if config.init_mode == "quadratic":
        # Overshooting the quadratic guess keeps corner regions out of the
        # spurious (sign-flipped) residual basin.
        targets = config.init_scale * quadratic_targets(X, problem.state_weight)
        beta = elm_fit(elm, X, targets, config.ridge)
    else:
        beta = np.asarray(
            RngStream(config.seed, "init_beta").generator().uniform(
                -1e-3, 1e-3, size=config.hidden))
    t_elm = time.perf_counter() - t0

    loss_hist = [ws.loss(beta)]
    lr_hist = [config.adam_lr]
    labels = ["elm"]
    boundaries = {"elm": 0, "adam": 1}

    t0 = time.perf_counter()
    beta, adam_hist, adam_lrs = run_adam(ws, beta, config)
    t_adam = time.perf_counter() - t0
    loss_hist.extend(adam_hist)
    lr_hist.extend(adam_lrs)
    labels.extend(["adam"] * len(adam_hist))
    boundaries["lbfgs"] = len(loss_hist)

    t0 = time.perf_counter()
    beta, lbfgs_hist = run_lbfgs(ws, beta, config)
    t_lbfgs = time.perf_counter() - t0
    loss_hist.extend(lbfgs_hist)
    lr_hist.extend([0.0] * len(lbfgs_hist))
    labels.extend(["lbfgs"] * len(lbfgs_hist))

    net = ValueNetwork(elm, beta)
    final_loss = ws.loss(beta)
    report = TrainReport(
        loss_history=loss_hist,
        stage_boundaries=boundaries,
        lr_history=lr_hist,
        stage_labels=labels,
        final_loss=final_loss,
        wall_time={"elm": t_elm, "adam": t_adam, "lbfgs": t_lbfgs},
        config=asdict(config),
    )
    return net, report
