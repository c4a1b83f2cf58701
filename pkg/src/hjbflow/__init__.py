"""Learn infinite-horizon optimal feedback controllers by minimizing the
stationary HJB residual with a random-feature value network, then evaluate
the learned policies in closed-loop simulation."""

from .network import (
    ElmParams,
    ValueNetwork,
    activation,
    activation_derivative,
    build_H,
    eval_value,
    eval_value_batch,
    eval_value_gradient,
    eval_value_gradient_batch,
    hidden_feature_jacobian,
    hidden_features,
    init_elm,
)
from .policy import (
    POLICY_MODES,
    conjugate_value,
    control_preimage,
    policy_constrained_clipped,
    policy_constrained_paper,
    policy_unconstrained,
    synthesize_policy,
)
from .problems import (
    ControlBounds,
    Domain,
    OcpInstance,
    exact_policy,
    exact_value,
    exact_value_gradient,
    make_detumbling,
    make_double_integrator,
    make_nonlinear_benchmark,
    make_pendulum,
    make_problem,
)
from .residual import ResidualWorkspace, hjb_residual, hjb_residual_from_gradient, loss, loss_gradient_beta
from .sim import MonteCarloReport, Trajectory, compare_rollouts, monte_carlo, rk4_step, rollout
from .train import TrainConfig, TrainReport, elm_fit, quadratic_targets, sample_training_points, train

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
