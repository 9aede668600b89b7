"""Structure-exploiting numerical dual control for exploration and
exploitation, with a vehicle eco-cruising simulation harness."""

from .baselines import EscConfig, EscState, GradDceeConfig, esc_init, esc_step, grad_dcee_step
from .config import ScenarioConfig, default_config, load_config, scenario_from_dict
from .core import (
    DceeProblem,
    ResidualEval,
    evaluate,
    jacobian,
    jacobian_fd,
    least_squares_cost,
    objective,
    objective_grid,
    objective_split,
    predict_output,
    residual,
    residual_fn,
)
from .diagnostics import (
    AuditReport,
    HessianSplit,
    contraction_rate,
    derivative_audit,
    exact_hessian_fd,
    ggn_split,
)
from .ensemble import (
    ConditionStats,
    Ensemble,
    condition_stats,
    ensemble_mean,
    init_ensemble,
    measured_update,
    predicted_reward,
    predicted_update,
)
from .errors import (
    ConfigurationError,
    CurvatureViolationError,
    DceeError,
    InfeasibleCandidateError,
    InvalidInputError,
    RankDeficiencyError,
    RateUndefinedError,
    SolverFailureError,
)
from .harness import RunResult, StepRecord, bench_solver, compute_metrics, export, parse_csv, run_closed_loop
from .plant import EnvSegment, NoiseSpec, VehicleParams, active_segment, drag_force, measure, plant_step
from .reward import (
    QuadraticRewardSpec,
    basis,
    basis_derivative,
    eval_reward,
    is_admissible,
    make_true_params,
    optimal_condition,
    optimal_condition_jacobian,
    project_admissible,
)
from .solver import GnConfig, GnReport, controller_step, gn_step, scp_step, solve

__version__ = "0.1.0"
