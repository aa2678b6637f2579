"""Budget-constrained, parity-penalized allocation: policy LPs, experiment design, online learning."""

__version__ = "0.1.0"

from .population import (  # noqa: E402
    ContextSpec,
    Population,
    RewardFunction,
    SyntheticPopConfig,
    UtilitySpec,
    expected_rewards,
    gen_structural_population,
    gen_stylized_population,
)
from .lp import LpInstance, LpSolution, linearize_abs, solve_lp  # noqa: E402
from .policy import (  # noqa: E402
    Policy,
    ThresholdPolicy,
    extract_threshold,
    greedy_per_dollar,
    pareto_frontier,
    reference_points,
    solve_policy,
    utility,
    utility_gap_bound,
)
from .estimators import (  # noqa: E402
    Dataset,
    FittedModel,
    fit_linear,
    fit_logistic,
    fit_tabular,
    optimistic_estimate,
    posterior_draw,
)
from .design import (  # noqa: E402
    BoundQuery,
    covariance,
    g_optimal_design,
    round_robin_schedule,
    sample_bound,
    verify_bound_empirically,
)
from .bandit import (  # noqa: E402
    ExperimentConfig,
    LearnerConfig,
    adjust_budget,
    nearest_neighbor,
    random_allocation_fraction,
    run_experiment,
    summarize,
)
