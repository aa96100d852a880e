"""Posterior-feasible linear optimization.

Tools for linear programs whose constraint data is uncertain and
described by a Bayesian posterior: conjugate posterior fitting,
credible-ellipsoid robustification solved by cutting planes, posterior
scenario sampling with exact sample-size bounds, Monte Carlo violation
certificates with exact binomial upper bounds, a self-contained
bounded-variable simplex solver, and reproducible benchmark and panel
selection pipelines on top.
"""

from .certify import (
    Certificate,
    certificate_from_json,
    certificate_to_json,
    certify,
    clopper_pearson_upper,
    estimate_violation,
)
from .errors import (
    CountOutOfRange,
    DimensionMismatch,
    DomainError,
    EmptyInput,
    MaxRoundsExceeded,
    NotPositiveDefinite,
    NumericalBreakdown,
    PanelInfeasible,
    PostfeasError,
    RankDeficient,
    SingularPrecision,
    SizeLimitExceeded,
)
from .experiments import (
    METHODS,
    ClusterSummary,
    PanelConfig,
    PanelResult,
    SimConfig,
    SimInstance,
    TrialRecord,
    gen_instance,
    panel_certify_detail,
    panel_select,
    run_benchmark,
    run_method,
    summarize_by_alpha,
    summarize_overall,
)
from .lp import (
    LpProblem,
    LpSolution,
    SolverTolerances,
    brute_force_lp,
    max_violation,
    problem_from_json,
    problem_to_json,
    solution_from_json,
    solution_to_json,
    solve_lp,
)
from .posterior import (
    BetaPosteriorMatrix,
    NigPosterior,
    NigPrior,
    OlsFit,
    PanelData,
    PredictiveT,
    fit_beta_binomial,
    fit_nig,
    fit_ols,
    load_panel_data,
    ols_predictive_quantile,
    predictive,
    predictive_array,
    predictive_quantile,
    q_matrix_draws,
    sample_predictive,
    sample_q_matrix,
)
from .robustify import (
    CutLog,
    Ellipsoid,
    RobustLp,
    RobustRow,
    SupportResult,
    bonferroni_kappa,
    rb_heuristic_tighten,
    rhs_quantile_tighten,
    robust_lp_from_json,
    robust_lp_to_json,
    robustify_rows,
    robustify_rows_joint,
    soc_support,
    solve_robust_cutting_planes,
)
from .scenario import (
    ScenarioSet,
    build_scenario_lp,
    required_sample_size,
    rhs_scenario_min,
    violation_bound,
)
from .stats import (
    Rng,
    beta_quantile,
    binomial_tail,
    chi2_quantile,
    derive_stream_id,
    log_choose,
    log_gamma,
    normal_cdf,
    normal_quantile,
    reg_inc_beta,
    reg_lower_gamma,
    student_t_quantile,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # certify
    "Certificate", "certificate_from_json", "certificate_to_json",
    "certify", "clopper_pearson_upper", "estimate_violation",
    # errors
    "CountOutOfRange", "DimensionMismatch", "DomainError", "EmptyInput",
    "MaxRoundsExceeded", "NotPositiveDefinite", "NumericalBreakdown",
    "PanelInfeasible", "PostfeasError", "RankDeficient",
    "SingularPrecision", "SizeLimitExceeded",
    # experiments
    "METHODS", "ClusterSummary", "PanelConfig", "PanelResult", "SimConfig",
    "SimInstance", "TrialRecord", "gen_instance", "panel_certify_detail",
    "panel_select", "run_benchmark", "run_method", "summarize_by_alpha",
    "summarize_overall",
    # lp
    "LpProblem", "LpSolution", "SolverTolerances", "brute_force_lp",
    "max_violation", "problem_from_json", "problem_to_json",
    "solution_from_json", "solution_to_json", "solve_lp",
    # posterior
    "BetaPosteriorMatrix", "NigPosterior", "NigPrior", "OlsFit", "PanelData",
    "PredictiveT", "fit_beta_binomial", "fit_nig", "fit_ols",
    "load_panel_data", "ols_predictive_quantile", "predictive",
    "predictive_array", "predictive_quantile", "q_matrix_draws",
    "sample_predictive", "sample_q_matrix",
    # robustify
    "CutLog", "Ellipsoid", "RobustLp", "RobustRow", "SupportResult",
    "bonferroni_kappa", "rb_heuristic_tighten", "rhs_quantile_tighten",
    "robust_lp_from_json", "robust_lp_to_json", "robustify_rows",
    "robustify_rows_joint", "soc_support", "solve_robust_cutting_planes",
    # scenario
    "ScenarioSet", "build_scenario_lp", "required_sample_size",
    "rhs_scenario_min", "violation_bound",
    # stats
    "Rng", "beta_quantile", "binomial_tail", "chi2_quantile",
    "derive_stream_id", "log_choose", "log_gamma", "normal_cdf",
    "normal_quantile", "reg_inc_beta", "reg_lower_gamma",
    "student_t_quantile",
]
