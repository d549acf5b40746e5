"""Kernel-based sensitivity analysis for computer models.

Estimates how much a subset of model inputs contributes to the output
distribution, through kernel mean embeddings of first-order and total
conditional-effect functions, and tests whether the output depends on the
subset at all.  Works for independent inputs and for inputs coupled through
an explicit dependency model.
"""

from .errors import (
    ConfigError,
    DegenerateOutputError,
    DegenerateStatisticError,
    KernelOverflowError,
)
from ._accel import active_backend
from .kernels import (
    FAMILIES,
    CenteredKernel,
    KernelSpec,
    bounded_support_alpha,
    center_at,
    eval as eval_kernel,
    k_at_origin,
    pair_values,
    unbounded_alpha,
)
from .sampling import (
    DependencyModel,
    InputModel,
    Marginal,
    ModelSpec,
    PairedSample,
    child_seed,
    evaluate_g,
    gaussian_pair_dependency,
    normal_marginal,
    sample_paired,
    substream,
    uniform_marginal,
)
from .estimators import (
    ConditionalMeanPlan,
    MomentEstimates,
    build_conditional_mean_plan,
    compute_moments,
    cond_mean_given_xu,
    cond_mean_given_z,
    estimate_mu_c,
    estimate_mu_fo,
    estimate_mu_tot,
    estimate_sigma_tot,
    estimate_sigma_tot_h0,
)
from .sensitivity import (
    KbSiEstimate,
    TestReport,
    cell_from_moments,
    critical_value,
    first_order_index,
    index_std_error,
    run_independence_test,
    test_statistic,
    total_index,
)
from .models import (
    DEFAULT_G_COEFFS,
    GFunctionSpec,
    VectorModelSpec,
    g_function,
    g_function_variance_decomposition,
    vector_model,
    vector_model_af_sampler,
    vector_model_analytic_af,
)
from .validation import (
    EquivalenceReport,
    OracleResult,
    brute_force_discrepancy,
    mmd_equivalence_check,
    sobol_equivalence_check,
)
from .cli import StudyConfig, StudyResult, emit, parse_config, run_study

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DegenerateOutputError",
    "DegenerateStatisticError",
    "KernelOverflowError",
    "active_backend",
    "FAMILIES",
    "CenteredKernel",
    "KernelSpec",
    "bounded_support_alpha",
    "center_at",
    "eval_kernel",
    "k_at_origin",
    "pair_values",
    "unbounded_alpha",
    "DependencyModel",
    "InputModel",
    "Marginal",
    "ModelSpec",
    "PairedSample",
    "child_seed",
    "evaluate_g",
    "gaussian_pair_dependency",
    "normal_marginal",
    "sample_paired",
    "substream",
    "uniform_marginal",
    "ConditionalMeanPlan",
    "MomentEstimates",
    "build_conditional_mean_plan",
    "compute_moments",
    "cond_mean_given_xu",
    "cond_mean_given_z",
    "estimate_mu_c",
    "estimate_mu_fo",
    "estimate_mu_tot",
    "estimate_sigma_tot",
    "estimate_sigma_tot_h0",
    "KbSiEstimate",
    "TestReport",
    "cell_from_moments",
    "critical_value",
    "first_order_index",
    "index_std_error",
    "run_independence_test",
    "test_statistic",
    "total_index",
    "DEFAULT_G_COEFFS",
    "GFunctionSpec",
    "VectorModelSpec",
    "g_function",
    "g_function_variance_decomposition",
    "vector_model",
    "vector_model_af_sampler",
    "vector_model_analytic_af",
    "EquivalenceReport",
    "OracleResult",
    "brute_force_discrepancy",
    "mmd_equivalence_check",
    "sobol_equivalence_check",
    "StudyConfig",
    "StudyResult",
    "emit",
    "parse_config",
    "run_study",
]
