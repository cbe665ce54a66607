"""Linear integrated-conditional-moment instrumental-variable estimation.

The package turns the conditional moment restriction E[U|Z] = 0 into an
exactly-identified linear IV regression through kernel-constructed
instruments, and ships the surrounding toolkit: kernel degeneracy and
dependence diagnostics, a wild-bootstrap specification test, a relevance
(linear completeness) test that works without excluded instruments, and a
Monte Carlo harness with a TSLS baseline.
"""

from .data import (
    INTERCEPT_NAME,
    Dataset,
    ValidationError,
    load_csv,
    save_csv,
    standardize_instruments,
)
from .estimator import (
    COND_LIMIT,
    EstimateResult,
    IdentificationDiagnostics,
    IdentificationError,
    InfeasibilityError,
    InstrumentMatrix,
    TTest,
    build_instruments,
    estimate,
    identification_diagnostics,
    minimize_objective_oracle,
    mmd_objective,
    t_test,
    tsls_estimate,
)
from .inference import (
    WEIGHT_SCHEMES,
    BootTestResult,
    lc_interpretation,
    lc_test,
    spec_test,
    wild_weights,
)
from .kernels import (
    KERNEL_IDS,
    KernelMatrix,
    KernelScalingError,
    KernelSpec,
    esc6_constant,
    kernel_matrix,
    kernel_sd_mc,
    kernel_sd_report,
    wmd_lambda,
)
from .mdd import DependenceReport, dependence_report, gmdc, gmdd_sq, mdd_sq
from .rng import child_rng, mix_seed
from .simulate import (
    DGP_IDS,
    ESTIMATOR_NAMES,
    TRUE_COEF,
    DgpConfig,
    EstimatorMetrics,
    McSummary,
    gen_dgp,
    gmdc_design,
    run_mc,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "INTERCEPT_NAME",
    "Dataset",
    "ValidationError",
    "load_csv",
    "save_csv",
    "standardize_instruments",
    "COND_LIMIT",
    "EstimateResult",
    "IdentificationDiagnostics",
    "IdentificationError",
    "InfeasibilityError",
    "InstrumentMatrix",
    "TTest",
    "build_instruments",
    "estimate",
    "identification_diagnostics",
    "minimize_objective_oracle",
    "mmd_objective",
    "t_test",
    "tsls_estimate",
    "WEIGHT_SCHEMES",
    "BootTestResult",
    "lc_interpretation",
    "lc_test",
    "spec_test",
    "wild_weights",
    "KERNEL_IDS",
    "KernelMatrix",
    "KernelScalingError",
    "KernelSpec",
    "esc6_constant",
    "kernel_matrix",
    "kernel_sd_mc",
    "kernel_sd_report",
    "wmd_lambda",
    "DependenceReport",
    "dependence_report",
    "gmdc",
    "gmdd_sq",
    "mdd_sq",
    "child_rng",
    "mix_seed",
    "DGP_IDS",
    "ESTIMATOR_NAMES",
    "TRUE_COEF",
    "DgpConfig",
    "EstimatorMetrics",
    "McSummary",
    "gen_dgp",
    "gmdc_design",
    "run_mc",
]
