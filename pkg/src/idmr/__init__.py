"""Iterative distributed estimation for multinomial logistic regression.

The joint likelihood over a large choice set is rewritten as a separable
Poisson-form objective with per-observation offsets, which splits each
update into independent small regressions (one per choice) plus a
closed-form offset update.  Iterating the two converges to the conditional
maximum likelihood estimator while each step stays cheap and parallel.
"""

__version__ = "0.1.0"

from .baseline import MleResult, fisher_information, information_dominance_check, mnl_mle
from .constraints import (
    AcrossTie,
    ConstraintSpec,
    WithinTie,
    solve_poisson_reduced,
    solve_poisson_within,
)
from .engine import (
    FitResult,
    IdcSettings,
    idc_fit,
    idc_fit_constrained,
    mu_bar,
    prepare_data,
    theta_step,
)
from .exceptions import (
    ConstraintError,
    DataError,
    IdmrError,
    NumericError,
    ParseError,
    ShapeError,
    SingularHessianError,
)
from .executor import ExecutorConfig, parallel_map
from .glm import GlmSettings, GlmSolution, q_kn, solve_binomial, solve_poisson
from .inference import BootstrapResult, BootstrapSettings, bootstrap, wald_test
from .initializers import init_binomial, init_poisson, init_taddy, resolve_init
from .model import (
    CountMatrix,
    CovariateMatrix,
    Dataset,
    FixedEffects,
    ParamMatrix,
    choice_probabilities,
    eta_matrix,
    linear_index,
    loglik_conditional,
    loglik_with_mu,
    mnl_log_pmf,
    mnl_sample,
    quasi_loglik,
    sample_counts,
)
from .rng import child_seed, stream
from .simulate import (
    BenchRow,
    DgpSpec,
    SimDraw,
    SizePowerRow,
    SizePowerSpec,
    TableRow,
    TableSpec,
    draw_dgp,
    fit_named_estimator,
    mse,
    run_bench,
    run_size_power,
    run_table,
)

__all__ = [
    "__version__",
    "AcrossTie",
    "BenchRow",
    "BootstrapResult",
    "BootstrapSettings",
    "ConstraintError",
    "ConstraintSpec",
    "CountMatrix",
    "CovariateMatrix",
    "DataError",
    "Dataset",
    "DgpSpec",
    "ExecutorConfig",
    "FitResult",
    "FixedEffects",
    "GlmSettings",
    "GlmSolution",
    "IdcSettings",
    "IdmrError",
    "MleResult",
    "NumericError",
    "ParamMatrix",
    "ParseError",
    "ShapeError",
    "SimDraw",
    "SingularHessianError",
    "SizePowerRow",
    "SizePowerSpec",
    "TableRow",
    "TableSpec",
    "WithinTie",
    "bootstrap",
    "child_seed",
    "choice_probabilities",
    "draw_dgp",
    "eta_matrix",
    "fisher_information",
    "fit_named_estimator",
    "idc_fit",
    "idc_fit_constrained",
    "information_dominance_check",
    "init_binomial",
    "init_poisson",
    "init_taddy",
    "linear_index",
    "loglik_conditional",
    "loglik_with_mu",
    "mnl_log_pmf",
    "mnl_mle",
    "mnl_sample",
    "mse",
    "mu_bar",
    "parallel_map",
    "prepare_data",
    "q_kn",
    "quasi_loglik",
    "resolve_init",
    "run_bench",
    "run_size_power",
    "run_table",
    "sample_counts",
    "solve_binomial",
    "solve_poisson",
    "solve_poisson_reduced",
    "solve_poisson_within",
    "stream",
    "theta_step",
    "wald_test",
]
