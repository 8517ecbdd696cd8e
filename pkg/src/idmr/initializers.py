"""Step-0 estimators for the iterative fit.

Three choices: pairwise binomial logistic fits against the base category
(consistent), Poisson fits with the log-total offset, and Poisson fits with
a zero offset.  The latter two solve all d rows unconstrained and are then
normalized by subtracting the base row, which leaves every fitted choice
probability unchanged while restoring the zero base row.
"""

from __future__ import annotations

import warnings

import numpy as np

from .exceptions import DataError, IdmrError, SingularHessianError
from .executor import ExecutorConfig, parallel_map
from .glm import GlmSettings, solve_binomial, solve_poisson
from .model import Dataset, ParamMatrix

INIT_KINDS = ("binomial", "taddy", "poisson", "zeros")


def init_binomial(
    data: Dataset, settings: GlmSettings | None = None, executor: ExecutorConfig | None = None
) -> ParamMatrix:
    """Row k from a binomial logistic regression of choice k against the base.

    Consistent for the true coefficients; each row is fit independently and
    dispatched in parallel.
    """
    if settings is None:
        settings = GlmSettings()
    counts = data.counts.counts
    base = counts[:, -1]
    if base.sum() == 0:
        raise DataError(
            "base category (last column) has no counts; reorder the choice columns"
        )
    V = data.covariates.values

    def fit_row(k: int) -> np.ndarray:
        try:
            solution = solve_binomial(
                counts[:, k], base, V, np.zeros(data.p), settings, choice=k
            )
        except SingularHessianError as err:
            err.choice = k
            raise
        if not solution.converged:
            warnings.warn(
                f"binomial initializer, choice {k}: {solution.message}", stacklevel=3
            )
        return solution.theta_k

    rows = parallel_map(list(range(data.d - 1)), fit_row, executor)
    return ParamMatrix.from_free(np.vstack(rows))


def _init_offset_poisson(
    data: Dataset, offset: np.ndarray, settings: GlmSettings, executor: ExecutorConfig | None
) -> ParamMatrix:
    counts = data.counts.counts
    V = data.covariates.values

    def fit_row(k: int) -> np.ndarray:
        solution = solve_poisson(counts[:, k], V, offset, np.zeros(data.p), settings, choice=k)
        if not solution.converged:
            warnings.warn(f"offset initializer, choice {k}: {solution.message}", stacklevel=4)
        return solution.theta_k

    rows = np.vstack(parallel_map(list(range(data.d)), fit_row, executor))
    # subtract the base row: the unique intercept-preserving reparameterization
    # that restores the zero base row without changing any choice probability
    return ParamMatrix(rows - rows[-1])


def init_taddy(
    data: Dataset, settings: GlmSettings | None = None, executor: ExecutorConfig | None = None
) -> ParamMatrix:
    """All-rows Poisson fits with per-observation offset log(M_i), normalized."""
    if settings is None:
        settings = GlmSettings()
    totals = data.counts.totals
    if totals.min() < 1:
        i = int(np.argmin(totals))
        raise DataError(f"observation {i} has zero total count; log offset undefined")
    return _init_offset_poisson(data, np.log(totals.astype(np.float64)), settings, executor)


def init_poisson(
    data: Dataset, settings: GlmSettings | None = None, executor: ExecutorConfig | None = None
) -> ParamMatrix:
    """All-rows Poisson fits with zero offset, normalized.

    When the totals are Poisson distributed this is the exact maximum
    likelihood estimator; otherwise it serves as a fast inconsistent start.
    """
    if settings is None:
        settings = GlmSettings()
    return _init_offset_poisson(data, np.zeros(data.n), settings, executor)


def resolve_init(
    data: Dataset,
    init,
    settings: GlmSettings | None = None,
    executor: ExecutorConfig | None = None,
) -> tuple[ParamMatrix, str]:
    """Map an init spec (kind name or a ParamMatrix) to a starting point."""
    if isinstance(init, ParamMatrix):
        if init.d != data.d or init.p != data.p:
            raise DataError(
                f"user-supplied start is {init.d} x {init.p} but data need "
                f"{data.d} x {data.p}"
            )
        init.validate()
        return init, "user"
    if init == "binomial":
        return init_binomial(data, settings, executor), "binomial"
    if init == "taddy":
        return init_taddy(data, settings, executor), "taddy"
    if init == "poisson":
        return init_poisson(data, settings, executor), "poisson"
    if init == "zeros":
        return ParamMatrix.zeros(data.d, data.p), "zeros"
    raise IdmrError(f"unknown initializer {init!r}; expected one of {INIT_KINDS} or a ParamMatrix")
