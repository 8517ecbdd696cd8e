"""Parametric bootstrap standard errors and the Wald-type test.

Replicate counts are redrawn from the fitted choice model holding the
covariates and totals fixed, each replicate is refit, and the replicate
dispersion scaled by sqrt(n) estimates the coordinate standard errors.
Replicate b draws from a counter-based stream keyed by (seed, b), so the
result is independent of execution order and worker count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .engine import FitResult, IdcSettings, idc_fit
from .exceptions import DataError, IdmrError, ShapeError
from .executor import ExecutorConfig, parallel_map
from .model import CountMatrix, CovariateMatrix, Dataset, ParamMatrix, choice_probabilities
from .rng import stream

# fraction of replicate fits allowed to fail before the bootstrap aborts
MAX_FAILURE_FRACTION = 0.10


@dataclass(frozen=True)
class BootstrapSettings:
    replicates: int = 500
    idc: IdcSettings = field(default_factory=IdcSettings)
    seed: int = 0

    def __post_init__(self):
        if self.replicates < 2:
            raise DataError("bootstrap needs at least 2 replicates")


@dataclass(frozen=True)
class BootstrapResult:
    """Per-coefficient standard errors from replicate dispersion.

    ``se[k, j]`` estimates the standard deviation of sqrt(n) times the
    coefficient estimate, so se/sqrt(n) is the coordinate standard error.
    """

    se: np.ndarray
    seed: int
    n: int
    failed: tuple[int, ...] = ()
    replicate_store: np.ndarray | None = None


def bootstrap(
    data: Dataset,
    theta_hat: ParamMatrix,
    settings: BootstrapSettings,
    executor: ExecutorConfig | None = None,
    reinitialize: bool = False,
    store_replicates: bool = False,
) -> BootstrapResult:
    """Parametric bootstrap around the fitted coefficients.

    Each replicate redraws every observation's counts from the fitted cell
    probabilities at the observed total, then refits with the same settings.
    Refits warm-start at ``theta_hat`` by default; ``reinitialize`` re-runs
    the original initializer instead (slower, same fixed point).  Failed
    replicates are skipped, up to 10 percent of the total.
    """
    theta_hat.validate()
    if theta_hat.d != data.d or theta_hat.p != data.p:
        raise ShapeError(
            f"theta_hat is {theta_hat.d} x {theta_hat.p} but data need {data.d} x {data.p}"
        )
    probs = choice_probabilities(data.covariates.values @ theta_hat.rows.T)
    totals = data.counts.totals
    covariates = data.covariates
    init = "binomial" if reinitialize else theta_hat

    def one_replicate(b: int):
        rng = stream(settings.seed, b)
        counts = rng.multinomial(totals, probs).astype(np.int64)
        replicate = Dataset(CountMatrix(counts, totals), covariates)
        try:
            fit = idc_fit(replicate, init, settings.idc, executor=None)
        except IdmrError as exc:
            return None, str(exc)
        return fit.theta.free, None

    outcomes = parallel_map(list(range(settings.replicates)), one_replicate, executor)
    draws = np.full((settings.replicates, data.d - 1, data.p), np.nan)
    failed = []
    for b, (free, _message) in enumerate(outcomes):
        if free is None:
            failed.append(b)
        else:
            draws[b] = free
    if len(failed) > MAX_FAILURE_FRACTION * settings.replicates:
        raise IdmrError(
            f"{len(failed)} of {settings.replicates} bootstrap replicates failed to fit"
        )
    good = draws[[b for b in range(settings.replicates) if b not in set(failed)]]
    se = np.sqrt(data.n) * good.std(axis=0, ddof=1)
    return BootstrapResult(
        se=se,
        seed=settings.seed,
        n=data.n,
        failed=tuple(failed),
        replicate_store=draws if store_replicates else None,
    )


def wald_test(
    theta_hat: ParamMatrix,
    boot: BootstrapResult,
    n: int,
    target: tuple[int, int],
    null_value: float = 0.0,
    level: float = 0.05,
) -> tuple[float, bool]:
    """Two-sided Wald test of one free coefficient against a null value.

    The statistic is |theta_hat[k, j] - null| / (se[k, j] / sqrt(n)),
    compared to the standard normal quantile at 1 - level/2.
    """
    k, j = target
    if not (0 <= k < theta_hat.d - 1 and 0 <= j < theta_hat.p):
        raise ShapeError(
            f"target ({k}, {j}) outside the free-coefficient range "
            f"({theta_hat.d - 1} x {theta_hat.p})"
        )
    if not 0.0 < level < 1.0:
        raise DataError("level must be in (0, 1)")
    se = float(boot.se[k, j])
    if se == 0.0:
        raise DataError(f"bootstrap standard error for ({k}, {j}) is zero")
    statistic = abs(float(theta_hat.rows[k, j]) - null_value) / (se / np.sqrt(n))
    critical = float(norm.ppf(1.0 - level / 2.0))
    return statistic, statistic > critical
