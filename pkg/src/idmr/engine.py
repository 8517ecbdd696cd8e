"""The iterative distributed fit.

Each step has two parts: a closed-form update of the per-observation log
offsets given the current coefficients, and d-1 independent Poisson
regressions (one per non-base choice, warm-started at the previous iterate)
given those offsets.  The joint minimizer of the separable objective, which
coincides with the conditional maximum likelihood estimator, is the unique
fixed point of this map.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .constraints import ConstraintSpec, solve_poisson_reduced, solve_shared_coordinate
from .exceptions import ConstraintError, DataError
from .executor import ExecutorConfig, parallel_map
from .glm import CLAMP_INTERCEPT, GlmSettings, solve_poisson
from .initializers import resolve_init
from .model import (
    CountMatrix,
    CovariateMatrix,
    Dataset,
    FixedEffects,
    ParamMatrix,
    quasi_loglik,
)

_EMPTY_SPEC = ConstraintSpec()


@dataclass(frozen=True)
class IdcSettings:
    """Iteration budget and inner-solver controls for one fit.

    ``iterations`` of None means ceil(log n), enough for the iterate to be
    first-order equivalent to the full maximum likelihood estimator.  Early
    stopping triggers once the sup-norm coefficient change falls below
    ``early_stop_tol``; set it to None to force the full budget, as the
    Monte-Carlo tables do.
    """

    iterations: int | None = None
    early_stop_tol: float | None = 1e-8
    glm: GlmSettings = field(default_factory=GlmSettings)

    def __post_init__(self):
        if self.iterations is not None and self.iterations < 0:
            raise DataError("iterations must be nonnegative")
        if self.early_stop_tol is not None and not self.early_stop_tol > 0:
            raise DataError("early_stop_tol must be positive when set")


@dataclass(frozen=True)
class FitResult:
    """Fitted coefficients plus per-iteration diagnostics."""

    theta: ParamMatrix
    iterations_run: int
    step_norms: tuple[float, ...]
    objective_trace: tuple[float, ...]
    wall_times: tuple[float, ...]
    init_kind: str
    inner_not_converged: tuple[tuple[int, int], ...] = ()
    dropped_choices: tuple[int, ...] = ()


def mu_bar(data: Dataset, theta: ParamMatrix) -> FixedEffects:
    """Closed-form offset minimizer: mu_i = log(M_i) - logsumexp(eta_i)."""
    totals = data.counts.totals
    if totals.min() < 1:
        i = int(np.argmin(totals))
        raise DataError(f"observation {i} has zero total count; its offset is undefined")
    if theta.d != data.d or theta.p != data.p:
        raise DataError(
            f"parameter matrix is {theta.d} x {theta.p} but data need {data.d} x {data.p}"
        )
    return FixedEffects(_mu_bar_values(data, theta.rows))


def _mu_bar_values(data: Dataset, rows: np.ndarray) -> np.ndarray:
    eta = data.covariates.values @ rows.T
    return np.log(data.counts.totals.astype(np.float64)) - logsumexp(eta, axis=1)


def _step_rows(
    data: Dataset,
    rows_prev: np.ndarray,
    spec: ConstraintSpec,
    glm_settings: GlmSettings,
    executor: ExecutorConfig | None,
) -> tuple[np.ndarray, list[tuple[int, str]]]:
    """One update of all coefficient rows given the previous iterate."""
    mu = _mu_bar_values(data, rows_prev)
    counts = data.counts.counts
    V = data.covariates.values
    within_pairs = {tie.choice: tie.pairs for tie in spec.within}
    frozen: dict[int, dict[int, float]] = {}
    for group in spec.across:
        for k in group.choices:
            held = group.value if group.value is not None else float(rows_prev[k, group.coordinate])
            frozen.setdefault(k, {})[group.coordinate] = held

    def solve_one(k: int):
        ties = within_pairs.get(k, ())
        fixed = frozen.get(k)
        if not ties and not fixed:
            return solve_poisson(counts[:, k], V, mu, rows_prev[k], glm_settings, choice=k)
        return solve_poisson_reduced(
            counts[:, k], V, mu, tuple(ties), fixed, rows_prev[k], glm_settings, choice=k
        )

    solutions = parallel_map(list(range(data.d - 1)), solve_one, executor)
    rows = np.zeros_like(rows_prev)
    failures: list[tuple[int, str]] = []
    for k, solution in enumerate(solutions):
        rows[k] = solution.theta_k
        if not solution.converged:
            failures.append((k, solution.message))
    # shared coordinates: a single low-dimensional solve between the two
    # parallel phases, then broadcast
    for group in spec.across:
        if group.value is not None:
            rows[list(group.choices), group.coordinate] = group.value
            continue
        start = float(rows_prev[group.choices[0], group.coordinate])
        shared = solve_shared_coordinate(data, rows, mu, group, start, glm_settings)
        rows[list(group.choices), group.coordinate] = shared
    return rows, failures


def theta_step(
    data: Dataset,
    theta_prev: ParamMatrix,
    settings: GlmSettings | None = None,
    executor: ExecutorConfig | None = None,
) -> ParamMatrix:
    """One unconstrained update: offsets from theta_prev, then d-1 Poisson fits."""
    theta_prev.validate()
    if theta_prev.d != data.d or theta_prev.p != data.p:
        raise DataError(
            f"parameter matrix is {theta_prev.d} x {theta_prev.p} but data need "
            f"{data.d} x {data.p}"
        )
    rows, _ = _step_rows(data, theta_prev.rows, _EMPTY_SPEC, settings or GlmSettings(), executor)
    return ParamMatrix(rows)


def prepare_data(data: Dataset) -> tuple[Dataset, tuple[int, ...], tuple[int, ...]]:
    """Drop zero-total observations and empty non-base choice columns.

    Zero-total rows contribute nothing to the likelihood and break the
    offset update; empty non-base columns have unidentified coefficients.
    Returns the reduced dataset plus the dropped row and choice indices
    (the base column is never dropped).
    """
    counts = data.counts.counts
    V = data.covariates.values
    keep_rows = data.counts.totals >= 1
    dropped_rows = tuple(int(i) for i in np.nonzero(~keep_rows)[0])
    if dropped_rows:
        warnings.warn(
            f"dropping {len(dropped_rows)} observation(s) with zero total count: "
            f"{list(dropped_rows)[:10]}",
            stacklevel=3,
        )
        counts = counts[keep_rows]
        V = V[keep_rows]
        if counts.shape[0] == 0:
            raise DataError("every observation has a zero total count")
    column_sums = counts.sum(axis=0)
    empty = [k for k in range(data.d - 1) if column_sums[k] == 0]
    if empty:
        warnings.warn(
            f"dropping {len(empty)} choice column(s) with no counts anywhere: {empty}",
            stacklevel=3,
        )
        kept = [k for k in range(data.d) if k not in empty]
        counts = counts[:, kept]
    if not dropped_rows and not empty:
        return data, (), ()
    reduced = Dataset(CountMatrix.from_counts(counts), CovariateMatrix(V))
    return reduced, dropped_rows, tuple(empty)


def _embed_rows(rows: np.ndarray, dropped: tuple[int, ...], d: int) -> np.ndarray:
    """Expand fitted rows back to the full choice set.

    Dropped choices get a clamped intercept so their implied probability is
    effectively zero while every array shape of the original problem holds.
    """
    if not dropped:
        return rows
    p = rows.shape[1]
    full = np.zeros((d, p))
    kept = [k for k in range(d) if k not in dropped]
    full[kept] = rows
    for k in dropped:
        full[k, 0] = CLAMP_INTERCEPT
    return full


def _fit(
    data: Dataset,
    init,
    settings: IdcSettings,
    executor: ExecutorConfig | None,
    spec: ConstraintSpec,
) -> FitResult:
    reduced, dropped_rows, dropped_choices = prepare_data(data)
    if (dropped_rows or dropped_choices) and not spec.is_empty():
        raise ConstraintError(
            "data contain zero-total observations or empty choice columns; clean "
            "them before a constrained fit so constraint indices stay meaningful"
        )
    if dropped_choices and isinstance(init, ParamMatrix):
        kept = [k for k in range(data.d) if k not in dropped_choices]
        init = ParamMatrix(init.rows[kept])
    theta0, kind = resolve_init(reduced, init, settings.glm, executor)
    total_steps = (
        settings.iterations
        if settings.iterations is not None
        else max(1, math.ceil(math.log(reduced.n)))
    )
    rows = theta0.rows
    step_norms: list[float] = []
    objective_trace: list[float] = []
    wall_times: list[float] = []
    inner_failures: list[tuple[int, int]] = []
    for s in range(1, total_steps + 1):
        started = time.perf_counter()
        new_rows, failures = _step_rows(reduced, rows, spec, settings.glm, executor)
        step_norm = float(np.max(np.abs(new_rows - rows))) if new_rows.size else 0.0
        objective = -quasi_loglik(
            reduced, ParamMatrix(new_rows), FixedEffects(_mu_bar_values(reduced, new_rows))
        )
        rows = new_rows
        wall_times.append(time.perf_counter() - started)
        step_norms.append(step_norm)
        objective_trace.append(objective)
        for k, _message in failures:
            inner_failures.append((s, k))
        if settings.early_stop_tol is not None and step_norm < settings.early_stop_tol:
            break
    theta = ParamMatrix(_embed_rows(rows, dropped_choices, data.d))
    return FitResult(
        theta=theta,
        iterations_run=len(step_norms),
        step_norms=tuple(step_norms),
        objective_trace=tuple(objective_trace),
        wall_times=tuple(wall_times),
        init_kind=kind,
        inner_not_converged=tuple(inner_failures),
        dropped_choices=dropped_choices,
    )


def idc_fit(
    data: Dataset,
    init="binomial",
    settings: IdcSettings | None = None,
    executor: ExecutorConfig | None = None,
) -> FitResult:
    """Run the iterative distributed fit.

    ``init`` is one of "binomial", "taddy", "poisson", "zeros", or a
    ParamMatrix to warm-start from.  A non-converged inner solve is recorded
    in the diagnostics but does not abort the fit.
    """
    return _fit(data, init, settings or IdcSettings(), executor, _EMPTY_SPEC)


def idc_fit_constrained(
    data: Dataset,
    constraints: ConstraintSpec,
    init="binomial",
    settings: IdcSettings | None = None,
    executor: ExecutorConfig | None = None,
) -> FitResult:
    """Iterative fit under equality constraints.

    Every iterate satisfies the constraints exactly by construction.  With
    an empty specification the trajectory is identical to :func:`idc_fit`.
    """
    spec = constraints.validate(data.d, data.p)
    return _fit(data, init, settings or IdcSettings(), executor, spec)
