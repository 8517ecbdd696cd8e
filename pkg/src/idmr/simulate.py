"""Synthetic data generators and the Monte-Carlo experiment harness.

Three data generating processes at p covariates (a constant plus p-1 random
columns): "a" draws counts from the choice model itself at uniform totals in
{20..30}; "b" draws each count independently from a Poisson at the model
rate, so the totals are Poisson too; "c" stresses the fit with
Gaussian-mixture covariates and totals, producing rarely chosen categories.
True coefficients are redrawn from the standard normal for every
replication by default, keyed by the replication's stream.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .baseline import mnl_mle
from .engine import IdcSettings, idc_fit
from .exceptions import DataError, IdmrError, ShapeError
from .executor import ExecutorConfig, parallel_map
from .glm import GlmSettings
from .inference import BootstrapSettings, bootstrap, wald_test
from .model import CountMatrix, CovariateMatrix, Dataset, ParamMatrix, sample_counts
from .rng import child_seed, stream

DGP_KINDS = ("a", "b", "c")

ESTIMATORS = ("idc-binomial", "idc-taddy", "idc-poisson", "mle")


@dataclass(frozen=True)
class DgpSpec:
    kind: str
    n: int
    d: int
    p: int
    seed: int = 0

    def __post_init__(self):
        if self.kind not in DGP_KINDS:
            raise DataError(f"unknown DGP kind {self.kind!r}; expected one of {DGP_KINDS}")
        if self.n < 1 or self.d < 2 or self.p < 1:
            raise DataError("DGP sizes must satisfy n >= 1, d >= 2, p >= 1")


@dataclass(frozen=True)
class SimDraw:
    data: Dataset
    theta_star: ParamMatrix


def _draw_covariates(spec: DgpSpec, rng: np.random.Generator) -> np.ndarray:
    V = np.ones((spec.n, spec.p))
    if spec.p > 1:
        if spec.kind == "c":
            means = np.where(rng.random((spec.n, spec.p - 1)) < 0.5, 0.0, 4.0)
            V[:, 1:] = rng.normal(means, 1.0)
        else:
            V[:, 1:] = rng.normal(size=(spec.n, spec.p - 1))
    return V


def draw_dgp(
    spec: DgpSpec, rng: np.random.Generator | None = None, theta_star: ParamMatrix | None = None
) -> SimDraw:
    """One synthetic dataset; identical spec and stream give identical output.

    Draw order is fixed: coefficients, covariates, totals, counts.
    """
    if rng is None:
        rng = stream(spec.seed)
    if theta_star is None:
        theta_star = ParamMatrix.from_free(rng.normal(size=(spec.d - 1, spec.p)))
    elif theta_star.d != spec.d or theta_star.p != spec.p:
        raise ShapeError("supplied theta_star does not match the DGP sizes")
    V = _draw_covariates(spec, rng)
    if spec.kind == "a":
        totals = rng.integers(20, 31, size=spec.n)
        counts = sample_counts(V, theta_star, totals, rng)
    elif spec.kind == "b":
        rates = np.exp(V @ theta_star.rows.T)
        counts = rng.poisson(rates).astype(np.int64)
        totals = counts.sum(axis=1)
    else:
        sigma = np.where(rng.random(spec.n) < 0.5, 1.0, 5.0)
        mean = np.where(sigma == 1.0, 10.0, 60.0)
        totals = np.maximum(np.rint(rng.normal(mean, sigma)), 1.0).astype(np.int64)
        counts = sample_counts(V, theta_star, totals, rng)
    data = Dataset(CountMatrix(counts, totals), CovariateMatrix(V))
    return SimDraw(data=data, theta_star=theta_star)


def mse(theta_hat: ParamMatrix, theta_star: ParamMatrix) -> float:
    """Mean squared error over the (d-1) p free coefficients."""
    if theta_hat.d != theta_star.d or theta_hat.p != theta_star.p:
        raise ShapeError(
            f"shapes differ: {theta_hat.d} x {theta_hat.p} vs {theta_star.d} x {theta_star.p}"
        )
    diff = theta_hat.free - theta_star.free
    return float(np.mean(diff * diff))


def fit_named_estimator(
    name: str, data: Dataset, s: int, glm: GlmSettings | None = None
) -> ParamMatrix:
    """Fit one of the named estimators with a fixed iteration budget.

    Iterative fits run exactly ``s`` steps (no early stopping), matching how
    the Monte-Carlo tables are produced; "mle" ignores ``s``.
    """
    if name == "mle":
        return mnl_mle(data).theta
    prefix = "idc-"
    if not name.startswith(prefix) or name[len(prefix) :] not in ("binomial", "taddy", "poisson"):
        raise IdmrError(f"unknown estimator {name!r}; expected one of {ESTIMATORS}")
    settings = IdcSettings(iterations=s, early_stop_tol=None, glm=glm or GlmSettings())
    return idc_fit(data, name[len(prefix) :], settings).theta


@dataclass(frozen=True)
class TableSpec:
    """Grid descriptor for an estimation experiment."""

    dgp: str = "a"
    estimators: tuple[str, ...] = ("idc-binomial",)
    s_values: tuple[int, ...] = (10,)
    d_values: tuple[int, ...] = (10,)
    n_values: tuple[int, ...] = (500,)
    p: int = 5
    reps: int = 100
    seed: int = 0
    redraw_theta: bool = True

    def cells(self):
        return list(product(self.estimators, self.s_values, self.d_values, self.n_values))


@dataclass(frozen=True)
class TableRow:
    dgp: str
    estimator: str
    s: int
    d: int
    n: int
    mse_mean: float
    time_mean: float
    reps: int


def run_table(spec: TableSpec, executor: ExecutorConfig | None = None) -> list[TableRow]:
    """Average error and wall time per grid cell over independent replications.

    Replication r of cell c uses the stream keyed by (seed, c, r), so every
    cell is reproducible in isolation.
    """
    for name in spec.estimators:
        if name not in ESTIMATORS:
            raise IdmrError(f"unknown estimator {name!r}; expected one of {ESTIMATORS}")
    rows = []
    for cell_index, (estimator, s, d, n) in enumerate(spec.cells()):
        dgp = DgpSpec(kind=spec.dgp, n=n, d=d, p=spec.p, seed=spec.seed)
        fixed_theta = None
        if not spec.redraw_theta:
            fixed_theta = ParamMatrix.from_free(
                stream(spec.seed, cell_index).normal(size=(d - 1, spec.p))
            )

        def one_rep(r: int, _cell=cell_index, _dgp=dgp, _est=estimator, _s=s):
            draw = draw_dgp(_dgp, stream(spec.seed, _cell, r), theta_star=fixed_theta)
            started = time.perf_counter()
            theta = fit_named_estimator(_est, draw.data, _s)
            elapsed = time.perf_counter() - started
            return mse(theta, draw.theta_star), elapsed

        outcomes = parallel_map(list(range(spec.reps)), one_rep, executor)
        errors = [e for e, _ in outcomes]
        times = [t for _, t in outcomes]
        rows.append(
            TableRow(
                dgp=spec.dgp,
                estimator=estimator,
                s=s,
                d=d,
                n=n,
                mse_mean=float(np.mean(errors)),
                time_mean=float(np.mean(times)),
                reps=spec.reps,
            )
        )
    return rows


@dataclass(frozen=True)
class BenchRow:
    d: int
    seconds: float


def run_bench(
    d_values,
    n: int = 500,
    p: int = 5,
    s: int = 10,
    init: str = "binomial",
    reps: int = 3,
    seed: int = 0,
    executor: ExecutorConfig | None = None,
) -> list[BenchRow]:
    """Mean seconds per fit at each choice-set size, on fresh synthetic data.

    The per-choice solves inside each fit fan out through the executor, so
    this measures the configuration the estimator actually runs with.
    """
    rows = []
    settings = IdcSettings(iterations=s, early_stop_tol=None)
    for d in d_values:
        dgp = DgpSpec(kind="a", n=n, d=int(d), p=p, seed=seed)
        elapsed = []
        for r in range(reps):
            draw = draw_dgp(dgp, stream(seed, int(d), r))
            started = time.perf_counter()
            idc_fit(draw.data, init, settings, executor)
            elapsed.append(time.perf_counter() - started)
        rows.append(BenchRow(d=int(d), seconds=float(np.mean(elapsed))))
    return rows


@dataclass(frozen=True)
class SizePowerSpec:
    """Descriptor for the test size and power experiment."""

    n: int = 250
    d: int = 20
    p: int = 5
    s: int = 10
    bootstrap_replicates: int = 200
    mc_reps: int = 300
    deviations: tuple[float, ...] = (0.0,)
    level: float = 0.05
    target: tuple[int, int] = (0, 0)
    seed: int = 0
    init: str = "binomial"


@dataclass(frozen=True)
class SizePowerRow:
    deviation: float
    rejection_rate: float
    reps: int


def run_size_power(
    spec: SizePowerSpec, executor: ExecutorConfig | None = None
) -> list[SizePowerRow]:
    """Rejection frequency of the bootstrap Wald test at each true deviation.

    For deviation delta, the targeted coefficient is set to delta (all other
    coefficients redrawn per replication) under the choice-model DGP at
    uniform totals; the null hypothesis pins it at zero.
    """
    k, j = spec.target
    if not (0 <= k < spec.d - 1 and 0 <= j < spec.p):
        raise ShapeError(f"target {spec.target} out of range")
    rows = []
    for dev_index, deviation in enumerate(spec.deviations):

        def one_rep(r: int, _dev_index=dev_index, _deviation=deviation):
            rng = stream(spec.seed, _dev_index, r)
            free = rng.normal(size=(spec.d - 1, spec.p))
            free[k, j] = _deviation
            dgp = DgpSpec(kind="a", n=spec.n, d=spec.d, p=spec.p, seed=spec.seed)
            draw = draw_dgp(dgp, rng, theta_star=ParamMatrix.from_free(free))
            settings = IdcSettings(iterations=spec.s, early_stop_tol=None)
            fit = idc_fit(draw.data, spec.init, settings, executor=None)
            boot = bootstrap(
                draw.data,
                fit.theta,
                BootstrapSettings(
                    replicates=spec.bootstrap_replicates,
                    idc=settings,
                    seed=child_seed(spec.seed, _dev_index, r, 1),
                ),
                executor=None,
            )
            _, reject = wald_test(
                fit.theta, boot, draw.data.n, spec.target, 0.0, spec.level
            )
            return bool(reject)

        rejects = parallel_map(list(range(spec.mc_reps)), one_rep, executor)
        rows.append(
            SizePowerRow(
                deviation=deviation,
                rejection_rate=float(np.mean(rejects)),
                reps=spec.mc_reps,
            )
        )
    return rows
