"""Data model and likelihood evaluations for grouped multinomial-logit counts.

An observation ``i`` carries a vector of nonnegative counts over ``d``
choices summing to a total ``M_i``, together with a covariate vector of
length ``p`` whose first entry is the constant 1.  Choice ``d-1`` (the last
column) is the base category: its coefficient row is pinned to zero for
identification.  All likelihood arithmetic is in 64-bit floats; counts are
stored as 64-bit integers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .exceptions import DataError, NumericError, ShapeError

# exp() overflows float64 just above this exponent
MAX_EXP = 709.0


@dataclass(frozen=True)
class CountMatrix:
    """n x d nonnegative integer choice counts with per-observation totals."""

    counts: np.ndarray
    totals: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        totals = np.asarray(self.totals, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] < 1 or counts.shape[1] < 2:
            raise ShapeError(
                f"counts must be n x d with n >= 1 and d >= 2, got shape {counts.shape}"
            )
        if counts.min() < 0:
            i, k = np.argwhere(counts < 0)[0]
            raise DataError(f"negative count at observation {i}, choice {k}")
        if totals.shape != (counts.shape[0],):
            raise ShapeError("totals must have exactly one entry per observation")
        row_sums = counts.sum(axis=1)
        if not np.array_equal(row_sums, totals):
            i = int(np.nonzero(row_sums != totals)[0][0])
            raise DataError(f"totals[{i}] does not equal the row sum of counts")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "totals", totals)

    @classmethod
    def from_counts(cls, counts) -> "CountMatrix":
        """Build a CountMatrix computing totals as row sums."""
        counts = np.asarray(counts, dtype=np.int64)
        if counts.ndim != 2:
            raise ShapeError(f"counts must be 2-dimensional, got shape {counts.shape}")
        return cls(counts, counts.sum(axis=1))

    @property
    def n(self) -> int:
        return self.counts.shape[0]

    @property
    def d(self) -> int:
        return self.counts.shape[1]


@dataclass(frozen=True)
class CovariateMatrix:
    """n x p real design matrix whose first column is the constant 1."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[1] < 1:
            raise ShapeError(f"covariates must be n x p, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            i = int(np.argwhere(~np.isfinite(values))[0][0])
            raise DataError(f"non-finite covariate at observation {i}")
        if not np.all(values[:, 0] == 1.0):
            raise DataError("covariate column 0 must be identically 1 (the constant)")
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class ParamMatrix:
    """d x p coefficient matrix with the base row (last) identically zero."""

    rows: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[0] < 2:
            raise ShapeError(f"parameters must be d x p with d >= 2, got shape {rows.shape}")
        if not np.all(np.isfinite(rows)):
            raise DataError("parameter matrix contains non-finite entries")
        if np.any(rows[-1] != 0.0):
            raise DataError("base row (last) of the parameter matrix must be zero")
        object.__setattr__(self, "rows", rows)

    @classmethod
    def zeros(cls, d: int, p: int) -> "ParamMatrix":
        return cls(np.zeros((d, p)))

    @classmethod
    def from_free(cls, free: np.ndarray) -> "ParamMatrix":
        """Build from the (d-1) x p free rows, appending the zero base row."""
        free = np.asarray(free, dtype=np.float64)
        return cls(np.vstack([free, np.zeros((1, free.shape[1]))]))

    @property
    def d(self) -> int:
        return self.rows.shape[0]

    @property
    def p(self) -> int:
        return self.rows.shape[1]

    @property
    def free(self) -> np.ndarray:
        """The (d-1) x p rows excluding the base row."""
        return self.rows[:-1]

    def validate(self) -> None:
        """Re-check invariants (arrays are shared, not defensively copied)."""
        if not np.all(np.isfinite(self.rows)):
            raise DataError("parameter matrix contains non-finite entries")
        if np.any(self.rows[-1] != 0.0):
            raise DataError("base row (last) of the parameter matrix must be zero")


@dataclass(frozen=True)
class FixedEffects:
    """Length-n vector of per-observation log offsets."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise ShapeError(f"fixed effects must be a vector, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DataError("fixed effects contain non-finite entries")
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, n: int) -> "FixedEffects":
        return cls(np.zeros(n))

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class Dataset:
    """Counts and covariates for the same n observations."""

    counts: CountMatrix
    covariates: CovariateMatrix

    def __post_init__(self):
        if self.counts.n != self.covariates.n:
            raise ShapeError(
                f"counts have {self.counts.n} observations but covariates have "
                f"{self.covariates.n}"
            )

    @classmethod
    def from_arrays(cls, counts, covariates) -> "Dataset":
        return cls(CountMatrix.from_counts(counts), CovariateMatrix(covariates))

    @property
    def n(self) -> int:
        return self.counts.n

    @property
    def d(self) -> int:
        return self.counts.d

    @property
    def p(self) -> int:
        return self.covariates.p


def _check_theta(data: Dataset, theta: ParamMatrix) -> None:
    if theta.d != data.d or theta.p != data.p:
        raise ShapeError(
            f"parameter matrix is {theta.d} x {theta.p} but data need "
            f"{data.d} x {data.p}"
        )


def eta_matrix(data: Dataset, theta: ParamMatrix) -> np.ndarray:
    """All linear indices at once: the n x d matrix with entries V_i' theta_k."""
    _check_theta(data, theta)
    return data.covariates.values @ theta.rows.T


def linear_index(data: Dataset, theta: ParamMatrix, i: int) -> np.ndarray:
    """Linear index vector (V_i' theta_1, ..., V_i' theta_d) for observation i.

    The last entry is 0 whenever the base row is zero, which the
    ParamMatrix invariant guarantees.
    """
    _check_theta(data, theta)
    if not 0 <= i < data.n:
        raise ShapeError(f"observation index {i} out of range for n={data.n}")
    return theta.rows @ data.covariates.values[i]


def choice_probabilities(eta: np.ndarray) -> np.ndarray:
    """Stable softmax over the last axis with max subtraction."""
    eta = np.asarray(eta, dtype=np.float64)
    shifted = eta - eta.max(axis=-1, keepdims=True)
    w = np.exp(shifted)
    return w / w.sum(axis=-1, keepdims=True)


def mnl_log_pmf(c, v, theta: ParamMatrix, m: int) -> float:
    """Log probability mass of counts ``c`` at total ``m`` and covariates ``v``.

    Includes the multinomial coefficient, computed through log-gamma so that
    totals in the thousands stay representable.
    """
    c = np.asarray(c, dtype=np.int64)
    v = np.asarray(v, dtype=np.float64)
    if c.shape != (theta.d,) or v.shape != (theta.p,):
        raise ShapeError(
            f"expected counts of shape ({theta.d},) and covariates of shape "
            f"({theta.p},), got {c.shape} and {v.shape}"
        )
    if c.min() < 0:
        raise DataError("counts must be nonnegative")
    if int(c.sum()) != int(m):
        raise DataError(f"counts sum to {int(c.sum())} but the total is {int(m)}")
    eta = theta.rows @ v
    if not np.all(np.isfinite(eta)):
        raise NumericError("linear index is non-finite")
    coeff = gammaln(m + 1.0) - gammaln(c + 1.0).sum()
    return float(coeff + c @ (eta - logsumexp(eta)))


def mnl_sample(v, theta: ParamMatrix, m: int, rng: np.random.Generator) -> np.ndarray:
    """Multinomial draw of size ``m`` with cell probabilities softmax(V' theta).

    Identical ``rng`` state yields identical output.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (theta.p,):
        raise ShapeError(f"covariates must have shape ({theta.p},), got {v.shape}")
    if m < 0:
        raise DataError("total count must be nonnegative")
    probs = choice_probabilities(theta.rows @ v)
    return rng.multinomial(int(m), probs).astype(np.int64)


def sample_counts(
    covariates: np.ndarray, theta: ParamMatrix, totals: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Row-wise multinomial draws for a whole design matrix at once."""
    eta = np.asarray(covariates, dtype=np.float64) @ theta.rows.T
    probs = choice_probabilities(eta)
    return rng.multinomial(np.asarray(totals, dtype=np.int64), probs).astype(np.int64)


def loglik_conditional(data: Dataset, theta: ParamMatrix) -> float:
    """Conditional log-likelihood given covariates and totals, up to a constant.

    Returns sum_i [C_i' eta_i - M_i log sum_k exp(eta_ik)] with a
    max-subtracted log-sum-exp, stable for large linear indices.
    """
    eta = eta_matrix(data, theta)
    lse = logsumexp(eta, axis=1)
    value = float(np.sum(data.counts.counts * eta) - data.counts.totals @ lse)
    if not np.isfinite(value):
        raise NumericError("conditional log-likelihood is non-finite")
    return value


def loglik_with_mu(data: Dataset, theta: ParamMatrix, mu: FixedEffects) -> float:
    """Conditional log-likelihood with per-observation offsets added.

    Adding any offset vector leaves the value unchanged (each observation's
    counts sum to its total), so this equals :func:`loglik_conditional` up to
    floating-point roundoff.
    """
    eta = eta_matrix(data, theta)
    if mu.n != data.n:
        raise ShapeError(f"fixed effects have length {mu.n} but n={data.n}")
    z = eta + mu.values[:, None]
    lse = logsumexp(z, axis=1)
    value = float(np.sum(data.counts.counts * z) - data.counts.totals @ lse)
    if not np.isfinite(value):
        raise NumericError("offset log-likelihood is non-finite")
    return value


def quasi_loglik(data: Dataset, theta: ParamMatrix, mu: FixedEffects) -> float:
    """Poisson-form quasi-log-likelihood sum_ik [C_ik z_ik - exp(z_ik)].

    Here z_ik = V_i' theta_k + mu_i.  The separable estimation objective is
    the negation of this value.
    """
    eta = eta_matrix(data, theta)
    if mu.n != data.n:
        raise ShapeError(f"fixed effects have length {mu.n} but n={data.n}")
    z = eta + mu.values[:, None]
    zmax = z.max()
    if zmax > MAX_EXP:
        i, k = np.unravel_index(int(np.argmax(z)), z.shape)
        raise NumericError(
            f"exp overflow at observation {i}, choice {k}: linear index {z[i, k]:.3f}"
        )
    return float(np.sum(data.counts.counts * z) - np.exp(z).sum())
