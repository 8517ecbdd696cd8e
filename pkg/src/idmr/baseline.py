"""Full conditional maximum likelihood baseline and information diagnostics.

The baseline optimizes all (d-1)p free coefficients jointly by damped
Newton, which is tractable only for small choice sets; it exists as a
trusted oracle for the iterative fit.  The module also provides the sample
Fisher information and a spectral-norm diagnostic for local contraction of
the iteration map: values below 1 indicate that the own-coefficient
curvature dominates the cross dependence on the previous iterate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import logsumexp

from .exceptions import IdmrError, NumericError, ShapeError, SingularHessianError
from .glm import GlmSettings, _spd_factor
from .initializers import resolve_init
from .model import Dataset, ParamMatrix, choice_probabilities

DEFAULT_PARAM_CAP = 2000


@dataclass(frozen=True)
class MleResult:
    theta: ParamMatrix
    converged: bool
    iterations: int
    final_grad_norm: float


def _free_gradient(data: Dataset, probs: np.ndarray) -> np.ndarray:
    """Gradient of the negated log-likelihood over free rows, (d-1) x p."""
    weights = data.counts.totals[:, None] * probs[:, :-1] - data.counts.counts[:, :-1]
    return weights.T @ data.covariates.values


def _free_hessian(data: Dataset, probs: np.ndarray) -> np.ndarray:
    """Dense Hessian over the (d-1)p free coefficients.

    Block (k, l) is sum_i M_i pi_ik (1{k=l} - pi_il) V_i V_i'.
    """
    V = data.covariates.values
    M = data.counts.totals.astype(np.float64)
    d, p = probs.shape[1], V.shape[1]
    nfree = (d - 1) * p
    H = np.empty((nfree, nfree))
    for k in range(d - 1):
        for l in range(k, d - 1):
            if k == l:
                w = M * probs[:, k] * (1.0 - probs[:, k])
            else:
                w = -M * probs[:, k] * probs[:, l]
            block = V.T @ (w[:, None] * V)
            H[k * p : (k + 1) * p, l * p : (l + 1) * p] = block
            if l != k:
                H[l * p : (l + 1) * p, k * p : (k + 1) * p] = block.T
    return H


def mnl_mle(
    data: Dataset,
    init="zeros",
    settings: GlmSettings | None = None,
    param_cap: int = DEFAULT_PARAM_CAP,
) -> MleResult:
    """Joint damped-Newton minimization of the negated conditional log-likelihood.

    Guarded by ``param_cap`` on the free-parameter count: beyond it, each
    Newton solve is cubic in (d-1)p and the iterative fit should be used
    instead.
    """
    if settings is None:
        settings = GlmSettings(max_newton_iters=100)
    nfree = (data.d - 1) * data.p
    if nfree > param_cap:
        raise IdmrError(
            f"{nfree} free parameters exceed the cap {param_cap}; use the iterative "
            "fit for large choice sets"
        )
    theta0, _ = resolve_init(data, init, settings)
    x = theta0.free.ravel().copy()
    C = data.counts.counts
    M = data.counts.totals
    V = data.covariates.values

    def value_of(flat: np.ndarray):
        eta = V @ ParamMatrix.from_free(flat.reshape(data.d - 1, data.p)).rows.T
        lse = logsumexp(eta, axis=1)
        value = float(M @ lse - np.sum(C * eta))
        return value, eta

    val, eta = value_of(x)
    if not np.isfinite(val):
        raise NumericError("objective is non-finite at the starting point")
    iterations = 0
    for iterations in range(settings.max_newton_iters):
        probs = choice_probabilities(eta)
        grad = _free_gradient(data, probs).ravel()
        grad_norm = float(np.max(np.abs(grad)))
        if grad_norm <= settings.grad_tol:
            return MleResult(
                ParamMatrix.from_free(x.reshape(data.d - 1, data.p)), True, iterations, grad_norm
            )
        H = _free_hessian(data, probs)
        factor = _spd_factor(H, None, gate_eigenvalue=False)
        step = -cho_solve(factor, grad, check_finite=False)
        slack = 1e-12 * (abs(val) + 1.0)
        scale, accepted = 1.0, False
        for _ in range(settings.step_halvings + 1):
            trial = x + scale * step
            trial_val, trial_eta = value_of(trial)
            if trial_val <= val + slack:
                x, val, eta, accepted = trial, trial_val, trial_eta, True
                break
            scale *= 0.5
        if not accepted:
            break
    probs = choice_probabilities(eta)
    grad_norm = float(np.max(np.abs(_free_gradient(data, probs))))
    return MleResult(
        ParamMatrix.from_free(x.reshape(data.d - 1, data.p)),
        grad_norm <= settings.grad_tol,
        iterations + 1,
        grad_norm,
    )


def fisher_information(data: Dataset, theta: ParamMatrix) -> np.ndarray:
    """Sample Fisher information: 1/n times the free-coefficient Hessian."""
    if theta.d != data.d or theta.p != data.p:
        raise ShapeError(
            f"parameter matrix is {theta.d} x {theta.p} but data need {data.d} x {data.p}"
        )
    probs = choice_probabilities(data.covariates.values @ theta.rows.T)
    return _free_hessian(data, probs) / data.n


def _dominance_blocks(data: Dataset, theta: ParamMatrix):
    """Own-curvature diagonal blocks and cross-derivative blocks at (theta, theta).

    Own block k: 1/n sum_i M_i pi_ik V_i V_i'.  Cross block (k, m):
    -1/n sum_i M_i pi_ik pi_im V_i V_i'.  Restricted to free rows.
    """
    V = data.covariates.values
    M = data.counts.totals.astype(np.float64)
    probs = choice_probabilities(V @ theta.rows.T)
    n, dfree = data.n, data.d - 1
    own = []
    for k in range(dfree):
        w = M * probs[:, k]
        own.append(V.T @ (w[:, None] * V) / n)
    cross = np.empty((dfree, dfree), dtype=object)
    for k in range(dfree):
        for m in range(k, dfree):
            w = -M * probs[:, k] * probs[:, m]
            block = V.T @ (w[:, None] * V) / n
            cross[k, m] = block
            cross[m, k] = block
    return own, cross


def information_dominance_check(data: Dataset, theta: ParamMatrix) -> float:
    """Spectral norm of (own-curvature blocks)^-1 (cross-derivative blocks).

    A value below 1 supports local contraction of the update map at the
    supplied coefficients.  Computed by power iteration without
    materializing the full product.
    """
    if theta.d != data.d or theta.p != data.p:
        raise ShapeError(
            f"parameter matrix is {theta.d} x {theta.p} but data need {data.d} x {data.p}"
        )
    own, cross = _dominance_blocks(data, theta)
    dfree, p = data.d - 1, data.p
    factors = []
    for k, block in enumerate(own):
        try:
            factors.append(cho_factor(block, lower=True, check_finite=False))
        except np.linalg.LinAlgError:
            raise SingularHessianError(
                f"own-curvature block {k} is singular", choice=k
            ) from None

    def apply_cross(vec: np.ndarray) -> np.ndarray:
        parts = vec.reshape(dfree, p)
        out = np.zeros_like(parts)
        for k in range(dfree):
            acc = np.zeros(p)
            for m in range(dfree):
                acc += cross[k, m] @ parts[m]
            out[k] = acc
        return out.ravel()

    def apply_own_inverse(vec: np.ndarray) -> np.ndarray:
        parts = vec.reshape(dfree, p)
        out = np.empty_like(parts)
        for k in range(dfree):
            out[k] = cho_solve(factors[k], parts[k], check_finite=False)
        return out.ravel()

    def apply_b(vec: np.ndarray) -> np.ndarray:
        return apply_own_inverse(apply_cross(vec))

    def apply_bt(vec: np.ndarray) -> np.ndarray:
        # blocks are symmetric, so B' = cross . own^-1
        return apply_cross(apply_own_inverse(vec))

    size = dfree * p
    v = np.full(size, 1.0 / np.sqrt(size))
    sigma_sq = 0.0
    for _ in range(10_000):
        w = apply_bt(apply_b(v))
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0
        new_sigma_sq = float(v @ w)
        v = w / norm
        if abs(new_sigma_sq - sigma_sq) <= 1e-10 * max(new_sigma_sq, 1e-300):
            sigma_sq = new_sigma_sq
            break
        sigma_sq = new_sigma_sq
    return float(np.sqrt(max(sigma_sq, 0.0)))
