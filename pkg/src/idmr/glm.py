"""Damped-Newton solvers for the per-choice Poisson and binomial subproblems.

Each choice k of the separable objective contributes a p-dimensional Poisson
regression with a per-observation offset; the consistent initializer uses a
binomial logistic regression of choice k against the base category.  Both
objectives are convex, so Newton with step-halving on objective increase is
globally convergent away from degenerate data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import expit

from .exceptions import NumericError, ShapeError, SingularHessianError
from .model import MAX_EXP

# intercept clamp for choices whose count column is all zero: keeps the fitted
# probability at ~1e-13 without NaNs
CLAMP_INTERCEPT = -30.0

# coefficient magnitude beyond which a binomial fit is treated as separated
_SEPARATION_BOUND = 30.0


@dataclass(frozen=True)
class GlmSettings:
    """Inner-solver controls shared by all per-choice fits."""

    max_newton_iters: int = 50
    grad_tol: float = 1e-8
    step_halvings: int = 30

    def __post_init__(self):
        if self.max_newton_iters < 1:
            raise ShapeError("max_newton_iters must be >= 1")
        if not self.grad_tol > 0:
            raise ShapeError("grad_tol must be positive")
        if self.step_halvings < 0:
            raise ShapeError("step_halvings must be nonnegative")


@dataclass(frozen=True)
class GlmSolution:
    """Solution of one per-choice subproblem.

    ``converged`` implies ``final_grad_norm <= grad_tol``; a non-converged
    solution is a result, not an error, and carries a diagnostic message.
    """

    theta_k: np.ndarray
    iterations: int
    final_grad_norm: float
    converged: bool
    message: str = ""


def _check_glm_dims(counts_k, V, mu) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    counts_k = np.asarray(counts_k, dtype=np.float64)
    V = np.asarray(V, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    if V.ndim != 2:
        raise ShapeError(f"design matrix must be 2-dimensional, got shape {V.shape}")
    n = V.shape[0]
    if counts_k.shape != (n,):
        raise ShapeError(f"counts must have shape ({n},), got {counts_k.shape}")
    if mu.shape != (n,):
        raise ShapeError(f"offset must have shape ({n},), got {mu.shape}")
    return counts_k, V, mu


def q_kn(theta_k, counts_k, V, mu) -> float:
    """Per-choice Poisson objective sum_i [exp(V_i'th + mu_i) - C_ik (V_i'th + mu_i)]."""
    counts_k, V, mu = _check_glm_dims(counts_k, V, mu)
    theta_k = np.asarray(theta_k, dtype=np.float64)
    if theta_k.shape != (V.shape[1],):
        raise ShapeError(f"theta_k must have shape ({V.shape[1]},), got {theta_k.shape}")
    z = V @ theta_k + mu
    if z.max() > MAX_EXP:
        i = int(np.argmax(z))
        raise NumericError(f"exp overflow at observation {i}: linear index {z[i]:.3f}")
    return float(np.exp(z).sum() - counts_k @ z)


def _spd_factor(H: np.ndarray, choice: int | None, gate_eigenvalue: bool = True):
    """Cholesky factor of H, with a trace-scaled jitter retry.

    When ``gate_eigenvalue`` is set, a minimum eigenvalue below
    1e-12 * trace(H) is reported as singular before any jitter is tried.
    """
    try:
        return cho_factor(H, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        pass
    trace = float(np.trace(H))
    if gate_eigenvalue:
        min_eig = float(np.linalg.eigvalsh(H).min())
        if trace <= 0.0 or min_eig < 1e-12 * trace:
            raise SingularHessianError(
                f"Hessian numerically singular (min eigenvalue {min_eig:.3e}, "
                f"trace {trace:.3e})",
                choice=choice,
            )
    jitter = 1e-10 * max(trace, np.finfo(float).tiny)
    try:
        return cho_factor(H + jitter * np.eye(H.shape[0]), lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        raise SingularHessianError(
            f"Hessian factorization failed after jitter {jitter:.3e}", choice=choice
        ) from None


def _newton_minimize(x0, value_of, derivs_of, settings: GlmSettings, choice, guard=None):
    """Generic damped Newton loop.

    ``value_of(x) -> (value, cache)`` with value +inf on overflow;
    ``derivs_of(x, cache) -> (grad, hess)``; ``guard(x)`` may return a
    diagnostic message to stop with a non-converged result.
    """
    x = np.array(x0, dtype=np.float64, copy=True)
    val, cache = value_of(x)
    if not np.isfinite(val):
        raise NumericError("objective overflows at the starting point")
    for it in range(settings.max_newton_iters):
        grad, hess = derivs_of(x, cache)
        grad_norm = float(np.max(np.abs(grad)))
        if grad_norm <= settings.grad_tol:
            return GlmSolution(x, it, grad_norm, True)
        if guard is not None:
            message = guard(x, grad_norm)
            if message:
                return GlmSolution(x, it, grad_norm, False, message)
        factor = _spd_factor(hess, choice)
        step = -cho_solve(factor, grad, check_finite=False)
        # near the optimum the true decrease falls below the rounding noise of
        # the objective; the slack keeps quadratic convergence from stalling
        slack = 1e-12 * (abs(val) + 1.0)
        scale, accepted = 1.0, False
        for _ in range(settings.step_halvings + 1):
            trial = x + scale * step
            trial_val, trial_cache = value_of(trial)
            if trial_val <= val + slack:
                x, val, cache, accepted = trial, trial_val, trial_cache, True
                break
            scale *= 0.5
        if not accepted:
            return GlmSolution(x, it + 1, grad_norm, False, "no objective-decreasing step found")
    grad, _ = derivs_of(x, cache)
    grad_norm = float(np.max(np.abs(grad)))
    return GlmSolution(
        x,
        settings.max_newton_iters,
        grad_norm,
        grad_norm <= settings.grad_tol,
        "" if grad_norm <= settings.grad_tol else "maximum Newton iterations reached",
    )


def solve_poisson(
    counts_k, V, mu, init, settings: GlmSettings | None = None, choice: int | None = None
) -> GlmSolution:
    """Minimize the per-choice Poisson objective by damped Newton.

    The gradient is sum_i (exp(z_i) - C_ik) V_i and the Hessian
    sum_i exp(z_i) V_i V_i' with z = V theta + mu.  An all-zero count column
    has no minimizer (the intercept diverges to -inf); it is returned
    immediately with the intercept clamped at -30 and ``converged=False``.
    """
    if settings is None:
        settings = GlmSettings()
    counts_k, V, mu = _check_glm_dims(counts_k, V, mu)
    p = V.shape[1]
    init = np.asarray(init, dtype=np.float64)
    if init.shape != (p,):
        raise ShapeError(f"init must have shape ({p},), got {init.shape}")
    if counts_k.sum() == 0:
        clamped = np.zeros(p)
        clamped[0] = CLAMP_INTERCEPT
        return GlmSolution(
            clamped, 0, np.inf, False, "all counts zero for this choice; intercept clamped"
        )

    def value_of(x):
        z = V @ x + mu
        with np.errstate(over="ignore"):
            w = np.exp(z)
        total = w.sum()
        if not np.isfinite(total):
            return np.inf, None
        return float(total - counts_k @ z), w

    def derivs_of(x, w):
        grad = V.T @ (w - counts_k)
        hess = V.T @ (w[:, None] * V)
        return grad, hess

    return _newton_minimize(init, value_of, derivs_of, settings, choice)


def solve_binomial(
    counts_k, counts_d, V, init, settings: GlmSettings | None = None, choice: int | None = None
) -> GlmSolution:
    """Binomial logistic fit of choice k against the base category.

    Minimizes sum_i [N_ik log(1 + exp(V_i'th)) - C_ik V_i'th] with
    N_ik = C_ik + C_id.  Under perfect separation the gradient cannot
    vanish; diverging coefficients are reported as a non-converged result.
    """
    if settings is None:
        settings = GlmSettings()
    counts_k, V, _ = _check_glm_dims(counts_k, V, np.zeros(np.asarray(V).shape[0]))
    counts_d = np.asarray(counts_d, dtype=np.float64)
    if counts_d.shape != counts_k.shape:
        raise ShapeError("counts_k and counts_d must have the same shape")
    p = V.shape[1]
    init = np.asarray(init, dtype=np.float64)
    if init.shape != (p,):
        raise ShapeError(f"init must have shape ({p},), got {init.shape}")
    trials = counts_k + counts_d

    def value_of(x):
        eta = V @ x
        # log(1 + e^eta) without overflow
        val = float(trials @ np.logaddexp(0.0, eta) - counts_k @ eta)
        return val, eta

    def derivs_of(x, eta):
        prob = expit(eta)
        grad = V.T @ (trials * prob - counts_k)
        weight = trials * prob * (1.0 - prob)
        hess = V.T @ (weight[:, None] * V)
        return grad, hess

    def guard(x, grad_norm):
        if float(np.max(np.abs(x))) > _SEPARATION_BOUND:
            return (
                "coefficients diverging; the two choices are likely perfectly "
                "separated in the sample"
            )
        return None

    return _newton_minimize(init, value_of, derivs_of, settings, choice, guard=guard)
