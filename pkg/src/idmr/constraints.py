"""Equality constraints on coefficients and the constrained update machinery.

Two shapes are supported.  Within-choice ties force coordinates of a single
choice's coefficient vector to be equal and are handled by merging the tied
covariate columns, so each per-choice subproblem stays an unconstrained
Poisson regression of reduced dimension.  Across-choice ties force one
coordinate to be equal across a set of choices (optionally pinned to a known
value); each update step first solves the per-choice problems with the tied
coordinate frozen at its previous value, then solves a one-dimensional
problem for the shared coordinate and broadcasts it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConstraintError, SingularHessianError
from .glm import GlmSettings, GlmSolution, solve_poisson
from .model import MAX_EXP, Dataset


@dataclass(frozen=True)
class WithinTie:
    """Force theta[choice, j1] == theta[choice, j2] for each listed pair."""

    choice: int
    pairs: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class AcrossTie:
    """Force theta[k, coordinate] equal across the listed choices.

    With ``value`` set, the shared coordinate is pinned to that number
    instead of being estimated.
    """

    coordinate: int
    choices: tuple[int, ...]
    value: float | None = None


@dataclass(frozen=True)
class ConstraintSpec:
    within: tuple[WithinTie, ...] = ()
    across: tuple[AcrossTie, ...] = ()

    def is_empty(self) -> bool:
        return not self.within and not self.across

    def validate(self, d: int, p: int) -> "ConstraintSpec":
        """Check index ranges, merge overlapping across groups, detect conflicts.

        Returns a normalized spec whose across groups are disjoint.
        """
        for tie in self.within:
            if not 0 <= tie.choice < d - 1:
                raise ConstraintError(
                    f"within tie references choice {tie.choice}; the base choice "
                    f"{d - 1} and out-of-range indices are not allowed"
                )
            for j1, j2 in tie.pairs:
                for j in (j1, j2):
                    if not 0 <= j < p:
                        raise ConstraintError(f"within tie coordinate {j} out of range for p={p}")
                if j1 == j2:
                    raise ConstraintError(f"within tie ({j1}, {j2}) is degenerate")
        merged = _merge_across(self.across, d, p)
        tied = {(tie.choice, j) for tie in self.within for pair in tie.pairs for j in pair}
        for group in merged:
            for k in group.choices:
                if (k, group.coordinate) in tied:
                    raise ConstraintError(
                        f"coordinate {group.coordinate} of choice {k} appears in both a "
                        "within tie and an across tie"
                    )
        return ConstraintSpec(self.within, merged)


def _merge_across(across: tuple[AcrossTie, ...], d: int, p: int) -> tuple[AcrossTie, ...]:
    for tie in across:
        if not 0 <= tie.coordinate < p:
            raise ConstraintError(f"across tie coordinate {tie.coordinate} out of range for p={p}")
        if len(tie.choices) < 1:
            raise ConstraintError("across tie must reference at least one choice")
        for k in tie.choices:
            if not 0 <= k < d - 1:
                raise ConstraintError(
                    f"across tie references choice {k}; the base choice {d - 1} and "
                    "out-of-range indices are not allowed"
                )
        if tie.value is not None and not np.isfinite(tie.value):
            raise ConstraintError("pinned value must be finite")
    # union overlapping groups that tie the same coordinate
    merged: list[AcrossTie] = []
    for tie in across:
        absorbed = False
        for idx, other in enumerate(merged):
            if other.coordinate == tie.coordinate and set(other.choices) & set(tie.choices):
                pins = {v for v in (other.value, tie.value) if v is not None}
                if len(pins) > 1:
                    raise ConstraintError(
                        f"contradictory pinned values {sorted(pins)} for coordinate "
                        f"{tie.coordinate}"
                    )
                choices = tuple(sorted(set(other.choices) | set(tie.choices)))
                merged[idx] = AcrossTie(tie.coordinate, choices, pins.pop() if pins else None)
                absorbed = True
                break
        if not absorbed:
            merged.append(AcrossTie(tie.coordinate, tuple(sorted(set(tie.choices))), tie.value))
    return tuple(merged)


def _tie_groups(p: int, pairs: tuple[tuple[int, int], ...]) -> list[list[int]]:
    """Union-find over coordinates; returns groups ordered by smallest member."""
    parent = list(range(p))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for j1, j2 in pairs:
        r1, r2 = find(j1), find(j2)
        if r1 != r2:
            parent[max(r1, r2)] = min(r1, r2)
    groups: dict[int, list[int]] = {}
    for j in range(p):
        groups.setdefault(find(j), []).append(j)
    return [groups[r] for r in sorted(groups)]


def solve_poisson_reduced(
    counts_k,
    V,
    mu,
    pairs: tuple[tuple[int, int], ...] = (),
    fixed: dict[int, float] | None = None,
    init=None,
    settings: GlmSettings | None = None,
    choice: int | None = None,
) -> GlmSolution:
    """Poisson fit with tied and/or frozen coordinates.

    Tied coordinates are merged by summing their covariate columns; frozen
    coordinates are folded into the offset.  The returned coefficient vector
    is expanded back to full length and satisfies the ties and freezes
    exactly by construction.
    """
    if settings is None:
        settings = GlmSettings()
    V = np.asarray(V, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    p = V.shape[1]
    fixed = dict(fixed or {})
    init = np.zeros(p) if init is None else np.asarray(init, dtype=np.float64)
    for j in fixed:
        if any(j in pair for pair in pairs):
            raise ConstraintError(f"coordinate {j} is both tied and frozen")
    groups = [g for g in _tie_groups(p, tuple(pairs)) if g[0] not in fixed]
    groups = [[j for j in g if j not in fixed] for g in groups]
    groups = [g for g in groups if g]
    full = np.zeros(p)
    offset = mu
    if fixed:
        cols = sorted(fixed)
        vals = np.array([fixed[j] for j in cols])
        offset = mu + V[:, cols] @ vals
        full[cols] = vals
    if not groups:
        return GlmSolution(full, 0, 0.0, True, "all coordinates fixed")
    # 0/1 membership matrix mapping reduced coordinates to full ones
    T = np.zeros((p, len(groups)))
    for r, g in enumerate(groups):
        T[g, r] = 1.0
    reduced_init = np.array([init[g[0]] for g in groups])
    solution = solve_poisson(counts_k, V @ T, offset, reduced_init, settings, choice=choice)
    expanded = full + T @ solution.theta_k
    return GlmSolution(
        expanded, solution.iterations, solution.final_grad_norm, solution.converged,
        solution.message,
    )


def solve_poisson_within(
    counts_k, V, mu, pairs, init, settings: GlmSettings | None = None,
    choice: int | None = None,
) -> GlmSolution:
    """Poisson fit under within-choice equality of the listed coordinate pairs."""
    return solve_poisson_reduced(
        counts_k, V, mu, tuple(pairs), None, init, settings, choice=choice
    )


def solve_shared_coordinate(
    data: Dataset,
    theta_rows: np.ndarray,
    mu: np.ndarray,
    group: AcrossTie,
    start: float,
    settings: GlmSettings,
) -> float:
    """One-dimensional damped Newton for the coordinate shared across a group.

    Minimizes the sum of the group's per-choice Poisson objectives as a
    function of the single shared coordinate, all other coordinates held at
    their freshly updated values.
    """
    V = data.covariates.values
    vj = V[:, group.coordinate]
    bases = []
    counts = []
    for k in group.choices:
        row = theta_rows[k].copy()
        row[group.coordinate] = 0.0
        bases.append(V @ row + mu)
        counts.append(data.counts.counts[:, k].astype(np.float64))

    def value_and_weights(t: float):
        total, weights = 0.0, []
        for base, c in zip(bases, counts):
            z = base + t * vj
            if z.max() > MAX_EXP:
                return np.inf, None
            w = np.exp(z)
            total += float(w.sum() - c @ z)
            weights.append(w)
        return total, weights

    t = float(start)
    val, weights = value_and_weights(t)
    if weights is None:
        raise SingularHessianError("shared-coordinate objective overflows at the start")
    for _ in range(settings.max_newton_iters):
        grad = sum(float((w - c) @ vj) for w, c in zip(weights, counts))
        if abs(grad) <= settings.grad_tol:
            return t
        curv = sum(float(w @ (vj * vj)) for w in weights)
        if curv <= 0.0 or not np.isfinite(curv):
            raise SingularHessianError("shared-coordinate curvature vanished")
        step = -grad / curv
        slack = 1e-12 * (abs(val) + 1.0)
        scale, accepted = 1.0, False
        for _ in range(settings.step_halvings + 1):
            trial = t + scale * step
            trial_val, trial_weights = value_and_weights(trial)
            if trial_val <= val + slack:
                t, val, weights, accepted = trial, trial_val, trial_weights, True
                break
            scale *= 0.5
        if not accepted:
            return t
    return t
