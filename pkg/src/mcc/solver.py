"""Damped Newton solver for the moment-matching dual problem.

The dual objective is smooth and strictly convex on its feasible cone, so a
Newton direction from a matrix-free conjugate-gradient solve, guarded by an
Armijo backtracking line search (plus strict grid positivity for finite
orders), converges to the unique minimizer.  Convergence is declared on the
max-norm of the moment residual: the moments of the current stationary field
against the targets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .divergence import (
    NU_INF,
    InfeasibleDualError,
    _objective,
    _weight,
    alpha_divergence,
    hessian_apply,
    normalize_nu,
    stationary_from_grid,
)
from .grid import (
    DualPolynomial,
    MomentSet,
    _evaluate_quadrant,
    _forward,
    _require_real,
    evaluate_on_grid,
    truncate_to_index_set,
)

# accepted iterates must keep the polynomial at least this positive
_LINESEARCH_FLOOR = 1e-12
_MIN_STEP = 1e-16


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and limits for :func:`solve_dual`.

    grad_tol is the max-norm moment residual declaring convergence; cg_tol is
    relative to the Newton system's right-hand side; cg_max_iter defaults to
    the number of stored quadrant coefficients.
    """

    grad_tol: float = 1e-8
    max_iter: int = 500
    backtrack_ratio: float = 0.5
    armijo_c: float = 1e-4
    cg_tol: float = 1e-10
    cg_max_iter: int | None = None


@dataclass
class SolveReport:
    """Outcome of a dual solve; histories cover every evaluated iterate."""

    iterations: int
    final_residual: float
    final_dual_value: float
    converged: bool
    moment_residual_history: list[float] = field(default_factory=list)
    dual_value_history: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class DualityCertificate:
    """Diagnostics tying a dual iterate back to the primal problem."""

    moment_residual: float
    min_q: float
    divergence: float


def _jacobi_diagonal(weight: np.ndarray, index_set, mult: np.ndarray) -> np.ndarray:
    # Exact diagonal of the quadrant Hessian.  Expanding the double-even
    # basis products leaves only frequencies 0, 2*k1, 2*k2, and (2*k1, 2*k2),
    # all read off one transform of the weight field.
    spec = _require_real(_forward(weight), "hessian diagonal")
    n1, n2 = index_set.n
    N1, N2 = index_set.N
    k1 = np.arange(n1 + 1)
    k2 = np.arange(n2 + 1)
    row = spec[(2 * k1) % N1, 0]
    col = spec[0, (2 * k2) % N2]
    both = spec[np.ix_((2 * k1) % N1, (2 * k2) % N2)]
    diag = np.full((n1 + 1, n2 + 1), spec[0, 0])
    diag += np.where(k1[:, None] > 0, row[:, None], 0.0)
    diag += np.where(k2[None, :] > 0, col[None, :], 0.0)
    diag += np.where((k1[:, None] > 0) & (k2[None, :] > 0), both, 0.0)
    diag *= mult
    floor = 1e-15 * max(float(diag.max()), np.finfo(float).tiny)
    return np.maximum(diag, floor)


def _pcg(apply_h, rhs, diag, rel_tol, max_iter):
    """Preconditioned conjugate gradient on quadrant arrays."""
    x = np.zeros_like(rhs)
    r = rhs.copy()
    rhs_norm = float(np.linalg.norm(rhs.ravel()))
    if rhs_norm == 0.0:
        return x
    z = r / diag
    p = z.copy()
    rz = float(np.sum(r * z))
    for _ in range(max_iter):
        if float(np.linalg.norm(r.ravel())) <= rel_tol * rhs_norm:
            break
        hp = apply_h(p)
        curvature = float(np.sum(p * hp))
        if not math.isfinite(curvature) or curvature <= 0.0:
            break  # numerically lost positive-definiteness; use progress so far
        alpha = rz / curvature
        x += alpha * p
        r -= alpha * hp
        z = r / diag
        rz_next = float(np.sum(r * z))
        p = z + (rz_next / rz) * p
        rz = rz_next
    return x


def solve_dual(
    moments: MomentSet,
    prior: np.ndarray,
    nu,
    cfg: SolverConfig | None = None,
    q_init: DualPolynomial | None = None,
):
    """Minimize the dual objective for the given moments, prior, and order.

    Parameters
    ----------
    moments : MomentSet
        Target moments on the stored quadrant.
    prior : ndarray
        Strictly positive double-even field on the full grid.
    nu : int or math.inf
        Divergence order.
    cfg : SolverConfig, optional
    q_init : DualPolynomial, optional
        Starting point; defaults to the constant polynomial whose stationary
        field already has the right mean.

    Returns
    -------
    (DualPolynomial, ndarray, SolveReport)
        The dual minimizer, its stationary field, and the run report.
        Non-convergence is a soft failure: the report says so and the best
        iterate is returned.
    """
    cfg = cfg or SolverConfig()
    order = normalize_nu(nu)
    index_set = moments.index_set
    psi = np.asarray(prior, dtype=float)
    if psi.shape != index_set.N:
        raise ValueError(f"prior shape {psi.shape} does not match grid {index_set.N}")
    if psi.min() <= 0.0 or not np.all(np.isfinite(psi)):
        raise ValueError("prior must be strictly positive and finite")

    targets = moments.coeffs
    mult = index_set.multiplicity()
    quad_count = targets.size

    if q_init is None:
        coeffs = np.zeros(index_set.quadrant_shape)
        prior_mean = float(psi.mean())
        if order == NU_INF:
            coeffs[0, 0] = math.log(prior_mean / targets[0, 0])
        else:
            coeffs[0, 0] = (prior_mean / targets[0, 0]) ** (1.0 / order)
    else:
        if q_init.index_set != index_set:
            raise ValueError("q_init disagrees with the moment index set")
        coeffs = np.array(q_init.coeffs, dtype=float, copy=True)

    q_grid = _evaluate_quadrant(coeffs, index_set)
    if order != NU_INF and float(q_grid.min()) <= _LINESEARCH_FLOOR:
        raise InfeasibleDualError("initial dual polynomial is not strictly positive")

    residual_history: list[float] = []
    value_history: list[float] = []
    converged = False
    steps = 0
    residual = math.inf
    value = math.inf

    for _ in range(cfg.max_iter + 1):
        current_field = stationary_from_grid(q_grid, psi, order)
        current = truncate_to_index_set(current_field, index_set)
        residual = float(np.abs(targets - current).max())
        value = _objective(coeffs, q_grid, psi, targets, mult, order)
        residual_history.append(residual)
        value_history.append(value)
        if residual <= cfg.grad_tol:
            converged = True
            break
        if steps >= cfg.max_iter:
            break

        gradient = mult * (targets - current)
        weight = _weight(q_grid, psi, order)
        diag = _jacobi_diagonal(weight, index_set, mult)
        direction = _pcg(
            lambda v: hessian_apply(weight, v, index_set),
            -gradient,
            diag,
            cfg.cg_tol,
            cfg.cg_max_iter or quad_count,
        )
        slope = float(np.sum(gradient * direction))
        if not math.isfinite(slope) or slope >= 0.0:
            # fall back to preconditioned steepest descent
            direction = -gradient / diag
            slope = float(np.sum(gradient * direction))
            if slope >= 0.0:
                break

        direction_grid = _evaluate_quadrant(direction, index_set)
        step = 1.0
        accepted = False
        while step >= _MIN_STEP:
            trial_grid = q_grid + step * direction_grid
            if order != NU_INF and float(trial_grid.min()) < _LINESEARCH_FLOOR:
                step *= cfg.backtrack_ratio
                continue
            trial_coeffs = coeffs + step * direction
            trial_value = _objective(trial_coeffs, trial_grid, psi, targets, mult, order)
            if trial_value <= value + cfg.armijo_c * step * slope:
                coeffs = trial_coeffs
                q_grid = trial_grid
                accepted = True
                break
            step *= cfg.backtrack_ratio
        if not accepted:
            break  # stalled; report the best iterate found so far
        steps += 1

    poly = DualPolynomial(coeffs, index_set)
    final_field = stationary_from_grid(q_grid, psi, order)
    report = SolveReport(
        iterations=steps,
        final_residual=residual,
        final_dual_value=value,
        converged=converged,
        moment_residual_history=residual_history,
        dual_value_history=value_history,
    )
    return poly, final_field, report


def verify_duality(poly: DualPolynomial, moments: MomentSet, prior: np.ndarray, nu) -> DualityCertificate:
    """Independent check of a dual iterate: residual, positivity margin, divergence."""
    order = normalize_nu(nu)
    if poly.index_set != moments.index_set:
        raise ValueError("polynomial and moments disagree on the index set")
    psi = np.asarray(prior, dtype=float)
    q_grid = evaluate_on_grid(poly)
    reconstruction = stationary_from_grid(q_grid, psi, order)
    current = truncate_to_index_set(reconstruction, poly.index_set)
    residual = float(np.abs(moments.coeffs - current).max())
    return DualityCertificate(
        moment_residual=residual,
        min_q=float(q_grid.min()),
        divergence=alpha_divergence(reconstruction, psi, order),
    )
