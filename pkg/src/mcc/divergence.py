"""Divergence family, dual objectives, and the dual-to-primal stationary map.

The family is indexed by an order ``nu`` that is either an integer >= 1 or
infinity.  Finite orders give divergences whose optimal reconstruction is
``prior / Q**nu`` for a strictly positive trigonometric polynomial ``Q``;
the infinite order gives ``prior * exp(-Q)`` with no positivity constraint.
Minimizing the matching dual objective over the polynomial's quadrant
coefficients reproduces the target moments exactly at the optimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import (
    DualPolynomial,
    IndexSet,
    MomentSet,
    _evaluate_quadrant,
    evaluate_on_grid,
    truncate_to_index_set,
)

NU_INF = math.inf

# Below this floor a finite-order dual point counts as infeasible rather than
# being evaluated; the solver's line search keeps iterates well above it.
Q_FLOOR = 1e-14


class InfeasibleDualError(ValueError):
    """A dual polynomial left the positive cone required for finite orders."""


def normalize_nu(value) -> int | float:
    """Coerce a divergence order to a canonical int >= 1 or ``math.inf``."""
    if isinstance(value, bool):
        raise ValueError("divergence order must be an integer >= 1 or infinity")
    if isinstance(value, (int, np.integer)):
        order = int(value)
    elif isinstance(value, float):
        if math.isinf(value) and value > 0:
            return NU_INF
        if value.is_integer():
            order = int(value)
        else:
            raise ValueError(f"divergence order must be integral or infinite, got {value}")
    else:
        raise ValueError(f"divergence order must be a number, got {type(value).__name__}")
    if order < 1:
        raise ValueError(f"divergence order must be >= 1, got {order}")
    return order


def _check_positive_pair(first, second) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(first, dtype=float)
    b = np.asarray(second, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"field shapes differ: {a.shape} vs {b.shape}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("fields must be finite")
    if a.min() <= 0.0 or b.min() <= 0.0:
        raise ValueError("fields must be strictly positive")
    return a, b


def _mean_generated(field: np.ndarray, prior: np.ndarray) -> float:
    # order-1 divergence of ``field`` from ``prior``: grid mean of
    # prior*log(prior/field) - prior + field
    return float(np.mean(prior * np.log(prior / field) - prior + field))


def alpha_divergence(field, prior, nu) -> float:
    """Divergence of ``field`` from ``prior`` at order ``nu``.

    Nonnegative, zero exactly when the fields coincide.  The infinite order
    is the order-1 divergence with its arguments swapped.
    """
    phi, psi = _check_positive_pair(field, prior)
    order = normalize_nu(nu)
    if order == NU_INF:
        return _mean_generated(psi, phi)
    if order == 1:
        return _mean_generated(phi, psi)
    ratio = (order - 1.0) / order
    term = (order**2 / (1.0 - order)) * phi**ratio * psi ** (1.0 / order)
    return float(np.mean(term + order * phi + order / (order - 1.0) * psi))


def stationary_from_grid(q_grid: np.ndarray, prior: np.ndarray, nu) -> np.ndarray:
    """Optimal reconstruction field for given dual values on the grid."""
    order = normalize_nu(nu)
    if order == NU_INF:
        with np.errstate(over="ignore"):
            return prior * np.exp(-q_grid)
    if float(q_grid.min()) <= Q_FLOOR:
        raise InfeasibleDualError(
            f"dual polynomial min {q_grid.min():.3e} is not strictly positive"
        )
    if order == 1:
        return prior / q_grid
    return prior / q_grid**order


def stationary_field(poly: DualPolynomial, prior, nu) -> np.ndarray:
    """Optimal reconstruction field for a dual polynomial (evaluates it first)."""
    psi = np.asarray(prior, dtype=float)
    if psi.shape != poly.index_set.N:
        raise ValueError(f"prior shape {psi.shape} does not match grid {poly.index_set.N}")
    return stationary_from_grid(evaluate_on_grid(poly), psi, nu)


@dataclass(frozen=True)
class DualState:
    """A dual iterate bundled with everything its objective needs.

    The grid evaluation of the polynomial is cached because value, gradient,
    and Hessian weight all reuse it.
    """

    poly: DualPolynomial
    q_grid: np.ndarray
    prior: np.ndarray
    moments: MomentSet
    nu: int | float


def dual_state(poly: DualPolynomial, prior, moments: MomentSet, nu) -> DualState:
    order = normalize_nu(nu)
    if poly.index_set != moments.index_set:
        raise ValueError("polynomial and moments disagree on the index set")
    psi = np.asarray(prior, dtype=float)
    if psi.shape != poly.index_set.N:
        raise ValueError(f"prior shape {psi.shape} does not match grid {poly.index_set.N}")
    if psi.min() <= 0.0 or not np.all(np.isfinite(psi)):
        raise ValueError("prior must be strictly positive and finite")
    q_grid = evaluate_on_grid(poly)
    if order != NU_INF and float(q_grid.min()) <= Q_FLOOR:
        raise InfeasibleDualError(
            f"dual polynomial min {q_grid.min():.3e} is not strictly positive"
        )
    return DualState(poly=poly, q_grid=q_grid, prior=psi, moments=moments, nu=order)


def _objective(q_coeffs, q_grid, prior, c_coeffs, mult, nu) -> float:
    """Dual objective from raw parts; +inf signals an infeasible trial point."""
    linear = float(np.sum(mult * q_coeffs * c_coeffs))
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        if nu == NU_INF:
            integrand = prior * np.exp(-q_grid)
        elif nu == 1:
            integrand = prior * np.log(prior / q_grid)
        else:
            integrand = prior / ((nu - 1.0) * q_grid ** (nu - 1.0))
        value = float(np.mean(integrand)) + linear
    if math.isnan(value):
        return math.inf
    return value


def _weight(q_grid, prior, nu) -> np.ndarray:
    """Grid weight of the Hessian quadratic form (always strictly positive)."""
    if nu == NU_INF:
        with np.errstate(over="ignore"):
            return prior * np.exp(-q_grid)
    if float(q_grid.min()) <= Q_FLOOR:
        raise InfeasibleDualError(
            f"dual polynomial min {q_grid.min():.3e} is not strictly positive"
        )
    return nu * prior / q_grid ** (nu + 1)


def dual_value(state: DualState) -> float:
    """Dual objective: grid mean of the order's barrier plus the moment pairing.

    The pairing runs over the full index set, realized as the quadrant sum
    weighted by entry multiplicities (1, 2, or 4).
    """
    return _objective(
        state.poly.coeffs,
        state.q_grid,
        state.prior,
        state.moments.coeffs,
        state.poly.index_set.multiplicity(),
        state.nu,
    )


def dual_gradient(state: DualState) -> np.ndarray:
    """Gradient on the stored quadrant: multiplicity * (targets - current moments).

    Zero exactly when the stationary field reproduces the target moments.
    """
    current = truncate_to_index_set(
        stationary_from_grid(state.q_grid, state.prior, state.nu), state.poly.index_set
    )
    mult = state.poly.index_set.multiplicity()
    return mult * (state.moments.coeffs - current)


def hessian_weight(state: DualState) -> np.ndarray:
    """Grid weight W of the Hessian quadratic form mean(W * dQ**2)."""
    return _weight(state.q_grid, state.prior, state.nu)


def hessian_apply(weight: np.ndarray, delta: np.ndarray, index_set: IndexSet) -> np.ndarray:
    """Hessian-vector product on quadrant coefficients.

    Evaluates the perturbation on the grid, multiplies by the weight field,
    and projects back, with the same multiplicity bookkeeping as the
    gradient; matches finite differences of :func:`dual_gradient`.
    """
    perturbation = _evaluate_quadrant(np.asarray(delta, dtype=float), index_set)
    return index_set.multiplicity() * truncate_to_index_set(weight * perturbation, index_set)
