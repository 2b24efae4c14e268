"""Shared test oracles: direct summations and brute-force primal solves.

Everything here recomputes results by definitions (literal loops, library
constrained optimizers), independent of the package's FFT/Newton paths.
"""

import math
import warnings

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, minimize

from mcc import IndexSet, compute_moments


def fold_index(i: int, size: int) -> int:
    j = i % size
    return j if j <= size // 2 else size - j


def random_double_even_field(rng, dims, low=0.5, high=2.0):
    """Random strictly positive double-even field (dims must be even)."""
    N1, N2 = dims
    assert N1 % 2 == 0 and N2 % 2 == 0
    block = rng.uniform(low, high, size=(N1 // 2 + 1, N2 // 2 + 1))
    fold1 = [fold_index(i, N1) for i in range(N1)]
    fold2 = [fold_index(j, N2) for j in range(N2)]
    return block[np.ix_(fold1, fold2)]


def smooth_image(rng, shape):
    """A gently varying test image away from the [0, 1] boundary."""
    rows = np.linspace(0.0, 1.0, shape[0])[:, None]
    cols = np.linspace(0.0, 1.0, shape[1])[None, :]
    base = 0.5 + 0.2 * np.sin(2.0 * np.pi * rows) * np.cos(np.pi * cols)
    return np.clip(base + 0.05 * rng.standard_normal(shape), 0.05, 0.95)


def moments_direct(field, index_set):
    """Literal double-sum moments; the FFT-free reference."""
    (n1, n2), (N1, N2) = index_set.n, index_set.N
    out = np.zeros((n1 + 1, n2 + 1))
    for k1 in range(n1 + 1):
        for k2 in range(n2 + 1):
            acc = 0.0 + 0.0j
            for l1 in range(N1):
                for l2 in range(N2):
                    acc += np.exp(2j * np.pi * (k1 * l1 / N1 + k2 * l2 / N2)) * field[l1, l2]
            out[k1, k2] = acc.real / (N1 * N2)
    return out


def poly_eval_direct(coeffs, index_set):
    """Literal evaluation of double-even coefficients over the full index set."""
    (n1, n2), (N1, N2) = index_set.n, index_set.N
    out = np.zeros((N1, N2))
    for l1 in range(N1):
        for l2 in range(N2):
            acc = 0.0 + 0.0j
            for k1 in range(-n1, n1 + 1):
                for k2 in range(-n2, n2 + 1):
                    acc += coeffs[abs(k1), abs(k2)] * np.exp(
                        2j * np.pi * (k1 * l1 / N1 + k2 * l2 / N2)
                    )
            out[l1, l2] = acc.real
    return out


def random_feasible_coeffs(rng, index_set, base=(0.8, 1.6), spread=0.25, floor=0.05):
    """Quadrant coefficients whose polynomial stays above ``floor`` on the grid.

    Finite-difference oracles need a generous floor: near-zero polynomial
    values inflate the higher derivatives and the truncation error of the
    difference quotient along with them.
    """
    from mcc import DualPolynomial, evaluate_on_grid

    coeffs = np.zeros(index_set.quadrant_shape)
    coeffs[0, 0] = rng.uniform(*base)
    others = rng.uniform(-spread, spread, size=coeffs.shape)
    others[0, 0] = 0.0
    scale = 1.0
    for _ in range(60):
        trial = coeffs + scale * others
        values = evaluate_on_grid(DualPolynomial(trial, index_set))
        if values.min() > floor:
            return trial
        scale *= 0.5
    return coeffs


def divergence_direct(field, prior, nu):
    """Literal per-point divergence summation."""
    total = 0.0
    for phi, psi in zip(np.ravel(field), np.ravel(prior)):
        if nu == math.inf:
            total += phi * math.log(phi / psi) - phi + psi
        elif nu == 1:
            total += psi * math.log(psi / phi) - psi + phi
        else:
            ratio = (nu - 1.0) / nu
            total += (
                nu**2 / (1.0 - nu) * phi**ratio * psi ** (1.0 / nu)
                + nu * phi
                + nu / (nu - 1.0) * psi
            )
    return total / np.asarray(field).size


def moment_constraint_system(index_set, coeffs):
    """Linear equality system pinning every full-set moment of a grid field."""
    (n1, n2), (N1, N2) = index_set.n, index_set.N
    l1, l2 = np.meshgrid(np.arange(N1), np.arange(N2), indexing="ij")
    rows, rhs = [], []
    for k1 in range(-n1, n1 + 1):
        for k2 in range(-n2, n2 + 1):
            if k1 < 0 or (k1 == 0 and k2 < 0):
                continue  # conjugate pair already covered
            basis = np.exp(2j * np.pi * (k1 * l1 / N1 + k2 * l2 / N2)) / (N1 * N2)
            rows.append(basis.real.ravel())
            rhs.append(coeffs[abs(k1), abs(k2)])
            if (k1, k2) != (0, 0):
                rows.append(basis.imag.ravel())
                rhs.append(0.0)
    return np.array(rows), np.array(rhs)


def _constrained_minimize(objective, x0, A, rhs):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        result = minimize(
            objective,
            x0,
            jac=True,
            method="trust-constr",
            constraints=LinearConstraint(A, rhs, rhs),
            bounds=Bounds(1e-9, np.inf),
            options=dict(gtol=1e-12, xtol=1e-14, maxiter=3000),
        )
    return result


def primal_bruteforce(moments, prior, nu):
    """Constrained minimization of the divergence over all grid variables."""
    index_set = moments.index_set
    size = index_set.grid_size
    psi = np.asarray(prior, dtype=float).ravel()
    A, rhs = moment_constraint_system(index_set, moments.coeffs)

    def objective(x):
        if nu == math.inf:
            value = np.mean(x * np.log(x / psi) - x + psi)
            grad = np.log(x / psi) / size
        elif nu == 1:
            value = np.mean(psi * np.log(psi / x) - psi + x)
            grad = (1.0 - psi / x) / size
        else:
            ratio = (nu - 1.0) / nu
            value = np.mean(
                nu**2 / (1.0 - nu) * x**ratio * psi ** (1.0 / nu)
                + nu * x
                + nu / (nu - 1.0) * psi
            )
            grad = nu * (1.0 - (psi / x) ** (1.0 / nu)) / size
        return value, grad

    x0 = np.full(size, moments.coeffs[0, 0])
    result = _constrained_minimize(objective, x0, A, rhs)
    return result.x.reshape(index_set.N)


def entropy_bruteforce(moments):
    """Maximize the mean log of the field under the same moment constraints."""
    index_set = moments.index_set
    size = index_set.grid_size
    A, rhs = moment_constraint_system(index_set, moments.coeffs)

    def objective(x):
        return -np.mean(np.log(x)), -1.0 / (x * size)

    x0 = np.full(size, moments.coeffs[0, 0])
    result = _constrained_minimize(objective, x0, A, rhs)
    return result.x.reshape(index_set.N)


def moments_of(field, n):
    """Convenience: MomentSet of a field at square quadrant bound n."""
    dims = field.shape
    return compute_moments(field, IndexSet((n, n), dims))
