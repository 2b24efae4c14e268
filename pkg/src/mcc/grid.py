"""Spectral kernel: index sets, trigonometric moments, grid evaluation.

The periodic grid has ``N1 * N2`` points ``zeta_l`` with components
``exp(2j*pi*l_j/N_j)`` for ``0 <= l_j < N_j``.  The transform direction used
for moments carries the ``1/(N1*N2)`` factor together with the ``+i`` kernel
sign, i.e. ``c[k] = mean_l zeta_l^k * field[l]``.

Coefficient tables (moments and dual-polynomial coefficients) are stored on
the quadrant ``0 <= k_j <= n_j`` only; the remaining members of the full
index set ``|k_j| <= n_j`` are implied by the double-even symmetry
``c[k1, k2] == c[±k1, ±k2]`` that whole-sample mirroring guarantees for
every field in this pipeline.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from scipy import fft as _fft

# Imaginary residue above this (relative to the largest magnitude) signals a
# symmetry bug rather than FFT round-off.
IMAG_TOL = 1e-10


def fft_workers() -> int:
    """Worker count for the FFT backend; MCC_FFT_THREADS caps parallelism."""
    raw = os.environ.get("MCC_FFT_THREADS", "")
    try:
        value = int(raw)
    except ValueError:
        return 1
    return max(value, 1)


def _forward(values: np.ndarray) -> np.ndarray:
    # ifft2 carries both the 1/|N| factor and the +i kernel sign
    return _fft.ifft2(values, workers=fft_workers())


def _require_real(values: np.ndarray, context: str) -> np.ndarray:
    scale = float(np.abs(values).max()) if values.size else 0.0
    worst = float(np.abs(values.imag).max()) if values.size else 0.0
    if worst > IMAG_TOL * max(scale, np.finfo(float).tiny):
        raise ValueError(
            f"{context}: imaginary residue {worst:.3e} exceeds {IMAG_TOL:g} "
            f"of magnitude {scale:.3e}; input is not double-even"
        )
    return np.ascontiguousarray(values.real)


@dataclass(frozen=True)
class IndexSet:
    """Separable index set: all (k1, k2) with ``|k_j| <= n_j`` on an N1 x N2 grid.

    The bound ``2*n_j < N_j`` keeps distinct indices distinct after wrapping
    modulo the grid, which is what makes moment matching well posed.
    """

    n: tuple[int, int]
    N: tuple[int, int]

    def __post_init__(self):
        n = (int(self.n[0]), int(self.n[1]))
        dims = (int(self.N[0]), int(self.N[1]))
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "N", dims)
        for nj, Nj in zip(n, dims):
            if nj < 0:
                raise ValueError("index bound n must be nonnegative")
            if Nj < 1:
                raise ValueError("grid dimensions must be positive")
            if 2 * nj >= Nj:
                raise ValueError(f"index set too large for grid: need 2*{nj} < {Nj}")

    @property
    def quadrant_shape(self) -> tuple[int, int]:
        return (self.n[0] + 1, self.n[1] + 1)

    @property
    def grid_size(self) -> int:
        return self.N[0] * self.N[1]

    def multiplicity(self) -> np.ndarray:
        """How many full-set members each stored quadrant entry stands for.

        1 for (0,0), 2 on the axes, 4 in the interior.  The same weights are
        used by the dual objective, its gradient, and rate accounting.
        """
        m1 = np.where(np.arange(self.n[0] + 1) == 0, 1.0, 2.0)
        m2 = np.where(np.arange(self.n[1] + 1) == 0, 1.0, 2.0)
        return m1[:, None] * m2[None, :]


@dataclass(frozen=True)
class MomentSet:
    """Trigonometric moments of a positive double-even field, quadrant-stored."""

    coeffs: np.ndarray
    index_set: IndexSet

    def __post_init__(self):
        arr = np.asarray(self.coeffs, dtype=float)
        if arr.shape != self.index_set.quadrant_shape:
            raise ValueError(
                f"moment table shape {arr.shape} does not match quadrant "
                f"{self.index_set.quadrant_shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("moments must be finite")
        if arr[0, 0] <= 0.0:
            raise ValueError("c[0,0] must be positive (it is the mean of a positive field)")
        object.__setattr__(self, "coeffs", arr)


@dataclass(frozen=True)
class DualPolynomial:
    """Real double-even trigonometric polynomial, quadrant coefficients."""

    coeffs: np.ndarray
    index_set: IndexSet

    def __post_init__(self):
        arr = np.asarray(self.coeffs, dtype=float)
        if arr.shape != self.index_set.quadrant_shape:
            raise ValueError(
                f"coefficient shape {arr.shape} does not match quadrant "
                f"{self.index_set.quadrant_shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "coeffs", arr)


def _check_grid_dims(values: np.ndarray, index_set: IndexSet, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.shape != index_set.N:
        raise ValueError(f"{what} has shape {arr.shape}, expected grid {index_set.N}")
    return arr


def compute_moments(field: np.ndarray, index_set: IndexSet) -> MomentSet:
    """Moments ``c[k] = mean_l zeta_l^k * field[l]`` on the stored quadrant.

    Parameters
    ----------
    field : ndarray
        Real double-even values on the full ``N1 x N2`` grid.
    index_set : IndexSet
        Quadrant bounds; must match the field's grid.

    Returns
    -------
    MomentSet
        Real coefficients for ``0 <= k_j <= n_j``.  Double-evenness of the
        input is asserted: both through the imaginary residue of the spectrum
        and by comparing the quadrant against its reflected copies.
    """
    arr = _check_grid_dims(field, index_set, "field")
    spec = _forward(arr)
    full = _require_real(spec, "compute_moments")
    n1, n2 = index_set.n
    N1, N2 = index_set.N
    quad = full[: n1 + 1, : n2 + 1]
    i1 = np.arange(n1 + 1)
    i2 = np.arange(n2 + 1)
    scale = max(float(np.abs(full).max()), np.finfo(float).tiny)
    for mirrored in (
        full[np.ix_((-i1) % N1, i2)],
        full[np.ix_(i1, (-i2) % N2)],
    ):
        gap = float(np.abs(mirrored - quad).max())
        if gap > IMAG_TOL * scale:
            raise ValueError(
                f"compute_moments: quadrant symmetry violated by {gap:.3e}; "
                "field is not double-even"
            )
    return MomentSet(quad.copy(), index_set)


def truncate_to_index_set(values: np.ndarray, index_set: IndexSet) -> np.ndarray:
    """Project a real double-even grid function onto the stored quadrant.

    Same kernel as :func:`compute_moments` but returns a bare coefficient
    array; used for gradient and Hessian bookkeeping where the input is a
    weight field rather than a genuine moment source.
    """
    arr = _check_grid_dims(values, index_set, "grid function")
    spec = _forward(arr)
    full = _require_real(spec, "truncate_to_index_set")
    n1, n2 = index_set.n
    return full[: n1 + 1, : n2 + 1].copy()


def _evaluate_quadrant(coeffs: np.ndarray, index_set: IndexSet) -> np.ndarray:
    """Evaluate double-even coefficients on the grid (inverse direction, no 1/|N|)."""
    n1, n2 = index_set.n
    N1, N2 = index_set.N
    table = np.zeros((N1, N2))
    i1 = np.arange(n1 + 1)
    i2 = np.arange(n2 + 1)
    j1 = (-i1) % N1
    j2 = (-i2) % N2
    # the four reflected blocks share values, so plain assignment is exact
    table[np.ix_(i1, i2)] = coeffs
    table[np.ix_(j1, i2)] = coeffs
    table[np.ix_(i1, j2)] = coeffs
    table[np.ix_(j1, j2)] = coeffs
    values = _fft.ifft2(table, workers=fft_workers()) * (N1 * N2)
    return _require_real(values, "evaluate_on_grid")


def evaluate_on_grid(poly: DualPolynomial) -> np.ndarray:
    """Values of the polynomial at every grid point.

    Scaled so that a lone constant coefficient ``q[0,0]`` yields the constant
    ``q[0,0]`` on the grid.
    """
    return _evaluate_quadrant(poly.coeffs, poly.index_set)
