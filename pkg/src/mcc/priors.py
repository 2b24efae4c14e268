"""Prior construction: uniform, low-rank SVD factors, similar-image priors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .image import lift, symmetric_extension, validate_image


@dataclass(frozen=True)
class SvdFactors:
    """Split low-rank factors; ``m1 @ m2`` approximates the source image.

    ``m1`` is (p1, r) and ``m2`` is (r, p2); singular values are split as
    square roots between the two so neither factor dominates numerically.
    Rank 0 is legal and stands for "no side information".
    """

    m1: np.ndarray
    m2: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.m1)
        b = np.asarray(self.m2)
        if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
            raise ValueError(f"factor shapes do not chain: {a.shape} @ {b.shape}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("factors must be finite")
        object.__setattr__(self, "m1", a)
        object.__setattr__(self, "m2", b)

    @property
    def rank(self) -> int:
        return self.m1.shape[1]

    def product(self) -> np.ndarray:
        return self.m1.astype(float) @ self.m2.astype(float)


def uniform_prior(dims: tuple[int, int]) -> np.ndarray:
    """The all-ones field: the no-information prior."""
    if len(dims) != 2 or dims[0] < 1 or dims[1] < 1:
        raise ValueError(f"bad grid dims {dims}")
    return np.ones(dims)


def svd_factors(image, rank: int) -> SvdFactors:
    """Best rank-``rank`` split factors of an image in the Frobenius sense."""
    arr = validate_image(image)
    limit = min(arr.shape)
    if not 1 <= rank <= limit:
        raise ValueError(f"rank must be in [1, {limit}], got {rank}")
    u, s, vt = np.linalg.svd(arr, full_matrices=False)
    root = np.sqrt(s[:rank])
    return SvdFactors(u[:, :rank] * root[None, :], root[:, None] * vt[:rank])


def prior_from_factors(factors: SvdFactors, dims: tuple[int, int], clamp: bool = True) -> np.ndarray:
    """Lifted mirrored prior from split factors.

    The factor product is clamped to [0, 1] before mirroring by default; pass
    ``clamp=False`` for the unclamped variant.  Rank-0 factors give back the
    uniform prior.
    """
    block = factors.product()
    if clamp:
        block = np.clip(block, 0.0, 1.0)
    field = lift(symmetric_extension(block))
    if field.shape != tuple(dims):
        raise ValueError(f"factors extend to grid {field.shape}, expected {tuple(dims)}")
    return field


def prior_from_image(image, dims: tuple[int, int]) -> np.ndarray:
    """Lifted mirrored prior from a full image (no rank reduction)."""
    field = lift(symmetric_extension(validate_image(image)))
    if field.shape != tuple(dims):
        raise ValueError(f"image extends to grid {field.shape}, expected {tuple(dims)}")
    return field


def prior_from_similar_image(similar, rank: int, dims: tuple[int, int]) -> np.ndarray:
    """Prior built from a rank-``rank`` approximation of a similar image."""
    return prior_from_factors(svd_factors(similar, rank), dims)
