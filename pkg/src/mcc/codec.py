"""Compression sweeps, reconstruction, and rate arithmetic.

Rates are quoted as the fraction of pixel storage saved.  A hybrid budget at
compression ratio ``cr`` spends ``(p1 + p2) * r`` numbers on split factors
and ``(n1 + 1) * (n2 + 1)`` on moments, so for square quadrants

    n = round(sqrt((1 - cr) * p1 * p2 - (p1 + p2) * r))

with round-half-away-from-zero.  The moments-only bookkeeping additionally
counts one slot for the stored order.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .container import (
    PRIOR_EXTERNAL_REF,
    PRIOR_INLINE_SVD,
    PRIOR_UNIFORM,
    CompressedContainer,
)
from .divergence import NU_INF, normalize_nu
from .grid import DualPolynomial, IndexSet, MomentSet, compute_moments
from .image import lift, mirror, psnr, unlift, validate_image
from .priors import SvdFactors, prior_from_factors, svd_factors, uniform_prior
from .solver import SolveReport, SolverConfig, solve_dual


class BudgetError(ValueError):
    """The requested compression ratio cannot be met on this image."""


class CompressionError(RuntimeError):
    """No sweep candidate produced a usable reconstruction."""


class MissingPriorError(ValueError):
    """The container references an external prior that was not supplied."""

    def __init__(self, ref: str):
        super().__init__(
            f"container references external prior '{ref}'; supply that image to reconstruct"
        )
        self.ref = ref


def _round_half_away(value: float) -> int:
    return int(math.floor(value + 0.5))


def moments_only_rate(n1: int, n2: int, p1: int, p2: int) -> float:
    """Saved fraction when storing the moment quadrant plus the order slot."""
    return 1.0 - ((n1 + 1) * (n2 + 1) + 1) / (p1 * p2)


def hybrid_rate(n1: int, n2: int, r: int, p1: int, p2: int) -> float:
    """Saved fraction when storing split factors of rank r plus the quadrant."""
    return 1.0 - ((p1 + p2) * r + (n1 + 1) * (n2 + 1)) / (p1 * p2)


def size_from_rate(cr: float, p1: int, p2: int, r: int = 0) -> tuple[int, int]:
    """Square quadrant bounds meeting a compression ratio at factor rank r."""
    if not 0.0 < cr < 1.0:
        raise BudgetError(f"compression ratio must be in (0, 1), got {cr}")
    if r < 0:
        raise BudgetError(f"rank must be nonnegative, got {r}")
    radicand = (1.0 - cr) * p1 * p2 - (p1 + p2) * r
    if radicand < 0.0:
        raise BudgetError(
            f"rank {r} leaves no moment budget at cr={cr} on a {p1}x{p2} image"
        )
    n = _round_half_away(math.sqrt(radicand))
    N1, N2 = 2 * (p1 - 1), 2 * (p2 - 1)
    if 2 * n >= N1 or 2 * n >= N2:
        raise BudgetError(
            f"cr={cr} asks for quadrant bound {n}, too large for grid {N1}x{N2}"
        )
    return (n, n)


def max_rank(cr: float, p1: int, p2: int) -> int:
    """Largest factor rank leaving a nonnegative moment budget."""
    if not 0.0 < cr < 1.0:
        raise BudgetError(f"compression ratio must be in (0, 1), got {cr}")
    bound = (1.0 - cr) * p1 * p2 / (p1 + p2)
    return min(int(math.floor(bound)), min(p1, p2))


@dataclass(frozen=True)
class RateBudget:
    """A sizing decision and the arithmetic identity it must satisfy."""

    cr: float
    p1: int
    p2: int
    r: int
    n1: int
    n2: int

    def achieved_hybrid_rate(self) -> float:
        return hybrid_rate(self.n1, self.n2, self.r, self.p1, self.p2)


def plan_budget(cr: float, p1: int, p2: int, r: int = 0) -> RateBudget:
    n1, n2 = size_from_rate(cr, p1, p2, r)
    return RateBudget(cr=cr, p1=p1, p2=p2, r=r, n1=n1, n2=n2)


@dataclass
class CandidateOutcome:
    """One swept configuration, scored against the original."""

    label: str
    nu: int | float
    r: int
    n1: int
    n2: int
    psnr_db: float
    residual: float
    iterations: int
    converged: bool
    seconds: float


@dataclass
class CompressionResult:
    container: CompressedContainer
    outcomes: list[CandidateOutcome]
    chosen: str
    chosen_poly: DualPolynomial
    prior: np.ndarray


@dataclass
class ReconstructionResult:
    image: np.ndarray
    field: np.ndarray
    poly: DualPolynomial
    report: SolveReport
    prior: np.ndarray


def _run_candidates(workers, jobs):
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(lambda fn: fn(), workers))
    return [fn() for fn in workers]


def _select(outcomes: list[CandidateOutcome]) -> int:
    best = -1
    for i, outcome in enumerate(outcomes):
        if not outcome.converged:
            continue
        if best < 0 or outcome.psnr_db > outcomes[best].psnr_db:
            best = i
    if best < 0:
        raise CompressionError("no sweep candidate converged")
    return best


def compress_sweep_nu(
    image,
    index_set: IndexSet,
    candidates,
    prior: np.ndarray | None = None,
    prior_ref: str | None = None,
    prior_rank: int = 0,
    cfg: SolverConfig | None = None,
    jobs: int = 1,
) -> CompressionResult:
    """Compress to moments, sweeping the divergence order.

    Every candidate order is solved against the same moments and scored by
    PSNR against the original; the best score wins, ties to the earlier
    candidate.  A non-uniform prior must come with a ``prior_ref`` name since
    only the reference travels in the container.
    """
    arr = validate_image(image)
    p1, p2 = arr.shape
    if index_set.N != (2 * (p1 - 1), 2 * (p2 - 1)):
        raise ValueError(f"index set grid {index_set.N} does not match image {arr.shape}")
    orders = [normalize_nu(nu) for nu in candidates]
    if not orders:
        raise ValueError("candidate list must be non-empty")

    if prior is None:
        psi = uniform_prior(index_set.N)
        mode, ref = PRIOR_UNIFORM, None
    else:
        psi = np.asarray(prior, dtype=float)
        if psi.shape != index_set.N:
            raise ValueError(f"prior shape {psi.shape} does not match grid {index_set.N}")
        if not prior_ref:
            raise ValueError("a non-uniform prior needs a prior_ref name for the container")
        mode, ref = PRIOR_EXTERNAL_REF, prior_ref

    lifted = lift(mirror(arr))
    moments = compute_moments(lifted, index_set)

    def make_worker(order):
        def worker():
            start = time.perf_counter()
            poly, field, report = solve_dual(moments, psi, order, cfg)
            quality = psnr(arr, unlift(field)) if report.converged else -math.inf
            label = f"nu={'inf' if order == NU_INF else order}"
            outcome = CandidateOutcome(
                label=label,
                nu=order,
                r=prior_rank if mode == PRIOR_EXTERNAL_REF else 0,
                n1=index_set.n[0],
                n2=index_set.n[1],
                psnr_db=quality,
                residual=report.final_residual,
                iterations=report.iterations,
                converged=report.converged,
                seconds=time.perf_counter() - start,
            )
            return outcome, poly
        return worker

    results = _run_candidates([make_worker(order) for order in orders], jobs)
    outcomes = [outcome for outcome, _ in results]
    best = _select(outcomes)
    container = CompressedContainer(
        p1=p1,
        p2=p2,
        n1=index_set.n[0],
        n2=index_set.n[1],
        nu=outcomes[best].nu,
        prior_mode=mode,
        r=prior_rank if mode == PRIOR_EXTERNAL_REF else 0,
        moments=moments.coeffs,
        prior_ref=ref,
    )
    container.validate()
    return CompressionResult(
        container=container,
        outcomes=outcomes,
        chosen=outcomes[best].label,
        chosen_poly=results[best][1],
        prior=psi,
    )


def compress_hybrid(
    image,
    cr: float,
    nu=NU_INF,
    r: int | None = None,
    cfg: SolverConfig | None = None,
    clamp: bool = True,
    jobs: int = 1,
) -> CompressionResult:
    """Compress under a fixed budget, sweeping factor rank against moments.

    Each candidate rank trades factor storage against quadrant size at the
    same total budget; the divergence order stays fixed.  Factors are
    quantized to float32 before solving so the stored container reproduces
    exactly what was scored.
    """
    arr = validate_image(image)
    p1, p2 = arr.shape
    dims = (2 * (p1 - 1), 2 * (p2 - 1))
    order = normalize_nu(nu)
    if r is None:
        ranks = list(range(max_rank(cr, p1, p2) + 1))
    else:
        if r < 0 or r > min(p1, p2):
            raise BudgetError(f"rank {r} out of range for a {p1}x{p2} image")
        ranks = [r]
    mirrored = mirror(arr)
    lifted = lift(mirrored)

    def make_worker(rank):
        def worker():
            start = time.perf_counter()
            n1, n2 = size_from_rate(cr, p1, p2, rank)
            index_set = IndexSet((n1, n2), dims)
            if rank == 0:
                factors = None
                psi = uniform_prior(dims)
            else:
                exact = svd_factors(arr, rank)
                factors = SvdFactors(
                    exact.m1.astype(np.float32), exact.m2.astype(np.float32)
                )
                psi = prior_from_factors(factors, dims, clamp=clamp)
            moments = compute_moments(lifted, index_set)
            poly, field, report = solve_dual(moments, psi, order, cfg)
            quality = psnr(arr, unlift(field)) if report.converged else -math.inf
            outcome = CandidateOutcome(
                label=f"r={rank}",
                nu=order,
                r=rank,
                n1=n1,
                n2=n2,
                psnr_db=quality,
                residual=report.final_residual,
                iterations=report.iterations,
                converged=report.converged,
                seconds=time.perf_counter() - start,
            )
            return outcome, poly, moments, factors, psi
        return worker

    results = _run_candidates([make_worker(rank) for rank in ranks], jobs)
    outcomes = [entry[0] for entry in results]
    best = _select(outcomes)
    outcome, poly, moments, factors, psi = results[best]
    container = CompressedContainer(
        p1=p1,
        p2=p2,
        n1=outcome.n1,
        n2=outcome.n2,
        nu=order,
        prior_mode=PRIOR_UNIFORM if outcome.r == 0 else PRIOR_INLINE_SVD,
        r=outcome.r,
        moments=moments.coeffs,
        m1=None if factors is None else factors.m1,
        m2=None if factors is None else factors.m2,
    )
    container.validate()
    return CompressionResult(
        container=container,
        outcomes=outcomes,
        chosen=outcome.label,
        chosen_poly=poly,
        prior=psi,
    )


def reconstruct(
    container: CompressedContainer,
    external_prior: np.ndarray | None = None,
    cfg: SolverConfig | None = None,
    clamp: bool = True,
) -> ReconstructionResult:
    """Reconstruct the image a container describes.

    The prior is rebuilt from the container's own mode; an external-reference
    container needs the referenced field passed in.  Solver non-convergence
    is a soft failure surfaced in the report.
    """
    container.validate()
    index_set = container.index_set
    dims = container.grid_dims
    if container.prior_mode == PRIOR_UNIFORM:
        psi = uniform_prior(dims)
    elif container.prior_mode == PRIOR_INLINE_SVD:
        factors = SvdFactors(container.m1, container.m2)
        psi = prior_from_factors(factors, dims, clamp=clamp)
    else:
        if external_prior is None:
            raise MissingPriorError(container.prior_ref)
        psi = np.asarray(external_prior, dtype=float)
        if psi.shape != dims:
            raise ValueError(f"external prior shape {psi.shape} does not match grid {dims}")
    moments = MomentSet(container.moments, index_set)
    poly, field, report = solve_dual(moments, psi, container.nu, cfg)
    return ReconstructionResult(
        image=unlift(field),
        field=field,
        poly=poly,
        report=report,
        prior=psi,
    )
