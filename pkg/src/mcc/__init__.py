"""Grayscale image codec: trigonometric moments plus convex dual reconstruction.

Compression stores a small quadrant of trigonometric moments of the lifted,
mirrored image (optionally alongside low-rank factors); reconstruction solves
a smooth convex dual problem whose minimizer reproduces those moments
exactly, then undoes the lift.
"""

from .codec import (
    BudgetError,
    CandidateOutcome,
    CompressionError,
    CompressionResult,
    MissingPriorError,
    RateBudget,
    ReconstructionResult,
    compress_hybrid,
    compress_sweep_nu,
    hybrid_rate,
    max_rank,
    moments_only_rate,
    plan_budget,
    reconstruct,
    size_from_rate,
)
from .container import (
    PRIOR_EXTERNAL_REF,
    PRIOR_INLINE_SVD,
    PRIOR_UNIFORM,
    BadMagicError,
    ChecksumError,
    CompressedContainer,
    ContainerError,
    LengthMismatchError,
    NaNPayloadError,
    VersionMismatchError,
    deserialize,
    load_container,
    save_container,
    serialize,
)
from .divergence import (
    NU_INF,
    DualState,
    InfeasibleDualError,
    alpha_divergence,
    dual_gradient,
    dual_state,
    dual_value,
    hessian_apply,
    hessian_weight,
    normalize_nu,
    stationary_field,
    stationary_from_grid,
)
from .grid import (
    DualPolynomial,
    IndexSet,
    MomentSet,
    compute_moments,
    evaluate_on_grid,
    fft_workers,
    truncate_to_index_set,
)
from .image import (
    lift,
    load_image,
    mirror,
    psnr,
    save_image,
    symmetric_extension,
    unlift,
    validate_image,
)
from .priors import (
    SvdFactors,
    prior_from_factors,
    prior_from_image,
    prior_from_similar_image,
    svd_factors,
    uniform_prior,
)
from .solver import (
    DualityCertificate,
    SolveReport,
    SolverConfig,
    solve_dual,
    verify_duality,
)

__version__ = "0.1.0"
