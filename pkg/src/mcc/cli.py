"""Command-line front end: compress, hybrid, reconstruct, eval."""

from __future__ import annotations

import argparse
import math
import os
import sys
import time

from . import codec, report as report_mod
from .container import (
    PRIOR_EXTERNAL_REF,
    PRIOR_INLINE_SVD,
    ContainerError,
    load_container,
    save_container,
)
from .divergence import NU_INF, normalize_nu
from .grid import IndexSet
from .image import load_image, psnr, save_image
from .priors import prior_from_image, prior_from_similar_image
from .solver import SolverConfig, verify_duality


def _parse_nu_token(token: str):
    text = token.strip().lower()
    if text in ("inf", "infinity"):
        return NU_INF
    return normalize_nu(int(text))


def _parse_nu_list(raw: str):
    tokens = [t for t in raw.split(",") if t.strip()]
    if not tokens:
        raise ValueError("empty candidate list for --nu")
    return [_parse_nu_token(t) for t in tokens]


def _parse_quadrant(raw: str):
    parts = [p for p in raw.split(",") if p.strip()]
    if len(parts) == 1:
        n = int(parts[0])
        return (n, n)
    if len(parts) == 2:
        return (int(parts[0]), int(parts[1]))
    raise ValueError(f"--n expects one or two integers, got {raw!r}")


def _solver_config(args) -> SolverConfig:
    return SolverConfig(grad_tol=args.grad_tol, max_iter=args.max_iter)


def _fmt_psnr(value: float) -> str:
    return "inf" if math.isinf(value) else f"{value:.3f} dB"


def _print_outcomes(outcomes, chosen):
    for outcome in outcomes:
        status = "" if outcome.converged else "  [did not converge]"
        print(
            f"  {outcome.label}: PSNR={_fmt_psnr(outcome.psnr_db)}, "
            f"residual={outcome.residual:.2e}, iterations={outcome.iterations}, "
            f"{outcome.seconds:.2f}s{status}"
        )
    print(f"chosen: {chosen}")


def _print_certificate(cert):
    print(
        f"verify: moment residual={cert.moment_residual:.3e}, "
        f"min Q={cert.min_q:.6f}, divergence={cert.divergence:.3e}"
    )


def _load_prior_field(path: str, rank: int, dims):
    similar = load_image(path)
    if rank > 0:
        return prior_from_similar_image(similar, rank, dims)
    return prior_from_image(similar, dims)


def cmd_compress(args) -> int:
    started = time.perf_counter()
    image = load_image(args.input)
    p1, p2 = image.shape
    dims = (2 * (p1 - 1), 2 * (p2 - 1))
    if (args.cr is None) == (args.n is None):
        raise ValueError("pass exactly one of --cr or --n")
    if args.cr is not None:
        n1, n2 = codec.size_from_rate(args.cr, p1, p2, 0)
    else:
        n1, n2 = _parse_quadrant(args.n)
    index_set = IndexSet((n1, n2), dims)
    candidates = _parse_nu_list(args.nu)

    prior = None
    prior_ref = None
    if args.prior:
        prior = _load_prior_field(args.prior, args.prior_rank, dims)
        prior_ref = args.prior_name or os.path.splitext(os.path.basename(args.prior))[0]

    result = codec.compress_sweep_nu(
        image,
        index_set,
        candidates,
        prior=prior,
        prior_ref=prior_ref,
        prior_rank=args.prior_rank if prior is not None else 0,
        cfg=_solver_config(args),
        jobs=args.jobs,
    )
    save_container(args.out, result.container)
    achieved = codec.moments_only_rate(n1, n2, p1, p2)
    print(f"compressing {args.input} ({p1}x{p2}), quadrant n=({n1},{n2}), cr={achieved:.4f}")
    _print_outcomes(result.outcomes, result.chosen)
    size = os.path.getsize(args.out)
    print(f"wrote {args.out} ({size} bytes)")

    if args.verify:
        from .grid import MomentSet

        moments = MomentSet(result.container.moments, index_set)
        cert = verify_duality(result.chosen_poly, moments, result.prior, result.container.nu)
        _print_certificate(cert)
    if args.report:
        extra = {
            "image": {"p1": p1, "p2": p2},
            "sizing": {"n1": n1, "n2": n2, "cr": achieved, "mode": "moments-only"},
            "prior": {"mode": "external-ref" if prior is not None else "uniform",
                      "ref": prior_ref},
            "solver": {"grad_tol": args.grad_tol, "max_iter": args.max_iter},
            "total_seconds": round(time.perf_counter() - started, 6),
        }
        doc = report_mod.build_report(
            "compress", args.input, args.out, extra, result.outcomes, result.chosen
        )
        for path in report_mod.write_report_files(doc, args.report):
            print(f"report: {path}")
    return 0


def cmd_hybrid(args) -> int:
    started = time.perf_counter()
    image = load_image(args.input)
    p1, p2 = image.shape
    order = _parse_nu_token(args.nu)
    fixed_rank = None if args.r.strip().lower() == "sweep" else int(args.r)
    result = codec.compress_hybrid(
        image,
        args.cr,
        nu=order,
        r=fixed_rank,
        cfg=_solver_config(args),
        clamp=not args.no_clamp,
        jobs=args.jobs,
    )
    save_container(args.out, result.container)
    chosen = result.container
    achieved = codec.hybrid_rate(chosen.n1, chosen.n2, chosen.r, p1, p2)
    print(
        f"hybrid compressing {args.input} ({p1}x{p2}) at cr={args.cr} "
        f"with {result.chosen}, quadrant n=({chosen.n1},{chosen.n2}), "
        f"achieved cr={achieved:.4f}"
    )
    _print_outcomes(result.outcomes, result.chosen)
    size = os.path.getsize(args.out)
    print(f"wrote {args.out} ({size} bytes)")

    if args.verify:
        from .grid import MomentSet

        moments = MomentSet(chosen.moments, chosen.index_set)
        cert = verify_duality(result.chosen_poly, moments, result.prior, chosen.nu)
        _print_certificate(cert)
    if args.report:
        extra = {
            "image": {"p1": p1, "p2": p2},
            "sizing": {"n1": chosen.n1, "n2": chosen.n2, "r": chosen.r,
                       "cr": achieved, "mode": "hybrid"},
            "solver": {"grad_tol": args.grad_tol, "max_iter": args.max_iter},
            "total_seconds": round(time.perf_counter() - started, 6),
        }
        doc = report_mod.build_report(
            "hybrid", args.input, args.out, extra, result.outcomes, result.chosen
        )
        for path in report_mod.write_report_files(doc, args.report):
            print(f"report: {path}")
    return 0


def cmd_reconstruct(args) -> int:
    started = time.perf_counter()
    container = load_container(args.input)
    external = None
    if container.prior_mode == PRIOR_EXTERNAL_REF:
        if not args.prior:
            raise codec.MissingPriorError(container.prior_ref)
        external = _load_prior_field(args.prior, container.r, container.grid_dims)
    result = codec.reconstruct(
        container,
        external_prior=external,
        cfg=_solver_config(args),
        clamp=not args.no_clamp,
    )
    save_image(args.out, result.image)

    mode_text = {0: "uniform", 1: f"inline svd (r={container.r})",
                 2: f"external ref '{container.prior_ref}' (r={container.r})"}
    nu_text = "inf" if container.nu == NU_INF else str(container.nu)
    print(
        f"reconstructed {args.out} ({container.p1}x{container.p2}) "
        f"from n=({container.n1},{container.n2}), nu={nu_text}, "
        f"prior: {mode_text[container.prior_mode]}"
    )
    print(
        f"solver: {result.report.iterations} iterations, "
        f"residual={result.report.final_residual:.2e}, "
        f"converged={result.report.converged}"
    )
    if args.verify:
        from .grid import MomentSet

        moments = MomentSet(container.moments, container.index_set)
        cert = verify_duality(result.poly, moments, result.prior, container.nu)
        _print_certificate(cert)
    if args.report:
        extra = {
            "image": {"p1": container.p1, "p2": container.p2},
            "sizing": {"n1": container.n1, "n2": container.n2, "r": container.r},
            "nu": "inf" if container.nu == NU_INF else container.nu,
            "prior": {"mode": mode_text[container.prior_mode]},
            "solver_outcome": {
                "iterations": result.report.iterations,
                "residual": result.report.final_residual,
                "converged": result.report.converged,
            },
            "total_seconds": round(time.perf_counter() - started, 6),
        }
        doc = report_mod.build_report("reconstruct", args.input, args.out, extra)
        for path in report_mod.write_report_files(doc, args.report):
            print(f"report: {path}")
    if not result.report.converged:
        print("warning: solver did not converge; wrote best iterate", file=sys.stderr)
        return 1
    return 0


def cmd_eval(args) -> int:
    reference = load_image(args.reference)
    other = load_image(args.other)
    print(_fmt_psnr(psnr(reference, other)))
    return 0


def _add_solver_flags(parser):
    parser.add_argument("--grad-tol", type=float, default=1e-8,
                        help="moment residual declaring convergence")
    parser.add_argument("--max-iter", type=int, default=500,
                        help="Newton iteration cap")
    parser.add_argument("--verify", action="store_true",
                        help="print the duality certificate of the result")
    parser.add_argument("--report", metavar="PATH",
                        help="write a JSON run report (plus CSV/PNG for sweeps)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcc",
        description="Grayscale image codec: trigonometric moments with convex dual reconstruction",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    compress = sub.add_parser("compress", help="compress to moments, sweeping the order")
    compress.add_argument("--input", "-i", required=True)
    compress.add_argument("--out", "-o", required=True)
    compress.add_argument("--cr", type=float, help="compression ratio in (0,1)")
    compress.add_argument("--n", help="quadrant bound: N or N1,N2 (alternative to --cr)")
    compress.add_argument("--nu", default="1,inf",
                          help="comma-separated candidate orders, e.g. 1,2,inf")
    compress.add_argument("--prior", help="image whose content seeds the prior")
    compress.add_argument("--prior-rank", type=int, default=0,
                          help="rank for the prior image (0 = use as-is)")
    compress.add_argument("--prior-name",
                          help="reference name stored in the container (default: file stem)")
    compress.add_argument("--jobs", type=int, default=1, help="parallel candidate solves")
    _add_solver_flags(compress)
    compress.set_defaults(func=cmd_compress)

    hybrid = sub.add_parser("hybrid", help="compress with factor side information")
    hybrid.add_argument("--input", "-i", required=True)
    hybrid.add_argument("--out", "-o", required=True)
    hybrid.add_argument("--cr", type=float, required=True)
    hybrid.add_argument("--nu", default="inf", help="single order held fixed")
    hybrid.add_argument("--r", default="sweep",
                        help="factor rank, or 'sweep' to search all feasible ranks")
    hybrid.add_argument("--no-clamp", action="store_true",
                        help="skip clamping the factor product to [0,1]")
    hybrid.add_argument("--jobs", type=int, default=1, help="parallel candidate solves")
    _add_solver_flags(hybrid)
    hybrid.set_defaults(func=cmd_hybrid)

    reconstruct = sub.add_parser("reconstruct", help="rebuild the image a container describes")
    reconstruct.add_argument("--input", "-i", required=True)
    reconstruct.add_argument("--out", "-o", required=True)
    reconstruct.add_argument("--prior",
                             help="image for containers referencing an external prior")
    reconstruct.add_argument("--no-clamp", action="store_true",
                             help="skip clamping the factor product to [0,1]")
    _add_solver_flags(reconstruct)
    reconstruct.set_defaults(func=cmd_reconstruct)

    evaluate = sub.add_parser("eval", help="PSNR between two images")
    evaluate.add_argument("reference")
    evaluate.add_argument("other")
    evaluate.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
