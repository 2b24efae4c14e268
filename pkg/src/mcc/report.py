"""Run reports: a JSON record plus a CSV table and a PSNR curve figure.

The JSON object is the machine-readable artifact; the CSV and PNG siblings
(same stem) carry the sweep table and its curve for quick inspection.
"""

from __future__ import annotations

import csv
import json
import math
import os

from .codec import CandidateOutcome


def _json_safe(value):
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    return value


def outcome_row(outcome: CandidateOutcome) -> dict:
    return {
        "label": outcome.label,
        "nu": _json_safe(outcome.nu),
        "r": outcome.r,
        "n1": outcome.n1,
        "n2": outcome.n2,
        "psnr_db": _json_safe(outcome.psnr_db),
        "residual": outcome.residual,
        "iterations": outcome.iterations,
        "converged": outcome.converged,
        "seconds": round(outcome.seconds, 6),
    }


def build_report(command: str, input_path: str, output_path: str, extra: dict,
                 outcomes: list[CandidateOutcome] | None = None,
                 chosen: str | None = None) -> dict:
    report = {"command": command, "input": input_path, "output": output_path}
    report.update(extra)
    if outcomes is not None:
        report["candidates"] = [outcome_row(o) for o in outcomes]
    if chosen is not None:
        report["chosen"] = chosen
    return report


def write_report_files(report: dict, json_path: str) -> list[str]:
    """Write the JSON report; sweep runs also get a CSV and a figure."""
    written = [json_path]
    with open(json_path, "w", encoding="utf-8") as handle:
        json.dump(report, handle, indent=2)
        handle.write("\n")
    candidates = report.get("candidates")
    if not candidates:
        return written
    stem, _ = os.path.splitext(json_path)

    csv_path = stem + ".csv"
    fields = ["label", "nu", "r", "n1", "n2", "psnr_db", "residual",
              "iterations", "converged", "seconds"]
    with open(csv_path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=fields)
        writer.writeheader()
        for row in candidates:
            writer.writerow({key: row[key] for key in fields})
    written.append(csv_path)

    figure_path = _write_figure(stem + ".png", candidates, report.get("chosen"))
    if figure_path:
        written.append(figure_path)
    return written


def _write_figure(path: str, candidates: list[dict], chosen: str | None) -> str | None:
    finite = [
        (i, row) for i, row in enumerate(candidates)
        if isinstance(row["psnr_db"], (int, float)) and math.isfinite(row["psnr_db"])
    ]
    if not finite:
        return None
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    xs = [i for i, _ in finite]
    ys = [row["psnr_db"] for _, row in finite]
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.plot(xs, ys, marker="o", lw=1.2, color="tab:blue")
    for i, row in finite:
        if chosen is not None and row["label"] == chosen:
            ax.plot([i], [row["psnr_db"]], marker="*", ms=14, color="tab:red", zorder=3)
    ax.set_xticks(range(len(candidates)))
    ax.set_xticklabels([row["label"] for row in candidates], rotation=0)
    ax.set_xlabel("candidate")
    ax.set_ylabel("PSNR (dB)")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
