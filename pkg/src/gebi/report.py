"""Report rendering: fixed-width text tables, delimited per-sample output,
attribution heatmaps, and matplotlib figures written next to them.

The experiment table mirrors the usual presentation of counterfactual
results (Added feature / Type / Average / Maximum change in prediction,
in percentage points); the average column shows the absolute mean by
default since a signed mean hides symmetric swings.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .counterfactual import CounterfactualReport, PredictionDelta
from .pipeline import RunResult

BIAS_DISPLAY = {
    "black_frame": "Frame",
    "ruler": "Ruler",
    "red_circle": "Red circle",
    "none": "None",
}
CLASS_DISPLAY = {"malignant": "Mal", "benign": "Ben"}

HIST_BIN_WIDTH_PP = 5.0
_PNG_METADATA = {"Software": "gebi"}  # fixed so repeated renders are byte-identical


def render_experiment_table(report: CounterfactualReport, signed: bool = False) -> str:
    """Fixed-width table of per-class average and maximum prediction change."""
    header = ("Added feature", "Type", "Average change in prediction",
              "Maximum change in prediction")
    rows: list[tuple[str, str, str, str]] = []
    feature = BIAS_DISPLAY.get(report.bias_spec.kind, report.bias_spec.kind)
    for cls in ("malignant", "benign"):
        stats = report.per_class[cls]
        avg = stats.mean_signed_pp if signed else stats.mean_abs_pp
        rows.append((feature if cls == "malignant" else "",
                     CLASS_DISPLAY[cls], f"{avg:.2f}", f"{stats.max_abs_pp:.2f}"))
    widths = [max(len(header[i]), *(len(r[i]) for r in rows)) for i in range(4)]
    lines = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(header)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for r in rows:
        lines.append("  ".join(c.ljust(widths[i]) for i, c in enumerate(r)).rstrip())
    return "\n".join(lines) + "\n"


def render_flip_summary(report: CounterfactualReport) -> str:
    lines = [f"threshold: {report.threshold}"]
    for cls in ("malignant", "benign"):
        s = report.per_class[cls]
        lines.append(
            f"{CLASS_DISPLAY[cls]}: n={s.n} flips_to_malignant={s.flips_to_malignant} "
            f"flips_to_benign={s.flips_to_benign}"
        )
    return "\n".join(lines) + "\n"


def deltas_csv(deltas: list[PredictionDelta]) -> str:
    lines = ["id,label,p_before,p_after,delta_pp,flip"]
    for d in deltas:
        if d.flipped_to_malignant:
            flip = "to_malignant"
        elif d.flipped_to_benign:
            flip = "to_benign"
        else:
            flip = "none"
        lines.append(
            f"{d.sample_id},{d.label},{repr(d.p_before)},{repr(d.p_after)},"
            f"{repr(d.delta_pp)},{flip}"
        )
    return "\n".join(lines) + "\n"


def render_run_summary(result: RunResult) -> str:
    lines = [
        f"run: {result.run_id}",
        f"mode: {result.config.mode}",
        f"samples: {len(result.sample_ids)}",
        f"clusters: {result.assignment.n_clusters}  inertia: {result.assignment.inertia:.6f}",
    ]
    for c, members in enumerate(result.per_cluster_members):
        preview = ", ".join(members[:5]) + (", ..." if len(members) > 5 else "")
        lines.append(f"  cluster {c}: {len(members)} samples  [{preview}]")
    return "\n".join(lines) + "\n"


def attribution_heatmap(grid: np.ndarray) -> np.ndarray:
    """Diverging rendering of a signed grid: negative blue, zero white,
    positive red; scaled by the grid's max absolute value."""
    g = np.asarray(grid, dtype=np.float64)
    peak = np.abs(g).max()
    v = g / peak if peak > 0 else np.zeros_like(g)
    out = np.ones(g.shape + (3,))
    pos, neg = v > 0, v < 0
    out[pos, 1] = out[pos, 2] = 1.0 - v[pos]
    out[neg, 0] = out[neg, 1] = 1.0 + v[neg]
    return out


def delta_histogram_figure(deltas: list[PredictionDelta], out_path: str | Path) -> Path:
    """Histogram of per-sample deltas, 5 pp bins over [-100, 100]."""
    out_path = Path(out_path)
    bins = np.arange(-100.0, 100.0 + HIST_BIN_WIDTH_PP, HIST_BIN_WIDTH_PP)
    values = [d.delta_pp for d in deltas]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.hist(values, bins=bins, color="#4477aa", edgecolor="white")
    ax.set_xlabel("prediction change (pp)")
    ax.set_ylabel("samples")
    ax.set_title("Counterfactual prediction deltas")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=110, metadata=_PNG_METADATA)
    plt.close(fig)
    return out_path


def viz3d_figure(result: RunResult, out_path: str | Path) -> Path:
    """3-D scatter of the visualization embedding, colored by cluster."""
    out_path = Path(out_path)
    fig = plt.figure(figsize=(7, 6))
    ax = fig.add_subplot(projection="3d")
    cmap = plt.get_cmap("tab10")
    for c in range(result.assignment.n_clusters):
        mask = result.assignment.labels == c
        ax.scatter(
            result.viz3d[mask, 0], result.viz3d[mask, 1], result.viz3d[mask, 2],
            color=cmap(c % 10), label=f"cluster {c} ({int(mask.sum())})", s=25,
        )
    ax.set_title(f"{result.config.mode} embedding, {len(result.sample_ids)} samples")
    ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=110, metadata=_PNG_METADATA)
    plt.close(fig)
    return out_path


def selection_curve_figure(selection: dict, out_path: str | Path) -> Path:
    """Elbow inertia curve or eigengap spectrum used for auto-k."""
    out_path = Path(out_path)
    fig, ax = plt.subplots(figsize=(6, 4))
    if selection.get("method") == "elbow":
        ax.plot(selection["ks"], selection["inertias"], "o-", color="#4477aa")
        sel = selection["selected_k"]
        idx = selection["ks"].index(sel)
        ax.plot([sel], [selection["inertias"][idx]], "o", color="#cc3311", markersize=10)
        ax.set_xlabel("k")
        ax.set_ylabel("inertia")
        ax.set_title(f"elbow selection: k={sel} (knee strength {selection['knee_strength']:.3f})")
    else:
        vals = selection["eigenvalues"]
        ax.plot(range(1, len(vals) + 1), vals, "o-", color="#4477aa")
        ax.axvline(selection["selected_k"] + 0.5, color="#cc3311", linestyle="--")
        ax.set_xlabel("eigenvalue index")
        ax.set_ylabel("Laplacian eigenvalue")
        ax.set_title(f"eigengap selection: k={selection['selected_k']}")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=110, metadata=_PNG_METADATA)
    plt.close(fig)
    return out_path


def run_report_figures(run_dir: str | Path, result: RunResult) -> list[Path]:
    """Render the run's figures into its directory; returns written paths."""
    run_dir = Path(run_dir)
    written = [viz3d_figure(result, run_dir / "viz3d.png")]
    selection_path = run_dir / "selection.json"
    if selection_path.exists():
        selection = json.loads(selection_path.read_text(encoding="utf-8"))
        written.append(selection_curve_figure(selection, run_dir / "selection.png"))
    return written
