"""Report output: JSON document, CSV summary table, rendered figures.

Every experiment leaves behind ``report.json`` (the full record),
``summary.csv`` (one row per method, the layout used for the result tables),
and PNG figures: decision-boundary rasters for the planar task, the
per-round fraction of true adversaries, and the wall-clock decomposition of
an augmented run.
"""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

log = logging.getLogger("veritrain.report")

_CSV_COLUMNS = ("method", "accuracy", "perturbation_bound",
                "augmentation_count", "train_seconds")


def write_reports(out_dir, cfg, doc: dict, models: dict, train_samples) -> list[Path]:
    """Write report.json, summary.csv, and figures; returns written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    path = out_dir / "report.json"
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
    written.append(path)

    path = out_dir / "summary.csv"
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(_CSV_COLUMNS)
        for method in cfg.methods:
            entry = doc["methods"].get(method)
            if entry is None:
                continue
            pb = entry.get("perturbation_bound")
            writer.writerow([
                method,
                f"{entry['accuracy']:.4f}",
                "" if pb is None else f"{pb['value']:.6f}",
                entry["augmentation_count"],
                f"{entry['train_seconds']:.3f}",
            ])
    written.append(path)

    try:
        written += _figures(out_dir, cfg, doc, models, train_samples)
    except Exception:
        log.exception("figure rendering failed; tabular reports are intact")
    return written


def _figures(out_dir: Path, cfg, doc, models, train_samples) -> list[Path]:
    written = []
    if cfg.task == "2d" and models:
        written.append(_boundary_figure(out_dir, cfg, models, train_samples))
    rounds = doc.get("iada", {}).get("rounds", [])
    if rounds:
        written.append(_fraction_figure(out_dir, rounds))
    timing = doc.get("iada", {}).get("timing")
    if timing:
        written.append(_timing_figure(out_dir, timing))
    return [p for p in written if p is not None]


def _boundary_figure(out_dir: Path, cfg, models, train_samples) -> Path:
    from .experiment import export_boundary_raster

    names = list(models)
    fig, axes = plt.subplots(1, len(names), figsize=(4 * len(names), 4),
                             squeeze=False)
    xs = np.stack([s.x for s in train_samples])
    ys = np.array([s.y for s in train_samples])
    for ax, name in zip(axes[0], names):
        raster = export_boundary_raster(models[name], 200)
        ax.imshow(raster, origin="lower", extent=(0, 1, 0, 1),
                  cmap="coolwarm", alpha=0.45, interpolation="nearest")
        ax.scatter(xs[:, 0], xs[:, 1], c=ys, cmap="coolwarm", s=6,
                   edgecolors="k", linewidths=0.2)
        ax.set_title(name)
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1)
    fig.suptitle("decision boundaries")
    path = out_dir / "boundaries.png"
    fig.savefig(path, dpi=110, bbox_inches="tight")
    plt.close(fig)
    return path


def _fraction_figure(out_dir: Path, rounds) -> Path | None:
    pts = [(r["epoch"], r["true_adversary_fraction"]) for r in rounds
           if r.get("true_adversary_fraction") is not None]
    if not pts:
        return None
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o")
    ax.set_xlabel("epoch")
    ax.set_ylabel("true-adversary fraction")
    ax.set_ylim(-0.02, 1.02)
    ax.grid(alpha=0.3)
    path = out_dir / "true_adversary_fraction.png"
    fig.savefig(path, dpi=110, bbox_inches="tight")
    plt.close(fig)
    return path


def _timing_figure(out_dir: Path, timing: dict) -> Path:
    phases = ["verification", "human", "update", "other"]
    values = [max(timing.get(p, 0.0), 0.0) for p in phases]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    bottom = 0.0
    for phase, value in zip(phases, values):
        ax.bar(["run"], [value], bottom=[bottom], label=phase)
        bottom += value
    ax.set_ylabel("seconds")
    ax.legend()
    ax.set_title("time decomposition")
    path = out_dir / "time_decomposition.png"
    fig.savefig(path, dpi=110, bbox_inches="tight")
    plt.close(fig)
    return path
