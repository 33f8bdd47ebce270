"""Figure rendering for reports and sweeps. Uses the Agg backend so the CLI
works headless; every function writes a PNG and returns its path."""

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .errors import ValidationError
from .metrics import MetricsTable

_DPI = 150


def save_stage_curve(rows: Sequence[tuple[int, str, float]], path) -> Path:
    """Seen-domain error per stage, one line per method."""
    if not rows:
        raise ValidationError("no curve rows to plot")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    by_method: dict[str, list[tuple[int, float]]] = {}
    for stage, method, value in rows:
        by_method.setdefault(method, []).append((stage, value))
    fig, ax = plt.subplots(figsize=(6, 4))
    for method, points in by_method.items():
        points.sort()
        ax.plot([p[0] for p in points], [p[1] for p in points], marker="o", label=method)
    ax.set_xlabel("stage")
    ax.set_ylabel("error on seen domains (%)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def save_sweep(points, path) -> Path:
    """The three sweep series (previous / new / all seen) against the scaling."""
    if not points:
        raise ValidationError("no sweep points to plot")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lams = [p.lam for p in points]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(lams, [p.previous for p in points], marker="o", label="previous domains")
    ax.plot(lams, [p.new for p in points], marker="s", label="new domain")
    ax.plot(lams, [p.all_seen for p in points], marker="^", label="all seen")
    ax.set_xlabel("scaling factor")
    ax.set_ylabel("dev error (%)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def save_final_bars(tables: Sequence[MetricsTable], path) -> Path:
    """Final error over seen domains, one bar per method."""
    if not tables:
        raise ValidationError("no metrics tables to plot")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    methods = [t.method for t in tables]
    values = [t.awer for t in tables]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(range(len(methods)), values)
    ax.set_xticks(range(len(methods)))
    ax.set_xticklabels(methods, rotation=30, ha="right")
    ax.set_ylabel("final error on seen domains (%)")
    for i, v in enumerate(values):
        ax.annotate(f"{v:.2f}", (i, v), ha="center", va="bottom", fontsize=8)
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path
