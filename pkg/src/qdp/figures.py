"""PNG renderings of the CLI tables.

Uses the object-oriented Agg API, so no pyplot state or display is
involved. The PNG metadata drops the software tag, which keeps re-runs
byte-identical.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

PNG_METADATA = {"Software": None}


def _save(fig: Figure, path: Path) -> Path:
    FigureCanvasAgg(fig)
    fig.savefig(path, format="png", dpi=100, metadata=PNG_METADATA)
    return path


def plot_curves(x: Sequence[float], curves: Mapping[str, Sequence[float]], path, xlabel: str, ylabel: str,
                title: str = "", logy: bool = False) -> Path:
    """One line per entry of ``curves`` against a shared x axis."""
    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot()
    for label, y in curves.items():
        ax.plot(x, y, label=label, marker="." if len(x) <= 60 else None)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    return _save(fig, Path(path))


def plot_certified(rows, path) -> Path:
    """Certified accuracy against tau, one line per noise level."""
    by_p: dict[float, list] = {}
    for r in rows:
        by_p.setdefault(r.p, []).append(r)
    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot()
    for p, rs in by_p.items():
        ax.plot([r.tau for r in rs], [r.certified_accuracy for r in rs], marker="o", label=f"p = {p:g}")
    ax.set_xlabel("tau")
    ax.set_ylabel("certified accuracy")
    ax.set_ylim(-0.02, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    return _save(fig, Path(path))
