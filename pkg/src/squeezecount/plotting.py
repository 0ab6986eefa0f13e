"""Figure rendering for sweep results.

Panels show the coincidence observables against the sweep axis, one series
per second-axis value per engine. Two numeric axes render as heatmaps; the
step layout overlays the per-photon increments on the counting noise.
"""
from __future__ import annotations

import math

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .sweeps import SweepResult

__all__ = ["render"]

_LINE_PANELS = ("c_mean", "c_var", "snr", "g12", "corr_ab", "m_minus")
_LABELS = {
    "c_mean": "coincidence mean",
    "c_var": "coincidence variance",
    "snr": "SNR",
    "g12": "cross-correlation g12",
    "corr_ab": "arm correlation",
    "m_minus": "intensity difference",
}


def _series(result: SweepResult):
    """(label, rows) groups: one per (axis2 value, engine)."""
    spec = result.spec
    groups: dict[tuple, list] = {}
    for row in result.rows:
        key = (row.get("axis2"), row["engine"])
        groups.setdefault(key, []).append(row)
    multi_engine = len(spec.engines) > 1
    out = []
    for (a2, engine), rows in groups.items():
        parts = []
        if a2 is not None:
            parts.append(f"{spec.axis2.variable}={a2:g}" if isinstance(a2, float)
                         else f"{spec.axis2.variable}={a2}")
        if multi_engine or not parts:
            parts.append(engine)
        out.append((", ".join(parts), rows))
    return out


def _render_lines(result: SweepResult, path: str) -> None:
    fig, axes = plt.subplots(2, 3, figsize=(13, 7))
    xlabel = result.spec.axis.variable
    for ax, col in zip(axes.ravel(), _LINE_PANELS):
        for label, rows in _series(result):
            x = [r["axis"] for r in rows]
            y = [r[col] for r in rows]
            ax.plot(x, y, marker=".", label=label)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(_LABELS[col])
        ax.grid(True, alpha=0.3)
    axes[0, 0].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def _render_steps(result: SweepResult, path: str) -> None:
    fig, ax = plt.subplots(figsize=(7, 5))
    for label, rows in _series(result):
        x = np.array([r["axis"] for r in rows], dtype=float)
        mean = np.array([r["c_mean"] for r in rows])
        noise = np.array([math.sqrt(v) if v == v and v >= 0 else math.nan
                          for v in (r["c_var"] for r in rows)])
        ax.plot(x[1:], np.diff(mean), marker="o",
                label=f"step {label}".strip())
        ax.plot(x, noise, marker="s", linestyle="--",
                label=f"noise {label}".strip())
    ax.set_xlabel(result.spec.axis.variable)
    ax.set_ylabel("per-photon step vs counting noise")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def _render_heatmap(result: SweepResult, path: str) -> None:
    spec = result.spec
    xs = list(spec.axis.values)
    ys = list(spec.axis2.values)
    engine = spec.engines[0]
    rows = [r for r in result.rows if r["engine"] == engine]
    panels = [c for c in ("c_mean", "snr")
              if any(r[c] == r[c] for r in rows)]
    fig, axes = plt.subplots(1, len(panels), figsize=(6 * len(panels), 5),
                             squeeze=False)
    for ax, col in zip(axes[0], panels):
        grid = np.full((len(ys), len(xs)), np.nan)
        for r in rows:
            i = xs.index(r["axis"])
            j = ys.index(r["axis2"])
            grid[j, i] = r[col]
        im = ax.imshow(grid, origin="lower", aspect="auto",
                       extent=(min(xs), max(xs), min(ys), max(ys)))
        fig.colorbar(im, ax=ax, label=_LABELS[col])
        ax.set_xlabel(spec.axis.variable)
        ax.set_ylabel(spec.axis2.variable)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def render(result: SweepResult, path: str) -> str:
    """Render the sweep to a PNG; layout follows the sweep's plot kind."""
    kind = result.spec.plot_kind
    two_numeric = (result.spec.axis2 is not None
                   and result.spec.axis2.variable != "input")
    if kind == "steps":
        _render_steps(result, path)
    elif kind == "heatmap" and two_numeric:
        _render_heatmap(result, path)
    else:
        _render_lines(result, path)
    return path
