"""Figure rendering for experiment and simulation reports.

Everything draws through the Agg backend so the CLI works on headless
machines; callers get back the written file path.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analysis import ExperimentResult
from .federation import RunHistory

_DPI = 120


def render_experiment_figure(result: ExperimentResult, out_path: str | Path) -> Path:
    """Scatter of raw vs filtered rows with both regression segments."""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(7, 5))
    dropped = ~result.joint_mask
    ax.scatter(result.x[dropped], result.y[dropped], s=6, c="#c7c7c7",
               label=f"filtered out ({int(dropped.sum())})")
    ax.scatter(result.x[result.joint_mask], result.y[result.joint_mask], s=6,
               c="#1f77b4", label=f"kept ({int(result.joint_mask.sum())})")
    for line, xs, color, label in (
        (result.raw_line, result.x, "#d62728", "raw fit"),
        (result.filtered_line, result.x[result.joint_mask], "#2ca02c", "filtered fit"),
    ):
        if line is not None and xs.size:
            ends = np.array([xs.min(), xs.max()])
            ax.plot(ends, line.coefficients[0] * ends + line.bias,
                    color=color, linewidth=2, label=label)
    ax.set_xlabel(result.x_col)
    ax.set_ylabel(result.y_col)
    ax.set_title(f"{result.dataset_name}: {result.width:g} sigma filter")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=_DPI)
    plt.close(fig)
    return out_path


def render_run_figure(history: RunHistory, out_path: str | Path) -> Path:
    """Global loss per round, with the cumulative rejection ratio below."""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    rounds = [r.round for r in history.rounds]
    losses = [r.global_loss for r in history.rounds]
    n0 = [r.telemetry.n0 for r in history.rounds]
    fig, (ax_loss, ax_n0) = plt.subplots(
        2, 1, figsize=(7, 5), sharex=True, height_ratios=[3, 1]
    )
    ax_loss.plot(rounds, losses, marker="o", markersize=3, color="#1f77b4")
    ax_loss.set_ylabel("global loss")
    if min(losses) > 0:
        ax_loss.set_yscale("log")
    ax_loss.set_title(f"{history.config.algorithm}, {len(rounds)} rounds")
    ax_n0.plot(rounds, n0, color="#d62728")
    ax_n0.set_ylim(-0.05, 1.05)
    ax_n0.set_ylabel("n0")
    ax_n0.set_xlabel("round")
    fig.tight_layout()
    fig.savefig(out_path, dpi=_DPI)
    plt.close(fig)
    return out_path
