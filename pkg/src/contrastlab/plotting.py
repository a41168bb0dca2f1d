"""Render curve, sweep and training reports as PNG figures.

Figures are written next to the delimited outputs the CLI emits; the Agg
backend keeps everything headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .scenario import CurveData


def render_curves(curves: list[CurveData], path, title: str | None = None) -> None:
    """One line per curve over its sweep grid."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for curve in curves:
        ax.plot(curve.grid, curve.values, linewidth=1.8, label=curve.label())
    ax.set_xlabel("temperature" if curves and curves[0].sweep == "tau" else "C")
    ax.set_ylabel("gradient scale" if curves and curves[0].quantity == "grad_scale" else "loss")
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_sweep(rows: list[dict], path) -> None:
    """Accuracy vs temperature with per-variant mean and spread.

    ``rows`` are sweep records with keys variant, tau, seed, knn_acc.
    Fixed-temperature results plot as an errorbar curve; other variants
    as horizontal mean lines with a shaded band.
    """
    fig, ax = plt.subplots(figsize=(7, 4.5))
    fixed = [r for r in rows if r["variant"] == "div-temp"]
    taus = sorted({r["tau"] for r in fixed})
    if taus:
        means = [np.mean([r["knn_acc"] for r in fixed if r["tau"] == t]) for t in taus]
        stds = [np.std([r["knn_acc"] for r in fixed if r["tau"] == t]) for t in taus]
        ax.errorbar(taus, means, yerr=stds, marker="o", capsize=3, label="div-temp")
        ax.set_xscale("log")
    colors = {"temp-free": "tab:green", "learnable": "tab:red"}
    for variant, color in colors.items():
        accs = [r["knn_acc"] for r in rows if r["variant"] == variant]
        if not accs:
            continue
        mean, std = float(np.mean(accs)), float(np.std(accs))
        ax.axhline(mean, color=color, linestyle="--", linewidth=1.4, label=variant)
        ax.axhspan(mean - std, mean + std, color=color, alpha=0.12)
    ax.set_xlabel("temperature")
    ax.set_ylabel("kNN top-1 accuracy")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_training(report_dict: dict, path) -> None:
    """Loss trajectory (and the learnable scale parameter when present)."""
    fig, ax = plt.subplots(figsize=(7, 4))
    loss = report_dict["loss_trajectory"]
    ax.plot(np.arange(1, len(loss) + 1), loss, linewidth=1.8, label="mean epoch loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    t_traj = report_dict.get("learnable_t_trajectory")
    if t_traj:
        twin = ax.twinx()
        twin.plot(np.arange(1, len(t_traj) + 1), t_traj, color="tab:red",
                  linewidth=1.2, label="t")
        twin.set_ylabel("t", color="tab:red")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8, loc="upper right")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
