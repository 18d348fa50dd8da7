"""Figures written next to the CSV/JSON outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.bbox": "tight",
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_history(rows: list[dict], path, signals=()) -> Path:
    """Epoch-mean losses on a log scale, optionally one line per signal."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.5, 3.2))
        ep = [r["epoch"] for r in rows]
        for key, style in (("mean_total", "-"), ("mean_lang", "--"), ("mean_act", ":")):
            ax.plot(ep, [max(r[key], 1e-12) for r in rows], style, label=key.replace("mean_", ""))
        for s in signals:
            ax.plot(ep, [max(r[s], 1e-12) for r in rows], lw=0.6, alpha=0.7, label=s)
        ax.set_yscale("log")
        ax.set_xlabel("epoch")
        ax.set_ylabel("loss")
        ax.legend(ncol=2, frameon=False)
        return _save(fig, path)


def plot_report(report, path) -> Path:
    """Accuracy and nRMSE per task, with the published values as markers."""
    names = list(report.tasks)
    mixed = any(n.endswith("-opposite") for n in names)
    ref = report.reference["mixed-view" if mixed else "single-view"]
    x = np.arange(len(names))
    with plt.rc_context(STYLE):
        fig, (a1, a2) = plt.subplots(1, 2, figsize=(8, 3.2))
        a1.bar(x - 0.2, [report.tasks[n].accuracy for n in names], 0.4, label="exact")
        a1.bar(x + 0.2, [report.tasks[n].semantic_accuracy for n in names], 0.4, label="synonym-tolerant")
        a2.bar(x, [report.tasks[n].nrmse for n in names], 0.6, color="C2")
        for i, n in enumerate(names):
            base = n if n in ref else n.rsplit("-", 1)[0]
            if base in ref:
                a1.plot(i, ref[base][0], "k_", ms=14)
                a2.plot(i, ref[base][1], "k_", ms=14)
        a1.set_ylabel("description accuracy (%)")
        a1.set_ylim(0, 105)
        a2.set_ylabel("joint nRMSE (%)")
        for a in (a1, a2):
            a.set_xticks(x)
            a.set_xticklabels(names, rotation=35, ha="right")
        a1.legend(frameon=False, loc="lower left")
        return _save(fig, path)


def plot_trajectory(pred: np.ndarray, truth: np.ndarray | None, path, title: str = "") -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3))
        for k in range(pred.shape[1]):
            ax.plot(pred[:, k], color=f"C{k}", label=f"j{k + 1}")
            if truth is not None:
                ax.plot(truth[:, k], color=f"C{k}", ls="--", lw=0.8)
        ax.set_xlabel("time step")
        ax.set_ylabel("joint value")
        ax.set_ylim(-1.05, 1.05)
        if title:
            ax.set_title(title)
        ax.legend(ncol=5, frameon=False, fontsize=7)
        return _save(fig, path)
