"""Matplotlib figures written next to the delimited outputs of the train and
eval report paths."""
from __future__ import annotations

from pathlib import Path


def _plt():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def save_loss_curve(metrics, path: Path) -> Path:
    """Loss-vs-step curve for a training run (log-scale y)."""
    plt = _plt()
    steps = [m[0] for m in metrics]
    losses = [m[1] for m in metrics]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(steps, losses, lw=1.0, color="tab:blue")
    ax.set_xlabel("step")
    ax.set_ylabel("mse loss")
    if losses and min(losses) > 0:
        ax.set_yscale("log")
    ax.set_title("training loss")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def save_eval_figure(report, path: Path) -> Path:
    """Bar chart of the four evaluation scores."""
    plt = _plt()
    names = ["fid_k", "fid_g", "dist_k", "dist_g"]
    values = [report.fid_k, report.fid_g, report.dist_k, report.dist_g]
    fig, ax = plt.subplots(figsize=(6, 4))
    bars = ax.bar(names, values, color=["tab:blue", "tab:blue",
                                        "tab:orange", "tab:orange"])
    for bar, v in zip(bars, values):
        ax.annotate(f"{v:.4g}", (bar.get_x() + bar.get_width() / 2, v),
                    ha="center", va="bottom", fontsize=8)
    ax.set_ylabel("score")
    ax.set_title(f"evaluation ({report.m_generated} generated vs "
                 f"{report.m_reference} reference)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)
