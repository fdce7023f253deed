"""Report figures: training curves and the model comparison chart."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "figure.figsize": (6.4, 4.0),
    "figure.dpi": 100,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
    "font.size": 10,
    "axes.titlesize": 11,
    "axes.labelsize": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
    "lines.linewidth": 1.6,
}

MODEL_COLORS = {
    "nenet": "#1f77b4",
    "nenet_static_edge": "#ff7f0e",
    "dynamic_gcn": "#2ca02c",
    "vanilla_gcn": "#d62728",
}


def plot_training_curves(histories: dict, path, metric: str = "edge_f") -> None:
    """One line per model of ``metric`` against epoch, plus training loss on a second panel.

    ``histories`` maps a model name to its TrainReport ``epochs`` rows.
    """
    with plt.rc_context(STYLE):
        fig, (ax_loss, ax_metric) = plt.subplots(1, 2, figsize=(10, 3.8))
        for name, rows in histories.items():
            epochs = [r["epoch"] for r in rows]
            color = MODEL_COLORS.get(name)
            ax_loss.plot(epochs, [r["loss"] for r in rows], label=name, color=color)
            ax_metric.plot(epochs, [r[metric] for r in rows], label=name, color=color)
        ax_loss.set_xlabel("epoch")
        ax_loss.set_ylabel("mean selected-edge loss")
        ax_loss.set_yscale("log")
        ax_metric.set_xlabel("epoch")
        ax_metric.set_ylabel(f"held-out {metric.replace('_', ' ')}")
        ax_metric.set_ylim(0, 1.02)
        ax_metric.legend(loc="lower right")
        fig.savefig(path)
        plt.close(fig)


def plot_comparison(rows: list[dict], path, reference: dict | None = None) -> None:
    """Grouped bars of edge and word F per model; optional reference scores as markers."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        names = [r["model"] for r in rows]
        xs = range(len(rows))
        width = 0.38
        ax.bar([x - width / 2 for x in xs], [r["edge_f"] for r in rows], width, label="edge F",
               color=[MODEL_COLORS.get(n, "0.5") for n in names])
        ax.bar([x + width / 2 for x in xs], [r["word_f"] for r in rows], width, label="word F",
               color=[MODEL_COLORS.get(n, "0.5") for n in names], alpha=0.45)
        if reference:
            ref = [reference.get(n) for n in names]
            ax.scatter([x for x, v in zip(xs, ref) if v is not None], [v for v in ref if v is not None],
                       marker="_", s=400, color="black", label="reported (full scale)", zorder=3)
        for x, r in zip(xs, rows):
            ax.text(x - width / 2, r["edge_f"] + 0.01, f"{r['edge_f']:.3f}", ha="center", fontsize=8)
        ax.set_xticks(list(xs))
        ax.set_xticklabels(names, rotation=15)
        ax.set_ylim(0, 1.1)
        ax.set_ylabel("F-score (held out)")
        ax.legend(loc="upper right", fontsize=8)
        fig.savefig(path)
        plt.close(fig)
