import matplotlib

matplotlib.use("Agg")
from typing import Dict, Optional, Sequence

from matplotlib.backends.backend_agg import FigureCanvasAgg as FigureCanvas
import matplotlib.pyplot as plt
import numpy as np

from tactire.classify.metrics import EvalReport


class WandBFigure:
    """Figure context that renders to an RGB array and optionally a PNG file.

    Usage:

        fig_ctx = WandBFigure(save_to="confusion.png", figsize=(5, 5))
        with fig_ctx as fig:
            fig.add_subplot(111).plot(...)
        wandb.log({"confusion": wandb.Image(fig_ctx.image)})
    """

    def __init__(self, save_to=None, **figure_kwargs):
        self.save_to = save_to
        self.fig = plt.figure(**figure_kwargs)
        self.canvas = FigureCanvas(self.fig)

    def __enter__(self):
        return plt.figure(self.fig.number)

    def __exit__(self, exc_type, exc_value, traceback):
        self.canvas.draw()
        if self.save_to is not None:
            self.fig.savefig(self.save_to)
        out_image = np.asarray(self.canvas.buffer_rgba())[..., :3]
        self.image = np.array(out_image, dtype=np.uint8)
        plt.close(self.fig)


def plot_confusion(report: EvalReport, save_to: Optional[str] = None) -> WandBFigure:
    k = len(report.classes)
    wandb_figure = WandBFigure(save_to=save_to, figsize=(1.2 * k + 2, 1.2 * k + 1.5))
    with wandb_figure as fig:
        ax = fig.add_subplot(111)
        ax.imshow(report.confusion, cmap="Blues")
        ax.set_xticks(range(k), report.classes, rotation=45, ha="right")
        ax.set_yticks(range(k), report.classes)
        ax.set_xlabel("predicted")
        ax.set_ylabel("true")
        for i in range(k):
            for j in range(k):
                ax.text(j, i, int(report.confusion[i, j]), ha="center", va="center")
        ax.set_title(f"accuracy {report.accuracy:.3f}")
        fig.tight_layout()
    return wandb_figure


def plot_pr_curves(report: EvalReport, save_to: Optional[str] = None) -> WandBFigure:
    wandb_figure = WandBFigure(save_to=save_to, figsize=(5, 4))
    with wandb_figure as fig:
        ax = fig.add_subplot(111)
        for cls, points in report.pr_curves.items():
            recall, precision = zip(*points)
            ax.step(recall, precision, where="post", label=cls)
        ax.set_xlabel("recall")
        ax.set_ylabel("precision")
        ax.set_xlim(0, 1.02)
        ax.set_ylim(0, 1.02)
        ax.legend(loc="lower left")
        fig.tight_layout()
    return wandb_figure


def plot_height_boxplot(
    groups: Dict[str, Sequence[float]],
    truths: Dict[str, float],
    save_to: Optional[str] = None,
) -> WandBFigure:
    """Estimated heights per group in cm, true heights dashed."""
    names = sorted(groups, key=lambda g: truths.get(g, 0.0))
    wandb_figure = WandBFigure(save_to=save_to, figsize=(4, 4))
    with wandb_figure as fig:
        ax = fig.add_subplot(111)
        ax.boxplot([np.asarray(groups[g]) * 100 for g in names])
        ax.set_xticks(range(1, len(names) + 1), names)
        for i, g in enumerate(names, start=1):
            if g in truths:
                ax.hlines(truths[g] * 100, i - 0.4, i + 0.4, linestyles="dashed")
        ax.set_ylabel("estimated height [cm]")
        fig.tight_layout()
    return wandb_figure


def plot_peak_panel(
    rows: Sequence[Dict], collision_t_ex: float, save_to: Optional[str] = None
) -> WandBFigure:
    """Return-peak ranging times against experiment time around a collision."""
    wandb_figure = WandBFigure(save_to=save_to, figsize=(6, 3))
    with wandb_figure as fig:
        ax = fig.add_subplot(111)
        t_ex = np.array([r["t_ex"] for r in rows]) - collision_t_ex
        t_r = np.array([r["t_r"] for r in rows])
        amplitude = np.array([r["amplitude"] for r in rows])
        ax.scatter(t_ex, t_r, c=amplitude, s=8, cmap="viridis", vmin=0, vmax=1)
        ax.axvline(0.0, color="k", linewidth=0.5)
        ax.set_xlabel("t_ex - collision [ms]")
        ax.set_ylabel("t_r [ms]")
        fig.tight_layout()
    return wandb_figure
