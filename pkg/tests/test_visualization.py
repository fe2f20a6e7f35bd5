import numpy as np

from tactire.classify.metrics import evaluate_predictions
from tactire.utils import visualization_lib


def test_classification_figures(tmp_path):
    proba = np.array([[0.9, 0.1], [0.2, 0.8], [0.6, 0.4], [0.7, 0.3]])
    report = evaluate_predictions(
        ["Wood", "Soft", "Soft", "Wood"],
        ["Wood", "Soft", "Wood", "Wood"],
        ["Wood", "Soft"],
        proba=proba,
    )
    figure = visualization_lib.plot_confusion(report, str(tmp_path / "confusion.png"))
    assert figure.image.ndim == 3 and figure.image.shape[-1] == 3
    assert (tmp_path / "confusion.png").stat().st_size > 0
    figure = visualization_lib.plot_pr_curves(report)
    assert figure.image.dtype == np.uint8


def test_height_figures(tmp_path):
    groups = {"25mm": [0.024, 0.027, 0.031], "70mm": [0.066, 0.071]}
    truths = {"25mm": 0.025, "70mm": 0.07}
    path = tmp_path / "boxplot.png"
    visualization_lib.plot_height_boxplot(groups, truths, str(path))
    assert path.exists()
    rows = [
        {"cycle_index": i, "t_ex": 100.0 * i, "t_r": 1.0 + 0.01 * i, "amplitude": 0.5}
        for i in range(10)
    ]
    figure = visualization_lib.plot_peak_panel(rows, 450.0)
    height, width, _ = figure.image.shape
    assert width == 2 * height
