import os

import numpy as np
import pytest

from src.output_writer import OutputWriter, SchemaError
from src.plotting import histogram_svg, loglog_svg, plot_csv


def test_histogram_needs_samples():
    with pytest.raises(ValueError):
        histogram_svg(np.array([]), "empty")


def test_histogram_is_an_svg_document():
    svg = histogram_svg(np.random.default_rng(0).uniform(size=500), "uniform & co")
    assert svg.startswith("<svg")
    assert svg.rstrip().endswith("</svg>")
    assert "uniform &amp; co" in svg


def test_loglog_reports_the_fitted_slope():
    n = np.geomspace(10, 10_000, 40)
    svg, slope = loglog_svg({"tail": (n, 3.0 * n ** -1.5), "other": (n, 1.0 / n)}, "tails")
    assert slope == pytest.approx(-1.5, abs=1e-9)
    assert "slope −1.50" in svg


def test_loglog_needs_positive_data():
    with pytest.raises(ValueError):
        loglog_svg({"zero": (np.array([1.0, 2.0]), np.zeros(2))}, "nothing")


def _occupation_csv(directory):
    rows = [[7, i, s, 0.9 - s, 0.1, 0] for i, s in enumerate(np.linspace(0.05, 0.85, 30))]
    with OutputWriter(directory) as writer:
        return writer.write_csv("occupation", rows, ["seed", "index", "S1", "S2", "leftover", "flagged"],
                                d=2, alpha=0.5, p1=0.5)


def test_plot_occupation_histogram(tmp_path):
    path = _occupation_csv(str(tmp_path))
    target = plot_csv(path, "histogram")
    assert target == os.path.splitext(path)[0] + ".svg"
    with open(target) as f:
        svg = f.read()
    assert svg.count("<polyline") >= 2  # axes and the Lamperti overlay


def test_plot_decay_with_window(tmp_path):
    n = np.arange(1, 200)
    with OutputWriter(str(tmp_path)) as writer:
        path = writer.write_csv("decay", zip(n.tolist(), (2.0 / n).tolist()), fit_min=10, fit_max=100)
    target = plot_csv(path, "loglog", str(tmp_path / "decay_plot.svg"))
    with open(target) as f:
        assert "slope −1.00" in f.read()


def test_plot_rejects_mismatched_kind(tmp_path):
    path = _occupation_csv(str(tmp_path))
    with pytest.raises(SchemaError, match="schemas"):
        plot_csv(path, "loglog")
    with pytest.raises(SchemaError, match="unknown plot kind"):
        plot_csv(path, "heatmap")


def test_plot_rejects_empty_tables(tmp_path):
    with OutputWriter(str(tmp_path)) as writer:
        path = writer.write_csv("decay", [])
    with pytest.raises(SchemaError, match="no data rows"):
        plot_csv(path, "loglog")
