"""Contour rendering, KDE geometry, and metric tables."""

import csv
from pathlib import Path

import numpy as np
import pytest

from plotviz.contour import PlotJob, render_kde_contour
from plotviz.cli import main
from plotviz.kde2d import density_orientation, kde_grid
from plotviz.samples import read_sample_csv
from plotviz.tables import render_metric_table

HEADER = ["unit_id", "a", "ordering_id", "draw_id", "y_1", "y_2"]


def write_sample_csv(path, draws, unit_id=0, arm=0):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HEADER)
        for draw_id, (y1, y2) in enumerate(draws):
            writer.writerow([unit_id, arm, 0, draw_id, repr(float(y1)),
                             repr(float(y2))])


def correlated_draws(n, rho, seed, shift=0.0):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, 2))
    y1 = z[:, 0]
    y2 = rho * z[:, 0] + np.sqrt(1.0 - rho**2) * z[:, 1] + shift
    return np.column_stack([y1, y2])


@pytest.fixture
def sample_files(tmp_path):
    model = tmp_path / "model.csv"
    truth = tmp_path / "truth.csv"
    write_sample_csv(model, correlated_draws(600, 0.8, seed=1, shift=0.05))
    write_sample_csv(truth, correlated_draws(600, 0.8, seed=2))
    return model, truth


class TestSampleReader:
    def test_reads_columns(self, sample_files):
        model, _ = sample_files
        table = read_sample_csv(model)
        assert table.n == 600
        assert table.outcome_names == ["y_1", "y_2"]
        assert table.column("y_1").shape == (600,)

    def test_filter_by_unit_and_arm(self, tmp_path):
        path = tmp_path / "mix.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(HEADER)
            for unit in (0, 1):
                for arm in (0, 1):
                    for d in range(5):
                        writer.writerow([unit, arm, 0, d, "0.0", "1.0"])
        table = read_sample_csv(path)
        assert table.filtered(unit_id=1, arm=0).n == 5

    def test_unknown_column_rejected(self, sample_files):
        model, _ = sample_files
        with pytest.raises(KeyError):
            read_sample_csv(model).column("y_9")

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(ValueError):
            read_sample_csv(path)


class TestKdeGrid:
    def test_density_normalizes(self):
        pts = correlated_draws(800, 0.0, seed=3)
        gx, gy, density = kde_grid(pts, (-5, 5), (-5, 5), resolution=160)
        cell = (gx[1] - gx[0]) * (gy[1] - gy[0])
        assert abs(density.sum() * cell - 1.0) < 0.02

    def test_correlated_cloud_diagonal_orientation(self):
        pts = correlated_draws(2000, 0.8, seed=4)
        gx, gy, density = kde_grid(pts, (-4, 4), (-4, 4), resolution=120)
        angle, ratio = density_orientation(gx, gy, density)
        assert abs(abs(angle) - np.pi / 4.0) < 0.15
        assert ratio > 2.0

    def test_independent_cloud_round(self):
        pts = correlated_draws(2000, 0.0, seed=5)
        gx, gy, density = kde_grid(pts, (-4, 4), (-4, 4), resolution=120)
        _, ratio = density_orientation(gx, gy, density)
        assert ratio < 1.3


class TestRenderContour:
    def test_renders_png(self, sample_files, tmp_path):
        model, truth = sample_files
        job = PlotJob(str(model), str(truth),
                      output_path=str(tmp_path / "fig.png"))
        out = render_kde_contour(job)
        assert out.exists() and out.stat().st_size > 5000

    def test_identical_inputs_identical_bytes(self, sample_files, tmp_path):
        model, truth = sample_files
        paths = []
        for name in ("one.png", "two.png"):
            job = PlotJob(str(model), str(truth),
                          output_path=str(tmp_path / name))
            paths.append(render_kde_contour(job))
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_same_csv_both_sides_same_density_field(self, sample_files):
        model, _ = sample_files
        table = read_sample_csv(model)
        pts = np.column_stack([table.column("y_1"), table.column("y_2")])
        a = kde_grid(pts, (-4, 4), (-4, 4), 100)[2]
        b = kde_grid(pts.copy(), (-4, 4), (-4, 4), 100)[2]
        assert np.array_equal(a, b)

    def test_too_few_rows_rejected_without_output(self, tmp_path):
        small = tmp_path / "small.csv"
        write_sample_csv(small, correlated_draws(20, 0.5, seed=6))
        out = tmp_path / "never.png"
        job = PlotJob(str(small), str(small), output_path=str(out))
        with pytest.raises(ValueError):
            render_kde_contour(job)
        assert not out.exists()

    def test_missing_column_rejected(self, sample_files, tmp_path):
        model, truth = sample_files
        job = PlotJob(str(model), str(truth), outcome_x="y_7",
                      output_path=str(tmp_path / "x.png"))
        with pytest.raises(KeyError):
            render_kde_contour(job)


class TestCli:
    def test_contour_roundtrip(self, sample_files, tmp_path, capsys):
        model, truth = sample_files
        out = tmp_path / "cli.png"
        assert main(["contour", "--model-csv", str(model),
                     "--truth-csv", str(truth), "--out", str(out)]) == 0
        assert out.exists()

    def test_empty_csv_nonzero_exit_no_file(self, tmp_path, capsys):
        empty = tmp_path / "empty.csv"
        empty.write_text("")
        out = tmp_path / "no.png"
        code = main(["contour", "--model-csv", str(empty),
                     "--truth-csv", str(empty), "--out", str(out)])
        assert code == 1
        assert not out.exists()


REPORT_TEXT = """\
method,arm,split,w1_mean,w1_std,kl_mean,kl_std,pehe_mean,pehe_std,n_replicates
joint,a0,out,0.2,0.01,0.5,0.02,0.4,0.0,3
marginals,a0,out,0.6,0.02,1.5,0.05,0.45,0.0,3
"""


class TestMetricTable:
    def test_one_method_one_row(self, tmp_path):
        report = tmp_path / "r.csv"
        report.write_text(REPORT_TEXT.splitlines()[0] + "\n"
                          + REPORT_TEXT.splitlines()[1] + "\n")
        out = render_metric_table([report], tmp_path / "table.txt")
        lines = out.read_text().splitlines()
        assert len(lines) == 3  # header, rule, one row

    def test_lowest_w1_starred(self, tmp_path):
        report = tmp_path / "r.csv"
        report.write_text(REPORT_TEXT)
        out = render_metric_table([report], tmp_path / "table.txt")
        text = out.read_text().splitlines()
        joint_row = next(l for l in text if l.startswith("joint"))
        marginals_row = next(l for l in text if l.startswith("marginals"))
        assert "0.200 +/- 0.010 *" in joint_row
        assert "*" not in marginals_row.split("0.450")[0].split("1.500")[-1]

    def test_deterministic(self, tmp_path):
        report = tmp_path / "r.csv"
        report.write_text(REPORT_TEXT)
        a = render_metric_table([report], tmp_path / "a.txt").read_bytes()
        b = render_metric_table([report], tmp_path / "b.txt").read_bytes()
        assert a == b

    def test_malformed_rejected(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("x,y\n1,2\n")
        with pytest.raises(ValueError):
            render_metric_table([bad], tmp_path / "t.txt")
