from pathlib import Path

import matplotlib.pyplot as plt
import pytest

from sweepplot import PlotError, PlotSpec, load_rows, render
from sweepplot.cli import main

DATA = Path(__file__).parent / "data"
REPO_ROOT = Path(__file__).resolve().parents[2]


@pytest.fixture(autouse=True)
def _close_figures():
    yield
    plt.close("all")


def test_sample_curves_and_labels(tmp_path):
    out = tmp_path / "chart.png"
    fig = render(PlotSpec(csv_path=str(DATA / "sample.csv"), out_path=str(out)))
    ax = fig.axes[0]
    assert out.exists() and out.stat().st_size > 0
    assert len(ax.get_lines()) == 4  # 2 estimator groups x (variance, bound)
    assert ax.get_xlabel() == "SNR [dB]"
    assert ax.get_ylabel() == "normalized variance/bound"
    labels = [line.get_label() for line in ax.get_lines()]
    assert "ht (tau=3)" in labels
    assert "bound on ht (tau=3)" in labels
    solid = [l for l in ax.get_lines() if l.get_linestyle() == "-"]
    dashed = [l for l in ax.get_lines() if l.get_linestyle() == "--"]
    assert len(solid) == 2 and len(dashed) == 2
    assert ax.get_ylim()[1] == pytest.approx(3.0)


def test_raw_variance_mode(tmp_path):
    raw = tmp_path / "raw.csv"
    lines = (DATA / "sample.csv").read_text().splitlines()
    body = []
    for line in lines[1:]:
        cells = line.split(",")
        cells[6] = cells[7] = ""
        body.append(",".join(cells))
    raw.write_text("\n".join([lines[0]] + body) + "\n")
    out = tmp_path / "raw.png"
    fig = render(PlotSpec(csv_path=str(raw), out_path=str(out), ymax=20.0))
    ax = fig.axes[0]
    assert ax.get_ylabel() == "variance/bound"
    assert max(ax.get_lines()[0].get_ydata()) > 3.0


def test_missing_column_is_named(tmp_path):
    bad = tmp_path / "bad.csv"
    lines = (DATA / "sample.csv").read_text().splitlines()
    header = lines[0].replace(",bound", "")
    rows = [",".join(v for i, v in enumerate(line.split(",")) if i != 5) for line in lines[1:]]
    bad.write_text("\n".join([header] + rows) + "\n")
    with pytest.raises(PlotError, match="bound"):
        load_rows(str(bad))


def test_empty_body_rejected(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text((DATA / "sample.csv").read_text().splitlines()[0] + "\n")
    with pytest.raises(PlotError, match="no data rows"):
        load_rows(str(empty))


def test_rerender_gives_identical_curves(tmp_path):
    spec = PlotSpec(csv_path=str(DATA / "sample.csv"), out_path=str(tmp_path / "a.png"))
    first = render(spec)
    second = render(PlotSpec(csv_path=spec.csv_path, out_path=str(tmp_path / "b.png")))
    for la, lb in zip(first.axes[0].get_lines(), second.axes[0].get_lines()):
        assert la.get_label() == lb.get_label()
        assert (la.get_xydata() == lb.get_xydata()).all()


def test_cli_roundtrip(tmp_path):
    out = tmp_path / "cli.png"
    assert main([str(DATA / "sample.csv"), "-o", str(out)]) == 0
    assert out.exists() and out.stat().st_size > 0


def test_cli_error_paths(tmp_path, capsys):
    assert main([str(tmp_path / "missing.csv"), "-o", str(tmp_path / "x.png")]) == 1
    assert "error" in capsys.readouterr().err


def test_shipped_sweep_csv_renders_two_curves_per_estimator(tmp_path):
    # [SECONDARY] acceptance: the shipped CSV yields exactly 2 curves per
    # estimator and the SNR axis label.
    shipped = REPO_ROOT / "fig1.csv"
    assert shipped.exists(), "reference fig1.csv missing from repository root"
    rows = load_rows(str(shipped))
    n_groups = len({(r["estimator"], r["tau"]) for r in rows})
    out = tmp_path / "fig1.png"
    fig = render(PlotSpec(csv_path=str(shipped), out_path=str(out)))
    ax = fig.axes[0]
    assert n_groups == 6
    assert len(ax.get_lines()) == 2 * n_groups
    assert ax.get_xlabel() == "SNR [dB]"
    assert out.exists() and out.stat().st_size > 0
    print(f"\nACCEPTANCE plot-fig1: PASS ({n_groups} estimators, {2 * n_groups} curves)")
