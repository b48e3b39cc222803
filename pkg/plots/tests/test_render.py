"""Renderer tests: consume the main toolkit only through its CLI files."""

import json
import subprocess
import sys

import pytest

from render import CurveFileError, load_curve, main, render


@pytest.fixture(scope="module")
def figure_dirs(tmp_path_factory):
    """Real fig2/fig3 outputs produced by the toolkit CLI."""
    root = tmp_path_factory.mktemp("figures")
    for figure in ("fig2", "fig3"):
        out = root / figure
        proc = subprocess.run(
            [sys.executable, "-m", "llrd.cli", "reproduce", "--figure", figure,
             "--out", str(out)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
    return root


@pytest.mark.parametrize("figure", ["fig2", "fig3"])
def test_renders_reference_figures(figure_dirs, tmp_path, figure):
    out_img = tmp_path / f"{figure}.png"
    code = main(
        [
            "--curve", str(figure_dirs / figure / f"{figure}.csv"),
            "--markers", str(figure_dirs / figure / "markers.json"),
            "--out", str(out_img),
        ]
    )
    assert code == 0
    assert out_img.stat().st_size > 1000


def test_truncated_csv_names_missing_column(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("D,R_loglik\n0.1,0.5\n0.2,0.4\n")
    code = main(["--curve", str(bad), "--out", str(tmp_path / "x.png")])
    assert code == 2
    assert "R_logloss_bound" in capsys.readouterr().err


def test_non_numeric_value_is_rejected(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("D,R_loglik,R_logloss_bound\n0.1,oops,0.5\n")
    with pytest.raises(CurveFileError, match="R_loglik"):
        load_curve(str(bad))


def test_non_increasing_distortion_is_rejected(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("D,R_loglik,R_logloss_bound\n0.2,0.5,0.5\n0.1,0.6,0.6\n")
    with pytest.raises(CurveFileError, match="strictly increasing"):
        load_curve(str(bad))


def test_markers_are_optional(figure_dirs, tmp_path):
    out_img = tmp_path / "plain.png"
    code = main(
        ["--curve", str(figure_dirs / "fig2" / "fig2.csv"), "--out", str(out_img)]
    )
    assert code == 0
    assert out_img.exists()


def test_empty_marker_document_renders_curves_only(figure_dirs, tmp_path):
    empty = tmp_path / "empty.json"
    empty.write_text("{}\n")
    out_img = tmp_path / "plain.png"
    code = main(
        [
            "--curve", str(figure_dirs / "fig2" / "fig2.csv"),
            "--markers", str(empty),
            "--out", str(out_img),
        ]
    )
    assert code == 0


def test_render_is_deterministic(figure_dirs, tmp_path):
    imgs = []
    for name in ("one.png", "two.png"):
        out_img = tmp_path / name
        render(
            str(figure_dirs / "fig3" / "fig3.csv"),
            str(figure_dirs / "fig3" / "markers.json"),
            str(out_img),
        )
        imgs.append(out_img.read_bytes())
    assert imgs[0] == imgs[1]


def test_console_script_roundtrip(figure_dirs, tmp_path):
    out_img = tmp_path / "cli.png"
    proc = subprocess.run(
        [
            sys.executable, "-m", "render",
            "--curve", str(figure_dirs / "fig2" / "fig2.csv"),
            "--markers", str(figure_dirs / "fig2" / "markers.json"),
            "--out", str(out_img),
        ],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert out_img.exists()
