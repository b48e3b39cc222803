import hashlib
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from llrd import cli
from llrd.cli import (
    EXIT_INAPPLICABLE,
    EXIT_OK,
    EXIT_VALIDATION,
    FIGURE_SPECS,
    SpecError,
    main,
    parse_spec,
)

FIG2_DOC = FIGURE_SPECS["fig2"]
HAMMING_DOC = {
    "name": "hamming-p25",
    "units": "bits",
    "source": {"alphabet": ["0", "1"], "probs": [0.75, 0.25]},
    "distortion": {"recon_alphabet": ["0", "1"], "entries": [[0, 1], [1, 0]]},
}


def write_spec(tmp_path, doc, name="spec.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


class TestSpecParsing:
    def test_round_trip(self):
        spec = parse_spec(FIG2_DOC)
        assert spec.source.probs == pytest.approx([0.75, 0.25])
        assert spec.channel.matrix[0, 0] == 0.9
        again = parse_spec(FIG2_DOC)
        assert again.sha256 == spec.sha256
        assert again.source.probs == pytest.approx(spec.source.probs)

    def test_error_names_field_and_index(self):
        doc = json.loads(json.dumps(FIG2_DOC))
        doc["channel"]["matrix"][1][0] = "x"
        with pytest.raises(SpecError, match=r"channel\.matrix\[1\]\[0\]"):
            parse_spec(doc)

    def test_error_names_probs_index(self):
        doc = json.loads(json.dumps(FIG2_DOC))
        doc["source"]["probs"] = [0.75, "bad"]
        with pytest.raises(SpecError, match=r"source\.probs\[1\]"):
            parse_spec(doc)

    def test_unknown_field_rejected(self):
        doc = dict(FIG2_DOC)
        doc["extra"] = 1
        with pytest.raises(SpecError, match="unknown fields"):
            parse_spec(doc)

    def test_inf_distortion_entries(self):
        doc = json.loads(json.dumps(HAMMING_DOC))
        doc["distortion"]["entries"][0][1] = "inf"
        spec = parse_spec(doc)
        assert math.isinf(spec.distortion.entries[0, 1])

    def test_units_override(self):
        spec = parse_spec(FIG2_DOC, override_units="nats")
        assert spec.units.value == "nats"

    def test_example_files_match_builtins(self):
        for fig in ("fig2", "fig3"):
            with open(f"specs/{fig}.json") as fh:
                doc = json.load(fh)
            assert doc == FIGURE_SPECS[fig]


class TestAnalyze:
    def test_fig2_values(self, tmp_path):
        spec_path = write_spec(tmp_path, FIG2_DOC)
        assert main(["analyze", "--spec", spec_path, "--out", str(tmp_path)]) == EXIT_OK
        bundle = json.loads((tmp_path / "analyze.json").read_text())
        res = bundle["results"]
        assert res["d_min"] == pytest.approx(0.152, abs=1e-3)
        assert res["d_max"] == pytest.approx(0.945, abs=1e-3)
        assert res["h_x"] == pytest.approx(0.8113, abs=5e-4)
        assert res["consistency"]["d_star"] == pytest.approx(0.469, abs=1e-3)
        assert res["consistency"]["witness_prior"]["u1"] == pytest.approx(
            0.1875, abs=1e-6
        )

    def test_missing_channel_is_validation_error(self, tmp_path):
        spec_path = write_spec(tmp_path, HAMMING_DOC)
        assert main(["analyze", "--spec", spec_path]) == EXIT_VALIDATION

    def test_identity_channel_spec(self, tmp_path):
        doc = {
            "name": "ident",
            "source": {"alphabet": ["a", "b"], "probs": [0.4, 0.6]},
            "channel": {"input_alphabet": ["a", "b"], "matrix": [[1, 0], [0, 1]]},
        }
        spec_path = write_spec(tmp_path, doc)
        assert main(["analyze", "--spec", spec_path, "--out", str(tmp_path)]) == EXIT_OK
        res = json.loads((tmp_path / "analyze.json").read_text())["results"]
        assert res["d_min"] == 0.0
        assert res["consistency"]["feasible"]
        assert res["consistency"]["witness_prior"]["a"] == pytest.approx(0.4, abs=1e-9)


class TestCurve:
    def test_csv_schema_and_values(self, tmp_path):
        spec_path = write_spec(tmp_path, FIG2_DOC)
        assert main(
            ["curve", "--spec", spec_path, "--out", str(tmp_path), "--points", "50"]
        ) == EXIT_OK
        lines = (tmp_path / "curve.csv").read_text().splitlines()
        assert lines[0] == "D,R_loglik,R_logloss_bound,slope,converged"
        rows = [line.split(",") for line in lines[1:]]
        ds = [float(r[0]) for r in rows]
        assert ds == sorted(ds)
        assert ds[0] == pytest.approx(0.152, abs=5e-3)
        assert ds[-1] == pytest.approx(0.945, abs=5e-3)
        rl = [float(r[1]) for r in rows]
        assert rl[0] == pytest.approx(0.8113, abs=5e-3)
        for r in rows:
            assert r[4] in ("0", "1")
            assert float(r[1]) >= float(r[2]) - 1e-6  # loglik above log-loss bound


class TestDualCommand:
    def test_hamming_values(self, tmp_path):
        spec_path = write_spec(tmp_path, HAMMING_DOC)
        code = main(
            [
                "dual",
                "--spec",
                spec_path,
                "--distortion",
                "0.1",
                "--out",
                str(tmp_path),
            ]
        )
        assert code == EXIT_OK
        res = json.loads((tmp_path / "dual.json").read_text())["results"]
        expect_bits = (
            -(0.25 * math.log2(0.25) + 0.75 * math.log2(0.75))
            + 0.1 * math.log2(0.1)
            + 0.9 * math.log2(0.9)
        )
        assert res["rate"] == pytest.approx(expect_bits, abs=1e-6)
        assert res["lambda_star_nats"] == pytest.approx(math.log(9), abs=1e-6)

    def test_empty_feasible_set_exit_code(self, tmp_path):
        spec_path = write_spec(tmp_path, HAMMING_DOC)
        code = main(
            [
                "dual",
                "--spec",
                spec_path,
                "--distortion",
                "0.1",
                "--lambda-min",
                "0.01",
                "--lambda-max",
                "1.0",
                "--out",
                str(tmp_path),
            ]
        )
        assert code == EXIT_INAPPLICABLE

    def test_degenerate_distortion_inapplicable(self, tmp_path):
        doc = json.loads(json.dumps(HAMMING_DOC))
        doc["distortion"]["entries"] = [[0, 0], [0, 0]]
        spec_path = write_spec(tmp_path, doc)
        code = main(
            ["dual", "--spec", spec_path, "--distortion", "0.0", "--out", str(tmp_path)]
        )
        assert code == EXIT_INAPPLICABLE


class TestTranslateCommand:
    def test_bsc_construction_and_table(self, tmp_path):
        spec_path = write_spec(tmp_path, HAMMING_DOC)
        code = main(
            [
                "translate",
                "--spec",
                spec_path,
                "--lambda0",
                repr(math.log(9)),
                "--out",
                str(tmp_path),
            ]
        )
        assert code == EXIT_OK
        res = json.loads((tmp_path / "translate.json").read_text())["results"]
        mat = np.array(res["channel"]["matrix"])
        assert mat == pytest.approx(np.array([[0.9, 0.1], [0.1, 0.9]]), abs=1e-12)
        table = res["equivalence_table"]
        assert len(table) == 10
        for row in table:
            assert abs(row["rate_classical"] - row["rate_loglik"]) <= 1e-3


class TestRdpCommand:
    def test_symmetric_pipeline(self, tmp_path):
        doc = json.loads(json.dumps(HAMMING_DOC))
        doc["source"]["probs"] = [0.5, 0.5]
        spec_path = write_spec(tmp_path, doc)
        code = main(
            ["rdp", "--spec", spec_path, "--distortion", "0.1", "--out", str(tmp_path)]
        )
        assert code == EXIT_OK
        res = json.loads((tmp_path / "rdp.json").read_text())["results"]
        assert res["all_passed"]
        assert np.array(res["coupling"]) == pytest.approx(
            np.array([[0.45, 0.05], [0.05, 0.45]]), abs=1e-6
        )
        assert res["cp_residual"] <= 1e-6
        hb = -(0.1 * math.log2(0.1) + 0.9 * math.log2(0.9))
        assert res["rate"] == pytest.approx(1 - hb, abs=1e-4)

    def test_generous_budget_rate_zero(self, tmp_path):
        spec_path = write_spec(tmp_path, HAMMING_DOC)
        code = main(
            ["rdp", "--spec", spec_path, "--distortion", "0.9", "--out", str(tmp_path)]
        )
        assert code == EXIT_OK
        res = json.loads((tmp_path / "rdp.json").read_text())["results"]
        assert res["rate"] == 0.0
        assert res["all_passed"]


class TestReproduce:
    def test_fig2_markers(self, tmp_path):
        assert main(["reproduce", "--figure", "fig2", "--out", str(tmp_path)]) == EXIT_OK
        doc = json.loads((tmp_path / "markers.json").read_text())
        m = doc["markers"]
        assert m["d_min"] == pytest.approx(0.152, abs=1e-3)
        assert m["d_max"] == pytest.approx(0.945, abs=1e-3)
        assert m["d_star"] == pytest.approx(0.469, abs=1e-3)
        assert m["h_x"] == pytest.approx(0.8113, abs=5e-4)

    def test_fig3_markers(self, tmp_path):
        assert main(["reproduce", "--figure", "fig3", "--out", str(tmp_path)]) == EXIT_OK
        m = json.loads((tmp_path / "markers.json").read_text())["markers"]
        assert m["d_min"] == pytest.approx(0.322, abs=1e-3)
        assert m["d_max"] == pytest.approx(1.022, abs=1e-3)
        assert m["h_x"] == pytest.approx(0.934, abs=1e-3)
        assert m["d_star_lo"] == pytest.approx(0.722, abs=1e-3)
        assert m["d_star_hi"] == pytest.approx(0.815, abs=1e-3)

    def test_byte_identical_reruns(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        for out in (out1, out2):
            assert main(["reproduce", "--figure", "fig2", "--out", str(out)]) == EXIT_OK
        for name in ("fig2.csv", "markers.json"):
            h1 = hashlib.sha256((out1 / name).read_bytes()).hexdigest()
            h2 = hashlib.sha256((out2 / name).read_bytes()).hexdigest()
            assert h1 == h2, name

    def test_bundles_are_deterministic(self, tmp_path):
        spec_path = write_spec(tmp_path, FIG2_DOC)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        for out in (out1, out2):
            assert main(["analyze", "--spec", spec_path, "--out", str(out)]) == EXIT_OK
        assert (out1 / "analyze.json").read_bytes() == (out2 / "analyze.json").read_bytes()


class TestOutputHygiene:
    def test_sanitize_rejects_nan(self):
        with pytest.raises(RuntimeError):
            cli._sanitize({"x": float("nan")})

    def test_sanitize_renders_inf(self):
        assert cli._sanitize({"x": math.inf}) == {"x": "inf"}
        assert cli._sanitize([-math.inf]) == ["-inf"]

    def test_fmt_significant_digits(self):
        assert cli._fmt(0.8112781244591327) == "0.811278124459"
        assert cli._fmt(math.inf) == "inf"


def test_console_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "llrd.cli", "--version"], capture_output=True, text=True
    )
    assert proc.returncode == 0
    assert "llrd" in proc.stdout
