import json

import numpy as np
import pandas as pd
import pytest
import xarray as xr
from numpy.testing import assert_allclose

from vnhodge import cli
from vnhodge.config import DEFAULT_TOLERANCES, Tolerances
from vnhodge.data import sample_path
from vnhodge.enums import Command, OutputFormat
from vnhodge.errors import ValidationFailure


def run_json(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, json.loads(out) if out else None, err


class TestCommands:
    @pytest.mark.unittest
    def test_validate(self, capsys):
        code, report, _ = run_json(capsys, "validate", sample_path("z2_circle.json"))
        assert code == 0
        assert report["schema_version"] == cli.REPORT_SCHEMA_VERSION
        assert report["valid"] is True
        assert report["checks"]["cell_counts"] == [1, 1]
        assert "g^2" in report["checks"]["relation_residuals"]

    @pytest.mark.unittest
    def test_validate_cocycle(self, capsys):
        code, report, _ = run_json(capsys, "validate", sample_path("two_patch_cocycle.json"))
        assert code == 0
        assert "cocycle_residuals" in report["checks"]

    @pytest.mark.unittest
    def test_dim(self, capsys):
        code, report, _ = run_json(capsys, "dim", sample_path("two_patch_cocycle.json"))
        assert code == 0
        dims = {row["module"]: row["dim_tau"] for row in report["modules"]}
        assert dims["fiber"] == pytest.approx(1.0)
        assert dims["C^0"] == pytest.approx(2.0)

    @pytest.mark.unittest
    def test_betti(self, capsys):
        code, report, _ = run_json(capsys, "betti", sample_path("z5_circle.json"))
        assert code == 0
        assert_allclose(report["betti"], [0.2, 0.2])
        chi = report["euler_characteristic"]
        assert chi["from_modules"] == pytest.approx(chi["from_betti"])

    @pytest.mark.unittest
    def test_betti_csv(self, tmp_path):
        outfile = tmp_path / "betti.csv"
        code = cli.main(
            ["betti", str(sample_path("wedge.json")), "--format", "csv", "--out", str(outfile)]
        )
        assert code == 0
        table = pd.read_csv(outfile)
        assert list(table.columns) == ["degree", "betti"]
        assert_allclose(table["betti"], [0.5, 1.5])

    @pytest.mark.unittest
    def test_density(self, capsys):
        code, report, _ = run_json(
            capsys, "density", sample_path("z2_circle.json"), "--lambda-grid", "1e-2:10:4"
        )
        assert code == 0
        assert len(report["rows"]) == 8
        assert [d["betti"] for d in report["degrees"]] == pytest.approx([0.5, 0.5])
        final = [r["F"] for r in report["rows"] if r["lambda"] == pytest.approx(10.0)]
        assert final == pytest.approx([1.0, 1.0])

    @pytest.mark.unittest
    def test_density_fit(self, capsys):
        code, report, _ = run_json(
            capsys,
            "density",
            sample_path("sampled_circle.json"),
            "--lambda-grid",
            "1e-3:1e-1:15:log",
            "--window",
            "1e-3:1e-1",
        )
        assert code == 0
        slopes = [d["slope"] for d in report["degrees"]]
        assert slopes == pytest.approx([0.5, 0.5], abs=0.05)

    @pytest.mark.unittest
    def test_truncate(self, capsys):
        code, report, _ = run_json(
            capsys, "truncate", sample_path("z2_circle.json"), "--lambda", "1"
        )
        assert code == 0
        certificate = report["certificate"]
        assert set(certificate) == {"lambda", "residuals", "dims", "gap"}
        assert_allclose(certificate["dims"], [0.5, 0.5])
        assert certificate["gap"] == pytest.approx(3.0)

    @pytest.mark.unittest
    def test_truncate_tie(self, capsys):
        code, report, err = run_json(
            capsys, "truncate", sample_path("z2_circle.json"), "--lambda", "4"
        )
        assert code == 3
        assert report is None
        assert json.loads(err.splitlines()[-1])["error"] == "BoundaryTie"

        code, report, _ = run_json(
            capsys,
            "truncate",
            sample_path("z2_circle.json"),
            "--lambda",
            "4",
            "--allow-ties",
        )
        assert code == 0
        assert_allclose(report["certificate"]["dims"], [1.0, 1.0])

    @pytest.mark.unittest
    def test_witten(self, capsys):
        code, report, _ = run_json(
            capsys, "witten", sample_path("morse_circle.json"), "--t-grid", "1:5:5"
        )
        assert code == 0
        assert report["command"] == "witten"
        assert len(report["rows"]) == 10
        assert all(row["small_count"] == pytest.approx(1.0) for row in report["rows"])

    @pytest.mark.unittest
    def test_betti_parquet(self, tmp_path):
        outfile = tmp_path / "betti.parquet"
        argv = ["betti", str(sample_path("wedge.json")), "--format", "parquet"]
        assert cli.main(argv + ["--out", str(outfile)]) == 0
        table = pd.read_parquet(outfile)
        assert list(table.columns) == ["degree", "betti"]
        assert_allclose(table["betti"], [0.5, 1.5])

    @pytest.mark.unittest
    def test_compare_parquet(self, tmp_path):
        outfile = tmp_path / "compare.parquet"
        argv = ["compare", str(sample_path("z2_circle.json")), "--format", "parquet"]
        assert cli.main(argv + ["--out", str(outfile)]) == 0
        table = pd.read_parquet(outfile)
        assert list(table["degree"]) == [0, 1]
        assert table["slope_agrees"].all()

    @pytest.mark.unittest
    def test_witten_netcdf(self, tmp_path):
        outfile = tmp_path / "witten.nc"
        argv = ["witten", str(sample_path("morse_circle.json")), "--t-grid", "1:5:5"]
        assert cli.main(argv + ["--format", "netcdf", "--out", str(outfile)]) == 0
        ds = xr.load_dataset(outfile)
        assert dict(ds.sizes) == {"t": 5, "degree": 2}
        assert_allclose(ds["t"].values, [1.0, 2.0, 3.0, 4.0, 5.0])
        assert_allclose(ds["small_count"].values, np.ones((5, 2)))
        assert ds.attrs["split"] == 1.0

    @pytest.mark.unittest
    def test_witten_needs_morse(self, capsys):
        code, _, err = run_json(capsys, "witten", sample_path("z2_circle.json"))
        assert code == 2
        assert "morse" in json.loads(err.splitlines()[-1])["message"]

    @pytest.mark.unittest
    def test_compare_subdivision(self, capsys):
        code, report, _ = run_json(capsys, "compare", sample_path("z2_circle.json"))
        assert code == 0
        assert report["verdict"] is True
        assert report["chain_map_residual"] < 1e-12

    @pytest.mark.unittest
    def test_compare_subdivision_file(self, capsys):
        code, report, _ = run_json(
            capsys,
            "compare",
            sample_path("z2_circle.json"),
            "--subdivision",
            sample_path("circle_subdivision.json"),
        )
        assert code == 0
        assert report["verdict"] is True

    @pytest.mark.unittest
    def test_compare_two_inputs(self, capsys):
        # the one-vertex circle and the two-patch circle carry the same sign bundle
        code, report, _ = run_json(
            capsys,
            "compare",
            sample_path("z2_circle.json"),
            sample_path("two_patch_cocycle.json"),
        )
        assert code == 0
        assert report["verdict"] is True
        assert "chain_map_residual" not in report

        code, report, err = run_json(
            capsys, "compare", sample_path("z2_circle.json"), sample_path("z3_circle.json")
        )
        assert code == 2
        assert json.loads(err.splitlines()[-1])["error"] == "ShapeMismatch"

    @pytest.mark.unittest
    def test_farber(self, capsys):
        code, report, _ = run_json(capsys, "farber", 1, 2, 3)
        assert code == 0
        last = report["rows"][-1]
        assert last["K"] == 3
        assert last["dim_tau"] == pytest.approx(1.375)
        assert last["sup_value"] == 3.0
        assert report["bound"] is None
        assert report["growth"] == pytest.approx(1.0)


def drop_terms(doc):
    del doc["cw"]["incidence"][0]["terms"]


def modules_as_array(doc):
    doc["modules"] = []


def drop_blocks(doc):
    del doc["morphisms"]["id"]["blocks"]


def incidence_as_object(doc):
    doc["cw"]["incidence"] = {"e": 1}


def bundle_as_array(doc):
    doc["bundle"] = []


def monodromy_as_array(doc):
    doc["bundle"]["monodromy"] = ["id"]


def cw_as_array(doc):
    doc["cw"] = ["v"]


MALFORMED = [
    (drop_terms, "/cw/incidence/0"),
    (modules_as_array, "/modules"),
    (drop_blocks, "/morphisms/id/blocks"),
    (incidence_as_object, "/cw/incidence"),
    (bundle_as_array, "/bundle"),
    (monodromy_as_array, "/bundle/monodromy"),
    (cw_as_array, "/cw/cells"),
]


class TestErrors:
    @pytest.mark.unittest
    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run_json(capsys, "betti", tmp_path / "missing.json")
        assert code == 2
        error = json.loads(err.splitlines()[-1])
        assert error["error"] == "ParseError"
        assert error["details"]["path"].endswith("missing.json")

    @pytest.mark.unittest
    @pytest.mark.parametrize("corrupt, location", MALFORMED)
    def test_malformed_document(self, capsys, tmp_path, corrupt, location):
        document = json.loads(sample_path("circle_trivial.json").read_text())
        corrupt(document)
        path = tmp_path / "malformed.json"
        path.write_text(json.dumps(document))

        code, _, err = run_json(capsys, "validate", path)
        assert code == 2
        error = json.loads(err.splitlines()[-1])
        assert error["error"] == "ParseError"
        assert error["details"]["location"] == location

    @pytest.mark.unittest
    def test_missing_terms_reason(self, capsys, tmp_path):
        document = json.loads(sample_path("circle_trivial.json").read_text())
        drop_terms(document)
        path = tmp_path / "malformed.json"
        path.write_text(json.dumps(document))

        _, _, err = run_json(capsys, "betti", path)
        assert "missing key 'terms'" in json.loads(err.splitlines()[-1])["message"]

    @pytest.mark.unittest
    def test_invalid_tolerance(self, capsys):
        code, _, err = run_json(
            capsys, "betti", sample_path("z2_circle.json"), "--eps-null", "-1"
        )
        assert code == 2
        assert json.loads(err.splitlines()[-1])["details"]["name"] == "eps_null"

    @pytest.mark.unittest
    def test_invalid_window(self, capsys):
        code, _, _ = run_json(
            capsys, "density", sample_path("z2_circle.json"), "--window", "1:0.1"
        )
        assert code == 2

    @pytest.mark.unittest
    def test_internal_error(self, capsys, monkeypatch):
        def broken(self):
            raise RuntimeError("boom")

        monkeypatch.setattr(cli.Runner, "run_betti", broken)
        code, _, err = run_json(capsys, "betti", sample_path("z2_circle.json"))
        assert code == 1
        assert json.loads(err.splitlines()[-1])["error"] == "InternalError"

    @pytest.mark.unittest
    def test_version(self, capsys):
        with pytest.raises(SystemExit) as e:
            cli.main(["--version"])
        assert e.value.code == 0
        assert capsys.readouterr().out.strip() == cli.__version__


class TestRunConfig:
    @pytest.mark.unittest
    def test_defaults(self):
        config = cli.RunConfig(Command.BETTI)
        assert config.tolerances == Tolerances()
        assert config.tolerances is DEFAULT_TOLERANCES
        assert config.lambda_grid == cli.DEFAULT_LAMBDA_GRID

    @pytest.mark.unittest
    def test_invalid(self):
        with pytest.raises(ValidationFailure):
            cli.RunConfig(Command.BETTI, fibers=0)
        with pytest.raises(ValidationFailure):
            cli.RunConfig(Command.BETTI, jobs=0)

    @pytest.mark.unittest
    def test_binary_formats(self, tmp_path):
        with pytest.raises(ValidationFailure, match="needs --out"):
            cli.RunConfig(Command.BETTI, format=OutputFormat.PARQUET)
        with pytest.raises(ValidationFailure, match="witten"):
            cli.RunConfig(Command.BETTI, format=OutputFormat.NETCDF, out=tmp_path / "b.nc")
        config = cli.RunConfig(
            Command.WITTEN, format=OutputFormat.NETCDF, out=tmp_path / "w.nc"
        )
        assert config.format.is_binary

    @pytest.mark.unittest
    def test_validate_has_no_table(self, capsys, tmp_path):
        code, _, err = run_json(
            capsys,
            "validate",
            sample_path("z2_circle.json"),
            "--format",
            "parquet",
            "--out",
            tmp_path / "v.parquet",
        )
        assert code == 2
        assert "no table" in json.loads(err.splitlines()[-1])["message"]

    @pytest.mark.unittest
    def test_parse_window(self):
        assert cli.parse_window("1e-4:1e-2") == (1e-4, 1e-2)
        with pytest.raises(ValidationFailure):
            cli.parse_window("1e-4")
