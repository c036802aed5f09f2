"""
Config loading and the CLI entry point, run in-process.
"""
from __future__ import annotations

import json

import pytest

from rifscope import cli
from rifscope.cli import EXIT_INPUT, EXIT_NUMERIC, EXIT_OK, EXIT_VIOLATION, main
from rifscope.construct import catalog_names
from rifscope.levelcurves import CSV_COLUMNS, PORTRAIT_SCHEMA
from rifscope.rif import Rif
from rifscope.runner import DEFAULTS, load_config, load_poly
from rifscope.schema import validate_report, validate_verify

FAST_CONFIG = """\
grid: 1024
validate:
  samples: 40
  quasi_random: 1024
contact:
  identity_pairs: 1
interlace:
  trials: 200
"""


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "fast.yaml"
    path.write_text(FAST_CONFIG)
    return str(path)


def _write(tmp_path, name: str, doc) -> str:
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def _pair(re: float, im: float = 0.0) -> list:
    return [re, im]


# ── load_config ───────────────────────────────────────────────────────────────

class TestLoadConfig:
    def test_defaults_without_file(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        cfg = load_config()
        assert cfg["grid"] == DEFAULTS["grid"]
        assert cfg["validate"]["samples"] == 200
        assert cfg["_seed"] == DEFAULTS["seed"]
        assert cfg["_report_path"] is None
        assert "_config_path" not in cfg

    def test_found_in_cwd(self, tmp_path, monkeypatch):
        (tmp_path / "rifscope.yaml").write_text("grid: 512\n")
        monkeypatch.chdir(tmp_path)
        cfg = load_config()
        assert cfg["grid"] == 512
        assert cfg["_config_path"] == "rifscope.yaml"

    def test_missing_explicit_path(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="No rifscope config"):
            load_config(tmp_path / "nope.yaml")

    def test_nested_override_keeps_siblings(self, config):
        cfg = load_config(config)
        assert cfg["validate"]["samples"] == 40
        assert cfg["validate"]["witness_margin"] == DEFAULTS["validate"]["witness_margin"]
        assert cfg["contact"]["extended_dps"] == 80

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("gird: 10\n")
        with pytest.raises(ValueError, match="Unknown config key 'gird'"):
            load_config(path)

    def test_unknown_nested_key(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("validate:\n  sample: 10\n")
        with pytest.raises(ValueError, match="validate.sample"):
            load_config(path)

    def test_bad_integer(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("grid: -3\n")
        with pytest.raises(ValueError, match="'grid' must be an integer"):
            load_config(path)

    def test_bool_is_not_an_integer(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("seed: true\n")
        with pytest.raises(ValueError, match="'seed'"):
            load_config(path)

    def test_bad_radii(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("intersect:\n  radii: []\n")
        with pytest.raises(ValueError, match="intersect.radii"):
            load_config(path)

    def test_section_must_be_mapping(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("tolerances: 3\n")
        with pytest.raises(ValueError, match="must be a mapping"):
            load_config(path)

    def test_top_level_must_be_mapping(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ValueError, match="top level"):
            load_config(path)

    def test_report_path_relative_to_config(self, tmp_path):
        sub = tmp_path / "cfg"
        sub.mkdir()
        (sub / "rifscope.yaml").write_text("output:\n  report: out/report.json\n")
        cfg = load_config(sub / "rifscope.yaml")
        assert cfg["_report_path"] == str(sub / "out" / "report.json")


class TestLoadPoly:
    def test_rif_document_rejected(self, tmp_path):
        path = _write(tmp_path, "f.json", {"p": {"bidegree": [0, 0], "coeffs": [[_pair(1)]]}})
        with pytest.raises(ValueError, match="expected a polynomial"):
            load_poly(path)

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ValueError, match="not valid JSON"):
            load_poly(path)


# ── main ──────────────────────────────────────────────────────────────────────

class TestFixturesCommand:
    def test_lists_names(self, capsys):
        assert main(["fixtures"]) == EXIT_OK
        names = capsys.readouterr().out.split()
        assert "faveform" in names
        assert names == sorted(names)


class TestInputErrors:
    def test_no_source(self, config, capsys):
        assert main(["analyze", "--config", config]) == EXIT_INPUT
        assert "error: Give a Rif JSON file" in capsys.readouterr().err

    def test_unknown_fixture(self, config, capsys):
        assert main(["analyze", "--fixture", "nope", "--config", config]) == EXIT_INPUT
        assert "No fixture named" in capsys.readouterr().err

    def test_bad_file(self, config, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        assert main(["analyze", str(path), "--config", config]) == EXIT_INPUT
        assert capsys.readouterr().err.startswith("error:")

    def test_missing_config(self, tmp_path, capsys):
        assert main(["fixtures", "--config", str(tmp_path / "nope.yaml")]) == EXIT_OK
        # `fixtures` never reads the config
        assert main(["analyze", "--fixture", "faveform",
                     "--config", str(tmp_path / "nope.yaml")]) == EXIT_INPUT

    def test_interior_zero(self, config, tmp_path, capsys):
        doc = {"p": {"bidegree": [1, 1], "coeffs": [[_pair(0.5), _pair(-1)], [_pair(-1), _pair(0)]]}}
        path = _write(tmp_path, "f.json", doc)
        assert main(["analyze", path, "--config", config]) == EXIT_INPUT
        assert "inside the bidisk" in capsys.readouterr().err

    def test_numerical_failure(self, config, monkeypatch, capsys):
        from rifscope.errors import NoLimit

        def boom(*args, **kwargs):
            raise NoLimit("no radial limit")

        monkeypatch.setattr("rifscope.runner.analyze", boom)
        assert main(["analyze", "--fixture", "faveform", "--config", config]) == EXIT_NUMERIC
        assert "no radial limit" in capsys.readouterr().err


class TestAnalyzeCommand:
    def test_report(self, config, tmp_path):
        out = tmp_path / "report.json"
        code = main(["analyze", "--fixture", "faveform", "--config", config, "-o", str(out), "--quiet"])
        assert code == EXIT_OK
        report = json.loads(out.read_text())
        validate_report(report)
        assert report["rif_id"] == "faveform"
        assert report["global_K"] == 2
        assert report["header"]["seed"] == DEFAULTS["seed"]
        (sp,) = report["singular_points"]
        assert sp["K_tau"] == 2 and sp["N_tau"] == 2
        assert report["bezout"]["total"] == report["bezout"]["bezout_expected"] == 2

    def test_seed_flag(self, config, tmp_path):
        out = tmp_path / "report.json"
        main(["analyze", "--fixture", "smooth3", "--config", config, "--seed", "7",
              "-o", str(out), "--quiet"])
        report = json.loads(out.read_text())
        assert report["header"]["seed"] == 7
        assert report["singular_points"] == []
        assert report["global_K"] is None

    def test_summary_on_stderr(self, config, tmp_path, capsys):
        main(["analyze", "--fixture", "faveform", "--config", config, "-o", str(tmp_path / "r.json")])
        assert "faveform: 1 singular point(s)" in capsys.readouterr().err

    def test_grid_reaches_the_level_checks(self, config, tmp_path):
        grids = {}
        for grid in (256, 1024):
            out = tmp_path / f"report-{grid}.json"
            main(["analyze", "--fixture", "faveform", "--config", config, "--grid", str(grid),
                  "-o", str(out), "--quiet"])
            report = json.loads(out.read_text())
            assert report["header"]["grid"] == grid
            (closure,) = [c for c in report["identity_checks"] if c["name"] == "closure"]
            assert closure["pass"]
            grids[grid] = closure["detail"]["grid"]
        assert grids == {256: 256, 1024: 1024}

    def test_blaschke_check_in_report(self, config, tmp_path):
        out = tmp_path / "report.json"
        main(["analyze", "--fixture", "mbm", "--config", config, "-o", str(out), "--quiet"])
        checks = [c for c in json.loads(out.read_text())["identity_checks"] if c["name"] == "blaschke"]
        assert len(checks) == 2
        assert all(c["pass"] and c["detail"]["deviation"] <= 1e-9 for c in checks)


class TestPortraitCommand:
    def test_csv_on_stdout(self, config, capsys):
        code = main(["portrait", "--fixture", "faveform", "--levels", "2", "--grid", "256",
                     "--config", config])
        assert code == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert len(lines) > 256

    def test_json_file(self, config, tmp_path):
        out = tmp_path / "portrait.json"
        main(["portrait", "--fixture", "faveform", "--levels", "4", "--grid", "256",
              "--config", config, "-o", str(out)])
        doc = json.loads(out.read_text())
        assert doc["schema"] == PORTRAIT_SCHEMA
        assert len(doc["curves"]) == 4
        assert doc["grid"] == 256
        assert all(c["flag"] == "generic" for c in doc["curves"])

    def test_exceptional_candidate_is_flagged(self, config, tmp_path, monkeypatch):
        monkeypatch.setattr("rifscope.contact.contact_order_at",
                            lambda *a, **kw: {"exceptional_candidate": [0.6 + 0.8j]})
        out = tmp_path / "portrait.json"
        main(["portrait", "--fixture", "faveform", "--levels", "2", "--grid", "256",
              "--config", config, "-o", str(out)])
        curves = json.loads(out.read_text())["curves"]
        assert len(curves) == 3
        (flagged,) = [c for c in curves if c["flag"] == "exceptional"]
        assert flagged["lambda"] == pytest.approx([0.6, 0.8])

    def test_candidate_on_a_requested_level(self, config, tmp_path, monkeypatch):
        monkeypatch.setattr("rifscope.contact.contact_order_at",
                            lambda *a, **kw: {"exceptional_candidate": [1j]})
        out = tmp_path / "portrait.json"
        main(["portrait", "--fixture", "faveform", "--levels", "2", "--grid", "256",
              "--config", config, "-o", str(out)])
        flags = sorted(c["flag"] for c in json.loads(out.read_text())["curves"])
        assert flags == ["exceptional", "generic"]

    def test_skip_exceptional(self, config, tmp_path, monkeypatch):
        def boom(*a, **kw):
            raise AssertionError("contact cross-check should not run")

        monkeypatch.setattr("rifscope.contact.contact_order_at", boom)
        out = tmp_path / "portrait.json"
        code = main(["portrait", "--fixture", "faveform", "--levels", "2", "--grid", "256",
                     "--skip-exceptional", "--config", config, "-o", str(out)])
        assert code == EXIT_OK
        assert len(json.loads(out.read_text())["curves"]) == 2


class TestConstructCommand:
    def test_embed(self, config, tmp_path):
        r = _write(tmp_path, "r.json", {
            "bidegree": [1, 1],
            "coeffs": [[_pair(1), _pair(0)], [_pair(0), _pair(-1)]],
        })
        out = tmp_path / "rif.json"
        assert main(["construct", "embed", r, "--config", config, "-o", str(out)]) == EXIT_OK
        f = Rif.from_json(json.loads(out.read_text()))
        assert f.monomial == (1, 1)
        assert f.evaluate(0.5, 0.5) == pytest.approx(-0.25)

    def test_embed_not_symmetric(self, config, tmp_path, capsys):
        r = _write(tmp_path, "r.json", {
            "bidegree": [1, 1],
            "coeffs": [[_pair(2), _pair(-1)], [_pair(-1), _pair(0)]],
        })
        assert main(["construct", "embed", r, "--config", config]) == EXIT_INPUT
        assert "essentially symmetric" in capsys.readouterr().err

    def test_glue(self, config, tmp_path):
        out = tmp_path / "glued.json"
        assert main(["construct", "glue", "--fixture", "faveform", "--config", config,
                     "-o", str(out)]) == EXIT_OK
        doc = json.loads(out.read_text())
        assert doc["name"] == "faveform~glued"
        assert doc["p"]["bidegree"] == [2, 2]

    def test_transfer(self, config, tmp_path):
        A = _write(tmp_path, "A.json", [[0]])
        Y = _write(tmp_path, "Y.json", [1])
        out = tmp_path / "rif.json"
        assert main(["construct", "transfer", A, Y, "--config", config, "-o", str(out)]) == EXIT_OK
        f = Rif.from_json(json.loads(out.read_text()))
        assert f.monomial == (1, 0)

    def test_transfer_not_self_adjoint(self, config, tmp_path, capsys):
        A = _write(tmp_path, "A.json", [[0, 1], [2, 0]])
        Y = _write(tmp_path, "Y.json", [1, 0])
        assert main(["construct", "transfer", A, Y, "--config", config]) == EXIT_INPUT
        assert "self-adjoint" in capsys.readouterr().err

    def test_interlace(self, config, tmp_path):
        out = tmp_path / "verdict.json"
        code = main(["construct", "interlace", "--fixture", "faveform", "--trials", "100",
                     "--config", config, "-o", str(out)])
        assert code == EXIT_OK
        doc = json.loads(out.read_text())
        assert doc["is_pick"] is True
        assert doc["trials"] == 100
        assert doc["seed"] == DEFAULTS["seed"]


class TestVerifyCommand:
    def test_faveform_passes(self, config, tmp_path):
        out = tmp_path / "verify.json"
        code = main(["verify", "--fixture", "faveform", "--config", config, "-o", str(out), "--quiet"])
        assert code == EXIT_OK
        doc = json.loads(out.read_text())
        validate_verify(doc)
        assert [r["suite"] for r in doc["results"]] == ["eco", "bezout", "sum-identity", "bijection"]
        assert doc["summary"]["satisfied"] == doc["summary"]["total"] == 4

    def test_single_suite(self, config, tmp_path):
        out = tmp_path / "verify.json"
        main(["verify", "--fixture", "faveform", "--suite", "bezout", "--config", config,
              "-o", str(out), "--quiet"])
        doc = json.loads(out.read_text())
        assert len(doc["results"]) == 1

    def test_violation_exit_code(self, config, tmp_path, monkeypatch):
        def failing(report, suites):
            return {"results": [], "summary": {"total": 1, "satisfied": 0, "score": 0.0}}

        monkeypatch.setattr("rifscope.judgement.engine.run_suites", failing)
        code = main(["verify", "--fixture", "faveform", "--config", config,
                     "-o", str(tmp_path / "v.json"), "--quiet"])
        assert code == EXIT_VIOLATION


# ── every shipped fixture ────────────────────────────────────────────────────

GLOBAL_K = {
    "amy": 4, "bickel-pascoe": 4, "exceptional": 4, "faveform": 2, "glued-fave": 4,
    "mbm": 8, "minimal-co": 2, "smooth3": None,
}


class TestEveryFixture:
    @pytest.mark.parametrize("name", catalog_names())
    def test_analyze(self, name, config, tmp_path):
        out = tmp_path / "report.json"
        code = main(["analyze", "--fixture", name, "--config", config, "-o", str(out), "--quiet"])
        assert code == EXIT_OK
        report = json.loads(out.read_text())
        validate_report(report)
        assert report["global_K"] == GLOBAL_K.get(name, report["global_K"])
        failing = [c for c in report["identity_checks"] if not c["pass"]]
        assert not failing, failing
        assert report["bezout"]["total"] == report["bezout"]["bezout_expected"]

    @pytest.mark.parametrize("name", catalog_names())
    def test_verify(self, name, config, tmp_path):
        out = tmp_path / "verify.json"
        code = main(["verify", "--fixture", name, "--config", config, "-o", str(out), "--quiet"])
        doc = json.loads(out.read_text())
        assert code == EXIT_OK, doc["results"]
        validate_verify(doc)
        assert doc["summary"]["satisfied"] == doc["summary"]["total"]


class TestParser:
    def test_levels_required(self):
        with pytest.raises(SystemExit):
            cli.build_parser().parse_args(["portrait", "--fixture", "faveform"])

    def test_unknown_suite(self):
        with pytest.raises(SystemExit):
            cli.build_parser().parse_args(["verify", "--suite", "nope"])

    def test_cayley_choices(self):
        args = cli.build_parser().parse_args(["construct", "transfer", "A.json", "Y.json"])
        assert args.cayley == "alpha"
        assert args.func is cli.cmd_construct
