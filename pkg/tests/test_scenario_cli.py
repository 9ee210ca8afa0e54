import json
from pathlib import Path

import pytest
import yaml

from finslercheck.cli import bundled_scenarios, main, resolve_scenario_path
from finslercheck.registry import REGISTRY, list_registry, resolve_selection, UnknownEquationError
from finslercheck.report import machine_json, write_outputs
from finslercheck.scenario import ScenarioError, load_scenario, parse_scenario, run_scenario

SCN_DIR = Path(__file__).parents[1] / "src" / "finslercheck" / "scenarios"


def minimal_doc(**over):
    doc = {
        "name": "mini",
        "metric": {"family": "euclidean", "dimension": 2},
        "sample": {"points": 4, "seed": 1},
        "select": {"ids": ["euler", "ginv"]},
    }
    doc.update(over)
    return doc


class TestRegistry:
    def test_listing_contains_expected_entries(self):
        ids = [e.id for e in list_registry()]
        assert "3.4" in ids and "4.13" in ids and "L3.5" in ids
        assert REGISTRY["3.4"].tags == ("H12",)
        assert "TANGENT" in REGISTRY["4.13"].tags
        assert "PARALLEL" in REGISTRY["L3.5"].tags

    def test_stable_ordering(self):
        ids = [e.id for e in list_registry()]
        # numeric ordering with the lemma entry adjacent to its section
        assert ids.index("3.2") < ids.index("3.5") < ids.index("L3.5") < ids.index("3.10")
        assert ids == [e.id for e in list_registry()]

    def test_tag_selection(self):
        ids = resolve_selection(["H12"])
        assert set(ids) >= {"3.1", "3.4"}

    def test_changed_space_section_complete(self):
        # one registry entry per identity of the changed-space section,
        # plus the forward lemma
        want = {f"3.{k}" for k in range(1, 12)} | {"L3.5"}
        have = {e.id for e in list_registry()}
        assert want <= have
        assert len([e for e in list_registry() if e.id in want]) == len(want)

    def test_unknown_id(self):
        with pytest.raises(UnknownEquationError):
            resolve_selection(["9.9"])


class TestScenarioValidation:
    def test_unknown_equation_id_named_in_error(self):
        doc = minimal_doc(select={"ids": ["9.9"]})
        with pytest.raises(ScenarioError, match="9.9"):
            parse_scenario(doc)

    def test_changed_checks_need_hvector(self):
        doc = minimal_doc(select={"ids": ["3.4"]})
        with pytest.raises(ScenarioError, match="hvector"):
            parse_scenario(doc)

    def test_parallel_regime_consistency(self):
        doc = minimal_doc(
            hvector={"mode": "constrained", "rho": 0.1, "plan": {"parallel": False}},
            regime=["PARALLEL"],
            select={"ids": ["L3.5"]},
        )
        with pytest.raises(ScenarioError, match="PARALLEL"):
            parse_scenario(doc)

    def test_fd_checks_rejected_for_constrained(self):
        doc = minimal_doc(
            hvector={"mode": "constrained", "rho": 0.1},
            select={"ids": ["3.11"]},
        )
        with pytest.raises(ScenarioError, match="3.11"):
            parse_scenario(doc)

    def test_bad_polynomial_term(self):
        doc = minimal_doc(
            metric={
                "family": "riemannian",
                "dimension": 2,
                "a": {"diag": [{"terms": [[1.0, [0]]]}, {"const": 1.0}]},
            }
        )
        with pytest.raises(ScenarioError, match="term"):
            parse_scenario(doc)

    def test_all_bundled_scenarios_parse(self):
        paths = bundled_scenarios()
        assert len(paths) >= 12
        for p in paths:
            scn = load_scenario(p)
            assert scn.ids


class TestDeterminism:
    def test_machine_report_byte_identical(self):
        scn_path = SCN_DIR / "parallel-lemma35.yaml"
        r1 = run_scenario(load_scenario(scn_path))
        r2 = run_scenario(load_scenario(scn_path))
        assert machine_json(r1) == machine_json(r2)

    def test_seed_changes_samples(self):
        scn_path = SCN_DIR / "base-euclidean.yaml"
        r1 = run_scenario(load_scenario(scn_path), seed=1)
        r2 = run_scenario(load_scenario(scn_path), seed=2)
        assert r1.all_passed and r2.all_passed
        assert machine_json(r1) != machine_json(r2)


class TestOutputs:
    def test_write_outputs_files(self, tmp_path):
        scn = parse_scenario(minimal_doc())
        result = run_scenario(scn)
        paths = write_outputs(result, tmp_path, timestamp="2000-01-01T00:00:00Z")
        assert paths["json"].exists()
        assert paths["csv"].exists()
        assert paths["figure"].exists()
        doc = json.loads(paths["json"].read_text())
        assert doc["scenario"] == "mini"
        assert doc["timestamp"] == "2000-01-01T00:00:00Z"
        rows = paths["csv"].read_text().strip().splitlines()
        assert rows[0].startswith("equation_id,")
        assert len(rows) == 1 + len(result.reports)

    def test_timestamp_outside_comparable_payload(self):
        scn = parse_scenario(minimal_doc())
        result = run_scenario(scn)
        with_ts = json.loads(machine_json(result, timestamp="x"))
        without = json.loads(machine_json(result))
        with_ts.pop("timestamp")
        assert with_ts == without


class TestCli:
    def test_run_exit_zero_and_outputs(self, tmp_path, capsys):
        rc = main(["run", "base-euclidean", "--outdir", str(tmp_path), "--no-figures"])
        out = capsys.readouterr().out
        assert rc == 0
        assert "checks passed" in out
        assert (tmp_path / "base-euclidean.json").exists()

    def test_run_machine_format(self, capsys):
        rc = main(["run", "base-euclidean", "--format", "machine"])
        assert rc == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["summary"]["fail"] == 0

    def test_only_filter(self, capsys):
        rc = main(["run", "base-euclidean", "--only", "euler,ginv"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "euler" in out and "metricity" not in out

    def test_unknown_scenario(self, capsys):
        rc = main(["run", "no-such-scenario"])
        assert rc == 2
        assert "not found" in capsys.readouterr().err

    def test_tightened_tolerance_fails(self, capsys):
        # an absurd tolerance forces a failing verdict and nonzero exit
        rc = main(["run", "rho0-regression", "--only", "3.11", "--tol", "1e-30"])
        assert rc == 1

    def test_list_registry(self, capsys):
        rc = main(["list"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "3.4" in out and "L3.5" in out and "4.13" in out

    def test_list_scenarios(self, capsys):
        rc = main(["list", "--scenarios"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "rho0-regression" in out

    def test_env_scenario_dir(self, tmp_path, monkeypatch, capsys):
        doc = minimal_doc(name="envtest")
        (tmp_path / "envtest.yaml").write_text(yaml.safe_dump(doc))
        monkeypatch.setenv("FINSLERCHECK_SCENARIOS", str(tmp_path))
        assert resolve_scenario_path("envtest").parent == tmp_path
        rc = main(["run", "envtest"])
        assert rc == 0
