import csv
import io
import json
import math
from importlib import resources

import jsonschema
import pytest

from histlaw import cli
from histlaw import scenarios as sc


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def run_json(capsys, *argv):
    code, out, err = run_cli(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


def load_schema():
    ref = resources.files("histlaw.schema") / "result.schema.json"
    return json.loads(ref.read_text(encoding="utf-8"))


class TestList:
    def test_every_builder_appears_with_defaults(self, capsys):
        code, out, err = run_cli(capsys, "list")
        assert code == 0
        for name in sc.available_scenarios():
            assert f"{name}(" in out
        assert "phase_diff=0.0" in out
        assert "quarter_waves=1" in out


class TestJsonOutput:
    def test_enumerate_validates_against_shipped_schema(self, capsys):
        schema = load_schema()
        for argv in (
            ("run", "--scenario", "three_history"),
            ("run", "--scenario", "mach_zehnder", "--mode", "sample",
             "--seed", "3", "--count", "50"),
            ("run", "--scenario", "mach_zehnder", "--mode", "marginals"),
            ("run", "--scenario", "mach_zehnder", "--mode", "imap"),
        ):
            doc = run_json(capsys, *argv)
            jsonschema.validate(doc, schema)

    def test_enumerate_reports_born_consistency(self, capsys):
        doc = run_json(capsys, "run", "--scenario", "mach_zehnder",
                       "--param", "phase_diff=0.9")
        assert doc["born_consistency"]["pass"] is True
        assert doc["born_consistency"]["max_abs_error"] < 1e-10
        assert doc["results"]["history_count"] == len(doc["results"]["histories"])

    def test_history_records_carry_the_law_fields(self, capsys):
        doc = run_json(capsys, "run", "--scenario", "three_history")
        probs = sorted(h["probability"] for h in doc["results"]["histories"])
        assert probs[0] == probs[1] == 0.0
        assert probs[2] == pytest.approx(1 / 3, abs=1e-12)
        for h in doc["results"]["histories"]:
            f2 = h["feynman_re"] ** 2 + h["feynman_im"] ** 2
            assert h["probability"] == pytest.approx(
                f2 * h["interference_product"], rel=1e-12, abs=1e-15)

    def test_scenario_params_echoed(self, capsys):
        doc = run_json(capsys, "run", "--scenario", "dielectric",
                       "--param", "quarter_waves=3", "--mode", "marginals")
        assert doc["scenario"]["params"]["quarter_waves"] == 3
        assert doc["scenario"]["unitary_declared"] is False

    def test_marginals_values(self, capsys):
        doc = run_json(capsys, "run", "--scenario", "mach_zehnder",
                       "--param", f"phase_diff={math.pi / 3}", "--mode", "marginals")
        borns = sorted(f["born_probability"] for f in doc["results"]["finals"])
        assert borns == pytest.approx([0.25, 0.75], abs=1e-12)
        assert doc["results"]["total_probability"] == pytest.approx(1.0, abs=1e-12)

    def test_marginals_at_the_dark_phase(self, capsys):
        doc = run_json(capsys, "run", "--scenario", "mach_zehnder",
                       "--param", f"phase_diff={math.pi}", "--mode", "marginals")
        for f in doc["results"]["finals"]:
            assert f["born_probability"] < 1e-10 or f["born_probability"] > 1 - 1e-10

    def test_imap_shows_the_cancelling_merge(self, capsys):
        doc = run_json(capsys, "run", "--scenario", "three_history", "--mode", "imap")
        factors = doc["results"]["factors"]
        dead = [f for f in factors if f["slice"] == 2 and f["interference_factor"] < 1e-12]
        assert len(dead) == 1
        assert all(f["interference_factor"] == 1.0 for f in factors if f["slice"] == 1)


class TestCsvOutput:
    def test_history_header_is_stable(self, capsys):
        code, out, _ = run_cli(capsys, "run", "--scenario", "three_history",
                               "--format", "csv")
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == ("history_id,slice_sequence,feynman_re,feynman_im,"
                            "interference_product,probability")
        rows = list(csv.DictReader(io.StringIO(out)))
        assert len(rows) == 3
        assert all("->" in r["slice_sequence"] for r in rows)
        probs = sorted(float(r["probability"]) for r in rows)
        assert probs[:2] == [0.0, 0.0]
        assert probs[2] == pytest.approx(1 / 3, abs=1e-12)

    def test_imap_csv_columns(self, capsys):
        code, out, _ = run_cli(capsys, "run", "--scenario", "mach_zehnder",
                               "--mode", "imap", "--format", "csv")
        assert out.splitlines()[0] == "slice_index,state,interference_factor"


class TestDeterminism:
    def test_reruns_are_byte_identical(self, capsys, tmp_path):
        for argv in (
            ("run", "--scenario", "mach_zehnder", "--mode", "sample",
             "--seed", "7", "--count", "500"),
            ("run", "--scenario", "dielectric", "--param", "blocker_schedule=0010"),
            ("run", "--scenario", "which_way", "--format", "csv"),
        ):
            a = tmp_path / "a.out"
            b = tmp_path / "b.out"
            assert cli.main([*argv, "--out", str(a)]) == 0
            assert cli.main([*argv, "--out", str(b)]) == 0
            capsys.readouterr()
            assert a.read_bytes() == b.read_bytes()

    def test_out_leaves_stdout_quiet(self, capsys, tmp_path):
        target = tmp_path / "run.json"
        code, out, _ = run_cli(capsys, "run", "--scenario", "epr",
                               "--out", str(target))
        assert code == 0
        assert out == ""
        assert json.loads(target.read_text())["mode"] == "enumerate"

    def test_floats_round_trip_through_the_json_text(self, capsys):
        code, out, _ = run_cli(capsys, "run", "--scenario", "mach_zehnder",
                               "--param", "phase_diff=0.9", "--mode", "marginals")
        assert code == 0
        doc = json.loads(out)
        for f in doc["results"]["finals"]:
            assert format(f["born_probability"], ".17g") in out
            assert f["born_probability"] in (
                pytest.approx(math.cos(0.45) ** 2, rel=1e-12),
                pytest.approx(math.sin(0.45) ** 2, rel=1e-12))


class TestParameterSources:
    def test_config_file_sets_params(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"phase_diff": math.pi / 3, "extra_port": True}))
        doc = run_json(capsys, "run", "--scenario", "mach_zehnder",
                       "--config", str(cfg), "--mode", "marginals")
        borns = sorted(f["born_probability"] for f in doc["results"]["finals"])
        assert borns == pytest.approx([0.25, 0.75], abs=1e-12)

    def test_param_overrides_config(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"phase_diff": 0.0}))
        doc = run_json(capsys, "run", "--scenario", "mach_zehnder",
                       "--config", str(cfg),
                       "--param", f"phase_diff={math.pi / 3}", "--mode", "marginals")
        assert doc["scenario"]["params"]["phase_diff"] == pytest.approx(math.pi / 3)

    def test_boolean_spellings(self, capsys):
        for spelling in ("true", "1", "yes", "on"):
            doc = run_json(capsys, "run", "--scenario", "dielectric",
                           "--param", f"observe_route={spelling}",
                           "--mode", "marginals")
            assert doc["scenario"]["params"]["observe_route"] is True

    def test_slices_pads_with_identity_steps(self, capsys):
        doc = run_json(capsys, "run", "--scenario", "mach_zehnder",
                       "--slices", "5", "--mode", "imap")
        assert doc["scenario"]["slice_count"] == 5
        late = [f["interference_factor"] for f in doc["results"]["factors"]
                if f["slice"] > 3]
        assert late and all(v == 1.0 for v in late)


class TestFailureModes:
    def test_unknown_scenario(self, capsys):
        code, _, err = run_cli(capsys, "run", "--scenario", "nope")
        assert code == 2
        assert "unknown scenario" in err
        assert "mach_zehnder" in err

    def test_unknown_parameter(self, capsys):
        code, _, err = run_cli(capsys, "run", "--scenario", "epr",
                               "--param", "bogus=1")
        assert code == 2
        assert "unknown parameter" in err

    def test_malformed_values(self, capsys):
        cases = [
            ("run", "--scenario", "mach_zehnder", "--param", "phase_diff=abc"),
            ("run", "--scenario", "dielectric", "--param", "quarter_waves=1.5"),
            ("run", "--scenario", "mach_zehnder", "--param", "extra_port=maybe"),
            ("run", "--scenario", "mach_zehnder", "--param", "phase_diff"),
        ]
        for argv in cases:
            code, _, err = run_cli(capsys, *argv)
            assert code == 2, argv
            assert err.startswith("error:")

    def test_builder_rejections_exit_two(self, capsys):
        code, _, err = run_cli(capsys, "run", "--scenario", "dielectric",
                               "--param", "blocker_schedule=01")
        assert code == 2
        assert "cannot build scenario" in err

    def test_slices_conflicts(self, capsys):
        code, _, err = run_cli(capsys, "run", "--scenario", "mach_zehnder",
                               "--slices", "5", "--param", "extra_slices=1")
        assert code == 2
        assert "mutually exclusive" in err
        code, _, err = run_cli(capsys, "run", "--scenario", "mach_zehnder",
                               "--slices", "2")
        assert code == 2
        assert "below the scenario's minimum" in err

    def test_missing_and_malformed_config(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, "run", "--scenario", "epr",
                               "--config", str(tmp_path / "absent.json"))
        assert code == 2
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        code, _, err = run_cli(capsys, "run", "--scenario", "epr",
                               "--config", str(bad))
        assert code == 2
        as_list = tmp_path / "list.json"
        as_list.write_text("[1, 2]")
        code, _, err = run_cli(capsys, "run", "--scenario", "epr",
                               "--config", str(as_list))
        assert code == 2
        assert "expected a JSON object" in err

    def test_sampling_a_lossy_scenario_is_refused(self, capsys):
        code, _, err = run_cli(capsys, "run", "--scenario", "three_history",
                               "--mode", "sample", "--count", "10")
        assert code == 2
        assert "error:" in err

    def test_negative_count_is_refused(self, capsys):
        code, _, err = run_cli(capsys, "run", "--scenario", "mach_zehnder",
                               "--mode", "sample", "--count", "-5")
        assert code == 2

    def test_history_cap_exits_three(self, capsys, monkeypatch):
        monkeypatch.setenv("HISTLAW_MAX_STATES", "100")
        code, _, err = run_cli(capsys, "run", "--scenario", "random_unitary",
                               "--param", "slices=5")
        assert code == 3
        assert "error:" in err


class TestSelfCheck:
    def test_quick_battery_passes(self, capsys):
        code, out, _ = run_cli(capsys, "self-check", "--quick")
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[-1] == "10/10 checks passed (quick)"
        assert len(lines) == 11
        assert all(line.startswith("ok  ") for line in lines[:-1])
