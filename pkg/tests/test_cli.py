import json
import subprocess
import sys

import pytest
from pydantic import ValidationError

from linfsat.cli import EXIT_INFEASIBLE, EXIT_OK, EXIT_PARSE, EXIT_RUNTIME, main
from linfsat.config import RunConfig, scenario_config, parse_config

FAST = {"simulation": {"horizon_s": 4.0, "dwell_s": 1.0, "probe_seeds": 3, "compare_seeds": 2, "seeds": [1]},
        "synthesis": {"alpha_grid": 30}}


def write_cfg(tmp_path, extra=None, name="cfg.json"):
    cfg = json.loads(json.dumps(FAST))
    for key, val in (extra or {}).items():
        cfg.setdefault(key, {})
        if isinstance(val, dict):
            cfg[key].update(val)
        else:
            cfg[key] = val
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def run(tmp_path, *args, cfg=None):
    cfg = cfg or write_cfg(tmp_path)
    return main([*args, "--config", str(cfg), "--out", str(tmp_path / "out")])


def test_config_round_trip():
    cfg = scenario_config()
    again = parse_config(cfg.to_json())
    assert again == cfg
    assert parse_config(again.to_json()).to_json() == cfg.to_json()


def test_config_rejects_bad_values():
    with pytest.raises(ValidationError):
        parse_config('{"plant": {"u_max": 0}}')
    with pytest.raises(ValidationError):
        parse_config('{"plant": {"inertia": 2}}')
    with pytest.raises(ValidationError):
        parse_config('{"simulation": {"dt_s": 1.0, "dwell_s": 5.0}}')
    with pytest.raises(ValidationError):
        parse_config('{"synthesis": {"alpha_lo": 5, "alpha_hi": 1}}')


def test_output_mode_defaults_to_augmented():
    assert parse_config('{"synthesis": {"feedback": "output"}}').synthesis.use_augmented
    assert not RunConfig().synthesis.use_augmented


def test_synthesize_writes_design(tmp_path, capsys):
    assert run(tmp_path, "synthesize") == EXIT_OK
    doc = json.loads((tmp_path / "out" / "design.json").read_text())
    assert doc["K"]["rows"] == 1 and doc["K"]["cols"] == 2
    k = doc["K_physical"]["data"]
    assert k[0] == pytest.approx(2.89, rel=0.05) and k[1] == pytest.approx(0.0808, rel=0.05)
    assert doc["audit_violation"] <= 1e-7
    assert "star-norm" in (tmp_path / "out" / "report.txt").read_text()
    assert "2.8889" in capsys.readouterr().out


def test_output_mode_writes_observer(tmp_path):
    cfg = write_cfg(tmp_path, {"synthesis": {"feedback": "output"}})
    assert run(tmp_path, "synthesize", cfg=cfg) == EXIT_OK
    doc = json.loads((tmp_path / "out" / "design.json").read_text())
    assert doc["augmented"] is True
    assert doc["observer"]["L"]["rows"] == 2 and doc["observer"]["audit_violation"] <= 1e-7


def test_simulate_and_probe(tmp_path):
    assert run(tmp_path, "synthesize") == EXIT_OK
    assert run(tmp_path, "simulate") == EXIT_OK
    out = tmp_path / "out"
    summary = json.loads((out / "simulate.json").read_text())
    names = {r["controller"] for r in summary["runs"]}
    assert {"open_loop", "low_gain", "high_gain_10", "high_gain_100"} <= names
    csv_a = (out / "sim_high_gain_100_seed1.csv").read_bytes()
    assert run(tmp_path, "simulate") == EXIT_OK
    assert (out / "sim_high_gain_100_seed1.csv").read_bytes() == csv_a

    assert run(tmp_path, "probe") == EXIT_OK
    probe = json.loads((out / "probe.json").read_text())
    assert len(probe["ellipse"]) == 360
    for rep in probe["controllers"].values():
        assert rep["within_slack"] and len(rep["per_seed"]) == 3


def test_seed_override(tmp_path):
    assert run(tmp_path, "synthesize") == EXIT_OK
    cfg = write_cfg(tmp_path)
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "out"), "--seed-override", "9"]) == 0
    assert (tmp_path / "out" / "sim_low_gain_seed9.csv").exists()


def test_compare_tables(tmp_path, caplog):
    cfg = write_cfg(tmp_path, {"baselines": [{"kind": "literal", "name": "lqr_literal", "K": [0.138, 0.0045]},
                                             {"kind": "literal", "name": "pp_literal", "K": [1.70, 0.480]}]})
    assert run(tmp_path, "compare", cfg=cfg) == EXIT_OK
    result = json.loads((tmp_path / "out" / "compare.json").read_text())
    assert len(result["rows"]) == 3 * 2
    assert result["proposed_minimal_all"]
    lines = (tmp_path / "out" / "compare.csv").read_text().splitlines()
    assert lines[0] == "controller,seed,peak_abs_freq,peak_abs_input" and len(lines) == 7

    with caplog.at_level("WARNING"):
        assert run(tmp_path, "compare") == EXIT_OK
    assert "no baselines" in caplog.text
    assert len(json.loads((tmp_path / "out" / "compare.json").read_text())["rows"]) == 2


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"plant": {"u_max": 0}}')
    assert main(["synthesize", "--config", str(bad), "--out", str(tmp_path / "o")]) == EXIT_PARSE
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "parse_error" and err["exit_code"] == EXIT_PARSE

    bad.write_text("{not json")
    assert main(["synthesize", "--config", str(bad), "--out", str(tmp_path / "o")]) == EXIT_PARSE

    assert main(["synthesize", "--config", str(tmp_path / "missing.json")]) == EXIT_RUNTIME

    cfg = write_cfg(tmp_path)
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o"),
                 "--design", str(tmp_path / "nope.json")]) == EXIT_RUNTIME

    # alpha above twice the slowest decay rate admits no invariant ellipsoid
    inf = write_cfg(tmp_path, {"synthesis": {"alpha_lo": 20.0, "alpha_hi": 100.0, "alpha_grid": 5}}, "inf.json")
    assert main(["synthesize", "--config", str(inf), "--out", str(tmp_path / "o")]) == EXIT_INFEASIBLE
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["error"] == "infeasible"


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "linfsat", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "synthesize" in proc.stdout
