import csv
import io
import json
import shutil
from pathlib import Path

import pytest

from ftsim.bist import coverage_curve, default_block_size, parse_patterns
from ftsim.cli import main
from ftsim.config import ConfigError, config_from_dict, load_config
from ftsim.costmodel import ModuleCostSpec, compare
from ftsim.netlist import parse_netlist, sample_faults

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
TABLES = FIXTURES / "tables_fixture.json"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.fixture
def workdir(tmp_path):
    for f in FIXTURES.iterdir():
        shutil.copy(f, tmp_path)
    return tmp_path


# configuration


def test_minimal_config_loads():
    cfg = load_config(FIXTURES / "minimal.json")
    assert cfg.modules["m"].spec == ModuleCostSpec(t_s1=100, t_hf=50, t_sf=400)
    assert cfg.dma is None and cfg.netlist_path is None


def test_fixture_config_loads():
    cfg = load_config(TABLES)
    assert set(cfg.modules) == {"sorting", "idct"}
    assert cfg.qos_table[0].frame_label == "1920x1080"
    assert cfg.netlist_path.name == "macc_w4.gnl"


def test_out_of_range_probability_names_field():
    raw = {"modules": {"m": {"spec": {"t_s1": 1, "t_hf": 1, "t_sf": 1, "p_fault": 1.5}}}}
    with pytest.raises(ConfigError) as exc:
        config_from_dict(raw)
    assert any("modules/m/spec/p_fault" in p for p in exc.value.problems)


def test_every_violation_reported():
    raw = {"modules": {"m": {"spec": {"t_s1": -1, "t_hf": 1}}}, "seed": "x", "bogus": 1}
    with pytest.raises(ConfigError) as exc:
        config_from_dict(raw)
    text = "\n".join(exc.value.problems)
    for fragment in ("t_s1", "t_sf", "seed", "bogus"):
        assert fragment in text
    assert len(exc.value.problems) >= 4


def test_missing_netlist_file(workdir):
    raw = json.loads((workdir / "minimal.json").read_text())
    raw["netlist"] = "nowhere.gnl"
    raw["patterns"] = "nowhere.tpat"
    with pytest.raises(ConfigError) as exc:
        config_from_dict(raw, base_dir=workdir)
    assert len(exc.value.problems) == 2


def test_parse_error_has_location(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "modules": {,}\n}')
    with pytest.raises(ConfigError) as exc:
        load_config(bad)
    assert f"{bad}:2:" in exc.value.problems[0]


def test_notes_are_ignored():
    cfg = config_from_dict({"_note": "x", "modules": {"m": {"_why": "y", "spec": {"t_s1": 1, "t_hf": 1, "t_sf": 1}}}})
    assert "m" in cfg.modules


# exit codes


def test_missing_gnl_exits_2(workdir, capsys):
    raw = json.loads((workdir / "tables_fixture.json").read_text())
    raw["netlist"] = "missing.gnl"
    cfg = workdir / "broken.json"
    cfg.write_text(json.dumps(raw))
    code, out, err = run(capsys, "coverage", "--config", cfg)
    assert code == 2 and out == ""
    assert "missing.gnl" in err and len(err.strip().splitlines()) == 1


def test_unknown_subcommand_exits_1(capsys):
    code, _, err = run(capsys, "teleport", "--config", TABLES)
    assert code == 1 and err


def test_missing_config_flag_exits_1(capsys):
    assert run(capsys, "cost")[0] == 1


def test_no_subcommand_exits_1(capsys):
    assert run(capsys)[0] == 1


def test_nonexistent_config_exits_2(capsys, tmp_path):
    assert run(capsys, "cost", "--config", tmp_path / "nope.json")[0] == 2


def test_bad_fault_syntax_exits_1(capsys):
    assert run(capsys, "bist", "--config", TABLES, "--fault", "s0")[0] == 1


def test_unknown_fault_net_exits_2(capsys):
    assert run(capsys, "bist", "--config", TABLES, "--fault", "zz/sa0")[0] == 2


# subcommands


def test_cost_ratios(capsys):
    code, out, _ = run(capsys, "cost", "--config", TABLES)
    assert code == 0
    got = {(r["module"], r["architecture"]): float(r["ratio"]) for r in rows(out)}
    want = {
        ("sorting", "hardware_redundancy"): (4.9026, 5e-3),
        ("sorting", "software_redundancy"): (2.6344, 1e-3),
        ("sorting", "proposed"): (8.8299, 1e-3),
        ("idct", "hardware_redundancy"): (12.4209, 1e-3),
        ("idct", "software_redundancy"): (3.7236, 1e-3),
        ("idct", "proposed"): (24.3144, 1e-3),
    }
    for key, (value, rel) in want.items():
        assert got[key] == pytest.approx(value, rel=rel)


def test_cost_csv_round_trip(capsys):
    _, out, _ = run(capsys, "cost", "--config", TABLES, "--module", "idct")
    spec = load_config(TABLES).modules["idct"].spec
    for rec, rep in zip(rows(out), compare(spec)):
        assert rec["architecture"] == rep.architecture.value
        assert float(rec["runtime_cycles"]) == rep.runtime_cycles
        assert float(rec["onchip_gates"]) == rep.onchip_gates
        assert float(rec["energy_joules"]) == rep.energy_joules
        assert float(rec["ratio"]) == rep.perf_per_logic_ratio


def test_select_override(capsys):
    code, out, _ = run(capsys, "select", "--config", TABLES, "--ht", "100000", "--tt", "1000000")
    assert code == 0
    assert {r["module"]: r["decision"] for r in rows(out)}["idct"] == "Proposed"


def test_select_from_config(capsys):
    _, out, _ = run(capsys, "select", "--config", TABLES)
    assert [r["decision"] for r in rows(out)] == ["Proposed", "Proposed"]


def test_select_without_constraints(capsys):
    assert run(capsys, "select", "--config", FIXTURES / "minimal.json")[0] == 2
    code, out, _ = run(capsys, "select", "--config", FIXTURES / "minimal.json", "--ht", "0", "--tt", "0")
    # zero gates everywhere: only a zero budget fails every strict guard
    assert code == 0 and rows(out)[0]["decision"] == "NeedsRepartition"


def test_reliability_curves(capsys):
    code, out, _ = run(capsys, "reliability", "--config", TABLES, "--t-max", "2", "--steps", "8")
    assert code == 0
    recs = rows(out)
    curves = {}
    for r in recs:
        curves.setdefault(r["architecture"], []).append((float(r["t_hours"]), float(r["probability"])))
    assert len(curves) == 3 and all(len(c) == 9 for c in curves.values())
    for i in range(1, 9):
        assert curves["proposed"][i][1] > max(curves[a][i][1] for a in curves if a != "proposed")


def test_coverage_matches_library(capsys):
    code, out, _ = run(capsys, "coverage", "--config", TABLES, "--seed", "0")
    assert code == 0
    net = parse_netlist((FIXTURES / "macc_w4.gnl").read_text())
    pats = parse_patterns((FIXTURES / "macc_w4.tpat").read_text(), net)
    want = coverage_curve(net, pats, sample_faults(net, 30, 0), default_block_size(len(pats)))
    assert [(int(r["k"]), float(r["coverage"])) for r in rows(out)] == want


def test_bist_no_fault(capsys):
    code, out, _ = run(capsys, "bist", "--config", TABLES)
    (r,) = rows(out)
    assert code == 0 and r["fault_bit"] == "0" and r["patterns_applied"] == "9"


def test_bist_with_fault(capsys):
    _, out, _ = run(capsys, "bist", "--config", TABLES, "--fault", "s0/sa1")
    (r,) = rows(out)
    assert r["fault_bit"] == "1" and r["first_detecting_pattern"] != ""


def test_sim_trace(capsys):
    code, out, _ = run(capsys, "sim", "--config", TABLES, "--fault", "none")
    recs = rows(out)
    assert code == 0
    assert recs[-1]["event"] == "End" and float(recs[-1]["cycle"]) == 1414
    assert [r["event"] for r in recs].count("BistAck") == 1


def test_sim_escape(capsys):
    _, out, _ = run(capsys, "sim", "--config", TABLES, "--fault", "escape")
    assert "silent_escape=1" in rows(out)[-1]["detail"]


def test_montecarlo_within_three_stderr(capsys):
    code, out, _ = run(capsys, "montecarlo", "--config", TABLES, "--trials", "20000", "--seed", "4")
    assert code == 0
    recs = rows(out)
    assert [float(r["p_fault"]) for r in recs] == [0.001, 0.01, 0.1]
    for r in recs:
        assert abs(float(r["mean_cycles"]) - float(r["analytic_cycles"])) <= 3 * float(r["stderr"])


def test_qos(capsys):
    _, out, _ = run(capsys, "qos", "--config", TABLES)
    assert rows(out)[0]["frame_label"] == "1920x1080"
    _, out, _ = run(capsys, "qos", "--config", TABLES, "--fault")
    assert rows(out)[0]["frame_label"] == "1280x720"
    _, out, _ = run(capsys, "qos", "--config", TABLES, "--target-fps", "1e9")
    assert rows(out)[0]["frame_label"] == "none"


ALL = [
    ("cost",), ("select",), ("reliability",), ("coverage",), ("bist",),
    ("sim",), ("montecarlo", "--trials", "2000"), ("qos",),
]


@pytest.mark.parametrize("cmd", ALL, ids=lambda c: c[0])
def test_same_seed_same_bytes(cmd, tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(capsys, *cmd, "--config", TABLES, "--seed", "7", "--out", a)[0] == 0
    assert run(capsys, *cmd, "--config", TABLES, "--seed", "7", "--out", b)[0] == 0
    data = (a / f"{cmd[0]}.csv").read_bytes()
    assert data == (b / f"{cmd[0]}.csv").read_bytes()
    assert b"\r" not in data and data.endswith(b"\n")


def test_env_seed_fallback(capsys, monkeypatch, workdir):
    raw = json.loads((workdir / "tables_fixture.json").read_text())
    del raw["patterns"]
    cfg = workdir / "random.json"
    cfg.write_text(json.dumps(raw))
    monkeypatch.setenv("FTSIM_SEED", "5")
    from_env = run(capsys, "coverage", "--config", cfg)[1]
    monkeypatch.delenv("FTSIM_SEED")
    assert run(capsys, "coverage", "--config", cfg, "--seed", "5")[1] == from_env
    assert run(capsys, "coverage", "--config", cfg, "--seed", "6")[1] != from_env
