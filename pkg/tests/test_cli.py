import json

import numpy as np
import pytest

from lmpc_hvac import reference as ref
from lmpc_hvac.cli import main
from lmpc_hvac.scenario import load_scenario, save_scenario
from lmpc_hvac.thermal import save_network


@pytest.fixture
def small(tmp_path):
    """Short single-zone scenario so NLMPC runs are quick."""
    sc = ref.tiny_scenario(np.random.default_rng(0), K=6)
    save_scenario(sc, tmp_path / "sc.json")
    save_network(ref.single_zone_network(), tmp_path / "net.json")
    return tmp_path


def run(*argv):
    return main([str(a) for a in argv])


def test_gen_scenario(tmp_path):
    assert run("gen-scenario", "--scenario", tmp_path / "s.json", "--model", tmp_path / "m.json") == 0
    assert load_scenario(tmp_path / "s.json").K == 96
    assert run("gen-scenario", "--scenario", tmp_path / "c.json", "--budget", 0.1) == 0
    assert load_scenario(tmp_path / "c.json").objective.budget == 0.1


def test_validate_model(tmp_path, capsys):
    run("gen-scenario", "--scenario", tmp_path / "s.json", "--model", tmp_path / "m.json")
    assert run("validate-model", "--model", tmp_path / "m.json", "--export", tmp_path / "abc.json") == 0
    assert "0" in capsys.readouterr().out
    data = json.loads((tmp_path / "abc.json").read_text())
    data["A"][0][1] += 1e-3
    (tmp_path / "bad.json").write_text(json.dumps(data))
    assert run("validate-model", "--model", tmp_path / "m.json", "--matrices", tmp_path / "bad.json") == 2


def test_simulate_and_compare(small, capsys):
    for ctrl in ("lmpc", "nlmpc", "zero"):
        assert run("simulate", "--controller", ctrl, "--scenario", small / "sc.json", "--model",
                   small / "net.json", "--out", small / ctrl, "--timing") == 0
        for name in ("trace.csv", "run.json", "timing.json", "scenario.json", "temperature.svg",
                     "airflow.svg", "power.svg"):
            assert (small / ctrl / name).exists()
    capsys.readouterr()
    assert run("compare", "--a", small / "lmpc", "--b", small / "lmpc", "--json") == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["relative_gap"] == 0.0 and rep["time_ratio"] == 1.0
    assert run("compare", "--a", small / "lmpc", "--b", small / "nlmpc") == 0
    assert "relative gap" in capsys.readouterr().out


def test_simulate_is_byte_deterministic(small):
    for out in ("a", "b"):
        run("simulate", "--controller", "lmpc", "--scenario", small / "sc.json", "--model", small / "net.json",
            "--out", small / out)
    for name in ("trace.csv", "run.json", "temperature.svg"):
        assert (small / "a" / name).read_bytes() == (small / "b" / name).read_bytes()


def test_tuning_flags_recorded(small):
    assert run("simulate", "--controller", "lmpc", "--scenario", small / "sc.json", "--model",
               small / "net.json", "--out", small / "o", "--segments", 8, "--eps", 0.3, "--window", 3,
               "--slack-weight", 100, "--no-plots") == 0
    cfg = json.loads((small / "o" / "run.json").read_text())["config"]
    assert cfg == {"segments": 8, "eps": 0.3, "window": 3, "slack_weight": 100.0}
    assert not (small / "o" / "power.svg").exists()


def test_dump_lp(small, capsys):
    assert run("dump-lp", "--step", 1, "--scenario", small / "sc.json", "--model", small / "net.json") == 0
    out = capsys.readouterr().out
    assert out.startswith("minimize:") and "dyn[0,0]:" in out and "bound v[0,0]:" in out
    assert run("dump-lp", "--step", 99, "--scenario", small / "sc.json", "--model", small / "net.json") == 2


def test_usage_errors(capsys):
    assert run("simulate", "--controller", "pid") == 1
    assert run("--bogus") == 1
    assert run("bench", "--only", "12") == 1
    assert "usage" in capsys.readouterr().err


def test_runtime_errors(small, tmp_path):
    assert run("simulate", "--controller", "lmpc", "--scenario", tmp_path / "none.json", "--model",
               small / "net.json", "--out", tmp_path / "o") == 2
    # scenario built for a different building
    ref_sc = tmp_path / "ref.json"
    run("gen-scenario", "--scenario", ref_sc)
    assert run("simulate", "--controller", "zero", "--scenario", ref_sc, "--model", small / "net.json",
               "--out", tmp_path / "o") == 2


def test_compare_mismatch_exit_code(small, tmp_path):
    run("simulate", "--controller", "zero", "--scenario", small / "sc.json", "--model", small / "net.json",
        "--out", small / "z", "--no-plots")
    sc2 = ref.tiny_scenario(np.random.default_rng(0), K=5)
    save_scenario(sc2, tmp_path / "sc2.json")
    run("simulate", "--controller", "zero", "--scenario", tmp_path / "sc2.json", "--model",
        small / "net.json", "--out", tmp_path / "z2", "--no-plots")
    assert run("compare", "--a", small / "z", "--b", tmp_path / "z2") == 2


def test_bench_exit_codes(monkeypatch, capsys):
    import lmpc_hvac.acceptance as acc

    fake = {n: (lambda n=n: acc.CriterionResult(n, f"c{n}", n != 2, "stub", {})) for n in range(1, 10)}
    monkeypatch.setattr(acc, "CRITERIA", fake)
    assert run("bench", "--only", "1,3") == 0
    assert run("bench", "--only", "2") == 2
    assert "criterion 2 [FAIL]" in capsys.readouterr().out
