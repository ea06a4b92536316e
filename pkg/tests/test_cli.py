import csv
import json

import pytest

from freqflux.cli import run, write_atomic
from freqflux.netmodel import bundled_case_path


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_solve_pf(tmp_path):
    assert run(["solve-pf", "ieee14.json", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "pf.csv")
    assert rows[0] == ["bus", "v_pu", "theta_deg", "p_pu", "q_pu"]
    assert len(rows) == 15
    assert float(rows[1][3]) == pytest.approx(2.3239, abs=1e-4)


def test_missing_file_exit_3(tmp_path, capsys):
    assert run(["solve-pf", str(tmp_path / "absent.json"), "--out", str(tmp_path)]) == 3
    assert "absent.json" in capsys.readouterr().err


def test_usage_exit_2(tmp_path):
    assert run(["frobnicate"]) == 2
    assert run([]) == 2
    assert run(["montecarlo", "x.json", "--threads", "0"]) == 2


def test_no_load_full_sensitivities_exit_4(tmp_path, capsys):
    case = {
        "base_mva": 100,
        "f_nominal_hz": 50,
        "buses": [{"id": 1, "kind": "slack"}, {"id": 2, "kind": "PQ"}, {"id": 3, "kind": "PQ"}],
        "branches": [{"from_bus": 1, "to_bus": 2, "r": 0.0, "x": 0.1}, {"from_bus": 2, "to_bus": 3, "r": 0.0, "x": 0.2}],
        "machines": [],
    }
    path = tmp_path / "noload.json"
    path.write_text(json.dumps(case))
    assert run(["sensitivities", str(path), "--out", str(tmp_path)]) == 4
    err = capsys.readouterr().err
    assert "SingularMatrix(C)" in err and "--simplified" in err


def test_sensitivities_and_weights(tmp_path):
    assert run(["sensitivities", "ieee14.json", "--out", str(tmp_path)]) == 0
    h = _rows(tmp_path / "H.csv")
    assert h[0][0].startswith("H[") and len(h) == 15 and len(h[0]) == 15
    meta = dict(_rows(tmp_path / "sensitivities_meta.csv")[1:])
    assert float(meta["cond_F"]) < 1e4
    assert run(["sensitivities", "ieee14.json", "--simplified", "--out", str(tmp_path / "s")]) == 0
    assert run(["coi-weights", "ieee14.json", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "coi_weights.csv")
    assert rows[-1][0] == "alpha"
    total = sum(float(r[1]) for r in rows[1:])
    assert total == pytest.approx(1.0, abs=1e-12)


def test_simulate(tmp_path):
    code = run(["simulate", "ieee14.json", "--event", "ramp:bus=4,rate=0.1,t0=1,dur=1", "--dt", "0.01", "--tend", "3", "--out", str(tmp_path)])
    assert code == 0
    rows = _rows(tmp_path / "trajectory.csv")
    assert rows[0][:2] == ["t_s", "omega_coi_true_pu"]
    assert len(rows) == 302
    assert _rows(tmp_path / "estimator_errors.csv")[0] == ["estimator", "rms_error_pu", "max_error_pu"]


def test_simulate_bad_event(tmp_path):
    assert run(["simulate", "ieee14.json", "--event", "ramp:bus=99,rate=1,dur=1", "--out", str(tmp_path)]) == 3


def _scenario(tmp_path):
    doc = {
        "case": "ieee14.json",
        "noise": [{"bus": 10, "kind": "ou_weibull_mapped", "lam": 2.0, "sigma": 1.0}, {"bus": 12, "lam": 1.0}],
        "dt": 0.01,
        "t_end": 10.0,
        "n_paths": 3,
        "base_seed": 4,
    }
    path = tmp_path / "sc.json"
    path.write_text(json.dumps(doc))
    return path


def test_montecarlo_reproducible(tmp_path):
    sc = _scenario(tmp_path)
    outs = []
    for k, threads in enumerate(("1", "3")):
        out = tmp_path / f"o{k}"
        assert run(["montecarlo", str(sc), "--threads", threads, "--seed", "9", "--out", str(out)]) == 0
        outs.append({p.name: p.read_bytes() for p in out.iterdir()})
    assert outs[0] == outs[1]
    assert set(outs[0]) == {"mc_paths.csv", "mc_d_omega.csv", "mc_moments.csv"}
    assert len(_rows(tmp_path / "o0" / "mc_d_omega.csv")) == 3 * 1000 + 1
    assert _rows(tmp_path / "o0" / "mc_paths.csv")[1][1] == "9"


def test_clt_check_and_stats(tmp_path):
    sc = _scenario(tmp_path)
    assert run(["clt-check", str(sc), "--out", str(tmp_path)]) == 0
    dom = _rows(tmp_path / "clt_dominance.csv")
    assert dom[0][0] == "source" and len(dom) == 3
    assert sum(float(r[3]) for r in dom[1:]) == pytest.approx(1.0)
    lind = _rows(tmp_path / "clt_lindeberg.csv")
    assert ["scenario", "passed", "false"] in lind or ["scenario", "passed", "true"] in lind

    assert run(["montecarlo", str(sc), "--out", str(tmp_path)]) == 0
    assert run(["stats", str(tmp_path / "mc_d_omega.csv"), "--out", str(tmp_path)]) == 0
    qq = _rows(tmp_path / "qq.csv")
    assert qq[0] == ["theoretical_std_normal", "empirical_sample_units"]
    stats = dict(_rows(tmp_path / "stats.csv")[1:])
    assert int(stats["n"]) == 3000


def test_stats_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("x\n1\n2\nabc\n")
    assert run(["stats", str(bad), "--out", str(tmp_path)]) == 3
    few = tmp_path / "few.csv"
    few.write_text("x\n" + "\n".join(map(str, range(5))) + "\n")
    assert run(["stats", str(few), "--out", str(tmp_path)]) == 3
    assert run(["stats", str(few), "--column", "nope", "--out", str(tmp_path)]) == 3


def test_io_error_exit_5(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("not a directory")
    assert run(["solve-pf", "ieee14.json", "--out", str(blocker / "sub")]) == 5


def test_atomic_write_leaves_no_temp(tmp_path):
    target = tmp_path / "a.csv"
    write_atomic(target, "x\n")
    write_atomic(target, "y\n")
    assert target.read_text() == "y\n"
    assert [p.name for p in tmp_path.iterdir()] == ["a.csv"]


def test_bundled_scenarios_exist():
    for name in ("ramp14.json", "mirrored_weibull.json", "subnet_clt.json"):
        assert bundled_case_path(name).exists()
