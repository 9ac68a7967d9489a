"""End-to-end tests of the command-line surface.

Commands run in-process through ``main(argv)`` so stdout and exit codes
can be asserted cheaply; one subprocess test at the bottom proves the
module entry point works outside the test harness too. The exit-code
contract (0 ok, 1 runtime, 2 usage, 3 verification) is the thing under
test here, not the math behind it.
"""

import json
import subprocess
import sys

import numpy as np
import pytest

import signedot.cli as cli
from signedot.cli import main
from signedot.measure import SignedMeasure, dirac, mass, measure_to_json, write_measure


def _measure_file(tmp_path, name, mu):
    path = tmp_path / name
    write_measure(mu, path)
    return str(path)


def _scenario_obj(**overrides):
    obj = {
        "initial": {
            "dim": 1,
            "atoms": [{"x": [-1.0], "w": 1.0}, {"x": [1.0], "w": -0.5}],
        },
        "velocity": {"kind": "constant", "c": [0.0]},
        "source": {
            "kind": "fixed",
            "measure": {
                "dim": 1,
                "atoms": [{"x": [-0.5], "w": 0.5}, {"x": [0.5], "w": -0.25}],
            },
        },
        "norm": {"a": 1.0, "b": 1.0},
        "T": 1.0,
        "k": 3,
        "snapshots": [0.0, 0.5, 1.0],
    }
    obj.update(overrides)
    return obj


def _scenario_file(tmp_path, name="scenario.json", **overrides):
    path = tmp_path / name
    path.write_text(json.dumps(_scenario_obj(**overrides)))
    return str(path)


# ---------------------------------------------------------------------- norm


def test_norm_two_atom_example(tmp_path, capsys):
    f = _measure_file(tmp_path, "m.json", dirac([0.0]) - dirac([0.5]))
    assert main(["norm", f, "--a", "1", "--b", "1"]) == 0
    record = json.loads(capsys.readouterr().out)
    assert record["value"] == pytest.approx(0.5, abs=1e-12)
    assert record["dual_value"] is None


def test_norm_empty_measure(tmp_path, capsys):
    f = _measure_file(tmp_path, "e.json", SignedMeasure.empty(1))
    assert main(["norm", f]) == 0
    assert json.loads(capsys.readouterr().out)["value"] == 0.0


def test_norm_check_dual(tmp_path, capsys):
    f = _measure_file(tmp_path, "m.json", dirac([0.0]) - dirac([3.0]))
    assert main(["norm", f, "--check-dual"]) == 0
    record = json.loads(capsys.readouterr().out)
    assert record["value"] == pytest.approx(2.0, abs=1e-12)
    assert record["duality_gap"] <= 1e-7


def test_norm_verification_exit_on_large_gap(tmp_path, monkeypatch, capsys):
    # force the reported gap over the limit to pin the exit-code contract
    f = _measure_file(tmp_path, "m.json", dirac([0.0]))
    rigged = {
        "value": 1.0,
        "moved_mass": 0.0,
        "cancelled_mass": 1.0,
        "dual_value": 0.9,
        "duality_gap": 0.1,
    }
    monkeypatch.setattr(cli, "distance_report", lambda *a, **k: rigged)
    assert main(["norm", f, "--check-dual"]) == 3


def test_norm_rejects_bad_prices(tmp_path, capsys):
    f = _measure_file(tmp_path, "m.json", dirac([0.0]))
    assert main(["norm", f, "--a", "-1"]) == 2
    assert "error" in capsys.readouterr().err


def test_norm_rejects_missing_and_malformed_files(tmp_path, capsys):
    assert main(["norm", str(tmp_path / "nope.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["norm", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "bad.json:1:" in err  # line/column addressed
    worse = tmp_path / "worse.json"
    worse.write_text('{"dim": 1}')
    assert main(["norm", str(worse)]) == 2


# ------------------------------------------------------------------ distance


def test_distance_identical_files_is_zero(tmp_path, capsys):
    mu = dirac([0.2], 1.5) - dirac([-0.4], 0.5)
    f = _measure_file(tmp_path, "m.json", mu)
    assert main(["distance", f, f]) == 0
    assert json.loads(capsys.readouterr().out)["value"] == pytest.approx(0.0, abs=1e-12)


def test_distance_two_diracs(tmp_path, capsys):
    fa = _measure_file(tmp_path, "a.json", dirac([0.0]))
    fb = _measure_file(tmp_path, "b.json", dirac([1.0]))
    assert main(["distance", fa, fb]) == 0
    assert json.loads(capsys.readouterr().out)["value"] == pytest.approx(1.0, abs=1e-12)


def test_distance_agrees_with_norm_of_difference(tmp_path, capsys):
    rng = np.random.default_rng(17)
    mu = SignedMeasure(rng.uniform(-1, 1, (4, 1)), rng.uniform(-1, 1, 4), 1)
    nu = SignedMeasure(rng.uniform(-1, 1, (3, 1)), rng.uniform(-1, 1, 3), 1)
    fa = _measure_file(tmp_path, "a.json", mu)
    fb = _measure_file(tmp_path, "b.json", nu)
    fd = _measure_file(tmp_path, "d.json", mu - nu)
    assert main(["distance", fa, fb]) == 0
    via_distance = json.loads(capsys.readouterr().out)["value"]
    assert main(["norm", fd]) == 0
    via_norm = json.loads(capsys.readouterr().out)["value"]
    assert via_distance == pytest.approx(via_norm, abs=1e-9)


def test_distance_rejects_mixed_dims(tmp_path, capsys):
    fa = _measure_file(tmp_path, "a.json", dirac([0.0]))
    fb = _measure_file(tmp_path, "b.json", dirac([0.0, 0.0]))
    assert main(["distance", fa, fb]) == 2


# ------------------------------------------------------------------ simulate


def test_simulate_reaction_only(tmp_path, capsys):
    sf = _scenario_file(tmp_path)
    out = tmp_path / "traj.csv"
    assert main(["simulate", sf, "--out", str(out)]) == 0
    summary = capsys.readouterr().out
    assert "steps=8" in summary
    # reaction only: every source atom lands where it was emitted, so the
    # final mass is exactly the initial mass plus T times the source mass
    final_mass = float(summary.split("final_mass=")[1].split()[0])
    assert final_mass == pytest.approx(1.5 + 0.75, abs=1e-12)
    lines = out.read_text().splitlines()
    assert lines[0] == "t,atom,x0,w"


def test_simulate_translation_json(tmp_path, capsys):
    sf = _scenario_file(
        tmp_path,
        velocity={"kind": "constant", "c": [0.5]},
        source={"kind": "zero"},
        snapshots=[1.0],
    )
    out = tmp_path / "traj.json"
    assert main(["simulate", sf, "--out", str(out), "--format", "json"]) == 0
    obj = json.loads(out.read_text())
    final = obj["snapshots"][-1]["measure"]
    assert [a["x"][0] for a in final["atoms"]] == [-0.5, 1.5]


def test_simulate_kernel_scenario_with_default_cap(tmp_path, capsys):
    sf = _scenario_file(
        tmp_path,
        velocity={"kind": "kernel", "shape": "interaction", "amplitude": 0.3, "radius": 2.0},
        k=4,
    )
    out = tmp_path / "traj.csv"
    assert main(["simulate", sf, "--out", str(out)]) == 0
    final_mass = float(capsys.readouterr().out.split("final_mass=")[1].split()[0])
    assert final_mass <= 1.5 + 0.75 + 1e-12


def test_simulate_rejects_invalid_scenarios(tmp_path, capsys):
    assert main(["simulate", _scenario_file(tmp_path, k=0), "--out", "x"]) == 2
    assert main(["simulate", _scenario_file(tmp_path, norm={"a": -1, "b": 1}), "--out", "x"]) == 2
    missing = _scenario_obj()
    del missing["T"]
    p = tmp_path / "broken.json"
    p.write_text(json.dumps(missing))
    assert main(["simulate", str(p), "--out", "x"]) == 2
    err = capsys.readouterr().err
    assert "missing keys" in err
    assert main(["simulate", _scenario_file(tmp_path, velocity={"kind": "warp"}), "--out", "x"]) == 2
    assert main(["simulate", _scenario_file(tmp_path, source={"kind": "fountain"}), "--out", "x"]) == 2


# ------------------------------------------------------------------ converge


def test_converge_reaction_rows_are_zero(tmp_path, capsys):
    sf = _scenario_file(tmp_path)
    assert main(["converge", sf, "1", "4"]) == 0
    out = capsys.readouterr().out
    lines = out.splitlines()
    assert lines[0].split()[:3] == ["k", "sup_distance", "ratio"]
    assert json.loads(lines[-1]) == [
        {"k": k, "sup_distance": 0.0, "ratio": None, "bound": pytest.approx(row["bound"])}
        for k, row in zip((1, 2, 3), json.loads(lines[-1]))
    ]


def test_converge_writes_json_report(tmp_path, capsys):
    sf = _scenario_file(tmp_path)
    report = tmp_path / "rows.json"
    assert main(["converge", sf, "1", "3", "--out", str(report)]) == 0
    rows = json.loads(report.read_text())
    assert [r["k"] for r in rows] == [1, 2]


def test_converge_flags_miscertified_constants(tmp_path, capsys):
    # a scenario whose declared constants are far below what the dynamics
    # actually do: the a priori bound shrinks under the measured gap and
    # the command must report verification failure
    sf = _scenario_file(
        tmp_path,
        velocity={
            "kind": "kernel",
            "shape": "interaction",
            "amplitude": 0.4,
            "radius": 2.0,
            "mass_cap": 5.0,
        },
        constants_override={
            "L": 1e-6,
            "M": 1e-6,
            "K": 0.0,
            "P": 1e-6,
            "mass0": 1e-6,
        },
    )
    assert main(["converge", sf, "3", "5"]) == 3


def test_converge_validates_levels(tmp_path, capsys):
    sf = _scenario_file(tmp_path)
    assert main(["converge", sf, "4", "2"]) == 2
    assert main(["converge", sf, "0", "2"]) == 2


# ------------------------------------------------------------------ proptest


def test_proptest_passes_and_is_byte_deterministic(tmp_path, capsys):
    assert main(["proptest", "--seed", "5", "--trials", "20"]) == 0
    first = capsys.readouterr().out
    assert main(["proptest", "--seed", "5", "--trials", "20"]) == 0
    second = capsys.readouterr().out
    assert first == second
    assert "max_violation" in first


def test_proptest_rejects_bad_arguments(capsys):
    assert main(["proptest", "--trials", "0"]) == 2
    assert main(["proptest", "--a", "-1"]) == 2


def test_proptest_reports_failures_with_exit_3(monkeypatch, capsys):
    rigged = [{"property": "demo", "trials": 1, "max_violation": 1.0, "pass": False}]
    monkeypatch.setattr(cli, "property_suite", lambda *a, **k: rigged)
    assert main(["proptest", "--trials", "5"]) == 3


# ------------------------------------------------------------------- plumbing


def test_usage_errors_exit_2(capsys):
    assert main([]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["simulate"]) == 2  # missing required arguments


def test_runtime_failures_exit_1(tmp_path, monkeypatch, capsys):
    f = _measure_file(tmp_path, "m.json", dirac([0.0]))

    def boom(*a, **k):
        raise RuntimeError("solver exploded")

    monkeypatch.setattr(cli, "distance_report", boom)
    assert main(["norm", f]) == 1
    assert "solver exploded" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    f = _measure_file(tmp_path, "m.json", dirac([0.0]) - dirac([0.5]))
    proc = subprocess.run(
        [sys.executable, "-m", "signedot", "norm", str(f)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["value"] == pytest.approx(0.5, abs=1e-12)
