import csv
import io
import json
import math

import numpy as np
import pytest

from simgate import cli
from simgate.experiments import (CSV_HEADER, PRESETS, ConfigError, RunConfig, SweepSpec, preset,
                                 rows_to_csv, run_gate, run_sweep, spectrum_trace)

FAST = {"schedule": {"total_time": 30.0, "tol": 1e-6}}


def fast(name="fig2", **over):
    return preset(name, **{"schedule.total_time": 30.0, "schedule.tol": 1e-6, **over})


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="bogus"):
        RunConfig.from_dict({"bogus": 1})
    with pytest.raises(ConfigError, match="gate.spin"):
        RunConfig.from_dict({"gate": {"spin": 1}})
    with pytest.raises(ConfigError):
        RunConfig.from_json("[1, 2]")
    with pytest.raises(ConfigError):
        preset("fig9")


@pytest.mark.parametrize("bad", [
    {"model": "quantum"},
    {"gate": {"type": "toffoli"}},
    {"gate": {"type": "hadamard", "delta_m": 0.0}},
    {"gate": {"type": "cnot", "delta_tilde_m": 0.0}},
    {"lattice": {"sites": 3, "occupations": [[1, 1]]}},
    {"lattice": {"sites": 2, "occupations": [[0, 1]]}, "model": "exact"},
    {"schedule": {"scheme": "euler"}},
    {"schedule": {"steps_per_segment": 0}},
    {"model": "exact", "gate": {"type": "cnot"}, "params": {"j_m": 0.0}},
    {"model": "exact", "gate": {"type": "cnot"}, "params": {"j_m": 1.0, "g": 1.0, "u_bb": 2.0}},
])
def test_invalid_configs(bad):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(bad)


def test_presets_load_and_derive():
    for name in PRESETS:
        preset(name)
    cnot = preset("fig3-cnot")
    assert cnot.g == pytest.approx(1000.5)
    assert cnot.gate_sites() == [0, 1]
    local = preset("fig3-local")
    assert local.lattice_params().u_bb == 100.0
    assert local.replace(**{"params.u_ab": 0.4}).g == pytest.approx(100.05)
    assert RunConfig.from_dict({"params": {"u_ab": 0.4}}).g == pytest.approx(100.2)


def test_report_fields_and_error():
    rep = run_gate(fast())
    d = json.loads(rep.to_json())
    assert d["error"] == pytest.approx(1 - d["fidelity"], abs=0)
    assert d["timing"]["duration"] == pytest.approx(60.0)
    assert d["timing"]["converged"] is True
    assert d["unitarity_residual"] < 1e-10
    assert "wall" not in rep.to_json()


def test_determinism_bytes():
    assert run_gate(fast()).to_json() == run_gate(fast()).to_json()
    spec = SweepSpec("total_time", 10, 30, 3, "linear", fast())
    assert rows_to_csv(run_sweep(spec, workers=1)) == rows_to_csv(run_sweep(spec, workers=2))


def test_csv_header_and_sorting():
    spec = SweepSpec("total_time", 5, 40, 4, "log", fast())
    text = rows_to_csv(run_sweep(spec, workers=1))
    rows = list(csv.DictReader(io.StringIO(text)))
    assert text.splitlines()[0] == "x,fidelity,error,leakage,min_gap,status"
    xs = [float(r["x"]) for r in rows]
    assert xs == sorted(xs) and len(xs) == 4
    for r in rows:
        assert float(r["error"]) == pytest.approx(1 - float(r["fidelity"]), abs=1e-15)
        assert r["status"] == "ok"


def test_sweep_failure_rows():
    base = preset("fig3-cnot", **{"params.g": 5.0, "params.u_bb": 2.0, "schedule.total_time": 20.0,
                                  "schedule.tol": 1e-5})
    rows = run_sweep(SweepSpec("u_bb", 2.0, 8.0, 3, "linear", base), workers=1)
    status = [r["status"] for r in rows]
    assert status[0] == "ok"
    assert status[-1].startswith("config_error")
    assert math.isnan(rows[-1]["fidelity"])


def test_imbalance_sweep_values():
    spec = SweepSpec("occupation_imbalance", 0, 2, 3, "linear", preset("fig3-cnot"))
    assert list(spec.values()) == [0.0, 1.0, 2.0]
    assert spec.config_at(2).occupations == [(1, 3)]


def test_spectrum_trace_rows():
    rows = spectrum_trace(fast(), samples=16)
    assert {"t", "gap", "overlap", "e0", "e1"} <= set(rows[0])
    ts = [r["t"] for r in rows]
    assert ts == sorted(ts)
    assert all(r["gap"] >= 0 for r in rows)


def test_cli_exit_codes(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({**FAST, "gate": {"type": "phase", "theta": 1.0}}))
    out = tmp_path / "r.json"
    assert cli.main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    assert json.loads(out.read_text())["gate"] == "phase"
    cfg.write_text(json.dumps({"gate": {"colour": 1}}))
    assert cli.main(["run", "--config", str(cfg)]) == 2
    cfg.write_text("{not json")
    assert cli.main(["run", "--config", str(cfg)]) == 2
    assert cli.main(["run"]) == 2
    cfg.write_text(json.dumps({"schedule": {"total_time": 50.0, "tol": 1e-15, "max_steps": 8,
                                            "steps_per_segment": 2}}))
    assert cli.main(["run", "--config", str(cfg)]) == 3
    assert "ConvergenceError" in capsys.readouterr().err


def test_cli_sweep_stdout(capsys):
    code = cli.main(["sweep", "--preset", "fig2", "--sweep", "total_time", "--min", "5",
                     "--max", "10", "--points", "2", "--workers", "1"])
    assert code == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == ",".join(CSV_HEADER) and len(lines) == 3


def test_sudden_limit_gives_wrong_gate():
    rep = run_gate(preset("fig2", **{"gate.theta": np.pi, "schedule.total_time": 0.01}))
    assert rep.error > 0.5


def test_exact_11_sector_near_quoted_error():
    rep = run_gate(preset("fig3-local", **{"params.u_bb": 1e3}))
    assert 1e-5 <= rep.error <= 1e-3


def test_filling_ordering_along_u_bb_sweep():
    env = {}
    for occ in ([1, 1], [3, 1]):
        base = preset("fig3-local", **{"lattice.occupations": [occ]})
        rows = run_sweep(SweepSpec("u_bb", 10.0, 1e4, 8, "log", base), workers=1)
        env[tuple(occ)] = np.minimum.accumulate([r["error"] for r in rows])
    assert np.all(env[(3, 1)] >= env[(1, 1)])


def test_hadamard_time_sweep_envelope_decreases():
    base = preset("fig2", **{"gate.type": "hadamard"})
    rows = run_sweep(SweepSpec("total_time", 10.0, 1000.0, 13, "log", base))
    t = np.array([r["x"] for r in rows])
    e = np.array([r["error"] for r in rows])
    edges = np.geomspace(10.0, 1000.0, 5)
    peaks = [e[(t >= lo * (1 - 1e-12)) & (t < hi * (1 - 1e-12))].max() for lo, hi in zip(edges[:-1], edges[1:])]
    assert np.all(np.diff(peaks) < 0)


def test_spectrum_hadamard_gap_and_jump():
    cfg = preset("fig2", **{"gate.type": "hadamard", "schedule.total_time": 40.0})
    rows = spectrum_trace(cfg, samples=32)
    from simgate.schedule import protocol_hadamard
    s = protocol_hadamard(cfg.protocol())
    t = np.array([r["t"] for r in rows])
    c = s.sample_many(t)
    assert np.allclose([r["gap"] for r in rows], np.hypot(c["delta"], c["omega_x"]), atol=1e-12)
    k = int(np.argmin([r["overlap"] for r in rows]))
    assert rows[k]["overlap"] < 0.5 and abs(t[k] - 40.0) < 1e-6


def test_spectrum_lattice_without_drive_has_gap_u_bb():
    # hopping is off for local gates; a negligible drive stands in for lasers off
    cfg = preset("fig3-local", **{"lattice.occupations": [[2, 1]], "gate.omega_m": 1e-12,
                                  "params.u_bb": 7.0, "params.u_aa": 0.0, "params.u_ab": 0.0})
    rows = spectrum_trace(cfg, samples=8)
    assert np.allclose([r["gap"] for r in rows], 7.0, atol=1e-9)
