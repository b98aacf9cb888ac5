"""Run configurations, model-tier orchestration and parameter sweeps.

A run builds a protocol schedule, turns it into a drive for the requested
model tier and propagates it:

``ideal``
    Two-level (or four-level) qubit Hamiltonians.
``effective``
    Second-order effective Hamiltonian of the lattice on each computation
    sector.
``exact``
    The full two-species lattice Hamiltonian in a fixed-N Fock basis.

Reports carry no wall-clock data, so identical configs give identical bytes.
"""
from __future__ import annotations

import copy
import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

import numpy as np

from . import gates
from .evolve import ConvergenceError, TrackingError, gap_profile, propagate
from .fock import FockBasis, SectorSpec, build_basis, configuration_indices, sector_indices
from .hamiltonians import (EffectiveDrive, IdealQubitDrive, IdealTwoQubitDrive, LatticeDrive,
                           LatticeParams, NearResonanceError, delta_tilde, hopping_for_shift)
from .schedule import (CalibrationMap, ProtocolConfig, Schedule, protocol_cnot_u1,
                       protocol_cnot_u3, protocol_hadamard, protocol_phase)

GATES = ("phase", "hadamard", "cnot")
MODELS = ("ideal", "effective", "exact")
SWEEP_VARIABLES = ("total_time", "u_bb", "occupation_imbalance")
CSV_HEADER = ("x", "fidelity", "error", "leakage", "min_gap", "status")
NUMERICAL_ERRORS = (ConvergenceError, NearResonanceError, TrackingError, ZeroDivisionError,
                    np.linalg.LinAlgError)


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


# --- configuration ---------------------------------------------------------

_SCHEMA: dict[str, dict[str, Any]] = {
    "lattice": {"sites": 2, "occupations": [[1, 1]]},
    "params": {"u_bb": 100.0, "u_ab": 0.0, "u_aa": 0.0, "j_a": 0.0, "j_m": 0.0,
               "g": None, "g_offset": None},
    "gate": {"type": "phase", "theta": None, "omega_m": 1.0, "delta_m": 0.0,
             "delta_tilde_m": 0.0, "phi_m": None, "sites": None, "u2": "ideal"},
    "schedule": {"total_time": 300.0, "ramp": "linear", "steps_per_segment": 64,
                 "tol": 1e-8, "scheme": "magnus4", "max_steps": 2**16},
    "calibration": {"scale": 1.0, "exponent": 1.0, "random": False},
}
_TOP_LEVEL = set(_SCHEMA) | {"model", "seed", "units"}


def _merge(base: dict, override: Mapping, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        where = f"{path}{key}"
        if path == "" and key not in _TOP_LEVEL:
            raise ConfigError(f"unknown config key {where!r}")
        if path == "" and key in _SCHEMA:
            if val is None and key == "calibration":
                out[key] = None
                continue
            if not isinstance(val, Mapping):
                raise ConfigError(f"{where!r} must be an object")
            allowed = _SCHEMA[key]
            section = dict(out.get(key) or allowed)
            for sub, v in val.items():
                if sub not in allowed:
                    raise ConfigError(f"unknown config key '{where}.{sub}'")
                section[sub] = v
            out[key] = section
        else:
            out[key] = val
    return out


@dataclass(frozen=True)
class RunConfig:
    """Validated run description; build it with :meth:`from_dict`.

    ``raw`` holds the complete nested JSON form, defaults filled in.
    """

    raw: dict = field(repr=False, compare=True, hash=False)

    @classmethod
    def from_dict(cls, d: Mapping, base: Mapping | None = None) -> "RunConfig":
        root = {k: copy.deepcopy(v) for k, v in _SCHEMA.items()}
        root.update({"model": "ideal", "seed": 0, "units": "omega_m", "calibration": None})
        if base is not None:
            root = _merge(root, base)
        cfg = cls(_merge(root, d))
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, text: str, base: Mapping | None = None) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(data, Mapping):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data, base)

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)

    def replace(self, **changes) -> "RunConfig":
        """Copy with dotted-key overrides, e.g. ``replace(**{"params.u_bb": 1e3})``."""
        d = self.to_dict()
        for key, val in changes.items():
            parts = key.split(".")
            node = d
            for p in parts[:-1]:
                if not isinstance(node.get(p), dict):
                    node[p] = {}
                node = node[p]
            node[parts[-1]] = val
        return RunConfig.from_dict(d)

    # convenient views
    @property
    def model(self) -> str:
        return self.raw["model"]

    @property
    def gate(self) -> str:
        return self.raw["gate"]["type"]

    @property
    def occupations(self) -> list[tuple[int, ...]]:
        occ = self.raw["lattice"]["occupations"]
        if occ and not isinstance(occ[0], (list, tuple)):
            occ = [occ]
        return [tuple(int(n) for n in o) for o in occ]

    @property
    def theta(self) -> float:
        g = self.raw["gate"]
        if g["theta"] is not None:
            return float(g["theta"])
        if g["phi_m"] is not None:
            return float(g["phi_m"])
        return 0.5 * np.pi

    @property
    def g(self) -> float:
        p = self.raw["params"]
        if p["g"] is not None:
            return float(p["g"])
        offset = p["g_offset"] if p["g_offset"] is not None else 0.5 * p["u_ab"]
        return float(p["u_bb"] + offset)

    def lattice_params(self) -> LatticeParams:
        p = self.raw["params"]
        return LatticeParams(u_bb=float(p["u_bb"]), u_ab=float(p["u_ab"]), u_aa=float(p["u_aa"]),
                             j_a=float(p["j_a"]), j_b=float(p["j_m"]), g=self.g)

    def gate_sites(self) -> list[int]:
        s = self.raw["gate"]["sites"]
        if s is not None:
            return [int(x) for x in s]
        return [0, 1] if self.gate == "cnot" else [0]

    def calibration(self) -> CalibrationMap | None:
        c = self.raw["calibration"]
        if c is None:
            return None
        if c.get("random"):
            return CalibrationMap.random(self.raw["seed"])
        return CalibrationMap(float(c.get("scale", 1.0)), float(c.get("exponent", 1.0)))

    def protocol(self) -> ProtocolConfig:
        g, s = self.raw["gate"], self.raw["schedule"]
        dtm = float(g["delta_tilde_m"])
        if self.gate == "cnot" and self.model != "ideal":
            p = self.raw["params"]
            dtm = delta_tilde(float(p["j_m"]), self.g, float(p["u_bb"]))
        return ProtocolConfig(omega_m=float(g["omega_m"]), T=float(s["total_time"]),
                              delta_m=float(g["delta_m"]), delta_tilde_m=abs(dtm),
                              theta=self.theta, ramp=s["ramp"])

    def validate(self) -> None:
        r = self.raw
        try:
            if r["model"] not in MODELS:
                raise ConfigError(f"model must be one of {MODELS}, got {r['model']!r}")
            if self.gate not in GATES:
                raise ConfigError(f"gate type must be one of {GATES}, got {self.gate!r}")
            if r["units"] not in ("omega_m", "j_m"):
                raise ConfigError("units must be 'omega_m' or 'j_m'")
            if r["gate"]["u2"] not in ("ideal", "simulated"):
                raise ConfigError("gate.u2 must be 'ideal' or 'simulated'")
            if not isinstance(r["seed"], int):
                raise ConfigError("seed must be an integer")
            sch = r["schedule"]
            if int(sch["steps_per_segment"]) < 1:
                raise ConfigError("steps_per_segment must be >= 1")
            if sch["scheme"] not in ("midpoint", "magnus4"):
                raise ConfigError("schedule.scheme must be 'midpoint' or 'magnus4'")
            sites = int(r["lattice"]["sites"])
            for occ in self.occupations:
                if len(occ) != sites:
                    raise ConfigError(f"occupations {occ} do not match {sites} sites")
                if min(occ) < 1:
                    raise ConfigError("every site needs at least one atom")
            gs = self.gate_sites()
            need = 2 if self.gate == "cnot" else 1
            if len(gs) != need or len(set(gs)) != need or not all(0 <= s < sites for s in gs):
                raise ConfigError(f"gate.sites {gs} invalid for a {self.gate} gate on {sites} sites")
            if self.gate == "hadamard" and not r["gate"]["delta_m"] > 0:
                raise ConfigError("hadamard needs gate.delta_m > 0")
            if self.gate == "cnot":
                if self.model == "ideal" and not r["gate"]["delta_tilde_m"] > 0:
                    raise ConfigError("ideal cnot needs gate.delta_tilde_m > 0")
                if self.model != "ideal":
                    p = r["params"]
                    if not p["j_m"] > 0:
                        raise ConfigError("lattice cnot needs params.j_m > 0")
                    if self.g <= p["u_bb"]:
                        raise ConfigError("lattice cnot needs g > u_bb (positive shift)")
            if self.model != "ideal":
                self.lattice_params()
                if r["params"]["u_bb"] <= 0:
                    raise ConfigError("u_bb must be positive for a computation sector")
            self.protocol()
            self.calibration()
        except ConfigError:
            raise
        except (ValueError, TypeError, KeyError, ZeroDivisionError) as exc:
            raise ConfigError(str(exc)) from None


PRESETS: dict[str, dict] = {
    # ideal-model speed study; Omega_m = 1 sets the units
    "fig2": {
        "model": "ideal",
        "units": "omega_m",
        "gate": {"type": "phase", "omega_m": 1.0, "delta_m": 10.0, "delta_tilde_m": 10.0,
                 "phi_m": math.pi / 4},
        "schedule": {"total_time": 300.0, "ramp": "sin2"},
    },
    # local gates on the lattice, energies in units of Omega_m
    "fig3-local": {
        "model": "exact",
        "units": "omega_m",
        "lattice": {"sites": 2, "occupations": [[1, 1]]},
        "params": {"u_bb": 100.0, "u_ab": 0.1, "u_aa": 0.1, "j_a": 0.1, "j_m": 0.1,
                   "g_offset": 0.05},
        "gate": {"type": "phase", "theta": math.pi / 2, "omega_m": 1.0, "delta_m": 6.0,
                 "sites": [0]},
        "schedule": {"total_time": 100.0, "ramp": "sin2"},
    },
    # nonlocal gate, energies in units of J_m; Omega_m = J_m^2 / 6
    "fig3-cnot": {
        "model": "effective",
        "units": "j_m",
        "lattice": {"sites": 2, "occupations": [[1, 1]]},
        "params": {"u_bb": 1000.0, "u_ab": 1.0, "u_aa": 1.0, "j_a": 1.0, "j_m": 1.0,
                   "g_offset": 0.5},
        "gate": {"type": "cnot", "omega_m": 1.0 / 6.0, "sites": [0, 1]},
        "schedule": {"total_time": 600.0, "ramp": "sin2"},
    },
}


def preset(name: str, **overrides) -> RunConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    cfg = RunConfig.from_dict(PRESETS[name])
    return cfg.replace(**overrides) if overrides else cfg


# --- control adapters -------------------------------------------------------

def qubit_controls(s: Schedule, cal: CalibrationMap | None = None):
    """Map a schedule onto ``delta``/``rabi``/``phase`` of a driven qubit.

    A negative ``omega_x`` is a positive Rabi amplitude with phase pi.
    """
    def controls(ts):
        c = s.sample_many(ts, cal)
        zero = np.zeros_like(ts)
        if "omega_x" in c:
            ox = c["omega_x"]
            return {"delta": c.get("delta", zero), "rabi": np.abs(ox),
                    "phase": np.where(ox < 0, np.pi, 0.0)}
        return {"delta": c.get("delta", zero), "rabi": c["omega"], "phase": c["phi"]}
    return controls


def shift_controls(s: Schedule, cal: CalibrationMap | None = None):
    def controls(ts):
        c = s.sample_many(ts, cal)
        return {"delta_tilde": c["delta_tilde"], "omega_x": c["omega_x"]}
    return controls


def lattice_controls(s: Schedule, cfg: RunConfig, laser_site: int | None,
                     cal: CalibrationMap | None = None):
    """Lattice controls: lasers on ``laser_site`` and, for shift schedules, hopping.

    The conditional shift is set through ``J_b(t) = sqrt(shift(t) (g - U_bb))``
    with ``J_a(t) = (j_a / j_m) J_b(t)``.  Local gates run with hopping off.
    """
    p = cfg.raw["params"]
    g, u_bb = cfg.g, float(p["u_bb"])
    ja_ratio = float(p["j_a"]) / float(p["j_m"]) if p["j_m"] else 0.0
    qc = qubit_controls(s, cal)

    def controls(ts):
        out: dict = {}
        c = s.sample_many(ts, cal)
        if "delta_tilde" in c:
            j_b = hopping_for_shift(c["delta_tilde"], g, u_bb)
            out["j_b"] = j_b
            out["j_a"] = ja_ratio * j_b
        if laser_site is not None:
            q = qc(ts)
            if np.any(q["rabi"]) or np.any(q["delta"]):
                out["lasers"] = {laser_site: q}
        return out
    return controls


# --- reports ---------------------------------------------------------------

@dataclass
class GateReport:
    """Outcome of :func:`run_gate`; ``error = 1 - fidelity`` (worst sector)."""

    gate: str
    model: str
    fidelity: float
    error: float
    leakage: float
    min_gap: float
    sectors: list
    total_time: float
    duration: float
    steps: int
    converged: bool
    unitarity_residual: float
    config: dict = field(repr=False)
    unitary: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "gate": self.gate,
            "model": self.model,
            "fidelity": self.fidelity,
            "error": self.error,
            "leakage": self.leakage,
            "min_gap": self.min_gap,
            "sectors": self.sectors,
            "timing": {"total_time": self.total_time, "duration": self.duration,
                       "steps": self.steps, "converged": self.converged},
            "unitarity_residual": self.unitarity_residual,
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), indent=2, sort_keys=True) + "\n"


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else str(v)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


@dataclass
class _Run:
    u: np.ndarray
    min_gap: float
    steps: int
    converged: bool
    residual: float


def _propagate(drive, s: Schedule, cfg: RunConfig, observe=None) -> _Run:
    sch = cfg.raw["schedule"]
    r = propagate(drive, s.total_time, steps=int(sch["steps_per_segment"]),
                  breakpoints=s.breakpoints(), tol=float(sch["tol"]), observe=observe,
                  max_steps=int(sch["max_steps"]), scheme=sch["scheme"])
    return _Run(r.U, r.min_gap, r.step_count, r.converged, r.unitarity_residual)


def _combine(runs: Iterable[_Run]) -> dict:
    runs = list(runs)
    return {"min_gap": min(r.min_gap for r in runs), "steps": sum(r.steps for r in runs),
            "converged": all(r.converged for r in runs),
            "residual": max(r.residual for r in runs)}


def _sector_entry(u_s: np.ndarray, gate: gates.GateTarget, gate_sites, occ, leak) -> dict:
    sites = len(occ) if occ is not None else gate.qubits
    ideal = gates.embed(gate.matrix, gate_sites, sites) if occ is not None else gate.matrix
    f = gates.gate_fidelity(ideal, u_s)
    dev = gates.reduce_to_gate(u_s, gate_sites, sites)[1] if occ is not None else 0.0
    return {"occupations": list(occ) if occ is not None else None, "fidelity": f,
            "error": 1.0 - f, "phase": gates.global_phase(ideal, u_s), "leakage": leak,
            "idle_deviation": dev, "idle_trivial": bool(dev <= gates.IDLE_TOL)}


def _ideal_not(cfg: RunConfig, cal) -> tuple[np.ndarray, list[_Run]]:
    """Single-qubit NOT for the CNOT composite, ideal or built from protocols."""
    if cfg.raw["gate"]["u2"] == "ideal":
        return gates.X, []
    pc = cfg.protocol()
    base = ProtocolConfig(pc.omega_m, pc.T, delta_m=pc.delta_m or pc.delta_tilde_m,
                          theta=np.pi, ramp=pc.ramp)
    sp, sh = protocol_phase(base), protocol_hadamard(base)
    rp = _propagate(IdealQubitDrive(qubit_controls(sp, cal)), sp, cfg)
    rh = _propagate(IdealQubitDrive(qubit_controls(sh, cal)), sh, cfg)
    return gates.simulated_not(rp.u, rh.u), [rp, rh]


def _cnot_from_pieces(u1, a, b, not1):
    u3 = gates.echoed_u3(a, b, not1)
    return gates.compose_cnot(u1, u3, "simulated", not1)


def _run_ideal(cfg: RunConfig):
    cal = cfg.calibration()
    pc = cfg.protocol()
    if cfg.gate == "phase":
        s = protocol_phase(pc)
        r = _propagate(IdealQubitDrive(qubit_controls(s, cal)), s, cfg)
        return r.u, s.total_time, [r]
    if cfg.gate == "hadamard":
        s = protocol_hadamard(pc)
        r = _propagate(IdealQubitDrive(qubit_controls(s, cal)), s, cfg)
        return r.u, s.total_time, [r]
    s1 = protocol_cnot_u1(pc)
    first, second = protocol_cnot_u3(s1).split(pc.T)
    runs = [_propagate(IdealTwoQubitDrive(shift_controls(x, cal)), x, cfg) for x in (s1, first, second)]
    not1, extra = _ideal_not(cfg, cal)
    u = _cnot_from_pieces(runs[0].u, runs[1].u, runs[2].u, not1)
    return u, 2 * s1.total_time, runs + extra


def _restricted_basis(full: FockBasis, occ) -> tuple[FockBasis, np.ndarray]:
    """Sub-basis of the states with per-site totals ``occ`` (no hopping)."""
    keep = np.asarray(configuration_indices(full, occ), dtype=int)
    states = full.states[keep]
    lookup = {tuple(int(x) for x in row): k for k, row in enumerate(states)}
    return FockBasis(full.sites, full.total_atoms, states, lookup), keep


def _lattice_sector(cfg: RunConfig, occ: tuple[int, ...]):
    """Return ``(u_sector, leakage, duration, runs)`` for one occupation sector."""
    spec = SectorSpec(occ)
    params = cfg.lattice_params()
    full = build_basis(len(occ), spec.total_atoms)
    cal = cfg.calibration()
    pc = cfg.protocol()
    local = cfg.gate != "cnot"
    site = cfg.gate_sites()[-1] if not local else cfg.gate_sites()[0]
    basis = _restricted_basis(full, occ)[0] if local else full
    idx = sector_indices(basis, spec)

    def drive_for(s: Schedule, laser):
        lat = LatticeDrive(basis, params, lattice_controls(s, cfg, laser, cal), idx)
        return EffectiveDrive(lat) if cfg.model == "effective" else lat

    observe = None if cfg.model == "effective" else idx

    def restrict(u):
        return u if cfg.model == "effective" else u[np.ix_(idx, idx)]

    if local:
        s = protocol_phase(pc) if cfg.gate == "phase" else protocol_hadamard(pc)
        r = _propagate(drive_for(s, site), s, cfg, observe)
        u_s = restrict(r.u)
        return u_s, _leak(u_s), s.total_time, [r]
    s1 = protocol_cnot_u1(pc)
    first, second = protocol_cnot_u3(s1).split(pc.T)
    runs = [_propagate(drive_for(s1, site), s1, cfg, observe),
            _propagate(drive_for(first, None), first, cfg, observe),
            _propagate(drive_for(second, None), second, cfg, observe)]
    not1, extra = _ideal_not(cfg, cal)
    u1, a, b = (restrict(r.u) for r in runs)
    u_s = _cnot_from_pieces(u1, a, b, not1)
    return u_s, _leak(u_s), 2 * s1.total_time, runs + extra


def _leak(u_s: np.ndarray) -> float:
    kept = np.sum(np.abs(u_s) ** 2, axis=0)
    return float(np.clip(np.max(1.0 - kept), 0.0, 1.0))


def run_gate(cfg: RunConfig | Mapping, keep_unitary: bool = False) -> GateReport:
    """Simulate one gate at the configured model tier.

    Raises
    ------
    ConfigError
        For invalid configurations.
    ConvergenceError, NearResonanceError, TrackingError
        For numerical failures.
    """
    if not isinstance(cfg, RunConfig):
        cfg = RunConfig.from_dict(cfg)
    tgt = gates.target(cfg.gate, cfg.theta) if cfg.gate == "phase" else gates.target(cfg.gate)
    if cfg.model == "ideal":
        u, duration, runs = _run_ideal(cfg)
        sectors = [_sector_entry(u, tgt, list(range(tgt.qubits)), None, 0.0)]
        kept = u
    else:
        sectors, runs, kept = [], [], None
        duration = 0.0
        for occ in cfg.occupations:
            u_s, leak, duration, rs = _lattice_sector(cfg, occ)
            sectors.append(_sector_entry(u_s, tgt, cfg.gate_sites(), occ, leak))
            runs += rs
            kept = u_s if kept is None else kept
    info = _combine(runs)
    worst = min(sectors, key=lambda e: e["fidelity"])
    return GateReport(
        gate=cfg.gate, model=cfg.model, fidelity=worst["fidelity"], error=1.0 - worst["fidelity"],
        leakage=max(e["leakage"] for e in sectors), min_gap=info["min_gap"], sectors=sectors,
        total_time=float(cfg.raw["schedule"]["total_time"]), duration=duration,
        steps=info["steps"], converged=info["converged"], unitarity_residual=info["residual"],
        config=cfg.to_dict(), unitary=kept if keep_unitary else None,
    )


# --- sweeps ----------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    variable: str
    min: float
    max: float
    points: int
    spacing: str
    base: RunConfig

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ConfigError(f"sweep variable must be one of {SWEEP_VARIABLES}")
        if not self.min < self.max:
            raise ConfigError("sweep needs min < max")
        if self.points < 2:
            raise ConfigError("sweep needs at least 2 points")
        if self.spacing not in ("log", "linear"):
            raise ConfigError("spacing must be 'log' or 'linear'")
        if self.spacing == "log" and self.min <= 0:
            raise ConfigError("log spacing needs min > 0")

    def values(self) -> np.ndarray:
        if self.variable == "occupation_imbalance":
            lo, hi = int(math.ceil(self.min)), int(math.floor(self.max))
            return np.arange(lo, hi + 1, dtype=float)
        if self.spacing == "log":
            return np.geomspace(self.min, self.max, self.points)
        return np.linspace(self.min, self.max, self.points)

    def config_at(self, x: float) -> RunConfig:
        if self.variable == "total_time":
            return self.base.replace(**{"schedule.total_time": float(x)})
        if self.variable == "u_bb":
            return self.base.replace(**{"params.u_bb": float(x)})
        m = self.base.occupations[0][0]
        occ = [m] * self.base.raw["lattice"]["sites"]
        occ[-1] = m + int(round(x))
        return self.base.replace(**{"lattice.occupations": [occ]})


def _sweep_point(args) -> dict:
    spec, x = args
    row = {"x": float(x), "fidelity": math.nan, "error": math.nan, "leakage": math.nan,
           "min_gap": math.nan, "status": "ok"}
    try:
        rep = run_gate(spec.config_at(x))
    except ConfigError as exc:
        row["status"] = f"config_error: {exc}"
        return row
    except NUMERICAL_ERRORS as exc:
        row["status"] = f"{type(exc).__name__}: {exc}"
        return row
    row.update(fidelity=rep.fidelity, error=rep.error, leakage=rep.leakage, min_gap=rep.min_gap)
    if not rep.converged:
        row["status"] = "unconverged"
    return row


def run_sweep(spec: SweepSpec, workers: int | None = None) -> list[dict]:
    """Evaluate the gate at every sweep value; rows come back sorted by ``x``.

    Point failures become rows with a non-``ok`` status.  ``workers`` sets
    the process-pool width (default: logical cores, 1 runs inline).
    """
    xs = spec.values()
    if workers is None:
        workers = os.cpu_count() or 1
    jobs = [(spec, x) for x in xs]
    if workers <= 1 or len(jobs) == 1:
        rows = [_sweep_point(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    return sorted(rows, key=lambda r: r["x"])


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    return repr(float(v))


def rows_to_csv(rows: Iterable[Mapping], header: Iterable[str] = CSV_HEADER) -> str:
    header = list(header)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(r[h]) for h in header])
    return buf.getvalue()


# --- spectrum --------------------------------------------------------------

def spectrum_trace(cfg: RunConfig | Mapping, samples: int = 256) -> list[dict]:
    """Instantaneous spectrum of the configured drive along its schedule.

    Rows hold ``t``, the tracked ``gap``, the level ``overlap`` between
    consecutive samples and the sorted eigenvalues ``e0, e1, ...``.  For the
    CNOT the first two-qubit process is traced; lattice tiers use the first
    occupation sector.
    """
    if not isinstance(cfg, RunConfig):
        cfg = RunConfig.from_dict(cfg)
    cal = cfg.calibration()
    pc = cfg.protocol()
    s = {"phase": protocol_phase, "hadamard": protocol_hadamard, "cnot": protocol_cnot_u1}[cfg.gate](pc)
    sector = None
    if cfg.model == "ideal":
        drive = (IdealTwoQubitDrive(shift_controls(s, cal)) if cfg.gate == "cnot"
                 else IdealQubitDrive(qubit_controls(s, cal)))
    else:
        occ = cfg.occupations[0]
        spec = SectorSpec(occ)
        full = build_basis(len(occ), spec.total_atoms)
        basis = _restricted_basis(full, occ)[0] if cfg.gate != "cnot" else full
        idx = sector_indices(basis, spec)
        site = cfg.gate_sites()[-1] if cfg.gate == "cnot" else cfg.gate_sites()[0]
        drive = LatticeDrive(basis, cfg.lattice_params(), lattice_controls(s, cfg, site, cal), idx)
        if cfg.model == "effective":
            drive = EffectiveDrive(drive)
        else:
            sector = idx
    prof = gap_profile(drive, s.total_time, sector=sector, samples=samples,
                       breakpoints=s.breakpoints())
    rows = []
    for t, g, ov, w in zip(prof.times, prof.gap, prof.overlap, prof.eigenvalues):
        row = {"t": t, "gap": g, "overlap": ov}
        row.update({f"e{k}": e for k, e in enumerate(w)})
        rows.append(row)
    return rows
