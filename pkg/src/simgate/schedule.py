"""Piecewise control paths and the adiabatic gate protocols.

A :class:`Schedule` is a start point followed by segments.  Segments with
positive duration ramp between their end points; zero-duration segments are
sudden jumps and consume no time.  Sampling is right-continuous, so a time
that coincides with a jump returns the post-jump value.

Every protocol constructor takes the base duration ``T`` from
:class:`ProtocolConfig` and produces a path of total length ``2 T``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

RAMPS = ("linear", "sin2")
AMPLITUDE_PARAMS = frozenset({"omega", "delta", "delta_tilde", "omega_x"})
PHASE_PARAMS = frozenset({"phi"})
KNOWN_PARAMS = AMPLITUDE_PARAMS | PHASE_PARAMS


def ramp_profile(u, kind: str = "linear"):
    """Normalized ramp ``r(u)`` on ``[0, 1]`` with ``r(0)=0``, ``r(1)=1``.

    Both shapes satisfy ``r(u) + r(1 - u) = 1``, which the mirror-symmetric
    protocols rely on.
    """
    u = np.asarray(u, dtype=float)
    if kind == "linear":
        return u
    if kind == "sin2":
        return np.sin(0.5 * np.pi * u) ** 2
    raise ValueError(f"unknown ramp {kind!r}; expected one of {RAMPS}")


@dataclass(frozen=True)
class Segment:
    """One step of a path: ``start -> end`` over ``duration``."""

    duration: float
    start: tuple[float, ...]
    end: tuple[float, ...]
    ramp: str = "linear"

    def __post_init__(self):
        object.__setattr__(self, "start", tuple(float(x) for x in self.start))
        object.__setattr__(self, "end", tuple(float(x) for x in self.end))
        if not self.duration >= 0:
            raise ValueError(f"segment duration must be >= 0, got {self.duration}")
        if len(self.start) != len(self.end):
            raise ValueError("segment end points have different lengths")
        if self.ramp not in RAMPS:
            raise ValueError(f"unknown ramp {self.ramp!r}")
        if self.sudden and self.start == self.end:
            raise ValueError("a sudden jump must change the parameters")

    @property
    def sudden(self) -> bool:
        return self.duration == 0


@dataclass(frozen=True)
class Schedule:
    """Piecewise path through a named parameter space.

    Attributes
    ----------
    params : tuple of str
        Names of the swept controls, e.g. ``("omega", "phi")``.
    segments : tuple of Segment
        Consecutive steps; each starts where the previous one ends.
    kind : str or None
        Protocol label used by :func:`validate_symmetry`.
    base_time : float or None
        The protocol's ``T`` (the path lasts ``2 T``).
    """

    params: tuple[str, ...]
    segments: tuple[Segment, ...]
    kind: str | None = None
    base_time: float | None = None
    references: tuple[tuple[str, float], ...] | None = None
    _table: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))
        object.__setattr__(self, "segments", tuple(self.segments))
        unknown = set(self.params) - KNOWN_PARAMS
        if unknown:
            raise ValueError(f"unknown parameters {sorted(unknown)}")
        if not self.segments:
            raise ValueError("schedule needs at least one segment")
        for seg in self.segments:
            if len(seg.start) != len(self.params):
                raise ValueError("segment dimension does not match parameter names")
        for prev, nxt in zip(self.segments, self.segments[1:]):
            if not np.allclose(prev.end, nxt.start, rtol=0, atol=1e-12 * (1 + np.max(np.abs(prev.end)))):
                raise ValueError(f"discontinuity between {prev.end} and {nxt.start} without a sudden jump")
        timed = [s for s in self.segments if not s.sudden]
        if not timed:
            raise ValueError("schedule has no segment of positive duration")
        t0 = np.concatenate([[0.0], np.cumsum([s.duration for s in timed])])
        object.__setattr__(self, "_table", {
            "t0": t0[:-1],
            "dur": np.array([s.duration for s in timed]),
            "start": np.array([s.start for s in timed]),
            "end": np.array([s.end for s in timed]),
            "linear": np.array([s.ramp == "linear" for s in timed]),
        })

    @property
    def total_time(self) -> float:
        return float(sum(s.duration for s in self.segments))

    @property
    def start(self) -> tuple[float, ...]:
        return self.segments[0].start

    @property
    def end(self) -> tuple[float, ...]:
        return self.segments[-1].end

    def breakpoints(self) -> np.ndarray:
        """Segment boundary times including 0 and the total time."""
        return np.unique(np.concatenate([[0.0], np.cumsum([s.duration for s in self.segments])]))

    def jump_times(self) -> list[float]:
        t, out = 0.0, []
        for s in self.segments:
            if s.sudden:
                out.append(t)
            t += s.duration
        return out

    def sample_many(self, ts, cal: "CalibrationMap | None" = None) -> dict[str, np.ndarray]:
        """Evaluate every parameter at the times ``ts``.

        Raises
        ------
        ValueError
            If any time lies outside ``[0, total_time]``.
        """
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        total = self.total_time
        if np.any(ts < 0) or np.any(ts > total * (1 + 1e-14)):
            raise ValueError(f"sample time outside [0, {total}]")
        tab = self._table
        k = np.clip(np.searchsorted(tab["t0"], ts, side="right") - 1, 0, len(tab["t0"]) - 1)
        u = np.clip((ts - tab["t0"][k]) / tab["dur"][k], 0.0, 1.0)
        r = np.where(tab["linear"][k], u, np.sin(0.5 * np.pi * u) ** 2)
        vals = tab["start"][k] + (tab["end"][k] - tab["start"][k]) * r[:, None]
        out = {name: vals[:, j] for j, name in enumerate(self.params)}
        if cal is not None:
            out = cal.apply(out, self.amplitude_references())
        return out

    def sample(self, t: float, cal: "CalibrationMap | None" = None) -> dict[str, float]:
        return {k: float(v[0]) for k, v in self.sample_many([t], cal).items()}

    def amplitude_references(self) -> dict[str, float]:
        """Largest magnitude reached by each amplitude parameter.

        Pieces produced by :meth:`split` keep the references of the parent.
        """
        if self.references is not None:
            return dict(self.references)
        pts = np.array([self.start] + [s.end for s in self.segments])
        return {name: float(np.max(np.abs(pts[:, j])))
                for j, name in enumerate(self.params) if name in AMPLITUDE_PARAMS}

    def split(self, t: float) -> tuple["Schedule", "Schedule"]:
        """Cut the path at a segment boundary ``t`` (a jump at ``t`` goes to the second half)."""
        acc = 0.0
        for i, s in enumerate(self.segments):
            if abs(acc - t) <= 1e-12 * max(1.0, self.total_time):
                if i == 0:
                    break
                refs = tuple(sorted(self.amplitude_references().items()))
                return (replace(self, segments=self.segments[:i], kind=None, base_time=None, references=refs),
                        replace(self, segments=self.segments[i:], kind=None, base_time=None, references=refs))
            acc += s.duration
        raise ValueError(f"{t} is not an interior segment boundary")

    def to_dict(self) -> dict:
        return {
            "params": list(self.params),
            "kind": self.kind,
            "base_time": self.base_time,
            "start": list(self.start),
            "steps": [{"to": list(s.end), "time": s.duration, "ramp": s.ramp, "sudden": s.sudden}
                      for s in self.segments],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: Mapping) -> "Schedule":
        allowed = {"params", "kind", "base_time", "start", "steps"}
        extra = set(d) - allowed
        if extra:
            raise ValueError(f"unknown schedule keys {sorted(extra)}")
        point = tuple(d["start"])
        segs = []
        for step in d["steps"]:
            extra = set(step) - {"to", "time", "ramp", "sudden"}
            if extra:
                raise ValueError(f"unknown step keys {sorted(extra)}")
            sudden = bool(step.get("sudden", False))
            duration = 0.0 if sudden else float(step["time"])
            if not sudden and duration == 0:
                raise ValueError("zero-time step must be marked sudden")
            segs.append(Segment(duration, point, tuple(step["to"]), step.get("ramp", "linear")))
            point = tuple(step["to"])
        return cls(tuple(d["params"]), tuple(segs), d.get("kind"), d.get("base_time"))

    @classmethod
    def from_json(cls, text: str) -> "Schedule":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class ProtocolConfig:
    """Reachable control maxima and timing for the gate protocols."""

    omega_m: float
    T: float
    delta_m: float = 0.0
    delta_tilde_m: float = 0.0
    theta: float = 0.0
    ramp: str = "linear"

    def __post_init__(self):
        if not self.omega_m > 0:
            raise ValueError("omega_m must be positive")
        if self.delta_m < 0 or self.delta_tilde_m < 0:
            raise ValueError("delta_m and delta_tilde_m must be non-negative")
        if not self.T > 0:
            raise ValueError("T must be positive")
        if self.ramp not in RAMPS:
            raise ValueError(f"unknown ramp {self.ramp!r}")


@dataclass(frozen=True)
class CalibrationMap:
    """Monotone control-to-amplitude distortion ``f(I) = c ref (I/ref)**gamma``.

    ``ref`` is the nominal maximum of each amplitude, so ``f(ref) = c ref``.
    Signs are kept (a negative amplitude is a laser phase of pi, which is
    controlled exactly) and the phase ``phi`` passes through unchanged.
    """

    scale: float = 1.0
    exponent: float = 1.0

    def __post_init__(self):
        if not (self.scale > 0 and self.exponent > 0):
            raise ValueError("scale and exponent must be positive")

    @classmethod
    def random(cls, seed: int | None = None) -> "CalibrationMap":
        rng = np.random.default_rng(seed)
        return cls(float(np.exp(rng.uniform(np.log(0.5), np.log(2.0)))),
                   float(np.exp(rng.uniform(np.log(0.8), np.log(1.25)))))

    def __call__(self, x, ref: float = 1.0):
        x = np.asarray(x, dtype=float)
        if ref <= 0:
            return self.scale * x
        return np.sign(x) * self.scale * ref * (np.abs(x) / ref) ** self.exponent

    def apply(self, values: Mapping[str, np.ndarray], refs: Mapping[str, float]) -> dict[str, np.ndarray]:
        return {k: (self(v, refs.get(k, 1.0)) if k in AMPLITUDE_PARAMS else v)
                for k, v in values.items()}


def _build(params, start, steps, ramp, kind, T) -> Schedule:
    segs, point = [], tuple(start)
    for duration, to in steps:
        segs.append(Segment(duration, point, to, ramp))
        point = tuple(to)
    return Schedule(params, tuple(segs), kind, T)


def protocol_phase(cfg: ProtocolConfig) -> Schedule:
    """Phase gate in ``(omega, phi)``; ``Delta = 0`` throughout.

    Four adiabatic steps of ``T/2`` with a sudden ``phi -> phi + pi`` in the
    middle, so that ``Omega(t) = Omega(2T - t)`` and
    ``phi(t) = pi + theta - phi(2T - t)``.
    """
    th, om, h = cfg.theta, cfg.omega_m, 0.5 * cfg.T
    if not -2 * np.pi < th < 2 * np.pi:
        raise ValueError("theta must lie in (-2 pi, 2 pi)")
    steps = [(h, (om, 0.0)), (h, (om, th / 2)), (0.0, (om, th / 2 + np.pi)),
             (h, (om, th + np.pi)), (h, (0.0, th + np.pi))]
    return _build(("omega", "phi"), (0.0, 0.0), steps, cfg.ramp, "phase", cfg.T)


def protocol_hadamard(cfg: ProtocolConfig) -> Schedule:
    """Hadamard-type gate in ``(delta, omega_x)``.

    A closed loop in ``[0, T]`` (four steps of ``T/4``), a sudden sign flip
    of ``omega_x`` at ``T`` and two steps of ``T/2`` at half speed, ending at
    ``(delta_m, 0)``.  The drive starts at ``-omega_m``: with ``|0>`` as the
    ``+1`` eigenstate of ``sigma_z`` this orientation maps
    ``(|0> + |1>)/sqrt2 -> |0>`` and ``(|0> - |1>)/sqrt2 -> -|1>``.
    """
    if not cfg.delta_m > 0:
        raise ValueError("Hadamard protocol needs delta_m > 0")
    d, om, T = cfg.delta_m, cfg.omega_m, cfg.T
    q = 0.25 * T
    steps = [(q, (d, -om)), (q, (d, 0.0)), (q, (d, -om)), (q, (0.0, -om)),
             (0.0, (0.0, om)), (0.5 * T, (d, om)), (0.5 * T, (d, 0.0))]
    return _build(("delta", "omega_x"), (0.0, -om), steps, cfg.ramp, "hadamard", T)


def protocol_cnot_u1(cfg: ProtocolConfig) -> Schedule:
    """First two-qubit process in ``(delta_tilde, omega_x)``, mirror-antisymmetric in ``omega_x``."""
    dt, om, h = cfg.delta_tilde_m, cfg.omega_m, 0.5 * cfg.T
    if dt == 0:
        raise ValueError("CNOT protocol needs delta_tilde_m != 0")
    steps = [(h, (dt, om)), (h, (0.0, om)), (0.0, (0.0, -om)), (h, (dt, -om)), (h, (dt, 0.0))]
    return _build(("delta_tilde", "omega_x"), (dt, 0.0), steps, cfg.ramp, "cnot_u1", cfg.T)


def protocol_cnot_u3(u1: Schedule) -> Schedule:
    """Same ``delta_tilde`` trace and duration as ``u1`` with ``omega_x = 0``.

    The no-op sign flip of ``u1`` disappears; its time stays a boundary.
    """
    if u1.params != ("delta_tilde", "omega_x"):
        raise ValueError("expected a schedule over (delta_tilde, omega_x)")
    segs = [Segment(s.duration, (s.start[0], 0.0), (s.end[0], 0.0), s.ramp)
            for s in u1.segments if not s.sudden]
    return Schedule(u1.params, tuple(segs), "cnot_u3", u1.base_time)


def sample(schedule: Schedule, t: float, cal: CalibrationMap | None = None) -> dict[str, float]:
    """Parameter point at time ``t`` (see :meth:`Schedule.sample`)."""
    return schedule.sample(t, cal)


@dataclass(frozen=True)
class SymmetryReport:
    kind: str
    max_residual: float
    residuals: dict
    samples: int

    @property
    def ok(self) -> bool:
        return self.max_residual <= 1e-12


def validate_symmetry(schedule: Schedule, kind: str | None = None, samples: int = 4096) -> SymmetryReport:
    """Check a protocol's timing constraints on a midpoint grid.

    Residuals are maxima over the grid of the violated relation, keyed by a
    short description.  A schedule that is not of the named kind simply
    reports large residuals.
    """
    kind = kind or schedule.kind
    total = schedule.total_time
    T = schedule.base_time if schedule.base_time else 0.5 * total
    res: dict[str, float] = {}

    def at(ts):
        return schedule.sample_many(np.clip(ts, 0.0, total))

    def gap(a, b):
        return float(np.max(np.abs(a - b))) if len(a) else 0.0

    if kind in ("phase", "cnot_u1", "cnot_u3"):
        ts = (np.arange(samples) + 0.5) * (T / samples)
        fwd, back = at(ts), at(2 * T - ts)
        res["duration == 2T"] = abs(total - 2 * T)
        if kind == "phase":
            res["omega(t) - omega(2T-t)"] = gap(fwd["omega"], back["omega"])
            theta = schedule.end[1] - np.pi
            res["phi(t) + phi(2T-t) - pi - theta"] = gap(fwd["phi"] + back["phi"], np.full_like(ts, np.pi + theta))
        else:
            res["delta_tilde(t) - delta_tilde(2T-t)"] = gap(fwd["delta_tilde"], back["delta_tilde"])
            res["omega_x(t) + omega_x(2T-t)"] = gap(fwd["omega_x"], -back["omega_x"])
    elif kind == "hadamard":
        ts = (np.arange(samples) + 0.5) * (T / samples)
        first, mirror = at(ts), at(T - ts)
        second, half = at(T + ts), at(0.5 * ts)
        res["duration == 2T"] = abs(total - 2 * T)
        res["delta(t) - delta(T-t)"] = gap(first["delta"], mirror["delta"])
        res["omega_x(t) - omega_x(T-t)"] = gap(first["omega_x"], mirror["omega_x"])
        res["delta(T+t) - delta(t/2)"] = gap(second["delta"], half["delta"])
        res["omega_x(T+t) + omega_x(t/2)"] = gap(second["omega_x"], -half["omega_x"])
    else:
        raise ValueError(f"no symmetry relations known for kind {kind!r}")
    return SymmetryReport(kind, max(res.values()), res, samples)
