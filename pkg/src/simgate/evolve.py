"""Time-ordered propagators and adiabatic-theorem predictions.

Drives are objects with ``stack(ts) -> (len(ts), d, d)`` (see
:mod:`simgate.hamiltonians`); plain callables ``t -> H`` are wrapped.
Propagation splits ``[0, T_total]`` at the supplied breakpoints and applies
one exact exponential per step: of ``H(t + dt/2)`` for the default midpoint
scheme, or a fourth-order Magnus pair.  Sample points never touch a
breakpoint, so sudden jumps placed at breakpoints contribute no evolution.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import simpson

from .hamiltonians import hermiticity_residual

HERMITIAN_TOL = 1e-10
_CHUNK_ELEMENTS = 2**22


class ConvergenceError(RuntimeError):
    """Step doubling did not reach the requested tolerance.

    Attributes ``u_coarse``, ``u_fine`` and ``distance`` hold the last pair of
    propagators that were compared.
    """

    def __init__(self, msg, u_coarse=None, u_fine=None, distance=None):
        super().__init__(msg)
        self.u_coarse = u_coarse
        self.u_fine = u_fine
        self.distance = distance


class TrackingError(RuntimeError):
    """Eigenstate tracking became ambiguous (levels merged inside the path)."""


class _Wrapped:
    def __init__(self, fn):
        self.fn = fn
        self.dim = np.asarray(fn(0.0)).shape[-1]

    def stack(self, ts):
        return np.array([self.fn(float(t)) for t in ts], dtype=complex)


def as_drive(h):
    """Return ``h`` if it has ``stack``, else wrap a ``t -> H`` callable."""
    return h if hasattr(h, "stack") else _Wrapped(h)


def _intervals(total_time: float, breakpoints) -> list[tuple[float, float]]:
    pts = [0.0, float(total_time)]
    if breakpoints is not None:
        pts += [float(b) for b in breakpoints if 0.0 < b < total_time]
    pts = np.unique(pts)
    return [(a, b) for a, b in zip(pts[:-1], pts[1:]) if b - a > 1e-14 * total_time]


def _chunks(n: int, dim: int):
    width = max(1, _CHUNK_ELEMENTS // (dim * dim))
    for start in range(0, n, width):
        yield start, min(n, start + width)


def ordered_product(mats: np.ndarray) -> np.ndarray:
    """Time-ordered product ``M[n-1] ... M[1] M[0]`` by pairwise reduction."""
    mats = np.asarray(mats)
    while mats.shape[0] > 1:
        if mats.shape[0] % 2:
            tail = mats[-1:]
            body = mats[:-1]
            mats = np.concatenate([body[1::2] @ body[0::2], tail])
        else:
            mats = mats[1::2] @ mats[0::2]
    return mats[0]


def _ordered_increment(xs: np.ndarray) -> np.ndarray:
    """``X`` with ``I + X = (I + X[n-1]) ... (I + X[0])``, reduced pairwise.

    Carrying the small increments instead of the near-identity factors keeps
    rounding proportional to ``|X|``, so it does not pile up with the step count.
    """
    xs = np.asarray(xs)
    while xs.shape[0] > 1:
        tail = xs[-1:] if xs.shape[0] % 2 else xs[:0]
        body = xs[: xs.shape[0] - len(tail)]
        early, late = body[0::2], body[1::2]
        xs = np.concatenate([early + late + late @ early, tail])
    return xs[0]


def _tracked_gaps(w: np.ndarray, v: np.ndarray, observe) -> np.ndarray:
    """Per-sample gap next to the tracked levels.

    With every state observed this is the smallest level spacing.  For a
    proper subset the tracked levels are the eigenvectors with the largest
    weight on ``observe`` and the gap separates them from the rest.
    """
    n, d = w.shape
    if d < 2:
        return np.full(n, np.inf)
    if observe is None or len(observe) == d:
        return np.min(np.diff(w, axis=1), axis=1)
    weight = np.sum(np.abs(v[:, observe, :]) ** 2, axis=1)
    tracked = np.zeros_like(weight, dtype=bool)
    np.put_along_axis(tracked, np.argsort(-weight, axis=1)[:, : len(observe)], True, axis=1)
    dist = np.abs(w[:, :, None] - w[:, None, :])
    return np.min(np.where(tracked[:, :, None] & ~tracked[:, None, :], dist, np.inf), axis=(1, 2))


# fourth-order commutator-free Magnus: two Gauss-Legendre nodes per step
_GL = (0.5 - np.sqrt(3) / 6, 0.5 + np.sqrt(3) / 6)
_CF = ((3 - 2 * np.sqrt(3)) / 12, (3 + 2 * np.sqrt(3)) / 12)
SCHEMES = ("midpoint", "magnus4")


def _exp_increments(h, dt):
    """``exp(-i h dt) - I`` for a stack of Hermitian ``h``, plus its eigensystem."""
    w, v = np.linalg.eigh(h)
    theta = w * dt
    em1 = -2.0 * np.sin(0.5 * theta) ** 2 - 1j * np.sin(theta)     # expm1(-i theta)
    return (v * em1[:, None, :]) @ np.conj(np.swapaxes(v, -1, -2)), w, v


def _check_hermitian(h):
    herm = hermiticity_residual(h)
    if herm > HERMITIAN_TOL:
        raise ValueError(f"Hamiltonian is not Hermitian (relative residual {herm:.2e})")


def _evolve_once(drive, intervals, steps: int, observe, scheme: str = "midpoint"):
    d = drive.dim
    u = np.eye(d, dtype=complex)
    min_gap = np.inf
    width = max(1, _CHUNK_ELEMENTS // (d * d))
    for a, b in intervals:
        dt = (b - a) / steps
        k = np.arange(steps)
        for lo in range(0, steps, width):
            kk = k[lo:lo + width]
            if scheme == "midpoint":
                h = drive.stack(a + (kk + 0.5) * dt)
                _check_hermitian(h)
                step_x, w, v = _exp_increments(h, dt)
            else:
                h1 = drive.stack(a + (kk + _GL[0]) * dt)
                h2 = drive.stack(a + (kk + _GL[1]) * dt)
                _check_hermitian(h1)
                _check_hermitian(h2)
                first, w, v = _exp_increments(_CF[1] * h1 + _CF[0] * h2, dt)
                second, _, _ = _exp_increments(_CF[0] * h1 + _CF[1] * h2, dt)
                step_x = first + second + second @ first
            min_gap = min(min_gap, float(np.min(_tracked_gaps(w, v, observe))))
            u = u + _ordered_increment(step_x) @ u
    return u, min_gap


@dataclass
class PropagatorResult:
    """Outcome of :func:`propagate`.

    ``distance_history`` lists the step-doubling distances, coarsest first;
    ``steps_history`` the matching per-segment step counts of the finer run.
    """

    U: np.ndarray
    unitarity_residual: float
    min_gap: float
    step_count: int
    converged: bool
    distance: float
    distance_history: list = field(default_factory=list)
    steps_history: list = field(default_factory=list)


def unitarity_residual(u: np.ndarray) -> float:
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


def propagate(h, total_time: float, steps: int = 64, breakpoints: Sequence[float] | None = None,
              tol: float = 1e-8, observe: Sequence[int] | None = None,
              max_steps: int = 2**17, check_convergence: bool = True,
              scheme: str = "midpoint") -> PropagatorResult:
    """Time-ordered propagator ``U(T_total, 0)`` of a drive.

    Parameters
    ----------
    h : drive or callable
        Hermitian Hamiltonian as a function of time.
    total_time : float
        End of the integration window.
    steps : int
        Initial number of midpoint steps per interval between breakpoints.
    breakpoints : sequence of float, optional
        Segment boundaries (sudden jumps must be among them).
    tol : float
        Max-norm tolerance between runs with ``n`` and ``2 n`` steps.
    observe : sequence of int, optional
        Basis indices whose block ``U[observe][:, observe]`` decides
        convergence and whose levels define ``min_gap``.  Default: all.
    max_steps : int
        Cap on steps per interval.
    check_convergence : bool
        If False, evaluate once with ``steps`` and report ``converged=False``.
    scheme : {"midpoint", "magnus4"}
        ``midpoint`` takes one exponential of ``H(t + dt/2)`` per step
        (second order).  ``magnus4`` is the fourth-order commutator-free
        Magnus product of two exponentials built from ``H`` at the two
        Gauss-Legendre nodes; every step is still exactly unitary.

    Raises
    ------
    ConvergenceError
        If the distance stays above ``tol`` at the step cap.
    ValueError
        For non-Hermitian input or bad arguments.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if total_time < 0:
        raise ValueError("total_time must be non-negative")
    drive = as_drive(h)
    d = drive.dim
    if total_time == 0:
        eye = np.eye(d, dtype=complex)
        return PropagatorResult(eye, 0.0, np.inf, 0, True, 0.0)
    intervals = _intervals(total_time, breakpoints)
    obs = None if observe is None else np.asarray(observe, dtype=int)
    u, gap = _evolve_once(drive, intervals, steps, obs, scheme)
    if not check_convergence:
        return PropagatorResult(u, unitarity_residual(u), gap, steps * len(intervals), False, np.nan)

    block = (lambda m: m) if obs is None else (lambda m: m[np.ix_(obs, obs)])
    history, counts = [], []
    n = steps
    while True:
        if 2 * n > max_steps:
            prev = history[-1] if history else np.nan
            raise ConvergenceError(
                f"no convergence to {tol:g} with {n} steps per interval (distance {prev:.3g})",
                u_coarse=u_prev if history else None, u_fine=u, distance=prev,
            )
        u_prev = u
        n *= 2
        u, gap = _evolve_once(drive, intervals, n, obs, scheme)
        dist = float(np.max(np.abs(block(u) - block(u_prev))))
        history.append(dist)
        counts.append(n)
        if dist <= tol:
            return PropagatorResult(u, unitarity_residual(u), gap, n * len(intervals), True,
                                    dist, history, counts)


def leakage(U: np.ndarray, sector: Sequence[int]) -> float:
    """Largest probability for a sector state to end up outside the sector."""
    s = np.asarray(sector, dtype=int)
    kept = np.sum(np.abs(U[np.ix_(s, s)]) ** 2, axis=0)
    return float(np.clip(np.max(1.0 - kept), 0.0, 1.0))


# --- adiabatic transport ---------------------------------------------------

@dataclass
class TransportResult:
    """Adiabatic prediction for a set of tracked eigenstates.

    Attributes
    ----------
    dynamical : ndarray
        ``-int E_alpha dt`` per tracked state.
    geometric : ndarray
        Berry phase relative to the final reference gauge.
    initial, final : ndarray, shape (d, k)
        Eigenvectors at the start and the reference eigenvectors at the end.
    unitary : ndarray, shape (d, d)
        ``sum_alpha exp(i(phi + psi)) |final_alpha><initial_alpha|``.
    """

    dynamical: np.ndarray
    geometric: np.ndarray
    initial: np.ndarray
    final: np.ndarray
    unitary: np.ndarray
    samples: int


def _clusters(w: np.ndarray, eps: float) -> list[np.ndarray]:
    groups, cur = [], [0]
    for k in range(1, len(w)):
        if w[k] - w[k - 1] <= eps:
            cur.append(k)
        else:
            groups.append(np.array(cur))
            cur = [k]
    groups.append(np.array(cur))
    return groups


def _polar(m: np.ndarray) -> np.ndarray:
    """Closest matrix with orthonormal columns (unitary polar factor)."""
    x, _, yh = np.linalg.svd(m, full_matrices=False)
    return x @ yh


def _canonical(vecs: np.ndarray) -> np.ndarray:
    """Gauge with the largest component of each column real positive."""
    idx = np.argmax(np.abs(vecs), axis=0)
    ph = vecs[idx, np.arange(vecs.shape[1])]
    return vecs * (np.abs(ph) / ph)[None, :]


def _transport_step(frame, w, v, eps, interior, prev_cluster_of):
    """Carry ``frame`` (d, k) into the eigenbasis ``(w, v)`` by cluster projection."""
    groups = _clusters(w, eps)
    k = frame.shape[1]
    weights = np.array([np.sum(np.abs(v[:, g].conj().T @ frame) ** 2, axis=0) for g in groups])
    owner = np.argmax(weights, axis=0)
    if interior and np.any(weights[owner, np.arange(k)] < 0.5):
        raise TrackingError("tracked state split between separated levels")
    new = np.empty_like(frame)
    energy = np.empty(k)
    cluster_of = np.empty(k, dtype=int)
    for gi, g in enumerate(groups):
        members = np.flatnonzero(owner == gi)
        if members.size == 0:
            continue
        if members.size > len(g):
            raise TrackingError("more tracked states than available levels in a cluster")
        if interior and prev_cluster_of is not None and len(set(prev_cluster_of[members])) > 1:
            raise TrackingError("tracked levels merged inside the path (gap collapse)")
        basis = v[:, g]
        new[:, members] = basis @ _polar(basis.conj().T @ frame[:, members])
        energy[members] = w[g].mean()
        cluster_of[members] = gi
    return new, energy, cluster_of


def _directional_frame(drive, ts, sector, eps_rel):
    """Initial eigenvectors, splitting degenerate levels along the path."""
    h_all = drive.stack(ts[: min(len(ts), 8)])
    w, v = np.linalg.eigh(h_all[0])
    scale = max(np.max(np.abs(np.linalg.eigvalsh(h_all))), 1e-300)
    eps = eps_rel * scale
    vecs = v.copy()
    for g in _clusters(w, eps):
        if len(g) == 1:
            continue
        sub = v[:, g]
        for h in h_all[1:]:
            ws, vs = np.linalg.eigh(sub.conj().T @ h @ sub)
            sub = sub @ vs
            if np.all(np.diff(ws) > eps):
                break
        vecs[:, g] = sub
    vecs = _canonical(vecs)
    d = v.shape[0]
    chosen = []
    free = list(range(d))
    for s in sector:
        amp = np.abs(vecs[s, free])
        j = free[int(np.argmax(amp))]
        chosen.append(j)
        free.remove(j)
    return vecs[:, chosen]


def adiabatic_transport(h, total_time: float, sector: Sequence[int] | None = None,
                        breakpoints: Sequence[float] | None = None, samples: int = 2048,
                        eps_track: float = 1e-8) -> TransportResult:
    """Adiabatic-theorem unitary built from tracked eigenstates.

    Each interval between breakpoints is sampled at ``samples + 1`` points.
    Interval ends are nudged inward by a relative ``1e-12`` so that the two
    sides of a sudden jump are both seen.  Degenerate levels at the first
    sample are resolved by the Hamiltonian further along the path; inside
    the path, each tracked vector is projected onto the eigenspace it
    follows and re-orthonormalized (parallel transport).

    Raises
    ------
    TrackingError
        If tracked levels merge or a tracked state splits at an interior
        sample, i.e. the gap closed below ``eps_track * ||H||``.
    """
    drive = as_drive(h)
    d = drive.dim
    sector = list(range(d)) if sector is None else list(sector)
    k = len(sector)
    intervals = _intervals(total_time, breakpoints)
    frame = None
    cluster_of = None
    dyn = np.zeros(k)
    scale = 0.0
    for a, b in intervals:
        nudge = 1e-12 * (b - a)
        ts = np.linspace(a + nudge, b - nudge, samples + 1)
        if frame is None:
            frame = _directional_frame(drive, ts, sector, eps_track)
            initial = frame.copy()
        energies = np.empty((samples + 1, k))
        for lo, hi in _chunks(samples + 1, d):
            hs = drive.stack(ts[lo:hi])
            w_all, v_all = np.linalg.eigh(hs)
            scale = max(scale, float(np.max(np.abs(w_all))))
            for j in range(hi - lo):
                idx = lo + j
                interior = 0 < idx < samples
                frame, energies[idx], cluster_of = _transport_step(
                    frame, w_all[j], v_all[j], eps_track * max(scale, 1e-300),
                    interior, cluster_of if interior else None)
        dyn -= simpson(energies, x=ts, axis=0)
    # reference gauge at the end: the initial vectors for closed loops
    closes = np.abs(np.sum(initial.conj() * frame, axis=0)) > 1 - 1e-6
    ref = np.where(closes[None, :], initial, _canonical(frame.copy()))
    geo = np.angle(np.sum(ref.conj() * frame, axis=0))
    ref = _polar(ref)  # guards against drift in the canonical choice
    unitary = (ref * np.exp(1j * (dyn + geo))[None, :]) @ initial.conj().T
    return TransportResult(dyn, geo, initial, ref, unitary, samples)


# --- spectral diagnostics --------------------------------------------------

@dataclass
class GapProfile:
    """Instantaneous spectrum along a path.

    ``gap`` is the tracked gap (see :func:`gap_profile`); ``overlap`` is the
    smallest ``|<v_k(t_j)|v_k(t_{j+1})>|`` over energy-ordered levels and
    drops at sudden jumps.
    """

    times: np.ndarray
    eigenvalues: np.ndarray
    gap: np.ndarray
    overlap: np.ndarray


def gap_profile(h, total_time: float, sector: Sequence[int] | None = None,
                samples: int = 256, breakpoints: Sequence[float] | None = None,
                ts: np.ndarray | None = None) -> GapProfile:
    """Spectral gap next to the tracked levels at sample times.

    With ``sector`` covering only part of the space, the tracked levels are
    the eigenvectors with the largest weight on ``sector`` and the gap is the
    smallest distance between a tracked and an untracked level.  Otherwise
    the gap is the smallest spacing of the whole spectrum.
    """
    drive = as_drive(h)
    d = drive.dim
    if ts is None:
        ts = []
        for a, b in _intervals(total_time, breakpoints):
            nudge = 1e-12 * (b - a)
            ts.append(np.linspace(a + nudge, b - nudge, samples + 1))
        ts = np.concatenate(ts) if ts else np.zeros(1)
    ts = np.asarray(ts, dtype=float)
    w_all = np.empty((len(ts), d))
    gaps = np.empty(len(ts))
    overlap = np.ones(len(ts))
    prev_v = None
    partial = sector is not None and len(sector) < d
    s = None if sector is None else np.asarray(sector, dtype=int)
    for lo, hi in _chunks(len(ts), d):
        w, v = np.linalg.eigh(drive.stack(ts[lo:hi]))
        w_all[lo:hi] = w
        if d < 2:
            gaps[lo:hi] = 0.0
        elif partial:
            gaps[lo:hi] = _tracked_gaps(w, v, s)
        else:
            gaps[lo:hi] = np.min(np.diff(w, axis=1), axis=1)
        vv = np.concatenate([prev_v[None], v]) if prev_v is not None else v
        ov = np.min(np.abs(np.sum(vv[:-1].conj() * vv[1:], axis=1)), axis=1)
        overlap[lo + (0 if prev_v is not None else 1):hi] = ov
        prev_v = v[-1]
    return GapProfile(ts, w_all, gaps, overlap)
