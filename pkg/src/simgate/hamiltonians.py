"""Qubit-level and lattice-level Hamiltonians.

Conventions
-----------
* Qubit basis ``|0> = (1, 0)``, ``|1> = (0, 1)``; ``|1>`` means one atom in
  ``b``.  ``sigma_z = |0><0| - |1><1|`` and ``sigma_+ = |0><1|``.
* On-site interactions: ``U_bb/2 b^dag b^dag b b``, ``U_aa/2 a^dag a^dag a a``
  and ``U_ab a^dag b^dag a b`` (no 1/2 on the cross term).
* The tilt uses 0-based site positions: ``sum_k k g (n_a,k + n_b,k)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping, Sequence

import numpy as np

from .fock import FockBasis, mode, normal_ordered, number_operator

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)

HERMITIAN_RTOL = 1e-12


class NearResonanceError(ArithmeticError):
    """Second-order elimination hit a vanishing energy denominator."""


@dataclass(frozen=True)
class LatticeParams:
    u_bb: float
    u_ab: float = 0.0
    u_aa: float = 0.0
    j_a: float = 0.0
    j_b: float = 0.0
    g: float = 0.0

    def __post_init__(self):
        for name in ("u_bb", "u_ab", "u_aa", "j_a", "j_b", "g"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.j_a < 0 or self.j_b < 0:
            raise ValueError("hopping amplitudes must be non-negative")


@dataclass(frozen=True)
class LaserControls:
    detuning: float = 0.0
    rabi: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        if self.rabi < 0:
            raise ValueError("Rabi amplitude must be non-negative")
        object.__setattr__(self, "phase", float(self.phase) % (2 * np.pi))


@dataclass(frozen=True)
class QubitControls:
    delta: float = 0.0
    omega: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        if self.omega < 0:
            raise ValueError("omega must be non-negative")


@dataclass(frozen=True)
class TwoQubitControls:
    delta_tilde: float = 0.0
    omega_x: float = 0.0


def ideal_h1(c: QubitControls) -> np.ndarray:
    """``(Delta/2) sigma_z + (Omega/2)(sigma_+ e^{i phi} + sigma_- e^{-i phi})``."""
    off = 0.5 * c.omega * np.exp(1j * c.phi)
    return np.array([[0.5 * c.delta, off], [np.conj(off), -0.5 * c.delta]], dtype=complex)


def ideal_h2(c: TwoQubitControls) -> np.ndarray:
    """Conditional shift on ``|11>`` plus an x drive on the target (second) qubit."""
    h = 0.5 * c.omega_x * np.kron(np.eye(2), SIGMA_X)
    h[3, 3] += c.delta_tilde
    return h


def delta_tilde(j_b: float, g: float, u_bb: float) -> float:
    """Conditional shift ``J_b**2 / (g - U_bb)`` from virtual b hopping."""
    if g == u_bb:
        raise ZeroDivisionError("resonant tilt g == U_bb: adiabatic elimination is invalid")
    return j_b**2 / (g - u_bb)


def hopping_for_shift(shift, g: float, u_bb: float):
    """Inverse of :func:`delta_tilde` for a fixed tilt, elementwise."""
    detuning = g - u_bb
    shift = np.asarray(shift, dtype=float)
    if detuning == 0:
        raise ZeroDivisionError("resonant tilt g == U_bb")
    ratio = shift * detuning
    if np.any(ratio < -1e-15):
        raise ValueError("requested shift has the wrong sign for this tilt")
    return np.sqrt(np.clip(ratio, 0.0, None))


def hermiticity_residual(h: np.ndarray) -> float:
    """``max|H - H^dag| / max|H|`` (0 for the zero matrix)."""
    scale = np.max(np.abs(h)) if h.size else 0.0
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(h - np.conj(np.swapaxes(h, -1, -2)))) / scale)


@dataclass(frozen=True)
class LatticeTerms:
    """Dense operator pieces of the lattice Hamiltonian on one basis.

    Every piece has unit coefficient; :meth:`assemble` combines them.
    """

    basis: FockBasis

    @cached_property
    def hop_a(self) -> np.ndarray:
        return self._hopping("a")

    @cached_property
    def hop_b(self) -> np.ndarray:
        return self._hopping("b")

    def _hopping(self, species: str) -> np.ndarray:
        out = np.zeros((self.basis.dim, self.basis.dim))
        for k in range(self.basis.sites - 1):
            forward = normal_ordered(self.basis, [mode(k + 1, species)], [mode(k, species)]).toarray()
            out -= forward + forward.T
        return out

    @cached_property
    def int_bb(self) -> np.ndarray:
        nb = self.basis.states[:, 1::2].astype(float)
        return 0.5 * np.sum(nb * (nb - 1), axis=1)

    @cached_property
    def int_aa(self) -> np.ndarray:
        na = self.basis.states[:, 0::2].astype(float)
        return 0.5 * np.sum(na * (na - 1), axis=1)

    @cached_property
    def int_ab(self) -> np.ndarray:
        s = self.basis.states.astype(float)
        return np.sum(s[:, 0::2] * s[:, 1::2], axis=1)

    @cached_property
    def tilt(self) -> np.ndarray:
        return self.basis.site_totals().astype(float) @ np.arange(self.basis.sites, dtype=float)

    def detuning(self, site: int) -> np.ndarray:
        """Diagonal of ``(a^dag a - b^dag b)/2`` on ``site``."""
        return 0.5 * (number_operator(self.basis, mode(site, "a"))
                      - number_operator(self.basis, mode(site, "b")))

    def flip(self, site: int) -> np.ndarray:
        """``a^dag b / 2`` on ``site``; the laser term is ``Omega e^{i phi} flip + h.c.``."""
        return 0.5 * normal_ordered(self.basis, [mode(site, "a")], [mode(site, "b")]).toarray()

    def diagonal(self, p: LatticeParams) -> np.ndarray:
        return p.u_bb * self.int_bb + p.u_aa * self.int_aa + p.u_ab * self.int_ab + p.g * self.tilt


def lattice_hamiltonian(basis: FockBasis, p: LatticeParams,
                        lasers: Mapping[int, LaserControls] | Sequence[LaserControls] | None = None,
                        laser_sites: Sequence[int] | None = None,
                        terms: LatticeTerms | None = None) -> np.ndarray:
    """Dense lattice Hamiltonian with hopping, interactions, tilt and lasers.

    ``lasers`` maps site -> :class:`LaserControls` (a sequence is read as one
    entry per site).  Only sites in ``laser_sites`` are driven; by default all
    sites with an entry.
    """
    if terms is None:
        terms = LatticeTerms(basis)
    elif terms.basis is not basis:
        raise ValueError("operator terms were built for a different basis")
    if lasers is None:
        lasers = {}
    elif not isinstance(lasers, Mapping):
        lasers = dict(enumerate(lasers))
    if laser_sites is None:
        laser_sites = sorted(lasers)
    h = np.diag(terms.diagonal(p)).astype(complex)
    h += p.j_a * terms.hop_a + p.j_b * terms.hop_b
    for site in laser_sites:
        if not 0 <= site < basis.sites:
            raise ValueError(f"laser site {site} outside lattice of {basis.sites} sites")
        c = lasers[site]
        h += np.diag(c.detuning * terms.detuning(site))
        f = c.rabi * np.exp(1j * c.phase) * terms.flip(site)
        h += f + f.conj().T
    return h


def effective_hamiltonian(h0: np.ndarray, v: np.ndarray, sector: Sequence[int],
                          eps_gap: float | None = None) -> np.ndarray:
    """Second-order quasi-degenerate reduction of ``h0 + v`` onto ``sector``.

    ``h0`` is diagonal (pass its diagonal or the matrix); ``v`` carries the
    couplings.  Removed states enter through symmetrized denominators::

        H_eff[p, p'] = (h0 + v)[p, p'] + 1/2 sum_q v[p, q] v[q, p']
                       * (1/(E_p - E_q) + 1/(E_p' - E_q))

    Leading batch axes are broadcast, so ``h0`` of shape ``(n, d)`` and ``v``
    of shape ``(n, d, d)`` give ``n`` effective matrices at once.

    Raises
    ------
    NearResonanceError
        If a coupled pair ``(p, q)`` has ``|E_p - E_q| < eps_gap``
        (default ``1e-6 * max|E|``).
    """
    v = np.asarray(v)
    h0 = np.asarray(h0)
    if h0.shape == v.shape:
        energies = np.diagonal(h0, axis1=-2, axis2=-1).real
        if np.max(np.abs(h0 - _diag_embed(np.diagonal(h0, axis1=-2, axis2=-1))), initial=0.0) > 0:
            raise ValueError("h0 must be diagonal")
    else:
        energies = h0.real
    d = v.shape[-1]
    P = np.asarray(sector, dtype=int)
    Q = np.setdiff1d(np.arange(d), P)
    E_P = energies[..., P]
    h_pp = v[..., P[:, None], P[None, :]] + _diag_embed(E_P)
    if Q.size == 0:
        return h_pp
    E_Q = energies[..., Q]
    v_pq = v[..., P[:, None], Q[None, :]]
    v_qp = v[..., Q[:, None], P[None, :]]
    gaps = E_P[..., :, None] - E_Q[..., None, :]
    if eps_gap is None:
        eps_gap = 1e-6 * np.max(np.abs(energies), initial=0.0)
    coupled = np.abs(v_pq) > 0
    if np.any(coupled & (np.abs(gaps) < eps_gap)):
        worst = np.min(np.abs(gaps[coupled]))
        raise NearResonanceError(
            f"energy denominator {worst:.3g} below threshold {eps_gap:.3g}"
        )
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(coupled, 1.0 / np.where(coupled, gaps, 1.0), 0.0)
    first = (v_pq * inv) @ v_qp
    second = v_pq @ (np.swapaxes(inv, -1, -2) * v_qp)
    return h_pp + 0.5 * (first + second)


def _diag_embed(x: np.ndarray) -> np.ndarray:
    out = np.zeros(x.shape + (x.shape[-1],), dtype=np.result_type(x, float))
    idx = np.arange(x.shape[-1])
    out[..., idx, idx] = x
    return out


# --- time-dependent drives -------------------------------------------------
#
# A drive maps times to Hamiltonians.  ``drive(t)`` gives one matrix,
# ``drive.stack(ts)`` an array of shape (len(ts), d, d).  Control functions
# return dicts of arrays sampled at ``ts``.

ControlFn = Callable[[np.ndarray], dict]


class _Drive:
    dim: int

    def __call__(self, t: float) -> np.ndarray:
        return self.stack(np.array([float(t)]))[0]

    def stack(self, ts: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError


class IdealQubitDrive(_Drive):
    """Single-qubit model driven by ``delta``, ``rabi`` and ``phase`` controls."""

    dim = 2

    def __init__(self, controls: ControlFn):
        self.controls = controls

    def stack(self, ts):
        c = self.controls(np.asarray(ts, dtype=float))
        delta, rabi, phase = (np.broadcast_to(c[k], np.shape(ts)) for k in ("delta", "rabi", "phase"))
        h = np.zeros((len(ts), 2, 2), dtype=complex)
        h[:, 0, 0] = 0.5 * delta
        h[:, 1, 1] = -0.5 * delta
        h[:, 0, 1] = 0.5 * rabi * np.exp(1j * phase)
        h[:, 1, 0] = np.conj(h[:, 0, 1])
        return h


class IdealTwoQubitDrive(_Drive):
    """Two-qubit model driven by ``delta_tilde`` and ``omega_x``."""

    dim = 4

    def __init__(self, controls: ControlFn):
        self.controls = controls

    def stack(self, ts):
        c = self.controls(np.asarray(ts, dtype=float))
        dt, ox = (np.broadcast_to(c[k], np.shape(ts)) for k in ("delta_tilde", "omega_x"))
        drive = 0.5 * np.kron(np.eye(2), SIGMA_X)
        h = ox[:, None, None] * drive[None]
        h[:, 3, 3] += dt
        return h


@dataclass
class LatticeDrive(_Drive):
    """Full lattice Hamiltonian with time-dependent hopping and lasers.

    ``controls(ts)`` returns ``j_a``, ``j_b`` and ``lasers``, the latter a
    mapping ``site -> {"delta", "rabi", "phase"}``.  Hopping amplitudes given
    in ``params`` are ignored.  The mean diagonal energy of ``sector`` is
    subtracted at every time, which only shifts the global phase.
    """

    basis: FockBasis
    params: LatticeParams
    controls: ControlFn
    sector: Sequence[int]
    terms: LatticeTerms = field(default=None)

    def __post_init__(self):
        if self.terms is None:
            self.terms = LatticeTerms(self.basis)
        self.dim = self.basis.dim
        self._static = self.terms.diagonal(self.params)
        self._sector = np.asarray(self.sector, dtype=int)

    def parts(self, ts):
        """Diagonal energies ``(n, d)`` and couplings ``(n, d, d)`` at ``ts``."""
        ts = np.asarray(ts, dtype=float)
        n = len(ts)
        c = self.controls(ts)
        diag = np.broadcast_to(self._static, (n, self.dim)).copy()
        v = np.zeros((n, self.dim, self.dim), dtype=complex)
        j_a = np.broadcast_to(c.get("j_a", 0.0), (n,))
        j_b = np.broadcast_to(c.get("j_b", 0.0), (n,))
        if np.any(j_a):
            v += j_a[:, None, None] * self.terms.hop_a
        if np.any(j_b):
            v += j_b[:, None, None] * self.terms.hop_b
        for site, laser in c.get("lasers", {}).items():
            delta = np.broadcast_to(laser.get("delta", 0.0), (n,))
            rabi = np.broadcast_to(laser.get("rabi", 0.0), (n,))
            phase = np.broadcast_to(laser.get("phase", 0.0), (n,))
            diag += delta[:, None] * self.terms.detuning(site)
            f = (rabi * np.exp(1j * phase))[:, None, None] * self.terms.flip(site)
            v += f + np.conj(np.swapaxes(f, -1, -2))
        diag -= diag[:, self._sector].mean(axis=1, keepdims=True)
        return diag, v

    def stack(self, ts):
        diag, v = self.parts(ts)
        idx = np.arange(self.dim)
        v[:, idx, idx] += diag
        return v


class EffectiveDrive(_Drive):
    """Second-order effective Hamiltonian of a :class:`LatticeDrive` on its sector.

    Matrices are expressed in sector order (``dim = len(sector)``).
    """

    def __init__(self, lattice: LatticeDrive, eps_gap: float | None = None):
        self.lattice = lattice
        self.eps_gap = eps_gap
        self.dim = len(lattice.sector)

    def stack(self, ts):
        diag, v = self.lattice.parts(ts)
        return effective_hamiltonian(diag, v, self.lattice.sector, self.eps_gap)
