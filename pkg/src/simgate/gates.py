"""Target unitaries, phase-insensitive fidelities and the CNOT composite."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fock import FockBasis, SectorSpec, sector_indices
from .evolve import leakage

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
IDLE_TOL = 1e-6


@dataclass(frozen=True)
class GateTarget:
    name: str
    matrix: np.ndarray
    qubits: int

    def __post_init__(self):
        m = self.matrix
        if m.shape != (2**self.qubits, 2**self.qubits):
            raise ValueError("matrix shape does not match qubit count")
        if np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))) > 1e-12:
            raise ValueError(f"target {self.name!r} is not unitary")


def target(name: str, theta: float | None = None) -> GateTarget:
    """Ideal gate matrix.

    ``hadamard`` is ``[[1, 1], [-1, 1]] / sqrt2``, which sends
    ``(|0> + |1>)/sqrt2`` to ``|0>`` and ``(|0> - |1>)/sqrt2`` to ``-|1>``.
    ``cnot`` applies ``i sigma_y`` to the second qubit when the first is 1, and
    ``not`` is ``sigma_x`` on the first of two qubits.
    """
    if name == "phase":
        if theta is None:
            raise ValueError("phase target needs theta")
        return GateTarget(name, np.diag([np.exp(0.5j * theta), np.exp(-0.5j * theta)]), 1)
    if theta is not None:
        raise ValueError(f"theta only applies to the phase gate, not {name!r}")
    if name == "hadamard":
        return GateTarget(name, np.array([[1, 1], [-1, 1]], dtype=complex) / np.sqrt(2), 1)
    if name == "cnot":
        m = np.zeros((4, 4), dtype=complex)
        m[:2, :2] = I2
        m[2:, 2:] = [[0, 1], [-1, 0]]
        return GateTarget(name, m, 2)
    if name == "not":
        return GateTarget(name, np.kron(X, I2), 2)
    raise ValueError(f"unknown gate {name!r}")


def gate_fidelity(u_ideal: np.ndarray, u_real: np.ndarray) -> float:
    """``|Tr(U_ideal^dag U_real)|**2 / D**2`` with ``D`` the dimension."""
    u_ideal = np.asarray(u_ideal)
    u_real = np.asarray(u_real)
    if u_ideal.shape != u_real.shape or u_ideal.shape[0] != u_ideal.shape[1]:
        raise ValueError(f"dimension mismatch: {u_ideal.shape} vs {u_real.shape}")
    d = u_ideal.shape[0]
    return float(min(1.0, abs(np.vdot(u_ideal, u_real)) ** 2 / d**2))


def global_phase(u_ideal: np.ndarray, u_real: np.ndarray) -> float:
    """``arg Tr(U_ideal^dag U_real)``."""
    return float(np.angle(np.vdot(u_ideal, u_real)))


def embed(gate: np.ndarray, gate_sites: Sequence[int], sites: int) -> np.ndarray:
    """Place ``gate`` on ``gate_sites`` of a ``sites``-qubit register, identity elsewhere.

    Qubit 0 is the most significant bit, matching :class:`SectorSpec` labels.
    """
    gate_sites = list(gate_sites)
    g = len(gate_sites)
    if gate.shape != (2**g, 2**g):
        raise ValueError("gate size does not match the number of gate sites")
    if len(set(gate_sites)) != g or not all(0 <= s < sites for s in gate_sites):
        raise ValueError(f"invalid gate sites {gate_sites} for {sites} qubits")
    idle = [s for s in range(sites) if s not in gate_sites]
    full = np.kron(gate, np.eye(2 ** len(idle)))
    order = gate_sites + idle                   # qubit held by each tensor axis
    perm = np.argsort(order)
    t = full.reshape([2] * (2 * sites))
    t = t.transpose(list(perm) + [sites + p for p in perm])
    return t.reshape(2**sites, 2**sites)


def reduce_to_gate(u: np.ndarray, gate_sites: Sequence[int], sites: int) -> tuple[np.ndarray, float]:
    """Partial trace over idle qubits and the max deviation from ``W (x) I``."""
    gate_sites = list(gate_sites)
    idle = [s for s in range(sites) if s not in gate_sites]
    order = gate_sites + idle
    t = u.reshape([2] * (2 * sites)).transpose(order + [sites + s for s in order])
    g, r = 2 ** len(gate_sites), 2 ** len(idle)
    m = t.reshape(g, r, g, r)
    w = np.einsum("aibi->ab", m) / r
    deviation = float(np.max(np.abs(u - embed(w, gate_sites, sites)))) if idle else 0.0
    return w, deviation


@dataclass(frozen=True)
class SectorResult:
    occupations: tuple[int, ...]
    fidelity: float
    phase: float
    leakage: float
    idle_deviation: float

    @property
    def error(self) -> float:
        return 1.0 - self.fidelity

    @property
    def idle_trivial(self) -> bool:
        return self.idle_deviation <= IDLE_TOL


def sector_fidelity(u_full: np.ndarray, gate: GateTarget, basis: FockBasis,
                    spec: SectorSpec, gate_sites: Sequence[int]) -> SectorResult:
    """Fidelity of the restriction of ``u_full`` to one computation sector."""
    idx = sector_indices(basis, spec)
    if u_full.shape != (basis.dim, basis.dim):
        raise ValueError("unitary does not act on the given basis")
    u_s = u_full[np.ix_(idx, idx)]
    ideal = embed(gate.matrix, gate_sites, spec.sites)
    _, deviation = reduce_to_gate(u_s, gate_sites, spec.sites)
    return SectorResult(spec.occupations, gate_fidelity(ideal, u_s),
                        global_phase(ideal, u_s), leakage(u_full, idx), deviation)


def simulated_not(phase_pi: np.ndarray, hadamard: np.ndarray) -> np.ndarray:
    """Single-qubit NOT (up to phase) as ``P(pi) H H``.

    With the Hadamard-type target ``H**2 = i sigma_y`` and
    ``P(pi) = i sigma_z``, the product is ``i sigma_x``.
    """
    return phase_pi @ hadamard @ hadamard


def echoed_u3(first_half: np.ndarray, second_half: np.ndarray, target_not: np.ndarray = X) -> np.ndarray:
    """``(I (x) X) B (I (x) X) A``: the shift-only process with a target echo.

    For a mirror-symmetric shift trace this equals
    ``(|0><0| + e^{i xi} |1><1|) (x) I`` whatever the shift amplitude.
    """
    ix = np.kron(I2, target_not)
    return ix @ second_half @ ix @ first_half


def compose_cnot(u1: np.ndarray, u3: np.ndarray, u2_mode: str = "ideal",
                 u2: np.ndarray | None = None) -> np.ndarray:
    """``U2 U3 U2 U1`` with ``U2`` a NOT on the control qubit.

    ``u2_mode='ideal'`` uses ``sigma_x (x) I``; ``'simulated'`` expects the
    single-qubit NOT (e.g. from :func:`simulated_not`) in ``u2``.
    """
    if u1.shape != (4, 4) or u3.shape != (4, 4):
        raise ValueError("u1 and u3 must be 4x4")
    if u2_mode == "ideal":
        not2 = np.kron(X, I2)
    elif u2_mode == "simulated":
        if u2 is None:
            raise ValueError("simulated mode needs the single-qubit NOT in u2")
        not2 = np.kron(u2, I2) if u2.shape == (2, 2) else u2
    else:
        raise ValueError(f"unknown u2_mode {u2_mode!r}")
    return not2 @ u3 @ not2 @ u1
