"""Adiabatic-passage gates for two-species bosons in optical lattices.

Three model tiers share one set of protocols: ideal qubit Hamiltonians, a
second-order effective Hamiltonian on the computation sector, and exact
two-species Fock-space dynamics.
"""
from .fock import FockBasis, SectorSpec, build_basis, ladder_matrix, sector_indices
from .gates import compose_cnot, gate_fidelity, sector_fidelity, target
from .evolve import adiabatic_transport, gap_profile, leakage, propagate
from .hamiltonians import (LaserControls, LatticeParams, QubitControls, TwoQubitControls,
                           delta_tilde, effective_hamiltonian, ideal_h1, ideal_h2,
                           lattice_hamiltonian)
from .schedule import (CalibrationMap, ProtocolConfig, Schedule, Segment, protocol_cnot_u1,
                       protocol_cnot_u3, protocol_hadamard, protocol_phase, validate_symmetry)

__version__ = "0.1.0"
