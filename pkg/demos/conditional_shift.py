"""Where the CNOT's conditional phase comes from.

With a tilt g close to U_bb, a b atom can virtually hop onto a site that
already holds a b atom. Only |11> has that channel, so it picks up an
energy shift the other three states do not: the two-qubit interaction.
"""
import numpy as np

from simgate.experiments import SweepSpec, preset, run_sweep
from simgate.fock import SectorSpec, build_basis, sector_indices
from simgate.hamiltonians import LatticeParams, delta_tilde, lattice_hamiltonian

basis = build_basis(2, 2)
idx = sector_indices(basis, SectorSpec((1, 1)))
u_bb, g = 1.0, 1.5
h0 = np.real(np.diag(lattice_hamiltonian(basis, LatticeParams(u_bb=u_bb, g=g))))

print("  J_b     exact shift   2J^2/(g-U) - 2J^2/(g+U)   J^2/(g-U)")
for j in (0.005, 0.01, 0.02, 0.05):
    w, v = np.linalg.eigh(lattice_hamiltonian(basis, LatticeParams(u_bb=u_bb, j_b=j, g=g)))
    e = [w[np.argmax(np.abs(v[k]))] - h0[k] for k in idx]
    exact = e[3] - e[2] - e[1] + e[0]
    full = 2 * j**2 / (g - u_bb) - 2 * j**2 / (g + u_bb)
    print(f"{j:6.3f}   {exact:.4e}    {full:.4e}               {delta_tilde(j, g, u_bb):.4e}")

# The b-b hop carries a bosonic factor sqrt(2), doubling the resonant term.

print("\nCNOT error vs occupation imbalance (effective model)")
for T in (600.0, 2400.0):
    cfg = preset("fig3-cnot", **{"schedule.total_time": T})
    rows = run_sweep(SweepSpec("occupation_imbalance", 0, 2, 3, "linear", cfg))
    print(f"  T = {T:6.0f}: " + "  ".join(f"d={int(r['x'])}: {r['error']:.1e}" for r in rows))
