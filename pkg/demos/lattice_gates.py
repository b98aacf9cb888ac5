"""Local gates on a two-site, two-species lattice.

The exact model keeps every Fock state with the right per-site atom number,
including the doubly excited ones that the ideal qubit picture leaves out.
Their energy U_bb protects the gate, so the error drops as U_bb grows.
"""
import numpy as np

from simgate.experiments import SweepSpec, preset, run_gate, run_sweep
from simgate.gates import gate_fidelity

base = preset("fig3-local")     # phase gate, theta = pi/2, energies in Omega_m

print("error vs U_bb (n = (3, 1))")
spec = SweepSpec("u_bb", 10.0, 1e4, 7, "log", base.replace(**{"lattice.occupations": [[3, 1]]}))
for r in run_sweep(spec):
    print(f"  U_bb = {r['x']:8.1f}   error {r['error']:.2e}   leakage {r['leakage']:.2e}")

# More atoms on the gate site means more ways to put two b atoms together.
print("\nerror vs atoms per well at U_bb = 100")
for n in (1, 2, 3):
    rep = run_gate(base.replace(**{"lattice.occupations": [[n, 1]]}))
    s = rep.sectors[0]
    print(f"  n = {n}: error {s['error']:.2e}, sector phase {s['phase']:+.3f}")

# The second-order effective Hamiltonian should reproduce the exact sector dynamics.
cfg = base.replace(**{"params.u_bb": 1000.0, "lattice.occupations": [[2, 1]]})
u_exact = run_gate(cfg, keep_unitary=True).unitary
u_eff = run_gate(cfg.replace(model="effective"), keep_unitary=True).unitary
print(f"\neffective vs exact at U_bb = 1000: 1 - F = {1 - gate_fidelity(u_exact, u_eff):.1e}")
