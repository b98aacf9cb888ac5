"""How slow is slow enough?

Sweep the protocol half-duration T for the three ideal-model gates and
print the gate error. Run with ``python demos/gate_speed.py``.
"""
import numpy as np

from simgate.experiments import SweepSpec, preset, run_sweep

# The fig2 preset fixes Omega_m = 1, so T is in units of 1/Omega_m.
for gate in ("phase", "hadamard", "cnot"):
    over = {"gate.type": gate}
    if gate == "phase":
        over["gate.theta"] = np.pi / 2
    rows = run_sweep(SweepSpec("total_time", 10.0, 1000.0, 9, "log", preset("fig2", **over)))
    print(f"\n{gate}")
    print("      T      error")
    for r in rows:
        print(f"{r['x']:8.1f}   {r['error']:.2e}")

# The error falls by orders of magnitude over two decades of T, with
# oscillations at the scale of the level spacing on top of the trend.
