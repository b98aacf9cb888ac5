"""Geometric phase of a spin dragged around a cone.

A two-level Hamiltonian whose field direction circles a cone of half-angle
alpha returns to itself, and each level picks up a Berry phase of half the
enclosed solid angle, 2*pi*(1 - cos alpha)/2, on top of the dynamical phase.
"""
import numpy as np

from simgate.evolve import adiabatic_transport, propagate
from simgate.gates import gate_fidelity
from simgate.hamiltonians import IdealQubitDrive


def cone(alpha, period=1.0):
    def controls(ts):
        n = len(ts)
        return {"delta": np.full(n, np.cos(alpha)), "rabi": np.full(n, np.sin(alpha)),
                "phase": 2 * np.pi * ts / period}
    return IdealQubitDrive(controls)


print(" alpha   |psi|      half solid angle")
for alpha in np.linspace(0.2, np.pi / 2, 5):
    tr = adiabatic_transport(cone(alpha), 1.0, samples=1024)
    print(f"{alpha:6.3f}   {abs(tr.geometric[0]):.6f}   {np.pi * (1 - np.cos(alpha)):.6f}")

# Slow the loop down and the full propagator converges to the transported one.
print("\n    T     1 - F(transport, propagate)")
for T in (10.0, 100.0, 1000.0):
    d = cone(0.8, period=T)
    u = propagate(d, T, scheme="magnus4").U
    tr = adiabatic_transport(d, T)
    print(f"{T:6.0f}   {1 - gate_fidelity(tr.unitary, u):.2e}")
