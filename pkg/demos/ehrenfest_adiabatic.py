"""Ehrenfest dynamics on a four-level model and its Born-Oppenheimer limit.

Starting in the ground state, the wave stays close to the instantaneous
ground state; the leftover shrinks as the mass ratio grows. The friction a
heavy particle would feel comes from the electron spectrum near the ground
level.

Run: python3 demos/ehrenfest_adiabatic.py
"""

import numpy as np

from qcmd_langevin.bath import scaled_bath
from qcmd_langevin.ehrenfest import RotatedSpectrumFamily, default_model, friction_matrix
from qcmd_langevin.harness import adiabatic_sweep

model = default_model()
rep = adiabatic_sweep(model, [1e3, 1e4, 1e5], [-1.0], [1.0], 2e-4, 1.0)
for row in rep.summary["rows"]:
    print(f"M = {row['M']:.0e}: max distance from the ground state {row['max_remainder']:.2e}")

# an electron model built from a bath reproduces that bath's friction
M = 1e4
bath = scaled_bath(M, 2.0, 2.0, 400, "flat")
est = friction_matrix(RotatedSpectrumFamily.from_bath(bath, M), np.zeros(1))
print(f"friction from the electron spectrum: {est.K[0, 0]:.4f} (bath value 2.0); "
      f"time integral {est.time[0, 0]:.4f}, running average {est.cesaro[0, 0]:.4f}")
