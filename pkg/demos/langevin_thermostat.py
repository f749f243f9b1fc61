"""Langevin dynamics samples the Gibbs law exp(-(p^2/2 + V)/T).

With the noise amplitude paired to the friction (Einstein relation) the
second moments sit at T; halving the diffusion cools the particle to T/2.

Run: python3 demos/langevin_thermostat.py
"""

import numpy as np

from qcmd_langevin.bath import HeavyModel
from qcmd_langevin.langevin import (FrictionModel, LangevinState, integrate_langevin,
                                    invariant_measure_check, ou_covariance_exact)

T = 0.5
well = HeavyModel.harmonic(1.0, 1)
start = LangevinState(0.0, np.zeros((500, 1)), np.zeros((500, 1)))
for factor in (1.0, 0.5):
    fr = FrictionModel.constant(1.0, T, diffusion_factor=factor)
    rec = integrate_langevin(start, 0.02, 5000, fr, well, np.random.default_rng(0), stride=10)
    X = rec.X[50:].reshape(-1, 1)
    p = rec.p[50:].reshape(-1, 1)
    rep = invariant_measure_check(X, p, well, T)
    print(f"diffusion factor {factor}: <X^2> = {np.mean(X**2):.4f}, <p^2> = {np.mean(p**2):.4f}"
          f"  -> {rep.status}")

# free particle: the momentum is an Ornstein-Uhlenbeck process with a closed form
fr = FrictionModel.constant(1.0, T)
rng = np.random.default_rng(1)
rec = integrate_langevin(LangevinState(0.0, np.zeros((10000, 1)), rng.standard_normal((10000, 1))),
                         0.05, 20, fr, HeavyModel("free", 1), rng)
emp = np.mean(rec.p[-1, :, 0] ** 2)
print(f"E[p(1)^2]: ensemble {emp:.4f}, closed form {ou_covariance_exact(1.0, T, 1.0, 1.0, 1.0, 1.0, 'gibbs')[0, 0]:.4f}")
