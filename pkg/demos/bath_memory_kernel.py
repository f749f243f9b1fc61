"""A Debye heat bath: its memory kernel, the point-mass limit and the noise it generates.

Run: python3 demos/bath_memory_kernel.py
"""

import numpy as np

from qcmd_langevin.bath import (build_debye_bath, friction_limit_debye, memory_kernel_debye,
                                memory_kernel_spectral)
from qcmd_langevin.harness import fdt_check

cutoff, kappa, T = 10.0, 1.0, 0.5

# A finite bath samples the Debye frequency density. As J grows, its cosine
# sum approaches the closed-form kernel sin(cutoff tau) / tau.
tau = np.linspace(0.0, 10.0, 2001)
exact = memory_kernel_debye(kappa, 1.0, cutoff, tau)
for J in (100, 1000, 10000):
    bath = build_debye_bath(J, cutoff, kappa)
    gap = np.max(np.abs(memory_kernel_spectral(bath, tau) - exact))
    print(f"J = {J:>5}: sup |kernel - Debye limit| on [0, 10] = {gap:.2e}")

# The area under the kernel is the friction a heavy particle feels when the
# bath is much faster than it.
print(f"point-mass friction pi m kappa / (2 cutoff^3) = {friction_limit_debye(kappa, 1.0, cutoff)[0, 0]:.6f}")

# Gibbs-distributed bath waves produce a force whose covariance is 2T times
# the kernel (fluctuation-dissipation).
rep = fdt_check(build_debye_bath(1000, cutoff, kappa), T, np.linspace(0, 1, 6), 20000, seed=1)
for lag, emp, tgt in zip(rep.summary["lags"], rep.summary["empirical"], rep.summary["target"]):
    print(f"lag {lag:.1f}: empirical {emp:+.5f}   2T f(lag) {tgt:+.5f}")
print("FDT check:", rep.status)
