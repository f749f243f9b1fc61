"""Heat bath versus Langevin: the weak error closes as the mass ratio grows.

Both dynamics are driven by the same Brownian path, so their difference is
measured with far less noise than two independent ensembles would give.

Run: python3 demos/weak_error_in_mass_ratio.py   (about a minute)
"""

from qcmd_langevin.harness import CoupledBathLangevin, convergence_sweep

exp = CoupledBathLangevin()
rep = convergence_sweep([1e2, 1e3, 1e4], lambda M: exp.weak_error(M, 4000, seed=1))
for row in rep.rows():
    flag = "  (CI wider than the estimate)" if row["inconclusive"] else ""
    print(f"M = {row['M']:.0e}: |E g_bath - E g_langevin| = {row['error']:.2e} "
          f"+- {row['ci_halfwidth']:.1e}{flag}")
print(f"log-log slope {rep.fit.slope:.2f} +- {rep.fit.slope_stderr:.2f}; status {rep.status}")
