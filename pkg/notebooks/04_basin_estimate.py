"""Grid estimate of the basin of attraction around the reference.

Each initial error on a grid is simulated with the vectorized engine and
classified: inside the certified ellipsoid, Lyapunov-decreasing along the
whole run, converging. The three sets should nest.
"""
import time

import numpy as np

from hybrid_lipm import ControllerConfig, SynthesisProblem, complete_params, synthesize
from hybrid_lipm.basin import BasinGridSpec, estimate_basin

p = complete_params(np.sqrt(9.81 / 0.58), r_bar=0.15, T=1.2, u_bar=0.075)
cert = synthesize(SynthesisProblem(p, alpha=4.2))
ctl = ControllerConfig.from_certificate(cert, p.u_bar)

t0 = time.perf_counter()
grid = estimate_basin(p, ctl, cert, BasinGridSpec(n_p=61, n_v=61))
print(f"61 x 61 grid in {time.perf_counter() - t0:.1f} s")
for k, v in grid.nesting_report().items():
    print(f"  {k:<26} {v}")

# character map: '#' ellipsoid, '+' Lyapunov-decreasing, '.' converging
rows = []
for i in range(grid.converging.shape[0] - 1, -1, -3):
    line = ""
    for j in range(0, grid.converging.shape[1], 2):
        line += ("#" if grid.in_ellipsoid[i, j] else "+" if grid.lyap_decreasing[i, j]
                 else "." if grid.converging[i, j] else " ")
    rows.append(f"{grid.eps_v[i]:+5.2f} |{line}|")
print("\n".join(rows))
