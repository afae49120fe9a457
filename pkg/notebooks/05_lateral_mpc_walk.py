"""Sagittal + lateral walking with adapted step timing.

The sagittal controller decides when each step ends; the lateral MPC
places the CoP inside the current foot and plans the next footholds
from the residual step time. Compares against fixed timing.
"""
import numpy as np

from hybrid_lipm import ControllerConfig, SynthesisProblem, complete_params, synthesize
from hybrid_lipm.lateral_mpc import MpcConfig, Stance
from hybrid_lipm.walk import run_fixed_timing, run_walk

p = complete_params(np.sqrt(9.81 / 0.58), r_bar=0.1, T=1.2, u_bar=0.075)
cert = synthesize(SynthesisProblem(p, alpha=4.2))
ctl = ControllerConfig.from_certificate(cert, p.u_bar)
mpc = MpcConfig()

x0, y0 = (0.06, 0.08), (-0.08, 0.05)
res = run_walk(p, ctl, mpc, x0, y0, tau0=p.T / 2, stance=Stance.RIGHT, n_steps=4,
               lyap=(cert.P, cert.alpha))
print("adaptive timing:", res.status)
for k, v in res.summary.items():
    print(f"  {k}: {v}")

lat = res.lateral
print("\nlateral CoM and CoP, every 0.3 s (samples are 1 ms apart)")
for k in range(0, len(lat["t"]), 300):
    print(f"  t={lat['t'][k]:5.2f}  y_p={lat['y_p'][k]:+.4f}  u_y={lat['u_y'][k]:+.4f}")

base = run_fixed_timing(p, mpc, x0, y0, tau0=p.T / 2, stance=Stance.RIGHT, n_steps=4)
print("\nfixed timing:", base.status, base.summary.get("step_durations"))
