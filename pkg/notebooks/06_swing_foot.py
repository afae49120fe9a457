"""Swing-foot references with a moving touchdown time.

Fits the quintic/sextic swing polynomials once, then replays them with a
time scaling that follows the predicted residual step time.
"""
import numpy as np

from hybrid_lipm.swing import SwingSpec, fit, scaled_eval, time_scale

T = 1.2
spec = SwingSpec(p_init=(-0.1, 0.192, 0.0), p_final=(0.1, 0.192, 0.0), p_z_max=0.05, T=T)
poly = fit(spec)

print("nominal timing")
for t in np.linspace(0, T, 7):
    print(f"  t={t:4.2f}  p={np.round(poly.evaluate(t), 4)}  v={np.round(poly.evaluate(t, 1), 4)}")

# the step is predicted to end 0.15 s later than nominal
print("\nstretched to a 1.35 s step")
for t in np.linspace(0, 1.35, 7):
    t_res = 1.35 - t
    pos, vel, _ = scaled_eval(poly, t, t_res, T)
    print(f"  t={t:4.2f}  phi={time_scale(t, t_res, T):.3f}  p={np.round(pos, 4)}"
          f"  v={np.round(vel, 4)}")
