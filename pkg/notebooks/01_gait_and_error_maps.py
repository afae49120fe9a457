"""Reference gait and the error coordinates.

Completes a gait from (r_bar, T), checks that the reference closes on
itself through one jump, and tabulates the jump-induced error
displacements together with their bounds.
"""
import numpy as np

from hybrid_lipm import (complete_params, delta_bounds, eta, jump_displacement, jump_map,
                         reference, tau_epsilon, xi)

p = complete_params(np.sqrt(9.81 / 0.58), r_bar=0.15, T=1.2, u_bar=0.075)
print(f"omega = {p.omega:.6f} 1/s, periodic speed v_bar = {p.v_bar:.6f} m/s")

# one period of the reference ends exactly where the jump sends it back
x_end = reference(p, p.T)
x_next, _ = jump_map(p, x_end, p.T)
print("reference at tau=T :", x_end)
print("after the jump     :", x_next, " (start was", reference(p, 0.0), ")")

print(f"xi = {xi(p):.2f}")
alpha = 4.2
print(f"\n{'eps_p':>8} {'eta':>9} {'tau_eps':>9} {'delta_1':>11} {'delta_2':>11}"
      f" {'|d1| bound':>11}")
for e in np.linspace(-0.1, 0.1, 9):
    d = jump_displacement(p, e)
    b = delta_bounds(p, e, alpha)
    print(f"{e:8.3f} {eta(p, e):9.5f} {tau_epsilon(p, e):9.5f} {d.delta_1:11.3e}"
          f" {d.delta_2:11.3e} {b['delta_1']:11.3e}")
