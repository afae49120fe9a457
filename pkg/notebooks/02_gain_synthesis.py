"""Gain synthesis for the saturated, windup-augmented feedback.

Sweeps the decay rate alpha across the feasibility boundary at omega,
then synthesizes and re-verifies the certificate used elsewhere.
"""
import numpy as np

from hybrid_lipm import Infeasible, SynthesisProblem, complete_params, synthesize, verify
from hybrid_lipm.synthesis import max_margin

p = complete_params(np.sqrt(9.81 / 0.58), r_bar=0.15, T=1.2, u_bar=0.075)

for ratio in (0.9, 1.0, 1.02, 1.1, 2.0):
    alpha = ratio * p.omega
    try:
        synthesize(SynthesisProblem(p, alpha=alpha))
        verdict = "feasible"
    except Infeasible:
        verdict = "infeasible"
    print(f"alpha = {ratio:4.2f} omega  margin {max_margin(p, alpha):+.3e}  -> {verdict}")

cert = synthesize(SynthesisProblem(p, alpha=4.2))
print("\nK =", cert.K, " L =", round(cert.L, 4))
print("P =\n", cert.P)
report = verify(p, cert)
print("independent check passed:", report.passed)
for name, m in report.margins.items():
    print(f"  {name:<11} {m:.3e}")
