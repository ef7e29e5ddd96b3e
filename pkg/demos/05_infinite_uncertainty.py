"""
Very uncertain limit orders
===========================

As the linear fill uncertainty m1 grows, limit orders become too risky to
use and the optimal strategy places market orders only. The limiting
market-order rate is affine in holdings.
"""

# %%
import numpy as np

from optexec import ModelParams, PenaltyParams
from optexec.ode import solve_affine_numerical
from optexec.policy import feedback_rates, infinite_uncertainty_policy, optimal_controls

pen = PenaltyParams()
for m1 in (10.0, 1e2, 1e3, 1e4):
    m = ModelParams(mu=0.0, m1=m1)
    c = solve_affine_numerical(m, pen, 10_001)
    _, L = feedback_rates(m, pen, c.a, c.b, m.x0)
    ev = optimal_controls(c, 0.0, m.x0)
    print(f"m1={m1:>7g}  max|L*|={np.max(np.abs(L)):.3e}  v*(0,x0)={ev.v:.5f}")

# %%
m = ModelParams(mu=0.0, m1=1e4)
print("limit form  ", float(infinite_uncertainty_policy(m, pen, 0.0, m.x0)[0]))
print("printed form", float(infinite_uncertainty_policy(m, pen, 0.0, m.x0, form="printed")[0]))
