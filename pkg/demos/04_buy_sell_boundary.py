"""
The buy-sell boundary
=====================

With constant fill uncertainty and equal impact coefficients, both optimal
rates are proportional to x - P(t). Above P the trader sells with both order
types; below it the trader buys. The shape of P depends on how strongly
fills correlate with price moves.
"""

# %%
from dataclasses import replace

import numpy as np

from optexec import ModelParams, PenaltyParams
from optexec.policy import buy_sell_boundary, classify_boundary_monotonicity

model = replace(ModelParams(), eta1=0.1, eta2=0.1).with_fractions(p0=0.1)
pen = PenaltyParams()

# %%
# "m0" keeps the adverse-selection term in the b equation; with the default
# "m1" reading it vanishes when m1 = 0 and rho no longer moves P.
for rho in (-0.2, -0.0005):
    for beta in (1e-3, 0.1):
        prof = buy_sell_boundary(replace(model, rho=rho), replace(pen, beta=beta), cross_term="m0")
        print(f"rho={rho:<8} beta={beta:<6} {prof.classification:>15}  "
              f"P(0)={prof.P[0]:9.3f}  P(T)={prof.terminal_target:.4f}")

# %%
th = classify_boundary_monotonicity(model, pen, "m0")
print(f"non-increasing for |rho| <= {th.rho_non_increasing:.3e}, "
      f"non-decreasing for |rho| >= {th.rho_non_decreasing:.3e}")

# %%
# Without drift and with eta0 = 0 the boundary is a straight line to zero.
flat = buy_sell_boundary(replace(model, mu=0.0, eta0=0.0), pen, np.linspace(0, 3600, 7), "m0")
print(np.round(flat.P, 3))
