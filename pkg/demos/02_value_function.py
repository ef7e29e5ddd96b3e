"""
Solving for the value function
==============================

The value function is quadratic in holdings, V = a(t) x^2 + b(t) x + c(t),
and the coefficients satisfy a backward ODE system. With constant fill
uncertainty (m1 = 0) it has a closed form; in general it is integrated with
fixed-step RK4. Here the two are compared and the HJB residual is checked.
"""

# %%
import numpy as np

from optexec import ModelParams, PenaltyParams
from optexec.ode import hjb_residual, solve, solve_affine_numerical, solve_constant_closed_form

pen = PenaltyParams()
constant = ModelParams().with_fractions(p0=0.1)

closed = solve_constant_closed_form(constant, pen, 10_000)
numeric = solve_affine_numerical(constant, pen, 10_000)
for key in "abc":
    x, y = getattr(numeric, key), getattr(closed, key)
    print(key, "sup-rel difference", np.max(np.abs(x - y)) / np.max(np.abs(y)))
print("a(0) =", closed.a[0], " V(0, x0) =", closed.value0())

# %%
# The HJB residual of the closed form is at rounding level everywhere.
rng = np.random.default_rng(0)
t = rng.uniform(0, 0.99 * constant.T, 5)
x = rng.uniform(-2e4, 2e4, 5)
print(np.abs(hjb_residual(closed, t, x)))

# %%
# With linear uncertainty as well (m1 = 3) only the numerical solver applies.
# Halving the step cuts the residual by roughly 2^4 at cell midpoints.
affine = ModelParams().with_fractions(p0=0.05, p1=0.05)
prev = None
for n in (1001, 2001, 4001, 8001):
    c = solve(affine, pen, n)
    mid = 0.5 * (c.grid[:-1] + c.grid[1:])
    r = np.max(np.abs(hjb_residual(c, mid, np.full_like(mid, 2e4))))
    print(n, f"{r:.3e}", "" if prev is None else f"order {np.log2(prev / r):.2f}")
    prev = r

# %%
# Coefficients round-trip through CSV.
c.write_csv("/tmp/coefficients.csv")
print(open("/tmp/coefficients.csv").readline().strip())
