"""
Parameters and validity checks
==============================

Every run starts from a ``ModelParams`` / ``PenaltyParams`` pair. Before
solving anything it is worth asking whether the quadratic value function
can exist at all: the limit/market order cross penalty must sit inside an
admissible interval, the terminal penalty must beat half the permanent
impact, and under heavy fill uncertainty the horizon is capped.
"""

# %%
from dataclasses import replace

from optexec import ModelParams, PenaltyParams
from optexec.params import admissible_alpha_interval, compute_C, t_crit, t_max, validity_report

model, pen = ModelParams(), PenaltyParams()
print(model)
print(pen)

# %%
# The constant C appears in every closed form. It is positive exactly when
# alpha lies strictly inside the admissible interval.
lo, hi = admissible_alpha_interval(model, pen)
print(f"C = {compute_C(model, pen):.10f}")
print(f"admissible alpha in ({lo:.8f}, {hi:.8f}); chosen alpha = {pen.alpha}")
print(f"T_crit = {t_crit(model, pen):.4f} s for T = {model.T} s")

# %%
# Fill uncertainty is usually quoted as fractions of the TWAP trade size.
# p0 = 0.1 gives the constant-uncertainty scale m0 = 16.67 shares/sqrt(s).
print(model.with_fractions(p0=0.1).m0, model.with_fractions(p0=0.05, p1=0.05).m1)

# %%
# The report lists every check. Hard failures block solving and simulation.
print(validity_report(model, pen).to_dict()["ok"])
for label, m, p in (("alpha = 0.4", model, replace(pen, alpha=0.4)),
                    ("beta = 1e-7", model, replace(pen, beta=1e-7)),
                    ("m1 = 1000, T = 3e6", replace(model, m1=1000.0, T=3e6), pen)):
    failed = [c.name for c in validity_report(m, p).failures()]
    print(f"{label:>20}: fails {failed}")
print(f"T_max at m1 = 1000: {t_max(replace(model, m1=1000.0), pen):.4g} s")
