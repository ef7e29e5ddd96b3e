"""
Following a schedule
====================

A running penalty -w (x - Q(t))^2 pulls holdings toward a target schedule.
A small weight already tightens tracking a lot; a large weight on a
noise-free market makes the trader follow the schedule almost exactly.
"""

# %%
from dataclasses import replace

from optexec import ModelParams, PenaltyParams
from optexec.ode import solve
from optexec.schedule import WeightSpec, make_schedule, tracking_error
from optexec.simulator import SimConfig, simulate_path, simulate_paths

pen = PenaltyParams()
model = ModelParams().with_fractions(p0=0.05, p1=0.05)
for kind in ("linear", "quadratic"):
    sched = make_schedule(kind, model.x0, model.T)
    for w in (0.0, 1e-4):
        c = solve(model, pen, 3601, sched=sched, weight=WeightSpec("constant", w))
        err = tracking_error(simulate_paths(model, pen, c, SimConfig(n_paths=100, seed=404)), sched)
        print(f"{kind:>9} w={w:<7g} mean-square {err.mean_square:10.1f}  max {err.max_abs:8.1f}")

# %%
# Deterministic market, increasing weight. Stiff weights need small steps.
det = replace(ModelParams(sigma=0.0), m0=0.0, m1=0.0)
sched = make_schedule("linear", det.x0, det.T)
n = 72_000
for w in (0.0, 1e-4, 1e-2, 1.0, 10.0):
    c = solve(det, pen, n + 1, sched=sched, weight=WeightSpec("constant", w))
    p = simulate_path(det, pen, c, SimConfig(n_steps=n, record_every=10))
    print(f"w={w:<7g} max deviation {tracking_error([p], sched).max_abs:8.3f} shares")
