from dataclasses import replace

import numpy as np
import pytest

from optexec.ode import solve
from optexec.params import ModelParams, PenaltyParams
from optexec.schedule import (
    ScheduleError,
    WeightSpec,
    make_schedule,
    read_schedule_csv,
    tracking_error,
    tracking_penalty,
    write_schedule_csv,
)
from optexec.simulator import SimConfig, estimate_objective, simulate_path, simulate_paths

X0, T = 1e4, 3600.0


def test_closed_form_midpoints():
    assert make_schedule("linear", X0, T)(T / 2) == X0 / 2
    assert make_schedule("quadratic", X0, T)(T / 2) == 0.75 * X0
    for kind in ("linear", "quadratic"):
        q = make_schedule(kind, X0, T)
        assert q(0.0) == X0 and q(T) == 0.0


def test_tabulated_interpolation_bound():
    quad = make_schedule("quadratic", X0, T)
    nodes = np.linspace(0, T, 100)
    tab = make_schedule("tabulated", X0, T, np.column_stack([nodes, quad(nodes)]))
    t = np.linspace(0, T, 100_001)
    assert np.max(np.abs(tab(t) - quad(t))) < X0 / 100 ** 2


@pytest.mark.parametrize("rows, bad_row", [
    ([(0, X0), (1800, 6000), (2000, 6500), (T, 0)], 2),
    ([(0, X0), (1800, -1.0), (T, 0)], 1),
    ([(0, X0), (1800, 500), (T, 1.0)], 2),
    ([(0, X0), (1800, 500), (1800, 400), (T, 0)], 2),
])
def test_tabulated_rejections_carry_row(rows, bad_row):
    with pytest.raises(ScheduleError) as err:
        make_schedule("tabulated", X0, T, rows)
    assert err.value.row == bad_row
    assert f"row {bad_row}" in str(err.value)


def test_flat_segments_allowed():
    q = make_schedule("tabulated", X0, T, [(0, X0), (1000, 5000), (2000, 5000), (T, 0)])
    assert q(1500.0) == 5000.0


def test_csv_round_trip_and_errors(tmp_path):
    quad = make_schedule("quadratic", X0, T)
    path = tmp_path / "q.csv"
    write_schedule_csv(quad, path, n=51)
    back = read_schedule_csv(path, X0, T)
    assert np.allclose(back.q_samples, quad(np.linspace(0, T, 51)), rtol=0, atol=1e-9)
    path.write_text("t,Q\n0,10000\n1800,abc\n3600,0\n")
    with pytest.raises(ScheduleError) as err:
        read_schedule_csv(path, X0, T)
    assert err.value.row == 1
    path.write_text("time,holdings\n0,10000\n3600,0\n")
    with pytest.raises(ScheduleError):
        read_schedule_csv(path, X0, T)


def test_weight_validation():
    with pytest.raises(ScheduleError):
        WeightSpec("constant", -1e-4)
    with pytest.raises(ScheduleError) as err:
        WeightSpec("tabulated", t_samples=np.array([0.0, 1.0, 2.0]), w_samples=np.array([0.0, 1.0, -2.0]))
    assert err.value.row == 2
    w = WeightSpec("tabulated", t_samples=np.array([0.0, T]), w_samples=np.array([0.0, 2e-4]))
    assert w(T / 2) == pytest.approx(1e-4) and not w.is_zero
    assert WeightSpec().is_zero


def test_penalty_sign():
    y = np.linspace(-5, 5, 11)
    lam = tracking_penalty(1e-4, y, 0.0)
    assert lam[5] == 0.0 and np.all(lam[y != 0] < 0)


class _Synthetic:
    def __init__(self, t, x):
        self.t, self.x = t, x


def test_identity_path_has_zero_metrics():
    q = make_schedule("quadratic", X0, T)
    t = np.linspace(0, T, 3601)
    err = tracking_error([_Synthetic(t, q(t)), _Synthetic(t, q(t))], q)
    assert err.max_abs == err.mean_square == err.terminal_gap == 0.0


def test_metrics_on_known_offset():
    q = make_schedule("linear", X0, T)
    t = np.linspace(0, T, 101)
    err = tracking_error([_Synthetic(t, q(t) + 3.0), _Synthetic(t, q(t) - 1.0)], q)
    assert err.max_abs == pytest.approx(3.0)
    assert err.mean_square == pytest.approx(5.0)
    assert err.terminal_gap == pytest.approx(2.0)


def test_scheduled_value_not_above_unscheduled():
    m, pen = ModelParams().with_fractions(p0=0.05, p1=0.05), PenaltyParams()
    sched = make_schedule("linear", m.x0, m.T)
    v0 = solve(m, pen, 3601).value0()
    assert solve(m, pen, 3601, sched=sched, weight=WeightSpec("constant", 0.0)).value0() \
        == pytest.approx(v0, rel=1e-12)
    for w in (1e-6, 1e-4):
        assert solve(m, pen, 3601, sched=sched, weight=WeightSpec("constant", w)).value0() < v0


def test_penalty_accumulator_non_positive():
    m, pen = ModelParams().with_fractions(p0=0.05, p1=0.05), PenaltyParams()
    sched, wt = make_schedule("quadratic", m.x0, m.T), WeightSpec("constant", 1e-4)
    c = solve(m, pen, 3601, sched=sched, weight=wt)
    mc = estimate_objective(m, pen, c, SimConfig(n_paths=20, seed=3))
    assert np.all(mc.path_summaries["tracking_integral"] < 0)


def test_small_weight_improves_tracking():
    m, pen = ModelParams().with_fractions(p0=0.05, p1=0.05), PenaltyParams()
    sched = make_schedule("linear", m.x0, m.T)
    cfg = SimConfig(n_paths=100, seed=11)
    res = {}
    for w in (0.0, 1e-4):
        wt = WeightSpec("constant", w)
        c = solve(m, pen, 3601, sched=sched, weight=wt)
        paths = simulate_paths(m, pen, c, cfg)
        res[w] = tracking_error(paths, sched)
        assert len({p.noise_checksum for p in paths}) == 100
    assert res[1e-4].mean_square < res[0.0].mean_square
    assert np.mean(res[1e-4].per_path_mean_square < res[0.0].per_path_mean_square) > 0.9


def test_deterministic_weight_scan_monotone():
    m = replace(ModelParams(sigma=0.0), m0=0.0, m1=0.0)
    pen = PenaltyParams()
    sched = make_schedule("linear", m.x0, m.T)
    n = 72_000
    cfg = SimConfig(n_steps=n, record_every=10)
    devs = []
    for w in (0.0, 1e-4, 1e-2, 1.0, 10.0):
        wt = WeightSpec("constant", w)
        c = solve(m, pen, n + 1, sched=sched, weight=wt)
        devs.append(tracking_error([simulate_path(m, pen, c, cfg)], sched).max_abs)
    assert all(b < a for a, b in zip(devs, devs[1:]))
    assert devs[-1] < 0.005 * m.x0
