"""Euler-Maruyama simulation of controlled executions with PNL bookkeeping.

Random numbers: every path owns a Philox stream keyed by
``SeedSequence(seed, spawn_key=(path_index,))``. Each step draws two standard
normals (e1, e2) and forms

    dZ = sqrt(dt) * e1
    dW = sqrt(dt) * (rho * e1 + sqrt(1 - rho^2) * e2)

so results do not depend on how paths are grouped into blocks or threads.
Rates are evaluated at the left end of each step and held over the step.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .ode import ValueCoefficients
from .params import ModelParams, PenaltyParams, require_valid
from .policy import feedback_rates, infinite_uncertainty_policy
from .schedule import ScheduleSpec, WeightSpec

RateFn = Callable[[float, np.ndarray], tuple]


@dataclass(frozen=True)
class SimConfig:
    """``policy`` is "optimal", "infinite-limit" or a callable (t, x) -> (v, L)."""

    n_steps: int = 3600
    n_paths: int = 1
    seed: int = 0
    policy: str | RateFn = "optimal"
    record_every: int = 1
    block_size: int = 1000
    workers: int = 1

    def __post_init__(self):
        if self.n_steps < 1 or self.n_paths < 1 or self.record_every < 1 or self.block_size < 1:
            raise ValueError("n_steps, n_paths, record_every and block_size must be >= 1")
        if not (0 <= self.seed < 2 ** 64):
            raise ValueError("seed must be an unsigned 64-bit integer")
        if isinstance(self.policy, str) and self.policy not in ("optimal", "infinite-limit"):
            raise ValueError(f"unknown policy {self.policy!r}")


@dataclass
class SimPath:
    t: np.ndarray
    x: np.ndarray
    S: np.ndarray
    Stilde: np.ndarray
    v: np.ndarray
    L: np.ndarray
    P: np.ndarray | None
    Q: np.ndarray | None
    pnl_direct: float
    pnl_expanded: float
    compensated_pnl: float
    objective: float
    terminal_penalty: float
    g_integral: float
    penalty_integral: float
    tracking_integral: float
    opposite_sign_steps: int
    below_boundary_steps: int
    noise_checksum: str
    path_index: int


@dataclass
class MCResult:
    mean_objective: float
    stderr: float
    mean_final_position: float
    n_paths: int
    path_summaries: dict = field(repr=False)
    paths: list = field(default_factory=list, repr=False)


def increments(seed: int, path_index: int, n_steps: int, dt, rho: float):
    """(dZ, dW) for one path, each of length ``n_steps``."""
    ss = np.random.SeedSequence(seed, spawn_key=(path_index,))
    eps = np.random.Generator(np.random.Philox(ss)).standard_normal((n_steps, 2))
    sq = np.sqrt(dt)
    dZ = sq * eps[:, 0]
    dW = sq * (rho * eps[:, 0] + math.sqrt(1.0 - rho * rho) * eps[:, 1])
    return dZ, dW


def _checksum(dZ: np.ndarray, dW: np.ndarray) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(dZ).tobytes())
    h.update(np.ascontiguousarray(dW).tobytes())
    return h.hexdigest()[:16]


class _Plan:
    """Per-run quantities shared by all blocks (read-only)."""

    def __init__(self, model, pen, coeffs, config, schedule, weight):
        self.model, self.pen, self.config = model, pen, config
        N = config.n_steps
        self.t = np.linspace(0.0, model.T, N + 1)
        self.dt = np.diff(self.t)
        self.coeffs = coeffs
        if coeffs is not None:
            if coeffs.grid.size == self.t.size and np.array_equal(coeffs.grid, self.t):
                self.a, self.b = coeffs.a, coeffs.b
            else:
                a, b, _ = coeffs.at(self.t)
                self.a, self.b = np.asarray(a), np.asarray(b)
            schedule = schedule if schedule is not None else coeffs.schedule
            weight = weight if weight is not None else coeffs.weight
        elif config.policy == "optimal":
            raise ValueError("the optimal policy needs solved coefficients")
        self.schedule, self.weight = schedule, weight
        self.P = None
        if coeffs is not None and model.m1 == 0.0 and schedule is None:
            self.P = -(self.b + model.eta0) / (2.0 * self.a)
        if schedule is not None:
            mid = 0.5 * (self.t[:-1] + self.t[1:])
            self.Qn, self.Qm = np.asarray(schedule(self.t)), np.asarray(schedule(mid))
            if weight is not None:
                self.wn, self.wm = np.asarray(weight(self.t)), np.asarray(weight(mid))
            else:
                self.wn = np.zeros_like(self.t)
                self.wm = np.zeros_like(mid)
        self.R1, self.R2 = pen.caps(model)
        rec = list(range(0, N + 1, config.record_every))
        if rec[-1] != N:
            rec.append(N)
        self.rec = np.array(rec)

    def rates(self, n: int, x: np.ndarray):
        pol = self.config.policy
        if pol == "optimal":
            return feedback_rates(self.model, self.pen, self.a[n], self.b[n], x)
        if pol == "infinite-limit":
            return infinite_uncertainty_policy(self.model, self.pen, self.t[n], x)
        v, L = pol(float(self.t[n]), x)
        return np.broadcast_to(np.asarray(v, dtype=float), x.shape), \
            np.broadcast_to(np.asarray(L, dtype=float), x.shape)


def _run_block(plan: _Plan, idx: np.ndarray, record: bool):
    m, p, cfg = plan.model, plan.pen, plan.config
    N, nb = cfg.n_steps, idx.size
    dZ = np.empty((N, nb))
    dW = np.empty((N, nb))
    sums = []
    for j, i in enumerate(idx):
        dZ[:, j], dW[:, j] = increments(cfg.seed, int(i), N, plan.dt, m.rho)
        sums.append(_checksum(dZ[:, j], dW[:, j]))

    x = np.full(nb, float(m.x0))
    S = np.full(nb, float(m.S0))
    direct = np.zeros(nb)
    drift = np.zeros(nb)
    stoch = np.zeros(nb)
    pen_int = np.zeros(nb)
    g_int = np.zeros(nb)
    track = np.zeros(nb)
    opposite = np.zeros(nb, dtype=np.int64)
    below = np.zeros(nb, dtype=np.int64)
    if record:
        R = plan.rec.size
        rx, rS, rSt, rv, rL = (np.full((R, nb), np.nan) for _ in range(5))
        rpos = {int(n): k for k, n in enumerate(plan.rec)}
    rs = m.rho * m.sigma
    sched = plan.schedule is not None

    for n in range(N):
        dt = plan.dt[n]
        v, L = plan.rates(n, x)
        r = v + L
        fill = m.m0 + m.m1 * L
        h = -m.eta0 - m.eta1 * v - m.eta2 * L
        dx = -r * dt + fill * dZ[n]
        St = S + h
        direct += St * dx
        drift += (m.mu * x + rs * fill + 0.5 * m.gamma * fill * fill + h * r) * dt \
            + (0.5 * m.gamma * r * r - m.mu * r) * dt * dt
        stoch += m.sigma * x * dW[n] - h * fill * dZ[n]
        pen_run = (p.alpha * v * L + p.beta1 * (plan.R1 - v * v) + p.beta2 * (plan.R2 - L * L)) * dt
        pen_int += pen_run
        x_next = x + dx
        g_int += (m.mu * 0.5 * (x + x_next) + rs * fill + 0.5 * m.gamma * fill * fill + h * r) * dt + pen_run
        if sched:
            xm = 0.5 * (x + x_next)
            track += -dt / 6.0 * (plan.wn[n] * (x - plan.Qn[n]) ** 2
                                  + 4.0 * plan.wm[n] * (xm - plan.Qm[n]) ** 2
                                  + plan.wn[n + 1] * (x_next - plan.Qn[n + 1]) ** 2)
        opposite += (np.sign(v) != np.sign(L))
        if plan.P is not None:
            below += x < plan.P[n]
        if record and n in rpos:
            k = rpos[n]
            rx[k], rS[k], rSt[k], rv[k], rL[k] = x, S, St, v, L
        S = S + m.gamma * dx + m.mu * dt + m.sigma * dW[n]
        x = x_next

    if record:
        k = rpos[N]
        rx[k], rS[k] = x, S

    x0, S0 = m.x0, m.S0
    pnl = x * S - x0 * S0 - direct
    expanded = 0.5 * m.gamma * (x * x - x0 * x0) + drift + stoch
    terminal = -p.beta * x * x
    comp = pnl + pen_int + terminal
    objective = terminal + 0.5 * m.gamma * x * x + g_int + track

    out = {"pnl": pnl, "pnl_expanded": expanded, "compensated_pnl": comp, "objective": objective,
           "x_T": x.copy(), "terminal_penalty": terminal, "g_integral": g_int,
           "penalty_integral": pen_int, "tracking_integral": track,
           "opposite_sign_steps": opposite, "below_boundary_steps": below,
           "checksum": np.array(sums)}
    paths = []
    if record:
        tr = plan.t[plan.rec]
        Pr = None if plan.P is None else plan.P[plan.rec]
        Qr = plan.Qn[plan.rec] if sched else None
        for j in range(nb):
            paths.append(SimPath(
                t=tr, x=rx[:, j], S=rS[:, j], Stilde=rSt[:, j], v=rv[:, j], L=rL[:, j], P=Pr, Q=Qr,
                pnl_direct=float(pnl[j]), pnl_expanded=float(expanded[j]),
                compensated_pnl=float(comp[j]), objective=float(objective[j]),
                terminal_penalty=float(terminal[j]), g_integral=float(g_int[j]),
                penalty_integral=float(pen_int[j]), tracking_integral=float(track[j]),
                opposite_sign_steps=int(opposite[j]), below_boundary_steps=int(below[j]),
                noise_checksum=sums[j], path_index=int(idx[j])))
    return out, paths


def _check_inputs(model: ModelParams, pen: PenaltyParams, coeffs):
    require_valid(model, pen)
    if coeffs is not None and (coeffs.model != model or coeffs.pen != pen):
        raise ValueError("coefficients were solved for different parameters")


def simulate_path(model: ModelParams, pen: PenaltyParams, coeffs: ValueCoefficients | None,
                  config: SimConfig, path_index: int = 0, schedule: ScheduleSpec | None = None,
                  weight: WeightSpec | None = None) -> SimPath:
    """Simulate one path; ``path_index`` selects its random stream."""
    _check_inputs(model, pen, coeffs)
    plan = _Plan(model, pen, coeffs, config, schedule, weight)
    _, paths = _run_block(plan, np.array([path_index]), record=True)
    return paths[0]


def simulate_paths(model, pen, coeffs, config: SimConfig, schedule=None, weight=None) -> list[SimPath]:
    """All ``config.n_paths`` paths with full recorded trajectories."""
    return estimate_objective(model, pen, coeffs, config, schedule, weight, keep_paths=True).paths


def estimate_objective(model: ModelParams, pen: PenaltyParams, coeffs: ValueCoefficients | None,
                       config: SimConfig, schedule: ScheduleSpec | None = None,
                       weight: WeightSpec | None = None, keep_paths: bool = False) -> MCResult:
    """Monte Carlo estimate of the expected objective under ``config.policy``.

    The per-path objective is -beta x_T^2 + gamma/2 x_T^2 plus the running
    reward (and tracking penalty) integrated along each step; its mean
    estimates V(0, x0) for the optimal policy. The expected compensated PNL
    is this minus gamma/2 x0^2.
    """
    _check_inputs(model, pen, coeffs)
    plan = _Plan(model, pen, coeffs, config, schedule, weight)
    all_idx = np.arange(config.n_paths)
    blocks = [all_idx[i:i + config.block_size] for i in range(0, config.n_paths, config.block_size)]

    def work(idx):
        return _run_block(plan, idx, keep_paths)

    if config.workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(config.workers) as ex:
            results = list(ex.map(work, blocks))
    else:
        results = [work(b) for b in blocks]

    summaries = {k: np.concatenate([r[0][k] for r in results]) for k in results[0][0]}
    paths = [p for r in results for p in r[1]]
    obj = summaries["objective"]
    n = obj.size
    stderr = float(np.std(obj, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return MCResult(float(np.mean(obj)), stderr, float(np.mean(summaries["x_T"])), n, summaries, paths)


def pnl_consistency(path: SimPath) -> float:
    """|direct PNL - expanded PNL|.

    The expanded form keeps each step's drift-only products
    (gamma/2 r^2 - mu r) dt^2, so the two agree to rounding when there is no
    noise and differ by O(sqrt(dt)) noise cross terms otherwise.
    """
    return abs(path.pnl_direct - path.pnl_expanded)


@dataclass(frozen=True)
class Scenario:
    """A named simulation setup. Scenarios sharing ``sim.seed`` share noise."""

    name: str
    model: ModelParams
    pen: PenaltyParams
    sim: SimConfig
    schedule: ScheduleSpec | None = None
    weight: WeightSpec | None = None
    cross_term: str = "m1"
    n_record: int = 1


@dataclass
class ScenarioResult:
    name: str
    ok: bool
    error: str | None
    validity: dict | None
    value0: float | None
    mc: MCResult | None
    paths: list


def run_scenario(sc: Scenario) -> ScenarioResult:
    from .ode import solve
    from .params import validity_report

    rep = validity_report(sc.model, sc.pen)
    try:
        coeffs = None
        if sc.sim.policy == "optimal":
            coeffs = solve(sc.model, sc.pen, grid_size=sc.sim.n_steps + 1, cross_term=sc.cross_term,
                           sched=sc.schedule, weight=sc.weight)
            rep = validity_report(sc.model, sc.pen, a_samples=coeffs.a)
        mc = estimate_objective(sc.model, sc.pen, coeffs, sc.sim, sc.schedule, sc.weight)
        paths = [simulate_path(sc.model, sc.pen, coeffs, sc.sim, i, sc.schedule, sc.weight)
                 for i in range(min(sc.n_record, sc.sim.n_paths))]
    except Exception as exc:  # aggregated, the suite keeps going
        return ScenarioResult(sc.name, False, f"{type(exc).__name__}: {exc}", rep.to_dict(),
                              None, None, [])
    v0 = coeffs.value0() if coeffs is not None else None
    return ScenarioResult(sc.name, True, None, rep.to_dict(), v0, mc, paths)


def run_scenario_suite(scenarios) -> dict[str, ScenarioResult]:
    """Run every scenario in order; failures are recorded, not raised."""
    return {sc.name: run_scenario(sc) for sc in scenarios}
