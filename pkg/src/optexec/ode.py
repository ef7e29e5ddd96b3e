"""Coefficients of the quadratic value function V(t, x) = a(t) x^2 + b(t) x + c(t).

The triangular system (a, then b given a, then c given a and b) is integrated
backward from T with a fixed-step classical RK4 scheme. Closed forms are
available for constant uncertainty (m1 = 0) and for linear uncertainty
(m0 = 0) when 2(alpha + beta1 + beta2) = C.

Cross-term convention
---------------------
The term that couples fill noise and price noise enters the L-linear part of
the control objective as ``m0*m1*(V_xx + gamma) + rho*sigma*m1``. Setting
``cross_term="m0"`` replaces ``rho*sigma*m1`` by ``rho*sigma*m0`` in the
coefficient ODEs only, which is the form needed to reproduce the
rho-dependent constant-uncertainty boundaries. The default ``"m1"`` keeps the
ODEs consistent with the controls and with the simulated dynamics.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .params import (
    ModelParams,
    ParameterError,
    PenaltyParams,
    compute_C,
    explicit_linear_condition_holds,
    require_valid,
    second_order_condition,
    t_crit,
    t_max,
    beta_floor,
)
from .schedule import ScheduleSpec, WeightSpec

CROSS_TERMS = ("m1", "m0")
SOURCES = ("closed-form-constant", "closed-form-linear", "numerical-affine", "numerical-scheduled")


class SolverError(RuntimeError):
    """The backward integration left the region where the ODEs are defined."""

    def __init__(self, message: str, t: float | None = None):
        self.t = t
        super().__init__(message if t is None else f"{message} at t={t!r}")


def _grid(model: ModelParams, grid_size) -> np.ndarray:
    if np.ndim(grid_size) == 0:
        n = int(grid_size)
        if n < 2:
            raise ValueError("grid_size must be >= 2")
        g = np.linspace(0.0, model.T, n)
    else:
        g = np.asarray(grid_size, dtype=float)
        if g.size < 2 or np.any(np.diff(g) <= 0.0):
            raise ValueError("grid must be strictly increasing with >= 2 points")
        if g[0] != 0.0 or g[-1] != model.T:
            raise ValueError("grid must run from 0 to T")
    g[-1] = model.T
    return g


class _System:
    """Right-hand sides of the coefficient ODEs, in plain floats for speed."""

    def __init__(self, model: ModelParams, pen: PenaltyParams, cross_term: str):
        if cross_term not in CROSS_TERMS:
            raise ValueError(f"cross_term must be one of {CROSS_TERMS}")
        self.model, self.pen = model, pen
        self.C = compute_C(model, pen)
        self.u = model.eta1 + pen.beta1
        self.s2 = 2.0 * (pen.alpha + pen.beta1 + pen.beta2)
        self.e = model.eta2 - model.eta1 - pen.alpha - 2.0 * pen.beta1
        self.m0, self.m1sq = model.m0, model.m1 ** 2
        self.m0m1 = model.m0 * model.m1
        self.rs = model.rho * model.sigma * (model.m1 if cross_term == "m1" else model.m0)
        R1, R2 = pen.caps(model)
        self.const_c = (model.rho * model.sigma * model.m0 + pen.beta1 * R1 + pen.beta2 * R2)
        self.guard = 1e-12 * max(abs(self.C), 1e-300)

    def denom(self, a):
        return self.C - self.m1sq * (2.0 * a + self.model.gamma)

    def rhs(self, a, b, w=0.0, Q=0.0):
        """(a', b', c') at one time; raises ZeroDivisionError-free SolverError upstream."""
        g = self.model.gamma
        ag = 2.0 * a + g
        D = self.C - self.m1sq * ag
        F = (self.s2 - self.m1sq * ag) / (self.u * D)
        k = self.m0m1 * ag + self.rs
        p = b + self.model.eta0
        da = w - F * a * a
        db = -self.model.mu - F * a * p - self.e * k * a / (self.u * D) - 2.0 * w * Q
        dc = -(0.5 * self.m0 * self.m0 * ag + self.const_c + 0.25 * F * p * p
               + 0.5 * self.e * k * p / (self.u * D) + 0.5 * k * k / D) + w * Q * Q
        return da, db, dc


@dataclass(frozen=True)
class ValueCoefficients:
    """Sampled a(t), b(t), c(t) on a strictly increasing grid ending at T.

    Off-grid values come from cubic splines clamped with the ODE right-hand
    side at both ends. ``schedule`` and
    ``weight`` are set for schedule-following solves.
    """

    grid: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    source: str
    model: ModelParams
    pen: PenaltyParams
    cross_term: str = "m1"
    schedule: ScheduleSpec | None = None
    weight: WeightSpec | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        m, p = self.model, self.pen
        if not (self.a[-1] == m.gamma / 2.0 - p.beta and self.b[-1] == 0.0 and self.c[-1] == 0.0):
            raise SolverError("terminal conditions violated")
        ok = second_order_condition(self.a, m, p)
        if not np.all(ok):
            i = int(np.flatnonzero(~ok)[-1])
            raise SolverError("second-order condition breached", t=float(self.grid[i]))

    def _end_slopes(self, i: int):
        sys = _System(self.model, self.pen, self.cross_term)
        t = self.grid[i]
        w = float(self.weight(t)) if self.weight is not None else 0.0
        Q = float(self.schedule(t)) if self.schedule is not None else 0.0
        return sys.rhs(float(self.a[i]), float(self.b[i]), w, Q)

    @cached_property
    def _splines(self):
        try:
            left, right = self._end_slopes(0), self._end_slopes(-1)
        except (ZeroDivisionError, ParameterError):
            return tuple(CubicSpline(self.grid, y) for y in (self.a, self.b, self.c))
        return tuple(CubicSpline(self.grid, y, bc_type=((1, l), (1, r)))
                     for y, l, r in zip((self.a, self.b, self.c), left, right))

    def at(self, t):
        """(a, b, c) at ``t``; exact at grid nodes."""
        sa, sb, sc = self._splines
        return sa(t), sb(t), sc(t)

    def derivatives(self, t):
        sa, sb, sc = self._splines
        return sa(t, 1), sb(t, 1), sc(t, 1)

    def value(self, t, x):
        a, b, c = self.at(t)
        return a * x * x + b * x + c

    def value0(self) -> float:
        """V(0, x0)."""
        x0 = self.model.x0
        return float(self.a[0] * x0 * x0 + self.b[0] * x0 + self.c[0])

    def write_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "a", "b", "c"])
            for row in zip(self.grid, self.a, self.b, self.c):
                w.writerow([repr(float(v)) for v in row])


def read_coefficients_csv(path, model: ModelParams, pen: PenaltyParams, source: str = "numerical-affine",
                          cross_term: str = "m1") -> ValueCoefficients:
    data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
    return ValueCoefficients(data[:, 0], data[:, 1], data[:, 2], data[:, 3], source, model, pen,
                             cross_term)


def _rk4_backward(sys: _System, grid: np.ndarray, w_half=None, q_half=None):
    """Integrate (a, b, c) from T down to 0.

    ``w_half`` / ``q_half`` hold schedule samples on the half-step grid
    (index 2i at grid[i], 2i+1 at the midpoint of [grid[i], grid[i+1]]).
    """
    n = grid.size
    a = np.empty(n)
    b = np.empty(n)
    c = np.empty(n)
    m, p = sys.model, sys.pen
    a[-1], b[-1], c[-1] = m.gamma / 2.0 - p.beta, 0.0, 0.0
    ya, yb, yc = float(a[-1]), 0.0, 0.0
    sched = w_half is not None
    rhs, denom, guard = sys.rhs, sys.denom, sys.guard
    w0 = w1 = w2 = q0 = q1 = q2 = 0.0
    g = grid.tolist()
    for i in range(n - 2, -1, -1):
        h = -(g[i + 1] - g[i])
        if sched:
            w0, w1, w2 = w_half[2 * i + 2], w_half[2 * i + 1], w_half[2 * i]
            q0, q1, q2 = q_half[2 * i + 2], q_half[2 * i + 1], q_half[2 * i]
        k1a, k1b, k1c = rhs(ya, yb, w0, q0)
        a2, b2 = ya + 0.5 * h * k1a, yb + 0.5 * h * k1b
        if denom(a2) <= guard:
            raise SolverError("second-order condition breached", t=g[i + 1] + 0.5 * h)
        k2a, k2b, k2c = rhs(a2, b2, w1, q1)
        a3, b3 = ya + 0.5 * h * k2a, yb + 0.5 * h * k2b
        if denom(a3) <= guard:
            raise SolverError("second-order condition breached", t=g[i + 1] + 0.5 * h)
        k3a, k3b, k3c = rhs(a3, b3, w1, q1)
        a4, b4 = ya + h * k3a, yb + h * k3b
        if denom(a4) <= guard:
            raise SolverError("second-order condition breached", t=g[i])
        k4a, k4b, k4c = rhs(a4, b4, w2, q2)
        ya = ya + h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
        yb = yb + h / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
        yc = yc + h / 6.0 * (k1c + 2.0 * k2c + 2.0 * k3c + k4c)
        if not (math.isfinite(ya) and math.isfinite(yb) and math.isfinite(yc)):
            raise SolverError("non-finite coefficients", t=g[i])
        if denom(ya) <= guard:
            raise SolverError("second-order condition breached", t=g[i])
        a[i], b[i], c[i] = ya, yb, yc
    return a, b, c


def solve_affine_numerical(model: ModelParams, pen: PenaltyParams, grid_size=10_001,
                           cross_term: str = "m1") -> ValueCoefficients:
    """RK4 solution of the general affine-uncertainty coefficient system."""
    require_valid(model, pen)
    grid = _grid(model, grid_size)
    sys = _System(model, pen, cross_term)
    a, b, c = _rk4_backward(sys, grid)
    return ValueCoefficients(grid, a, b, c, "numerical-affine", model, pen, cross_term)


def solve_scheduled(model: ModelParams, pen: PenaltyParams, sched: ScheduleSpec, weight: WeightSpec,
                    grid_size=10_001, cross_term: str = "m1") -> ValueCoefficients:
    """Coefficients with the running tracking penalty -w(t) (x - Q(t))^2."""
    require_valid(model, pen)
    if sched.T != model.T:
        raise ParameterError(f"schedule horizon {sched.T!r} != model horizon {model.T!r}")
    if sched(model.T) != 0.0:
        raise ParameterError("schedule must end at Q(T) = 0")
    grid = _grid(model, grid_size)
    half = np.empty(2 * grid.size - 1)
    half[0::2] = grid
    half[1::2] = 0.5 * (grid[:-1] + grid[1:])
    w_half = np.asarray(weight(half), dtype=float)
    if np.any(w_half < 0.0):
        raise ParameterError("weight must be non-negative")
    q_half = np.asarray(sched(half), dtype=float)
    sys = _System(model, pen, cross_term)
    a, b, c = _rk4_backward(sys, grid, w_half.tolist(), q_half.tolist())
    return ValueCoefficients(grid, a, b, c, "numerical-scheduled", model, pen, cross_term,
                             schedule=sched, weight=weight)


def _simpson_backward(fnodes: np.ndarray, fmid: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """c(t_i) = int_{t_i}^T f, composite Simpson with the midpoint of each cell."""
    h = np.diff(grid)
    cell = h / 6.0 * (fnodes[:-1] + 4.0 * fmid + fnodes[1:])
    out = np.zeros(grid.size)
    out[:-1] = np.cumsum(cell[::-1])[::-1]
    return out


def _c_by_quadrature(sys: _System, a_fn, b_fn, grid):
    mid = 0.5 * (grid[:-1] + grid[1:])

    def minus_dc(t):
        a, b = a_fn(t), b_fn(t)
        return -np.array([sys.rhs(ai, bi)[2] for ai, bi in zip(a, b)])

    return _simpson_backward(minus_dc(grid), minus_dc(mid), grid)


def solve_constant_closed_form(model: ModelParams, pen: PenaltyParams, grid_size=10_001,
                               cross_term: str = "m1") -> ValueCoefficients:
    """Explicit a(t) and b(t) for m1 = 0; c(t) by composite Simpson."""
    if model.m1 != 0.0:
        raise ParameterError("constant closed form needs m1 = 0")
    require_valid(model, pen)
    grid = _grid(model, grid_size)
    sys = _System(model, pen, cross_term)
    C, u, T = sys.C, sys.u, model.T
    s = pen.alpha + pen.beta1 + pen.beta2
    tc = t_crit(model, pen)
    two_b_g = 2.0 * pen.beta - model.gamma
    kappa = sys.rs  # m1 = 0, so only the rho*sigma part survives

    def a_fn(t):
        return -u * C / (2.0 * s * (tc - t))

    def b_fn(t):
        b0 = s * model.mu / (u * C) * ((tc - t) ** 2 - (tc - T) ** 2) - sys.e * kappa * (T - t) / (u * C)
        return -model.eta0 - a_fn(t) * (2.0 * model.eta0 / two_b_g + b0)

    a, b = a_fn(grid), b_fn(grid)
    a[-1], b[-1] = model.gamma / 2.0 - pen.beta, 0.0
    c = _c_by_quadrature(sys, a_fn, b_fn, grid)
    return ValueCoefficients(grid, a, b, c, "closed-form-constant", model, pen, cross_term,
                             meta={"t_crit": tc})


def solve_linear_closed_form(model: ModelParams, pen: PenaltyParams, grid_size=10_001,
                             cross_term: str = "m1") -> ValueCoefficients:
    """Explicit a(t) and b(t) for m0 = 0 under 2(alpha + beta1 + beta2) = C."""
    if model.m0 != 0.0:
        raise ParameterError("linear closed form needs m0 = 0")
    if not explicit_linear_condition_holds(model, pen):
        raise ParameterError("2(alpha+beta1+beta2) = C does not hold; "
                             "see enforce_explicit_linear_condition")
    require_valid(model, pen)
    if not pen.beta > beta_floor(model, pen):
        raise ParameterError("beta is below the linear-uncertainty floor")
    if not model.T < t_max(model, pen):
        raise ParameterError("horizon exceeds T_max")
    grid = _grid(model, grid_size)
    sys = _System(model, pen, cross_term)
    u, T, mu = sys.u, model.T, model.mu
    two_b_g = 2.0 * pen.beta - model.gamma

    def a_fn(t):
        return -u * two_b_g / (2.0 * u + (T - t) * two_b_g)

    def b_fn(t):
        tau = T - t
        return -model.eta0 - a_fn(t) * (2.0 * model.eta0 / two_b_g + 2.0 * mu * tau / two_b_g
                                        + mu * tau ** 2 / (2.0 * u))

    a, b = a_fn(grid), b_fn(grid)
    a[-1], b[-1] = model.gamma / 2.0 - pen.beta, 0.0
    c = _c_by_quadrature(sys, a_fn, b_fn, grid)
    return ValueCoefficients(grid, a, b, c, "closed-form-linear", model, pen, cross_term)


def limiting_a(model: ModelParams, pen: PenaltyParams, t):
    """a(t) of the m1 -> infinity limit (same as the explicit linear solution)."""
    u = model.eta1 + pen.beta1
    two_b_g = 2.0 * pen.beta - model.gamma
    return -u * two_b_g / (2.0 * u + (model.T - np.asarray(t, dtype=float)) * two_b_g)


def solve(model: ModelParams, pen: PenaltyParams, grid_size=10_001, cross_term: str = "m1",
          sched: ScheduleSpec | None = None, weight: WeightSpec | None = None) -> ValueCoefficients:
    """Dispatch to the closed form when one applies, else integrate numerically."""
    if sched is not None and weight is not None and not weight.is_zero:
        return solve_scheduled(model, pen, sched, weight, grid_size, cross_term)
    if model.m1 == 0.0:
        return solve_constant_closed_form(model, pen, grid_size, cross_term)
    if model.m0 == 0.0 and explicit_linear_condition_holds(model, pen):
        return solve_linear_closed_form(model, pen, grid_size, cross_term)
    return solve_affine_numerical(model, pen, grid_size, cross_term)


def hamiltonian_sup(model: ModelParams, pen: PenaltyParams, x, Vx, Vxx, cross_term: str = "m1"):
    """sup over (v, L) of -(v+L) V_x + m(L)^2 V_xx / 2 + g(x, v, L).

    Solved from the 2x2 first-order conditions by Cramer's rule, independently
    of the coefficient-ODE algebra. Broadcasts; returns (value, v*, L*).
    """
    m = model
    R1, R2 = pen.caps(m)
    rs = m.rho * m.sigma * (m.m1 if cross_term == "m1" else m.m0)
    x, Vx, Vxx = (np.asarray(z, dtype=float) for z in (x, Vx, Vxx))
    h11 = -2.0 * (m.eta1 + pen.beta1)
    h12 = pen.alpha - m.eta1 - m.eta2
    h22 = m.m1 ** 2 * (Vxx + m.gamma) - 2.0 * (m.eta2 + pen.beta2)
    g1 = -m.eta0 - Vx
    g2 = -m.eta0 - Vx + m.m0 * m.m1 * (Vxx + m.gamma) + rs
    det = h11 * h22 - h12 * h12
    v = (-g1 * h22 + g2 * h12) / det
    L = (-g2 * h11 + g1 * h12) / det
    fill = m.m0 + m.m1 * L
    h = m.temporary_impact(v, L)
    g = (m.mu * x + m.rho * m.sigma * m.m0 + rs * L + 0.5 * m.gamma * fill ** 2 + h * (v + L)
         + pen.alpha * v * L + pen.beta1 * (R1 - v * v) + pen.beta2 * (R2 - L * L))
    return -(v + L) * Vx + 0.5 * fill ** 2 * Vxx + g, v, L


def hjb_residual(coeffs: ValueCoefficients, t, x):
    """V_t + sup[...] (+ tracking penalty) at (t, x); zero for an exact solution.

    V_t comes from spline derivatives of the sampled coefficients. Broadcasts
    over ``t`` and ``x``.
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    a, b, c = coeffs.at(t)
    da, db, dc = coeffs.derivatives(t)
    Vt = da * x * x + db * x + dc
    H, _, _ = hamiltonian_sup(coeffs.model, coeffs.pen, x, 2.0 * a * x + b, 2.0 * a, coeffs.cross_term)
    if coeffs.schedule is not None and coeffs.weight is not None:
        H = H - coeffs.weight(t) * (x - coeffs.schedule(t)) ** 2
    out = Vt + H
    return float(out) if out.ndim == 0 else out
