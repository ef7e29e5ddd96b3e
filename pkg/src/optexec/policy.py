"""Optimal feedback rates, the buy-sell boundary and the infinite-uncertainty limit."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .ode import CROSS_TERMS, ValueCoefficients
from .params import (
    ModelParams,
    ParameterError,
    PenaltyParams,
    compute_C,
    footnote_regime,
    t_crit,
)

BOUNDARY_CLASSES = ("non-increasing", "non-decreasing", "mixed")


@dataclass(frozen=True)
class PolicyEvaluation:
    t: float
    x: float
    v: float
    L: float
    delta: float
    psi: float
    boundary: float | None
    exceeds_caps: bool


def _delta(model: ModelParams, pen: PenaltyParams, psi):
    return (2.0 * (model.eta1 + pen.beta1) * (2.0 * (model.eta2 + pen.beta2) - psi)
            - (model.eta1 + model.eta2 - pen.alpha) ** 2)


def feedback_rates(model: ModelParams, pen: PenaltyParams, a, b, x):
    """(v*, L*) for V_x = 2 a x + b, V_xx = 2a. Broadcasts over arrays."""
    ag = 2.0 * a + model.gamma
    psi = model.m1 ** 2 * ag
    p = 2.0 * a * x + b + model.eta0
    k = model.m0 * model.m1 * ag + model.rho * model.sigma * model.m1
    delta = _delta(model, pen, psi)
    v = ((psi + model.eta1 - model.eta2 - 2.0 * pen.beta2 - pen.alpha) * p
         - (model.eta1 + model.eta2 - pen.alpha) * k) / delta
    L = ((model.eta2 - model.eta1 - pen.alpha - 2.0 * pen.beta1) * p
         + 2.0 * (model.eta1 + pen.beta1) * k) / delta
    return v, L


def optimal_controls(coeffs: ValueCoefficients, t: float, x: float) -> PolicyEvaluation:
    """Optimal market and limit order rates at state (t, x)."""
    model, pen = coeffs.model, coeffs.pen
    a, b, _ = (float(v) for v in coeffs.at(t))
    psi = model.m1 ** 2 * (2.0 * a + model.gamma)
    delta = float(_delta(model, pen, psi))
    tol = 1e-12 * 2.0 * (model.eta1 + pen.beta1) * max(abs(compute_C(model, pen)), 1e-300)
    if not delta > tol:
        raise ParameterError(f"degenerate Hessian at t={t!r}: determinant {delta!r}")
    v, L = feedback_rates(model, pen, a, b, x)
    boundary = None
    if model.m1 == 0.0 and (model.eta1 == model.eta2 or footnote_regime(model, pen)):
        boundary = -(b + model.eta0) / (2.0 * a)
    R1, R2 = pen.caps(model)
    exceeds = bool(v * v > R1 or L * L > R2)
    return PolicyEvaluation(float(t), float(x), float(v), float(L), delta, float(psi), boundary, exceeds)


@dataclass(frozen=True)
class BoundaryProfile:
    grid: np.ndarray
    P: np.ndarray
    classification: str
    terminal_target: float
    regime: str


def _boundary_parts(model: ModelParams, pen: PenaltyParams, cross_term: str):
    if model.m1 != 0.0:
        raise ParameterError("the buy-sell boundary is defined for m1 = 0")
    if cross_term not in CROSS_TERMS:
        raise ValueError(f"cross_term must be one of {CROSS_TERMS}")
    C = compute_C(model, pen)
    u = model.eta1 + pen.beta1
    s = pen.alpha + pen.beta1 + pen.beta2
    e = model.eta2 - model.eta1 - pen.alpha - 2.0 * pen.beta1
    m_sel = model.m1 if cross_term == "m1" else model.m0
    k0 = model.rho * model.sigma * m_sel
    return C, u, s, e, k0, t_crit(model, pen)


def _regime(model: ModelParams, pen: PenaltyParams) -> str:
    if model.eta1 == model.eta2:
        return "equal-impact"
    if footnote_regime(model, pen):
        warnings.warn("eta1 != eta2: boundary sign linkage relies on the relaxed inequalities",
                      stacklevel=3)
        return "footnote-regime"
    warnings.warn("eta1 != eta2 and the relaxed inequalities fail: rates need not share a sign",
                  stacklevel=3)
    return "unlinked"


def boundary_value(model: ModelParams, pen: PenaltyParams, t, cross_term: str = "m1"):
    """P(t): holdings level where both optimal rates vanish (m1 = 0)."""
    C, u, s, e, k0, tc = _boundary_parts(model, pen, cross_term)
    t = np.asarray(t, dtype=float)
    T = model.T
    return (s * model.mu * ((tc - t) ** 2 - (tc - T) ** 2) / (2.0 * u * C)
            - e * k0 * (T - t) / (2.0 * u * C)
            + model.eta0 / (2.0 * pen.beta - model.gamma))


def boundary_slope(model: ModelParams, pen: PenaltyParams, t, cross_term: str = "m1"):
    C, u, s, e, k0, tc = _boundary_parts(model, pen, cross_term)
    t = np.asarray(t, dtype=float)
    return -s * model.mu * (tc - t) / (u * C) + e * k0 / (2.0 * u * C)


def _classify(slopes) -> str:
    slopes = np.asarray(slopes)
    if np.all(slopes <= 0.0):
        return "non-increasing"
    if np.all(slopes >= 0.0):
        return "non-decreasing"
    return "mixed"


def buy_sell_boundary(model: ModelParams, pen: PenaltyParams, grid=None,
                      cross_term: str = "m1") -> BoundaryProfile:
    """Sampled boundary with its monotonicity class and terminal target."""
    _boundary_parts(model, pen, cross_term)
    regime = _regime(model, pen)
    if grid is None:
        grid = np.linspace(0.0, model.T, 3601)
    grid = np.asarray(grid, dtype=float)
    P = boundary_value(model, pen, grid, cross_term)
    target = model.eta0 / (2.0 * pen.beta - model.gamma)
    if grid[-1] == model.T:
        P[-1] = target
    cls = _classify(boundary_slope(model, pen, grid, cross_term))
    return BoundaryProfile(grid, P, cls, target, regime)


@dataclass(frozen=True)
class MonotonicityClass:
    classification: str
    rho_non_increasing: float | None
    rho_non_decreasing: float | None


def classify_boundary_monotonicity(model: ModelParams, pen: PenaltyParams,
                                   cross_term: str = "m1") -> MonotonicityClass:
    """Monotonicity of P on [0, T] and the |rho| thresholds that guarantee it.

    P is quadratic in t, so P' is affine and its signs at t = 0 and t = T
    decide the class. The thresholds are the |rho| at which P'(T) = 0 (below
    it P is non-increasing) and P'(0) = 0 (above it P is non-decreasing),
    assuming adverse selection. They are None when rho does not move the
    boundary (mu = 0, or the selected cross-term coefficient is zero).
    """
    C, u, s, e, k0, tc = _boundary_parts(model, pen, cross_term)
    T = model.T
    cls = _classify(boundary_slope(model, pen, np.array([0.0, T]), cross_term))
    m_sel = model.m1 if cross_term == "m1" else model.m0
    if model.mu == 0.0 or e * model.sigma * m_sel == 0.0:
        return MonotonicityClass(cls, None, None)
    denom = abs(e * model.sigma * m_sel)
    two_b_g = 2.0 * pen.beta - model.gamma
    rho_inc = abs(2.0 * u * C * model.mu / two_b_g) / denom
    rho_dec = abs(2.0 * s * model.mu * tc) / denom
    return MonotonicityClass(cls, rho_inc, rho_dec)


def infinite_uncertainty_policy(model: ModelParams, pen: PenaltyParams, t, x, form: str = "limit"):
    """Rates in the m1 -> infinity limit: market orders only.

    ``form="limit"`` is v* = -(V_x + eta0) / (2(eta1 + beta1)) evaluated on the
    limiting coefficients, which simplifies to

        (x - eta0/(2 beta - gamma)) (2 beta - gamma) / (2(eta1 + beta1) + (T - t)(2 beta - gamma)).

    ``form="printed"`` uses eta0/(eta1 + beta1) in place of eta0/(2 beta - gamma),
    the widely quoted simplification, which the large-m1 numerical solutions
    do not converge to.
    """
    if model.m0 != 0.0 or model.mu != 0.0:
        raise ParameterError("the infinite-uncertainty limit assumes m0 = 0 and mu = 0")
    if form not in ("limit", "printed"):
        raise ValueError(f"unknown form {form!r}")
    u = model.eta1 + pen.beta1
    two_b_g = 2.0 * pen.beta - model.gamma
    zero = model.eta0 / two_b_g if form == "limit" else model.eta0 / u
    t = np.asarray(t, dtype=float)
    v = (np.asarray(x, dtype=float) - zero) * two_b_g / (2.0 * u + (model.T - t) * two_b_g)
    return v, np.zeros_like(v)


def policy_grid(coeffs: ValueCoefficients, t, x) -> np.ndarray:
    """Rows (t, x, vStar, lStar, delta) over the product of time and position samples."""
    model, pen = coeffs.model, coeffs.pen
    tt, xx = np.meshgrid(np.asarray(t, dtype=float), np.asarray(x, dtype=float), indexing="ij")
    a, b, _ = coeffs.at(tt.ravel())
    v, L = feedback_rates(model, pen, a, b, xx.ravel())
    delta = _delta(model, pen, model.m1 ** 2 * (2.0 * a + model.gamma))
    return np.column_stack([tt.ravel(), xx.ravel(), v, L, delta])


def write_policy_grid_csv(rows: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x", "vStar", "lStar", "delta"])
        w.writerows((repr(float(v)) for v in r) for r in rows)


def write_boundary_csv(profile: BoundaryProfile, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "P"])
        w.writerows((repr(float(t)), repr(float(p))) for t, p in zip(profile.grid, profile.P))
