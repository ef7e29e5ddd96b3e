"""Model and penalty parameters, derived constants and validity checks.

All time quantities are in seconds, positions in shares and prices in
$/share. Constructing a parameter object never fails; the checks in
:func:`validity_report` are what the solvers and the simulator consult
before doing any work.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np


class ParameterError(ValueError):
    """A formula was asked for outside the parameter region where it holds."""


class InfeasibleParametersError(ParameterError):
    """Raised by solve/simulate entry points when a hard check fails."""

    def __init__(self, report: "ValidityReport"):
        self.report = report
        names = ", ".join(c.name for c in report.failures())
        super().__init__(f"hard validity checks failed: {names}")


@dataclass(frozen=True)
class ModelParams:
    """Exogenous market parameters.

    Attributes:
        mu: price drift, $/share/sec.
        sigma: price volatility, $/share/sec^0.5.
        gamma: permanent impact, $/share^2.
        eta0: fixed temporary impact, $/share.
        eta1: market-order temporary impact, ($/share)/(share/sec).
        eta2: limit-order temporary impact, ($/share)/(share/sec).
        rho: correlation between fill noise and price noise.
        m0: constant fill-uncertainty coefficient, share/sec^0.5.
        m1: linear fill-uncertainty coefficient, sec^0.5.
        T: horizon, sec.
        x0: initial position, shares.
        S0: initial price, $/share.
    """

    mu: float = 1e-6
    sigma: float = 0.005
    gamma: float = 2.5e-7
    eta0: float = 0.05
    eta1: float = 0.1
    eta2: float = 0.08
    rho: float = -0.2
    m0: float = 0.0
    m1: float = 0.0
    T: float = 3600.0
    x0: float = 10_000.0
    S0: float = 40.0

    @property
    def mode(self) -> str:
        """Uncertainty regime implied by the (m0, m1) zero pattern."""
        if self.m1 == 0.0:
            return "none" if self.m0 == 0.0 else "constant"
        return "linear" if self.m0 == 0.0 else "affine"

    def with_fractions(self, p0: float = 0.0, p1: float = 0.0) -> "ModelParams":
        """Return a copy with m0 = p0 x0 / sqrt(T) and m1 = p1 sqrt(T)."""
        m0, m1 = uncertainty_from_fractions(p0, p1, self.x0, self.T)
        return replace(self, m0=m0, m1=m1)

    def fill_noise(self, L):
        """m(L) = m0 + m1 L."""
        return self.m0 + self.m1 * L

    def temporary_impact(self, v, L):
        """h(v, L) = -eta0 - eta1 v - eta2 L."""
        return -self.eta0 - self.eta1 * v - self.eta2 * L


def uncertainty_from_fractions(p0: float, p1: float, x0: float, T: float) -> tuple[float, float]:
    """Convert unitless uncertainty fractions into (m0, m1)."""
    return p0 * x0 / math.sqrt(T), p1 * math.sqrt(T)


@dataclass(frozen=True)
class PenaltyParams:
    """Lagrange multipliers and penalty coefficients.

    ``R1`` and ``R2`` are the squared speed caps. When left as ``None`` they
    resolve to ``(x0/T)**2``, the TWAP rate squared. They only shift the
    level of c(t), never the controls.
    """

    alpha: float = 0.15
    beta: float = 1e-3
    beta1: float = 5e-4
    beta2: float = 1e-4
    R1: float | None = None
    R2: float | None = None

    def caps(self, model: ModelParams) -> tuple[float, float]:
        default = (model.x0 / model.T) ** 2
        R1 = default if self.R1 is None else self.R1
        R2 = default if self.R2 is None else self.R2
        return R1, R2


def aux_K(model: ModelParams, pen: PenaltyParams) -> float:
    """K = (eta1 + beta1)(eta2 + beta2)."""
    return (model.eta1 * model.eta2 + pen.beta1 * pen.beta2
            + model.eta1 * pen.beta2 + model.eta2 * pen.beta1)


def compute_C(model: ModelParams, pen: PenaltyParams) -> float:
    """Composite impact/penalty constant appearing in every coefficient ODE."""
    K = aux_K(model, pen)
    return (4.0 * K - (model.eta1 + model.eta2 - pen.alpha) ** 2) / (2.0 * (model.eta1 + pen.beta1))


def admissible_alpha_interval(model: ModelParams, pen: PenaltyParams) -> tuple[float, float]:
    """Open interval of trade-director weights for which C > 0."""
    half = 2.0 * math.sqrt(aux_K(model, pen))
    centre = model.eta1 + model.eta2
    return centre - half, centre + half


def second_order_condition(a_value, model: ModelParams, pen: PenaltyParams):
    """True where 2 m1^2 a < C - gamma m1^2 (strict). Works elementwise."""
    m1sq = model.m1 ** 2
    out = 2.0 * m1sq * np.asarray(a_value, dtype=float) < compute_C(model, pen) - model.gamma * m1sq
    return bool(out) if out.ndim == 0 else out


def hessian(a_value: float, model: ModelParams, pen: PenaltyParams) -> np.ndarray:
    """Hessian of the control objective in (v, L) for V_xx = 2a."""
    psi = model.m1 ** 2 * (2.0 * a_value + model.gamma)
    off = pen.alpha - (model.eta1 + model.eta2)
    return np.array([[-2.0 * (model.eta1 + pen.beta1), off],
                     [off, psi - 2.0 * (model.eta2 + pen.beta2)]])


def hessian_eigenvalues(a_value: float, model: ModelParams, pen: PenaltyParams) -> tuple[float, float]:
    """Closed-form eigenvalues (u_minus, u_plus) of :func:`hessian`."""
    psi = model.m1 ** 2 * (2.0 * a_value + model.gamma)
    centre = -model.eta1 - model.eta2 - pen.beta1 - pen.beta2 + psi / 2.0
    radius = math.hypot(psi / 2.0 + model.eta1 - model.eta2 + pen.beta1 - pen.beta2,
                        model.eta1 + model.eta2 - pen.alpha)
    return centre - radius, centre + radius


def _require_beta(model: ModelParams, pen: PenaltyParams) -> None:
    if not pen.beta > model.gamma / 2.0:
        raise ParameterError(
            f"beta={pen.beta!r} must exceed gamma/2={model.gamma / 2.0!r}")


def t_crit(model: ModelParams, pen: PenaltyParams) -> float:
    """Blow-up time of the constant-uncertainty a(t); lies beyond T."""
    if model.m1 != 0.0:
        raise ParameterError("t_crit is defined for constant uncertainty (m1 = 0)")
    _require_beta(model, pen)
    C = compute_C(model, pen)
    s = pen.alpha + pen.beta1 + pen.beta2
    return model.T + (model.eta1 + pen.beta1) * C / (s * (2.0 * pen.beta - model.gamma))


def t_max(model: ModelParams, pen: PenaltyParams) -> float:
    """Longest admissible horizon under linear uncertainty.

    Returns ``math.inf`` when C >= gamma m1^2. The bound is exact when
    2(alpha + beta1 + beta2) = C; otherwise it is the same expression
    evaluated at the supplied multipliers.
    """
    if model.m0 != 0.0:
        raise ParameterError("t_max is defined for linear uncertainty (m0 = 0)")
    _require_beta(model, pen)
    C = compute_C(model, pen)
    g_m1 = model.gamma * model.m1 ** 2
    if C >= g_m1:
        return math.inf
    u = model.eta1 + pen.beta1
    num = 4.0 * model.m1 ** 2 * u * (pen.beta - model.gamma) + 2.0 * u * C
    return num / ((g_m1 - C) * (2.0 * pen.beta - model.gamma))


def beta_floor(model: ModelParams, pen: PenaltyParams, T: float | None = None) -> float:
    """Lower bound on beta under linear uncertainty for horizon ``T``."""
    if model.m0 != 0.0:
        raise ParameterError("beta_floor is defined for linear uncertainty (m0 = 0)")
    T = model.T if T is None else T
    C = compute_C(model, pen)
    u = model.eta1 + pen.beta1
    gap = model.gamma * model.m1 ** 2 - C
    denom = 2.0 * model.m1 ** 2 * u - gap * T
    if not denom > 0.0:
        raise ParameterError(
            f"horizon T={T!r} is infeasible for every beta (denominator {denom!r} <= 0)")
    return model.gamma / 2.0 + max(gap * u / denom, 0.0)


def enforce_explicit_linear_condition(model: ModelParams, pen: PenaltyParams) -> PenaltyParams:
    """Pick alpha so that 2(alpha + beta1 + beta2) = C with beta1, beta2 fixed.

    Written out, the condition is alpha^2 + (4u - 2s) alpha + s^2 + 4u(beta1 - eta2) = 0
    with u = eta1 + beta1 and s = eta1 + eta2. Its discriminant vanishes
    identically, so the only root is alpha = eta2 - eta1 - 2 beta1. That root is
    admissible iff eta1 + beta1 < eta2 + beta2 and it is non-negative.
    """
    u = model.eta1 + pen.beta1
    s = model.eta1 + model.eta2
    b = 4.0 * u - 2.0 * s
    c = s * s + 4.0 * u * (pen.beta1 - model.eta2)
    disc = b * b - 4.0 * c
    # the discriminant is zero up to rounding
    if disc < -1e-12 * max(b * b, abs(4.0 * c), 1e-300):
        raise ParameterError("no real alpha satisfies 2(alpha+beta1+beta2) = C")
    alpha = s - 2.0 * u
    lo, hi = admissible_alpha_interval(model, pen)
    if not (lo < alpha < hi) or alpha < 0.0:
        raise ParameterError(
            f"root alpha={alpha!r} lies outside the admissible interval ({lo!r}, {hi!r}) "
            "or is negative; adjust beta1/beta2")
    return replace(pen, alpha=alpha)


def explicit_linear_condition_holds(model: ModelParams, pen: PenaltyParams, rtol: float = 1e-10) -> bool:
    C = compute_C(model, pen)
    return abs(2.0 * (pen.alpha + pen.beta1 + pen.beta2) - C) <= rtol * abs(C)


def adverse_selection(model: ModelParams) -> bool:
    """rho m(L) < 0 for every L >= 0."""
    r0, r1 = model.rho * model.m0, model.rho * model.m1
    return r0 <= 0.0 and r1 <= 0.0 and (r0 < 0.0 or r1 < 0.0)


def footnote_regime(model: ModelParams, pen: PenaltyParams) -> bool:
    """Sign-linkage conditions that replace eta1 == eta2 for the boundary."""
    d = model.eta1 - model.eta2
    return d < 2.0 * pen.beta2 + pen.alpha and -d < 2.0 * pen.beta1 + pen.alpha


@dataclass(frozen=True)
class DerivedConstants:
    C: float
    K: float
    alpha_interval: tuple[float, float]
    t_crit: float | None
    t_max: float | None
    beta_floor: float


def derived_constants(model: ModelParams, pen: PenaltyParams) -> DerivedConstants:
    """Bundle of the constants that apply to the current uncertainty regime.

    Entries that are undefined for the regime (or for beta <= gamma/2) are None.
    ``beta_floor`` is gamma/2 outside the linear regime.
    """
    tc = tm = None
    floor = model.gamma / 2.0
    if model.m1 == 0.0 and pen.beta > model.gamma / 2.0 and pen.alpha + pen.beta1 + pen.beta2 > 0.0:
        tc = t_crit(model, pen)
    if model.mode == "linear" and pen.beta > model.gamma / 2.0:
        tm = t_max(model, pen)
        try:
            floor = beta_floor(model, pen)
        except ParameterError:
            floor = math.inf
    return DerivedConstants(C=compute_C(model, pen), K=aux_K(model, pen),
                            alpha_interval=admissible_alpha_interval(model, pen),
                            t_crit=tc, t_max=tm, beta_floor=floor)


@dataclass
class Check:
    name: str
    passed: bool
    value: object
    bound: object
    hard: bool = True
    note: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["value"] = _jsonable(self.value)
        d["bound"] = _jsonable(self.bound)
        return d


def _jsonable(x):
    if isinstance(x, (tuple, list)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, np.bool_):
        return bool(x)
    return x


@dataclass
class ValidityReport:
    checks: list[Check] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures()

    def failures(self) -> list[Check]:
        return [c for c in self.checks if c.hard and not c.passed]

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def names(self) -> list[str]:
        return [c.name for c in self.checks]

    def to_dict(self) -> dict:
        return {"ok": self.ok, "checks": [c.to_dict() for c in self.checks]}


def validity_report(model: ModelParams, pen: PenaltyParams, a_samples=None) -> ValidityReport:
    """Run every check that applies to the regime of ``model``.

    Hard checks: parameter domain, beta > gamma/2, alpha inside the admissible
    interval (m1 = 0), T < T_max (linear regime) and, when ``a_samples`` is
    given, the second-order condition on the solved a(t). The second-order
    check is reported as skipped while an analytic hard check fails, so each
    perturbation trips exactly the check it targets.
    """
    rep = ValidityReport()
    bad = []
    for name, ok in [("sigma>=0", model.sigma >= 0), ("gamma>0", model.gamma > 0),
                     ("eta0>=0", model.eta0 >= 0), ("eta1>0", model.eta1 > 0),
                     ("eta2>0", model.eta2 > 0), ("T>0", model.T > 0),
                     ("|rho|<1", abs(model.rho) < 1), ("alpha>=0", pen.alpha >= 0),
                     ("beta1>=0", pen.beta1 >= 0), ("beta2>=0", pen.beta2 >= 0)]:
        if not ok:
            bad.append(name)
    rep.checks.append(Check("parameter_domain", not bad, bad, "all satisfied"))

    half_gamma = model.gamma / 2.0
    rep.checks.append(Check("beta_floor", pen.beta > half_gamma, pen.beta, half_gamma))

    C = compute_C(model, pen)
    if model.m1 == 0.0:
        lo, hi = admissible_alpha_interval(model, pen)
        rep.checks.append(Check("alpha_interval", lo < pen.alpha < hi, pen.alpha, (lo, hi),
                                note=f"C={C!r}"))
        if model.mode == "constant" and pen.beta > half_gamma and C > 0:
            rep.checks.append(Check("t_crit", True, t_crit(model, pen), model.T, hard=False,
                                    note="singularity of a(t) beyond the horizon"))
        rep.checks.append(Check("boundary_regime",
                                model.eta1 == model.eta2 or footnote_regime(model, pen),
                                model.eta1 - model.eta2, "eta1 == eta2 or footnote inequalities",
                                hard=False))
    if model.mode == "linear":
        if pen.beta > half_gamma:
            tm = t_max(model, pen)
            note = ""
            try:
                note = f"equivalent beta floor {beta_floor(model, pen)!r}"
            except ParameterError as exc:
                note = str(exc)
            rep.checks.append(Check("horizon", model.T < tm, model.T, tm, note=note))
        rep.checks.append(Check("explicit_linear_condition",
                                explicit_linear_condition_holds(model, pen),
                                2.0 * (pen.alpha + pen.beta1 + pen.beta2), C, hard=False))
    rep.checks.append(Check("adverse_selection", adverse_selection(model),
                            (model.rho * model.m0, model.rho * model.m1), "rho*m(L) < 0",
                            hard=False))

    if a_samples is not None:
        if rep.ok:
            a = np.asarray(a_samples, dtype=float)
            ok = second_order_condition(a, model, pen)
            bound = (C - model.gamma * model.m1 ** 2)
            rep.checks.append(Check("second_order", bool(np.all(ok)),
                                    float(np.max(2.0 * model.m1 ** 2 * a)), bound))
        else:
            rep.checks.append(Check("second_order", True, None, None, hard=False,
                                    note="skipped: analytic checks failed"))
    return rep


def require_valid(model: ModelParams, pen: PenaltyParams) -> ValidityReport:
    rep = validity_report(model, pen)
    if not rep.ok:
        raise InfeasibleParametersError(rep)
    return rep
