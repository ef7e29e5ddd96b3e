"""Scenario setups behind the published figures (parameters from the captions)."""

from __future__ import annotations

from dataclasses import replace

from .params import ModelParams, PenaltyParams
from .schedule import make_schedule, WeightSpec
from .simulator import Scenario, SimConfig

BASE = ModelParams()
PEN = PenaltyParams()
AFFINE = BASE.with_fractions(p0=0.05, p1=0.05)


def figure1(sim: SimConfig) -> list[Scenario]:
    """Constant, linear and no fill uncertainty on one noise panel."""
    return [
        Scenario("fig1-constant", BASE.with_fractions(p0=0.1), PEN, sim),
        Scenario("fig1-linear", BASE.with_fractions(p1=0.1), PEN, sim),
        Scenario("fig1-none", BASE, PEN, sim),
    ]


def figure2(sim: SimConfig) -> list[Scenario]:
    """Market orders costlier (left) versus limit orders costlier (right)."""
    return [
        Scenario("fig2-market-costly", replace(AFFINE, eta1=0.1, eta2=0.05), PEN, sim),
        Scenario("fig2-limit-costly", replace(AFFINE, eta1=0.05, eta2=0.1), PEN, sim),
    ]


def beta_sweep(sim: SimConfig, betas=(1e-4, 0.1)) -> list[Scenario]:
    return [Scenario(f"beta-{b:g}", AFFINE, replace(PEN, beta=b), sim) for b in betas]


def figure4(sim: SimConfig, w: float = 1e-4) -> list[Scenario]:
    """Unpenalized, linear-schedule and quadratic-schedule legs."""
    x0, T = AFFINE.x0, AFFINE.T
    wt = WeightSpec("constant", w)
    return [
        Scenario("fig4-unpenalized", AFFINE, PEN, sim, make_schedule("linear", x0, T),
                 WeightSpec("constant", 0.0)),
        Scenario("fig4-linear", AFFINE, PEN, sim, make_schedule("linear", x0, T), wt),
        Scenario("fig4-quadratic", AFFINE, PEN, sim, make_schedule("quadratic", x0, T), wt),
    ]


def figure5(sim: SimConfig, w: float = 1e-4) -> list[Scenario]:
    x0, T = AFFINE.x0, AFFINE.T
    lin = make_schedule("linear", x0, T)
    return [
        Scenario("fig5-unpenalized", AFFINE, PEN, sim, lin, WeightSpec("constant", 0.0)),
        Scenario("fig5-penalized", AFFINE, PEN, sim, lin, WeightSpec("constant", w)),
    ]


def figure_scenarios(sim: SimConfig | None = None) -> list[Scenario]:
    sim = sim or SimConfig(n_steps=3600, n_paths=100, seed=20240101)
    return figure1(sim) + figure2(sim) + beta_sweep(sim) + figure4(sim) + figure5(sim)


def boundary_scenarios(rhos=(-0.2, -0.0005), betas=(1e-3, 0.1)):
    """Equal-impact constant-uncertainty boundaries: (name, model, pen) triples."""
    model = replace(BASE, eta1=0.1, eta2=0.1).with_fractions(p0=0.1)
    return [(f"boundary-rho{r:g}-beta{b:g}", replace(model, rho=r), replace(PEN, beta=b))
            for r in rhos for b in betas]
