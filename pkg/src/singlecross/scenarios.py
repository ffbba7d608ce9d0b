"""Bundled scenarios: hand-built mechanisms with known defects and small
optimisation problems with known answers.

Each ``run_*`` function returns rows of expected-versus-computed values; the
CLI ``reproduce`` command prints them.  Scenario ids are stable strings so
that scripts can refer to them.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import UnknownExample
from .mechanism import TabulatedView
from .multibuyer import (
    LowerEfficientRule,
    MyersonRule,
    check_sp_multibuyer,
    deterministic_rule,
    lower_efficient_extend,
    myerson_reserve,
    myerson_two_buyer,
    simulate,
)
from .optimizer import SolveOptions, solve_optimal, union_slice_analysis
from .prefdomain import PreferenceFamily
from .typedist import AffineCDF, SliceMixture, Uniform
from .verifier import check_indirect_continuity, check_ir, check_monotone, check_sp_grid, deviation_gap


@dataclass(frozen=True)
class ReproRow:
    quantity: str
    expected: float | bool
    computed: float | bool
    tol: float = 0.0

    @property
    def passed(self) -> bool:
        if isinstance(self.expected, bool):
            return bool(self.computed) == self.expected
        return abs(float(self.computed) - float(self.expected)) <= self.tol

    def to_record(self) -> dict:
        return {
            "quantity": self.quantity,
            "expected": self.expected,
            "computed": self.computed,
            "tol": self.tol,
            "passed": self.passed,
        }


# ---------------------------------------------------------------------------
# hand-built mechanisms


def nonmonotone_continuous_mechanism(low: float = 1.2, high: float = 1.6, support=(1.0, 2.0)) -> TabulatedView:
    """Sell at ``low`` to low types, nothing in the middle, sell at ``high`` to
    high types.  Each switch happens where the buyer is indifferent, so the
    indirect utility is continuous, yet the map is not monotone."""
    fam = PreferenceFamily.linear(*support)

    def rule(x):
        if x <= low:
            return (low, 1.0)
        return (0.0, 0.0) if x < high else (high, 1.0)

    return TabulatedView(fam, rule, support, (low, high), name="nonmonotone_continuous")


def discontinuous_monotone_mechanism(jump: float = 0.8, support=(0.5, 2.0)) -> TabulatedView:
    """Switch from ``(0, 0)`` to ``(1, 1)`` at ``jump`` although the indifferent
    type is 1: monotone, but the indirect utility jumps."""
    fam = PreferenceFamily.linear(*support)
    return TabulatedView(fam, lambda x: (0.0, 0.0) if x < jump else (1.0, 1.0), support, (jump,), name="discontinuous_monotone")


def linear_continuum_mechanism() -> TabulatedView:
    """Types in [1, 2] are placed along the segment ``q = 3t``, at ``((x-1)/3, x-1)``."""
    fam = PreferenceFamily.linear(1.0, 2.0)
    return TabulatedView(fam, lambda x: ((x - 1.0) / 3.0, x - 1.0), (1.0, 2.0), name="linear_continuum")


def quadratic_payment_problem():
    return PreferenceFamily.quadratic_payment(1.0, 2.0), AffineCDF(1.0, 2.0)


def power_weighted_slices(weights=(0.5, 0.5)) -> SliceMixture:
    dist = AffineCDF(1.0, 5.0)
    return SliceMixture(
        (
            (PreferenceFamily.power_weighted(1.0, 5.0, a=0.5, c=0.5), dist, weights[0]),
            (PreferenceFamily.power_weighted(1.0, 5.0, a=1.0 / 3.0, c=1.0 / 3.0), dist, weights[1]),
        )
    )


# ---------------------------------------------------------------------------
# scenario runners


def run_income_effect(seed: int = 0, grid_n: int = 400) -> list[ReproRow]:
    """Raising quality from q1 to q2 costs less extra money for a buyer who already pays more."""
    fam = PreferenceFamily.quadratic_payment(0.1, 10.0)
    theta, q1, q2 = 2.0, 0.25, 0.75

    def extra(t):
        return float(fam.payment_for_label(theta, fam.label(theta, t, q1), q2)) - t

    low, high = extra(0.2), extra(0.6)
    return [
        ReproRow("extra payment from t=0.2", float(np.sqrt(0.04 + theta * (q2 - q1)) - 0.2), low, 1e-12),
        ReproRow("extra payment from t=0.6", float(np.sqrt(0.36 + theta * (q2 - q1)) - 0.6), high, 1e-12),
        ReproRow("richer buyer pays a smaller increment", True, high < low),
    ]


def run_nonmonotone(seed: int = 0, grid_n: int = 400) -> list[ReproRow]:
    view = nonmonotone_continuous_mechanism()
    return [
        ReproRow("monotone", False, check_monotone(view, grid_n).passed),
        ReproRow("indirect utility continuous", True, check_indirect_continuity(view, grid_n=grid_n).passed),
        ReproRow("strategy-proof on grid", False, check_sp_grid(view, grid_n=grid_n).passed),
    ]


def run_discontinuous(seed: int = 0, grid_n: int = 400) -> list[ReproRow]:
    view = discontinuous_monotone_mechanism()
    return [
        ReproRow("monotone", True, check_monotone(view, grid_n).passed),
        ReproRow("indirect utility continuous", False, check_indirect_continuity(view, grid_n=grid_n).passed),
        ReproRow("strategy-proof on grid", False, check_sp_grid(view, grid_n=grid_n).passed),
    ]


def run_not_sp(seed: int = 0, grid_n: int = 400) -> list[ReproRow]:
    view = linear_continuum_mechanism()
    sp = check_sp_grid(view, grid_n=grid_n, extra_points=(1.5,))
    return [
        ReproRow("individually rational", True, check_ir(view, grid_n=grid_n).passed),
        ReproRow("strategy-proof on grid", False, sp.passed),
        ReproRow("gain of type 1.5 reporting 2.0", 7.0 / 12.0, deviation_gap(view, 1.5, 2.0), 1e-12),
    ]


def run_optimal_quadratic(seed: int = 0, grid_n: int = 400) -> list[ReproRow]:
    fam, dist = quadratic_payment_problem()
    sol = solve_optimal(fam, dist, 3, SolveOptions(seed=seed, verify_grid=grid_n))
    distinct = sol.distinct_bundles()
    return [
        ReproRow("threshold 1", 1.0, sol.thresholds[0], 1e-3),
        ReproRow("threshold 2", 1.0, sol.thresholds[1], 1e-3),
        ReproRow("middle payment", 0.0, sol.payments[1], 1e-3),
        ReproRow("middle probability", 0.0, sol.probabilities[1], 1e-3),
        ReproRow("top payment", 1.0, sol.payments[2], 1e-3),
        ReproRow("objective", 1.0, sol.objective, 1e-3),
        ReproRow("distinct bundles", 2.0, float(len(distinct)), 0.0),
    ]


def run_union_slices(seed: int = 0, grid_n: int = 400) -> list[ReproRow]:
    rep = union_slice_analysis(power_weighted_slices(), 2, SolveOptions(seed=seed, verify_grid=grid_n))
    w = rep.witness_at(1, 2.5)
    rows = [
        ReproRow("slice 1 threshold", 2.5, rep.slices[0].thresholds[0], 1e-3),
        ReproRow("slice 2 threshold", 2.5, rep.slices[1].thresholds[0], 1e-3),
        ReproRow("slice 1 payment", 5.0, rep.slices[0].payments[-1], 1e-3),
        ReproRow("slice 2 payment", 7.5, rep.slices[1].payments[-1], 1e-3),
        ReproRow("slice 1 revenue", 3.125, rep.revenues[0], 1e-6),
        ReproRow("slice 2 revenue", 4.6875, rep.revenues[1], 1e-6),
        ReproRow("mixture revenue", 3.90625, rep.mixture_revenue, 1e-6),
        ReproRow("mixture strictly between slices", True, rep.strictly_between),
        ReproRow("combined menu not strategy-proof", True, not rep.combined_sp),
        ReproRow("witness at type 2.5 replays", True, w is not None and rep.replay(w) > 1e-7),
    ]
    if w is not None:
        rows.append(ReproRow("utility gain of type 2.5", 2.5 / 3.0, w.utility_gain, 1e-3))
    return rows


def run_two_buyer(seed: int = 0, grid_n: int = 200, profiles: int = 10_000, samples: int = 100_000) -> list[ReproRow]:
    fam, dist = PreferenceFamily.linear(0.0, 1.0), Uniform(0.0, 1.0)
    one = deterministic_rule(fam, dist)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    draws = rng.random((profiles, 2))
    alloc_ok, pay_gap = True, 0.0
    for row in draws:
        if row[0] == row[1]:
            continue
        a = lower_efficient_extend(fam, dist, row, one)
        b = myerson_two_buyer(dist, row)
        alloc_ok &= bool(np.array_equal(a.probabilities, b.probabilities))
        pay_gap = max(pay_gap, float(np.max(np.abs(a.payments - b.payments))))
    sim = simulate(fam, dist, 2, MyersonRule(dist), samples, seed)
    sp_ok, _ = check_sp_multibuyer(LowerEfficientRule(fam, dist, one), fam, dist, grid_n=grid_n)
    return [
        ReproRow("reserve", 0.5, myerson_reserve(dist), 1e-9),
        ReproRow("winner pays at (0.7, 0.6)", 0.6, lower_efficient_extend(fam, dist, (0.7, 0.6), one).payments[0], 1e-9),
        ReproRow("allocations agree on all profiles", True, alloc_ok),
        ReproRow("largest payment difference", 0.0, pay_gap, 1e-8),
        ReproRow("simulated revenue", 5.0 / 12.0, sim.mean, 3.0 * sim.stderr),
        ReproRow("lower-efficient rule strategy-proof", True, sp_ok),
    ]


SCENARIOS: dict[str, Callable[..., list[ReproRow]]] = {
    "EX_2_2_INCOME_EFFECT": run_income_effect,
    "EX_3_1_NONMONOTONE": run_nonmonotone,
    "EX_3_2_DISCONTINUOUS": run_discontinuous,
    "EX_3_3_NOT_SP": run_not_sp,
    "EX_3_4_OPTIMAL_QUADRATIC": run_optimal_quadratic,
    "SEC_5_2_UNION_SLICES": run_union_slices,
    "SEC_5_4_TWO_BUYER": run_two_buyer,
}


def run_scenario(scenario_id: str, seed: int = 0, grid_n: int | None = None) -> list[ReproRow]:
    try:
        fn = SCENARIOS[scenario_id]
    except KeyError:
        raise UnknownExample(f"unknown scenario {scenario_id!r}; known: {', '.join(SCENARIOS)}") from None
    return fn(seed=seed) if grid_n is None else fn(seed=seed, grid_n=grid_n)
