"""Several buyers, one object.

A lower-efficient mechanism never gives the object to a buyer whose type is
weakly below another buyer's.  ``lower_efficient_extend`` builds one from a
one-buyer optimum: the highest buyer faces the one-buyer optimal mechanism
for types restricted to lie above everybody else.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .errors import NonmonotoneHazard
from .mechanism import StepMechanism, TabulatedView
from .optimizer import SolveOptions, deterministic_optimal, solve_optimal
from .prefdomain import ORIGIN, Bundle, PreferenceFamily
from .typedist import TypeDistribution
from .verifier import Counterexample, check_sp_grid

SHARD_SIZE = 10_000


@dataclass(frozen=True)
class BuyerProfile:
    indices: tuple

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(float(x) for x in self.indices))
        if not self.indices:
            raise ValueError("a profile needs at least one buyer")

    def check(self, support):
        lo, hi = support
        for x in self.indices:
            if not lo - 1e-12 <= x <= hi + 1e-12:
                raise ValueError(f"reported index {x} outside [{lo}, {hi}]")
        return self

    def __len__(self):
        return len(self.indices)


@dataclass(frozen=True)
class AuctionOutcome:
    """Per-buyer ``(T_i, Q_i)``; total win probability at most one."""

    allocations: tuple

    def __post_init__(self):
        allocs = tuple(b if isinstance(b, Bundle) else Bundle(*b) for b in self.allocations)
        object.__setattr__(self, "allocations", allocs)
        if sum(b.q for b in allocs) > 1.0 + 1e-12:
            raise ValueError("win probabilities sum above one")

    @property
    def payments(self) -> np.ndarray:
        return np.array([b.t for b in self.allocations])

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([b.q for b in self.allocations])

    @property
    def revenue(self) -> float:
        return float(self.payments.sum())


def _as_profile(profile) -> BuyerProfile:
    return profile if isinstance(profile, BuyerProfile) else BuyerProfile(tuple(profile))


# ---------------------------------------------------------------------------
# one-buyer rule factories: lower support bound -> StepMechanism


def deterministic_rule(family: PreferenceFamily, dist: TypeDistribution) -> Callable[[float], StepMechanism]:
    """Posted-price optimum for types conditioned to lie above ``lo``."""

    @lru_cache(maxsize=65536)
    def rule(lo: float) -> StepMechanism:
        return deterministic_optimal(family, dist.restrict(lo), verify_grid=None).mechanism

    return rule


def optimal_rule(
    family: PreferenceFamily, dist: TypeDistribution, l: int, options: SolveOptions | None = None
) -> Callable[[float], StepMechanism]:
    """``l``-bundle optimum for types conditioned to lie above ``lo``."""

    @lru_cache(maxsize=4096)
    def rule(lo: float) -> StepMechanism:
        return solve_optimal(family, dist.restrict(lo), l, options).mechanism

    return rule


def lower_efficient_extend(
    family: PreferenceFamily, dist: TypeDistribution, profile, one_buyer_rule: Callable[[float], StepMechanism]
) -> AuctionOutcome:
    """Only a unique strict maximiser can win; it faces the one-buyer
    optimum on ``[max of the others, hi]``.  Ties sell nothing."""
    p = _as_profile(profile).check(dist.support)
    x = p.indices
    out = []
    for i, xi in enumerate(x):
        others = x[:i] + x[i + 1:]
        cut = max(others) if others else dist.lo
        if others and xi <= cut:
            out.append(ORIGIN)
            continue
        out.append(one_buyer_rule(max(cut, dist.lo)).evaluate(xi))
    return AuctionOutcome(tuple(out))


@lru_cache(maxsize=256)
def myerson_reserve(dist: TypeDistribution) -> float:
    """Root of the virtual value, or the bottom of the support if it is already nonnegative."""
    if not dist.is_monotone_hazard():
        raise NonmonotoneHazard("the hazard rate is not monotone; the reserve rule does not apply")
    if dist.virtual_value(dist.lo) >= 0.0:
        return float(dist.lo)
    return float(brentq(dist.virtual_value, dist.lo, dist.hi, xtol=1e-14, rtol=4 * np.finfo(float).eps))


def myerson_two_buyer(dist: TypeDistribution, profile) -> AuctionOutcome:
    """Highest type wins if above the reserve and pays ``max(reserve, runner-up)``."""
    p = _as_profile(profile).check(dist.support)
    r = myerson_reserve(dist)
    x = p.indices
    out = []
    for i, xi in enumerate(x):
        others = x[:i] + x[i + 1:]
        price = max([r, *others])
        out.append(Bundle(price, 1.0) if xi > price else ORIGIN)
    return AuctionOutcome(tuple(out))


# ---------------------------------------------------------------------------
# rule objects for simulation and checking


class AuctionRule:
    """Maps a profile to an outcome; ``outcomes_many`` may be vectorised."""

    name = "rule"

    def __call__(self, profile) -> AuctionOutcome:
        raise NotImplementedError

    def outcomes_many(self, profiles: np.ndarray):
        res = [self(row) for row in profiles]
        return np.array([r.payments for r in res]), np.array([r.probabilities for r in res])

    def breakpoints(self, others) -> tuple:
        return tuple(others)


class ZeroRule(AuctionRule):
    name = "zero"

    def __call__(self, profile):
        return AuctionOutcome(tuple(ORIGIN for _ in _as_profile(profile).indices))

    def outcomes_many(self, profiles):
        z = np.zeros(np.shape(profiles))
        return z, z.copy()


class MyersonRule(AuctionRule):
    name = "myerson"

    def __init__(self, dist: TypeDistribution):
        self.dist = dist

    def __call__(self, profile):
        return myerson_two_buyer(self.dist, profile)

    def outcomes_many(self, profiles):
        x = np.asarray(profiles, float)
        r = myerson_reserve(self.dist)
        n = x.shape[1]
        if n == 1:
            price = np.full_like(x, r)
        else:
            price = np.empty_like(x)
            for i in range(n):
                price[:, i] = np.maximum(r, np.delete(x, i, axis=1).max(axis=1))
        win = x > price
        return np.where(win, price, 0.0), win.astype(float)

    def breakpoints(self, others):
        return (myerson_reserve(self.dist), *others)


class LowerEfficientRule(AuctionRule):
    name = "lower_efficient"

    def __init__(self, family: PreferenceFamily, dist: TypeDistribution, one_buyer_rule=None):
        self.family, self.dist = family, dist
        self.one_buyer_rule = one_buyer_rule or deterministic_rule(family, dist)

    def __call__(self, profile):
        return lower_efficient_extend(self.family, self.dist, profile, self.one_buyer_rule)

    def breakpoints(self, others):
        cut = max([self.dist.lo, *others])
        if cut >= self.dist.hi:
            return tuple(others)
        return (*self.one_buyer_rule(cut).thresholds, *others)


class MenuRule(AuctionRule):
    """A single buyer facing a fixed step mechanism."""

    name = "menu"

    def __init__(self, mechanism: StepMechanism):
        self.mechanism = mechanism

    def __call__(self, profile):
        (x,) = _as_profile(profile).indices
        return AuctionOutcome((self.mechanism.evaluate(x),))

    def outcomes_many(self, profiles):
        t, q = self.mechanism.evaluate_many(np.asarray(profiles, float)[:, 0])
        return t[:, None], q[:, None]

    def breakpoints(self, others):
        return self.mechanism.thresholds


# ---------------------------------------------------------------------------
# simulation


@dataclass(frozen=True)
class SimulationResult:
    mean: float
    stderr: float
    samples: int
    seed: int
    max_total_q: float

    def to_record(self) -> dict:
        return {
            "type": "simulation",
            "mean_revenue": self.mean,
            "stderr": self.stderr,
            "samples": self.samples,
            "seed": self.seed,
            "max_total_q": self.max_total_q,
        }


def simulate(
    family: PreferenceFamily,
    dist: TypeDistribution,
    n_buyers: int,
    rule: AuctionRule,
    samples: int,
    seed: int,
    workers: int = 1,
) -> SimulationResult:
    """Monte Carlo revenue with i.i.d. inverse-CDF draws.

    Samples are split into shards of 10^4; each shard draws from its own
    child of ``SeedSequence(seed)``, and shards are combined in shard order,
    so the result does not depend on ``workers``.
    """
    if samples < 1:
        raise ValueError("samples must be at least 1")
    sizes = [SHARD_SIZE] * (samples // SHARD_SIZE)
    if samples % SHARD_SIZE:
        sizes.append(samples % SHARD_SIZE)
    children = np.random.SeedSequence(seed).spawn(len(sizes))

    def shard(k):
        rng = np.random.Generator(np.random.PCG64(children[k]))
        profiles = np.asarray(dist.ppf(rng.random((sizes[k], n_buyers))), float).reshape(sizes[k], n_buyers)
        t, q = rule.outcomes_many(profiles)
        return np.asarray(t, float).sum(axis=1), float(np.max(np.asarray(q, float).sum(axis=1)))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(shard, range(len(sizes))))
    else:
        parts = [shard(k) for k in range(len(sizes))]
    rev = np.concatenate([p[0] for p in parts])
    max_q = max(p[1] for p in parts)
    if max_q > 1.0 + 1e-12:
        raise ValueError("a sampled outcome allocated more than one object")
    stderr = float(rev.std(ddof=1) / np.sqrt(rev.size)) if rev.size > 1 else 0.0
    return SimulationResult(float(rev.mean()), stderr, int(rev.size), int(seed), max_q)


# ---------------------------------------------------------------------------
# strategy-proofness against a grid of opponents


@dataclass(frozen=True)
class MultiBuyerCounterexample:
    buyer: int
    opponent_index: float
    cx: Counterexample

    def to_record(self) -> dict:
        return {"buyer": self.buyer, "opponent_index": self.opponent_index, **self.cx.to_record()}


def option_view(rule: AuctionRule, family: PreferenceFamily, support, buyer: int, opponent: float) -> TabulatedView:
    """Buyer ``buyer``'s outcome as a function of its own report, opponent fixed."""

    def induced(x):
        prof = (x, opponent) if buyer == 0 else (opponent, x)
        return rule(prof).allocations[buyer]

    lo, hi = support
    bps = tuple(b for b in rule.breakpoints((opponent,)) if lo <= b <= hi)
    return TabulatedView(family, induced, support, bps, name=f"options_{buyer}@{opponent:.6g}")


def check_sp_multibuyer(
    rule: AuctionRule,
    family: PreferenceFamily,
    dist: TypeDistribution,
    grid_n: int = 200,
    opponent_n: int = 41,
    tol: float = 1e-7,
):
    """Two buyers: for each opponent grid type run the one-buyer grid check
    on both buyers' induced option maps."""
    found = []
    for opp in np.linspace(dist.lo, dist.hi, opponent_n):
        for buyer in (0, 1):
            view = option_view(rule, family, dist.support, buyer, float(opp))
            res = check_sp_grid(view, family, grid_n, tol)
            found.extend(MultiBuyerCounterexample(buyer, float(opp), c) for c in res.counterexamples)
    return not found, found
