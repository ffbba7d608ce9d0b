"""Finite-range step mechanisms and tabulated mechanism views.

A step mechanism is an ordered menu ``z0 < z1 < ... < z_{l-1}`` together
with nondecreasing threshold indices ``th1 <= ... <= th_{l-1}``; the type
with index ``th_k`` is indifferent between ``z_{k-1}`` and ``z_k``.  Types in
``]th_k, th_{k+1}]`` receive ``z_k``.  At a threshold the lower bundle is
assigned, which is revenue-irrelevant because type distributions are
atomless.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from .errors import NotDiagonal, OutOfSupport, SupportMismatch, ThresholdNotIndifferent, ThresholdsDecreasing
from .prefdomain import LABEL_TOL, Bundle, PreferenceFamily
from .typedist import TypeDistribution

TIE_RULE = "LOWER_BUNDLE"
_SLACK = 1e-12


class MechanismView(Protocol):
    """Anything that maps an order index to a bundle on a closed support."""

    family: PreferenceFamily
    support: tuple[float, float]

    def evaluate(self, index: float) -> Bundle: ...

    def evaluate_many(self, indices) -> tuple[np.ndarray, np.ndarray]: ...

    @property
    def breakpoints(self) -> tuple[float, ...]: ...


def _check_support(support, index):
    lo, hi = support
    if not lo - _SLACK <= index <= hi + _SLACK:
        raise OutOfSupport(f"index {index} outside [{lo}, {hi}]")


@dataclass(frozen=True)
class StepMechanism:
    family: PreferenceFamily
    bundles: tuple
    thresholds: tuple
    support: tuple = None
    tie_rule: str = TIE_RULE

    def __post_init__(self):
        bundles = tuple(b if isinstance(b, Bundle) else Bundle(*b) for b in self.bundles)
        thresholds = tuple(float(x) for x in self.thresholds)
        support = (self.family.lo, self.family.hi) if self.support is None else tuple(map(float, self.support))
        object.__setattr__(self, "bundles", bundles)
        object.__setattr__(self, "thresholds", thresholds)
        object.__setattr__(self, "support", support)
        if not bundles:
            raise ValueError("a mechanism needs at least one bundle")
        if len(thresholds) != len(bundles) - 1:
            raise ValueError(f"{len(bundles)} bundles need {len(bundles) - 1} thresholds, got {len(thresholds)}")
        if self.tie_rule != TIE_RULE:
            raise ValueError(f"only the {TIE_RULE} tie rule is supported")
        lo, hi = support
        if not (self.family.lo - _SLACK <= lo < hi <= self.family.hi + _SLACK):
            raise OutOfSupport(f"support {support} not inside the family index range")

    @property
    def breakpoints(self) -> tuple:
        return self.thresholds

    @property
    def payments(self) -> np.ndarray:
        return np.array([b.t for b in self.bundles])

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([b.q for b in self.bundles])

    def cell_of(self, index: float) -> int:
        _check_support(self.support, index)
        # number of thresholds strictly below index -> lower bundle on ties
        return int(np.searchsorted(self.thresholds, index, side="left"))

    def evaluate(self, index: float) -> Bundle:
        return self.bundles[self.cell_of(index)]

    __call__ = evaluate

    def evaluate_many(self, indices):
        idx = np.asarray(indices, float)
        lo, hi = self.support
        if np.any(idx < lo - _SLACK) or np.any(idx > hi + _SLACK):
            raise OutOfSupport("indices outside the mechanism support")
        cells = np.searchsorted(np.asarray(self.thresholds, float), idx, side="left")
        return self.payments[cells], self.probabilities[cells]

    def effective_range(self, merge_tol: float = 0.0) -> list[tuple[Bundle, tuple[float, float]]]:
        """Distinct bundles with the index cells they occupy.

        Cells no wider than ``merge_tol`` are dropped and equal neighbours
        merged, so the cells partition the support.  The bottom cell is
        closed, so its bundle is kept even when the cell is a single point.
        """
        lo, hi = self.support
        edges = [lo] + [min(max(x, lo), hi) for x in self.thresholds] + [hi]
        cells = [(b, edges[k], edges[k + 1]) for k, b in enumerate(self.bundles)]
        kept = [c for k, c in enumerate(cells) if k == 0 or c[2] - c[1] > merge_tol]
        out = []
        for b, _, c in kept:
            # a dropped cell is absorbed by the next kept cell above it
            if out and out[-1][0] == b:
                out[-1] = (b, (out[-1][1][0], c))
            else:
                out.append((b, (out[-1][1][1] if out else lo, c)))
        out[-1] = (out[-1][0], (out[-1][1][0], hi))
        return out

    def threshold_gaps(self) -> list[float]:
        """Label gap at each threshold between the two adjacent bundles."""
        gaps = []
        for k, th in enumerate(self.thresholds):
            a, b = self.bundles[k], self.bundles[k + 1]
            gaps.append(float(abs(self.family.label(th, a.t, a.q) - self.family.label(th, b.t, b.q))))
        return gaps

    def to_record(self) -> dict:
        return {
            "type": "mechanism",
            "family": self.family.to_record(),
            "support": list(self.support),
            "bundles": [[b.t, b.q] for b in self.bundles],
            "thresholds": list(self.thresholds),
            "tie_rule": self.tie_rule,
        }


def family_from_record(rec: dict) -> PreferenceFamily:
    return PreferenceFamily(rec["kind"], rec["lo"], rec["hi"], rec.get("constants", {}))


def mechanism_from_record(rec: dict, strict: bool = True, tol: float = LABEL_TOL) -> StepMechanism:
    family = family_from_record(rec["family"])
    return build_from_geometry(
        family,
        [tuple(b) for b in rec["bundles"]],
        rec["thresholds"],
        support=rec.get("support"),
        strict=strict,
        tol=tol,
    )


def build_from_geometry(
    family: PreferenceFamily,
    bundles: Sequence,
    thresholds: Sequence[float],
    support=None,
    strict: bool = True,
    tol: float = LABEL_TOL,
) -> StepMechanism:
    """Validate a menu/threshold geometry and wrap it as a :class:`StepMechanism`.

    With ``strict=False`` only the structural checks run, which is how
    deliberately broken mechanisms are built for verifier tests.
    """
    mech = StepMechanism(family, tuple(bundles), tuple(thresholds), support)
    lo, hi = mech.support
    for a, b in zip(mech.bundles, mech.bundles[1:]):
        if a != b and not (a.t < b.t and a.q < b.q):
            raise NotDiagonal(f"consecutive bundles {a} and {b} are not increasing diagonals")
    th = mech.thresholds
    if any(y < x for x, y in zip(th, th[1:])):
        raise ThresholdsDecreasing(f"thresholds {th} decrease")
    if th and (th[0] < lo - _SLACK or th[-1] > hi + _SLACK):
        raise OutOfSupport(f"thresholds {th} leave the support [{lo}, {hi}]")
    if strict:
        for k, gap in enumerate(mech.threshold_gaps()):
            if gap > tol:
                raise ThresholdNotIndifferent(
                    f"threshold {k + 1} at index {th[k]}: label gap {gap:.3g} exceeds {tol:g}",
                    position=k,
                    gap=gap,
                )
    return mech


def constant_mechanism(family: PreferenceFamily, bundle=(0.0, 0.0), support=None) -> StepMechanism:
    return build_from_geometry(family, [bundle], [], support=support)


def expected_revenue(mech: StepMechanism, dist: TypeDistribution) -> float:
    lo, hi = mech.support
    if abs(lo - dist.lo) > 1e-9 or abs(hi - dist.hi) > 1e-9:
        raise SupportMismatch(f"mechanism support {mech.support} differs from distribution support {dist.support}")
    edges = np.array([dist.lo] + [min(max(x, dist.lo), dist.hi) for x in mech.thresholds] + [dist.hi])
    masses = np.diff(np.asarray(dist.cdf(edges), float))
    return float(np.dot(mech.payments, np.maximum(masses, 0.0)))


@dataclass(frozen=True)
class TabulatedView:
    """A mechanism given by an arbitrary rule ``index -> (t, q)``.

    Used for mechanisms outside the step class, e.g. continuum-range or
    deliberately non-monotone rules.  ``breakpoints`` lists indices that
    grid-based checks should always include.
    """

    family: PreferenceFamily
    rule: Callable[[float], tuple]
    support: tuple
    breakpoints: tuple = field(default=())
    name: str = "tabulated"

    def __post_init__(self):
        object.__setattr__(self, "support", tuple(map(float, self.support)))
        object.__setattr__(self, "breakpoints", tuple(map(float, self.breakpoints)))

    def evaluate(self, index: float) -> Bundle:
        _check_support(self.support, index)
        out = self.rule(float(index))
        return out if isinstance(out, Bundle) else Bundle(*out)

    __call__ = evaluate

    def evaluate_many(self, indices):
        bundles = [self.evaluate(x) for x in np.asarray(indices, float)]
        return np.array([b.t for b in bundles]), np.array([b.q for b in bundles])
