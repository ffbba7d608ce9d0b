"""Atomless type distributions over the order-index line.

Each distribution is a frozen dataclass exposing ``cdf``, ``density``,
``interval_mass``, ``hazard`` and ``virtual_value``.  The public methods check
their preconditions and raise; the underscored ``_cdf``/``_pdf`` are
unchecked and vectorised for inner loops.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DivideAtTop, OutOfSupport, ReversedInterval, ZeroDensity
from .prefdomain import PreferenceFamily

_SLACK = 1e-12
MONOTONE_HAZARD_SLACK = 1e-9


class DistKind(str, Enum):
    UNIFORM = "UNIFORM"
    AFFINE_CDF = "AFFINE_CDF"
    TRUNCATED_EXPONENTIAL = "TRUNCATED_EXPONENTIAL"
    PIECEWISE_LINEAR_CDF = "PIECEWISE_LINEAR_CDF"
    CONDITIONAL = "CONDITIONAL"


class TypeDistribution:
    kind: DistKind
    lo: float
    hi: float

    # unchecked vectorised primitives, supplied by subclasses
    def _cdf(self, x):
        raise NotImplementedError

    def _pdf(self, x):
        raise NotImplementedError

    def _ppf(self, u):
        raise NotImplementedError

    def _sf(self, x):
        return 1.0 - self._cdf(x)

    @property
    def support(self) -> tuple[float, float]:
        return (self.lo, self.hi)

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < self.lo - _SLACK) or np.any(x > self.hi + _SLACK) or np.any(np.isnan(x)):
            raise OutOfSupport(f"{x} outside support [{self.lo}, {self.hi}]")
        return np.clip(x, self.lo, self.hi)

    @staticmethod
    def _out(v):
        return float(v) if np.ndim(v) == 0 else v

    def cdf(self, x):
        x = self._check(x)
        v = np.clip(self._cdf(x), 0.0, 1.0)
        v = np.where(x >= self.hi, 1.0, np.where(x <= self.lo, 0.0, v))
        return self._out(v)

    def density(self, x):
        return self._out(self._pdf(self._check(x)))

    def interval_mass(self, lo, hi) -> float:
        lo, hi = float(self._check(lo)), float(self._check(hi))
        if hi < lo:
            raise ReversedInterval(f"interval [{lo}, {hi}] is reversed")
        return max(self.cdf(hi) - self.cdf(lo), 0.0)

    def hazard(self, x) -> float:
        x = float(self._check(x))
        tail = float(self._sf(x))
        if tail <= 0.0 or x >= self.hi:
            raise DivideAtTop(f"hazard undefined at {x}: no mass above")
        return float(self._pdf(x)) / tail

    def virtual_value(self, x) -> float:
        """``x - (1 - cdf(x)) / density(x)``."""
        x = float(self._check(x))
        g = float(self._pdf(x))
        if g <= 0.0:
            raise ZeroDensity(f"density vanishes at {x}")
        return x - float(self._sf(x)) / g

    def is_monotone_hazard(self, grid_n: int = 200) -> bool:
        # the top point has no hazard; stay strictly inside
        xs = np.linspace(self.lo, self.hi, grid_n + 1)[:-1]
        h = self._pdf(xs) / self._sf(xs)
        return bool(np.all(np.diff(h) >= -MONOTONE_HAZARD_SLACK))

    def ppf(self, u):
        """Inverse CDF, used for inverse-transform sampling."""
        u = np.asarray(u, dtype=float)
        return self._out(np.clip(self._ppf(u), self.lo, self.hi))

    def restrict(self, lo: float) -> "TypeDistribution":
        """Conditional distribution on ``[lo, hi]``."""
        lo = float(self._check(lo))
        if lo <= self.lo:
            return self
        return Conditional(self, lo)

    def total_mass_check(self, n: int = 20001) -> float:
        xs = np.linspace(self.lo, self.hi, n)
        return float(np.trapezoid(self._pdf(xs), xs))


@dataclass(frozen=True)
class Uniform(TypeDistribution):
    lo: float
    hi: float
    kind = DistKind.UNIFORM

    def __post_init__(self):
        _check_bounds(self.lo, self.hi)

    def _cdf(self, x):
        return (np.asarray(x, float) - self.lo) / (self.hi - self.lo)

    def _pdf(self, x):
        return np.full_like(np.asarray(x, float), 1.0 / (self.hi - self.lo))

    def _ppf(self, u):
        return self.lo + u * (self.hi - self.lo)

    def to_record(self):
        return {"kind": self.kind.value, "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class AffineCDF(Uniform):
    """``cdf(x) = (x - lo) / (hi - lo)``; kept distinct for config round-trips."""

    kind = DistKind.AFFINE_CDF


@dataclass(frozen=True)
class TruncatedExponential(TypeDistribution):
    """Density proportional to ``exp(-rate * (x - lo))`` on ``[lo, hi]``.

    Any nonzero rate gives an increasing hazard; a negative rate gives an
    increasing density.
    """

    lo: float
    hi: float
    rate: float
    kind = DistKind.TRUNCATED_EXPONENTIAL

    def __post_init__(self):
        _check_bounds(self.lo, self.hi)
        if not math.isfinite(self.rate) or self.rate == 0.0:
            raise ValueError("rate must be finite and nonzero (use Uniform for rate 0)")

    @property
    def _norm(self):
        return -math.expm1(-self.rate * (self.hi - self.lo))

    def _cdf(self, x):
        return -np.expm1(-self.rate * (np.asarray(x, float) - self.lo)) / self._norm

    def _pdf(self, x):
        return self.rate * np.exp(-self.rate * (np.asarray(x, float) - self.lo)) / self._norm

    def _sf(self, x):
        # avoids 1 - cdf cancellation in the far tail
        x = np.asarray(x, float)
        return np.exp(-self.rate * (x - self.lo)) * -np.expm1(-self.rate * (self.hi - x)) / self._norm

    def _ppf(self, u):
        return self.lo - np.log1p(-u * self._norm) / self.rate

    def to_record(self):
        return {"kind": self.kind.value, "lo": self.lo, "hi": self.hi, "rate": self.rate}


@dataclass(frozen=True)
class PiecewiseLinearCDF(TypeDistribution):
    """CDF interpolating ``(knots[i], values[i])`` linearly.

    Knots strictly increase; values run from 0 to 1 nondecreasing.  At a knot
    the density is the left derivative (right derivative at the first knot).
    """

    knots: tuple
    values: tuple
    kind = DistKind.PIECEWISE_LINEAR_CDF

    def __post_init__(self):
        k = tuple(float(v) for v in self.knots)
        v = tuple(float(x) for x in self.values)
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "values", v)
        if len(k) < 2 or len(k) != len(v):
            raise ValueError("need at least two knots and one value per knot")
        if any(b <= a for a, b in zip(k, k[1:])):
            raise ValueError("knots must be strictly increasing")
        if any(b < a for a, b in zip(v, v[1:])) or v[0] != 0.0 or v[-1] != 1.0:
            raise ValueError("values must rise from 0 to 1 without decreasing")

    @property
    def lo(self):
        return self.knots[0]

    @property
    def hi(self):
        return self.knots[-1]

    @property
    def _slopes(self):
        return np.diff(self.values) / np.diff(self.knots)

    def _cdf(self, x):
        return np.interp(x, self.knots, self.values)

    def _pdf(self, x):
        x = np.asarray(x, float)
        seg = np.clip(np.searchsorted(self.knots, x, side="left") - 1, 0, len(self.knots) - 2)
        return self._slopes[seg]

    def _ppf(self, u):
        # flat segments carry no mass; np.interp on the rising part is a proper inverse
        v = np.asarray(self.values)
        k = np.asarray(self.knots)
        keep = np.concatenate([[True], np.diff(v) > 0])
        return np.interp(u, v[keep], k[keep])

    def to_record(self):
        return {"kind": self.kind.value, "knots": list(self.knots), "values": list(self.values)}


@dataclass(frozen=True)
class Conditional(TypeDistribution):
    """``base`` conditioned on ``[cut, base.hi]``."""

    base: TypeDistribution
    cut: float
    kind = DistKind.CONDITIONAL

    def __post_init__(self):
        if not self.base.lo <= self.cut < self.base.hi:
            raise OutOfSupport(f"cut {self.cut} not inside [{self.base.lo}, {self.base.hi}[")
        if self._tail <= 0.0:
            raise DivideAtTop("no mass above the cut")

    @property
    def lo(self):
        return self.cut

    @property
    def hi(self):
        return self.base.hi

    @property
    def _tail(self):
        return float(self.base._sf(self.cut))

    def _cdf(self, x):
        return (self.base._cdf(x) - self.base._cdf(self.cut)) / self._tail

    def _pdf(self, x):
        return self.base._pdf(x) / self._tail

    def _sf(self, x):
        return self.base._sf(x) / self._tail

    def _ppf(self, u):
        f0 = float(self.base._cdf(self.cut))
        return self.base._ppf(f0 + np.asarray(u, float) * self._tail)

    def to_record(self):
        return {"kind": self.kind.value, "base": self.base.to_record(), "cut": self.cut}


def _check_bounds(lo, hi):
    if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
        raise ValueError(f"need finite lo < hi, got [{lo}, {hi}]")


def distribution_from_record(rec: dict) -> TypeDistribution:
    kind = DistKind(rec["kind"])
    if kind is DistKind.UNIFORM:
        return Uniform(float(rec["lo"]), float(rec["hi"]))
    if kind is DistKind.AFFINE_CDF:
        # cdf = (x - a)/(b - a); a and b are also the support ends
        return AffineCDF(float(rec.get("a", rec.get("lo"))), float(rec.get("b", rec.get("hi"))))
    if kind is DistKind.TRUNCATED_EXPONENTIAL:
        return TruncatedExponential(float(rec["lo"]), float(rec["hi"]), float(rec["rate"]))
    if kind is DistKind.PIECEWISE_LINEAR_CDF:
        return PiecewiseLinearCDF(tuple(rec["knots"]), tuple(rec["values"]))
    return Conditional(distribution_from_record(rec["base"]), float(rec["cut"]))


@dataclass(frozen=True)
class SliceMixture:
    """A finite mixture of single-crossing slices.

    ``slices`` holds ``(family, distribution, weight)`` triples.  Zero
    weights are accepted so that a degenerate mixture reduces to one slice.
    """

    slices: tuple

    def __post_init__(self):
        slices = tuple((fam, dist, float(w)) for fam, dist, w in self.slices)
        object.__setattr__(self, "slices", slices)
        if not slices:
            raise ValueError("a mixture needs at least one slice")
        weights = [w for _, _, w in slices]
        if any(w < 0.0 for w in weights):
            raise ValueError("mixture weights must be nonnegative")
        if abs(sum(weights) - 1.0) > 1e-12:
            raise ValueError(f"mixture weights sum to {sum(weights)}, not 1")
        for fam, dist, _ in slices:
            if not isinstance(fam, PreferenceFamily):
                raise TypeError("slice family must be a PreferenceFamily")
            if dist.lo < fam.lo - _SLACK or dist.hi > fam.hi + _SLACK:
                raise OutOfSupport("slice distribution support must lie inside the family index range")

    @property
    def weights(self) -> list[float]:
        return [w for _, _, w in self.slices]

    def total_mass(self) -> float:
        return sum(w * d.interval_mass(d.lo, d.hi) for _, d, w in self.slices)
