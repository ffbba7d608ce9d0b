"""Parametric single-crossing preference families on the bundle space.

A bundle is ``(t, q)``: a payment ``t >= 0`` and a win probability
``q in [0, 1]``.  Every preference here is summarised by its *indifference
label*: the payment ``x`` with ``(t, q)`` indifferent to ``(x, 1)``.  A smaller
label is a better bundle, so comparing bundles reduces to comparing labels.

All shipped families have labels of one of two shapes,

    quasilinear:  label = t + B(index, q)
    quadratic:    label = sqrt(t**2 + B(index, q))

with ``B(index, 1) = 0`` and ``B`` strictly increasing in ``index`` for
``q < 1``.  The closed forms are used by default; a bisection on the payment
axis driven only by the utility function is kept as an independent route.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

import numpy as np
from scipy.optimize import brentq

from .errors import FamilyMismatch, NotDiagonal, OutOfRange, UnboundedLabel

LABEL_TOL = 1e-9
"""Absolute tolerance on the payment axis when comparing labels."""

_BOUND_SLACK = 1e-12


class FamilyKind(str, Enum):
    LINEAR = "LINEAR"
    QUADRATIC_PAYMENT = "QUADRATIC_PAYMENT"
    POWER_WEIGHTED = "POWER_WEIGHTED"
    PIECEWISE_WEIGHTING = "PIECEWISE_WEIGHTING"
    TWO_PARAM_UV = "TWO_PARAM_UV"


class Comparison(str, Enum):
    A_BETTER = "A_BETTER"
    B_BETTER = "B_BETTER"
    INDIFFERENT = "INDIFFERENT"


class Order(str, Enum):
    PRECEDES = "PRECEDES"
    EQUAL = "EQUAL"
    FOLLOWS = "FOLLOWS"


@dataclass(frozen=True)
class Bundle:
    """A payment / win-probability pair."""

    t: float
    q: float

    def __post_init__(self):
        t, q = float(self.t), float(self.q)
        if not math.isfinite(t) or t < 0.0:
            raise ValueError(f"payment must be finite and nonnegative, got {self.t!r}")
        if not (0.0 <= q <= 1.0):
            raise ValueError(f"win probability must lie in [0, 1], got {self.q!r}")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "q", q)

    def as_tuple(self) -> tuple[float, float]:
        return (self.t, self.q)


ORIGIN = Bundle(0.0, 0.0)


def is_diagonal(a: Bundle, b: Bundle) -> bool:
    """True when both coordinates differ strictly and in the same direction."""
    return (a.t < b.t and a.q < b.q) or (b.t < a.t and b.q < a.q)


def weakly_below(a: Bundle, b: Bundle) -> bool:
    """Componentwise ``a <= b``."""
    return a.t <= b.t and a.q <= b.q


# ---------------------------------------------------------------------------
# per-family kernels
#
# Each kernel maps (constants, index, q) -> B(index, q) and
# (constants, index, t, q) -> utility.  ``index`` is the scalar order index.


def _g(c, s):
    return c["g_slope"] * s + c["g_intercept"]


def _b_linear(c, s, q):
    return s * (1.0 - q)


def _u_linear(c, s, t, q):
    return s * q - t


def _b_quadratic(c, s, q):
    return s * (1.0 - q)


def _u_quadratic(c, s, t, q):
    return s * q - t * t


def _b_power(c, s, q):
    return s * (1.0 - np.power(q, c["a"])) / c["c"]


def _u_power(c, s, t, q):
    return s * np.power(q, c["a"]) - c["c"] * t


def _u_piecewise(c, s, t, q):
    th, qs = c["theta_hat"], c["q_star"]
    above = th * np.power(q, s) - t
    # below the cutoff, slide along the linear curve up to q_star
    below = th * np.power(qs, s) - t - _g(c, s) * (qs - q)
    return np.where(q >= qs, above, below)


def _b_piecewise(c, s, q):
    # utility of (x, 1) is theta_hat - x, so label = theta_hat - u(t, q)
    return c["theta_hat"] - _u_piecewise(c, s, 0.0, q)


def _uv_weight(s):
    # U branch weight is theta; V branch (alpha = 1/(s-1)) weight is 2/alpha
    return np.where(s <= 2.0, s, 2.0 * (s - 1.0))


def _b_uv(c, s, q):
    return _uv_weight(s) * (1.0 - np.sqrt(q))


def _u_uv(c, s, t, q):
    s = np.asarray(s, dtype=float)
    u_branch = s * np.sqrt(q) - t * t
    alpha = 1.0 / np.maximum(s - 1.0, 1.0)
    v_branch = 2.0 * np.sqrt(q) - alpha * t * t
    return np.where(s <= 2.0, u_branch, v_branch)


_KERNELS = {
    FamilyKind.LINEAR: ("quasilinear", _b_linear, _u_linear),
    FamilyKind.QUADRATIC_PAYMENT: ("quadratic", _b_quadratic, _u_quadratic),
    FamilyKind.POWER_WEIGHTED: ("quasilinear", _b_power, _u_power),
    FamilyKind.PIECEWISE_WEIGHTING: ("quasilinear", _b_piecewise, _u_piecewise),
    FamilyKind.TWO_PARAM_UV: ("quadratic", _b_uv, _u_uv),
}

_DEFAULT_CONSTANTS = {
    FamilyKind.LINEAR: {},
    FamilyKind.QUADRATIC_PAYMENT: {},
    FamilyKind.POWER_WEIGHTED: {"a": 0.5, "c": 0.5},
    # g maps [1/4, 1/3] onto [1/8, 1/2]
    FamilyKind.PIECEWISE_WEIGHTING: {
        "theta_hat": 4.0,
        "q_star": 0.1,
        "g_slope": 4.5,
        "g_intercept": -1.0,
    },
    FamilyKind.TWO_PARAM_UV: {},
}


@dataclass(frozen=True)
class PreferenceFamily:
    """A one-parameter slice of a rich single-crossing domain.

    ``lo``/``hi`` bound the scalar order index; ``constants`` holds the
    family's fixed parameters as sorted ``(name, value)`` pairs so the family
    stays hashable.  Construction runs a probe check that labels are ordered
    by the index on a fixed bundle grid.
    """

    kind: FamilyKind
    lo: float
    hi: float
    constants: tuple = field(default=())

    def __post_init__(self):
        kind = FamilyKind(self.kind)
        object.__setattr__(self, "kind", kind)
        merged = dict(_DEFAULT_CONSTANTS[kind])
        given = dict(self.constants.items() if isinstance(self.constants, Mapping) else self.constants)
        unknown = set(given) - set(merged)
        if unknown:
            raise ValueError(f"unknown constants for {kind.value}: {sorted(unknown)}")
        merged.update({k: float(v) for k, v in given.items()})
        object.__setattr__(self, "constants", tuple(sorted(merged.items())))
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))
        self._validate()
        self._probe_order()

    # -- constructors -----------------------------------------------------
    @classmethod
    def linear(cls, lo=0.1, hi=10.0):
        return cls(FamilyKind.LINEAR, lo, hi)

    @classmethod
    def quadratic_payment(cls, lo=0.1, hi=10.0):
        return cls(FamilyKind.QUADRATIC_PAYMENT, lo, hi)

    @classmethod
    def power_weighted(cls, lo=1.0, hi=5.0, a=0.5, c=0.5):
        return cls(FamilyKind.POWER_WEIGHTED, lo, hi, {"a": a, "c": c})

    @classmethod
    def piecewise_weighting(cls, lo=0.25, hi=1.0 / 3.0, **constants):
        return cls(FamilyKind.PIECEWISE_WEIGHTING, lo, hi, constants)

    @classmethod
    def two_param_uv(cls, lo=0.5, hi=3.0):
        return cls(FamilyKind.TWO_PARAM_UV, lo, hi)

    @staticmethod
    def uv_index(theta=None, alpha=None) -> float:
        """Order index of ``theta*sqrt(q) - t**2`` or ``2*sqrt(q) - alpha*t**2``."""
        if (theta is None) == (alpha is None):
            raise ValueError("give exactly one of theta (U branch) or alpha (V branch)")
        if theta is not None:
            if not 0.0 < theta <= 2.0:
                raise ValueError("theta must lie in ]0, 2]")
            return float(theta)
        if not 0.0 < alpha <= 1.0:
            raise ValueError("alpha must lie in ]0, 1]")
        return 2.0 + (1.0 / alpha - 1.0)

    # -- accessors --------------------------------------------------------
    @property
    def const(self) -> dict:
        return dict(self.constants)

    @property
    def quasilinear(self) -> bool:
        return _KERNELS[self.kind][0] == "quasilinear"

    def preference(self, index: float) -> "Preference":
        return Preference(self, index)

    def to_record(self) -> dict:
        return {"kind": self.kind.value, "lo": self.lo, "hi": self.hi, "constants": self.const}

    # -- vectorised kernels -----------------------------------------------
    def offset(self, index, q):
        """``B(index, q)``; the label of ``(0, q)`` is ``offset`` or its root."""
        return _KERNELS[self.kind][1](self.const, np.asarray(index, float), np.asarray(q, float))

    def utility(self, index, t, q):
        fn = _KERNELS[self.kind][2]
        return fn(self.const, np.asarray(index, float), np.asarray(t, float), np.asarray(q, float))

    def label(self, index, t, q):
        """Closed-form indifference label, broadcast over all arguments."""
        b = self.offset(index, q)
        t = np.asarray(t, float)
        if self.quasilinear:
            return t + b
        return np.sqrt(t * t + b)

    def payment_for_label(self, index, label, q):
        """Inverse of :meth:`label` in ``t``; NaN where no nonnegative payment exists."""
        b = self.offset(index, q)
        label = np.asarray(label, float)
        if self.quasilinear:
            t = label - b
        else:
            with np.errstate(invalid="ignore"):
                t = np.sqrt(label * label - b)
        return np.where(t >= -1e-12, np.maximum(t, 0.0), np.nan)

    def reserve(self, index):
        """Payment ``T`` with ``(0, 0)`` indifferent to ``(T, 1)``."""
        return self.label(index, 0.0, 0.0)

    @property
    def label_window(self) -> float:
        """Upper end of the bisection window on the payment axis."""
        return 10.0 * float(self.reserve(self.hi))

    def contains(self, index: float) -> bool:
        return self.lo - _BOUND_SLACK <= index <= self.hi + _BOUND_SLACK

    # -- construction checks ----------------------------------------------
    def _validate(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or not self.lo < self.hi:
            raise ValueError(f"need finite lo < hi, got [{self.lo}, {self.hi}]")
        if self.lo < 0.0:
            raise ValueError("order index must be nonnegative")
        c = self.const
        if self.kind is FamilyKind.POWER_WEIGHTED:
            if not (0.0 < c["a"] <= 1.0 and c["c"] > 0.0):
                raise ValueError("POWER_WEIGHTED needs 0 < a <= 1 and c > 0")
        elif self.kind is FamilyKind.PIECEWISE_WEIGHTING:
            if not 0.0 < c["q_star"] < 1.0:
                raise ValueError("q_star must lie in ]0, 1[")
            if c["g_slope"] <= 0.0:
                raise ValueError("g must be strictly increasing")
            if self.lo <= 0.0 or c["theta_hat"] <= 0.0:
                raise ValueError("PIECEWISE_WEIGHTING needs positive exponents and theta_hat")
            if _g(c, self.lo) <= 0.0:
                raise ValueError("g must be positive on the index range")
        elif self.kind is FamilyKind.TWO_PARAM_UV and self.lo <= 0.0:
            raise ValueError("TWO_PARAM_UV index must be positive")

    def _probe_order(self):
        idx = np.linspace(self.lo, self.hi, 7)[:, None]
        t = np.array([0.0, 0.0, 0.3, 0.3, 1.0, 1.0, 2.0])[None, :]
        q = np.array([0.0, 0.5, 0.05, 0.9, 0.2, 0.99, 0.0])[None, :]
        labels = self.label(idx, t, q)
        if np.any(np.diff(labels, axis=0) < -1e-12):
            raise ValueError(f"{self.kind.value} labels are not ordered by the index on [{self.lo}, {self.hi}]")
        if np.any(np.diff(self.reserve(idx[:, 0])) <= 0.0):
            raise ValueError(f"{self.kind.value} reserve payment is not strictly increasing")


@dataclass(frozen=True)
class Preference:
    family: PreferenceFamily
    index: float

    def __post_init__(self):
        index = float(self.index)
        if not self.family.contains(index):
            raise OutOfRange(f"index {index} outside [{self.family.lo}, {self.family.hi}]")
        object.__setattr__(self, "index", min(max(index, self.family.lo), self.family.hi))

    def label(self, t, q):
        return self.family.label(self.index, t, q)

    def utility(self, t, q):
        return self.family.utility(self.index, t, q)


# ---------------------------------------------------------------------------
# operations


def label_by_bisection(pref: Preference, z: Bundle, window: float | None = None) -> float:
    """Indifference label found from the utility function alone.

    Utility of ``(x, 1)`` is strictly decreasing in ``x``, so the root of
    ``u(x, 1) - u(z)`` on ``[0, window]`` is unique when bracketed.
    """
    fam, s = pref.family, pref.index
    window = fam.label_window if window is None else float(window)
    target = float(fam.utility(s, z.t, z.q))

    def gap(x):
        return float(fam.utility(s, x, 1.0)) - target

    g0 = gap(0.0)
    if g0 <= 0.0:
        return 0.0
    if gap(window) > 0.0:
        raise UnboundedLabel(f"label of {z} exceeds the window [0, {window}]", window=(0.0, window))
    return brentq(gap, 0.0, window, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=500)


def indiff_label(pref: Preference, z: Bundle, method: str = "closed") -> float:
    """Payment ``x`` with ``z`` indifferent to ``(x, 1)`` under ``pref``."""
    if method == "closed":
        return float(pref.label(z.t, z.q))
    if method == "bisect":
        return label_by_bisection(pref, z)
    raise ValueError(f"unknown method {method!r}")


def prefers(pref: Preference, a: Bundle, b: Bundle, tol: float = LABEL_TOL, method: str = "closed") -> Comparison:
    la, lb = indiff_label(pref, a, method), indiff_label(pref, b, method)
    if abs(la - lb) <= tol:
        return Comparison.INDIFFERENT
    return Comparison.A_BETTER if la < lb else Comparison.B_BETTER


def reserve_payment(pref: Preference) -> float:
    return indiff_label(pref, ORIGIN)


def indiff_through(family: PreferenceFamily, a: Bundle, b: Bundle, tol: float = LABEL_TOL) -> Preference:
    """The preference in ``family`` under which ``a`` and ``b`` are indifferent.

    The label gap ``label(hi) - label(lo)`` between the upper and lower
    bundle is strictly decreasing in the index, so a bracketing root finder
    on ``[family.lo, family.hi]`` finds the unique solution.
    """
    if not is_diagonal(a, b):
        raise NotDiagonal(f"{a} and {b} are not diagonal")
    low, high = (a, b) if a.t < b.t else (b, a)

    def gap(s):
        return float(family.label(s, high.t, high.q) - family.label(s, low.t, low.q))

    g_lo, g_hi = gap(family.lo), gap(family.hi)
    if abs(g_lo) <= tol:
        return family.preference(family.lo)
    if abs(g_hi) <= tol:
        return family.preference(family.hi)
    if g_lo < 0.0 or g_hi > 0.0:
        raise OutOfRange(
            f"no index in [{family.lo}, {family.hi}] makes {low} and {high} indifferent"
        )
    s = brentq(gap, family.lo, family.hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return family.preference(s)


def compare_prefs(p1: Preference, p2: Preference) -> Order:
    if p1.family != p2.family:
        raise FamilyMismatch("preferences come from different families")
    if p1.index < p2.index:
        return Order.PRECEDES
    if p1.index > p2.index:
        return Order.FOLLOWS
    return Order.EQUAL
