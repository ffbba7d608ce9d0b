"""Grid-based checks of monotonicity, strategy-proofness, individual
rationality and continuity of the indirect preference correspondence.

Every check works in label units: a type prefers bundle ``a`` to ``b`` when
the label of ``a`` under its preference is smaller.  A deviation's gain is
``label(own bundle) - label(deviant bundle)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mechanism import MechanismView, StepMechanism
from .prefdomain import Bundle, PreferenceFamily

SP_TOL = 1e-7
DEFAULT_GRID = 400
THRESHOLD_OFFSET = 1e-6
_ROW_CHUNK = 512


@dataclass(frozen=True)
class Counterexample:
    """A profitable misreport: ``true_index`` gains ``utility_gap`` by
    reporting ``reported_index``."""

    true_index: float
    reported_index: float
    true_bundle: Bundle
    deviant_bundle: Bundle
    utility_gap: float

    def to_record(self) -> dict:
        return {
            "true_index": self.true_index,
            "reported_index": self.reported_index,
            "true_bundle": list(self.true_bundle.as_tuple()),
            "deviant_bundle": list(self.deviant_bundle.as_tuple()),
            "utility_gap": self.utility_gap,
        }


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    witness: dict | None = None
    counterexamples: tuple = ()

    def __bool__(self):
        return self.passed

    def to_record(self) -> dict:
        return {
            "type": "check",
            "check": self.name,
            "passed": self.passed,
            "witness": self.witness,
            "counterexamples": [c.to_record() for c in self.counterexamples],
        }


@dataclass(frozen=True)
class VerificationReport:
    monotone: bool
    locally_sp: bool
    fully_sp: bool
    individually_rational: bool
    indirect_continuous: bool
    counterexamples: tuple = ()
    checks: tuple = field(default=(), repr=False)

    @property
    def passed(self) -> bool:
        return self.fully_sp and self.individually_rational

    def to_records(self) -> list[dict]:
        return [c.to_record() for c in self.checks]

    def summary(self) -> str:
        rows = [f"{'check':<22}{'result':>8}"]
        for c in self.checks:
            rows.append(f"{c.name:<22}{'pass' if c.passed else 'FAIL':>8}")
        if self.counterexamples:
            worst = max(self.counterexamples, key=lambda c: c.utility_gap)
            rows.append(
                f"worst deviation: type {worst.true_index:.10g} reports {worst.reported_index:.10g}, "
                f"gain {worst.utility_gap:.6g}"
            )
        return "\n".join(rows)


# ---------------------------------------------------------------------------
# helpers


def check_grid(view: MechanismView, grid_n: int = DEFAULT_GRID, extra_points=()) -> np.ndarray:
    """Uniform grid plus endpoints, breakpoints, breakpoints +- 1e-6 and extras."""
    if grid_n < 2:
        raise ValueError("grid_n must be at least 2")
    lo, hi = view.support
    bp = np.asarray(view.breakpoints, float)
    pts = [np.linspace(lo, hi, grid_n), bp, bp - THRESHOLD_OFFSET, bp + THRESHOLD_OFFSET, np.asarray(extra_points, float)]
    xs = np.concatenate([p.ravel() for p in pts])
    return np.unique(np.clip(xs, lo, hi))


def _bundle(t, q) -> Bundle:
    return Bundle(float(t), float(q))


def deviation_gap(view: MechanismView, true_index: float, reported_index: float, family: PreferenceFamily | None = None) -> float:
    """Label gain of type ``true_index`` from reporting ``reported_index``."""
    family = view.family if family is None else family
    own = view.evaluate(true_index)
    dev = view.evaluate(reported_index)
    return float(family.label(true_index, own.t, own.q) - family.label(true_index, dev.t, dev.q))


def replay(cx: Counterexample, view: MechanismView, family: PreferenceFamily | None = None) -> float:
    """Recompute a counterexample's gain from scratch."""
    return deviation_gap(view, cx.true_index, cx.reported_index, family)


# ---------------------------------------------------------------------------
# checks


def check_monotone(view: MechanismView, grid_n: int = DEFAULT_GRID, extra_points=(), tol: float = 1e-12) -> CheckResult:
    xs = check_grid(view, grid_n, extra_points)
    t, q = view.evaluate_many(xs)
    bad = np.flatnonzero((np.diff(t) < -tol) | (np.diff(q) < -tol))
    if bad.size == 0:
        return CheckResult("monotone", True)
    i = int(bad[0])
    witness = {
        "lower_index": float(xs[i]),
        "upper_index": float(xs[i + 1]),
        "lower_bundle": [float(t[i]), float(q[i])],
        "upper_bundle": [float(t[i + 1]), float(q[i + 1])],
    }
    return CheckResult("monotone", False, witness)


def check_sp_grid(
    view: MechanismView,
    family: PreferenceFamily | None = None,
    grid_n: int = DEFAULT_GRID,
    tol: float = SP_TOL,
    extra_points=(),
) -> CheckResult:
    """Exhaustive pairwise misreport check on the grid.

    One counterexample is kept per violating true type: its most profitable
    report.  Counterexamples come sorted by true index.
    """
    family = view.family if family is None else family
    xs = check_grid(view, grid_n, extra_points)
    t, q = view.evaluate_many(xs)
    found = []
    for start in range(0, xs.size, _ROW_CHUNK):
        rows = xs[start:start + _ROW_CHUNK]
        own = family.label(rows, t[start:start + _ROW_CHUNK], q[start:start + _ROW_CHUNK])
        gain = own[:, None] - family.label(rows[:, None], t[None, :], q[None, :])
        best = np.argmax(gain, axis=1)
        best_gain = gain[np.arange(rows.size), best]
        for r in np.flatnonzero(best_gain > tol):
            i, j = start + int(r), int(best[r])
            found.append(
                Counterexample(float(xs[i]), float(xs[j]), _bundle(t[i], q[i]), _bundle(t[j], q[j]), float(best_gain[r]))
            )
    return CheckResult("strategy_proof", not found, counterexamples=tuple(found))


def check_ir(
    view: MechanismView,
    family: PreferenceFamily | None = None,
    grid_n: int = DEFAULT_GRID,
    tol: float = SP_TOL,
    extra_points=(),
) -> CheckResult:
    family = view.family if family is None else family
    xs = check_grid(view, grid_n, extra_points)
    t, q = view.evaluate_many(xs)
    excess = family.label(xs, t, q) - family.reserve(xs)
    bad = np.flatnonzero(excess > tol)
    if bad.size == 0:
        return CheckResult("individually_rational", True)
    i = int(bad[np.argmax(excess[bad])])
    witness = {"index": float(xs[i]), "bundle": [float(t[i]), float(q[i])], "excess": float(excess[i])}
    return CheckResult("individually_rational", False, witness)


def _sample_cell(a: float, b: float, n: int) -> np.ndarray:
    pts = np.concatenate([np.linspace(a, b, n), [a + THRESHOLD_OFFSET, b - THRESHOLD_OFFSET]])
    return np.unique(np.clip(pts, a, b))


def check_local_sp(view: MechanismView, tol: float = SP_TOL, samples: int = 9, grid_n: int = DEFAULT_GRID) -> CheckResult:
    """No type gains by switching to an adjacent bundle of the range.

    For step mechanisms the adjacent bundles are those of the neighbouring
    cells; for other views they are the bundles at neighbouring grid points.
    """
    family = view.family
    found = []
    if isinstance(view, StepMechanism):
        cells = view.effective_range()
        for k, (z, (a, b)) in enumerate(cells):
            xs = _sample_cell(a, b, samples)
            for nb in (k - 1, k + 1):
                if not 0 <= nb < len(cells):
                    continue
                w, (c, d) = cells[nb]
                gain = family.label(xs, z.t, z.q) - family.label(xs, w.t, w.q)
                i = int(np.argmax(gain))
                if gain[i] > tol:
                    found.append(Counterexample(float(xs[i]), 0.5 * (c + d), z, w, float(gain[i])))
    else:
        xs = check_grid(view, grid_n)
        t, q = view.evaluate_many(xs)
        own = family.label(xs, t, q)
        for shift in (-1, 1):
            nb = np.clip(np.arange(xs.size) + shift, 0, xs.size - 1)
            gain = own - family.label(xs, t[nb], q[nb])
            for i in np.flatnonzero(gain > tol):
                j = int(nb[i])
                found.append(Counterexample(float(xs[i]), float(xs[j]), _bundle(t[i], q[i]), _bundle(t[j], q[j]), float(gain[i])))
    found.sort(key=lambda c: (c.true_index, c.reported_index))
    return CheckResult("locally_sp", not found, counterexamples=tuple(found))


def _locate_jump(view: MechanismView, a: float, b: float, width: float = 1e-10):
    za, zb = view.evaluate(a), view.evaluate(b)
    while b - a > width:
        m = 0.5 * (a + b)
        if m <= a or m >= b:
            break
        zm = view.evaluate(m)
        if zm == za:
            a = m
        else:
            b, zb = m, zm
    return a, b, za, zb


def check_indirect_continuity(view: MechanismView, tol: float = SP_TOL, grid_n: int = DEFAULT_GRID) -> CheckResult:
    """Adjacent bundles must be indifferent for the type where they meet.

    Step mechanisms are checked exactly at each threshold.  Other views are
    scanned on a grid; every change of bundle is localised by bisection and
    the one-sided limits are compared under the preference at the jump.
    """
    family = view.family
    if isinstance(view, StepMechanism):
        for k, gap in enumerate(view.threshold_gaps()):
            if gap > tol:
                witness = {
                    "index": view.thresholds[k],
                    "left_bundle": list(view.bundles[k].as_tuple()),
                    "right_bundle": list(view.bundles[k + 1].as_tuple()),
                    "gap": gap,
                }
                return CheckResult("indirect_continuous", False, witness)
        return CheckResult("indirect_continuous", True)
    xs = check_grid(view, grid_n)
    t, q = view.evaluate_many(xs)
    changes = np.flatnonzero((np.diff(t) != 0.0) | (np.diff(q) != 0.0))
    worst = None
    for i in changes:
        a, b, za, zb = _locate_jump(view, float(xs[i]), float(xs[i + 1]))
        gap = float(abs(family.label(b, za.t, za.q) - family.label(b, zb.t, zb.q)))
        if gap > tol and (worst is None or gap > worst["gap"]):
            worst = {"index": b, "left_bundle": list(za.as_tuple()), "right_bundle": list(zb.as_tuple()), "gap": gap}
    return CheckResult("indirect_continuous", worst is None, worst)


def verify(
    view: MechanismView,
    family: PreferenceFamily | None = None,
    grid_n: int = DEFAULT_GRID,
    tol: float = SP_TOL,
    extra_points=(),
) -> VerificationReport:
    """Run every check.  ``fully_sp`` also requires the necessary conditions,
    so a view that slips past the grid but fails one of them is not called
    strategy-proof."""
    mono = check_monotone(view, grid_n, extra_points)
    local = check_local_sp(view, tol, grid_n=grid_n)
    grid = check_sp_grid(view, family, grid_n, tol, extra_points)
    ir = check_ir(view, family, grid_n, tol, extra_points)
    cont = check_indirect_continuity(view, tol, grid_n)
    fully = grid.passed and mono.passed and local.passed and cont.passed
    return VerificationReport(
        monotone=mono.passed,
        locally_sp=local.passed,
        fully_sp=fully,
        individually_rational=ir.passed,
        indirect_continuous=cont.passed,
        counterexamples=grid.counterexamples,
        checks=(mono, local, grid, ir, cont),
    )
