"""Revenue-optimal finite-range mechanisms.

The program maximises ``sum_k t_k * mass(cell_k)`` over nondecreasing
thresholds and win probabilities, with payments eliminated by chaining
indifferences upward from ``(0, 0)``.  Because every shipped label has the
form ``phi(t) + B(index, q)`` inside a monotone transform (``phi(t) = t`` or
``t**2``), the chain is a cumulative sum:

    phi(t_k) = phi(t_{k-1}) + B(th_k, q_{k-1}) - B(th_k, q_k)

Ordering constraints are handled by a stick-breaking map from the unit cube,
so every point a direct-search method visits is feasible.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq, minimize, minimize_scalar
from scipy.stats import qmc

from .errors import (
    ChainUnsolvable,
    DegenerateCell,
    FamilyUnsupported,
    GridTooLarge,
    SolverStalled,
    VerificationFailed,
)
from .mechanism import StepMechanism, build_from_geometry, expected_revenue
from .prefdomain import ORIGIN, Bundle, FamilyKind, PreferenceFamily
from .typedist import SliceMixture, TypeDistribution
from .verifier import Counterexample, VerificationReport, verify

MERGE_TOL = 1e-6
ORACLE_BUDGET = 10**8


# ---------------------------------------------------------------------------
# payments and objective


def _chain(family: PreferenceFamily, th: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Vectorised payment chain.  ``th[..., l-1]``, ``q[..., l]`` with ``q[..., 0] = 0``."""
    steps = family.offset(th, q[..., :-1]) - family.offset(th, q[..., 1:])
    s = np.concatenate([np.zeros(steps.shape[:-1] + (1,)), np.cumsum(steps, axis=-1)], axis=-1)
    s = np.maximum(s, 0.0)  # rounding only; steps are nonnegative for nondecreasing q
    return s if family.quasilinear else np.sqrt(s)


def _with_origin(thresholds, probabilities):
    th = np.asarray(thresholds, float)
    q = np.asarray(probabilities, float)
    if q.shape[-1] == th.shape[-1]:
        q = np.concatenate([np.zeros(q.shape[:-1] + (1,)), q], axis=-1)
    if q.shape[-1] != th.shape[-1] + 1:
        raise ValueError("need one probability per bundle (or per threshold, with q0 = 0 implied)")
    if np.any(q[..., 0] != 0.0):
        raise ValueError("the bottom bundle must have q0 = 0")
    return th, q


def chain_payments(family: PreferenceFamily, thresholds, probabilities) -> np.ndarray:
    """Payments ``t_0 = 0 <= t_1 <= ...`` making each bundle indifferent to the
    one below it for the threshold type between them."""
    th, q = _with_origin(thresholds, probabilities)
    if np.any(np.diff(th) < 0.0) or np.any(np.diff(q) < 0.0):
        raise ValueError("thresholds and probabilities must be nondecreasing")
    if th.size and (th[0] < family.lo - 1e-12 or th[-1] > family.hi + 1e-12):
        raise ValueError("thresholds must lie in the family index range")
    t = _chain(family, th, q)
    if not np.all(np.isfinite(t)) or np.any(t > family.label_window):
        raise ChainUnsolvable(f"indifference payment exceeds the window [0, {family.label_window}]")
    return t


def _cell_masses(dist: TypeDistribution, th: np.ndarray) -> np.ndarray:
    lo, hi = dist.support
    inner = np.clip(dist._cdf(np.clip(th, lo, hi)), 0.0, 1.0)
    shape = th.shape[:-1] + (1,)
    edges = np.concatenate([np.zeros(shape), inner, np.ones(shape)], axis=-1)
    return np.maximum(np.diff(edges, axis=-1), 0.0)


def objective(family: PreferenceFamily, dist: TypeDistribution, thresholds, probabilities) -> float:
    th, q = _with_origin(thresholds, probabilities)
    t = chain_payments(family, th, q)
    return float(np.dot(t, _cell_masses(dist, th)))


# ---------------------------------------------------------------------------
# stick-breaking parameterisation


def _decode(x: np.ndarray, lo: float, hi: float):
    m = x.size // 2
    th = np.empty(m)
    q = np.zeros(m + 1)
    prev = lo
    for k in range(m):
        prev = prev + x[k] * (hi - prev)
        th[k] = prev
        q[k + 1] = q[k] + x[m + k] * (1.0 - q[k])
    return th, q


def _encode(th, q, lo: float, hi: float) -> np.ndarray:
    th = np.asarray(th, float)
    q = np.asarray(q, float)
    m = th.size
    x = np.zeros(2 * m)
    prev = lo
    for k in range(m):
        room = hi - prev
        x[k] = 0.0 if room <= 0.0 else (th[k] - prev) / room
        prev = th[k]
        qroom = 1.0 - q[k]
        x[m + k] = 0.0 if qroom <= 0.0 else (q[k + 1] - q[k]) / qroom
    return np.clip(x, 0.0, 1.0)


# ---------------------------------------------------------------------------
# results


@dataclass(frozen=True)
class SolveOptions:
    starts: int = 32
    max_evals: int = 10_000
    seed: int = 0
    oracle: bool = False
    oracle_grid: tuple = (61, 61)
    oracle_budget: int = ORACLE_BUDGET
    simplify_tol: float = 1e-10
    verify_grid: int = 400
    warm_starts: tuple = ()


@dataclass(frozen=True)
class StartOutcome:
    name: str
    objective: float
    evaluations: int

    def to_record(self) -> dict:
        return {"start": self.name, "objective": self.objective, "evaluations": self.evaluations}


@dataclass(frozen=True)
class SolveSolution:
    payments: tuple
    probabilities: tuple
    thresholds: tuple
    objective: float
    mechanism: StepMechanism
    foc_residuals: tuple | None = None
    verification: VerificationReport | None = None
    method: str = "solve"
    starts: tuple = field(default=(), repr=False)

    @property
    def l(self) -> int:
        return len(self.payments)

    def distinct_bundles(self, merge_tol: float = MERGE_TOL) -> list[Bundle]:
        return [b for b, _ in self.mechanism.effective_range(merge_tol)]

    def is_deterministic(self, merge_tol: float = MERGE_TOL, tol: float = 1e-9) -> bool:
        return all(b.q <= tol or b.q >= 1.0 - tol for b in self.distinct_bundles(merge_tol))

    def to_record(self) -> dict:
        return {
            "type": "solution",
            "method": self.method,
            "objective": self.objective,
            "payments": list(self.payments),
            "probabilities": list(self.probabilities),
            "thresholds": list(self.thresholds),
            "foc_residuals": None if self.foc_residuals is None else list(self.foc_residuals),
            "mechanism": self.mechanism.to_record(),
        }


def solution_from_geometry(
    family: PreferenceFamily, dist: TypeDistribution, thresholds, probabilities, method: str = "geometry"
) -> SolveSolution:
    """Wrap a (threshold, probability) chain as a solution without optimising."""
    th, q = _with_origin(thresholds, probabilities)
    t = chain_payments(family, th, q)
    mech = build_from_geometry(family, [Bundle(a, b) for a, b in zip(t, q)], th, support=dist.support)
    return SolveSolution(
        tuple(float(v) for v in t),
        tuple(float(v) for v in q),
        tuple(float(v) for v in th),
        float(np.dot(t, _cell_masses(dist, th))),
        mech,
        method=method,
    )


def _canonical(family, dist, th, q, l):
    """Exact reduction to distinct bundles, then bottom padding back to ``l``.

    Dropping an empty cell or merging equal neighbours leaves the chain and
    the objective unchanged.  The padding repeats ``(0, 0)`` at the bottom
    with redundant thresholds at the upper edge of that run.
    """
    t = _chain(family, th, q)
    mech = StepMechanism(family, tuple(Bundle(a, b) for a, b in zip(t, q)), tuple(th), dist.support)
    keep = [(b, a) for b, (a, _) in mech.effective_range(0.0) if b != ORIGIN]
    q_red = [0.0] + [b.q for b, _ in keep]
    th_red = [a for _, a in keep]
    pad = l - len(q_red)
    edge = th_red[0] if th_red else dist.hi
    return np.array([edge] * pad + th_red, float), np.array([0.0] * pad + q_red, float)


def _reduced(th, q):
    """Distinct part of a canonical geometry: drop the padded bottom run."""
    n = int(np.searchsorted(q, 0.0, side="right"))  # count of q == 0 entries
    return th[n - 1:], q[n - 1:]


# ---------------------------------------------------------------------------
# solver


class _Counted:
    def __init__(self, fn, budget):
        self.fn, self.budget, self.n = fn, budget, 0

    def __call__(self, x):
        self.n += 1
        return self.fn(x)


def _local_search(f, x0, budget):
    """Bounded Nelder-Mead followed by coordinatewise refinement."""
    fc = _Counted(f, budget)
    x = np.clip(np.asarray(x0, float), 0.0, 1.0)
    if x.size == 0:
        return x, f(x), 1
    res = minimize(
        fc,
        x,
        method="Nelder-Mead",
        bounds=[(0.0, 1.0)] * x.size,
        options={"maxfev": max(budget // 2, 50), "xatol": 1e-11, "fatol": 1e-15, "adaptive": x.size > 2},
    )
    x, fx = np.clip(res.x, 0.0, 1.0), float(fc(np.clip(res.x, 0.0, 1.0)))
    for _ in range(4):
        improved = False
        for i in range(x.size):
            if fc.n >= budget:
                break

            def along(v, i=i):
                y = x.copy()
                y[i] = v
                return fc(y)

            r = minimize_scalar(along, bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-12})
            if r.fun < fx - 1e-15:
                x[i], fx, improved = r.x, float(r.fun), True
        if not improved or fc.n >= budget:
            break
    return x, fx, fc.n


def _make_loss(family, dist):
    lo, hi = dist.support

    def loss(x):
        th, q = _decode(np.clip(x, 0.0, 1.0), lo, hi)
        t = _chain(family, th, q)
        return -float(np.dot(t, _cell_masses(dist, th)))

    return loss


def _simplify(family, dist, th, q, value, tol, budget):
    """Drop bundles while the re-polished objective stays within ``tol`` of
    the incumbent ``value``."""
    lo, hi = dist.support
    l = q.size
    th_r, q_r = _reduced(th, q)
    while q_r.size > 2:
        best = None
        for k in range(1, q_r.size):
            th_c = np.delete(th_r, k - 1)
            q_c = np.delete(q_r, k)
            loss = _make_loss(family, dist)
            x, fx, _ = _local_search(loss, _encode(th_c, q_c, lo, hi), budget)
            if best is None or -fx > best[0]:
                best = (-fx, x)
        if best is None or best[0] < value - tol:
            break
        th_r, q_r = _decode(best[1], lo, hi)
        th_r, q_r = _reduced(*_canonical(family, dist, th_r, q_r, q_r.size))
    pad = l - q_r.size
    edge = th_r[0] if th_r.size else hi
    return np.concatenate([[edge] * pad, th_r]), np.concatenate([[0.0] * pad, q_r])


def _finish(family, dist, th, q, method, starts=(), verify_grid=400, gate=True) -> SolveSolution:
    sol = solution_from_geometry(family, dist, th, q, method=method)
    if verify_grid is None:
        return sol
    report = verify(sol.mechanism, grid_n=verify_grid)
    if gate and not (report.fully_sp and report.individually_rational):
        raise VerificationFailed(f"{method} result failed self-verification", report=report)
    foc = None
    if family.kind is FamilyKind.LINEAR:
        try:
            foc = tuple(foc_residuals(sol, dist))
        except DegenerateCell:
            foc = None
    return replace(sol, verification=report, foc_residuals=foc, starts=tuple(starts))


def solve_optimal(
    family: PreferenceFamily, dist: TypeDistribution, l: int, options: SolveOptions | None = None
) -> SolveSolution:
    """Multi-start direct search over ``l``-bundle step mechanisms."""
    options = options or SolveOptions()
    if l < 2:
        raise ValueError("l must be at least 2")
    lo, hi = dist.support
    m = l - 1
    loss = _make_loss(family, dist)

    named = []
    det = deterministic_optimal(family, dist, verify_grid=None)
    named.append(("deterministic", _encode([det.thresholds[0]] * m, [0.0] + [1.0] * m, lo, hi)))
    for k, (wth, wq) in enumerate(options.warm_starts):
        wth, wq = _with_origin(wth, wq)
        pad = m - wth.size
        if pad < 0:
            continue
        wth = np.concatenate([[wth[0] if wth.size else hi] * pad, wth])
        wq = np.concatenate([[0.0] * pad, wq])
        named.append((f"warm{k}", _encode(wth, wq, lo, hi)))
    oracle = None
    if options.oracle:
        oracle = brute_force_oracle(family, dist, l, options.oracle_grid, options.oracle_budget)
        named.append(("oracle", _encode(oracle.thresholds, oracle.probabilities, lo, hi)))
    if options.starts > 0:
        sampler = qmc.Sobol(d=2 * m, scramble=True, seed=options.seed)
        n = 1 << max(0, math.ceil(math.log2(options.starts)))
        pts = sampler.random(n)[: options.starts]
        named.extend((f"sobol{i}", p) for i, p in enumerate(pts))

    outcomes, results = [], []
    for name, x0 in named:
        x, fx, n_eval = _local_search(loss, x0, options.max_evals)
        outcomes.append(StartOutcome(name, -fx, n_eval))
        results.append((-fx, tuple(np.round(x, 15)), x))
    # best objective first, ties by the smaller solution vector
    best_val, _, best_x = min(results, key=lambda r: (-r[0], r[1]))

    th, q = _decode(best_x, lo, hi)
    th, q = _canonical(family, dist, th, q, l)
    th, q = _simplify(family, dist, th, q, best_val, options.simplify_tol, options.max_evals)
    sol = _finish(family, dist, th, q, "solve", outcomes, options.verify_grid)
    if oracle is not None and sol.objective < oracle.objective - 1e-10:
        raise SolverStalled(f"solver objective {sol.objective:.12g} below oracle incumbent {oracle.objective:.12g}")
    return sol


def _grid_sizes(grid_spec):
    if isinstance(grid_spec, int):
        return grid_spec, grid_spec
    if isinstance(grid_spec, dict):
        return int(grid_spec["theta"]), int(grid_spec["q"])
    a, b = grid_spec
    return int(a), int(b)


def brute_force_oracle(
    family: PreferenceFamily, dist: TypeDistribution, l: int, grid_spec=(61, 61), budget: int = ORACLE_BUDGET
) -> SolveSolution:
    """Exact maximum over nondecreasing tuples drawn from product grids.

    Ties keep the first tuple in lexicographic enumeration order.
    """
    if l < 2:
        raise ValueError("l must be at least 2")
    n_th, n_q = _grid_sizes(grid_spec)
    if n_th < 2 or n_q < 2:
        raise ValueError("grids need at least two points")
    m = l - 1
    count = math.comb(n_th + m - 1, m) * math.comb(n_q + m - 1, m)
    if count > budget:
        raise GridTooLarge(f"{count} candidate geometries exceed the budget {budget}")
    lo, hi = dist.support
    th_grid = np.linspace(lo, hi, n_th)
    q_grid = np.linspace(0.0, 1.0, n_q)
    qs = q_grid[np.array(list(itertools.combinations_with_replacement(range(n_q), m)), dtype=int)]
    qs = np.concatenate([np.zeros((qs.shape[0], 1)), qs], axis=1)
    ths = th_grid[np.array(list(itertools.combinations_with_replacement(range(n_th), m)), dtype=int)]
    block = max(1, 2_000_000 // qs.shape[0])
    best = (-np.inf, None, None)
    for s in range(0, ths.shape[0], block):
        tb = ths[s:s + block]
        t = _chain(family, tb[:, None, :], qs[None, :, :])
        rev = np.einsum("bml,bl->bm", t, _cell_masses(dist, tb))
        flat = int(np.argmax(rev))
        val = float(rev.flat[flat])
        if val > best[0]:
            i, j = divmod(flat, qs.shape[0])
            best = (val, tb[i], qs[j])
    th, q = _canonical(family, dist, best[1], best[2], l)
    return _finish(family, dist, th, q, "oracle", gate=False)


def deterministic_optimal(
    family: PreferenceFamily, dist: TypeDistribution, grid_n: int = 2001, verify_grid: int | None = 400
) -> SolveSolution:
    """Best posted price: maximise ``reserve(th) * (1 - cdf(th))``.

    ``verify_grid=None`` skips the verification report, for inner loops.
    """
    lo, hi = dist.support

    def revenue(x):
        x = np.asarray(x, float)
        return family.reserve(x) * (1.0 - np.clip(dist._cdf(x), 0.0, 1.0))

    xs = np.linspace(lo, hi, grid_n)
    vals = revenue(xs)
    i = int(np.argmax(vals))
    a, b = xs[max(i - 1, 0)], xs[min(i + 1, grid_n - 1)]
    r = minimize_scalar(lambda x: -float(revenue(x)), bounds=(a, b), method="bounded", options={"xatol": 1e-12})
    cands = [(float(vals[i]), float(xs[i])), (-float(r.fun), float(r.x)), (float(revenue(lo)), lo), (float(revenue(hi)), hi)]
    top, th = max(cands, key=lambda c: (c[0], -c[1]))
    # revenue is flat at the top, so polish an interior maximum on the slope
    h = 1e-6 * (hi - lo)
    if a - h >= lo and b + h <= hi:

        def slope(x):
            return float(revenue(x + h) - revenue(x - h)) / (2.0 * h)

        if slope(a) > 0.0 > slope(b):
            x = float(brentq(slope, a, b, xtol=1e-14))
            if float(revenue(x)) >= top - 1e-12 * max(1.0, abs(top)):
                th = x
    return _finish(family, dist, [th], [0.0, 1.0], "deterministic", verify_grid=verify_grid, gate=False)


def foc_residuals(solution: SolveSolution, dist: TypeDistribution, merge_tol: float | None = MERGE_TOL) -> list[float]:
    """``hazard(th_k) - (q_k - q_{k-1}) / (t_k - t_{k-1})`` at each threshold below the top.

    With ``merge_tol`` set, the residuals are taken on the merged effective
    range; with ``merge_tol=None`` the raw chain is used and repeated bundles
    raise DEGENERATE_CELL.
    """
    mech = solution.mechanism
    if mech.family.kind is not FamilyKind.LINEAR:
        raise FamilyUnsupported("first-order residuals are only defined for LINEAR preferences")
    if merge_tol is None:
        bundles, ths = mech.bundles, mech.thresholds
    else:
        cells = mech.effective_range(merge_tol)
        bundles = [b for b, _ in cells]
        ths = [a for _, (a, _) in cells[1:]]
    out = []
    for k, th in enumerate(ths):
        lower, upper = bundles[k], bundles[k + 1]
        if upper.t == lower.t:
            raise DegenerateCell(f"cell {k + 1} repeats the payment {upper.t}")
        if th >= dist.hi:
            continue
        out.append(float(dist.hazard(th) - (upper.q - lower.q) / (upper.t - lower.t)))
    return out


# ---------------------------------------------------------------------------
# union domains


@dataclass(frozen=True)
class CrossSliceCounterexample:
    true_slice: int
    target_slice: int
    cx: Counterexample
    utility_gain: float

    def to_record(self) -> dict:
        return {"true_slice": self.true_slice, "target_slice": self.target_slice, "utility_gain": self.utility_gain, **self.cx.to_record()}


@dataclass(frozen=True)
class UnionSliceReport:
    slices: tuple  # per-slice SolveSolution
    deterministic: tuple
    weights: tuple
    counterexamples: tuple

    @property
    def revenues(self) -> list[float]:
        return [s.objective for s in self.slices]

    @property
    def mixture_revenue(self) -> float:
        return float(sum(w * r for w, r in zip(self.weights, self.revenues)))

    @property
    def combined_sp(self) -> bool:
        return not self.counterexamples

    @property
    def strictly_between(self) -> bool:
        return min(self.revenues) < self.mixture_revenue < max(self.revenues)

    def witness_at(self, true_slice: int, index: float, tol: float = 1e-9) -> CrossSliceCounterexample | None:
        for c in self.counterexamples:
            if c.true_slice == true_slice and abs(c.cx.true_index - index) <= tol:
                return c
        return None

    def replay(self, c: CrossSliceCounterexample) -> float:
        """Recompute a cross-slice gain in label units from the slice mechanisms."""
        fam = self.slices[c.true_slice].mechanism.family
        own = self.slices[c.true_slice].mechanism.evaluate(c.cx.true_index)
        dev = self.slices[c.target_slice].mechanism.evaluate(c.cx.reported_index)
        x = c.cx.true_index
        return float(fam.label(x, own.t, own.q) - fam.label(x, dev.t, dev.q))

    def to_record(self) -> dict:
        return {
            "type": "union_slices",
            "weights": list(self.weights),
            "slice_revenues": self.revenues,
            "slice_thresholds": [list(s.thresholds) for s in self.slices],
            "slice_payments": [list(s.payments) for s in self.slices],
            "mixture_revenue": self.mixture_revenue,
            "combined_sp": self.combined_sp,
            "violations": len(self.counterexamples),
        }


def union_slice_analysis(
    mixture: SliceMixture, l: int = 2, options: SolveOptions | None = None, grid_n: int = 401, tol: float = 1e-7
) -> UnionSliceReport:
    """Optimise each slice alone, then check the naive union of their menus.

    A type in one slice may report any type of another slice, so it can pick
    any bundle of that slice's menu.  For each grid type the most profitable
    such bundle is recorded.
    """
    if len(mixture.slices) < 2:
        raise ValueError("union analysis needs at least two slices")
    sols, dets = [], []
    for fam, dist, _ in mixture.slices:
        dets.append(deterministic_optimal(fam, dist))
        sols.append(solve_optimal(fam, dist, l, options))
    found = []
    for s, (fam, dist, _) in enumerate(mixture.slices):
        mech = sols[s].mechanism
        xs = np.unique(np.concatenate([np.linspace(dist.lo, dist.hi, grid_n), mech.thresholds]))
        t, q = mech.evaluate_many(xs)
        own = fam.label(xs, t, q)
        for r, other in enumerate(sols):
            if r == s:
                continue
            cells = other.mechanism.effective_range()
            for i, x in enumerate(xs):
                labels = [float(fam.label(x, b.t, b.q)) for b, _ in cells]
                j = int(np.argmin(labels))
                gain = float(own[i]) - labels[j]
                if gain > tol:
                    b, (a, c) = cells[j]
                    z = Bundle(float(t[i]), float(q[i]))
                    u_gain = float(fam.utility(x, b.t, b.q) - fam.utility(x, z.t, z.q))
                    found.append(CrossSliceCounterexample(s, r, Counterexample(float(x), c, z, b, gain), u_gain))
    found.sort(key=lambda c: (c.true_slice, c.cx.true_index, c.target_slice))
    return UnionSliceReport(tuple(sols), tuple(dets), tuple(mixture.weights), tuple(found))


# ---------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepRow:
    l: int
    objective: float
    distinct_bundles: int
    converged: bool

    def to_record(self) -> dict:
        return {"l": self.l, "objective": self.objective, "distinct_bundles": self.distinct_bundles, "converged": self.converged}


def sweep(
    family: PreferenceFamily, dist: TypeDistribution, ls, options: SolveOptions | None = None, conv_tol: float = 1e-8
) -> tuple[list[SweepRow], list[SolveSolution]]:
    """One solve per ``l``; each solve is warm-started from the previous
    optimum, so the objective column cannot fall."""
    ls = sorted(int(v) for v in ls)
    if not ls:
        raise ValueError("empty range of l")
    options = options or SolveOptions()
    rows, sols, prev = [], [], None
    for l in ls:
        opts = options
        if prev is not None:
            th_r, q_r = _reduced(np.asarray(prev.thresholds), np.asarray(prev.probabilities))
            opts = replace(options, warm_starts=options.warm_starts + ((tuple(th_r), tuple(q_r)),))
        sol = solve_optimal(family, dist, l, opts)
        if prev is not None and sol.objective < prev.objective - options.simplify_tol:
            raise SolverStalled(f"objective fell from {prev.objective} to {sol.objective} at l={l}")
        conv = prev is not None and abs(sol.objective - prev.objective) < conv_tol
        rows.append(SweepRow(l, sol.objective, len(sol.distinct_bundles()), conv))
        sols.append(sol)
        prev = sol
    return rows, sols
