import numpy as np
import pytest

import oracles
from singlecross.mechanism import TabulatedView, build_from_geometry, constant_mechanism
from singlecross.prefdomain import Bundle, PreferenceFamily
from singlecross.scenarios import (
    discontinuous_monotone_mechanism,
    linear_continuum_mechanism,
    nonmonotone_continuous_mechanism,
)
from singlecross.verifier import (
    SP_TOL,
    check_grid,
    check_indirect_continuity,
    check_ir,
    check_local_sp,
    check_monotone,
    check_sp_grid,
    deviation_gap,
    replay,
    verify,
)

LIN = PreferenceFamily.linear(0.1, 10.0)
TWO = build_from_geometry(LIN, [(0, 0), (1, 1)], [1.0])
SHIFTED = build_from_geometry(LIN, [(0, 0), (1, 1)], [1.3], strict=False)
CONST = constant_mechanism(LIN)

BROKEN = {
    "nonmonotone": nonmonotone_continuous_mechanism(),
    "discontinuous": discontinuous_monotone_mechanism(),
    "continuum": linear_continuum_mechanism(),
}


def test_grid_includes_endpoints_and_threshold_neighbours():
    xs = check_grid(TWO, 10)
    for x in (0.1, 10.0, 1.0, 1.0 - 1e-6, 1.0 + 1e-6):
        assert np.any(np.isclose(xs, x, atol=1e-15, rtol=0))
    with pytest.raises(ValueError):
        check_grid(TWO, 1)


@pytest.mark.parametrize("mech", [TWO, CONST], ids=["two_bundle", "constant"])
def test_valid_mechanisms_pass_everything(mech):
    rep = verify(mech)
    assert rep.monotone and rep.locally_sp and rep.fully_sp
    assert rep.individually_rational and rep.indirect_continuous
    assert rep.counterexamples == ()
    assert rep.passed


def test_shifted_threshold_fails_local_sp_with_witness():
    res = check_local_sp(SHIFTED)
    assert not res.passed
    cx = res.counterexamples[0]
    # types in ]1, 1.3] receive (0,0) but prefer (1,1)
    assert 1.0 < cx.true_index <= 1.3
    assert cx.utility_gap == pytest.approx(cx.true_index - 1.0, abs=1e-12)
    assert not check_indirect_continuity(SHIFTED).passed
    assert not verify(SHIFTED).fully_sp


def test_singleton_range_is_locally_sp():
    assert check_local_sp(CONST).passed


def test_nonmonotone_example_fails_monotone_only():
    view = BROKEN["nonmonotone"]
    res = check_monotone(view)
    assert not res.passed
    assert res.witness["lower_bundle"] == [1.2, 1.0]
    assert res.witness["upper_bundle"] == [0.0, 0.0]
    assert check_indirect_continuity(view).passed


def test_discontinuous_example_fails_continuity_only():
    view = BROKEN["discontinuous"]
    assert check_monotone(view).passed
    res = check_indirect_continuity(view)
    assert not res.passed
    assert res.witness["index"] == pytest.approx(0.8, abs=1e-9)
    assert res.witness["gap"] == pytest.approx(0.2, abs=1e-8)


def test_continuum_example_is_ir_but_not_sp():
    view = BROKEN["continuum"]
    assert check_ir(view).passed
    res = check_sp_grid(view, extra_points=(1.5,))
    assert not res.passed
    (cx,) = [c for c in res.counterexamples if c.true_index == 1.5]
    assert cx.reported_index == 2.0
    assert cx.utility_gap == pytest.approx(7.0 / 12.0, abs=1e-12)
    assert deviation_gap(view, 1.5, 2.0) == pytest.approx(0.5833333333333334, abs=1e-12)


def test_continuum_violations_agree_with_naive_oracle():
    view = BROKEN["continuum"]
    grid = np.linspace(1.0, 2.0, 41)
    naive = oracles.naive_sp_violations(
        lambda x: view.evaluate(x).as_tuple(), lambda s, t, q: oracles.utility("LINEAR", s, t, q), grid
    )
    flagged = {round(c.true_index, 12) for c in check_sp_grid(view, grid_n=41).counterexamples}
    assert {round(x, 12) for x, _, _ in naive} <= flagged
    assert naive


def test_ir_fails_when_top_type_is_overcharged():
    fam = PreferenceFamily.linear(1.0, 2.0)
    view = TabulatedView(fam, lambda x: (2.5, 1.0) if x == 2.0 else (0.0, 0.0), (1.0, 2.0))
    res = check_ir(view)
    assert not res.passed
    assert res.witness["index"] == 2.0 and res.witness["excess"] == pytest.approx(0.5)


@pytest.mark.parametrize("name", sorted(BROKEN))
def test_necessary_condition_failures_imply_sp_failure(name):
    view = BROKEN[name]
    necessary = check_monotone(view).passed and check_indirect_continuity(view).passed
    sp = check_sp_grid(view, grid_n=800)
    if not necessary:
        assert not sp.passed


@pytest.mark.parametrize("view", [SHIFTED, *BROKEN.values()], ids=["shifted", *BROKEN])
def test_counterexamples_replay_from_scratch(view):
    res = check_sp_grid(view)
    assert res.counterexamples
    for cx in res.counterexamples:
        assert cx.utility_gap > SP_TOL
        assert replay(cx, view) == pytest.approx(cx.utility_gap, abs=1e-12)
        own = view.evaluate(cx.true_index)
        dev = view.evaluate(cx.reported_index)
        assert (own, dev) == (cx.true_bundle, cx.deviant_bundle)


def test_counterexamples_sorted_and_one_per_type():
    res = check_sp_grid(BROKEN["continuum"])
    idx = [c.true_index for c in res.counterexamples]
    assert idx == sorted(idx) and len(idx) == len(set(idx))


def test_report_records_and_summary():
    rep = verify(SHIFTED)
    recs = rep.to_records()
    assert [r["check"] for r in recs] == [
        "monotone",
        "locally_sp",
        "strategy_proof",
        "individually_rational",
        "indirect_continuous",
    ]
    assert all(r["type"] == "check" for r in recs)
    text = rep.summary()
    assert "FAIL" in text and "worst deviation" in text


def test_fully_sp_implies_necessary_conditions():
    for view in [TWO, CONST, SHIFTED, *BROKEN.values()]:
        rep = verify(view, grid_n=200)
        if rep.fully_sp:
            assert rep.monotone and rep.locally_sp and rep.indirect_continuous


def test_label_gain_is_utility_gain_for_linear_family():
    view = BROKEN["continuum"]
    own, dev = view.evaluate(1.5), view.evaluate(2.0)
    u = oracles.utility("LINEAR", 1.5, dev.t, dev.q) - oracles.utility("LINEAR", 1.5, own.t, own.q)
    assert deviation_gap(view, 1.5, 2.0) == pytest.approx(u, abs=1e-12)
    assert Bundle(1 / 3, 1.0) == dev
