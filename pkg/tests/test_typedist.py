import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from singlecross.errors import DivideAtTop, OutOfSupport, ReversedInterval, ZeroDensity
from singlecross.prefdomain import PreferenceFamily
from singlecross.typedist import (
    AffineCDF,
    Conditional,
    PiecewiseLinearCDF,
    SliceMixture,
    TruncatedExponential,
    Uniform,
    distribution_from_record,
)

DISTS = {
    "uniform": Uniform(0.0, 1.0),
    "affine": AffineCDF(1.0, 2.0),
    "exp_decay": TruncatedExponential(0.0, 10.0, 0.4),
    "exp_rise": TruncatedExponential(1.0, 3.0, -1.5),
    "piecewise": PiecewiseLinearCDF((0.0, 1.0, 2.0, 4.0), (0.0, 0.1, 0.4, 1.0)),
    "conditional": Conditional(TruncatedExponential(0.0, 10.0, 0.4), 2.0),
}
unit = st.floats(0.0, 1.0, allow_nan=False)


def at(d, u):
    return d.lo + u * (d.hi - d.lo)


def test_uniform_examples():
    d = Uniform(0.0, 1.0)
    assert d.cdf(0.25) == pytest.approx(0.25)
    assert d.density(0.7) == pytest.approx(1.0)
    assert d.interval_mass(0.2, 0.5) == pytest.approx(0.3)
    assert d.virtual_value(0.5) == pytest.approx(0.0)
    assert d.hazard(0.5) == pytest.approx(2.0)


def test_affine_cdf_example():
    d = AffineCDF(1.0, 2.0)
    assert d.cdf(1.5) == pytest.approx(0.5)
    assert d.virtual_value(1.5) == pytest.approx(1.0)
    assert distribution_from_record({"kind": "AFFINE_CDF", "a": 1.0, "b": 2.0}) == d


def test_truncated_exponential_example():
    d = TruncatedExponential(0.0, 1.0, 1.0)
    assert d.cdf(0.5) == pytest.approx((1 - math.exp(-0.5)) / (1 - math.exp(-1.0)), abs=1e-14)


def test_errors_and_codes():
    d = Uniform(0.0, 1.0)
    with pytest.raises(OutOfSupport) as err:
        d.cdf(1.5)
    assert err.value.code == "OUT_OF_SUPPORT"
    with pytest.raises(ReversedInterval):
        d.interval_mass(0.6, 0.2)
    with pytest.raises(DivideAtTop):
        d.hazard(1.0)
    flat = PiecewiseLinearCDF((0.0, 1.0, 2.0), (0.0, 1.0, 1.0))
    with pytest.raises(ZeroDensity):
        flat.virtual_value(1.5)
    with pytest.raises(ValueError):
        Uniform(1.0, 1.0)
    with pytest.raises(ValueError):
        TruncatedExponential(0.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        PiecewiseLinearCDF((0.0, 1.0), (0.0, 0.9))


def test_monotone_hazard_detection():
    assert Uniform(0.0, 1.0).is_monotone_hazard()
    assert TruncatedExponential(0.0, 5.0, 2.0).is_monotone_hazard()
    # concave CDF then a jump in density breaks the hazard ordering
    bumpy = PiecewiseLinearCDF((0.0, 1.0, 2.0), (0.0, 0.9, 1.0))
    assert not bumpy.is_monotone_hazard()


def test_restrict_and_conditional():
    d = Uniform(0.0, 1.0)
    assert d.restrict(0.0) is d
    c = d.restrict(0.5)
    assert c.support == (0.5, 1.0)
    assert c.cdf(0.75) == pytest.approx(0.5)
    with pytest.raises(OutOfSupport):
        Conditional(d, 1.0)


def test_slice_mixture_validation():
    fam = PreferenceFamily.linear(0.0, 10.0)
    mix = SliceMixture(((fam, Uniform(0, 1), 0.3), (fam, Uniform(1, 2), 0.7)))
    assert mix.weights == [0.3, 0.7]
    assert mix.total_mass() == pytest.approx(1.0)
    SliceMixture(((fam, Uniform(0, 1), 1.0), (fam, Uniform(1, 2), 0.0)))
    with pytest.raises(ValueError):
        SliceMixture(((fam, Uniform(0, 1), 0.5),))
    with pytest.raises(ValueError):
        SliceMixture(((fam, Uniform(0, 1), -0.5), (fam, Uniform(0, 1), 1.5)))
    with pytest.raises(OutOfSupport):
        SliceMixture(((fam, Uniform(0, 20), 1.0),))


@pytest.mark.parametrize("name", sorted(DISTS))
def test_record_round_trip(name):
    d = DISTS[name]
    assert distribution_from_record(d.to_record()) == d


@pytest.mark.parametrize("name", sorted(DISTS))
def test_total_mass_is_one(name):
    assert DISTS[name].total_mass_check() == pytest.approx(1.0, abs=1e-4)
    assert DISTS[name].cdf(DISTS[name].hi) == 1.0
    assert DISTS[name].cdf(DISTS[name].lo) == 0.0


@pytest.mark.parametrize("name", sorted(DISTS))
@given(a=unit, b=unit, c=unit)
def test_interval_additivity(name, a, b, c):
    d = DISTS[name]
    x, y, z = sorted(at(d, u) for u in (a, b, c))
    assert abs(d.interval_mass(x, y) + d.interval_mass(y, z) - d.interval_mass(x, z)) <= 1e-12


@pytest.mark.parametrize("name", sorted(DISTS))
@given(u=st.floats(0.01, 0.99))
def test_cdf_derivative_matches_density(name, u):
    d = DISTS[name]
    x = at(d, u)
    if name == "piecewise" and min(abs(x - k) for k in d.knots) < 1e-3:
        return
    h = 1e-6 * (d.hi - d.lo)
    slope = (d.cdf(x + h) - d.cdf(x - h)) / (2 * h)
    assert slope == pytest.approx(d.density(x), rel=1e-4, abs=1e-4)


@pytest.mark.parametrize("name", ["uniform", "affine", "exp_decay", "exp_rise", "conditional"])
def test_virtual_value_monotone_under_monotone_hazard(name):
    d = DISTS[name]
    assert d.is_monotone_hazard()
    xs = np.linspace(d.lo, d.hi, 300)[:-1]
    vv = np.array([d.virtual_value(x) for x in xs])
    assert np.all(np.diff(vv) > 0.0)


@pytest.mark.parametrize("name", sorted(DISTS))
@given(u=unit)
def test_ppf_inverts_cdf(name, u):
    d = DISTS[name]
    assert d.cdf(d.ppf(u)) == pytest.approx(u, abs=1e-10)


@given(rate=st.floats(-5.0, 5.0).filter(lambda r: abs(r) > 1e-3), width=st.floats(0.1, 10.0))
def test_truncated_exponentials_have_monotone_hazard(rate, width):
    assert TruncatedExponential(0.0, width, rate).is_monotone_hazard()
