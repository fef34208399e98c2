import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ccsgsd.exceptions import InputError
from ccsgsd.spending import FAMILIES, SpendingSpec, spend

# closed form evaluated with mpmath at 40 digits
LDOF_0125_HALF = 4.119789182964852e-4
LDOF_0125_THREE_QUARTERS = 3.925317689294399e-3

SPECS = [SpendingSpec("ldof", 0.025), SpendingSpec("ldpocock", 0.025),
         SpendingSpec("hsd", 0.025, -4), SpendingSpec("hsd", 0.025, 2),
         SpendingSpec("kd", 0.025, 3), SpendingSpec("kd", 0.025, 0.5)]


def test_ldof_values():
    s = SpendingSpec("LanDeMets-OBF", 0.0125)
    assert s.family == "ldof"
    assert spend(0.5, s) == pytest.approx(LDOF_0125_HALF, abs=1e-9)
    assert spend(0.75, s) == pytest.approx(LDOF_0125_THREE_QUARTERS, abs=1e-9)


@pytest.mark.parametrize("spec", SPECS)
def test_boundary_conditions(spec):
    assert spend(0.0, spec) == 0.0
    assert spend(1.0, spec) == spec.level
    assert spend(1.7, spec) == spec.level
    t = np.linspace(0.05, 0.9999, 500)
    f = spend(t, spec)
    assert np.all(np.diff(f) > 0)
    assert np.all(np.diff(spend(np.linspace(0, 1, 1001), spec)) >= 0)
    assert np.all(f < spec.level)


@settings(max_examples=60, deadline=None)
@given(t=st.floats(0.01, 0.99), a=st.floats(0.001, 0.2), b=st.floats(0.001, 0.2),
       fam=st.sampled_from(FAMILIES))
def test_monotone_in_level(t, a, b, fam):
    lo, hi = sorted((a, b))
    s = SpendingSpec(fam, lo)
    assert spend(t, s) <= spend(t, s.with_level(hi)) + 1e-15


def test_obf_spends_less_than_pocock_early():
    t = np.linspace(0.05, 0.5, 20)
    assert np.all(spend(t, SpendingSpec("ldof", 0.025)) < spend(t, SpendingSpec("ldpocock", 0.025)))


def test_closed_forms():
    assert spend(0.5, SpendingSpec("ldpocock", 0.02)) == pytest.approx(0.02 * math.log(1 + (math.e - 1) * 0.5))
    g = -4
    assert spend(0.3, SpendingSpec("hsd", 0.02, g)) == pytest.approx(
        0.02 * (1 - math.exp(-g * 0.3)) / (1 - math.exp(-g)))
    assert spend(0.3, SpendingSpec("kd", 0.02, 2)) == pytest.approx(0.02 * 0.09)


@pytest.mark.parametrize("kwargs", [
    {"family": "nope"}, {"family": "ldof", "level": 0.0}, {"family": "ldof", "level": 1.0},
    {"family": "hsd", "parameter": 0}, {"family": "kd", "parameter": -1},
    {"family": "ldof", "parameter": 2.0},
])
def test_invalid_specs(kwargs):
    with pytest.raises(InputError):
        SpendingSpec(**kwargs)


def test_negative_time():
    with pytest.raises(InputError):
        spend(-0.1, SpendingSpec())
