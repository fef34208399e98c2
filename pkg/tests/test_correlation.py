import math

import numpy as np
import pytest

from ccsgsd.correlation import (
    InformationTable,
    StatIndex,
    ccs_matrix,
    ccs_matrix_planned,
    default_order,
    shared_control_matrix,
)
from ccsgsd.exceptions import InputError, NestingError
from oracles import shared_control_mc

# frozen Monte Carlo oracle (tests/oracles.py, 1e6 reps, seed 7): cross-arm,
# same population, look fractions 0.5 vs 1, equal allocation
SHARED_CONTROL_CROSS_TIME = 0.3528


def two_look_pattern(p, t1, t2):
    s = math.sqrt
    upper = [
        [1, s(p), s(t1 / t2), s(p * t1 / t2), s(t1), s(p * t1)],
        [0, 1, s(p * t1 / t2), s(t1 / t2), s(p * t1), s(t1)],
        [0, 0, 1, s(p), s(t2), s(p * t2)],
        [0, 0, 0, 1, s(p * t2), s(t2)],
        [0, 0, 0, 0, 1, s(p)],
        [0, 0, 0, 0, 0, 1],
    ]
    u = np.array(upper, dtype=float)
    return u + np.triu(u, 1).T


def test_two_look_pattern(rng):
    for _ in range(20):
        p = rng.uniform(0.05, 0.95)
        t1, t2 = np.sort(rng.uniform(0.05, 0.95, size=2))
        np.testing.assert_allclose(ccs_matrix_planned(p, [t1, t2, 1.0]), two_look_pattern(p, t1, t2), atol=1e-12, rtol=0)


def test_planned_examples():
    c = ccs_matrix_planned(0.6, [0.5, 0.75, 1.0])
    assert c[0, 1] == pytest.approx(math.sqrt(0.6), abs=1e-12)
    assert c[0, 2] == pytest.approx(math.sqrt(0.5 / 0.75), abs=1e-12)
    c2 = ccs_matrix_planned(0.5, [0.5, 1.0])
    assert c2[0, 3] == pytest.approx(0.5, abs=1e-12)
    # a prevalence of one leaves only the overall population
    c1 = ccs_matrix_planned(1.0, [0.5, 1.0])
    np.testing.assert_allclose(c1, [[1, np.sqrt(0.5)], [np.sqrt(0.5), 1]], atol=1e-14)


def test_planned_matches_table_for_any_scale():
    for n_total in (1.0, 434.0, 1e6):
        info = InformationTable.planned([0.6], [0.5, 0.75, 1.0], n_total)
        np.testing.assert_allclose(ccs_matrix(info), ccs_matrix_planned(0.6, [0.5, 0.75, 1.0]), atol=1e-14)


def test_general_entry_formula(rng):
    n = np.array([[10, 25, 40], [30, 50, 90], [35, 70, 115]], dtype=float)
    order = default_order(3, 3)
    c = ccs_matrix(n, order)
    for a, s in enumerate(order):
        for b, u in enumerate(order):
            expect = n[min(s.population, u.population), min(s.analysis, u.analysis)] / math.sqrt(
                n[s.population, s.analysis] * n[u.population, u.analysis])
            assert c[a, b] == pytest.approx(min(expect, 1.0), abs=1e-14)
    assert np.allclose(c, c.T)
    assert np.linalg.eigvalsh(c).min() > -1e-12
    np.testing.assert_allclose(ccs_matrix(n * 7.3, order), c, atol=1e-14)


def test_temporal_and_population_special_cases():
    n = np.array([[20, 40], [50, 100]], dtype=float)
    c = ccs_matrix(n, [StatIndex(0, 0), StatIndex(0, 1), StatIndex(1, 0)])
    assert c[0, 1] == pytest.approx(math.sqrt(20 / 40))
    assert c[0, 2] == pytest.approx(math.sqrt(20 / 50))


@pytest.mark.parametrize("bad", [
    [[10, 5], [20, 30]],        # decreasing over analyses
    [[30, 40], [20, 50]],       # subgroup larger than population
    [[0, 10], [5, 20]],         # nonpositive
])
def test_nesting_errors(bad):
    with pytest.raises(NestingError):
        ccs_matrix(bad)


def test_order_errors():
    with pytest.raises(InputError):
        ccs_matrix([[1, 2], [2, 3]], [StatIndex(0, 0), StatIndex(0, 0)])
    with pytest.raises(InputError):
        ccs_matrix([[1, 2], [2, 3]], [StatIndex(2, 0)])
    with pytest.raises(InputError):
        ccs_matrix_planned(0.0, [0.5, 1])


def test_shared_control_equal_allocation():
    n = [[100.0, 200.0]]
    c = shared_control_matrix({"A": n, "B": n}, n)
    idx = {(s.arm, s.analysis): k for k, s in enumerate(
        [StatIndex(0, k, a) for a in "AB" for k in range(2)])}
    assert c[idx["A", 0], idx["B", 0]] == pytest.approx(0.5, abs=1e-12)
    assert c[idx["A", 0], idx["B", 1]] == pytest.approx(0.5 * math.sqrt(0.5), abs=1e-12)
    assert c[idx["A", 0], idx["B", 1]] == pytest.approx(SHARED_CONTROL_CROSS_TIME, abs=0.003)


def test_shared_control_mc_oracle_runs():
    assert shared_control_mc(200, 200, 200, 0.5, 200_000, 1) == pytest.approx(0.3536, abs=0.006)


def test_shared_control_single_arm_reduces():
    arm = np.array([[30.0, 60.0], [50.0, 100.0]])
    c = shared_control_matrix({"A": arm}, arm)
    np.testing.assert_allclose(c, ccs_matrix(arm, [StatIndex(i, k) for i in range(2) for k in range(2)]),
                               atol=1e-12)


def test_shared_control_unequal_dunnett_factor():
    na, nb, n0 = 120.0, 60.0, 90.0
    c = shared_control_matrix({"A": [[na]], "B": [[nb]]}, [[n0]])
    assert c[0, 1] == pytest.approx(math.sqrt(na / (na + n0)) * math.sqrt(nb / (nb + n0)), abs=1e-12)


def test_shared_control_requires_control():
    with pytest.raises(InputError):
        shared_control_matrix({"A": [[1.0]]}, None)
    with pytest.raises(InputError):
        shared_control_matrix({}, [[1.0]])


def test_information_table_helpers():
    t = InformationTable.planned([0.3, 0.6], [0.5, 1.0], 100)
    assert t.n_populations == 3 and t.n_analyses == 2
    np.testing.assert_allclose(t.fractions, [[0.5, 1], [0.5, 1], [0.5, 1]])
    t2 = t.with_column(0, [20, 35, 55])
    assert t2 != t and t2.n[0, 0] == 20
    with pytest.raises(ValueError):
        t.n[0, 0] = 1
