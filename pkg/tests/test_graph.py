import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ccsgsd.exceptions import InputError
from ccsgsd.graph import MultiplicityGraph


def two_endpoint_graph():
    # OS pair (0, 1) sends half to each other and a quarter to each PFS node;
    # PFS pair (2, 3) passes everything to each other
    w = [0.5, 0.5, 0, 0]
    g = [[0, 0.5, 0.25, 0.25],
         [0.5, 0, 0.25, 0.25],
         [0, 0, 0, 1],
         [0, 0, 1, 0]]
    return MultiplicityGraph(w, g)


def test_subset_equal_to_all_keeps_weights():
    g = two_endpoint_graph()
    assert g.subset_weights((0, 1, 2, 3)) == {0: 0.5, 1: 0.5, 2: 0.0, 3: 0.0}


def test_two_node_full_transfer():
    g = MultiplicityGraph([0.5, 0.5], [[0, 1], [1, 0]])
    assert g.subset_weights((0,)) == {0: 1.0}
    r = g.remove_rejected(1)
    assert r.labels == (0,) and r.weight_of(0) == 1.0


def test_two_endpoint_transfer_to_secondary():
    g = two_endpoint_graph()
    w = g.subset_weights((2, 3))
    assert w[2] == pytest.approx(0.5) and w[3] == pytest.approx(0.5)
    r = g.remove_rejected(0).remove_rejected(1)
    assert r.as_dict() == pytest.approx({2: 0.5, 3: 0.5})


def test_remove_last_gives_empty():
    g = MultiplicityGraph([1.0], [[0.0]])
    e = g.remove_rejected(0)
    assert e.is_empty and len(e) == 0


def test_errors():
    g = MultiplicityGraph([0.5, 0.5], [[0, 1], [1, 0]])
    with pytest.raises(InputError):
        g.subset_weights(())
    with pytest.raises(InputError):
        g.remove_rejected(5)
    with pytest.raises(InputError):
        MultiplicityGraph([0.7, 0.7], [[0, 1], [1, 0]])
    with pytest.raises(InputError):
        MultiplicityGraph([0.5, 0.5], [[0.1, 0.9], [1, 0]])
    with pytest.raises(InputError):
        MultiplicityGraph([0.5, 0.5], [[0, 1.2], [1, 0]])
    with pytest.raises(InputError):
        MultiplicityGraph(np.full(13, 1 / 13), np.zeros((13, 13)))


def test_immutable():
    g = MultiplicityGraph([0.5, 0.5], [[0, 1], [1, 0]])
    with pytest.raises(ValueError):
        g.weights[0] = 1


def test_equal_graph():
    g = MultiplicityGraph.equal(3)
    assert g.subset_weights((0, 2)) == pytest.approx({0: 0.5, 2: 0.5})


@st.composite
def graphs(draw):
    m = draw(st.integers(2, 4))
    w = np.array(draw(st.lists(st.floats(0, 1), min_size=m, max_size=m)))
    w = w / max(w.sum(), 1.0) if w.sum() > 1 else w
    g = np.array(draw(st.lists(st.lists(st.floats(0, 1), min_size=m, max_size=m), min_size=m, max_size=m)))
    np.fill_diagonal(g, 0)
    rows = g.sum(axis=1, keepdims=True)
    g = np.where(rows > 1, g / np.where(rows > 0, rows, 1), g)
    return MultiplicityGraph(w, g)


def _remove_in_order(graph, order):
    for x in order:
        graph = graph.remove_rejected(x)
    return graph


@settings(max_examples=60, deadline=None)
@given(graphs())
def test_order_independence_and_mass(g):
    labels = g.labels
    for size in range(1, len(labels)):
        for J in itertools.combinations(labels, size):
            drop = [x for x in labels if x not in J]
            results = [_remove_in_order(g, order).as_dict() for order in itertools.permutations(drop)]
            for r in results[1:]:
                for k in J:
                    assert r[k] == pytest.approx(results[0][k], abs=1e-10)
            sw = g.subset_weights(J)
            for k in J:
                assert sw[k] == pytest.approx(results[0][k], abs=1e-10)
                assert sw[k] >= g.weight_of(k) - 1e-12
            assert sum(sw.values()) <= 1 + 1e-12
