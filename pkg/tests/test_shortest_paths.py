from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kmclust.graph import WeightedGraph, gen_random_instance
from kmclust.oracles import MetricOracle, dijkstra_exact
from kmclust.runtime import charge_formula
from kmclust.shortest_paths import bit_subsets, exclusive_mssp, mssp, sssp

from conftest import path_graph, runtime


def dists(table, n):
    return [table.distance(v) for v in range(n)]


def test_sssp_on_path(mode):
    rt = runtime(path_graph(3), k=2, mode=mode)
    assert dists(sssp(rt, 0), 3) == [0, 1, 2]


def test_modes_agree_on_random_graph():
    g, _ = gen_random_instance(40, 0.15, seed=3)
    out = []
    for mode in ("charged", "distributed"):
        t = mssp(runtime(g, k=4, mode=mode), [2, 17, 33])
        out.append((t.dist.copy(), t.nearest.copy()))
    assert np.array_equal(out[0][0], out[1][0]) and np.array_equal(out[0][1], out[1][1])


@pytest.mark.parametrize("seed", range(3))
def test_sssp_matches_exact_dijkstra(mode, seed):
    g, _ = gen_random_instance(50, 0.1, seed=seed)
    got = dists(sssp(runtime(g, k=5, seed=seed, mode=mode), 7), 50)
    assert got == dijkstra_exact(g, 7)


def test_mssp_examples(mode):
    rt = runtime(path_graph(3), k=2, mode=mode)
    t = mssp(rt, [0, 2])
    assert t.distance(1) == 1 and t.nearest[1] == 0  # tie goes to the smaller id
    assert int(t.nearest_host[1]) == int(rt.host[0])
    assert dists(mssp(rt, range(3)), 3) == [0, 0, 0]


@pytest.mark.parametrize("seed", range(3))
def test_mssp_is_min_over_sources(mode, seed):
    g, _ = gen_random_instance(50, 0.1, seed=10 + seed)
    T = np.random.default_rng(seed).choice(50, size=6, replace=False)
    rows = {int(s): dijkstra_exact(g, int(s)) for s in T}
    t = mssp(runtime(g, k=4, seed=seed, mode=mode), T)
    for v in range(50):
        best = min(rows[s][v] for s in rows)
        assert t.distance(v) == best
        assert int(t.nearest[v]) in rows and rows[int(t.nearest[v])][v] == best


def test_parent_pointers_lead_to_nearest(mode):
    g, _ = gen_random_instance(30, 0.2, seed=4)
    t = mssp(runtime(g, mode=mode), [1, 20])
    for v in range(30):
        u, hops = v, 0
        while t.parent[u] >= 0:
            u, hops = int(t.parent[u]), hops + 1
            assert hops <= 30
        assert u == t.nearest[v]


def test_exclusive_examples(mode):
    rt = runtime(path_graph(3), k=2, mode=mode)
    t = exclusive_mssp(rt, [0, 2])
    assert (int(t.nearest[0]), t.distance(0)) == (2, 2)
    assert (int(t.nearest[2]), t.distance(2)) == (0, 2)
    g, _ = gen_random_instance(25, 0.2, seed=1)
    t = exclusive_mssp(runtime(g, mode=mode), [4, 19])
    assert int(t.nearest[4]) == 19 and int(t.nearest[19]) == 4


@pytest.mark.parametrize("seed", range(2))
def test_exclusive_matches_oracle(mode, seed):
    g, _ = gen_random_instance(50, 0.1, seed=20 + seed)
    oracle = MetricOracle(g)
    T = sorted(np.random.default_rng(seed).choice(50, size=9, replace=False).tolist())
    t = exclusive_mssp(runtime(g, k=4, seed=seed, mode=mode), T)
    for v in T:
        best = min(oracle.d(v, u) for u in T if u != v)
        assert t.distance(v) == best
        assert int(t.nearest[v]) in T and int(t.nearest[v]) != v


def test_rejections():
    rt = runtime(path_graph(3))
    with pytest.raises(ValueError):
        mssp(rt, [])
    with pytest.raises(ValueError):
        exclusive_mssp(rt, [1])
    with pytest.raises(ValueError):
        sssp(rt, 5)


@given(st.integers(2, 70))
def test_subsets_separate_every_pair(size):
    index = np.arange(size)
    subsets = list(bit_subsets(index, size))
    assert len(subsets) == 2 * max(1, (size - 1).bit_length())
    for v in range(size):
        for w in range(size):
            if v != w:
                assert any(s[w] and not s[v] for s in subsets)


@pytest.mark.parametrize("n", [2, 5, 9])
def test_relaxation_supersteps_follow_hop_count(n):
    rt = runtime(path_graph(n), k=3, mode="distributed")
    sssp(rt, 0)
    # h = n-1 relaxation layers, one confirming step, then the forest exchange
    assert rt.ledger.supersteps <= (n - 1) + 1 + 1


def test_charged_rounds_follow_formula():
    g, _ = gen_random_instance(64, 0.1, seed=0)
    rt = runtime(g, k=4)
    sssp(rt, 0, eps=0.5)
    mssp(rt, [1, 2], eps=0.5)
    assert rt.ledger.charged_rounds == 2 * charge_formula(64, 4, 0.5)
    exclusive_mssp(rt, [1, 2, 3, 4, 5], eps=0.5)
    assert rt.ledger.charged_rounds == (2 + 6) * charge_formula(64, 4, 0.5)


def test_fractional_weights_exact(mode):
    g = WeightedGraph(3, ((0, 1, Fraction(1, 3)), (1, 2, Fraction(1, 7))))
    assert dists(sssp(runtime(g, k=2, mode=mode), 0), 3) == [0, Fraction(1, 3), Fraction(10, 21)]
