import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kmclust.graph import WeightedGraph, gen_random_instance
from kmclust.nbd_size import (NbdSketch, SketchParams, build_sketch, draw_ranks, query_size, query_sizes,
                              round_ranks)
from kmclust.oracles import MetricOracle

from conftest import runtime, single_machine


def complete_graph(n):
    return WeightedGraph(n, tuple((u, v, 1) for u in range(n) for v in range(u + 1, n)))


def naive_mean_rank(params, seed, oracle, v, d):
    """Reported rank per repetition from the replayed rank draw and exact distances."""
    _, levels = draw_ranks(params, seed)
    ranks = params.rank_of_level()
    ball = [u for u in range(params.n) if oracle.d(v, u) <= d]
    reps = [ranks[min(int(row[u]) for u in ball)] for row in levels]
    return float(np.mean(reps))


def test_params_formulas():
    p = SketchParams(100, 0.5, c=2)
    ep = 0.5 / 4.5
    assert p.eps_prime == pytest.approx(ep)
    assert p.t == math.ceil(2 * math.log(100) / math.log(1 + ep))
    assert p.ell == math.ceil(2 * math.log2(100) / ep**2)
    with pytest.raises(ValueError):
        SketchParams(10, 0)
    with pytest.raises(ValueError):
        SketchParams(10, 1.5)


def test_single_vertex():
    rt = single_machine(WeightedGraph(1, ()))
    sk = build_sketch(rt, SketchParams(1, 0.5), seed=0)
    assert sk.mssp_calls == 1
    assert sk.sentinel_count(0, 1) == 0
    assert query_size(sk, 0, 1) == 1.0


def test_build_is_deterministic(mode):
    g, _ = gen_random_instance(25, 0.2, seed=2)
    a = build_sketch(runtime(g, mode=mode), SketchParams(25, 1.0, 0.5), seed=4)
    b = build_sketch(runtime(g, seed=9, mode=mode), SketchParams(25, 1.0, 0.5), seed=4)
    assert a.dumps() == b.dumps()


def test_modes_build_the_same_sketch():
    g, _ = gen_random_instance(20, 0.25, seed=5)
    params = SketchParams(20, 1.0, 0.5)
    a = build_sketch(runtime(g, k=3), params, seed=1)
    b = build_sketch(runtime(g, k=3, mode="distributed"), params, seed=1)
    assert np.array_equal(a.offsets, b.offsets) and np.array_equal(a.dists, b.dists)
    assert np.array_equal(a.cum_qual, b.cum_qual)
    assert np.allclose(a.cum_rank, b.cum_rank, rtol=0, atol=1e-9)
    assert a.mssp_calls == b.mssp_calls


@pytest.mark.parametrize("n,eps", [(30, 0.5), (64, 1.0)])
def test_call_count_matches_nonempty_levels(n, eps):
    g, _ = gen_random_instance(n, 0.15, seed=n)
    params = SketchParams(n, eps, 1.0)
    rt = runtime(g)
    sk = build_sketch(rt, params, seed=3)
    _, levels = draw_ranks(params, 3)
    expected = sum(len(np.unique(row)) for row in levels)
    assert sk.mssp_calls == expected <= params.ell * params.t
    assert rt.ledger.per_subroutine["nbd_sketch"]["calls"] == expected


@pytest.mark.parametrize("seed", range(3))
def test_queries_match_per_repetition_oracle(seed):
    g, _ = gen_random_instance(30, 0.15, seed=seed)
    oracle = MetricOracle(g)
    params = SketchParams(30, 0.5, 1.0)
    sk = build_sketch(runtime(g, seed=seed), params, seed=seed)
    rng = np.random.default_rng(seed)
    for _ in range(40):
        v = int(rng.integers(30))
        d = oracle.d(v, int(rng.integers(30)))
        if d == 0:
            continue
        want = naive_mean_rank(params, seed, oracle, v, d)
        assert sk.mean_rank(v, d) == pytest.approx(want, rel=1e-9)
        assert sk.sentinel_count(v, d) == 0
    all_at = sk.mean_ranks(oracle.d(0, 5))
    assert all(all_at[v] == pytest.approx(sk.mean_rank(v, oracle.d(0, 5))) for v in range(30))


def test_complete_graph_estimates():
    """K_200 at d = 1: the estimate lands within (1 ± ε)·200 for at least 95% of seeds."""
    n, eps = 200, 0.25
    rt = single_machine(complete_graph(n))
    hits = 0
    for seed in range(100):
        est = query_size(build_sketch(rt, SketchParams(n, eps), seed=seed), 0, 1)
        hits += (1 - eps) * n <= est <= (1 + eps) * n
    assert hits >= 95


def test_below_lightest_edge_gives_singletons():
    g, _ = gen_random_instance(60, 0.1, seed=7)
    d = g.min_weight / 2
    params = SketchParams(60, 0.5)
    ok = total = 0
    for seed in range(4):
        est = query_sizes(build_sketch(runtime(g), params, seed=seed), d)
        ok += int(np.sum(est <= 1.5))
        total += 60
    assert ok >= 0.95 * total


def test_sandwich_on_random_graph():
    n, eps = 150, 0.5
    g, _ = gen_random_instance(n, 2 * math.log(n) / n, seed=11)
    oracle = MetricOracle(g)
    sk = build_sketch(runtime(g), SketchParams(n, eps), seed=11)
    rng = np.random.default_rng(0)
    good = 0
    for _ in range(100):
        v, u = map(int, rng.integers(n, size=2))
        d = max(oracle.d(v, u), g.min_weight)
        b = oracle.ball_size(v, d)
        good += query_size(sk, v, d / (1 + eps)) <= (1 + eps) * b and query_size(sk, v, d * (1 + eps)) >= b / (1 + eps)
    assert good >= 95


def test_expected_min_rank_in_ball():
    g, _ = gen_random_instance(40, 0.1, seed=1)
    oracle = MetricOracle(g)
    raw, _ = draw_ranks(SketchParams(40, 0.25, 8.0), seed=5)
    for v, u in [(0, 3), (5, 9), (12, 30)]:
        ball = [w for w in range(40) if oracle.d(v, w) <= oracle.d(v, u)]
        mins = raw[:, ball].min(axis=1)
        s = len(ball)
        sd = math.sqrt(s / ((s + 1) ** 2 * (s + 2))) / math.sqrt(len(mins))
        assert abs(mins.mean() - 1 / (1 + s)) <= 4 * sd


@given(st.integers(2, 500), st.sampled_from([0.05, 0.1, 0.25, 1.0]), st.integers(0, 2**32))
def test_rounded_ranks_are_sound(n, eps, seed):
    params = SketchParams(n, eps, 0.05)
    raw, levels = draw_ranks(params, seed)
    rounded = params.rank_of_level()[levels]
    assert levels.min() >= 1 and levels.max() < params.t
    assert np.all(raw >= (1 + params.eps_prime) / n**2)
    assert np.all(rounded <= raw * (1 + 1e-12))
    assert np.all(raw < rounded * (1 + params.eps_prime) * (1 + 1e-12))


def test_round_ranks_at_level_boundaries():
    params = SketchParams(10, 1.0)
    exact = params.rank_of_level()[:6]
    assert round_ranks(exact, params).tolist() == list(range(6))


def test_json_roundtrip():
    g, _ = gen_random_instance(20, 0.3, seed=3)
    sk = build_sketch(runtime(g), SketchParams(20, 1.0, 0.5), seed=2)
    back = NbdSketch.loads(sk.dumps())
    assert back.dumps() == sk.dumps()
    assert np.array_equal(query_sizes(back, 3), query_sizes(sk, 3))


def test_query_rejects_nonpositive_distance():
    g, _ = gen_random_instance(10, 0.5, seed=0)
    sk = build_sketch(runtime(g), SketchParams(10, 1.0, 0.5), seed=0)
    with pytest.raises(ValueError):
        query_size(sk, 0, 0)
