from fractions import Fraction

import numpy as np
import pytest

from kmclust.facility_location import (RadiusTable, approximate_mis, compute_radii, dual_certificate,
                                       mettu_plaxton_beta, verify_certificate)
from kmclust.graph import CostVector, WeightedGraph, gen_random_instance
from kmclust.nbd_size import SketchParams, build_sketch
from kmclust.oracles import MetricOracle, brute_force, exact_radii
from kmclust.powers import EpsPowers

from conftest import runtime

EPS = Fraction(1, 10)


def radii_for(graph, costs, beta=1, eps=EPS, seed=0):
    sk = build_sketch(runtime(graph), SketchParams(graph.n, float(eps)), seed=seed)
    return compute_radii(sk, costs, beta, eps)


def in_band(approx, exact, eps=EPS):
    band = (1 + eps) ** 3
    return exact / band <= approx <= exact * band


def test_radius_when_ball_is_the_vertex_alone():
    g = WeightedGraph(2, ((0, 1, 100),))
    costs = CostVector((5, 5))
    assert exact_radii(g, costs) == [5, 5]
    assert all(in_band(r, 5) for r in radii_for(g, costs).radii())


@pytest.mark.parametrize("beta,expected", [(1, Fraction(5, 2)), (Fraction(3, 2), Fraction(13, 4))])
def test_radius_two_vertices(beta, expected):
    g = WeightedGraph(2, ((0, 1, 2),))
    costs = CostVector((3, 3))
    assert exact_radii(g, costs, beta) == [expected, expected]
    assert all(in_band(r, expected) for r in radii_for(g, costs, beta).radii())


def test_zero_and_subunit_costs():
    g = WeightedGraph(3, ((0, 1, 1), (1, 2, 1)))
    t = radii_for(g, CostVector((0, Fraction(1, 2), 4)))
    assert t.radius(0) == 0
    exact = exact_radii(g, CostVector((0, Fraction(1, 2), 4)))
    assert exact[1] == Fraction(1, 2) and in_band(t.radius(1), exact[1])
    assert in_band(t.radius(2), exact[2])


@pytest.mark.parametrize("seed", range(4))
def test_radius_sandwich_random(seed):
    g, costs = gen_random_instance(40, 0.1, seed=seed)
    exact = exact_radii(g, costs)
    t = radii_for(g, costs, seed=seed)
    assert all(in_band(t.radius(v), exact[v]) for v in range(40))


def test_mis_of_single_vertex(mode):
    g, _ = gen_random_instance(10, 0.3, seed=0)
    W = np.zeros(10, dtype=bool)
    W[4] = True
    assert np.flatnonzero(approximate_mis(runtime(g, mode=mode), W, 5, EPS, seed=0)).tolist() == [4]


def test_mis_two_close_vertices(mode):
    g = WeightedGraph(2, ((0, 1, 1),))
    for seed in range(5):
        I = approximate_mis(runtime(g, k=2, mode=mode), np.ones(2, dtype=bool), 3, EPS, seed=seed)
        assert I.sum() == 1


@pytest.mark.parametrize("seed", range(3))
def test_mis_against_exact_distances(seed):
    g, _ = gen_random_instance(100, 0.05, seed=seed)
    oracle = MetricOracle(g)
    rng = np.random.default_rng(seed)
    W = rng.random(100) < 0.5
    dd = sorted(oracle.d(0, v) for v in range(100))
    d = dd[50]
    I = approximate_mis(runtime(g, k=4, seed=seed), W, d, EPS, seed=seed)
    members = np.flatnonzero(I)
    assert set(members) <= set(np.flatnonzero(W))
    band = (1 + EPS) ** 3
    for x in range(len(members)):
        for y in range(x + 1, len(members)):
            assert oracle.d(int(members[x]), int(members[y])) >= d / band
    for w in np.flatnonzero(W):
        assert min(oracle.d(int(w), int(u)) for u in members) <= d * band


def test_single_vertex_instance(mode):
    g = WeightedGraph(1, ())
    run = mettu_plaxton_beta(runtime(g, k=2, mode=mode), CostVector((7,)), eps=EPS)
    sol = run.solution
    assert sol.S == (0,) and sol.F == 7 and sol.C == 0 and sol.assignment == {}


def two_cliques():
    edges = [(u, v, 1) for block in (range(5), range(5, 10)) for u in block for v in block if u < v]
    edges.append((0, 5, 100))
    costs = [100] * 10
    costs[2] = costs[7] = 1
    return WeightedGraph(10, tuple(edges)), CostVector(tuple(costs))


def test_two_cliques_open_one_cheap_vertex_each(mode):
    g, costs = two_cliques()
    opt, witness = brute_force("facloc", g, costs)
    assert witness == (2, 7) and opt == 10
    for seed in range(3):
        sol = mettu_plaxton_beta(runtime(g, seed=seed, mode=mode), costs, eps=EPS, seed=seed,
                                 sketch_c=4 if mode == "charged" else 0.5).solution
        assert sol.S == (2, 7) and sol.cost == opt


def test_output_contract(mode):
    g, costs = gen_random_instance(20, 0.2, seed=3)
    rt = runtime(g, k=3, mode=mode)
    sol = mettu_plaxton_beta(rt, costs, eps=Fraction(1, 2), seed=3, sketch_c=0.5).solution
    clients = [j for j in range(20) if j not in sol.S]
    assert sorted(sol.assignment) == clients
    for j, (f, h) in sol.assignment.items():
        assert f in sol.S and h == rt.host[f]
        assert (j, int(rt.host[j])) in sol.clients_of[f]
    assert sum(len(c) for c in sol.clients_of.values()) == len(clients)
    js = sol.to_json()
    assert set(js) == {"S", "assignment", "F", "C"}


def test_certificate_single_vertex():
    g = WeightedGraph(1, ())
    oracle = MetricOracle(g)
    radii = RadiusTable(EPS, np.array([3]), np.array([False]))
    cert = dual_certificate(oracle, radii, CostVector((2,)), Fraction(3, 2), [0])
    r = (1 + EPS) ** 3
    assert cert.w == {(0, 0): r / Fraction(3, 2)} and cert.v == [r / Fraction(3, 2)]
    run = mettu_plaxton_beta(runtime(g, k=1), CostVector((2,)), Fraction(3, 2), EPS)
    rep = verify_certificate(run.solution, dual_certificate(oracle, run.radii, CostVector((2,)), Fraction(3, 2),
                                                            run.solution.S), oracle, CostVector((2,)))
    assert rep.ok


def test_certificate_two_vertices_by_hand():
    g = WeightedGraph(2, ((0, 1, 2),))
    q = 1 + EPS
    radii = RadiusTable(EPS, np.array([10, 5]), np.array([False, False]))
    cert = dual_certificate(MetricOracle(g), radii, CostVector((3, 3)), 1, [0])
    # d↑(0,1) = q^8, the first power not below 2
    assert cert.w == {(0, 0): q**10, (1, 1): q**5, (0, 1): q**10 - q**8}
    assert cert.v == [Fraction(2), q**5]
    assert cert.s == [q**10, q**10 - q**8]


@pytest.mark.parametrize("seed", range(5))
def test_certificate_on_random_instances(seed):
    n = 8 + seed
    g, costs = gen_random_instance(n, 0.3, seed=seed)
    oracle = MetricOracle(g)
    beta = Fraction(3, 2)
    run = mettu_plaxton_beta(runtime(g, seed=seed), costs, beta, EPS, seed=seed)
    cert = dual_certificate(oracle, run.radii, costs, beta, run.solution.S)
    rep = verify_certificate(run.solution, cert, oracle, costs)
    assert rep.ok, rep.to_json()
    for i in range(n):
        for j in range(n):
            assert cert.v[j] - cert.w.get((i, j), 0) <= oracle.d(i, j)
    # scaled loads respect the opening costs
    for i in range(n):
        load = sum(cert.w.get((i, j), 0) for j in range(n))
        assert load / max(1, Fraction(rep.scaling_factor)) <= costs[i] * (1 + Fraction(1, 10**9))
    opt, _ = brute_force("facloc", g, costs, oracle=oracle)
    assert rep.scaled_dual_total <= opt
    assert run.solution.cost <= 3 * (1 + EPS) ** 10 * opt


@pytest.mark.parametrize("seed", range(3))
def test_separation_and_coverage(seed):
    g, costs = gen_random_instance(50, 0.08, seed=seed)
    oracle = MetricOracle(g)
    run = mettu_plaxton_beta(runtime(g, seed=seed), costs, 1, EPS, seed=seed)
    S = run.solution.S
    pw = EpsPowers(EPS)
    for x in range(len(S)):
        for y in range(x + 1, len(S)):
            u, v = S[x], S[y]
            assert oracle.d(u, v) >= 2 * max(run.radii.radius(u), run.radii.radius(v)) / pw.pow(3)
    for j, (f, _h) in run.solution.assignment.items():
        assert oracle.d(j, f) <= (1 + EPS) * oracle.nearest(j, S)[1]


def test_beta_range_enforced():
    g, costs = gen_random_instance(5, 0.5, seed=0)
    with pytest.raises(ValueError):
        mettu_plaxton_beta(runtime(g), costs, beta=2)
