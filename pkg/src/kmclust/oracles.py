"""Sequential ground truth for tests and verification.

Everything here is plain Python on exact values and shares no code with the
distributed engines, so agreement between the two is a meaningful check.
"""
from __future__ import annotations

import heapq
import itertools
import math
import os
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

APSP_CAP_ENV = "KMCLUST_APSP_CAP"
DEFAULT_APSP_CAP = 2000
FACLOC_BRUTE_CAP = 12
SUBSET_BRUTE_CAP = 15
SUBSET_BRUTE_P_CAP = 5


class OracleCapError(ValueError):
    """Instance too large for an exhaustive or all-pairs oracle."""


def apsp_cap() -> int:
    return int(os.environ.get(APSP_CAP_ENV, DEFAULT_APSP_CAP))


def _scaled_adjacency(graph) -> tuple[int, list[list[tuple[int, int]]]]:
    scale = 1
    for _, _, w in graph.edges:
        scale = math.lcm(scale, Fraction(w).denominator)
    adj: list[list[tuple[int, int]]] = [[] for _ in range(graph.n)]
    for u, v, w in graph.edges:
        wi = int(Fraction(w) * scale)
        adj[u].append((v, wi))
        adj[v].append((u, wi))
    return scale, adj


def _dijkstra_int(adj, source: int) -> list[float | int]:
    dist: list = [math.inf] * len(adj)
    dist[source] = 0
    heap = [(0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for v, w in adj[u]:
            nd = d + w
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


def dijkstra_exact(graph, source: int) -> list:
    """Exact distances from ``source`` as Fractions (``math.inf`` if unreachable)."""
    scale, adj = _scaled_adjacency(graph)
    return [d if d == math.inf else Fraction(d, scale) for d in _dijkstra_int(adj, source)]


class MetricOracle:
    """Exact all-pairs shortest-path distances.

    ``scaled[u][v]`` holds d(u, v)·``scale`` as an int; :meth:`d` returns a Fraction.
    """

    def __init__(self, graph, cap: int | None = None):
        cap = apsp_cap() if cap is None else cap
        if graph.n > cap:
            raise OracleCapError(f"n={graph.n} exceeds all-pairs cap {cap}")
        self.graph = graph
        self.n = graph.n
        self.scale, adj = _scaled_adjacency(graph)
        self.scaled = [_dijkstra_int(adj, s) for s in range(graph.n)]
        if any(math.inf in row for row in self.scaled):
            raise ValueError("metric oracle needs a connected graph")

    def d(self, u: int, v: int) -> Fraction:
        return Fraction(self.scaled[u][v], self.scale)

    def row(self, u: int) -> list[Fraction]:
        return [Fraction(x, self.scale) for x in self.scaled[u]]

    def matrix(self) -> np.ndarray:
        """Scaled distances as an int64 array (object dtype if they do not fit)."""
        big = max((max(r) for r in self.scaled), default=0)
        return np.array(self.scaled, dtype=np.int64 if big < 2**62 else object)

    def ball_size(self, v: int, r) -> int:
        bound = Fraction(r) * self.scale
        return sum(1 for x in self.scaled[v] if x <= bound)

    def nearest(self, v: int, S) -> tuple[int, Fraction]:
        best = min(S, key=lambda s: (self.scaled[v][s], s))
        return best, self.d(v, best)


def _alpha_root(sorted_dists: list[Fraction], target: Fraction) -> Fraction:
    """Solve Σ_{d ≤ r} (r − d) = target for r on the sorted distances."""
    prefix = Fraction(0)
    n = len(sorted_dists)
    for k in range(1, n + 1):
        prefix += sorted_dists[k - 1]
        r = (target + prefix) / k
        if k == n or r <= sorted_dists[k]:
            return r
    raise AssertionError("unreachable")


def exact_radii(graph, costs, beta=1, oracle: MetricOracle | None = None) -> list[Fraction]:
    oracle = oracle or MetricOracle(graph)
    beta = Fraction(beta)
    return [_alpha_root(sorted(oracle.row(v)), beta * Fraction(costs[v])) for v in range(graph.n)]


def alpha(oracle: MetricOracle, v: int, r) -> Fraction:
    r = Fraction(r)
    return sum((r - d for d in oracle.row(v) if d <= r), Fraction(0))


@dataclass(frozen=True)
class OracleSolution:
    S: tuple[int, ...]
    assignment: dict
    F: Fraction
    C: Fraction

    @property
    def cost(self) -> Fraction:
        return self.F + self.C


def solution_from_centers(oracle: MetricOracle, costs, S) -> OracleSolution:
    S = tuple(sorted(S))
    assignment = {j: oracle.nearest(j, S)[0] for j in range(oracle.n) if j not in S}
    F = sum((Fraction(costs[i]) for i in S), Fraction(0)) if costs is not None else Fraction(0)
    C = sum((oracle.d(j, i) for j, i in assignment.items()), Fraction(0))
    return OracleSolution(S, assignment, F, C)


def sequential_mp(graph, costs, beta=1, oracle: MetricOracle | None = None) -> OracleSolution:
    """Greedy in non-decreasing radius order (ties by id): open v if d(v, S) > 2 r_v."""
    oracle = oracle or MetricOracle(graph)
    radii = exact_radii(graph, costs, beta, oracle)
    S: list[int] = []
    for v in sorted(range(graph.n), key=lambda x: (radii[x], x)):
        if all(oracle.d(v, s) > 2 * radii[v] for s in S):
            S.append(v)
    return solution_from_centers(oracle, costs, S)


def _cost_scale(oracle: MetricOracle, costs) -> int:
    scale = oracle.scale
    for f in costs or []:
        scale = math.lcm(scale, Fraction(f).denominator)
    return scale


def brute_force(problem: str, graph, costs=None, p: int | None = None,
                oracle: MetricOracle | None = None) -> tuple[Fraction, tuple[int, ...]]:
    """Exact optimum and a witness (first optimal set in lexicographic order)."""
    n = graph.n
    if problem == "facloc":
        if n > FACLOC_BRUTE_CAP:
            raise OracleCapError(f"facloc brute force limited to n <= {FACLOC_BRUTE_CAP}")
        if costs is None:
            raise ValueError("facloc needs opening costs")
    elif problem in ("pmedian", "pcenter"):
        if n > SUBSET_BRUTE_CAP or p is None or p > SUBSET_BRUTE_P_CAP:
            raise OracleCapError(f"{problem} brute force limited to n <= {SUBSET_BRUTE_CAP}, p <= {SUBSET_BRUTE_P_CAP}")
        if not 1 <= p <= n:
            raise ValueError("p out of range")
    else:
        raise ValueError(f"unknown problem {problem!r}")
    oracle = oracle or MetricOracle(graph)
    scale = _cost_scale(oracle, costs if problem == "facloc" else None)
    D = np.array([[x * (scale // oracle.scale) for x in row] for row in oracle.scaled], dtype=object)
    if problem == "facloc":
        subsets = [s for r in range(1, n + 1) for s in itertools.combinations(range(n), r)]
        f = [int(Fraction(c) * scale) for c in costs]
    else:
        subsets = list(itertools.combinations(range(n), p))
    fits = n * int(D.max() if D.size else 0) + sum(f) if problem == "facloc" else int(D.max() if D.size else 0) * n
    Dn = D.astype(np.int64) if fits < 2**62 else D
    best_val, best_set = None, None
    for s in subsets:
        near = Dn[list(s)].min(axis=0)
        if problem == "facloc":
            val = int(near.sum()) + sum(f[i] for i in s)
        elif problem == "pmedian":
            val = int(near.sum())
        else:
            val = int(near.max())
        if best_val is None or val < best_val:
            best_val, best_set = val, s
    return Fraction(best_val, scale), tuple(best_set)


def gonzalez(oracle: MetricOracle, p: int, start: int = 0) -> tuple[tuple[int, ...], Fraction]:
    """Farthest-first traversal; returns the centers and the covering radius."""
    centers = [start]
    near = list(oracle.scaled[start])
    while len(centers) < min(p, oracle.n):
        far = max(range(oracle.n), key=lambda v: (near[v], -v))
        centers.append(far)
        near = [min(a, b) for a, b in zip(near, oracle.scaled[far])]
    return tuple(centers), Fraction(max(near), oracle.scale)
