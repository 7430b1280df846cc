"""Instances: the weighted graph that encodes the metric, opening costs,
the random vertex partition, and instance generators."""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np

from .seeding import derive_rng

# poly(n) bound on the largest edge weight, enforced by rejection.
WEIGHT_CAP_EXPONENT = 6
# Fixed-point distances are int64; a shortest path has at most n-1 edges.
_INT_LIMIT = 2**62


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Undirected graph with non-negative rational edge weights on vertices 0..n-1."""

    n: int
    edges: tuple = ()

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("negative vertex count")
        clean = []
        for u, v, w in self.edges:
            u, v, w = int(u), int(v), as_fraction(w)
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u}, {v}) out of range for n={self.n}")
            if u == v:
                raise ValueError(f"self-loop at {u}")
            if w < 0:
                raise ValueError(f"negative weight on ({u}, {v})")
            clean.append((min(u, v), max(u, v), w))
        object.__setattr__(self, "edges", tuple(clean))

    def __eq__(self, other):
        return isinstance(other, WeightedGraph) and self.n == other.n and self.edges == other.edges

    def __hash__(self):
        return hash((self.n, self.edges))

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def max_weight(self) -> Fraction:
        return max((w for _, _, w in self.edges), default=Fraction(0))

    @cached_property
    def min_weight(self) -> Fraction:
        return min((w for _, _, w in self.edges), default=Fraction(0))

    @cached_property
    def denominator(self) -> int:
        """Common denominator of all weights: one fixed-point unit is 1/denominator."""
        den = 1
        for _, _, w in self.edges:
            den = math.lcm(den, w.denominator)
        return den

    @cached_property
    def unit(self) -> Fraction:
        return Fraction(1, self.denominator)

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Symmetric adjacency as (indptr, indices, int64 fixed-point weights)."""
        den = self.denominator
        iw = [w.numerator * (den // w.denominator) for _, _, w in self.edges]
        if iw and max(iw) * max(self.n - 1, 1) >= _INT_LIMIT:
            raise ValueError("weights too large for int64 fixed-point distances")
        m = len(self.edges)
        src = np.empty(2 * m, dtype=np.int64)
        dst = np.empty(2 * m, dtype=np.int64)
        wts = np.empty(2 * m, dtype=np.int64)
        if m:
            e = np.array([(u, v) for u, v, _ in self.edges], dtype=np.int64)
            w = np.array(iw, dtype=np.int64)
            src[:m], dst[:m], wts[:m] = e[:, 0], e[:, 1], w
            src[m:], dst[m:], wts[m:] = e[:, 1], e[:, 0], w
        order = np.lexsort((dst, src))
        src, dst, wts = src[order], dst[order], wts[order]
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        np.cumsum(indptr, out=indptr)
        for arr in (indptr, dst, wts):
            arr.setflags(write=False)
        return indptr, dst, wts

    @cached_property
    def min_int_weight(self) -> int:
        _, _, wts = self.csr
        return int(wts.min()) if len(wts) else 1

    def to_int(self, x) -> int:
        """Largest fixed-point integer not exceeding ``x`` (for ``dist <= x`` tests)."""
        return math.floor(as_fraction(x) * self.denominator)

    def to_fraction(self, d) -> Fraction:
        return Fraction(int(d), self.denominator)

    def is_connected(self) -> bool:
        if self.n <= 1:
            return True
        indptr, indices, _ = self.csr
        seen = np.zeros(self.n, dtype=bool)
        seen[0] = True
        stack = [0]
        while stack:
            u = stack.pop()
            for v in indices[indptr[u]:indptr[u + 1]]:
                if not seen[v]:
                    seen[v] = True
                    stack.append(int(v))
        return bool(seen.all())

    def digest(self) -> str:
        h = hashlib.sha256(f"{self.n} {self.m}\n".encode())
        for u, v, w in self.edges:
            h.update(f"{u} {v} {w}\n".encode())
        return h.hexdigest()


@dataclass(frozen=True, eq=False)
class CostVector:
    f: tuple

    def __post_init__(self):
        vals = tuple(as_fraction(x) for x in self.f)
        if any(x < 0 for x in vals):
            raise ValueError("negative opening cost")
        object.__setattr__(self, "f", vals)

    @classmethod
    def uniform(cls, n: int, z) -> "CostVector":
        return cls((as_fraction(z),) * n)

    def __len__(self):
        return len(self.f)

    def __getitem__(self, i):
        return self.f[i]

    def __iter__(self):
        return iter(self.f)

    def __eq__(self, other):
        return isinstance(other, CostVector) and self.f == other.f

    def __hash__(self):
        return hash(self.f)


@dataclass(frozen=True, eq=False)
class PartitionMap:
    """Vertex -> machine assignment; ``H[j]`` lists the vertices hosted by machine j."""

    k: int
    host: np.ndarray
    H: tuple = field(init=False)

    def __post_init__(self):
        host = np.asarray(self.host, dtype=np.int64)
        if self.k < 1:
            raise ValueError("need at least one machine")
        if len(host) and (host.min() < 0 or host.max() >= self.k):
            raise ValueError("host id out of range")
        host.setflags(write=False)
        object.__setattr__(self, "host", host)
        object.__setattr__(self, "H", tuple(np.flatnonzero(host == j) for j in range(self.k)))

    @property
    def n(self) -> int:
        return len(self.host)

    def counts(self) -> np.ndarray:
        return np.bincount(self.host, minlength=self.k)

    def __eq__(self, other):
        return isinstance(other, PartitionMap) and self.k == other.k and np.array_equal(self.host, other.host)


def random_partition(n: int, k: int, seed: int) -> PartitionMap:
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = derive_rng(seed, "partition")
    return PartitionMap(k, rng.integers(0, k, size=n))


def normalize_weights(graph: WeightedGraph, costs: CostVector):
    """Scale weights and costs by one factor so the smallest value is at least 1.

    Returns ``(graph, costs, scale)``; original = normalized / scale.
    """
    values = [w for _, _, w in graph.edges] + list(costs.f)
    if any(x <= 0 for x in values):
        raise ValueError("zero-weight edge or zero-cost vertex: clustering degenerates")
    lo = min(values, default=Fraction(1))
    scale = Fraction(1) if lo >= 1 else 1 / lo
    if scale != 1:
        graph = WeightedGraph(graph.n, tuple((u, v, w * scale) for u, v, w in graph.edges))
        costs = CostVector(tuple(f * scale for f in costs.f))
    check_weight_cap(graph)
    return graph, costs, scale


def check_weight_cap(graph: WeightedGraph) -> None:
    if graph.m and graph.max_weight > Fraction(graph.n) ** WEIGHT_CAP_EXPONENT:
        raise ValueError(f"largest weight exceeds n^{WEIGHT_CAP_EXPONENT}")


# (X_i, Y_i) -> weights of ({u,u_i}, {u_i,w_i}, {w_i,w}); None stands for L.
_LB_PATTERNS = {(1, 0): (1, 1, None), (0, 1): (None, 1, 1), (1, 1): (1, None, 1)}


@dataclass(frozen=True, eq=False)
class LowerBoundInstance:
    b: int
    L: int
    X: tuple
    Y: tuple
    graph: WeightedGraph
    costs: CostVector

    # vertex ids: u = 0, w = 1, u_i = 2 + i, w_i = 2 + b + i  (i = 0..b-1)
    @property
    def u(self) -> int:
        return 0

    @property
    def w(self) -> int:
        return 1

    def u_i(self, i: int) -> int:
        return 2 + i

    def w_i(self, i: int) -> int:
        return 2 + self.b + i

    def validate(self) -> None:
        g = self.graph
        if g.n != 2 * self.b + 2 or g.m != 3 * self.b:
            raise AssertionError("wrong vertex or edge count")
        weights = {(u, v): w for u, v, w in g.edges}
        if len(weights) != g.m:
            raise AssertionError("parallel edges")
        for i in range(self.b):
            ui, wi = self.u_i(i), self.w_i(i)
            got = (weights.get((self.u, ui)), weights.get((ui, wi)), weights.get((self.w, wi)))
            want = tuple(self.L if x is None else x for x in _LB_PATTERNS[(self.X[i], self.Y[i])])
            if got != want:
                raise AssertionError(f"index {i}: weights {got}, expected {want}")
        expected_costs = [0, 0] + [self.L] * (2 * self.b)
        if list(self.costs.f) != expected_costs:
            raise AssertionError("opening costs do not follow the (0, 0, L, ..., L) layout")


def gen_lower_bound_instance(b: int, c: int = 3, X=None, Y=None) -> LowerBoundInstance:
    """Build F_b(X, Y): hubs u, w joined through b two-edge gadgets u-u_i-w_i-w."""
    if b < 1:
        raise ValueError("b must be >= 1")
    X, Y = tuple(int(x) for x in X), tuple(int(y) for y in Y)
    if len(X) != b or len(Y) != b:
        raise ValueError("X and Y must have length b")
    n = 2 * b + 2
    L = n**c
    edges = []
    for i, (x, y) in enumerate(zip(X, Y)):
        if (x, y) not in _LB_PATTERNS:
            raise ValueError(f"(X_{i}, Y_{i}) = ({x}, {y}) has no weight assignment")
        a, m, z = (L if t is None else t for t in _LB_PATTERNS[(x, y)])
        ui, wi = 2 + i, 2 + b + i
        edges += [(0, ui, a), (ui, wi, m), (wi, 1, z)]
    graph = WeightedGraph(n, tuple(edges))
    check_weight_cap(graph)
    costs = CostVector((0, 0) + (L,) * (2 * b))
    return LowerBoundInstance(b, L, X, Y, graph, costs)


def sample_lower_bound_bits(b: int, seed: int) -> tuple[tuple, tuple]:
    """(X, Y) uniform over {0,1}^b x {0,1}^b conditioned on X_i + Y_i >= 1."""
    pick = derive_rng(seed, "lower-bound-bits").integers(0, 3, size=b)
    pats = [(1, 0), (0, 1), (1, 1)]
    X = tuple(pats[p][0] for p in pick)
    Y = tuple(pats[p][1] for p in pick)
    return X, Y


def _sample_pairs(n: int, density: float, rng: np.random.Generator) -> np.ndarray:
    total = n * (n - 1) // 2
    if density >= 1.0:
        iu, iv = np.triu_indices(n, 1)
        return np.stack([iu, iv], axis=1)
    if total <= 2_000_000:
        iu, iv = np.triu_indices(n, 1)
        keep = rng.random(total) < density
        return np.stack([iu[keep], iv[keep]], axis=1)
    m = int(rng.binomial(total, density))
    keys = np.empty(0, dtype=np.int64)
    while len(keys) < m:
        need = m - len(keys)
        a = rng.integers(0, n, size=2 * need + 16)
        b = rng.integers(0, n, size=2 * need + 16)
        ok = a != b
        lo, hi = np.minimum(a[ok], b[ok]), np.maximum(a[ok], b[ok])
        keys = np.unique(np.concatenate([keys, lo * n + hi]))
        if len(keys) > m:
            keys = np.sort(rng.choice(keys, size=m, replace=False))
    return np.stack([keys // n, keys % n], axis=1)


def gen_random_instance(n: int, density: float, weight_range=(1, 10), cost_range=(1, 10),
                        seed: int = 0, max_tries: int = 50):
    """Connected G(n, density) with integer weights and costs drawn uniformly from the
    inclusive ranges. Disconnected draws are retried with a fresh derived seed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    wlo, whi = weight_range
    flo, fhi = cost_range
    for attempt in range(max_tries):
        rng = derive_rng(seed, "random-instance", attempt)
        pairs = _sample_pairs(n, density, rng) if n > 1 else np.empty((0, 2), dtype=np.int64)
        w = rng.integers(wlo, whi + 1, size=len(pairs))
        f = rng.integers(flo, fhi + 1, size=n)
        graph = WeightedGraph(n, tuple((int(u), int(v), int(x)) for (u, v), x in zip(pairs, w)))
        if graph.is_connected():
            graph, costs, _ = normalize_weights(graph, CostVector(tuple(int(x) for x in f)))
            return graph, costs
    raise RuntimeError(f"no connected graph after {max_tries} attempts (n={n}, density={density})")
