"""p-median by bisection on a uniform opening cost plus randomized rounding.

Machine 0 acts as coordinator: it holds the bisection state, flips the
rounding coin and hands out per-machine sampling quotas.  Each probe runs the
facility-location solver with every opening cost set to z; the neighborhood
sketch does not depend on costs, so one sketch serves all probes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .facility_location import FacilitySolution, connect_clients, mettu_plaxton_beta
from .graph import CostVector
from .nbd_size import SketchParams, build_sketch
from .runtime import Runtime
from .seeding import derive_rng, derive_seed
from .shortest_paths import mssp

COORDINATOR = 0
PMEDIAN_BETA = Fraction(3, 2)
BRACKET_RETRIES = 3


@dataclass
class BinarySearchTrace:
    probes: list[tuple[Fraction, int]] = field(default_factory=list)
    z_A: Fraction | None = None
    p1: int | None = None
    z_B: Fraction | None = None
    p2: int | None = None
    a: Fraction | None = None
    b: Fraction | None = None
    branch: str | None = None
    exact_hit: bool = False
    bracket_fallback: bool = False
    retries: int = 0
    c_min: Fraction | None = None
    c_max: Fraction | None = None
    b_prime_padding: int = 0

    def to_json(self) -> dict:
        s = lambda x: None if x is None else str(x)
        return {
            "probes": [{"z": str(z), "size": k} for z, k in self.probes],
            "z_A": s(self.z_A), "p1": self.p1, "z_B": s(self.z_B), "p2": self.p2,
            "a": s(self.a), "b": s(self.b), "branch": self.branch,
            "exact_hit": self.exact_hit, "bracket_fallback": self.bracket_fallback,
            "retries": self.retries, "c_min": s(self.c_min), "c_max": s(self.c_max),
            "b_prime_padding": self.b_prime_padding,
        }


@dataclass(frozen=True, eq=False)
class MedianSolution:
    C: tuple[int, ...]
    assignment: dict[int, tuple[int, int]]
    cost: Fraction
    trace: BinarySearchTrace

    def to_json(self) -> dict:
        return {
            "C": list(self.C),
            "assignment": [{"client": j, "facility": f, "facility_host": h}
                           for j, (f, h) in sorted(self.assignment.items())],
            "cost": str(self.cost),
            "trace": self.trace.to_json(),
        }


def _weight_extremes(rt: Runtime) -> tuple[Fraction, Fraction]:
    """Coordinator learns w_min and w_max from per-machine reports."""
    indptr, _, wts = rt.graph.csr
    reports = []
    for m in range(rt.k):
        local = [wts[indptr[v]:indptr[v + 1]] for v in rt.partition.H[m]]
        local = np.concatenate(local) if local else np.empty(0, dtype=np.int64)
        reports.append((int(local.min()), int(local.max())) if len(local) else (-1, -1))
    got = [r for r in rt.gather(COORDINATOR, reports) if r[0] >= 0]
    if not got:
        return Fraction(1), Fraction(1)
    return rt.graph.to_fraction(min(r[0] for r in got)), rt.graph.to_fraction(max(r[1] for r in got))


def _quota_sample(rt: Runtime, pool: np.ndarray, count: int, rng) -> np.ndarray:
    """Uniform ``count``-subset of ``pool``: the coordinator draws per-machine
    quotas t_j without replacement, then each machine picks t_j of its own."""
    counts = [c[0] for c in rt.gather(COORDINATOR, [int((pool & (rt.host == m)).sum()) for m in range(rt.k)])]
    owners = np.repeat(np.arange(rt.k), counts)
    chosen = rng.choice(len(owners), size=count, replace=False) if count else np.empty(0, dtype=np.int64)
    quotas = np.bincount(owners[chosen], minlength=rt.k)
    rt.scatter(COORDINATOR, [int(q) for q in quotas])
    picked = np.zeros(rt.n, dtype=bool)
    for m in range(rt.k):
        local = rt.partition.H[m][pool[rt.partition.H[m]]]
        if quotas[m]:
            picked[derive_rng(int(rng.integers(2**62)), "machine-pick", m).choice(local, size=quotas[m], replace=False)] = True
    return picked


def _pad_smallest(rt: Runtime, pool: np.ndarray, count: int) -> np.ndarray:
    """``count`` arbitrary members of ``pool``: machine quotas in machine order, smallest ids first."""
    counts = [c[0] for c in rt.gather(COORDINATOR, [int((pool & (rt.host == m)).sum()) for m in range(rt.k)])]
    quotas, left = [], count
    for c in counts:
        quotas.append(min(c, left))
        left -= quotas[-1]
    rt.scatter(COORDINATOR, quotas)
    picked = np.zeros(rt.n, dtype=bool)
    for m in range(rt.k):
        local = rt.partition.H[m][pool[rt.partition.H[m]]]
        picked[np.sort(local)[:quotas[m]]] = True
    return picked


def solve_pmedian(rt: Runtime, p: int, eps=0.25, seed: int = 0, beta=PMEDIAN_BETA,
                  sketch_c: float = 4.0, mis_c: float = 4.0) -> MedianSolution:
    n = rt.n
    if not 1 <= p <= n:
        raise ValueError(f"p={p} outside [1, n={n}]")
    trace = BinarySearchTrace()
    sketch = build_sketch(rt, SketchParams(n, float(eps), sketch_c), derive_seed(seed, "sketch"), eps=float(eps))

    with rt.ledger.section("pmedian_search"):
        w_min, w_max = _weight_extremes(rt)
        c_min, c_max = w_min, n * w_max
        trace.c_min, trace.c_max = c_min, c_max
        probe_no = 0

        def probe(z: Fraction) -> tuple[np.ndarray, int]:
            nonlocal probe_no
            probe_no += 1
            run = mettu_plaxton_beta(rt, CostVector.uniform(n, z), beta, eps,
                                     derive_seed(seed, "probe", probe_no), sketch=sketch, mis_c=mis_c)
            S = np.zeros(n, dtype=bool)
            S[list(run.solution.S)] = True
            size = rt.announce_count(S)
            trace.probes.append((z, size))
            return S, size

        def bracket_end(z: Fraction, want_small: bool) -> tuple[np.ndarray, int]:
            S, size = probe(z)
            for _ in range(BRACKET_RETRIES):
                if size == p or (size < p) == want_small:
                    break
                trace.retries += 1
                S, size = probe(z)
            return S, size

        z_B, z_A = Fraction(0), n * c_max
        B, p2 = bracket_end(z_B, want_small=False)
        if p2 == p:
            return _finish(rt, B, eps, trace, exact=True)
        if p2 < p:
            # even opening at zero cost produced too few facilities
            trace.bracket_fallback = True
            trace.b_prime_padding = p - p2
            return _finish(rt, B | _pad_smallest(rt, ~B, p - p2), eps, trace)
        A, p1 = bracket_end(z_A, want_small=True)
        if p1 == p:
            return _finish(rt, A, eps, trace, exact=True)
        if p1 > p:
            raise RuntimeError("solver kept more than p facilities at the maximal opening cost")
        gap = c_min / (12 * n * n)
        while z_A - z_B > gap:
            z = (z_A + z_B) / 2
            S, size = probe(z)
            if size == p:
                return _finish(rt, S, eps, trace, exact=True)
            if size < p:
                A, p1, z_A = S, size, z
            else:
                B, p2, z_B = S, size, z
        trace.z_A, trace.p1, trace.z_B, trace.p2 = z_A, p1, z_B, p2

    with rt.ledger.section("pmedian_rounding"):
        a = Fraction(p2 - p, p2 - p1)
        trace.a, trace.b = a, 1 - a
        # B': the nearest member of B for every a ∈ A (members of A ∩ B map to themselves)
        near = mssp(rt, B, eps, label="pmedian_rounding")
        for v in np.flatnonzero(A):
            f = int(near.nearest[v])
            rt.send(int(rt.host[v]), int(rt.host[f]), (rt.ref(f),))
        Bp = np.zeros(n, dtype=bool)
        for inbox in rt.flush():
            for _src, (f_ref,) in inbox:
                Bp[f_ref[0]] = True
        short = p1 - rt.announce_count(Bp)
        if short > 0:
            trace.b_prime_padding = short
            Bp |= _pad_smallest(rt, B & ~Bp, short)
        coin = derive_rng(seed, "coin")
        take_A = bool(coin.random() < float(a)) if a not in (0, 1) else a == 1
        trace.branch = "A" if take_A else "B'"
        rt.scatter(COORDINATOR, [int(take_A)] * rt.k)
        C = (A if take_A else Bp).copy()
        C |= _quota_sample(rt, B & ~Bp, p - p1, derive_rng(seed, "extra-centers"))
    return _finish(rt, C, eps, trace)


def _finish(rt: Runtime, C: np.ndarray, eps, trace: BinarySearchTrace, exact: bool = False) -> MedianSolution:
    trace.exact_hit = exact
    sol: FacilitySolution = connect_clients(rt, C, None, eps, label="pmedian_assign")
    return MedianSolution(sol.S, sol.assignment, sol.C, trace)
