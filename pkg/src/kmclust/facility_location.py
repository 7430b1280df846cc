"""Facility location on the k-machine runtime.

Pipeline: neighborhood-size sketch → approximate radii → radius classes in
ascending order, each class thinned by an approximate MIS → one final MSSP to
connect clients.  A dual certificate built from exact distances checks the
cost of every run.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .graph import CostVector, as_fraction
from .nbd_size import NbdSketch, SketchParams, build_sketch, query_sizes
from .oracles import MetricOracle
from .powers import EpsPowers
from .runtime import Runtime
from .seeding import derive_rng, derive_seed
from .shortest_paths import exclusive_mssp, mssp

DEFAULT_MIS_CONSTANT = 4.0
DEFAULT_SLACK_POWER = 10


@dataclass(frozen=True, eq=False)
class RadiusTable:
    """r̃_v = (1+ε)^exponent[v], or 0 where ``zero[v]`` (zero opening cost)."""

    eps: Fraction
    exponent: np.ndarray
    zero: np.ndarray

    def radius(self, v: int) -> Fraction:
        return Fraction(0) if self.zero[v] else (1 + self.eps) ** int(self.exponent[v])

    def radii(self) -> list[Fraction]:
        return [self.radius(v) for v in range(len(self.exponent))]

    def to_json(self) -> dict:
        return {"eps": str(self.eps), "exponent": self.exponent.tolist(), "zero": self.zero.tolist()}


def compute_radii(sketch: NbdSketch, costs: CostVector, beta, eps) -> RadiusTable:
    """Local per-vertex radius rule driven by the sketch's size estimates.

    The exponent is t−1 for the smallest integer t with
    Σ_{i<t} q̃_i·ε(1+ε)^i > β·f_v, where q̃_i estimates |B(v, (1+ε)^i)|.
    Weights are at least 1, so for i < 0 the ball is {v} and those terms sum
    to exactly 1; only i ≥ 0 needs the sketch.  Zero targets give radius 0.
    """
    pw = EpsPowers(eps)
    beta = as_fraction(beta)
    n = sketch.n
    if len(costs) != n:
        raise ValueError("cost vector length does not match sketch")
    target = [beta * f for f in costs]
    zero = np.array([t == 0 for t in target], dtype=bool)
    exponent = np.zeros(n, dtype=np.int64)
    for v in range(n):
        if 0 < target[v] < 1:
            # Σ_{i<t} ε(1+ε)^i = (1+ε)^t first exceeds the target at t = floor_log + 1
            exponent[v] = pw.floor_log(target[v])
    pending = np.array([t >= 1 for t in target], dtype=bool)
    goal = np.array([float(t) for t in target])
    acc = np.ones(n)
    i = 0
    while pending.any():
        acc += query_sizes(sketch, pw.pow(i)) * float(pw.eps * pw.pow(i))
        newly = pending & (acc > goal)
        exponent[newly] = i
        pending &= ~newly
        i += 1
    return RadiusTable(pw.eps, exponent, zero)


@dataclass
class MisStats:
    iterations: int = 0
    exclusive_calls: int = 0
    mssp_calls: int = 0
    residual_iterations: int = 0
    shortcut: bool = False


def approximate_mis(rt: Runtime, W, d, eps, seed: int, c: float = DEFAULT_MIS_CONSTANT,
                    stats: MisStats | None = None) -> np.ndarray:
    """Randomized MIS of W in the threshold graph "distance ≤ d".

    Stage i marks each remaining vertex with probability min(1, 2^i/n) for
    ⌈c·log2 n⌉ iterations.  A marked vertex backs off unless every other
    marked vertex is farther than d; survivors join and knock out W within d.
    Marks are drawn per vertex, so the outcome does not depend on hosting.
    Returns the MIS as a boolean mask.
    """
    stats = stats if stats is not None else MisStats()
    n = rt.n
    W = np.array(W, dtype=bool, copy=True)
    I = np.zeros(n, dtype=bool)
    d_int = rt.graph.to_int(d)
    with rt.ledger.section("mis"):
        size = rt.announce_count(W)
        if size <= 1 or d_int < rt.graph.min_int_weight:
            # no two vertices of W are within d of each other
            stats.shortcut = size > 1
            return W
        logn = max(1, math.ceil(math.log2(n)))
        inner = max(1, math.ceil(c * math.log2(n)))
        schedule = [(i, j, min(1.0, 2.0**i / n)) for i in range(logn + 1) for j in range(inner)]
        step = 0
        while True:
            if step < len(schedule):
                i, j, prob = schedule[step]
                rng = derive_rng(seed, "mark", i, j)
            else:
                prob = 0.5
                rng = derive_rng(seed, "residual", step)
                stats.residual_iterations += 1
            step += 1
            R = W & (rng.random(n) < prob)
            sizes = rt.allgather([(int((R & (rt.host == m)).sum()), int((W & (rt.host == m)).sum()))
                                  for m in range(rt.k)])
            r_size, w_size = sum(s[0] for s in sizes), sum(s[1] for s in sizes)
            if w_size == 0:
                break
            stats.iterations += 1
            if r_size == 0:
                continue
            if r_size == 1:
                T = R
            else:
                stats.exclusive_calls += 1
                T = R & (exclusive_mssp(rt, R, eps, label="mis").dist > d_int)
                if rt.announce_count(T) == 0:
                    continue
            I |= T
            stats.mssp_calls += 1
            near = mssp(rt, T, eps, label="mis").dist <= d_int
            W &= ~(T | near)
    return I


@dataclass(frozen=True, eq=False)
class FacilitySolution:
    S: tuple[int, ...]
    assignment: dict[int, tuple[int, int]]
    clients_of: dict[int, list[tuple[int, int]]]
    F: Fraction
    C: Fraction
    connection: dict[int, Fraction] = field(default_factory=dict)

    @property
    def cost(self) -> Fraction:
        return self.F + self.C

    def to_json(self) -> dict:
        return {
            "S": list(self.S),
            "assignment": [{"client": j, "facility": f, "facility_host": h}
                           for j, (f, h) in sorted(self.assignment.items())],
            "F": str(self.F),
            "C": str(self.C),
        }


def connect_clients(rt: Runtime, S: np.ndarray, costs: CostVector | None, eps,
                    label: str = "assign") -> FacilitySolution:
    """One MSSP from S; clients notify their facility's host; totals are gathered."""
    with rt.ledger.section(label):
        table = mssp(rt, S, eps, label=label)
        assignment: dict[int, tuple[int, int]] = {}
        connection: dict[int, Fraction] = {}
        for j in np.flatnonzero(~S):
            j = int(j)
            f, h = int(table.nearest[j]), int(table.nearest_host[j])
            assignment[j] = (f, h)
            connection[j] = table.distance(j)
            rt.send(int(rt.host[j]), h, (rt.ref(j), rt.ref(f)))
        inboxes = rt.flush()
        clients_of: dict[int, list[tuple[int, int]]] = {int(s): [] for s in np.flatnonzero(S)}
        for m in range(rt.k):
            for _src, (j_ref, f_ref) in inboxes[m]:
                clients_of[f_ref[0]].append(j_ref)
        for f in clients_of:
            clients_of[f].sort()
        partial = []
        for m in range(rt.k):
            hosted = rt.partition.H[m]
            F_m = sum((costs[int(v)] for v in hosted if S[v]), Fraction(0)) if costs is not None else Fraction(0)
            C_m = sum((connection[int(v)] for v in hosted if not S[v]), Fraction(0))
            partial.append((F_m, C_m))
        gathered = rt.gather(0, partial)
        F = sum((x[0] for x in gathered), Fraction(0))
        C = sum((x[1] for x in gathered), Fraction(0))
        rt.scatter(0, [(F, C)] * rt.k)
    return FacilitySolution(tuple(int(s) for s in np.flatnonzero(S)), assignment, clients_of, F, C, connection)


@dataclass
class FacilityRun:
    solution: FacilitySolution
    radii: RadiusTable
    sketch: NbdSketch
    opened_class: dict[int, int | None]
    mis_stats: list[MisStats]


def mettu_plaxton_beta(rt: Runtime, costs: CostVector, beta=1, eps=0.1, seed: int = 0,
                       sketch: NbdSketch | None = None, sketch_c: float = 4.0,
                       mis_c: float = DEFAULT_MIS_CONSTANT) -> FacilityRun:
    """Greedy over radius classes; opening cost scaled by β ∈ [1, 3/2].

    Class e holds vertices with r̃ = (1+ε)^e (zero-radius vertices come
    first).  Vertices within 2(1+ε)²·r̃ of an open facility drop out; the
    rest are thinned by an MIS at distance 2(1+ε)³·r̃ and opened.
    """
    beta = as_fraction(beta)
    if not 1 <= beta <= Fraction(3, 2):
        raise ValueError("beta must lie in [1, 3/2]")
    pw = EpsPowers(eps)
    if sketch is None:
        sketch = build_sketch(rt, SketchParams(rt.n, float(eps), sketch_c), derive_seed(seed, "sketch"), eps=float(eps))
    radii = compute_radii(sketch, costs, beta, eps)
    S = np.zeros(rt.n, dtype=bool)
    opened_class: dict[int, int | None] = {}
    mis_stats: list[MisStats] = []
    with rt.ledger.section("mp_classes"):
        # machines agree on the exponent range, then walk it
        span = rt.allgather([_local_range(radii, rt.partition.H[m]) for m in range(rt.k)])
        lo = min(s[0] for s in span)
        hi = max(s[1] for s in span)
        classes: list[int | None] = [None] + list(range(lo, hi + 1))
        for e in classes:
            W = radii.zero.copy() if e is None else (~radii.zero) & (radii.exponent == e)
            if rt.announce_count(W) == 0:
                continue
            r = Fraction(0) if e is None else pw.pow(e)
            thr = rt.graph.to_int(2 * pw.pow(2) * r)
            if S.any() and thr >= rt.graph.min_int_weight:
                W &= ~(mssp(rt, S, eps, label="mp_remove").dist <= thr)
            if rt.announce_count(W) == 0:
                continue
            st = MisStats()
            I = approximate_mis(rt, W, 2 * pw.pow(3) * r, eps, derive_seed(seed, "mis", -1 if e is None else e),
                                c=mis_c, stats=st)
            mis_stats.append(st)
            for v in np.flatnonzero(I):
                opened_class[int(v)] = e
            S |= I
    solution = connect_clients(rt, S, costs, eps)
    return FacilityRun(solution, radii, sketch, opened_class, mis_stats)


def _local_range(radii: RadiusTable, hosted: np.ndarray) -> tuple[int, int]:
    live = hosted[~radii.zero[hosted]]
    if len(live) == 0:
        return (2**31, -(2**31))
    ex = radii.exponent[live]
    return (int(ex.min()), int(ex.max()))


# ---------------------------------------------------------------------------
# dual certificate

@dataclass(frozen=True, eq=False)
class DualCertificate:
    beta: Fraction
    eps: Fraction
    w: dict[tuple[int, int], Fraction]
    v: list[Fraction]
    s: list[Fraction]
    s_ambiguous: tuple[int, ...]
    facility_of_s: dict[int, int]

    def to_json(self) -> dict:
        return {
            "beta": str(self.beta), "eps": str(self.eps),
            "w": [{"i": i, "j": j, "w": str(x)} for (i, j), x in sorted(self.w.items())],
            "v": [str(x) for x in self.v], "s": [str(x) for x in self.s],
            "s_ambiguous": list(self.s_ambiguous),
        }


def dual_certificate(oracle: MetricOracle, radii: RadiusTable, costs: CostVector, beta,
                     S=None) -> DualCertificate:
    """w_ij = max{0, r̃_i − d↑(i,j)}/β, v_j = min_i d(i,j) + w_ij, s_j from open facilities."""
    beta = as_fraction(beta)
    pw = EpsPowers(radii.eps)
    n = oracle.n
    r = radii.radii()
    w: dict[tuple[int, int], Fraction] = {}
    v: list[Fraction] = []
    for j in range(n):
        best = None
        for i in range(n):
            dij = oracle.d(i, j)
            gap = r[i] - pw.round_up(dij)
            wij = gap / beta if gap > 0 else Fraction(0)
            if wij:
                w[(i, j)] = wij
            val = dij + wij
            best = val if best is None or val < best else best
        v.append(best)
    s = [Fraction(0)] * n
    owner: dict[int, int] = {}
    ambiguous = []
    opened = set(S or ())
    for j in range(n):
        hits = sorted(i for i in opened if w.get((i, j), 0) > 0)
        if hits:
            s[j] = w[(hits[0], j)]
            owner[j] = hits[0]
        if len(hits) > 1:
            ambiguous.append(j)
    return DualCertificate(beta, radii.eps, w, v, s, tuple(ambiguous), owner)


@dataclass
class CertificateReport:
    per_client_ok: bool
    aggregate_ok: bool
    dual_constraints_ok: bool
    violators: list[int]
    slack_power: int
    needed_power_client: float
    needed_power_client_2beta: float
    needed_power_aggregate: float
    dual_total: Fraction
    scaling_factor: float
    scaled_dual_total: Fraction
    s_ambiguous: tuple[int, ...]

    @property
    def ok(self) -> bool:
        return self.per_client_ok and self.aggregate_ok and self.dual_constraints_ok

    def to_json(self) -> dict:
        return {
            "ok": self.ok, "per_client_ok": self.per_client_ok, "aggregate_ok": self.aggregate_ok,
            "dual_constraints_ok": self.dual_constraints_ok, "violators": self.violators,
            "slack_power": self.slack_power,
            "needed_power_client": self.needed_power_client,
            "needed_power_client_2beta": self.needed_power_client_2beta,
            "needed_power_aggregate": self.needed_power_aggregate,
            "dual_total": str(self.dual_total), "scaling_factor": self.scaling_factor,
            "scaled_dual_total": str(self.scaled_dual_total), "s_ambiguous": list(self.s_ambiguous),
        }


def _needed_power(lhs: Fraction, rhs_base: Fraction, eps: Fraction) -> float:
    """Smallest p with lhs ≤ rhs_base·(1+ε)^p (−inf when lhs is 0)."""
    if lhs <= 0:
        return -math.inf
    if rhs_base <= 0:
        return math.inf
    return math.log(lhs / rhs_base) / math.log(1 + eps)


def verify_certificate(solution: FacilitySolution, cert: DualCertificate, oracle: MetricOracle,
                       costs: CostVector, slack_power: int = DEFAULT_SLACK_POWER) -> CertificateReport:
    """Check the per-client and aggregate inequalities and scale the dual to feasibility."""
    eps, beta = cert.eps, cert.beta
    slack = 3 * (1 + eps) ** slack_power
    n = oracle.n
    S = solution.S
    violators = []
    need, need2 = -math.inf, -math.inf
    for j in range(n):
        f = solution.assignment[j][0] if j in solution.assignment else j
        conn = oracle.d(j, f)
        lhs = conn + beta * cert.s[j]
        if lhs > slack * cert.v[j]:
            violators.append(j)
        need = max(need, _needed_power(lhs, 3 * cert.v[j], eps))
        need2 = max(need2, _needed_power(conn + 2 * beta * cert.s[j], 3 * cert.v[j], eps))
    total_v = sum(cert.v, Fraction(0))
    C = sum((oracle.d(j, f) for j, (f, _h) in solution.assignment.items()), Fraction(0))
    F = sum((costs[i] for i in S), Fraction(0))
    agg_lhs = C + 2 * beta * F
    aggregate_ok = agg_lhs <= slack * total_v
    dual_ok = all(cert.v[j] - cert.w.get((i, j), 0) <= oracle.d(i, j) for i in range(n) for j in range(n))
    unbounded = False
    gamma = Fraction(0)
    for i in range(n):
        load = sum((cert.w.get((i, j), Fraction(0)) for j in range(n)), Fraction(0))
        if load > 0:
            if costs[i] == 0:
                unbounded = True
            else:
                gamma = max(gamma, load / costs[i])
    # dividing (v, w) by max(1, γ) restores Σ_j w_ij ≤ f_i without breaking v_j − w_ij ≤ d(i, j)
    scaled = Fraction(0) if unbounded else total_v / max(Fraction(1), gamma)
    gamma = math.inf if unbounded else float(gamma)
    return CertificateReport(not violators, aggregate_ok, dual_ok, violators, slack_power, need, need2,
                             _needed_power(agg_lhs, 3 * total_v, eps), total_v, gamma, scaled, cert.s_ambiguous)
