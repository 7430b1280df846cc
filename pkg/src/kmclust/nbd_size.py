"""Neighborhood-size estimation by minimum-rank sketches.

Each of ℓ repetitions draws a random rank per vertex, rounds it down to a
power of (1+ε'), groups vertices by rounded level and runs one MSSP per
nonempty level.  For a vertex v and radius d a repetition reports the rank of
the lowest level within distance d; the mean reported rank R̄ estimates
1/(1+|B(v, d)|).

Storage: all a query ever needs from one repetition is the step function
d ↦ (reported rank at d), and those only change at the distances where a
level beats every lower level.  The sketch therefore keeps, per vertex, the
sum over repetitions of these step functions as a sorted breakpoint table.
Queries are a binary search plus arithmetic.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from fractions import Fraction

import numpy as np

from ._kernels import INF, sketch_sweep
from .runtime import Runtime
from .seeding import derive_rng
from .shortest_paths import mssp

DEFAULT_REPETITION_CONSTANT = 4.0


@dataclass(frozen=True)
class SketchParams:
    n: int
    eps: float
    c: float = DEFAULT_REPETITION_CONSTANT

    def __post_init__(self):
        if not 0 < self.eps <= 1:
            raise ValueError("eps must lie in (0, 1]")
        if self.n < 1 or self.c <= 0:
            raise ValueError("need n >= 1 and c > 0")

    @property
    def eps_prime(self) -> float:
        return self.eps / (self.eps + 4)

    @property
    def t(self) -> int:
        if self.n == 1:
            return 1
        return max(1, math.ceil(2 * math.log(self.n) / math.log1p(self.eps_prime)))

    @property
    def ell(self) -> int:
        if self.n == 1:
            return 1
        return max(1, math.ceil(self.c * math.log2(self.n) / self.eps_prime**2))

    def rank_of_level(self) -> np.ndarray:
        """Rounded rank (1+ε')^i / n² of level i, for i = 0..t-1 (n = 1: the single rank 1)."""
        if self.n == 1:
            return np.ones(1)
        return (1 + self.eps_prime) ** np.arange(self.t, dtype=np.float64) / self.n**2


def round_ranks(raw: np.ndarray, params: SketchParams) -> np.ndarray:
    """Level i with (1+ε')^i/n² ≤ raw < (1+ε')^{i+1}/n²."""
    if params.n == 1:
        return np.zeros(raw.shape, dtype=np.int32)
    base = 1 + params.eps_prime
    scaled = raw * params.n**2
    lev = np.floor(np.log(scaled) / math.log(base)).astype(np.int64)
    lev -= base ** lev > scaled
    lev += base ** (lev + 1) <= scaled
    return lev.astype(np.int32)


def draw_ranks(params: SketchParams, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Raw ranks (ℓ × n) and their levels.

    Raw ranks below (1+ε')/n² are redrawn.  Draws are made per vertex column,
    independent of how vertices are hosted.
    """
    rng = derive_rng(seed, "sketch-ranks")
    if params.n == 1:
        return np.ones((params.ell, 1)), np.zeros((params.ell, 1), dtype=np.int32)
    floor = (1 + params.eps_prime) / params.n**2
    raw = rng.random((params.ell, params.n))
    bad = raw < floor
    while bad.any():
        raw[bad] = rng.random(int(bad.sum()))
        bad = raw < floor
    return raw, round_ranks(raw, params)


@dataclass(frozen=True, eq=False)
class NbdSketch:
    """Per-vertex breakpoint table of the summed per-repetition reported rank.

    For vertex v the breakpoints are ``dists[offsets[v]:offsets[v+1]]``
    (fixed-point, ascending).  At distance d the summed rank is
    ``ell + cum_rank[i]`` and ``cum_qual[i]`` repetitions have a qualifying
    level, where i is the last breakpoint ≤ d.  Repetitions without one count
    rank 1.
    """

    params: SketchParams
    seed: int
    unit: Fraction
    offsets: np.ndarray
    dists: np.ndarray
    cum_rank: np.ndarray
    cum_qual: np.ndarray
    mssp_calls: int

    @property
    def n(self) -> int:
        return self.params.n

    def _lookup(self, v: int, d_int: int) -> tuple[float, int]:
        lo, hi = int(self.offsets[v]), int(self.offsets[v + 1])
        i = lo + int(np.searchsorted(self.dists[lo:hi], d_int, side="right")) - 1
        if i < lo:
            return float(self.params.ell), 0
        return self.params.ell + float(self.cum_rank[i]), int(self.cum_qual[i])

    def mean_rank(self, v: int, d) -> float:
        return self._lookup(v, _to_int(d, self.unit))[0] / self.params.ell

    @cached_property
    def _keys(self) -> tuple[np.ndarray, int]:
        owner = np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.offsets))
        span = int(self.dists.max(initial=0)) + 2
        return owner * span + self.dists, span

    def mean_ranks(self, d) -> np.ndarray:
        """R̄ for every vertex at one distance (vectorized form of :meth:`mean_rank`)."""
        d_int = _to_int(d, self.unit)
        keys, span = self._keys
        probe = np.arange(self.n, dtype=np.int64) * span + min(d_int, span - 1)
        i = np.searchsorted(keys, probe, side="right") - 1
        hit = i >= self.offsets[:-1]
        total = np.full(self.n, float(self.params.ell))
        total[hit] += self.cum_rank[i[hit]]
        return total / self.params.ell

    def sentinel_count(self, v: int, d) -> int:
        """Repetitions in which no level lies within distance d of v."""
        return self.params.ell - self._lookup(v, _to_int(d, self.unit))[1]

    def to_json(self) -> dict:
        return {
            "params": {"n": self.params.n, "eps": self.params.eps, "c": self.params.c},
            "seed": self.seed,
            "unit": str(self.unit),
            "offsets": self.offsets.tolist(),
            "dists": self.dists.tolist(),
            "cum_rank": self.cum_rank.tolist(),
            "cum_qual": self.cum_qual.tolist(),
            "mssp_calls": self.mssp_calls,
        }

    @classmethod
    def from_json(cls, data: dict) -> "NbdSketch":
        return cls(SketchParams(**data["params"]), data["seed"], Fraction(data["unit"]),
                   np.asarray(data["offsets"], dtype=np.int64), np.asarray(data["dists"], dtype=np.int64),
                   np.asarray(data["cum_rank"], dtype=np.float64), np.asarray(data["cum_qual"], dtype=np.int64),
                   data["mssp_calls"])

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def loads(cls, text: str) -> "NbdSketch":
        return cls.from_json(json.loads(text))


def _to_int(d, unit: Fraction) -> int:
    return math.floor(Fraction(d) / unit) if not isinstance(d, float) else math.floor(Fraction(repr(d)) / unit)


def query_size(sketch: NbdSketch, v: int, d) -> float:
    """Estimated |B(v, d)|: 1/R̄ − 1, never below 1 since v ∈ B(v, d)."""
    if d <= 0:
        raise ValueError("query distance must be positive")
    rbar = sketch.mean_rank(v, d)
    return max(1.0, 1.0 / rbar - 1.0)


def query_sizes(sketch: NbdSketch, d) -> np.ndarray:
    """:func:`query_size` for all vertices at once."""
    if d <= 0:
        raise ValueError("query distance must be positive")
    return np.maximum(1.0, 1.0 / sketch.mean_ranks(d) - 1.0)


def _tabulate(n: int, kv, kd, val, qual, unit, params, seed, calls) -> NbdSketch:
    order = np.lexsort((kd, kv))
    kv, kd, val, qual = kv[order], kd[order], val[order], qual[order]
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.add.at(offsets, kv + 1, 1)
    np.cumsum(offsets, out=offsets)
    cum_rank = np.cumsum(val)
    cum_qual = np.cumsum(qual)
    # restart the running sums at each vertex's first breakpoint
    starts = offsets[:-1][offsets[:-1] < offsets[1:]]
    for arr in (cum_rank, cum_qual):
        base = np.zeros_like(arr)
        prev = np.concatenate([[0], arr])[starts]
        seg = np.repeat(prev, np.diff(np.append(starts, len(arr))))
        base[:] = seg
        arr -= base
    return NbdSketch(params, seed, unit, offsets, kd, cum_rank, cum_qual, int(calls))


def build_sketch(rt: Runtime, params: SketchParams, seed: int, eps: float | None = None) -> NbdSketch:
    """Run all repetitions; ``eps`` is the accuracy passed to each MSSP call."""
    if params.n != rt.n:
        raise ValueError("sketch parameters do not match the graph")
    eps = params.eps if eps is None else eps
    _, levels = draw_ranks(params, seed)
    ranks = params.rank_of_level()
    with rt.ledger.section("nbd_sketch"):
        if rt.mode == "charged":
            indptr, indices, wts = rt.graph.csr
            if len(wts) and int(wts.max()) * max(rt.n - 1, 1) * rt.n >= 2**62:
                raise ValueError("distance range too wide for packed heap keys")
            kv, kd, val, qual, calls = sketch_sweep(indptr, indices, wts, levels, ranks, 1 << 16)
            rt.charge("nbd_sketch", eps, int(calls))
        else:
            kv, kd, val, qual, calls = _sweep_distributed(rt, levels, ranks, eps)
    return _tabulate(rt.n, kv, kd, val, qual, rt.graph.unit, params, seed, calls)


def _sweep_distributed(rt: Runtime, levels: np.ndarray, ranks: np.ndarray, eps: float):
    acc: dict[tuple[int, int], list] = {}

    def add(v, d, r, q=0):
        cell = acc.setdefault((v, d), [0.0, 0])
        cell[0] += r
        cell[1] += q

    calls = 0
    for lv in levels:
        best = np.full(rt.n, INF, dtype=np.int64)
        for lev in np.unique(lv):
            table = mssp(rt, lv == lev, eps, label="nbd_sketch")
            calls += 1
            r = float(ranks[lev])
            for u in np.flatnonzero(table.dist < best):
                d = int(table.dist[u])
                add(int(u), d, r)
                if best[u] != INF:
                    add(int(u), int(best[u]), -r)
                best[u] = d
        for u in np.flatnonzero(best != INF):
            add(int(u), int(best[u]), -1.0, 1)
    keys = sorted(acc)
    kv = np.array([k[0] for k in keys], dtype=np.int64)
    kd = np.array([k[1] for k in keys], dtype=np.int64)
    val = np.array([acc[k][0] for k in keys], dtype=np.float64)
    qual = np.array([acc[k][1] for k in keys], dtype=np.int64)
    return kv, kd, val, qual, calls
