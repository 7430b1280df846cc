"""SSSP, MSSP and ExclusiveMSSP over a :class:`~kmclust.runtime.Runtime`.

Two engines share one contract (nearest source, distance, parent):

* ``distributed``: synchronous Bellman-Ford style relaxation, one hop layer
  per superstep, followed by an exchange of the whole shortest-path forest so
  every machine can name each vertex's source.  Exact, with true metering.
* ``charged``: exact multi-source Dijkstra computed centrally; each call books
  the black-box SSSP round bound on the charged meter.

Multi-source searches behave as if a dummy vertex joined every source by a
zero-weight edge.  Ties for the nearest source go to the smallest vertex id.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._kernels import INF, multi_source_dijkstra
from .runtime import Runtime


@dataclass(frozen=True, eq=False)
class DistanceTable:
    """Per-vertex nearest source and distance in fixed-point units of ``unit``.

    Vertices without a candidate carry ``dist == INF`` and ``nearest == -1``.
    """

    dist: np.ndarray
    nearest: np.ndarray
    nearest_host: np.ndarray
    parent: np.ndarray
    unit: Fraction

    def distance(self, v: int) -> Fraction:
        d = int(self.dist[v])
        if d == INF:
            raise ValueError(f"vertex {v} has no source in range")
        return d * self.unit

    def within(self, threshold_int: int) -> np.ndarray:
        return self.dist <= threshold_int


def as_mask(n: int, sources) -> np.ndarray:
    if isinstance(sources, np.ndarray) and sources.dtype == np.bool_:
        if sources.shape != (n,):
            raise ValueError("source mask has wrong length")
        return sources
    mask = np.zeros(n, dtype=bool)
    idx = np.asarray(list(sources) if not isinstance(sources, np.ndarray) else sources, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise ValueError("source vertex out of range")
    mask[idx] = True
    return mask


def sssp(rt: Runtime, source: int, eps: float = 1.0, label: str = "sssp") -> DistanceTable:
    if not 0 <= source < rt.n:
        raise ValueError(f"source {source} not in graph")
    return mssp(rt, [source], eps, label=label)


def mssp(rt: Runtime, sources, eps: float = 1.0, label: str = "mssp") -> DistanceTable:
    mask = as_mask(rt.n, sources)
    if not mask.any():
        raise ValueError("MSSP needs a nonempty source set")
    with rt.ledger.section(label):
        if rt.mode == "charged":
            dist, near, parent = multi_source_dijkstra(*rt.graph.csr, np.flatnonzero(mask))
            rt.charge(label, eps)
        else:
            dist, near, parent = _relax(rt, mask)
    host = np.where(near >= 0, rt.host[np.maximum(near, 0)], -1)
    return DistanceTable(dist, near, host, parent, rt.graph.unit)


def _relax(rt: Runtime, mask: np.ndarray):
    """Message-level relaxation; payload is (target, parent_ref, source_ref, dist)."""
    n, host = rt.n, rt.host
    indptr, indices, wts = rt.graph.csr
    dist = np.full(n, INF, dtype=np.int64)
    near = np.full(n, -1, dtype=np.int64)
    parent = np.full(n, -1, dtype=np.int64)
    active = [int(v) for v in np.flatnonzero(mask)]
    for v in active:
        dist[v] = 0
        near[v] = v
    while active:
        local: dict[int, tuple[int, int, int]] = {}
        outgoing: dict[tuple[int, int], tuple[int, int, int]] = {}
        for u in active:
            du, su, hu = int(dist[u]), int(near[u]), int(host[u])
            for e in range(indptr[u], indptr[u + 1]):
                v = int(indices[e])
                cand = (du + int(wts[e]), su, u)
                if cand[:2] >= (int(dist[v]), int(near[v])):
                    continue
                hv = int(host[v])
                box = local if hv == hu else outgoing
                key = v if hv == hu else (hu, v)
                if key not in box or cand < box[key]:
                    box[key] = cand
        for (hu, v), (d, s, u) in sorted(outgoing.items()):
            rt.send(hu, int(host[v]), (v, rt.ref(u), rt.ref(s), d))
        inboxes = rt.flush()
        offers = dict(local)
        for inbox in inboxes:
            for _src, (v, u_ref, s_ref, d) in inbox:
                cand = (d, s_ref[0], u_ref[0])
                if v not in offers or cand < offers[v]:
                    offers[v] = cand
        active = []
        for v, (d, s, u) in sorted(offers.items()):
            if (d, s) < (int(dist[v]), int(near[v])):
                dist[v], near[v], parent[v] = d, s, u
                active.append(v)
    _exchange_forest(rt, dist, near, parent)
    return dist, near, parent


def _exchange_forest(rt: Runtime, dist, near, parent) -> None:
    """All machines learn every (vertex, parent) pair and derive the sources."""
    for v in range(rt.n):
        if dist[v] != INF:
            p = int(parent[v])
            rt.broadcast_all(int(rt.host[v]), (rt.ref(v), rt.ref(p) if p >= 0 else (-1, -1)))
    rt.flush()
    root = np.full(rt.n, -1, dtype=np.int64)
    for v in range(rt.n):
        if dist[v] == INF or root[v] >= 0:
            continue
        chain = [v]
        while parent[chain[-1]] >= 0 and root[chain[-1]] < 0:
            chain.append(int(parent[chain[-1]]))
        top = chain[-1]
        r = root[top] if root[top] >= 0 else top
        for x in chain:
            root[x] = r
    reached = dist != INF
    assert np.array_equal(root[reached], near[reached]), "forest roots disagree with carried sources"


def subset_indices(rt: Runtime, mask: np.ndarray) -> np.ndarray:
    """Index of every member of T in the (host, vertex id) order, learned via counts."""
    counts = [x[0] for x in rt.allgather([int(c) for c in np.bincount(rt.host[mask], minlength=rt.k)])]
    offset = np.concatenate([[0], np.cumsum(counts)[:-1]]).astype(np.int64)
    index = np.full(rt.n, -1, dtype=np.int64)
    for j in range(rt.k):
        members = rt.partition.H[j][mask[rt.partition.H[j]]]
        index[members] = offset[j] + np.arange(len(members))
    return index


def bit_subsets(index: np.ndarray, size: int):
    """The 2·⌈log2 size⌉ subsets T_b^0, T_b^1 split by each index bit."""
    bits = max(1, math.ceil(math.log2(size)))
    member = index >= 0
    for b in range(bits):
        bit = (np.maximum(index, 0) >> b) & 1
        for val in (0, 1):
            yield member & (bit == val)


def exclusive_mssp(rt: Runtime, sources, eps: float = 1.0, label: str = "exclusive_mssp") -> DistanceTable:
    """For each v in T, its nearest other member of T.

    Only entries of T are meaningful; other vertices report INF.
    """
    mask = as_mask(rt.n, sources)
    size = int(mask.sum())
    if size < 2:
        raise ValueError("ExclusiveMSSP needs at least two sources")
    with rt.ledger.section(label):
        index = subset_indices(rt, mask)
        dist = np.full(rt.n, INF, dtype=np.int64)
        near = np.full(rt.n, -1, dtype=np.int64)
        for sub in bit_subsets(index, size):
            if not sub.any():
                continue
            table = mssp(rt, sub, eps, label=label)
            take = mask & ~sub
            better = take & ((table.dist < dist) | ((table.dist == dist) & (table.nearest < near)))
            dist[better] = table.dist[better]
            near[better] = table.nearest[better]
    host = np.where(near >= 0, rt.host[np.maximum(near, 0)], -1)
    return DistanceTable(dist, near, host, np.full(rt.n, -1, dtype=np.int64), rt.graph.unit)
