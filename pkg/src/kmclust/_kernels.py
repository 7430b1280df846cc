"""Compiled inner loops for the charged-oracle engine and sketch construction.

All distances are int64 fixed-point values; INF marks unreachable vertices.
"""
from __future__ import annotations

import heapq

import numpy as np
from numba import njit

INF = np.iinfo(np.int64).max


@njit(cache=True)
def multi_source_dijkstra(indptr, indices, wts, sources):
    """Nearest source per vertex, ordered by (distance, source id).

    Returns (dist, nearest, parent); sources have parent -1.
    """
    n = len(indptr) - 1
    dist = np.full(n, INF, np.int64)
    near = np.full(n, -1, np.int64)
    parent = np.full(n, -1, np.int64)
    done = np.zeros(n, np.bool_)
    heap = [(np.int64(0), np.int64(0), np.int64(0))]
    heap.pop()
    for s in sources:
        if near[s] == -1:
            dist[s] = 0
            near[s] = s
            heapq.heappush(heap, (np.int64(0), np.int64(s), np.int64(s)))
    while len(heap) > 0:
        d, src, u = heapq.heappop(heap)
        if done[u] or d != dist[u] or src != near[u]:
            continue
        done[u] = True
        for e in range(indptr[u], indptr[u + 1]):
            v = indices[e]
            if done[v]:
                continue
            nd = d + wts[e]
            if nd < dist[v] or (nd == dist[v] and src < near[v]):
                dist[v] = nd
                near[v] = src
                parent[v] = u
                heapq.heappush(heap, (nd, src, np.int64(v)))
    return dist, near, parent


@njit(cache=True)
def _slot(kv, kd, v, d, mask):
    h = np.uint64(v) * np.uint64(0x9E3779B97F4A7C15) + np.uint64(d) * np.uint64(0xC2B2AE3D27D4EB4F)
    h ^= h >> np.uint64(31)
    i = np.int64(h & np.uint64(mask))
    while kv[i] != -1 and (kv[i] != v or kd[i] != d):
        i = (i + 1) & mask
    return i


@njit(cache=True)
def _grow(kv, kd, val, qual):
    cap = 2 * len(kv)
    nkv = np.full(cap, -1, np.int64)
    nkd = np.zeros(cap, np.int64)
    nval = np.zeros(cap, np.float64)
    nqual = np.zeros(cap, np.int64)
    mask = cap - 1
    for i in range(len(kv)):
        if kv[i] != -1:
            j = _slot(nkv, nkd, kv[i], kd[i], mask)
            nkv[j] = kv[i]
            nkd[j] = kd[i]
            nval[j] = val[i]
            nqual[j] = qual[i]
    return nkv, nkd, nval, nqual


@njit(cache=True)
def sketch_sweep(indptr, indices, wts, levels, rank_of_level, init_cap):
    """Run every repetition of the level-by-level MSSP sweep.

    ``levels[j, v]`` is the rank level of v in repetition j.  Levels are
    processed in increasing order; a level's multi-source search only expands
    vertices whose distance to that level beats every lower level, which
    yields exactly the prefix-minimum frontier that queries consult.

    Frontier changes are folded into a hash table keyed by (vertex, distance):
    ``val`` accumulates the change of the summed query rank at that distance
    and ``qual`` the number of repetitions that start qualifying there.
    Returns (keys_v, keys_d, val, qual, nonempty_level_count).
    """
    ell, n = levels.shape
    cap = init_cap
    kv = np.full(cap, -1, np.int64)
    kd = np.zeros(cap, np.int64)
    val = np.zeros(cap, np.float64)
    qual = np.zeros(cap, np.int64)
    size = 0
    calls = 0
    best = np.empty(n, np.int64)
    last = np.empty(n, np.int64)
    # tentative distance of the current level's search, valid where stamp == search id
    tent = np.empty(n, np.int64)
    stamp = np.full(n, -1, np.int64)
    sid = 0
    # heap entries are packed as dist * n + vertex (caller checks the range)
    heap = [np.int64(0)]
    heap.pop()
    for j in range(ell):
        lv = levels[j]
        best[:] = INF
        last[:] = -1
        order = np.argsort(lv)
        p = 0
        while p < n:
            lev = lv[order[p]]
            q = p
            sid += 1
            while q < n and lv[order[q]] == lev:
                tent[order[q]] = 0
                stamp[order[q]] = sid
                heapq.heappush(heap, np.int64(order[q]))
                q += 1
            calls += 1
            r = rank_of_level[lev]
            while len(heap) > 0:
                key = heapq.heappop(heap)
                d = key // n
                u = key - d * n
                if d >= best[u]:
                    continue
                best[u] = d
                if 4 * (size + 2) > 3 * cap:
                    kv, kd, val, qual = _grow(kv, kd, val, qual)
                    cap = len(kv)
                i = _slot(kv, kd, u, d, cap - 1)
                if kv[i] == -1:
                    kv[i] = u
                    kd[i] = d
                    size += 1
                val[i] += r
                if last[u] >= 0:
                    i = _slot(kv, kd, u, last[u], cap - 1)
                    val[i] -= r
                last[u] = d
                for e in range(indptr[u], indptr[u + 1]):
                    nd = d + wts[e]
                    x = indices[e]
                    if nd < best[x] and (stamp[x] != sid or nd < tent[x]):
                        tent[x] = nd
                        stamp[x] = sid
                        heapq.heappush(heap, nd * n + x)
            p = q
        for u in range(n):
            if last[u] >= 0:
                i = _slot(kv, kd, u, last[u], cap - 1)
                val[i] -= 1.0
                qual[i] += 1
    keep = kv != -1
    return kv[keep], kd[keep], val[keep], qual[keep], calls
