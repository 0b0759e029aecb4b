"""Brute-force reference implementations.

Everything here is deliberately naive and independent of the main code
paths: python sets, hand-rolled BFS, dense linear algebra, dynamic
programming on arrays.  Tests compare the fast implementations against
these, and the CLI `oracle` subcommand writes their reference tables.
Do not optimize this file.
"""
from __future__ import annotations

import math
from collections import deque

import numpy as np


# ---------------------------------------------------------------------------
# Clusters by hand

def bfs_clusters(num_vertices: int, edges, open_mask) -> list[set]:
    """Connected components of the open subgraph as a list of vertex sets."""
    adj: dict[int, list] = {}
    for eid, (u, v) in enumerate(edges):
        if open_mask[eid]:
            adj.setdefault(int(u), []).append(int(v))
            adj.setdefault(int(v), []).append(int(u))
    seen = set()
    out = []
    for s in range(num_vertices):
        if s in seen:
            continue
        comp = {s}
        seen.add(s)
        q = deque([s])
        while q:
            u = q.popleft()
            for w in adj.get(u, ()):
                if w not in comp:
                    comp.add(w)
                    seen.add(w)
                    q.append(w)
        out.append(comp)
    return out


# ---------------------------------------------------------------------------
# Boundaries and closures on coordinate sets

def brute_edge_boundary(S: set, edges) -> set:
    """Edge ids with exactly one endpoint in S."""
    return {
        eid for eid, (u, v) in enumerate(edges) if (int(u) in S) != (int(v) in S)
    }


def brute_closure(S: set, num_vertices: int, edges, boundary_ids: set) -> set:
    """S plus all components of the complement that avoid the boundary set."""
    adj: dict[int, list] = {}
    for u, v in edges:
        adj.setdefault(int(u), []).append(int(v))
        adj.setdefault(int(v), []).append(int(u))
    out = set(S)
    seen = set(S)
    for s in range(num_vertices):
        if s in seen:
            continue
        comp = {s}
        seen.add(s)
        q = deque([s])
        while q:
            u = q.popleft()
            for w in adj.get(u, ()):
                if w not in comp and w not in S:
                    comp.add(w)
                    seen.add(w)
                    q.append(w)
        if not comp & boundary_ids:
            out |= comp
    return out


# ---------------------------------------------------------------------------
# Anchored connected sets, the slow way

def anchored_sets_bfs(indptr, indices, anchor: int, max_size: int) -> set:
    """All connected sets containing `anchor`, as frozensets, by breadth-
    first growth with global deduplication.  Exponential; keep max_size small.
    """
    def nbrs(v):
        return [int(w) for w in indices[indptr[v] : indptr[v + 1]]]

    frontier = {frozenset([int(anchor)])}
    out = set(frontier)
    for _ in range(max_size - 1):
        nxt = set()
        for S in frontier:
            for v in S:
                for w in nbrs(v):
                    if w not in S:
                        grown = S | {w}
                        if grown not in out:
                            out.add(grown)
                            nxt.add(grown)
        frontier = nxt
    return out


def anchored_counts(indptr, indices, anchor: int, max_size: int) -> dict[int, int]:
    counts: dict[int, int] = {}
    for S in anchored_sets_bfs(indptr, indices, anchor, max_size):
        counts[len(S)] = counts.get(len(S), 0) + 1
    return counts


# ---------------------------------------------------------------------------
# Minimal cutsets, the slow way

def _separates_bfs(num_vertices, edges, removed: set, origin: int,
                   boundary_ids: set) -> bool:
    adj: dict[int, list] = {}
    for eid, (u, v) in enumerate(edges):
        if eid not in removed:
            adj.setdefault(int(u), []).append(int(v))
            adj.setdefault(int(v), []).append(int(u))
    seen = {origin}
    q = deque([origin])
    while q:
        u = q.popleft()
        if u in boundary_ids:
            return False
        for w in adj.get(u, ()):
            if w not in seen:
                seen.add(w)
                q.append(w)
    return True


def census_oracle(graph, origin: int, n_max: int, size_cap: int) -> dict[int, int]:
    """q_n by brute force: enumerate anchored sets (BFS dedup), keep the
    closed interior ones, take edge boundaries, filter to minimal cutsets,
    deduplicate, count by size."""
    edges = [(int(u), int(v)) for u, v in graph.edges]
    boundary_ids = set(np.flatnonzero(graph.boundary_mask).tolist())
    seen_cuts: dict[int, set] = {}
    for S in anchored_sets_bfs(graph.indptr, graph.indices, origin, size_cap):
        if S & boundary_ids:
            continue
        if brute_closure(S, graph.num_vertices, edges, boundary_ids) != S:
            continue
        cut = brute_edge_boundary(S, edges)
        n = len(cut)
        if n > n_max:
            continue
        if not _separates_bfs(graph.num_vertices, edges, cut, origin, boundary_ids):
            continue
        minimal = True
        for e in cut:
            if _separates_bfs(graph.num_vertices, edges, cut - {e}, origin,
                              boundary_ids):
                minimal = False
                break
        if minimal:
            seen_cuts.setdefault(n, set()).add(frozenset(cut))
    return {n: len(s) for n, s in sorted(seen_cuts.items())}


# ---------------------------------------------------------------------------
# Walk oracles

def lazy_return_z2(n_max: int, beta: float = 0.5) -> np.ndarray:
    """p_n(o,o) on the infinite Z^2 lattice by dynamic programming on a
    padded array; exact for n <= padding radius."""
    m = n_max + 2
    side = 2 * m + 1
    field = np.zeros((side, side))
    field[m, m] = 1.0
    out = np.empty(n_max + 1)
    out[0] = 1.0
    q = (1.0 - beta) / 4.0
    for n in range(1, n_max + 1):
        nxt = beta * field.copy()
        nxt[1:, :] += q * field[:-1, :]
        nxt[:-1, :] += q * field[1:, :]
        nxt[:, 1:] += q * field[:, :-1]
        nxt[:, :-1] += q * field[:, 1:]
        field = nxt
        out[n] = field[m, m]
    return out


def cycle_gap(L: int, beta: float = 0.5) -> float:
    """Spectral gap of the lazy walk on the L-cycle, closed form."""
    return (1.0 - beta) * (1.0 - math.cos(2.0 * math.pi / L))


def dense_spectral(graph, beta: float = 0.5) -> np.ndarray:
    """All eigenvalues of the walk kernel, via a dense symmetric solve."""
    n = graph.num_vertices
    a = np.zeros((n, n))
    for u, v in graph.edges:
        a[int(u), int(v)] = 1.0
        a[int(v), int(u)] = 1.0
    deg = a.sum(axis=1)
    s = 1.0 / np.sqrt(np.maximum(deg, 1.0))
    m = beta * np.eye(n) + (1.0 - beta) * (s[:, None] * a * s[None, :])
    return np.linalg.eigvalsh(m)


def dense_resistance(num_vertices: int, edges, A, B) -> float:
    """R_eff by pseudo-inverse of the dense Laplacian with terminals merged."""
    lap = np.zeros((num_vertices, num_vertices))
    for u, v in edges:
        u, v = int(u), int(v)
        lap[u, u] += 1
        lap[v, v] += 1
        lap[u, v] -= 1
        lap[v, u] -= 1
    # Merge each terminal set into a single node.
    keep = [i for i in range(num_vertices) if i not in set(A) | set(B)]
    order = [sorted(A), sorted(B)] + [[i] for i in keep]
    k = len(order)
    merged = np.zeros((k, k))
    for i, gi in enumerate(order):
        for j, gj in enumerate(order):
            merged[i, j] = lap[np.ix_(gi, gj)].sum()
    pinv = np.linalg.pinv(merged)
    return float(pinv[0, 0] + pinv[1, 1] - 2 * pinv[0, 1])


# ---------------------------------------------------------------------------
# Entropy by definition

def entropy_by_definition(points: np.ndarray, axes: tuple) -> float:
    """H of the chosen coordinate projection of a uniform point, natural log."""
    proj = [tuple(p[a] for a in axes) for p in points]
    v = len(proj)
    counts: dict[tuple, int] = {}
    for t in proj:
        counts[t] = counts.get(t, 0) + 1
    return -sum((c / v) * math.log(c / v) for c in counts.values())
