"""Anchored connected sets and the isoperimetric profile of a cluster.

The profile ratio for a set S anchored at o inside a cluster is

    |open frontier of S in the cluster| / |S|^(1-1/d),

where the frontier is taken after closing S (holes filled, window convention).
Small size classes are scanned exhaustively; larger ones are probed by a
uniform growth sampler and a boundary-greedy sampler that actively hunts for
bottlenecks.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from . import clustergeom as cg
from .percolation import EdgeConfiguration, label, giant_proxy

EXACT_ENUM_CAP = 16


def enumerate_anchored_sets(graph, anchor: int, max_size: int):
    """Yield every connected vertex set containing `anchor`, each exactly once.

    Sets come out as sorted numpy id arrays, sizes 1..max_size.  The walk is
    the classic binary-partition enumeration: each candidate vertex is either
    taken (and its unseen neighbours join the candidate list) or banned for
    the rest of the branch.
    """
    if max_size > EXACT_ENUM_CAP:
        raise ValueError(f"exact enumeration capped at {EXACT_ENUM_CAP}")
    if max_size < 1:
        return
    indptr, indices = graph.indptr, graph.indices

    def neighbors(v):
        return indices[indptr[v] : indptr[v + 1]]

    def rec(S, members, ext, banned):
        yield np.sort(np.array(S, dtype=np.int64))
        if len(S) == max_size:
            return
        banned = set(banned)
        for i, v in enumerate(ext):
            grown = [
                int(w)
                for w in neighbors(v)
                if int(w) not in members and int(w) not in banned and int(w) not in ext
            ]
            S.append(v)
            members.add(v)
            yield from rec(S, members, ext[i + 1 :] + sorted(set(grown)), banned)
            S.pop()
            members.remove(v)
            banned.add(v)

    yield from rec([int(anchor)], {int(anchor)},
                   sorted(int(w) for w in neighbors(anchor)), set())


def count_anchored_sets(graph, anchor: int, max_size: int) -> dict[int, int]:
    counts: dict[int, int] = {}
    for S in enumerate_anchored_sets(graph, anchor, max_size):
        counts[len(S)] = counts.get(len(S), 0) + 1
    return counts


def grow_uniform(graph, anchor: int, size: int, rng: np.random.Generator,
                 allowed: np.ndarray | None = None) -> np.ndarray | None:
    """Uniform growth: repeatedly absorb a uniformly chosen frontier vertex.

    Returns a sorted id array, or None if the component is too small.
    """
    indptr, indices = graph.indptr, graph.indices
    members = {int(anchor)}
    cand: list[int] = []
    in_cand = set()

    def push(v):
        for w in indices[indptr[v] : indptr[v + 1]]:
            w = int(w)
            if w not in members and w not in in_cand:
                if allowed is None or allowed[w]:
                    cand.append(w)
                    in_cand.add(w)

    push(int(anchor))
    while len(members) < size:
        if not cand:
            return None
        i = int(rng.integers(len(cand)))
        v = cand[i]
        cand[i] = cand[-1]
        cand.pop()
        in_cand.remove(v)
        members.add(v)
        push(v)
    return np.sort(np.fromiter(members, dtype=np.int64))


def grow_greedy(graph, anchor: int, sizes: list[int],
                allowed: np.ndarray | None = None) -> dict[int, np.ndarray]:
    """Boundary-greedy growth, deterministic: absorb the candidate that
    minimizes the resulting raw open boundary, ties to the smallest id.

    Returns snapshots of the set at each requested size (missing sizes mean
    the component ran out first).
    """
    indptr, indices = graph.indptr, graph.indices
    deg = np.diff(indptr)
    targets = sorted(set(sizes))
    members = {int(anchor)}
    links: dict[int, int] = {}  # candidate -> edges into current set

    def absorb(v):
        for w in indices[indptr[v] : indptr[v + 1]]:
            w = int(w)
            if w in members:
                continue
            if allowed is not None and not allowed[w]:
                continue
            links[w] = links.get(w, 0) + 1

    absorb(int(anchor))
    out: dict[int, np.ndarray] = {}
    if targets and targets[0] == 1:
        out[1] = np.array([int(anchor)], dtype=np.int64)
    while len(members) < targets[-1]:
        if not links:
            break
        # delta boundary of taking v is deg(v) - 2*links(v)
        v = min(links, key=lambda u: (deg[u] - 2 * links[u], u))
        links.pop(v)
        members.add(v)
        absorb(v)
        if len(members) in targets:
            out[len(members)] = np.sort(np.fromiter(members, dtype=np.int64))
    return out


def open_frontier_size(S_ids: np.ndarray, view: cg.GraphView) -> int:
    """|open frontier| of S inside the view, after closing S."""
    return len(cg.frontier(S_ids, cg.EDGE, view))


def witness_hash(host, S_ids: np.ndarray) -> str:
    text = cg.VertexSet(host, S_ids).to_text()
    return hashlib.sha1(text.encode()).hexdigest()[:12]


@dataclass
class ProfilePoint:
    size_class: int
    min_ratio: float
    witness: str  # hash of the argmin set
    samples: int
    exact: bool


def profile(config: EdgeConfiguration, labeling, cid: int, anchor: int,
            size_classes: list[int], seed: int = 0,
            exact_max: int = 0, uniform_trials: int = 20) -> list[ProfilePoint]:
    """Minimum frontier ratio per size class for sets anchored in one cluster.

    anchor is a host vertex id inside cluster cid.  Classes up to exact_max
    are enumerated exhaustively (counted against EXACT_ENUM_CAP); the rest
    get uniform_trials uniform-growth samples plus the greedy path.
    """
    host = config.lattice
    view = cg.GraphView.cluster(config, labeling, cid)
    d = host.coords.shape[1]
    expo = 1.0 - 1.0 / d
    rng = np.random.default_rng(seed)

    # One adjacency for growth: open edges inside the cluster.
    from .percolation import cluster_subgraph

    sub = cluster_subgraph(config, labeling, cid)
    a_local = sub.local_of(anchor)

    points = []
    exact_classes = [m for m in size_classes if m <= exact_max]
    heur_classes = [m for m in size_classes if m > exact_max]

    if exact_classes:
        best = {m: (np.inf, None) for m in exact_classes}
        for S_loc in enumerate_anchored_sets(sub, a_local, max(exact_classes)):
            m = len(S_loc)
            if m not in best:
                continue
            S = sub.vertex_ids[S_loc]
            r = open_frontier_size(S, view) / m**expo
            if r < best[m][0]:
                best[m] = (r, S)
        for m in exact_classes:
            r, S = best[m]
            points.append(
                ProfilePoint(m, float(r), witness_hash(host, S) if S is not None else "", -1, True)
            )

    greedy_snaps = grow_greedy(sub, a_local, heur_classes) if heur_classes else {}

    for m in heur_classes:
        best_r, best_S, count = np.inf, None, 0
        if m in greedy_snaps:
            S = sub.vertex_ids[greedy_snaps[m]]
            best_r, best_S, count = open_frontier_size(S, view) / m**expo, S, 1
        for _ in range(uniform_trials):
            S_loc = grow_uniform(sub, a_local, m, rng)
            if S_loc is None:
                continue
            S = sub.vertex_ids[S_loc]
            r = open_frontier_size(S, view) / m**expo
            count += 1
            if r < best_r:
                best_r, best_S = r, S
        points.append(
            ProfilePoint(
                m,
                float(best_r),
                witness_hash(host, best_S) if best_S is not None else "",
                count,
                False,
            )
        )
    return points


@dataclass
class SharpnessResult:
    config: EdgeConfiguration  # after the surgery
    e_r: int
    S: cg.VertexSet
    frontier_edges: np.ndarray
    redeclared: int
    giant_is_cluster: bool
    attached: bool  # kept cluster still reaches the window boundary


def box_edge_ids(host, r: int) -> np.ndarray:
    """Host ids of the edges leaving the sub-box [-r, r]^d."""
    c = host.coords
    inbox = (np.abs(c).max(axis=1) <= r)
    e = host.edges
    return np.flatnonzero(inbox[e[:, 0]] ^ inbox[e[:, 1]])


def sharpness_witness(config: EdgeConfiguration, r: int,
                      e_r: int | None = None) -> SharpnessResult | None:
    """Close every open giant edge crossing the r-box except one.

    After the surgery the in-box part of the giant hangs off the rest of its
    cluster by the single kept edge e_r, so its open frontier is exactly
    {e_r}.  Returns None when the giant has no open edge over the box wall
    (no surgery possible on this sample).
    """
    host = config.lattice
    if r + 2 > host.n:
        raise ValueError("need r + 2 <= n so the box wall is interior")
    lab = label(config)
    g = giant_proxy(lab)
    if g.cluster is None:
        return None
    wall = box_edge_ids(host, r)
    glab = lab.labels
    e = host.edges[wall]
    open_wall = wall[
        config.open_mask[wall]
        & (glab[e[:, 0]] == g.cluster)
        & (glab[e[:, 1]] == g.cluster)
    ]
    if len(open_wall) == 0:
        return None
    if e_r is None:
        e_r = int(open_wall[0])
    elif e_r not in open_wall:
        raise ValueError("e_r must be an open giant edge over the box wall")

    new_open = config.open_mask.copy()
    to_close = open_wall[open_wall != e_r]
    new_open[to_close] = False
    cut = EdgeConfiguration(host, config.p, config.seed, config.trial, new_open)

    lab2 = label(cut)
    u, v = host.edges[e_r]
    inner = u if np.abs(host.coords[u]).max() <= r else v
    cid = lab2.cluster_of(int(inner))
    members = lab2.vertices_of(cid)
    inbox = np.abs(host.coords[members]).max(axis=1) <= r
    S = cg.VertexSet(host, members[inbox])
    view = cg.GraphView.cluster(cut, lab2, cid)
    fr = cg.frontier(S.mask, cg.EDGE, view)
    g2 = giant_proxy(lab2)
    # A surgery that cuts the kept cluster off the window boundary has no
    # analogue of the unbounded-cluster picture; callers treat it as failed.
    attached = bool(lab2.touches_boundary[cid])
    return SharpnessResult(cut, int(e_r), S, fr, int(len(to_close)),
                           g2.cluster == cid, attached)
