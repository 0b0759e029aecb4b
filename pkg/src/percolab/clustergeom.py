"""Boundaries, closures, frontiers and touching edges of vertex sets.

All operations work in host vertex ids against a GraphView, which restricts
the ambient edge set (open edges only, say) and optionally the vertex set
(one cluster, say).  The window convention throughout: components of a
complement that touch the host window boundary stand in for infinite
components, everything else counts as a hole and gets absorbed by closures.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

INNER = "inner_vertex"
OUTER = "outer_vertex"
EDGE = "edge"


@dataclass
class GraphView:
    """An ambient graph: host lattice plus optional edge / vertex restrictions."""

    host: object
    edge_mask: np.ndarray | None = None  # None means all host edges
    vertex_mask: np.ndarray | None = None

    @classmethod
    def whole(cls, host) -> "GraphView":
        return cls(host)

    @classmethod
    def open_edges(cls, config) -> "GraphView":
        return cls(config.lattice, config.open_mask.copy())

    @classmethod
    def cluster(cls, config, labeling, cid: int) -> "GraphView":
        vmask = labeling.labels == cid
        emask = config.open_mask & vmask[config.lattice.edges[:, 0]]
        return cls(config.lattice, emask, vmask)

    def edges(self) -> np.ndarray:
        e = self.host.edges
        if self.edge_mask is None and self.vertex_mask is None:
            return e
        keep = np.ones(len(e), dtype=bool) if self.edge_mask is None else self.edge_mask.copy()
        if self.vertex_mask is not None:
            keep &= self.vertex_mask[e[:, 0]] & self.vertex_mask[e[:, 1]]
        return e[keep]

    def contains(self) -> np.ndarray:
        if self.vertex_mask is None:
            return np.ones(self.host.num_vertices, dtype=bool)
        return self.vertex_mask


class VertexSet:
    """A set of host vertices, kept sorted for deterministic hashing."""

    def __init__(self, host, ids):
        self.host = host
        self.ids = np.unique(np.asarray(ids, dtype=np.int64))

    @classmethod
    def from_mask(cls, host, mask: np.ndarray) -> "VertexSet":
        return cls(host, np.flatnonzero(mask))

    @cached_property
    def mask(self) -> np.ndarray:
        m = np.zeros(self.host.num_vertices, dtype=bool)
        m[self.ids] = True
        return m

    @property
    def size(self) -> int:
        return len(self.ids)

    @cached_property
    def coords(self) -> np.ndarray:
        return self.host.coords[self.ids]

    def is_connected(self, view: GraphView | None = None) -> bool:
        if self.size <= 1:
            return True
        view = view or GraphView.whole(self.host)
        e = view.edges()
        inner = e[self.mask[e[:, 0]] & self.mask[e[:, 1]]]
        g = sp.coo_matrix(
            (np.ones(len(inner), np.int8), (inner[:, 0], inner[:, 1])),
            shape=(self.host.num_vertices,) * 2,
        )
        _, lab = connected_components(g, directed=False)
        return len(np.unique(lab[self.ids])) == 1

    def to_text(self) -> str:
        return "\n".join(" ".join(str(c) for c in row) for row in self.coords)

    @classmethod
    def from_text(cls, host, text: str) -> "VertexSet":
        pts = [
            [int(tok) for tok in line.split()]
            for line in text.strip().splitlines()
            if line.strip()
        ]
        return cls(host, host.vertex_ids(np.array(pts, dtype=np.int64)))

    def __eq__(self, other):
        return (
            isinstance(other, VertexSet)
            and self.host is other.host
            and np.array_equal(self.ids, other.ids)
        )

    def __repr__(self):
        return f"VertexSet({self.size} vertices)"


def _as_mask(host, S) -> np.ndarray:
    if isinstance(S, VertexSet):
        return S.mask
    S = np.asarray(S)
    if S.dtype == bool:
        return S
    m = np.zeros(host.num_vertices, dtype=bool)
    m[S] = True
    return m


def edge_boundary(S, view: GraphView) -> np.ndarray:
    """Ids of view edges with exactly one endpoint in S."""
    host = view.host
    m = _as_mask(host, S)
    e = host.edges
    keep = m[e[:, 0]] ^ m[e[:, 1]]
    if view.edge_mask is not None:
        keep &= view.edge_mask
    if view.vertex_mask is not None:
        keep &= view.vertex_mask[e[:, 0]] & view.vertex_mask[e[:, 1]]
    return np.flatnonzero(keep)


def vertex_boundary(S, view: GraphView, kind: str) -> VertexSet:
    """Inner (in S, has a view-neighbour outside) or outer vertex boundary."""
    host = view.host
    m = _as_mask(host, S)
    eids = edge_boundary(S, view)
    e = host.edges[eids]
    if kind == INNER:
        pick = np.where(m[e[:, 0]], e[:, 0], e[:, 1])
    elif kind == OUTER:
        pick = np.where(m[e[:, 0]], e[:, 1], e[:, 0])
    else:
        raise ValueError(f"kind must be {INNER!r} or {OUTER!r}")
    return VertexSet(host, pick)


def boundary(S, kind: str, view: GraphView):
    """Dispatch on kind: edge ids for EDGE, a VertexSet otherwise."""
    if kind == EDGE:
        return edge_boundary(S, view)
    return vertex_boundary(S, view, kind)


def _component_labels(view: GraphView, within: np.ndarray) -> np.ndarray:
    """Component labels of view restricted to the vertex mask `within`."""
    host = view.host
    e = host.edges
    keep = within[e[:, 0]] & within[e[:, 1]]
    if view.edge_mask is not None:
        keep &= view.edge_mask
    ee = e[keep]
    g = sp.coo_matrix(
        (np.ones(len(ee), np.int8), (ee[:, 0], ee[:, 1])),
        shape=(host.num_vertices,) * 2,
    )
    _, lab = connected_components(g, directed=False)
    return lab


def closure(S, view: GraphView) -> VertexSet:
    """S plus every component of (view minus S) not touching the window boundary.

    Inside a cluster view this is the closure within the cluster: only the
    parts of the cluster that reach the window keep their "infinite" status.
    """
    host = view.host
    m = _as_mask(host, S)
    ambient = view.contains()
    comp_mask = ambient & ~m
    lab = _component_labels(view, comp_mask)
    escape = np.zeros(lab.max() + 2, dtype=bool)
    esc_vertices = comp_mask & host.boundary_mask
    escape[lab[esc_vertices]] = True
    add = comp_mask & ~escape[lab]
    return VertexSet.from_mask(host, m | add)


def frontier(S, kind: str, view: GraphView):
    """Boundary of the closure: the cutset / shell facing the infinite side."""
    return boundary(closure(S, view).mask, kind, view)


def touching_edges(c1: VertexSet, c2: VertexSet, config) -> np.ndarray:
    """Host edge ids joining the two disjoint clusters.  All must be closed."""
    host = config.lattice
    m1, m2 = c1.mask, c2.mask
    if (m1 & m2).any():
        raise ValueError("clusters overlap")
    e = host.edges
    hit = (m1[e[:, 0]] & m2[e[:, 1]]) | (m2[e[:, 0]] & m1[e[:, 1]])
    eids = np.flatnonzero(hit)
    if config.open_mask[eids].any():
        raise AssertionError("open edge between two distinct clusters")
    return eids


# ---------------------------------------------------------------------------
# Star (Z^d_*) connectivity


def star_offsets(d: int) -> list[tuple]:
    return [
        tuple(off)
        for off in (np.indices((3,) * d).reshape(d, -1).T - 1)
        if any(off)
    ]


def coords_star_components(coords: np.ndarray) -> list[list[int]]:
    """Connected components of a point set under Linf (diagonal) adjacency."""
    coords = np.asarray(coords, dtype=np.int64)
    index = {tuple(p): i for i, p in enumerate(coords)}
    offs = star_offsets(coords.shape[1]) if len(coords) else []
    seen = np.zeros(len(coords), dtype=bool)
    comps = []
    for s in range(len(coords)):
        if seen[s]:
            continue
        stack = [s]
        seen[s] = True
        comp = []
        while stack:
            i = stack.pop()
            comp.append(i)
            p = coords[i]
            for off in offs:
                j = index.get((*(p + off),))
                if j is not None and not seen[j]:
                    seen[j] = True
                    stack.append(j)
        comps.append(comp)
    return comps


def is_star_connected(S) -> bool:
    """True for empty sets, singletons, and Linf-connected point sets."""
    coords = S.coords if isinstance(S, VertexSet) else np.asarray(S)
    if len(coords) <= 1:
        return True
    return len(coords_star_components(coords)) == 1


# ---------------------------------------------------------------------------
# Deterministic structure checks (separation and star-connectivity of frontiers)


def separates(cut: VertexSet, side_a: np.ndarray, side_b: np.ndarray, view: GraphView) -> bool:
    """No view-path joins side_a to side_b once `cut` is removed."""
    host = view.host
    alive = view.contains() & ~cut.mask
    lab = _component_labels(view, alive)
    la = set(np.unique(lab[side_a & alive]))
    lb = set(np.unique(lab[side_b & alive]))
    return not (la & lb)


def check_frontier_cutset(A: VertexSet, view: GraphView) -> dict:
    """Fact about frontiers as cutsets and their star-connectivity.

    Returns flags for: inner/outer frontier separating the closure from its
    complement, and inner/outer frontier being Linf-connected.
    """
    host = view.host
    closed = closure(A, view)
    inner = vertex_boundary(closed.mask, view, INNER)
    outer = vertex_boundary(closed.mask, view, OUTER)
    ambient = view.contains()
    comp = ambient & ~closed.mask
    out = {
        "inner_separates": separates(inner, closed.mask & ~inner.mask, comp, view),
        "outer_separates": separates(outer, closed.mask, comp & ~outer.mask, view),
        "inner_star_connected": is_star_connected(inner),
        "outer_star_connected": is_star_connected(outer),
    }
    return out


def complement_component_boundaries(A: VertexSet, view: GraphView) -> list[tuple[VertexSet, VertexSet]]:
    """(component, outer vertex boundary) for every component of (view minus A).

    For connected A in a box the boundaries are the sets the
    star-connectivity fact speaks about; each boundary is a subset of A.
    """
    host = view.host
    ambient = view.contains()
    comp_mask = ambient & ~A.mask
    lab = _component_labels(view, comp_mask)
    labs = np.unique(lab[comp_mask])
    out = []
    for l in labs:
        cmask = comp_mask & (lab == l)
        out.append(
            (VertexSet.from_mask(host, cmask), vertex_boundary(cmask, view, OUTER))
        )
    return out
