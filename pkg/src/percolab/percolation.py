"""Bernoulli bond percolation on a lattice region, with reproducible randomness.

Each edge gets its own 64-bit key mixed from (seed, trial, edge id), so the
configuration for a given (region, p, seed, trial) is a pure function of those
values: no generator state, no dependence on how trials are sliced across
processes.  Two configurations with the same (seed, trial) and different p are
monotonically coupled, because they threshold the same per-edge uniforms.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .lattice import lattice_from_descriptor

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLD = np.uint64(0x9E3779B97F4A7C15)


def _mix64(x: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer, vectorized; uint64 wrap-around is intended."""
    x = x.astype(np.uint64, copy=True)
    with np.errstate(over="ignore"):
        x ^= x >> np.uint64(30)
        x *= _M1
        x ^= x >> np.uint64(27)
        x *= _M2
        x ^= x >> np.uint64(31)
    return x


def edge_uniforms(lattice, seed: int, trial: int) -> np.ndarray:
    """Per-edge uniforms in [0, 1), keyed by (seed, trial, edge id)."""
    with np.errstate(over="ignore"):
        base = _mix64(np.uint64([np.uint64(seed) * _GOLD]))[0]
        base = _mix64(np.uint64([base ^ (np.uint64(trial) + _GOLD)]))[0]
        keys = np.arange(lattice.num_edges, dtype=np.uint64) * _GOLD
        keys ^= base
    bits = _mix64(keys)
    return (bits >> np.uint64(11)).astype(np.float64) * (2.0**-53)


@dataclass
class EdgeConfiguration:
    """Open/closed state of every edge, plus the parameters that produced it."""

    lattice: object
    p: float
    seed: int
    trial: int
    open_mask: np.ndarray  # bool, one entry per edge id

    @property
    def num_open(self) -> int:
        return int(self.open_mask.sum())

    def to_bytes(self) -> bytes:
        header = json.dumps(
            {
                "lattice": self.lattice.descriptor(),
                "p": self.p,
                "seed": self.seed,
                "trial": self.trial,
                "num_edges": int(len(self.open_mask)),
            },
            sort_keys=True,
        ).encode()
        payload = np.packbits(self.open_mask).tobytes()
        return len(header).to_bytes(4, "big") + header + payload

    @classmethod
    def from_bytes(cls, blob: bytes) -> "EdgeConfiguration":
        hlen = int.from_bytes(blob[:4], "big")
        header = json.loads(blob[4 : 4 + hlen].decode())
        lattice = lattice_from_descriptor(header["lattice"])
        bits = np.unpackbits(
            np.frombuffer(blob[4 + hlen :], dtype=np.uint8),
            count=header["num_edges"],
        )
        return cls(lattice, header["p"], header["seed"], header["trial"], bits.astype(bool))

    def to_text(self) -> str:
        """Plain edge list, one 'u v open|closed' line per edge.  Debug format."""
        lines = []
        for (u, v), o in zip(self.lattice.edges, self.open_mask):
            lines.append(f"{u} {v} {'open' if o else 'closed'}")
        return "\n".join(lines)


def sample(lattice, p: float, seed: int, trial: int = 0) -> EdgeConfiguration:
    """Draw one Bernoulli(p) configuration.  Pure in (lattice, p, seed, trial)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    u = edge_uniforms(lattice, seed, trial)
    return EdgeConfiguration(lattice, p, seed, trial, u < p)


@dataclass
class ClusterLabeling:
    """Connected components of the open subgraph with per-cluster statistics.

    labels[v] is the cluster id of vertex v; ids are the scipy component
    labels, which depend only on the open edge set and vertex order.  Cluster
    k occupies order[start[k]:start[k+1]] in the grouped vertex list.
    """

    lattice: object
    labels: np.ndarray
    num_clusters: int
    sizes: np.ndarray
    bbox_lo: np.ndarray  # (K, d)
    bbox_hi: np.ndarray
    touches_boundary: np.ndarray  # (K,) bool
    spans_axis: np.ndarray  # (K, d) bool: has a vertex on both opposite faces
    order: np.ndarray = field(repr=False)
    start: np.ndarray = field(repr=False)

    @property
    def spans_box(self) -> np.ndarray:
        return self.spans_axis.any(axis=1)

    def cluster_of(self, vid: int) -> int:
        return int(self.labels[vid])

    def vertices_of(self, cid: int) -> np.ndarray:
        return self.order[self.start[cid] : self.start[cid + 1]]

    def diameter_linf(self, cid: int) -> int:
        return int((self.bbox_hi[cid] - self.bbox_lo[cid]).max())


def label(config: EdgeConfiguration) -> ClusterLabeling:
    """Label open clusters and collect sizes, bounding boxes and face contacts."""
    lat = config.lattice
    V = lat.num_vertices
    oe = lat.edges[config.open_mask]
    graph = sp.coo_matrix(
        (np.ones(len(oe), dtype=np.int8), (oe[:, 0], oe[:, 1])), shape=(V, V)
    )
    ncc, labels = connected_components(graph, directed=False)

    sizes = np.bincount(labels, minlength=ncc)
    coords = lat.coords
    d = coords.shape[1]

    order = np.argsort(labels, kind="stable").astype(np.int64)
    start = np.zeros(ncc + 1, dtype=np.int64)
    np.cumsum(sizes, out=start[1:])
    # Segment reductions over the sorted order beat scatter min/max by a lot.
    sorted_coords = coords[order].astype(np.int64)
    bbox_lo = np.minimum.reduceat(sorted_coords, start[:-1], axis=0)
    bbox_hi = np.maximum.reduceat(sorted_coords, start[:-1], axis=0)

    touches = np.zeros(ncc, dtype=bool)
    touches[labels[lat.boundary_mask]] = True

    spans = np.zeros((ncc, d), dtype=bool)
    if hasattr(lat, "n"):  # box host: spanning means touching two opposite faces
        n = lat.n
        for a in range(d):
            lo_face = np.zeros(ncc, dtype=bool)
            hi_face = np.zeros(ncc, dtype=bool)
            lo_face[labels[coords[:, a] == -n]] = True
            hi_face[labels[coords[:, a] == n]] = True
            spans[:, a] = lo_face & hi_face
    return ClusterLabeling(
        lat, labels, int(ncc), sizes, bbox_lo, bbox_hi, touches, spans, order, start
    )


@dataclass
class GiantProxy:
    """Stand-in for the infinite cluster inside a finite window."""

    cluster: int | None
    mode: str  # "spanning" or "largest" (after fallback, the mode actually used)
    spanning_count: int
    fell_back: bool = False


def giant_proxy(labeling: ClusterLabeling, mode: str = "spanning",
                allow_fallback: bool = True) -> GiantProxy:
    """Pick the infinite-cluster proxy.

    "spanning": the unique cluster touching two opposite window faces; if the
    count differs from one, fall back to "largest" (flagged) or report absent.
    "largest": maximum size, ties broken by smallest cluster id.
    """
    if mode not in ("spanning", "largest"):
        raise ValueError(f"unknown giant mode {mode!r}")
    spanning = np.flatnonzero(labeling.spans_box)
    if mode == "spanning":
        if len(spanning) == 1:
            return GiantProxy(int(spanning[0]), "spanning", 1)
        if not allow_fallback:
            return GiantProxy(None, "spanning", len(spanning))
    cid = int(np.argmax(labeling.sizes))  # argmax takes the smallest id on ties
    return GiantProxy(cid, "largest", len(spanning), fell_back=mode == "spanning")


def is_finite_proxy(labeling: ClusterLabeling, cid: int,
                    giant: GiantProxy | None = None) -> bool:
    """Finite in the window sense: not the giant proxy, no boundary contact."""
    if labeling.touches_boundary[cid]:
        return False
    if giant is None:
        giant = giant_proxy(labeling)
    return giant.cluster is None or cid != giant.cluster


@dataclass
class ClusterGraph:
    """One cluster's open subgraph with a compact local vertex numbering."""

    host: object
    cluster: int
    vertex_ids: np.ndarray  # local -> host vertex id
    edges: np.ndarray  # (E_local, 2) local indices
    host_edge_ids: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    coords: np.ndarray
    boundary_mask: np.ndarray  # host window boundary, restricted to the cluster

    @property
    def num_vertices(self) -> int:
        return len(self.vertex_ids)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def local_of(self, host_vid: int) -> int:
        i = int(np.searchsorted(self.vertex_ids, host_vid))
        if i >= len(self.vertex_ids) or self.vertex_ids[i] != host_vid:
            raise KeyError(f"vertex {host_vid} not in cluster")
        return i


def cluster_subgraph(config: EdgeConfiguration, labeling: ClusterLabeling,
                     cid: int) -> ClusterGraph:
    """Extract one cluster as a standalone graph (local ids sorted by host id)."""
    lat = config.lattice
    vids = np.sort(labeling.vertices_of(cid))
    in_cluster = np.zeros(lat.num_vertices, dtype=bool)
    in_cluster[vids] = True
    emask = config.open_mask & in_cluster[lat.edges[:, 0]] & in_cluster[lat.edges[:, 1]]
    host_eids = np.flatnonzero(emask)
    he = lat.edges[host_eids]
    local = np.searchsorted(vids, he)
    from .lattice import _csr_from_edges

    indptr, indices = _csr_from_edges(len(vids), local)
    return ClusterGraph(
        host=lat,
        cluster=int(cid),
        vertex_ids=vids,
        edges=local.astype(np.int32),
        host_edge_ids=host_eids,
        indptr=indptr,
        indices=indices,
        coords=lat.coords[vids],
        boundary_mask=lat.boundary_mask[vids],
    )
