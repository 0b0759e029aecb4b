"""Shared test utilities: random connected sets and brute-force recomputations."""
import numpy as np

from percolab import clustergeom as cg
from percolab.isoperimetry import grow_uniform


def connected_set(host, rng, size: int, anchor: int | None = None,
                  margin: int = 0) -> np.ndarray:
    """A uniform-growth connected vertex set on the full host adjacency.

    margin > 0 keeps the set at L-inf distance >= margin from the window rim,
    which makes the window a faithful stand-in for the infinite lattice: the
    set's closure and both its frontiers then live entirely inside the window.
    """
    allowed = None
    if margin:
        allowed = np.abs(host.coords).max(axis=1) <= host.n - margin
    if anchor is None:
        while True:
            anchor = int(rng.integers(host.num_vertices))
            if allowed is None or allowed[anchor]:
                break
    ids = grow_uniform(host, anchor, size, rng, allowed=allowed)
    assert ids is not None, "host smaller than requested set"
    return ids


def neighbor_sets(host):
    """Vertex id -> set of neighbor ids, built edge by edge."""
    out = [set() for _ in range(host.num_vertices)]
    for u, v in host.edges:
        out[int(u)].add(int(v))
        out[int(v)].add(int(u))
    return out


def view_edge_list(view: cg.GraphView):
    """(edge id, u, v) triples surviving the view's masks."""
    host = view.host
    out = []
    for i, (u, v) in enumerate(host.edges):
        if view.edge_mask is not None and not view.edge_mask[i]:
            continue
        if view.vertex_mask is not None and not (
            view.vertex_mask[u] and view.vertex_mask[v]
        ):
            continue
        out.append((i, int(u), int(v)))
    return out
