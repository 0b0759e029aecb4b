"""Block renormalization: goodness, substantial blocks, coloring, and the
coarse connector set P*.

Blocks live on the coarse lattice [-K, K]^d (see BlockGrid).  A block is good
when one open cluster inside it joins all 2d faces and every other in-block
cluster is small; a block is substantial for a cluster when the cluster's
trace in the block has a component of L-inf diameter >= N/5.  Red marks the
inner rim of the substantial set of the finite cluster, blue the blocks
substantial for both clusters.  P* is the colored, star-connected coarse set
that screens the finite cluster from the giant; its postconditions are
deterministic and are what the property suite checks.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import clustergeom as cg
from .lattice import BlockGrid, BoxLattice, L1
from .percolation import (EdgeConfiguration, ClusterLabeling, GiantProxy,
                          label, giant_proxy, is_finite_proxy, sample)


# ---------------------------------------------------------------------------
# Per-block machinery

@lru_cache(maxsize=8)
def _block_template(d: int, radius: int):
    """Local box of the block plus its edge source coords, grouped by axis.

    Returned arrays describe the block in its own coordinates; shifting by
    the block center maps them onto any host position.
    """
    t = BoxLattice(d, radius, L1)
    src_by_axis = []
    for a in range(d):
        src_by_axis.append(t.coords[t.coords[:, a] < radius])
    return t, src_by_axis


class BlockView:
    """Host vertex/edge ids of one block, cached on the grid."""

    def __init__(self, grid: BlockGrid, coarse_coord):
        d = grid.host.d
        self.coarse_coord = np.asarray(coarse_coord, dtype=np.int64)
        self.center = self.coarse_coord * grid.N
        t, src_by_axis = _block_template(d, grid.radius)
        self.template = t
        self.vertex_ids = grid.host.vertex_ids(t.coords + self.center)
        self.edge_ids = np.concatenate(
            [
                grid.host.l1_edge_ids(src + self.center, a)
                for a, src in enumerate(src_by_axis)
            ]
        )

    def local_labels(self, open_mask: np.ndarray):
        """Connected components of the open subgraph induced on the block."""
        t = self.template
        open_local = open_mask[self.edge_ids]
        e = t.edges[open_local]
        m = coo_matrix(
            (np.ones(len(e), dtype=np.int8), (e[:, 0], e[:, 1])),
            shape=(t.num_vertices, t.num_vertices),
        )
        _, lab = connected_components(m, directed=False)
        return lab


def _views(grid: BlockGrid) -> dict:
    cache = getattr(grid, "_block_views", None)
    if cache is None:
        cache = {}
        grid._block_views = cache
    return cache


def block_view(grid: BlockGrid, coarse_coord) -> BlockView:
    key = tuple(int(c) for c in np.asarray(coarse_coord))
    cache = _views(grid)
    if key not in cache:
        cache[key] = BlockView(grid, key)
    return cache[key]


def _component_diameters(t: BoxLattice, lab: np.ndarray, within: np.ndarray):
    """L-inf diameter (max axis span) per local component, restricted to
    the vertices selected by `within`.  Returns (component ids, diameters)."""
    sel = np.flatnonzero(within)
    if len(sel) == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    comp = lab[sel]
    ids, inv = np.unique(comp, return_inverse=True)
    k = len(ids)
    diam = np.zeros(k, dtype=np.int64)
    for a in range(t.d):
        x = t.coords[sel, a]
        lo = np.full(k, np.iinfo(np.int64).max)
        hi = np.full(k, np.iinfo(np.int64).min)
        np.minimum.at(lo, inv, x)
        np.maximum.at(hi, inv, x)
        diam = np.maximum(diam, hi - lo)
    return ids, diam


def classify_block(config: EdgeConfiguration, grid: BlockGrid, coarse_coord) -> bool:
    """True iff the block is good: one open in-block cluster meets all 2d
    faces and every other in-block cluster has L-inf diameter < N/5."""
    bv = block_view(grid, coarse_coord)
    t = bv.template
    lab = bv.local_labels(config.open_mask)
    r = grid.radius
    crossing = None
    for cand in np.unique(lab):
        members = lab == cand
        ok = True
        for a in range(t.d):
            x = t.coords[members, a]
            if x.min() != -r or x.max() != r:
                ok = False
                break
        if ok:
            crossing = cand
            break
    if crossing is None:
        return False
    ids, diam = _component_diameters(t, lab, lab != crossing)
    return bool(np.all(diam < grid.N // 5))


def substantial_blocks(config: EdgeConfiguration, labeling: ClusterLabeling,
                       cid: int, grid: BlockGrid) -> cg.VertexSet:
    """Coarse set of blocks where cluster `cid` has an in-block component of
    L-inf diameter >= N/5 (the cluster's coarse trace C^N)."""
    coarse = grid.coarse_l1
    thresh = grid.N // 5
    lo, hi = labeling.bbox_lo[cid], labeling.bbox_hi[cid]
    hits = []
    for v in range(coarse.num_vertices):
        c = np.asarray(coarse.coords[v], dtype=np.int64)
        blo, bhi = grid.block_bounds(c)
        if np.any(bhi < lo) or np.any(blo > hi):
            continue
        bv = block_view(grid, c)
        in_cluster = labeling.labels[bv.vertex_ids] == cid
        if not in_cluster.any():
            continue
        lab = bv.local_labels(config.open_mask)
        _, diam = _component_diameters(bv.template, lab, in_cluster)
        if np.any(diam >= thresh):
            hits.append(v)
    return cg.VertexSet(coarse, np.array(sorted(hits), dtype=np.int64))


def assert_coarse_connected(subst: cg.VertexSet) -> bool:
    view = cg.GraphView.whole(subst.host)
    return subst.size == 0 or subst.is_connected(view)


# ---------------------------------------------------------------------------
# Coloring

@dataclass
class BlockColoring:
    grid: BlockGrid
    sub1: cg.VertexSet  # C1^N, the finite cluster's trace
    sub2: cg.VertexSet  # C2^N, the giant's trace
    red: np.ndarray     # bool over coarse vertices
    blue: np.ndarray

    @property
    def colored(self) -> np.ndarray:
        return self.red | self.blue

    def rows(self):
        coarse = self.grid.coarse_l1
        s1, s2 = self.sub1.mask, self.sub2.mask
        for v in range(coarse.num_vertices):
            yield {
                "block": tuple(int(x) for x in coarse.coords[v]),
                "sub1": bool(s1[v]),
                "sub2": bool(s2[v]),
                "red": bool(self.red[v]),
                "blue": bool(self.blue[v]),
            }

    def to_raster(self) -> str:
        """One character per block (d=2): '.' none, '1'/'2' substantial only,
        'R' red, 'B' blue, 'X' red and blue."""
        coarse = self.grid.coarse_l1
        if coarse.d != 2:
            raise ValueError("raster view is 2d only")
        side = coarse.side
        out = []
        s1, s2 = self.sub1.mask, self.sub2.mask
        for i in range(side):
            row = []
            for j in range(side):
                v = i * side + j
                if self.red[v] and self.blue[v]:
                    ch = "X"
                elif self.red[v]:
                    ch = "R"
                elif self.blue[v]:
                    ch = "B"
                elif s1[v]:
                    ch = "1"
                elif s2[v]:
                    ch = "2"
                else:
                    ch = "."
                row.append(ch)
            out.append("".join(row))
        return "\n".join(out)


def color(config: EdgeConfiguration, labeling: ClusterLabeling,
          c1: int, c2: int, grid: BlockGrid) -> BlockColoring:
    """Red = substantial-for-c1 blocks with a coarse-l1 neighbour that is not;
    blue = substantial for both.  Neighbourhood is taken inside the coarse
    window; conditioned samples keep the traces clear of its rim."""
    sub1 = substantial_blocks(config, labeling, c1, grid)
    sub2 = substantial_blocks(config, labeling, c2, grid)
    coarse = grid.coarse_l1
    m1 = sub1.mask
    red = np.zeros(coarse.num_vertices, dtype=bool)
    for v in sub1.ids:
        nb = coarse.neighbors(int(v))
        if len(nb) < 2 * coarse.d or not m1[nb].all():
            red[v] = True
    blue = m1 & sub2.mask
    return BlockColoring(grid, sub1, sub2, red, blue)


def check_colored_not_good(config: EdgeConfiguration, coloring: BlockColoring) -> list:
    """Coarse ids of colored blocks that classify as good (must be empty)."""
    coarse = coloring.grid.coarse_l1
    bad = []
    for v in np.flatnonzero(coloring.colored):
        if classify_block(config, coloring.grid, coarse.coords[v]):
            bad.append(int(v))
    return bad


def touching_pair_cover(config: EdgeConfiguration, labeling: ClusterLabeling,
                        c1: int, c2: int, coloring: BlockColoring):
    """For each touching edge (x in C1 adjacent to y in C2, edge closed),
    count the blue blocks containing both endpoints.

    Returns (counts, interior_mask): the covering claim (1 <= count <= 2^d)
    applies to pairs whose endpoints sit inside the region covered by whole
    blocks, hence the mask.
    """
    grid = coloring.grid
    host = grid.host
    eids = cg.touching_edges(
        cg.VertexSet(host, labeling.vertices_of(c1)),
        cg.VertexSet(host, labeling.vertices_of(c2)),
        config,
    )
    blue = coloring.blue
    coarse = grid.coarse_l1
    counts = np.zeros(len(eids), dtype=np.int64)
    interior = np.zeros(len(eids), dtype=bool)
    lim = grid.N * grid.K
    for i, e in enumerate(eids):
        u, v = host.edges[e]
        cu = host.coords[u]
        cvv = host.coords[v]
        interior[i] = max(np.abs(cu).max(), np.abs(cvv).max()) <= lim
        bu = grid.blocks_containing(cu[None, :])[0]
        bv2 = grid.blocks_containing(cvv[None, :])[0]
        both = {tuple(map(int, b)) for b in bu} & {tuple(map(int, b)) for b in bv2}
        counts[i] = sum(
            blue[coarse.vertex_id(np.array(b))] for b in both
        )
    return eids, counts, interior


def check_good_forces_neighbors(config: EdgeConfiguration,
                                coloring: BlockColoring) -> list:
    """Blocks that are good and substantial-for-C1 but have an in-window
    neighbour that is not substantial-for-C1 (empirically expected empty)."""
    coarse = coloring.grid.coarse_l1
    m1 = coloring.sub1.mask
    bad = []
    for v in coloring.sub1.ids:
        nb = coarse.neighbors(int(v))
        if m1[nb].all() and len(nb) == 2 * coarse.d:
            continue
        if classify_block(config, coloring.grid, coarse.coords[v]):
            bad.append(int(v))
    return bad


# ---------------------------------------------------------------------------
# The P / P* construction

@dataclass
class PStarResult:
    p_star: cg.VertexSet
    p_set: cg.VertexSet          # P before the uncolored surgery
    inner_rim: cg.VertexSet      # inner vertex boundary of closure(C1^N)
    overlap: cg.VertexSet        # closure(C1^N) & C2^N
    n_pockets: int               # finite uncolored components rewired
    n_window_pockets: int        # uncolored components reaching the window rim
    empty: bool = False


def build_P_star(coloring: BlockColoring) -> PStarResult:
    """P = inner rim of closure(C1^N), plus the part of C2^N inside the
    closure.  Uncolored pockets meeting P are cut out and replaced by their
    closed outer boundaries, which are colored and star-connected; the result
    is P*."""
    grid = coloring.grid
    coarse = grid.coarse_l1
    view = cg.GraphView.whole(coarse)
    empty = coloring.sub1.size == 0

    def vs(mask):
        return cg.VertexSet.from_mask(coarse, mask)

    if empty:
        z = np.zeros(coarse.num_vertices, dtype=bool)
        return PStarResult(vs(z), vs(z), vs(z), vs(z), 0, 0, empty=True)

    closed1 = cg.closure(coloring.sub1.mask, view)
    rim_mask = cg.vertex_boundary(closed1, view, cg.INNER).mask.copy()
    overlap = closed1.mask & coloring.sub2.mask
    p_mask = rim_mask | overlap

    colored = coloring.colored
    unc = ~colored
    lab = np.full(coarse.num_vertices, -1, dtype=np.int64)
    if unc.any():
        sel = np.flatnonzero(unc)
        e = coarse.edges
        keep = unc[e[:, 0]] & unc[e[:, 1]]
        ee = e[keep]
        m = coo_matrix(
            (np.ones(len(ee), np.int8), (ee[:, 0], ee[:, 1])),
            shape=(coarse.num_vertices,) * 2,
        )
        _, full = connected_components(m, directed=False)
        lab[sel] = full[sel]

    star = p_mask.copy()
    n_pockets = 0
    n_window = 0
    for comp in np.unique(lab[lab >= 0]):
        members = lab == comp
        if not (members & p_mask).any():
            continue
        if (members & coarse.boundary_mask).any():
            n_window += 1  # window-truncated pocket, left in place
            continue
        n_pockets += 1
        star &= ~members
        closed_p = cg.closure(members, view)
        star |= cg.vertex_boundary(closed_p, view, cg.OUTER).mask

    return PStarResult(vs(star), vs(p_mask), vs(rim_mask), vs(overlap),
                       n_pockets, n_window)


def check_P_star(coloring: BlockColoring, result: PStarResult,
                 labeling: ClusterLabeling | None = None,
                 c1: int | None = None) -> dict:
    """The deterministic postconditions, reported individually."""
    coarse = coloring.grid.coarse_l1
    star = result.p_star
    out = {
        "subset_colored": bool(coloring.colored[star.ids].all()),
        "star_connected": cg.is_star_connected(star.coords),
        "contains_colored_P": bool(
            star.mask[result.p_set.mask & coloring.colored].all()
        ),
        "no_window_pockets": result.n_window_pockets == 0,
    }
    if labeling is not None and c1 is not None:
        lo = labeling.bbox_lo[c1] - coloring.grid.N
        hi = labeling.bbox_hi[c1] + coloring.grid.N
        centers = star.coords * coloring.grid.N
        out["inside_C1_box"] = bool(
            np.all((centers >= lo) & (centers <= hi))
        ) if star.size else True
    return out


def coarse_image(grid: BlockGrid, fine_coords: np.ndarray) -> cg.VertexSet:
    """Nearest-block image of a fine point set; star steps stay star steps."""
    cc = np.unique(grid.nearest_block(fine_coords), axis=0)
    ids = grid.coarse_l1.vertex_ids(cc)
    return cg.VertexSet(grid.coarse_l1, np.sort(ids))


def delta_N(config: EdgeConfiguration, labeling: ClusterLabeling,
            c1: int, c2: int, grid: BlockGrid) -> cg.VertexSet:
    """Coarse image of the side of C1 that faces C2: the outer vertex
    boundary of the ambient-complement component holding C2.  Star-connected
    by the complement-boundary fact, and the image map preserves that."""
    host = grid.host
    view = cg.GraphView(host)  # ambient adjacency, every edge present
    A = cg.VertexSet(host, labeling.vertices_of(c1))
    seed = labeling.vertices_of(c2)[0]
    for comp, bnd in cg.complement_component_boundaries(A, view):
        if comp.mask[seed]:
            return coarse_image(grid, host.coords[bnd.ids])
    raise AssertionError("C2 not found in any complement component")


# ---------------------------------------------------------------------------
# Conditioned sampling

@dataclass
class ConditionedSample:
    config: EdgeConfiguration
    labeling: ClusterLabeling
    c1: int
    giant: GiantProxy
    tries: int
    mode: str  # "rejection" or "ring-seeded"


def _qualifies(config, lab, diam_min, bbox_radius, require_spanning):
    host = config.lattice
    o = host.origin
    c1 = lab.cluster_of(o)
    g = giant_proxy(lab, allow_fallback=not require_spanning)
    if g.cluster is None or g.cluster == c1:
        return None
    if not is_finite_proxy(lab, c1, g):
        return None
    span = lab.bbox_hi[c1] - lab.bbox_lo[c1]
    if span.max() < diam_min:
        return None
    if bbox_radius is not None:
        if max(np.abs(lab.bbox_lo[c1]).max(), np.abs(lab.bbox_hi[c1]).max()) > bbox_radius:
            return None
    return c1, g


def conditioned_sample(host, p: float, seed: int, *, diam_min: int,
                       bbox_radius: int | None = None,
                       require_spanning: bool = True,
                       trial_start: int = 0, max_tries: int = 100_000,
                       ring_radius: int | None = None) -> ConditionedSample:
    """Sample until the origin cluster is a finite proxy with L-inf diameter
    >= diam_min (and optionally a bounded bounding box), with a giant present.

    ring_radius switches to the seeded mode: the edge ring of the given box
    is forced closed first, which makes the origin cluster finite by fiat.
    The mode travels with the sample; seeded draws are biased and say so.
    """
    mode = "rejection" if ring_radius is None else "ring-seeded"
    ring = None
    if ring_radius is not None:
        from .isoperimetry import box_edge_ids

        ring = box_edge_ids(host, ring_radius)
    for t in range(trial_start, trial_start + max_tries):
        config = sample(host, p, seed, trial=t)
        if ring is not None:
            config.open_mask[ring] = False
        lab = label(config)
        got = _qualifies(config, lab, diam_min, bbox_radius, require_spanning)
        if got is not None:
            return ConditionedSample(config, lab, got[0], got[1],
                                     t - trial_start + 1, mode)
    raise RuntimeError(
        f"no qualifying configuration in {max_tries} tries (seed {seed})"
    )
