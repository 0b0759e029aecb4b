"""Finite lattice regions: boxes in Z^d, wedges in Z^3, coarse block grids.

Every lattice here exposes the same array layout so the rest of the package
can stay graph-agnostic:

    coords        (V, d) integer coordinates
    edges         (E, 2) vertex id pairs with u < v, edge id = row index
    indptr, indices   CSR adjacency over vertex ids
    boundary_mask (V,) True on the vertices a walker could "escape" through
                  (the face of the box, the x/y truncation faces of a wedge)

Vertex and edge ids are dense and their order is part of the reproducibility
contract: edge id i always means the same geometric edge for a given region
descriptor, on every platform and in every process.
"""
from __future__ import annotations

import json
import math
from functools import cached_property

import numpy as np

L1 = "l1"
LINF = "linf"


def _box_offsets(d: int, adjacency: str) -> np.ndarray:
    """Canonical half-space of neighbour offsets, one per undirected edge orbit.

    L1: the unit vectors +e_0, ..., +e_{d-1}.  Linf: every nonzero offset in
    {-1,0,1}^d whose first nonzero entry is +1.  The enumeration order fixes
    the edge id layout, so do not reorder.
    """
    if adjacency == L1:
        return np.eye(d, dtype=np.int64)
    if adjacency != LINF:
        raise ValueError(f"unknown adjacency {adjacency!r}")
    offs = []
    for raw in np.ndindex(*([3] * d)):
        off = np.array(raw, dtype=np.int64) - 1
        nz = np.nonzero(off)[0]
        if len(nz) and off[nz[0]] == 1:
            offs.append(off)
    return np.array(offs, dtype=np.int64)


def _csr_from_edges(num_vertices: int, edges: np.ndarray):
    """Build symmetric CSR adjacency (indptr, indices) from an (E,2) edge list."""
    if len(edges) == 0:
        return np.zeros(num_vertices + 1, dtype=np.int64), np.empty(0, dtype=np.int32)
    src = np.concatenate([edges[:, 0], edges[:, 1]])
    dst = np.concatenate([edges[:, 1], edges[:, 0]])
    order = np.argsort(src, kind="stable")
    src = src[order]
    dst = dst[order]
    counts = np.bincount(src, minlength=num_vertices)
    indptr = np.zeros(num_vertices + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return indptr, dst.astype(np.int32)


class BoxLattice:
    """The box [-n, n]^d with nearest-neighbour (l1) or star (linf) adjacency.

    Vertex id = row-major rank of (x_0+n, ..., x_{d-1}+n); edges are grouped
    by offset in the order of _box_offsets and by source id within a group.
    """

    def __init__(self, d: int, n: int, adjacency: str = L1):
        if d < 1:
            raise ValueError("dimension must be >= 1")
        if n < 0:
            raise ValueError("half-side n must be >= 0")
        self.d = int(d)
        self.n = int(n)
        self.adjacency = adjacency
        side = 2 * self.n + 1
        self.side = side
        self.num_vertices = side**d

        shape = (side,) * d
        grid = np.indices(shape).reshape(d, -1).T  # (V, d) in [0, side)
        self.coords = (grid - self.n).astype(np.int32)
        self._strides = np.array(
            [side ** (d - 1 - i) for i in range(d)], dtype=np.int64
        )

        blocks = []
        offset_of_block = []
        ids = np.arange(self.num_vertices, dtype=np.int64).reshape(shape)
        for k, off in enumerate(_box_offsets(d, adjacency)):
            src = ids[
                tuple(
                    slice(1, None) if o < 0 else slice(None, side - 1) if o > 0 else slice(None)
                    for o in off
                )
            ].ravel()
            dst = src + int(off @ self._strides)
            blocks.append(np.stack([src, dst], axis=1))
            offset_of_block.append(np.full(len(src), k, dtype=np.int8))
        self.edges = (
            np.concatenate(blocks).astype(np.int32)
            if blocks
            else np.empty((0, 2), np.int32)
        )
        self.edge_offset_index = np.concatenate(offset_of_block) if blocks else np.empty(0, np.int8)
        self.num_edges = len(self.edges)
        self.indptr, self.indices = _csr_from_edges(self.num_vertices, self.edges)
        self.boundary_mask = np.abs(self.coords).max(axis=1) == self.n

    def vertex_id(self, coord) -> int:
        coord = np.asarray(coord, dtype=np.int64)
        if coord.shape != (self.d,) or np.abs(coord).max() > self.n:
            raise ValueError(f"coordinate {coord} outside box")
        return int((coord + self.n) @ self._strides)

    def vertex_ids(self, coords: np.ndarray) -> np.ndarray:
        coords = np.asarray(coords, dtype=np.int64)
        return (coords + self.n) @ self._strides

    def vertex_coord(self, vid: int) -> np.ndarray:
        return self.coords[vid].copy()

    @property
    def origin(self) -> int:
        return self.vertex_id(np.zeros(self.d, dtype=np.int64))

    @cached_property
    def edge_index(self) -> dict:
        """Map (u, v) with u < v to the dense edge id.  Built on first use."""
        e = self.edges
        return {(int(u), int(v)): i for i, (u, v) in enumerate(e)}

    def neighbors(self, vid: int) -> np.ndarray:
        return self.indices[self.indptr[vid] : self.indptr[vid + 1]]

    def l1_edge_ids(self, src_coords: np.ndarray, axis: int) -> np.ndarray:
        """Edge ids of +axis edges out of src_coords, without the dict.

        Exploits the fixed grouping: all +axis edges form one contiguous block
        ordered by the C-order rank of the source within the sliced grid.
        Only valid on l1 lattices.
        """
        if self.adjacency != L1:
            raise ValueError("arithmetic edge ids only for l1 adjacency")
        side = self.side
        g = np.asarray(src_coords, dtype=np.int64) + self.n
        if g.ndim == 1:
            g = g[None, :]
        block = 0
        for a in range(axis):
            block += side ** (self.d - 1) * (side - 1)
        dims = [side] * self.d
        dims[axis] = side - 1
        stride = np.ones(self.d, dtype=np.int64)
        for i in range(self.d - 2, -1, -1):
            stride[i] = stride[i + 1] * dims[i + 1]
        return block + g @ stride

    def descriptor(self) -> dict:
        return {"kind": "box", "d": self.d, "n": self.n, "adjacency": self.adjacency}

    def __repr__(self):
        return f"BoxLattice(d={self.d}, n={self.n}, {self.adjacency}, V={self.num_vertices}, E={self.num_edges})"


def build_box(d: int, n: int, adjacency: str = L1) -> BoxLattice:
    """Construct the box [-n, n]^d.  See BoxLattice for the id layout."""
    return BoxLattice(d, n, adjacency)


# ---------------------------------------------------------------------------
# Height functions for wedges


class HeightFunction:
    """Nonnegative nondecreasing height profile h(x) for a wedge in Z^3.

    Families:
      constant     h(x) = c
      power        h(x) = x**alpha, 0 < alpha <= 1
      log          h(x) = log(x + shift)**r
      table        explicit values h(0..x_max)

    ``rounding`` ("ceil", "floor" or "none") is applied to the raw value;
    wedge construction requires integer heights, so use ceil or floor there.
    The callable accepts scalars or arrays and real arguments, which is what
    the profile function psi(v) = sqrt(v f(v)) needs.
    """

    def __init__(self, family: str, *, c: float = 0.0, alpha: float = 1.0,
                 r: float = 1.0, shift: float = 2.0, rounding: str = "ceil",
                 values=None):
        if family not in ("constant", "power", "log", "table"):
            raise ValueError(f"unknown height family {family!r}")
        if family == "power" and not 0 < alpha <= 1:
            raise ValueError("power family needs 0 < alpha <= 1")
        if rounding not in ("ceil", "floor", "none"):
            raise ValueError(f"unknown rounding {rounding!r}")
        self.family = family
        self.c = float(c)
        self.alpha = float(alpha)
        self.r = float(r)
        self.shift = float(shift)
        self.rounding = rounding
        self.values = None if values is None else np.asarray(values, dtype=np.int64)
        if self.values is not None:
            if (self.values < 0).any() or (np.diff(self.values) < 0).any():
                raise ValueError("tabulated heights must be nonnegative and nondecreasing")

    def _raw(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.family == "constant":
            return np.full_like(x, self.c)
        if self.family == "power":
            return np.power(np.maximum(x, 0.0), self.alpha)
        if self.family == "log":
            return np.power(np.log(x + self.shift), self.r)
        idx = np.clip(np.round(x).astype(np.int64), 0, len(self.values) - 1)
        return self.values[idx].astype(np.float64)

    def __call__(self, x):
        v = self._raw(x)
        if self.rounding == "ceil":
            v = np.ceil(v)
        elif self.rounding == "floor":
            v = np.floor(v)
        if np.ndim(x) == 0:
            return float(v)
        return v

    def analytic(self, x):
        """Family value before rounding.

        Rounding exists to build integer lattice heights; analytic values are
        what thresholds and series should use, since the rounded function can
        sit above x at small arguments.
        """
        v = self._raw(x)
        if np.ndim(x) == 0:
            return float(v)
        return v

    def int_heights(self, x_max: int) -> np.ndarray:
        """Integer heights for x = 0..x_max; requires a rounding mode."""
        if self.rounding == "none" and self.family not in ("constant", "table"):
            raise ValueError("integer heights need rounding='ceil' or 'floor'")
        h = self(np.arange(x_max + 1))
        hi = h.astype(np.int64)
        if (hi < 0).any():
            raise ValueError("heights must be nonnegative")
        if (np.diff(hi) < 0).any():
            raise ValueError("heights must be nondecreasing")
        return hi

    def descriptor(self) -> dict:
        d = {"family": self.family, "rounding": self.rounding}
        if self.family == "constant":
            d["c"] = self.c
        elif self.family == "power":
            d["alpha"] = self.alpha
        elif self.family == "log":
            d["r"] = self.r
            d["shift"] = self.shift
        else:
            d["values"] = self.values.tolist()
        return d

    @classmethod
    def from_descriptor(cls, d: dict) -> "HeightFunction":
        return cls(d["family"], c=d.get("c", 0.0), alpha=d.get("alpha", 1.0),
                   r=d.get("r", 1.0), shift=d.get("shift", 2.0),
                   rounding=d.get("rounding", "ceil"), values=d.get("values"))

    def __repr__(self):
        return f"HeightFunction({self.descriptor()})"


def constant_height(c: int) -> HeightFunction:
    return HeightFunction("constant", c=c, rounding="none")


def power_height(alpha: float, rounding: str = "floor") -> HeightFunction:
    return HeightFunction("power", alpha=alpha, rounding=rounding)


def log_height(r: float, shift: float = 2.0, rounding: str = "ceil") -> HeightFunction:
    return HeightFunction("log", r=r, shift=shift, rounding=rounding)


def height_doubling_gamma(h: HeightFunction, x_hi: int, deltas=(0.5, 0.25)) -> float:
    """min of h(delta x) / (delta h(x)) over a coarse grid with delta*x >= 2.

    A positive return certifies the h(delta x) >= gamma delta h(x) shape on
    the tabulated range.  Small arguments are excluded because integer
    rounding can zero out h there.
    """
    best = math.inf
    for delta in deltas:
        xs = np.arange(max(8, int(math.ceil(2 / delta))), x_hi + 1)
        num = np.asarray(h(delta * xs), dtype=np.float64)
        den = delta * np.asarray(h(xs), dtype=np.float64)
        ok = den > 0
        if ok.any():
            best = min(best, float((num[ok] / den[ok]).min()))
    return best


# ---------------------------------------------------------------------------
# Wedges


class WedgeLattice:
    """Truncated wedge W_h in Z^3: 0 <= x <= x_max, |y| <= y_max, |z| <= h(x).

    Nearest-neighbour adjacency only.  The |z| = h(x) ceiling and floor are
    genuine wedge boundary; the x = x_max and |y| = y_max faces are the
    truncation, and those are what boundary_mask marks (cutsets and escape
    events are measured against the truncation, not the wedge ceiling).

    Vertex ids: layers of increasing x; inside a layer, y-major then z, i.e.
    id = layer_offset[x] + (y + y_max)(2h(x)+1) + (z + h(x)).
    """

    def __init__(self, h: HeightFunction, x_max: int, y_max: int | None = None):
        if x_max < 0:
            raise ValueError("x_max must be >= 0")
        self.h = h
        self.x_max = int(x_max)
        self.y_max = int(x_max if y_max is None else y_max)
        if self.y_max < 0:
            raise ValueError("y_max must be >= 0")
        self.heights = h.int_heights(self.x_max)

        ny = 2 * self.y_max + 1
        nz = 2 * self.heights + 1
        counts = ny * nz
        self.layer_offset = np.zeros(self.x_max + 2, dtype=np.int64)
        np.cumsum(counts, out=self.layer_offset[1:])
        self.num_vertices = int(self.layer_offset[-1])
        self._ny = ny

        edge_blocks = []
        for x in range(self.x_max + 1):
            base = self.layer_offset[x]
            H = int(self.heights[x])
            ids = base + np.arange(counts[x], dtype=np.int64).reshape(ny, 2 * H + 1)
            if H > 0:
                edge_blocks.append(np.stack([ids[:, :-1].ravel(), ids[:, 1:].ravel()], 1))
            if ny > 1:
                edge_blocks.append(np.stack([ids[:-1, :].ravel(), ids[1:, :].ravel()], 1))
            if x < self.x_max:
                H2 = int(self.heights[x + 1])
                ids2 = self.layer_offset[x + 1] + np.arange(
                    counts[x + 1], dtype=np.int64
                ).reshape(ny, 2 * H2 + 1)
                # monotone h: every z of layer x exists in layer x+1
                edge_blocks.append(
                    np.stack([ids.ravel(), ids2[:, H2 - H : H2 + H + 1].ravel()], 1)
                )
        self.edges = (
            np.concatenate(edge_blocks).astype(np.int32)
            if edge_blocks
            else np.empty((0, 2), np.int32)
        )
        self.num_edges = len(self.edges)
        self.indptr, self.indices = _csr_from_edges(self.num_vertices, self.edges)

    @cached_property
    def coords(self) -> np.ndarray:
        out = np.empty((self.num_vertices, 3), dtype=np.int32)
        for x in range(self.x_max + 1):
            lo, hi = self.layer_offset[x], self.layer_offset[x + 1]
            H = int(self.heights[x])
            nz = 2 * H + 1
            local = np.arange(hi - lo)
            out[lo:hi, 0] = x
            out[lo:hi, 1] = local // nz - self.y_max
            out[lo:hi, 2] = local % nz - H
        return out

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        c = self.coords
        return (c[:, 0] == self.x_max) | (np.abs(c[:, 1]) == self.y_max)

    def vertex_id(self, coord) -> int:
        x, y, z = (int(v) for v in coord)
        if not (0 <= x <= self.x_max and abs(y) <= self.y_max and abs(z) <= self.heights[x]):
            raise ValueError(f"coordinate {coord} outside wedge")
        H = int(self.heights[x])
        return int(self.layer_offset[x] + (y + self.y_max) * (2 * H + 1) + (z + H))

    def vertex_coord(self, vid: int) -> np.ndarray:
        return self.coords[vid].copy()

    @property
    def origin(self) -> int:
        return self.vertex_id((0, 0, 0))

    def neighbors(self, vid: int) -> np.ndarray:
        return self.indices[self.indptr[vid] : self.indptr[vid + 1]]

    @cached_property
    def edge_index(self) -> dict:
        return {(int(u), int(v)): i for i, (u, v) in enumerate(self.edges)}

    def in_wedge(self, coord) -> bool:
        """Membership in the untruncated wedge (x_max/y_max ignored).

        Supports x up to x_max + 1; by monotonicity any |z| <= h(x_max)
        column continues there, which is all the boundary bookkeeping needs.
        """
        x, y, z = (int(v) for v in coord)
        if x < 0:
            return False
        if x <= self.x_max:
            return abs(z) <= self.heights[x]
        if x == self.x_max + 1:
            return abs(z) <= self.heights[self.x_max] or abs(z) <= self.h(float(x))
        return abs(z) <= self.h(float(x))

    def descriptor(self) -> dict:
        return {
            "kind": "wedge",
            "h": self.h.descriptor(),
            "x_max": self.x_max,
            "y_max": self.y_max,
        }

    def __repr__(self):
        return (
            f"WedgeLattice(h={self.h.family}, x_max={self.x_max}, "
            f"y_max={self.y_max}, V={self.num_vertices}, E={self.num_edges})"
        )


def build_wedge(h: HeightFunction, x_max: int, y_max: int | None = None) -> WedgeLattice:
    """Construct the truncated wedge; y_max defaults to x_max."""
    return WedgeLattice(h, x_max, y_max)


# ---------------------------------------------------------------------------
# Coarse block grids


class BlockGrid:
    """Overlapping renormalization blocks over a box host.

    Block x (a coarse coordinate) is the fine box of radius 3N/4 centred at
    N*x.  Only blocks entirely inside the host window are kept, which makes
    the kept coarse coordinates exactly the box [-K, K]^d with
    K = floor((n - 3N/4)/N); coarse_l1 / coarse_linf expose that box as a
    lattice so every vertex-set operation works on coarse sets unchanged.
    """

    def __init__(self, host: BoxLattice, N: int):
        # N/5 and 3N/4 both appear as exact integer thresholds downstream.
        if N < 20 or N % 20:
            raise ValueError("block scale N must be a multiple of 20")
        self.host = host
        self.N = int(N)
        self.radius = 3 * self.N // 4
        K = (host.n - self.radius) // self.N
        self.K = max(K, -1)
        self.is_empty = self.K < 0

    @cached_property
    def coarse_l1(self) -> BoxLattice:
        return BoxLattice(self.host.d, max(self.K, 0), L1) if not self.is_empty else None

    @cached_property
    def coarse_linf(self) -> BoxLattice:
        return BoxLattice(self.host.d, max(self.K, 0), LINF) if not self.is_empty else None

    @property
    def num_blocks(self) -> int:
        return 0 if self.is_empty else (2 * self.K + 1) ** self.host.d

    def centers(self) -> np.ndarray:
        """Fine coordinates of the block centres, ordered by coarse vertex id."""
        if self.is_empty:
            return np.empty((0, self.host.d), dtype=np.int64)
        return self.coarse_l1.coords.astype(np.int64) * self.N

    def block_bounds(self, coarse_coord) -> tuple[np.ndarray, np.ndarray]:
        c = np.asarray(coarse_coord, dtype=np.int64) * self.N
        return c - self.radius, c + self.radius

    def fine_ids_of_block(self, coarse_coord) -> np.ndarray:
        """Host vertex ids inside one block, as a flat array."""
        lo, hi = self.block_bounds(coarse_coord)
        axes = [np.arange(a, b + 1, dtype=np.int64) for a, b in zip(lo, hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        return self.host.vertex_ids(pts)

    def blocks_containing(self, fine_coords: np.ndarray) -> list[np.ndarray]:
        """For each fine point, the coarse coords of the grid blocks holding it.

        Every interior point sits in at least one and at most 2^d blocks.
        """
        fine_coords = np.atleast_2d(np.asarray(fine_coords, dtype=np.int64))
        out = []
        for p in fine_coords:
            lo = np.ceil((p - self.radius) / self.N).astype(np.int64)
            hi = np.floor((p + self.radius) / self.N).astype(np.int64)
            lo = np.maximum(lo, -self.K)
            hi = np.minimum(hi, self.K)
            if (lo > hi).any():
                out.append(np.empty((0, self.host.d), dtype=np.int64))
                continue
            axes = [np.arange(a, b + 1, dtype=np.int64) for a, b in zip(lo, hi)]
            mesh = np.meshgrid(*axes, indexing="ij")
            out.append(np.stack([m.ravel() for m in mesh], axis=1))
        return out

    def nearest_block(self, fine_coord) -> np.ndarray:
        """Coarse coord of the block whose centre is nearest (ties go down)."""
        p = np.asarray(fine_coord, dtype=np.float64)
        cc = np.floor(p / self.N + 0.5).astype(np.int64)
        return np.clip(cc, -self.K, self.K)

    def __repr__(self):
        return f"BlockGrid(N={self.N}, K={self.K}, blocks={self.num_blocks})"


def blocks_of(host: BoxLattice, N: int) -> BlockGrid:
    """Grid of radius-3N/4 blocks centred on N Z^d, kept only if fully inside."""
    return BlockGrid(host, N)


# ---------------------------------------------------------------------------
# Descriptor round-trip


def lattice_from_descriptor(desc: dict):
    kind = desc.get("kind")
    if kind == "box":
        return build_box(desc["d"], desc["n"], desc.get("adjacency", L1))
    if kind == "wedge":
        return build_wedge(
            HeightFunction.from_descriptor(desc["h"]), desc["x_max"], desc.get("y_max")
        )
    raise ValueError(f"unknown lattice kind {kind!r}")


def descriptor_json(lattice) -> str:
    return json.dumps(lattice.descriptor(), sort_keys=True)


def lattice_from_json(text: str):
    return lattice_from_descriptor(json.loads(text))
