"""Wedge analysis: entropy projection reports, the psi profile, Lyons-type
series, effective resistance, and the minimal-cutset census.

The entropy inequalities hold for every finite set, so they are
checked exactly: each one is rearranged into a product comparison between
big integers (c^c factors), with a float fallback above the exact cap.
Transience vs recurrence is probed as a dichotomy of resistance increments
on growing truncations rather than as a limit statement.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import cg as sparse_cg

from .lattice import HeightFunction, WedgeLattice

EXACT_ENTROPY_CAP = 10_000
FLOAT_SLACK = 1e-9


# ---------------------------------------------------------------------------
# Entropy reports

def _counts(keys: np.ndarray) -> np.ndarray:
    """Multiplicities of the rows of `keys`."""
    _, counts = np.unique(keys, axis=0, return_counts=True)
    return counts


def _entropy(counts: np.ndarray, v: int) -> float:
    p = counts / v
    return float(-(p * np.log(p)).sum())


@dataclass
class EntropyReport:
    v: int
    w: int                      # wedge-boundary edge count of S
    w_x: int                    # distinct (y, z) values
    w_y: int                    # distinct (x, z) values
    w_z: int                    # nonempty, non-full columns
    H_xyz: float
    H_xy: float
    H_xz: float
    H_yz: float
    H_z: float
    k: float                    # v / (w_x + w_z)
    v_full: int
    v_miss: int
    nu: float                   # v_full / v
    rho: float                  # w_x / (w_x + w_z)
    h_miss: float               # v_miss / w_z (nan when w_z = 0)
    k_full: float               # |S_full| / |P_x(S_full)| (nan when empty)
    zeta_sizes: np.ndarray      # distinct column sizes
    zeta_probs: np.ndarray      # P(zeta = size), size-biased over points
    column_counts: np.ndarray = field(repr=False)   # per-column sizes
    z_counts: np.ndarray = field(repr=False)
    yz_counts: np.ndarray = field(repr=False)
    xz_counts: np.ndarray = field(repr=False)

    def zeta_cdf(self, t: float) -> float:
        """P(zeta <= t) for a uniform point of S."""
        return float(self.zeta_probs[self.zeta_sizes <= t].sum())


def wedge_boundary_count(wedge: WedgeLattice, coords: np.ndarray) -> int:
    """Edges from S to (infinite wedge) minus S.

    The wedge extends without bound in +x and y; only the z walls and x=0
    are genuine. Heights beyond those stored never matter: +x neighbours are
    always inside by monotonicity.
    """
    S = {tuple(c) for c in coords}
    h = wedge.heights
    w = 0
    for (x, y, z) in coords:
        if (x + 1, y, z) not in S:
            w += 1
        if x >= 1 and abs(z) <= h[x - 1] and (x - 1, y, z) not in S:
            w += 1
        for dy in (-1, 1):
            if (x, y + dy, z) not in S:
                w += 1
        for dz in (-1, 1):
            if abs(z + dz) <= h[x] and (x, y, z + dz) not in S:
                w += 1
    return w


def entropy_report(wedge: WedgeLattice, S_ids: np.ndarray) -> EntropyReport:
    """Projection/entropy summary for the point set S in the wedge."""
    ids = np.asarray(S_ids, dtype=np.int64)
    if len(ids) == 0:
        raise ValueError("empty set")
    coords = wedge.coords[ids]
    v = len(coords)
    x, y, z = coords[:, 0], coords[:, 1], coords[:, 2]
    h = wedge.heights

    cols, col_inv, col_sizes = np.unique(
        coords[:, :2], axis=0, return_inverse=True, return_counts=True
    )
    full_size = 2 * h[cols[:, 0]] + 1
    is_full = col_sizes == full_size
    w_z = int((~is_full).sum())
    v_full = int(col_sizes[is_full].sum())

    yz_counts = _counts(coords[:, 1:])
    xz_counts = _counts(coords[:, [0, 2]])
    z_counts = _counts(coords[:, 2:])
    w_x = len(yz_counts)
    w_y = len(xz_counts)

    full_pts = is_full[col_inv]
    if v_full:
        k_full = v_full / len(np.unique(coords[full_pts][:, 1:], axis=0))
    else:
        k_full = math.nan

    zeta_sizes, zeta_counts = np.unique(col_sizes, return_counts=True)
    zeta_mass = np.array(
        [col_sizes[col_sizes == s].sum() for s in zeta_sizes], dtype=np.int64
    )

    return EntropyReport(
        v=v,
        w=wedge_boundary_count(wedge, coords),
        w_x=w_x,
        w_y=w_y,
        w_z=w_z,
        H_xyz=math.log(v),
        H_xy=_entropy(col_sizes, v),
        H_xz=_entropy(xz_counts, v),
        H_yz=_entropy(yz_counts, v),
        H_z=_entropy(z_counts, v),
        k=v / (w_x + w_z),
        v_full=v_full,
        v_miss=v - v_full,
        nu=v_full / v,
        rho=w_x / (w_x + w_z),
        h_miss=(v - v_full) / w_z if w_z else math.nan,
        k_full=k_full,
        zeta_sizes=zeta_sizes,
        zeta_probs=zeta_mass / v,
        column_counts=col_sizes,
        z_counts=z_counts,
        yz_counts=yz_counts,
        xz_counts=xz_counts,
    )


def _cc_product(counts: np.ndarray) -> int:
    out = 1
    for c in counts:
        out *= pow(int(c), int(c))
    return out


def check_entropy_invariants(rep: EntropyReport, exact: bool | None = None) -> dict:
    """The five report invariants; True means the inequality holds.

    Each inequality between entropies is an inequality between products of
    c^c terms, decided in integer arithmetic when v is within the exact cap
    (the default), else in floats with a small one-sided slack.
    """
    if exact is None:
        exact = rep.v <= EXACT_ENTROPY_CAP
    v = rep.v
    out = {}
    out["identity_Hxyz"] = abs(rep.H_xyz - math.log(v)) <= FLOAT_SLACK
    out["boundary_decomposition"] = rep.w >= rep.w_x + 2 * rep.w_y + rep.w_z
    if exact:
        vv = pow(v, v)
        yz = _cc_product(rep.yz_counts)
        xz = _cc_product(rep.xz_counts)
        zz = _cc_product(rep.z_counts)
        out["Hyz_le_log_wx"] = pow(rep.w_x, v) * yz >= vv
        out["Hxz_le_log_wy"] = pow(rep.w_y, v) * xz >= vv
        out["wxwy_ge_v_expHz"] = pow(rep.w_x * rep.w_y, v) * zz >= vv * vv
        out["han_pair"] = zz >= yz * xz
    else:
        out["Hyz_le_log_wx"] = rep.H_yz <= math.log(rep.w_x) + FLOAT_SLACK
        out["Hxz_le_log_wy"] = rep.H_xz <= math.log(rep.w_y) + FLOAT_SLACK
        out["wxwy_ge_v_expHz"] = (
            math.log(rep.w_x) + math.log(rep.w_y)
            >= math.log(v) + rep.H_z - FLOAT_SLACK
        )
        out["han_pair"] = rep.H_yz + rep.H_xz >= rep.H_xyz + rep.H_z - FLOAT_SLACK
    return out


def conditioning_defect(rep: EntropyReport) -> float:
    """H(Z) - H(Z | X,Y); nonnegative since conditioning reduces entropy."""
    return rep.H_z - (rep.H_xyz - rep.H_xy)


def zeta_quantile_check(rep: EntropyReport, wedge: WedgeLattice, delta: float,
                        trials: int = 200, seed: int = 0) -> dict:
    """Concentration of the column-size variable: is P(zeta <= h(delta*k))
    statistically compatible with <= delta?

    Passes when the lower Wilson bound of the sampled fraction does not
    exceed delta.  The exact fraction rides along for diagnostics.

    The threshold uses the analytic height value: the integer-rounded height
    jumps to 1 below argument 1, which would compare singleton-column mass
    against delta and break the inequality for thin sets.
    """
    from .stats import wilson_interval

    t = wedge.h.analytic(delta * rep.k)
    exact_q = rep.zeta_cdf(t)
    rng = np.random.default_rng(seed)
    draws = rng.choice(rep.zeta_sizes, size=trials, p=rep.zeta_probs)
    hits = int((draws <= t).sum())
    lo, hi = wilson_interval(hits, trials)
    return {
        "threshold": t,
        "delta": delta,
        "exact": exact_q,
        "p_hat": hits / trials,
        "wilson": (lo, hi),
        "passed": lo <= delta,
    }


# ---------------------------------------------------------------------------
# psi profile

def f_of_v(h: HeightFunction, v: float) -> float:
    """f(v) = h(sqrt(v / h(sqrt(v)))), the corrected profile scale."""
    inner = float(h(math.sqrt(v)))
    if inner <= 0:
        raise ValueError("h(sqrt(v)) must be positive for the profile scale")
    return float(h(math.sqrt(v / inner)))


def psi(h: HeightFunction, v: float) -> float:
    return math.sqrt(v * f_of_v(h, v))


@dataclass
class PsiRecord:
    v: int
    w: int
    k: float
    w_ge_v_over_k: bool
    ratio_hk: float    # w / sqrt(h(k) v)
    ratio_psi: float   # w / sqrt(v f(v))


def psi_profile_check(wedge: WedgeLattice, reports: list[EntropyReport]) -> list[PsiRecord]:
    """Per-set profile record; w >= v/k is exact (it is w >= w_x + w_z)."""
    h = wedge.h
    out = []
    for rep in reports:
        hk = float(h(rep.k))
        out.append(
            PsiRecord(
                v=rep.v,
                w=rep.w,
                k=rep.k,
                w_ge_v_over_k=rep.w >= rep.w_x + rep.w_z,
                ratio_hk=rep.w / math.sqrt(hk * rep.v) if hk > 0 else math.inf,
                ratio_psi=rep.w / psi(h, rep.v),
            )
        )
    return out


# ---------------------------------------------------------------------------
# Lyons-type series

@dataclass
class LyonsResult:
    partial_sum: float
    J: int
    tail_lo: float
    tail_hi: float
    verdict: str  # "converges" or "diverges"


def lyons_sum(h: HeightFunction, J: int) -> LyonsResult:
    """Partial sum of 1/(j h(j)) for j = 1..J with an integral-test bracket.

    The verdict comes from the family's closed form (constant: diverges;
    power: converges; log with exponent r: converges iff r > 1); the bracket
    numbers use the unrounded family on the convergent side.
    """
    js = np.arange(1, J + 1)
    hv = np.asarray(h(js), dtype=float)
    if np.any(hv <= 0):
        raise ValueError("h must be positive on [1..J]")
    partial = float((1.0 / (js * hv)).sum())

    fam = h.family
    if fam == "constant":
        verdict, tail_lo, tail_hi = "diverges", math.inf, math.inf
    elif fam == "power":
        verdict = "converges"
        a = h.alpha
        tail_lo = 1.0 / (a * (J + 1) ** a)
        tail_hi = 1.0 / (a * J**a)
    elif fam == "log":
        if h.r > 1:
            # Sandwich log(x+s) between log x and log x + log(1+s/x0) on
            # [x0, inf); both sides integrate in closed form via u = log x.
            verdict = "converges"
            r, s = h.r, h.shift
            c = math.log1p(s / (J + 1))
            tail_lo = (math.log(J + 1) + c) ** (1.0 - r) / (r - 1.0)
            tail_hi = math.log(J) ** (1.0 - r) / (r - 1.0)
        else:
            verdict, tail_lo, tail_hi = "diverges", math.inf, math.inf
    else:
        raise ValueError(f"no closed-form verdict for family {fam!r}")
    return LyonsResult(partial, J, float(tail_lo), float(tail_hi), verdict)


# ---------------------------------------------------------------------------
# Effective resistance

@dataclass
class ResistanceResult:
    r_eff: float
    current: float
    residual: float
    solver: str
    connected: bool = True


def effective_resistance(graph, A_ids, B_ids, tol: float = 1e-8) -> ResistanceResult:
    """R_eff between vertex sets A and B (unit conductance per edge).

    Dirichlet problem with potential 1 on A and 0 on B, solved by conjugate
    gradients (algebraic-multigrid preconditioned when large); the reported
    residual is the relative one recomputed from the returned potential, so
    it certifies the solve independent of the solver's own stopping rule.
    """
    n = graph.num_vertices
    A = np.unique(np.asarray(A_ids, dtype=np.int64))
    B = np.unique(np.asarray(B_ids, dtype=np.int64))
    if len(A) == 0 or len(B) == 0:
        raise ValueError("empty terminal set")
    if np.intersect1d(A, B).size:
        raise ValueError("terminals overlap")

    e = np.asarray(graph.edges, dtype=np.int64)
    adj = sp.coo_matrix(
        (np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n)
    )
    adj = (adj + adj.T).tocsr()
    ncomp, comp = connected_components(adj, directed=False)
    if len(np.unique(comp[A])) > 1 or not np.isin(comp[B], comp[A]).any():
        return ResistanceResult(math.inf, 0.0, 0.0, "disconnected", connected=False)

    deg = np.asarray(adj.sum(axis=1)).ravel()
    lap = sp.diags(deg) - adj
    fixed = np.zeros(n, dtype=bool)
    fixed[A] = True
    fixed[B] = True
    free = ~fixed
    u = np.zeros(n)
    u[A] = 1.0

    nfree = int(free.sum())
    if nfree:
        lff = lap[free][:, free].tocsr()
        b = -(lap[free][:, fixed] @ u[fixed])
        if nfree >= 5000:
            import pyamg

            ml = pyamg.smoothed_aggregation_solver(lff.tocsr())
            x = ml.solve(b, tol=tol * 1e-2, accel="cg", maxiter=400)
            solver = "pyamg+cg"
        else:
            x, info = sparse_cg(lff, b, rtol=tol * 1e-2, maxiter=20_000)
            if info != 0:
                raise RuntimeError(f"cg failed to converge (info={info})")
            solver = "cg"
        u[free] = x
        residual = float(
            np.linalg.norm(lff @ x - b) / max(np.linalg.norm(b), 1e-300)
        )
        if residual > tol:
            raise RuntimeError(f"residual {residual:.2e} above tolerance {tol:.1e}")
    else:
        residual = 0.0
        solver = "trivial"

    # Net current out of A = sum over edges (a, x) of u(a) - u(x).
    a_mask = np.zeros(n, dtype=bool)
    a_mask[A] = True
    ea = e[a_mask[e[:, 0]] ^ a_mask[e[:, 1]]]
    src = np.where(a_mask[ea[:, 0]], ea[:, 0], ea[:, 1])
    dst = np.where(a_mask[ea[:, 0]], ea[:, 1], ea[:, 0])
    current = float((u[src] - u[dst]).sum())
    return ResistanceResult(1.0 / current, current, residual, solver)


def wedge_shell_resistance(h: HeightFunction, radii: list[int],
                           y_max: int, tol: float = 1e-8) -> dict:
    """R_eff from the origin to the plane x = R for each R, sharing one
    truncation.

    Grounding the whole plane makes everything beyond it dead, so solving on
    the x <= R slice is exact for the larger truncation too; the y walls are
    the one genuine truncation and are fixed across the comparison.
    """
    out = {}
    for R in sorted(radii):
        w = WedgeLattice(h, x_max=R, y_max=y_max)
        coords = w.coords
        A = np.array([w.origin], dtype=np.int64)
        B = np.flatnonzero(coords[:, 0] == R)
        res = effective_resistance(w, A, B, tol=tol)
        out[R] = res
        del w, coords
    return out


# ---------------------------------------------------------------------------
# Minimal-cutset census

@dataclass
class CutsetCensus:
    q: dict                 # n -> count of minimal cutsets of size n
    n_max: int
    size_cap: int
    complete: bool          # True when the cap provably exhausts n <= n_max
    kappa: float
    peierls_upper: float    # 1 - 1/kappa


def _lw_size_cap(d: int, n_max: int) -> int:
    # |edge boundary| >= 2d |S|^((d-1)/d) in a box, so |S| is bounded.
    return int((n_max / (2 * d)) ** (d / (d - 1)))


def cutset_census(graph, origin: int, n_max: int,
                  size_cap: int | None = None) -> CutsetCensus:
    """Count minimal edge cutsets separating `origin` from the window rim.

    Every minimal cutset is the edge boundary of a closed connected anchored
    set avoiding the rim, and conversely, so the census enumerates anchored
    sets, keeps the closed ones, and then re-verifies minimality edge by
    edge.  `size_cap` bounds the enumerated set size; on box hosts the
    Loomis-Whitney bound supplies one that provably exhausts size-n_max
    cutsets; other hosts must pass it explicitly, making the census complete
    only within the explored size range.
    """
    from . import clustergeom as cg
    from .isoperimetry import enumerate_anchored_sets

    if n_max > 14:
        raise ValueError("census capped at n_max = 14")
    complete = False
    if size_cap is None:
        d = getattr(graph, "d", None)
        if d is None or not hasattr(graph, "n"):
            raise ValueError("size_cap required for non-box hosts")
        size_cap = _lw_size_cap(d, n_max)
        complete = True

    view = cg.GraphView.whole(graph)
    bnd = graph.boundary_mask
    cuts: dict[int, set] = {}
    for S in enumerate_anchored_sets(graph, origin, size_cap):
        if bnd[S].any():
            continue
        closed = cg.closure(S, view)
        if closed.size != len(S):
            continue
        eids = cg.edge_boundary(closed.mask, view)
        nn = len(eids)
        if nn > n_max:
            continue
        if not _is_minimal_cutset(graph, origin, eids):
            continue
        cuts.setdefault(nn, set()).add(tuple(int(i) for i in sorted(eids)))

    q = {nn: len(s) for nn, s in sorted(cuts.items())}
    kappa = max((cnt ** (1.0 / nn) for nn, cnt in q.items()), default=0.0)
    return CutsetCensus(
        q=q,
        n_max=n_max,
        size_cap=size_cap,
        complete=complete,
        kappa=kappa,
        peierls_upper=1.0 - 1.0 / kappa if kappa > 0 else math.nan,
    )


def _separated(graph, origin: int, removed: np.ndarray) -> bool:
    """Does removing these edges cut `origin` from the window rim?"""
    keep = np.ones(graph.num_edges, dtype=bool)
    keep[removed] = False
    e = graph.edges[keep]
    m = sp.coo_matrix(
        (np.ones(len(e), np.int8), (e[:, 0], e[:, 1])),
        shape=(graph.num_vertices,) * 2,
    )
    _, lab = connected_components(m, directed=False)
    return not np.any(lab[graph.boundary_mask] == lab[origin])


def _is_minimal_cutset(graph, origin: int, eids: np.ndarray) -> bool:
    if not _separated(graph, origin, eids):
        return False
    for i in range(len(eids)):
        if _separated(graph, origin, np.delete(eids, i)):
            return False
    return True
