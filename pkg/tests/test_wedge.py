"""Wedge sets: entropy reports, profile scale, series tests, resistance,
and the minimal-cutset census."""
import math

import numpy as np
import pytest
from scipy.special import zeta as hurwitz_zeta

from percolab import oracles, wedge
from percolab.lattice import (
    HeightFunction,
    WedgeLattice,
    build_box,
    constant_height,
    log_height,
    power_height,
)
from percolab.walk import ArrayGraph

from helpers import connected_set

AXIS_STEPS = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]


def log_wedge(r=1.0, x_max=6, y_max=3):
    return WedgeLattice(log_height(r), x_max=x_max, y_max=y_max)


# ---------------------------------------------------------------------------
# Brute recomputation of a report, straight from the definitions

def brute_boundary(wedgeL, coords):
    """Edges from S to its complement in the unbounded wedge, via in_wedge."""
    S = {tuple(int(v) for v in c) for c in coords}
    w = 0
    for (x, y, z) in S:
        for dx, dy, dz in AXIS_STEPS:
            nb = (x + dx, y + dy, z + dz)
            if nb not in S and wedgeL.in_wedge(nb):
                w += 1
    return w


def brute_projection_counts(coords):
    cols = {}
    for (x, y, z) in map(tuple, coords):
        cols.setdefault((x, y), set()).add(z)
    yz = {tuple(c[1:]) for c in coords}
    xz = {(c[0], c[2]) for c in coords}
    return cols, yz, xz


def test_singleton_report():
    w = log_wedge()
    rep = wedge.entropy_report(w, np.array([w.origin]))
    assert rep.v == 1 and rep.H_xyz == 0.0
    # origin neighbours inside the wedge: +x, both y, both z (h(0) = 1)
    assert rep.w == 5
    assert rep.w_x == rep.w_y == rep.w_z == 1
    assert rep.k == 0.5
    assert rep.v_full == 0 and rep.v_miss == 1
    assert rep.nu == 0.0 and rep.rho == 0.5 and rep.h_miss == 1.0
    assert math.isnan(rep.k_full)
    assert rep.zeta_sizes.tolist() == [1] and rep.zeta_probs.tolist() == [1.0]


def test_product_box_independence():
    # S = {0,1,2} x {0,1} x {-1,0,1}: the three coordinates of a uniform
    # point are independent, so the pair inequality is an exact equality.
    w = WedgeLattice(constant_height(3), x_max=4, y_max=2)
    ids = np.array(
        [w.vertex_id((x, y, z)) for x in range(3) for y in range(2)
         for z in (-1, 0, 1)]
    )
    rep = wedge.entropy_report(w, ids)
    assert rep.v == 18 and rep.w_z == 6 and rep.v_full == 0
    assert abs((rep.H_yz + rep.H_xz) - (rep.H_xyz + rep.H_z)) <= 1e-12
    zz = math.prod(int(c) ** int(c) for c in rep.z_counts)
    yz = math.prod(int(c) ** int(c) for c in rep.yz_counts)
    xz = math.prod(int(c) ** int(c) for c in rep.xz_counts)
    assert zz == yz * xz == 6**18
    assert all(wedge.check_entropy_invariants(rep, exact=True).values())
    assert abs(wedge.conditioning_defect(rep)) <= 1e-12


def test_report_matches_brute():
    rng = np.random.default_rng(12)
    hosts = [log_wedge(1.0, 6, 3), WedgeLattice(power_height(0.5), 8, 4)]
    for host in hosts:
        for size in (1, 3, 8, 20, 40):
            for _ in range(4):
                ids = connected_set(host, rng, size)
                coords = host.coords[ids]
                rep = wedge.entropy_report(host, ids)

                assert rep.w == brute_boundary(host, coords)
                cols, yz, xz = brute_projection_counts(coords)
                assert rep.w_x == len(yz) and rep.w_y == len(xz)
                full = {
                    c: zs for c, zs in cols.items()
                    if len(zs) == 2 * host.heights[c[0]] + 1
                }
                assert rep.w_z == len(cols) - len(full)
                assert rep.v_full == sum(len(zs) for zs in full.values())
                for field, axes in (("H_xy", (0, 1)), ("H_xz", (0, 2)),
                                    ("H_yz", (1, 2)), ("H_z", (2,)),
                                    ("H_xyz", (0, 1, 2))):
                    want = oracles.entropy_by_definition(coords, axes)
                    assert abs(getattr(rep, field) - want) <= 1e-12
                # column-size distribution is size-biased over points
                sizes = np.array([len(zs) for zs in cols.values()])
                for s, p in zip(rep.zeta_sizes, rep.zeta_probs):
                    assert p == sizes[sizes == s].sum() / rep.v
                if rep.v_full:
                    full_pts = [
                        c for c in map(tuple, coords) if (c[0], c[1]) in full
                    ]
                    assert rep.k_full == len(full_pts) / len(
                        {(y, z) for _, y, z in full_pts}
                    )


def test_invariants_on_random_sets():
    rng = np.random.default_rng(99)
    hosts = [
        log_wedge(1.0, 8, 4),
        log_wedge(2.0, 8, 4),
        WedgeLattice(power_height(0.5), 10, 5),
        WedgeLattice(constant_height(2), 8, 4),
    ]
    for host in hosts:
        for _ in range(50):
            size = int(rng.integers(1, 61))
            rep = wedge.entropy_report(host, connected_set(host, rng, size))
            exact = wedge.check_entropy_invariants(rep, exact=True)
            assert all(exact.values()), exact
            floaty = wedge.check_entropy_invariants(rep, exact=False)
            assert all(floaty.values()), floaty
            assert wedge.conditioning_defect(rep) >= -1e-12


def test_invariants_float_path_above_cap():
    host = WedgeLattice(log_height(1.0), x_max=200, y_max=40)
    rng = np.random.default_rng(4)
    ids = connected_set(host, rng, wedge.EXACT_ENTROPY_CAP + 1)
    rep = wedge.entropy_report(host, ids)
    checks = wedge.check_entropy_invariants(rep)  # auto-selects floats
    assert all(checks.values()), checks


def test_report_rejects_empty():
    with pytest.raises(ValueError, match="empty"):
        wedge.entropy_report(log_wedge(), np.array([], dtype=np.int64))


# ---------------------------------------------------------------------------
# Column-size quantile check

def test_zeta_threshold_uses_analytic_height():
    # A flat plate of singleton columns: k = 25/30, and the analytic height
    # at delta*k stays below 1, so no column is small enough to count.  The
    # rounded height would snap to 1 and capture every column instead.
    w = log_wedge(1.0, x_max=4, y_max=2)
    ids = np.array(
        [w.vertex_id((x, y, 0)) for x in range(5) for y in range(-2, 3)]
    )
    rep = wedge.entropy_report(w, ids)
    assert rep.k == 25 / 30
    out = wedge.zeta_quantile_check(rep, w, delta=0.5, trials=200, seed=1)
    assert abs(out["threshold"] - math.log(29 / 12)) <= 1e-12
    assert out["threshold"] < 1.0
    assert out["exact"] == 0.0 and out["p_hat"] == 0.0
    assert out["passed"]
    # every column is a singleton, which is what the rounded value would see
    assert rep.zeta_cdf(1.0) == 1.0


def test_zeta_cdf_hand_case():
    w = log_wedge(1.0, x_max=2, y_max=1)
    ids = np.array([
        w.vertex_id((0, 0, 0)),
        w.vertex_id((1, 0, 0)),
        w.vertex_id((1, 0, 1)),
    ])
    rep = wedge.entropy_report(w, ids)
    assert rep.zeta_sizes.tolist() == [1, 2]
    assert np.allclose(rep.zeta_probs, [1 / 3, 2 / 3])
    assert rep.zeta_cdf(0.5) == 0.0
    assert abs(rep.zeta_cdf(1.0) - 1 / 3) <= 1e-15
    assert abs(rep.zeta_cdf(1.9) - 1 / 3) <= 1e-15
    assert rep.zeta_cdf(2.0) == 1.0


# ---------------------------------------------------------------------------
# Profile scale

def test_psi_power_family():
    h = power_height(0.5)
    # h(sqrt(256)) = 4, h(sqrt(256 / 4)) = floor(sqrt(8)) = 2
    assert wedge.f_of_v(h, 256) == 2.0
    assert wedge.psi(h, 256) == math.sqrt(512.0)
    with pytest.raises(ValueError, match="positive"):
        wedge.f_of_v(constant_height(0), 4.0)


def test_psi_profile_records():
    host = WedgeLattice(power_height(0.5), 10, 5)
    rng = np.random.default_rng(3)
    reps = [
        wedge.entropy_report(host, connected_set(host, rng, s))
        for s in (5, 20, 45)
    ]
    recs = wedge.psi_profile_check(host, reps)
    for rec, rep in zip(recs, reps):
        assert rec.w_ge_v_over_k
        assert rec.w >= rep.v / rep.k - 1e-9
        assert rec.ratio_psi == rep.w / wedge.psi(host.h, rep.v)
        assert rec.ratio_hk > 0


# ---------------------------------------------------------------------------
# Series with an integral-test bracket

def test_lyons_constant_diverges():
    res = wedge.lyons_sum(constant_height(2), 100)
    assert res.verdict == "diverges"
    assert math.isinf(res.tail_lo) and math.isinf(res.tail_hi)
    harmonic = sum(1.0 / j for j in range(1, 101))
    assert abs(res.partial_sum - harmonic / 2) <= 1e-12


def test_lyons_power_bracket_contains_true_tail():
    res = wedge.lyons_sum(power_height(0.5, rounding="none"), 50)
    assert res.verdict == "converges"
    true_tail = float(hurwitz_zeta(1.5, 51))
    assert res.tail_lo <= true_tail <= res.tail_hi
    # the partial sum is the zeta difference, term by term
    assert abs(res.partial_sum - (hurwitz_zeta(1.5, 1) - true_tail)) <= 1e-12
    assert abs(res.tail_lo - 2 / math.sqrt(51)) <= 1e-15
    assert abs(res.tail_hi - 2 / math.sqrt(50)) <= 1e-15


def test_lyons_log_tails_hand_check():
    res = wedge.lyons_sum(log_height(2.0, rounding="none"), 50)
    assert res.verdict == "converges"
    assert abs(res.tail_hi - 1 / math.log(50)) <= 1e-15
    assert abs(res.tail_lo - 1 / (math.log(51) + math.log1p(2 / 51))) <= 1e-15
    assert 0 < res.tail_lo < res.tail_hi


def test_lyons_verdicts_across_exponents():
    assert wedge.lyons_sum(log_height(1.0), 30).verdict == "diverges"
    assert wedge.lyons_sum(log_height(1.01), 30).verdict == "converges"
    assert wedge.lyons_sum(power_height(1.0), 30).verdict == "converges"


def test_lyons_validation():
    with pytest.raises(ValueError, match="positive"):
        wedge.lyons_sum(constant_height(0), 10)
    table = HeightFunction("table", values=[1, 1, 2, 2, 3, 3, 4, 4, 5, 5, 6])
    with pytest.raises(ValueError, match="family"):
        wedge.lyons_sum(table, 10)


# ---------------------------------------------------------------------------
# Effective resistance

def path_graph(k):
    return ArrayGraph(k, [(i, i + 1) for i in range(k - 1)])


def random_connected_graph(rng, n):
    """Random spanning tree plus a few extra edges."""
    edges = [(int(rng.integers(i)), i) for i in range(1, n)]
    extra = rng.integers(0, n, size=(n // 2, 2))
    edges += [(int(u), int(v)) for u, v in extra if u != v]
    return ArrayGraph(n, list({tuple(sorted(e)) for e in edges}))


def test_resistance_closed_forms():
    r = wedge.effective_resistance(path_graph(5), [0], [4])
    assert abs(r.r_eff - 4.0) <= 1e-8 and r.solver == "cg"
    ring = ArrayGraph(8, [(i, (i + 1) % 8) for i in range(8)])
    r = wedge.effective_resistance(ring, [0], [1])
    assert abs(r.r_eff - 7 / 8) <= 1e-8
    k4 = ArrayGraph(4, [(i, j) for i in range(4) for j in range(i + 1, 4)])
    r = wedge.effective_resistance(k4, [0], [3])
    assert abs(r.r_eff - 0.5) <= 1e-8
    star = ArrayGraph(5, [(0, i) for i in range(1, 5)])
    r = wedge.effective_resistance(star, [0], [2])
    assert abs(r.r_eff - 1.0) <= 1e-8
    assert abs(r.current - 1.0) <= 1e-8
    assert r.residual <= 1e-8 and r.connected


def test_resistance_matches_dense():
    rng = np.random.default_rng(17)
    for _ in range(30):
        g = random_connected_graph(rng, 10)
        picks = rng.permutation(10)
        A, B = picks[:2].tolist(), picks[2:4].tolist()
        want = oracles.dense_resistance(g.num_vertices, g.edges, A, B)
        got = wedge.effective_resistance(g, A, B)
        assert abs(got.r_eff - want) <= 1e-6


def test_resistance_rayleigh_monotone():
    rng = np.random.default_rng(23)
    for _ in range(50):
        g = random_connected_graph(rng, 12)
        before = wedge.effective_resistance(g, [0], [11]).r_eff
        have = {tuple(sorted(map(int, e))) for e in g.edges}
        while True:
            u, v = sorted(rng.integers(0, 12, size=2).tolist())
            if u != v and (u, v) not in have:
                break
        g2 = ArrayGraph(12, list(have) + [(u, v)])
        after = wedge.effective_resistance(g2, [0], [11]).r_eff
        assert after <= before + 1e-9


def test_resistance_validation():
    g = path_graph(4)
    with pytest.raises(ValueError, match="empty terminal"):
        wedge.effective_resistance(g, [], [1])
    with pytest.raises(ValueError, match="overlap"):
        wedge.effective_resistance(g, [0, 1], [1])
    split = ArrayGraph(4, [(0, 1), (2, 3)])
    res = wedge.effective_resistance(split, [0], [3])
    assert math.isinf(res.r_eff) and not res.connected
    assert res.solver == "disconnected"


def test_wedge_shell_resistance():
    h = log_height(1.0)
    shells = wedge.wedge_shell_resistance(h, [3, 6], y_max=4)
    assert sorted(shells) == [3, 6]
    assert 0 < shells[3].r_eff < shells[6].r_eff
    for res in shells.values():
        assert res.connected and res.residual <= 1e-8
    # grounding the x = R plane makes the larger truncation give the same
    # answer, so the per-R slices are exact
    big = WedgeLattice(h, x_max=6, y_max=4)
    B = np.flatnonzero(big.coords[:, 0] == 3)
    alt = wedge.effective_resistance(big, np.array([big.origin]), B)
    assert abs(alt.r_eff - shells[3].r_eff) <= 1e-8


# ---------------------------------------------------------------------------
# Minimal-cutset census

def test_census_square_lattice_frozen():
    # by hand: the singleton (cut 4), the four dominoes through the origin
    # (cut 6), and at cut 8 the eighteen anchored trominoes plus the four
    # anchored 2x2 squares, 22 in all
    host = build_box(2, 5)
    census = wedge.cutset_census(host, host.origin, 8)
    assert census.q == {4: 1, 6: 4, 8: 22}
    assert census.complete and census.size_cap == 4
    assert abs(census.kappa - 22 ** 0.125) <= 1e-12
    assert abs(census.peierls_upper - (1 - 22 ** -0.125)) <= 1e-12
    want = oracles.census_oracle(host, host.origin, 8, census.size_cap)
    assert census.q == want


def test_census_caps():
    host = build_box(2, 5)
    with pytest.raises(ValueError, match="capped"):
        wedge.cutset_census(host, host.origin, 16)
    w = log_wedge(1.0, x_max=3, y_max=2)
    with pytest.raises(ValueError, match="size_cap"):
        wedge.cutset_census(w, w.origin, 6)
    partial = wedge.cutset_census(w, w.origin, 6, size_cap=2)
    assert partial.q == {5: 1}
    assert not partial.complete
