"""Lazy-walk machinery: kernels, return probabilities, gap, mixing."""
import numpy as np
import pytest

from percolab import oracles, percolation, walk
from percolab.lattice import build_box
from percolab.walk import ArrayGraph, WalkOperator


def ring(L):
    return ArrayGraph(L, [(i, (i + 1) % L) for i in range(L)])


def path(k):
    return ArrayGraph(k, [(i, i + 1) for i in range(k - 1)])


def complete(k):
    return ArrayGraph(k, [(i, j) for i in range(k) for j in range(i + 1, k)])


def star(k):
    return ArrayGraph(k, [(0, i) for i in range(1, k)])


def origin_cluster_graph(n=10, p=0.6, seed=5):
    host = build_box(2, n)
    config = percolation.sample(host, p, seed)
    lab = percolation.label(config)
    giant = percolation.giant_proxy(lab, allow_fallback=True)
    return percolation.cluster_subgraph(config, lab, giant.cluster)


# ---------------------------------------------------------------------------
# Operator basics

def test_operator_rejects_bad_beta():
    g = path(3)
    for beta in (-0.1, 1.0, 1.5):
        with pytest.raises(ValueError):
            WalkOperator(g, beta=beta)


def test_operator_holds_isolated_vertices():
    g = ArrayGraph(3, [(0, 1)])
    op = WalkOperator(g, beta=0.5)
    mu = np.array([0.0, 0.0, 1.0])
    assert np.array_equal(op.step(mu), mu)


def test_operator_connectivity_check():
    g = ArrayGraph(4, [(0, 1), (2, 3)])
    with pytest.raises(ValueError, match="2 components"):
        WalkOperator(g, check_connected=True)
    WalkOperator(g)  # without the flag the operator is fine


def test_stationary_distribution():
    op = WalkOperator(complete(4))
    assert np.allclose(op.pi, 0.25)
    op = WalkOperator(star(5))
    # hub degree 4, leaves degree 1, total 8
    assert np.allclose(op.pi, [0.5, 0.125, 0.125, 0.125, 0.125])
    # pi is exactly stationary for the kernel
    assert np.allclose(op.step(op.pi), op.pi, atol=1e-15)


def test_detailed_balance():
    cases = [path(5), ring(8), complete(4), origin_cluster_graph(6, 0.7, 2)]
    for g in cases:
        for beta in (0.5, 0.3):
            assert walk.detailed_balance_defect(g, beta, 3) <= 1e-12
    with pytest.raises(ValueError, match="small"):
        walk.detailed_balance_defect(path(501), 0.5, 1)


# ---------------------------------------------------------------------------
# Exact return probabilities

def test_heat_kernel_matches_infinite_lattice():
    # A closed path of length n stays within distance n/2 of its start, so
    # on the full box with n = 24 the first 40 return probabilities are
    # exactly those of the unbounded lattice.
    host = build_box(2, 24)
    op = WalkOperator(host, beta=0.5)
    got = walk.heat_kernel_at_origin(op, host.origin, 40)
    want = oracles.lazy_return_z2(40, beta=0.5)
    assert np.allclose(got, want, rtol=0, atol=1e-12)
    assert np.all(np.diff(got) < 0)


def test_heat_kernel_on_cluster_is_monotone():
    g = origin_cluster_graph()
    op = WalkOperator(g, beta=0.5)
    seq = walk.heat_kernel_at_origin(op, 0, 200)
    assert seq[0] == 1.0
    assert np.all(np.diff(seq) <= 1e-12)
    # long-run limit is pi at the start vertex
    assert seq[-1] >= op.pi[0]


def test_heat_kernel_validates_origin():
    op = WalkOperator(path(4))
    for bad in (-1, 4):
        with pytest.raises(ValueError, match="origin"):
            walk.heat_kernel_at_origin(op, bad, 5)


def test_decay_exponent_recovers_power_law():
    ns = np.arange(0, 61, dtype=float)
    seq = np.empty(61)
    seq[0] = 1.0
    seq[1:] = 0.7 * ns[1:] ** -1.5
    fit = walk.decay_exponent(seq, 2, 50)
    assert abs(fit.slope - (-1.5)) <= 1e-12
    assert abs(fit.intercept - np.log(0.7)) <= 1e-12
    assert fit.stderr <= 1e-12
    assert fit.window == (2.0, 50.0)
    assert fit.n_points == 49


def test_decay_exponent_validates_window():
    seq = np.linspace(1.0, 0.1, 20)
    for lo, hi in ((0, 5), (5, 5), (7, 3), (2, 20)):
        with pytest.raises(ValueError, match="window"):
            walk.decay_exponent(seq, lo, hi)
    seq[10] = 0.0
    with pytest.raises(ValueError, match="nonpositive"):
        walk.decay_exponent(seq, 5, 15)


# ---------------------------------------------------------------------------
# Spectral gap

def test_cycle_gap_frozen():
    # closed form: (1 - beta)(1 - cos(2 pi / L))
    for L, frozen in ((8, 0.1464466094067262), (16, 0.03806023374435663)):
        sr = walk.relaxation_time(ring(L))
        assert abs(sr.gap - frozen) <= 1e-9
        assert abs(sr.gap - oracles.cycle_gap(L)) <= 1e-9
        assert abs(sr.relaxation_time - 1.0 / frozen) <= 1e-6
        assert sr.residual <= 1e-10


def test_lambda2_matches_dense():
    cases = [path(5), complete(4), star(6), ring(12), origin_cluster_graph()]
    for g in cases:
        sr = walk.relaxation_time(g)
        want = np.sort(oracles.dense_spectral(g))[-2]
        assert abs(sr.lambda2 - want) <= 1e-9
        assert abs(sr.gap - (1.0 - want)) <= 1e-9


def test_lambda2_closed_forms():
    # K4: normalized adjacency eigenvalues 1, -1/3 thrice; lazy kernel 1/3.
    assert abs(walk.relaxation_time(complete(4)).lambda2 - 1 / 3) <= 1e-9
    # star: eigenvalues 1, 0 (k-2 times), -1; lazy kernel second value 1/2.
    assert abs(walk.relaxation_time(star(6)).lambda2 - 0.5) <= 1e-9


def test_relaxation_singleton():
    sr = walk.relaxation_time(ArrayGraph(1, np.empty((0, 2), dtype=np.int64)))
    assert sr.lambda2 == 0.0 and sr.relaxation_time == 1.0


def test_relaxation_cap():
    k = walk.EXACT_CAP + 1
    with pytest.raises(ValueError, match="cap"):
        walk.relaxation_time(path(k))


def test_relaxation_requires_connected():
    with pytest.raises(ValueError, match="components"):
        walk.relaxation_time(ArrayGraph(4, [(0, 1), (2, 3)]))


# ---------------------------------------------------------------------------
# Mixing

def brute_mixing_time(g, beta, eps):
    op = WalkOperator(g, beta=beta)
    n = g.num_vertices
    kernel = op._pt.toarray().T  # rows are p_1(x, .)
    pn = np.eye(n)
    steps = 0
    while True:
        dev = np.max(np.abs(pn / op.pi[None, :] - 1.0))
        if dev <= eps:
            return steps
        pn = pn @ kernel
        steps += 1


def test_mixing_cycle_matches_dense_powers():
    g = ring(8)
    res = walk.linfty_mixing(g, eps=0.25)
    assert res.n_mix == brute_mixing_time(g, 0.5, 0.25)
    # vertex-transitive, so every start takes equally long
    assert set(res.start_times) == set(range(8))
    assert len(set(res.start_times.values())) == 1
    assert res.worst_identified
    assert res.eps == 0.25


def test_mixing_path_endpoints_are_worst():
    res = walk.linfty_mixing(path(5), eps=0.25)
    times = res.start_times
    assert set(times) == set(range(5))
    assert times[0] == times[4] == res.n_mix
    assert times[2] == min(times.values())
    assert res.n_mix == brute_mixing_time(path(5), 0.5, 0.25)


def test_mixing_monotone_in_eps():
    g = origin_cluster_graph(8, 0.65, 3)
    loose = walk.linfty_mixing(g, eps=0.5).n_mix
    tight = walk.linfty_mixing(g, eps=0.1).n_mix
    assert tight >= loose > 0


def test_mixing_cap():
    with pytest.raises(RuntimeError, match="not mixed"):
        walk.linfty_mixing(ring(64), eps=1e-6, n_cap=4)
