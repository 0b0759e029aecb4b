"""Lazy random walk on cluster subgraphs: exact return probabilities,
spectral gap, and L-infinity mixing.

Everything here is exact linear algebra on the sparse kernel; no trajectory
sampling.  The default walk is lazy with beta = 1/2, which kills bipartite
parity and makes the kernel positive semidefinite, so return probabilities
decrease monotonically and log-log fits are clean.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .lattice import _csr_from_edges
from .stats import RateFit, ols_line

EXACT_CAP = 20_000


class ArrayGraph:
    """Minimal graph container (num_vertices, edges) for ad-hoc instances."""

    def __init__(self, num_vertices: int, edges):
        self.num_vertices = int(num_vertices)
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        self.edges = e
        self.indptr, self.indices = _csr_from_edges(self.num_vertices, e)


class WalkOperator:
    """Lazy walk kernel P = beta*I + (1-beta)*D^{-1}A on a graph.

    The graph object must expose num_vertices, indptr, indices.  Degree-zero
    vertices hold the walker (row = identity); connected instances never have
    any unless they are singletons.
    """

    def __init__(self, graph, beta: float = 0.5, check_connected: bool = False):
        if not 0.0 <= beta < 1.0:
            raise ValueError("beta must be in [0, 1)")
        self.graph = graph
        self.beta = float(beta)
        n = graph.num_vertices
        self.num_vertices = n
        indptr = np.asarray(graph.indptr)
        indices = np.asarray(graph.indices)
        self.degrees = np.diff(indptr).astype(np.int64)
        if check_connected and n > 1:
            adj = sp.csr_matrix(
                (np.ones(len(indices), np.int8), indices, indptr), shape=(n, n)
            )
            ncomp, _ = connected_components(adj, directed=False)
            if ncomp != 1:
                raise ValueError(f"graph has {ncomp} components")

        # Distribution evolution uses mu P, stored as P^T for csr matvec.
        rows = indices.astype(np.int64)
        cols = np.repeat(np.arange(n, dtype=np.int64), self.degrees)
        with np.errstate(divide="ignore"):
            inv_deg = np.where(self.degrees > 0, 1.0 / self.degrees, 0.0)
        data = (1.0 - beta) * inv_deg[cols]
        diag = np.where(self.degrees > 0, beta, 1.0)
        pt = sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()
        self._pt = pt + sp.diags(diag, format="csr")

        total = self.degrees.sum()
        self.pi = (
            self.degrees / total if total else np.full(n, 1.0 / n)
        )

    def step(self, mu: np.ndarray) -> np.ndarray:
        """One step of distribution evolution mu -> mu P."""
        return self._pt @ mu

    def evolve(self, mu: np.ndarray, steps: int) -> np.ndarray:
        for _ in range(steps):
            mu = self.step(mu)
        return mu

    def symmetric_kernel(self) -> sp.csr_matrix:
        """M = D^{-1/2} (beta D + (1-beta) A) D^{-1/2}, same spectrum as P."""
        n = self.num_vertices
        with np.errstate(divide="ignore"):
            s = np.where(self.degrees > 0, 1.0 / np.sqrt(self.degrees), 0.0)
        indptr = np.asarray(self.graph.indptr)
        indices = np.asarray(self.graph.indices)
        a = sp.csr_matrix((np.ones(len(indices)), indices, indptr), shape=(n, n))
        m = sp.diags(s) @ a @ sp.diags(s) * (1.0 - self.beta)
        diag = np.where(self.degrees > 0, self.beta, 1.0)
        return (m + sp.diags(diag)).tocsr()


def heat_kernel_at_origin(op: WalkOperator, origin: int, n_max: int) -> np.ndarray:
    """Exact p_n(origin, origin) for n = 0..n_max.

    Asserts probability conservation at every step and, for beta >= 1/2,
    monotone decrease of the return sequence.
    """
    n = op.num_vertices
    if not 0 <= origin < n:
        raise ValueError("origin outside graph")
    mu = np.zeros(n)
    mu[origin] = 1.0
    out = np.empty(n_max + 1)
    out[0] = 1.0
    for k in range(1, n_max + 1):
        mu = op.step(mu)
        s = mu.sum()
        assert abs(s - 1.0) <= 1e-12, f"probability leak at step {k}: {s}"
        out[k] = mu[origin]
        if op.beta >= 0.5:
            assert out[k] <= out[k - 1] + 1e-12, f"return sequence rose at {k}"
    return out


def decay_exponent(p_seq: np.ndarray, n_lo: int, n_hi: int) -> RateFit:
    """OLS slope of log p_n against log n over n in [n_lo, n_hi]."""
    if n_lo < 1 or n_hi >= len(p_seq) or n_lo >= n_hi:
        raise ValueError("bad fit window")
    ns = np.arange(n_lo, n_hi + 1)
    vals = p_seq[n_lo : n_hi + 1]
    if np.any(vals <= 0):
        raise ValueError("nonpositive kernel values in fit window")
    slope, intercept, err = ols_line(np.log(ns), np.log(vals))
    return RateFit(slope, intercept, err, (float(n_lo), float(n_hi)), len(ns))


@dataclass
class SpectralResult:
    lambda2: float
    gap: float
    relaxation_time: float
    residual: float
    iterations: int
    vector: np.ndarray  # eigenvector of the symmetric kernel (phi2)


def relaxation_time(graph, beta: float = 0.5, tol: float = 1e-10,
                    max_iter: int = 200_000, block: int = 8,
                    seed: int = 7) -> SpectralResult:
    """Second eigenvalue of the lazy kernel by simultaneous power iteration
    with the known top mode deflated; certified by the Ritz residual.

    The certificate is ||M x - theta x|| <= tol for the returned pair, with
    x orthogonal to the exact stationary mode, so theta is within tol of a
    true eigenvalue and never exceeds lambda2.
    """
    op = WalkOperator(graph, beta=beta, check_connected=True)
    n = op.num_vertices
    if n > EXACT_CAP:
        raise ValueError(f"instance above the exact-mode cap ({n} > {EXACT_CAP})")
    if n == 1:
        return SpectralResult(0.0, 1.0, 1.0, 0.0, 0, np.ones(1))
    m = op.symmetric_kernel()
    phi = np.sqrt(np.maximum(op.degrees, 1)).astype(float)
    phi /= np.linalg.norm(phi)

    rng = np.random.default_rng(seed)
    b = min(block, n - 1)
    x = rng.standard_normal((n, b))
    x -= np.outer(phi, phi @ x)
    x, _ = np.linalg.qr(x)
    theta = 0.0
    vec = x[:, 0]
    res = np.inf
    it = 0
    while it < max_iter:
        it += 1
        y = m @ x
        y -= np.outer(phi, phi @ y)
        # Rayleigh-Ritz on the block, largest |theta| is the candidate.
        q, _ = np.linalg.qr(y)
        small = q.T @ (m @ q)
        small = (small + small.T) / 2
        w, v = np.linalg.eigh(small)
        k = int(np.argmax(np.abs(w)))
        theta = float(w[k])
        vec = q @ v[:, k]
        vec -= phi * (phi @ vec)
        vec /= np.linalg.norm(vec)
        res = float(np.linalg.norm(m @ vec - theta * vec))
        if res <= tol:
            break
        x = q
    else:
        raise RuntimeError(
            f"power iteration not converged: residual {res:.2e} after {it} rounds"
        )
    gap = 1.0 - theta
    return SpectralResult(theta, gap, 1.0 / gap, res, it, vec)


def _deviation(mu: np.ndarray, pi: np.ndarray) -> float:
    return float(np.max(np.abs(mu / pi - 1.0)))


@dataclass
class MixingResult:
    n_mix: int
    eps: float
    worst_start: int
    start_times: dict  # start vertex -> its individual mixing step count
    worst_identified: bool  # eigenvector start attains the max


def _start_mixing_time(op: WalkOperator, start: int, eps: float,
                       n_cap: int) -> int:
    """Smallest n with max_y |p_n(start,y)/pi(y) - 1| <= eps, by doubling
    then bisection; the deviation is monotone for reversible lazy kernels."""
    mu = np.zeros(op.num_vertices)
    mu[start] = 1.0
    if _deviation(mu, op.pi) <= eps:
        return 0
    lo, lo_state = 0, mu
    n = 1
    mu = op.step(mu)
    while _deviation(mu, op.pi) > eps:
        lo, lo_state = n, mu.copy()
        mu = op.evolve(mu, n)
        n *= 2
        if n > n_cap:
            raise RuntimeError(f"not mixed after {n_cap} steps")
    hi = n
    while hi - lo > 1:
        mid = (lo + hi) // 2
        probe = op.evolve(lo_state.copy(), mid - lo)
        if _deviation(probe, op.pi) <= eps:
            hi = mid
        else:
            lo, lo_state = mid, probe
    return hi


def linfty_mixing(graph, beta: float = 0.5, eps: float = 0.25,
                  random_starts: int = 32, seed: int = 11,
                  n_cap: int = 1 << 24) -> MixingResult:
    """L-infinity mixing time at threshold eps over a start set: the start
    flagged by the spectral vector plus random ones (all starts on small
    instances)."""
    op = WalkOperator(graph, beta=beta, check_connected=True)
    n = op.num_vertices
    sr = relaxation_time(graph, beta=beta)
    flagged = int(np.argmax(np.abs(sr.vector) / np.sqrt(np.maximum(op.degrees, 1))))
    if n <= random_starts + 1:
        starts = list(range(n))
    else:
        rng = np.random.default_rng(seed)
        starts = sorted(set(rng.integers(n, size=random_starts).tolist()) | {flagged})
    times = {s: _start_mixing_time(op, s, eps, n_cap) for s in starts}
    n_mix = max(times.values())
    return MixingResult(n_mix, eps, flagged, times,
                        times[flagged] == n_mix)


def detailed_balance_defect(graph, beta: float, n_steps: int) -> float:
    """max |deg(x) p_n(x,y) - deg(y) p_n(y,x)| on a small instance."""
    op = WalkOperator(graph, beta=beta)
    n = op.num_vertices
    if n > 500:
        raise ValueError("detailed-balance check is for small instances")
    dense = np.eye(n)
    for _ in range(n_steps):
        dense = dense @ op._pt.toarray().T
    weighted = op.degrees[:, None] * dense
    return float(np.max(np.abs(weighted - weighted.T)))
