"""Small statistics layer: binomial intervals and log-rate fits.

Every Monte Carlo estimate in this package travels with a Wilson score
interval, and every exponential-decay claim is an OLS fit on log counts with
a standard error attached.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

Z95 = 1.96


def wilson_interval(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion.

    Well behaved at 0 and trials successes; (0, 100) gives an upper limit of
    about 0.037.
    """
    if trials <= 0:
        raise ValueError("trials must be positive")
    if not 0 <= successes <= trials:
        raise ValueError("successes out of range")
    n = trials
    ph = successes / n
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (ph + z2 / (2 * n)) / denom
    half = (z / denom) * math.sqrt(ph * (1 - ph) / n + z2 / (4 * n * n))
    return (max(0.0, center - half), min(1.0, center + half))


@dataclass
class TailEstimate:
    """One cell of a tail estimate: the event indexed by `index`."""

    index: float
    trials: int
    successes: int

    @property
    def p_hat(self) -> float:
        return self.successes / self.trials

    @property
    def interval(self) -> tuple[float, float]:
        return wilson_interval(self.successes, self.trials)


@dataclass
class RateFit:
    slope: float
    intercept: float
    stderr: float
    window: tuple[float, float]
    n_points: int


def ols_line(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Least-squares line y = a*x + b; returns (a, b, stderr of a)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    k = len(x)
    if k < 3:
        raise ValueError("need at least 3 points for a slope stderr")
    xm = x - x.mean()
    sxx = float(xm @ xm)
    slope = float(xm @ y) / sxx
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (slope * x + intercept)
    sigma2 = float(resid @ resid) / (k - 2)
    return slope, intercept, math.sqrt(sigma2 / sxx)


def fit_log_rate(estimates: list[TailEstimate], lo: float, hi: float,
                 min_points: int = 4) -> RateFit | None:
    """OLS of log p_hat against the index over [lo, hi].

    Cells with zero successes carry no log value and are dropped; below
    min_points surviving cells the fit is refused (None), never extrapolated.
    """
    pts = [(e.index, e.p_hat) for e in estimates
           if lo <= e.index <= hi and e.successes > 0]
    if len(pts) < min_points:
        return None
    x = np.array([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    slope, intercept, err = ols_line(x, y)
    return RateFit(slope, intercept, err, (lo, hi), len(pts))


def estimate_indexed_event(outcome_fn, indices, trials: int,
                           seed: int, trial_offset: int = 0) -> list[TailEstimate]:
    """Tally an indexed family of events over independent trials.

    outcome_fn(seed, trial) must return a boolean array aligned with
    `indices` (cells of one trial share the sample, as in a tail scan).
    """
    counts = np.zeros(len(indices), dtype=np.int64)
    for t in range(trial_offset, trial_offset + trials):
        hits = np.asarray(outcome_fn(seed, t), dtype=bool)
        if hits.shape != (len(indices),):
            raise ValueError("outcome_fn shape mismatch")
        counts += hits
    return [TailEstimate(float(ix), trials, int(c))
            for ix, c in zip(indices, counts)]


def coverage(p_true: float, trials: int, cells: int, seed: int,
             z: float = Z95) -> float:
    """Fraction of simulated binomial cells whose Wilson interval covers p_true."""
    rng = np.random.default_rng(seed)
    ks = rng.binomial(trials, p_true, size=cells)
    hit = 0
    for k in ks:
        lo, hi = wilson_interval(int(k), trials, z)
        hit += lo <= p_true <= hi
    return hit / cells
