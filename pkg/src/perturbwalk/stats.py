"""Reference distributions, goodness-of-fit distances and interval estimates."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import special, stats

from . import rng as _rng


@dataclass(frozen=True)
class SkewBMRef:
    """Skew Brownian motion started at 0, observed at time t, with permeability gamma."""

    gamma: float
    t: float = 1.0

    def __post_init__(self):
        if not -1.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [-1, 1], got {self.gamma}")
        if not self.t > 0:
            raise ValueError("t must be positive")


def _phi_cdf(z):
    return special.ndtr(z)


def skew_bm_cdf(ref: SkewBMRef, y):
    """P{Y(t) <= y}; the density is (1 + gamma sgn y) times the N(0, t) density."""
    y = np.asarray(y, dtype=float)
    g = ref.gamma
    phi = _phi_cdf(y / math.sqrt(ref.t))
    out = np.where(y <= 0, (1 - g) * phi, (1 - g) / 2 + (1 + g) * (phi - 0.5))
    return out if out.ndim else float(out)


def skew_bm_pdf(ref: SkewBMRef, y):
    y = np.asarray(y, dtype=float)
    base = np.exp(-y * y / (2 * ref.t)) / math.sqrt(2 * math.pi * ref.t)
    out = (1 + ref.gamma * np.sign(y)) * base
    return out if out.ndim else float(out)


def gamma_from_kick(values, probs) -> float:
    """Permeability E[eta] / E[|eta|] of a 1-D kick law."""
    v = np.asarray(values, float)
    p = np.asarray(probs, float)
    den = float(p @ np.abs(v))
    if den == 0:
        raise ValueError("kick law is a point mass at 0")
    return float(p @ v) / den


# --------------------------------------------------------------------------
# Kolmogorov-Smirnov

def ks_statistic(sample, cdf) -> float:
    """sup_x |F_n(x) - F(x)| for a continuous reference CDF ``cdf``."""
    x = np.sort(np.asarray(sample, dtype=float))
    n = len(x)
    if n == 0:
        raise ValueError("sample must be nonempty")
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def two_sample_ks(a, b) -> float:
    """sup_x |F_a(x) - F_b(x)|, exact in the presence of ties."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if len(a) == 0 or len(b) == 0:
        raise ValueError("samples must be nonempty")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / len(a)
    fb = np.searchsorted(b, grid, side="right") / len(b)
    return float(np.max(np.abs(fa - fb)))


def ks_critical(n: int, alpha: float = 0.05) -> float:
    """Asymptotic one-sample critical distance at level alpha."""
    return float(stats.kstwobign.isf(alpha) / math.sqrt(n))


def ks_critical_two_sample(n: int, m: int, alpha: float = 0.05) -> float:
    """Asymptotic two-sample critical distance, via the effective size nm/(n+m)."""
    return float(stats.kstwobign.isf(alpha) * math.sqrt((n + m) / (n * m)))


def gaussian_cdf(variance: float):
    sd = math.sqrt(variance)
    return lambda x: special.ndtr(np.asarray(x, float) / sd)


# --------------------------------------------------------------------------
# intervals

def wilson_interval(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    if n <= 0:
        raise ValueError("n must be positive")
    z = stats.norm.isf((1 - level) / 2)
    p = k / n
    den = 1 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    lo = 0.0 if k == 0 else max(0.0, mid - half)
    hi = 1.0 if k == n else min(1.0, mid + half)
    return lo, hi


def mean_interval(x, level: float = 0.95) -> tuple[float, float, float]:
    """(mean, lower, upper) by the normal approximation."""
    x = np.asarray(x, float)
    m = float(x.mean())
    se = float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else math.inf
    z = stats.norm.isf((1 - level) / 2)
    return m, m - z * se, m + z * se


def binomial_sd(p: float, n: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / n)


def ratio_interval(k1: int, n1: int, k2: int, n2: int, level: float = 0.95) -> tuple[float, float, float]:
    """(p1/p2, lower, upper) for independent binomial proportions, delta method on the log scale."""
    if k1 == 0 or k2 == 0:
        raise ValueError("degenerate ratio: an event count is zero")
    p1, p2 = k1 / n1, k2 / n2
    r = p1 / p2
    se = math.sqrt((1 - p1) / k1 + (1 - p2) / k2)
    z = stats.norm.isf((1 - level) / 2)
    return r, r * math.exp(-z * se), r * math.exp(z * se)


def exponential_qq_correlation(x) -> float:
    """Correlation of sorted data with exponential quantiles (scale free, so the mean is effectively fitted)."""
    x = np.sort(np.asarray(x, float))
    n = len(x)
    q = -np.log1p(-(np.arange(1, n + 1) - 0.5) / n)
    if x[0] == x[-1]:
        return 0.0
    return float(np.corrcoef(x, q)[0, 1])


def exponential_qq_points(x, max_points: int = 200) -> np.ndarray:
    """(theoretical, empirical) quantile pairs for a unit-mean-fitted exponential."""
    x = np.sort(np.asarray(x, float))
    n = len(x)
    probs = (np.arange(1, n + 1) - 0.5) / n
    idx = np.unique(np.linspace(0, n - 1, min(n, max_points)).astype(int))
    theo = -np.log1p(-probs[idx]) * x.mean()
    return np.column_stack([theo, x[idx]])


# --------------------------------------------------------------------------
# lattice jitter

@njit(cache=True)
def _uniform_block(key, count):
    out = np.empty(count)
    for i in range(count):
        out[i] = _rng.u01_open_right(_rng.draw_u64(key, _rng.block_counter(i, 0))) - 0.5
    return out


def lattice_jitter(values, key: int) -> np.ndarray:
    """Integer data plus independent U(-1/2, 1/2) noise from a keyed stream.

    Spreads each lattice atom uniformly over its unit cell so that a KS test
    against a continuous law measures shape rather than discreteness.
    """
    v = np.asarray(values, dtype=float)
    noise = _uniform_block(np.uint64(key), v.size).reshape(v.shape)
    return v + noise
