"""Exact (non Monte Carlo) n-step laws, return probabilities and first-return tails.

Everything here is deterministic arithmetic and serves as the reference
against which the simulations are checked.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numba import njit

from .errors import MemoryGuardError, NoReturnError, PreconditionError, DomainError
from .lattice import CovarianceMatrix
from .laws import JumpLaw, tail as law_tail, tail_from_log

MAX_CELLS = 20_000_000


@dataclass(frozen=True)
class ExactGrid:
    """P{S(k) = x} on the window sup_norm(x) <= window, for k <= nmax.

    ``origin[k]`` is the windowed value of P{S(k) = 0} and ``escaped[k]`` the
    total mass that has left the window by step k, which bounds the
    truncation error of any windowed probability at step k.
    """

    dim: int
    window: int
    nmax: int
    origin: np.ndarray
    escaped: np.ndarray
    mass: np.ndarray
    final: np.ndarray
    tables: tuple[np.ndarray, ...] | None = None

    def table(self, k: int) -> np.ndarray:
        if self.tables is None:
            if k == self.nmax:
                return self.final
            raise ValueError("grid was built without keep_tables=True")
        return self.tables[k]

    def prob(self, k: int, x: Sequence[int]) -> float:
        idx = tuple(int(c) + self.window for c in x)
        if any(not 0 <= i <= 2 * self.window for i in idx):
            return 0.0
        return float(self.table(k)[idx])


def _shift_slices(v, size):
    src, dst = [], []
    for c in v:
        lo = max(0, -c)
        hi = size - max(0, c)
        if hi <= lo:
            return None, None
        src.append(slice(lo, hi))
        dst.append(slice(lo + c, hi + c))
    return tuple(src), tuple(dst)


def _convolve_step(old, atoms, size):
    new = np.zeros_like(old)
    escaped = 0.0
    total = old.sum()
    for v, p in atoms:
        src, dst = _shift_slices(v, size)
        if src is None:
            escaped += p * total
            continue
        part = old[src]
        new[dst] += p * part
        escaped += p * max(total - part.sum(), 0.0)
    return new, escaped


def _default_window(base: JumpLaw, nmax: int, max_cells: int) -> int:
    """Smallest of: the reachable box, the memory cap, and drift + 10 M sqrt(n).

    By Hoeffding each coordinate leaves the last box with probability below
    2 exp(-50); whatever does leave is still accounted for in ``escaped``.
    """
    cap = int(((max_cells / 2) ** (1.0 / base.dim) - 1) // 2)
    m = base.max_jump
    drift = max(abs(sum(p * x[i] for x, p in base.atoms)) for i in range(base.dim))
    hoeffding = math.ceil(nmax * drift + 10 * m * math.sqrt(nmax))
    return max(1, min(nmax * m, cap, hoeffding))


def build_grid(base: JumpLaw, nmax: int, window: int | None = None, keep_tables: bool = False,
               max_cells: int = MAX_CELLS) -> ExactGrid:
    """Iterated convolution of a finite-support law, truncated to a window."""
    if not base.is_finite:
        raise PreconditionError(f"{base.kind} has infinite support; exact grids need finite laws")
    if nmax < 0:
        raise ValueError("nmax must be nonnegative")
    d = base.dim
    W = _default_window(base, nmax, max_cells) if window is None else int(window)
    size = 2 * W + 1
    cells = size ** d
    if cells * (nmax + 1 if keep_tables else 2) > max_cells:
        raise MemoryGuardError(f"grid of {cells} cells x {nmax + 1} steps exceeds the memory guard")
    cur = np.zeros((size,) * d)
    center = (W,) * d
    cur[center] = 1.0
    origin = np.zeros(nmax + 1)
    escaped = np.zeros(nmax + 1)
    mass = np.zeros(nmax + 1)
    origin[0], mass[0] = 1.0, 1.0
    tables = [cur.copy()] if keep_tables else None
    for k in range(1, nmax + 1):
        cur, esc = _convolve_step(cur, base.atoms, size)
        origin[k] = cur[center]
        escaped[k] = escaped[k - 1] + esc
        mass[k] = cur.sum()
        if keep_tables:
            tables.append(cur.copy())
    return ExactGrid(d, W, nmax, origin, escaped, mass, cur, tuple(tables) if keep_tables else None)


def period(grid_or_u) -> int:
    """gcd of all k >= 1 with P{S(k) = 0} > 0 (within the available horizon)."""
    u = grid_or_u.origin if isinstance(grid_or_u, ExactGrid) else np.asarray(grid_or_u)
    ks = np.nonzero(u[1:] > 0)[0] + 1
    if len(ks) == 0:
        raise NoReturnError(f"no return to the origin within {len(u) - 1} steps")
    return int(np.gcd.reduce(ks))


def period_of_support(base: JumpLaw, nmax: int | None = None) -> int | None:
    """Period of a finite-support walk, or None if it never returns within nmax."""
    if nmax is None:
        nmax = 4 * len(base.atoms) + 8
    grid = build_grid(base, nmax, window=nmax * base.max_jump, max_cells=10 ** 8)
    try:
        return period(grid)
    except NoReturnError:
        return None


# --------------------------------------------------------------------------
# closed forms for the planar simple and lazy walks

def srw2_return_probs(nmax: int) -> np.ndarray:
    """U_k = P{S(k) = 0} for the simple walk on Z^2: ((2m choose m) 4^-m)^2 at k = 2m."""
    u = np.zeros(nmax + 1)
    m = np.arange(1, nmax // 2 + 1, dtype=float)
    a = np.concatenate([[1.0], np.cumprod((2 * m - 1) / (2 * m))])
    u[0::2] = a[: len(u[0::2])] ** 2
    return u


@njit(cache=True)
def _lazy_mixture(u_srw, nmax, p0):
    out = np.zeros(nmax + 1)
    q = 1.0 - p0
    lq, lp = math.log(q), math.log(p0)
    for n in range(nmax + 1):
        mean = n * q
        sd = math.sqrt(n * q * p0)
        lo = max(0, int(mean - 40.0 * sd - 2))
        hi = min(n, int(mean + 40.0 * sd + 2))
        lfn = math.lgamma(n + 1.0)
        s = 0.0
        for j in range(lo, hi + 1):
            if u_srw[j] == 0.0:
                continue
            lw = lfn - math.lgamma(j + 1.0) - math.lgamma(n - j + 1.0) + j * lq + (n - j) * lp
            s += math.exp(lw) * u_srw[j]
        out[n] = s
    return out


def lazy_srw2_return_probs(nmax: int, p0: float = 0.5) -> np.ndarray:
    """P{S(k) = 0} for the lazy planar walk: binomial mixture of simple-walk returns."""
    return _lazy_mixture(srw2_return_probs(nmax), nmax, float(p0))


# --------------------------------------------------------------------------
# renewal recursion

@njit(cache=True)
def _renewal(u):
    n = u.shape[0]
    r = np.zeros(n)
    nz = np.nonzero(u[1:])[0] + 1
    r[0] = 1.0 / u[0]
    for m in range(1, n):
        s = 0.0
        c = 0.0
        for k in nz:
            if k > m:
                break
            x = u[k] * r[m - k]
            t = s + x
            if abs(s) >= abs(x):
                c += (s - t) + x
            else:
                c += (x - t) + s
            s = t
        r[m] = (1.0 - (s + c)) / u[0]
    return r


@njit(cache=True)
def _renewal_residual(u, r):
    n = u.shape[0]
    nz = np.nonzero(u)[0]
    worst = 0.0
    for m in range(n):
        s = 0.0
        c = 0.0
        for k in nz:
            if k > m:
                break
            x = u[k] * r[m - k]
            t = s + x
            if abs(s) >= abs(x):
                c += (s - t) + x
            else:
                c += (x - t) + s
            s = t
        e = abs(s + c - 1.0)
        if e > worst:
            worst = e
    return worst


def renewal_tail(u: np.ndarray) -> np.ndarray:
    """R_n from sum_{k<=n} U_k R_{n-k} = 1 (compensated summation)."""
    u = np.ascontiguousarray(u, dtype=float)
    if u[0] <= 0:
        raise ValueError("U_0 must be positive")
    return _renewal(u)


def renewal_residual(u: np.ndarray, r: np.ndarray) -> float:
    """max_n |sum_{k<=n} U_k R_{n-k} - 1|."""
    return float(_renewal_residual(np.ascontiguousarray(u, float), np.ascontiguousarray(r, float)))


@dataclass(frozen=True)
class ReturnTailTable:
    """U_k = P{S(k)=0}, R_k = P{tau_0 > k} with error bars, and the period c.

    Bars on U come from escaped window mass. Bars on R are obtained by
    running the recursion on the lower and upper U sequences (first-order
    propagation), clipped to [0, 1]; they collapse to zero width for
    closed-form inputs. For rigorous bounds on R use
    ``first_return_tail_taboo``.
    """

    U: np.ndarray
    R: np.ndarray
    U_lower: np.ndarray
    U_upper: np.ndarray
    R_lower: np.ndarray
    R_upper: np.ndarray
    period: int

    def rows(self):
        for k in range(len(self.U)):
            yield (k, self.U[k], self.U_lower[k], self.U_upper[k], self.R[k], self.R_lower[k], self.R_upper[k])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "U_k", "U_lower", "U_upper", "R_k", "R_lower", "R_upper"])
            for row in self.rows():
                w.writerow([row[0], *(repr(float(v)) for v in row[1:])])


def return_tail_exact(source) -> ReturnTailTable:
    """Return-tail table from an ExactGrid or from an exact U sequence."""
    if isinstance(source, ExactGrid):
        u = source.origin
        u_lo, u_hi = u, np.minimum(u + source.escaped, 1.0)
    else:
        u = np.asarray(source, dtype=float)
        u_lo = u_hi = u
    r = renewal_tail(u)
    if u_lo is u_hi:
        r_lo = r_hi = r
    else:
        ra, rb = renewal_tail(u_lo), renewal_tail(u_hi)
        # the propagated bars can leave [0, 1] once much mass has escaped
        r_lo = np.clip(np.minimum(ra, rb), 0.0, 1.0)
        r_hi = np.clip(np.maximum(ra, rb), 0.0, 1.0)
    return ReturnTailTable(u, r, u_lo, u_hi, r_lo, r_hi, period(u))


def first_return_tail_taboo(base: JumpLaw, nmax: int, window: int) -> tuple[np.ndarray, np.ndarray]:
    """Bounds on P{tau_0 > k} by evolving the walk killed on returning to 0.

    Independent of the renewal identity; the lower bound treats all mass
    that left the window as having returned, the upper as never returning.
    """
    d = base.dim
    size = 2 * window + 1
    if size ** d > MAX_CELLS:
        raise MemoryGuardError("taboo grid exceeds the memory guard")
    cur = np.zeros((size,) * d)
    center = (window,) * d
    cur[center] = 1.0
    lo = np.ones(nmax + 1)
    hi = np.ones(nmax + 1)
    esc_total = 0.0
    for k in range(1, nmax + 1):
        cur, esc = _convolve_step(cur, base.atoms, size)
        cur[center] = 0.0
        esc_total += esc
        alive = cur.sum()
        lo[k] = alive
        hi[k] = min(1.0, alive + esc_total)
    return lo, hi


# --------------------------------------------------------------------------
# constant identification

def _two_pi_sqrt_det(cov: CovarianceMatrix) -> float:
    if not cov.nondegenerate:
        raise PreconditionError("nondegenerate covariance required")
    return 2.0 * math.pi * math.sqrt(cov.det)


@dataclass
class LLTReport:
    c: int
    n: np.ndarray
    scaled: np.ndarray  # n * U_{c n}
    candidates: dict[str, float]
    supported: str
    relative_error: dict[str, float]
    trending: bool


def llt_constant_report(source, cov: CovarianceMatrix, c: int) -> LLTReport:
    """Compare n * U_{cn} with c/(2 pi sqrt det) and 1/(2 pi sqrt det)."""
    k = _two_pi_sqrt_det(cov)
    u = source.origin if isinstance(source, ExactGrid) else np.asarray(source, float)
    m = np.arange(1, (len(u) - 1) // c + 1)
    scaled = m * u[c * m]
    cands = {"lemma_statement": c / k, "per_block": 1.0 / k}
    last = scaled[-1]
    rel = {name: abs(last - v) / v for name, v in cands.items()}
    if abs(cands["lemma_statement"] - cands["per_block"]) < 1e-12:
        supported = "indistinguishable (c = 1)"
        target = cands["per_block"]
    else:
        supported = min(rel, key=rel.get)
        target = cands[supported]
    tail_part = scaled[len(scaled) // 10:]
    dist = np.abs(tail_part - target)
    trending = bool(np.all(np.diff(dist) <= 1e-15))
    return LLTReport(c, m, scaled, cands, supported, rel, trending)


@dataclass
class ReturnTailConstantReport:
    fitted_constant: float
    fitted_offset: float
    candidates: dict[str, float]
    supported: str
    ratio_to_supported: float
    decade_points: list[int]
    scaled_at_decades: list[float]  # R_n log n
    per_decade_change: list[float]
    eventually_increasing: bool
    notes: str = field(default="")


def return_tail_constant_report(table: ReturnTailTable, cov: CovarianceMatrix, n_lo: int = 1000,
                                n_hi: int | None = None) -> ReturnTailConstantReport:
    """Fit R_n = K / (log n + b) on [n_lo, n_hi] and place K among the candidate constants.

    Candidates are c/(2 pi sqrt det) (as stated for the tail) and its
    reciprocal 2 pi sqrt det / c (as produced by the renewal bounds); the
    c-free value 2 pi sqrt det is reported as a diagnostic.
    """
    k = _two_pi_sqrt_det(cov)
    c = table.period
    R = table.R
    n_hi = len(R) - 1 if n_hi is None else n_hi
    ns = np.unique(np.geomspace(n_lo, n_hi, 200).astype(int))
    ns = ns - (ns % c)  # stay on the lattice of possible return times
    x = np.log(ns)
    y = 1.0 / R[ns]
    slope, intercept = np.polyfit(x, y, 1)
    K = 1.0 / slope
    cands = {"lemma_statement": c / k, "proof_body": k / c}
    score = {name: abs(math.log(K / v)) for name, v in cands.items()}
    supported = min(score, key=score.get)
    dec = []
    p = n_lo
    while p <= n_hi:
        dec.append(int(p))
        p *= 10
    scaled = [float(R[n] * math.log(n)) for n in dec]
    changes = [scaled[i + 1] / scaled[i] - 1.0 for i in range(len(scaled) - 1)]
    grid = np.arange(n_lo - n_lo % c + c, n_hi + 1, c)  # R only moves at multiples of c
    seq = R[grid] * np.log(grid)
    increasing = bool(np.all(np.diff(seq) >= -1e-15))
    notes = (f"fitted K = {K:.6g}; c-free value 2*pi*sqrt(det) = {k:.6g} "
             f"(ratio {K / k:.4f}); c = {c}")
    return ReturnTailConstantReport(K, intercept * K, cands, supported, K / cands[supported], dec, scaled,
                                    changes, increasing, notes)


# --------------------------------------------------------------------------
# counterexample lower bound

def counterexample_limit(a: float) -> float:
    return (1.0 - math.exp(-2.0 * a)) / 2.0


def counterexample_first_term_log(a: float, log_n: float,
                                  tail_of_log: Callable[[float], float] | None = None) -> float:
    """First summand of the lower bound, with n given through log n.

    Evaluates (1 - P{|eta| <= s}^floor(loglog n)) P{|eta| > 2n} / P{|eta| > s}
    with s = exp(sqrt(log n)). ``tail_of_log(L)`` must return P{|eta| > e^L};
    by default the LogLogRadial(a) tail is used.
    """
    if tail_of_log is None:
        from .laws import loglog_radial

        law = loglog_radial(a)
        tail_of_log = lambda L: tail_from_log(law, L)  # noqa: E731
    if log_n <= 1.0:
        raise DomainError("need log n > 1")
    l2 = math.log(log_n)
    root = math.sqrt(log_n)
    if root < math.exp(a) or math.floor(l2) < 1:
        raise DomainError(f"n = exp({log_n:.4g}) is below the exact-tail regime for a = {a}")
    p_s = tail_of_log(root)
    p_2n = tail_of_log(math.log(2.0) + log_n)
    return (1.0 - (1.0 - p_s) ** math.floor(l2)) * p_2n / p_s


def counterexample_first_term(a: float, n: int, tail: Callable[[float], float] | None = None) -> float:
    """Same as ``counterexample_first_term_log`` for an integer horizon n, using exact tails."""
    if tail is None:
        from .laws import loglog_radial

        law = loglog_radial(a)
        tail = lambda t: law_tail(law, t, "sup")  # noqa: E731
    return counterexample_first_term_log(a, math.log(n), lambda L: tail(math.exp(L)))
