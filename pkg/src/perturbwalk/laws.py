"""Jump distributions on Z^d: construction, sampling, exact tails and moments.

All samplers live in numba-compiled code operating on a packed ``LawTable``
so that the Python API (``sample``) and the walk kernels draw bit-identical
increments from the same (key, counter) pairs.
"""
from __future__ import annotations

import math
from collections import namedtuple
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from itertools import product
from typing import Iterable, Mapping, Sequence

import numpy as np
from numba import njit
from scipy import integrate, special

from . import rng as _rng
from .errors import ConfigError, MomentUnavailable, SaturationError, TailUnavailable
from .lattice import COORD_LIMIT, CovarianceMatrix, LatticePoint, norm, point

KINDS = (
    "Categorical",
    "SimpleNeighbor",
    "LazySimpleNeighbor",
    "PolynomialTail",
    "RegVaryingRadial",
    "LogLogRadial",
    "DiagonalEmbedding",
)
FINITE_KINDS = {"Categorical", "SimpleNeighbor", "LazySimpleNeighbor", "DiagonalEmbedding"}

# kernel-side kind codes
K_CAT, K_LOGLOG, K_ZETA, K_POLY = 0, 1, 2, 3

_LIMIT_F = float(COORD_LIMIT)
_LOGLOG_SAT = math.log(math.log(_LIMIT_F))
_TWO32 = 1 << 32

PROB_TOL = 1e-12
CATEGORICAL_ATOM_LIMIT = 1 << 61


def _as_fraction(p) -> Fraction:
    if isinstance(p, Fraction):
        return p
    if isinstance(p, str):
        return Fraction(p.strip())
    if isinstance(p, (int, np.integer)):
        return Fraction(int(p))
    return Fraction(float(p))


@dataclass(frozen=True)
class JumpLaw:
    """A distribution of one lattice increment.

    Use the module-level constructors rather than instantiating directly.
    Finite kinds carry their atoms explicitly; heavy-tailed kinds carry
    parameters and are sampled by dedicated routines.
    """

    kind: str
    dim: int
    atoms: tuple[tuple[LatticePoint, float], ...] = ()
    alpha: float | None = None
    scale: float | None = None
    c_plus: float | None = None
    p0: float | None = None
    window: int | None = None
    inner: "JumpLaw | None" = None

    @property
    def is_finite(self) -> bool:
        return self.kind in FINITE_KINDS

    @property
    def is_bounded(self) -> bool:
        return self.is_finite

    def support(self) -> list[LatticePoint]:
        if not self.is_finite:
            raise TailUnavailable(f"{self.kind} has infinite support; use support_within()")
        return [x for x, _ in self.atoms]

    @cached_property
    def max_jump(self) -> int:
        """Largest sup-norm of an atom (finite kinds only)."""
        return max(max(abs(c) for c in x) for x, _ in self.atoms) if self.is_finite else -1

    def describe(self) -> dict:
        """JSON-ready description, the inverse of ``law_from_dict``."""
        if self.kind == "Categorical":
            return {"kind": self.kind, "support": [[*x, p] for x, p in self.atoms]}
        if self.kind == "SimpleNeighbor":
            return {"kind": self.kind, "dim": self.dim}
        if self.kind == "LazySimpleNeighbor":
            return {"kind": self.kind, "dim": self.dim, "p0": self.p0}
        if self.kind == "PolynomialTail":
            return {"kind": self.kind, "alpha": self.alpha, "window": self.window}
        if self.kind == "RegVaryingRadial":
            return {"kind": self.kind, "alpha": self.alpha, "c_plus": self.c_plus}
        if self.kind == "LogLogRadial":
            return {"kind": self.kind, "dim": self.dim, "a": self.scale}
        return {"kind": self.kind, "base": self.inner.describe()}


# --------------------------------------------------------------------------
# constructors

def categorical(support: Mapping[Sequence[int], object] | Iterable[tuple[Sequence[int], object]]) -> JumpLaw:
    """Law with finitely many atoms. Probabilities may be numbers or decimal strings."""
    items = support.items() if isinstance(support, Mapping) else support
    acc: dict[LatticePoint, Fraction] = {}
    for x, p in items:
        x = point(x)
        if x in acc:
            raise ConfigError(f"categorical support points must be distinct, {x} repeated")
        q = _as_fraction(p)
        if q <= 0:
            raise ConfigError(f"categorical probability at {x} must be positive, got {p}")
        acc[x] = q
    if not acc:
        raise ConfigError("categorical law needs at least one atom")
    dims = {len(x) for x in acc}
    if len(dims) != 1:
        raise ConfigError("categorical support points must share one dimension")
    total = sum(acc.values())
    if abs(float(total) - 1.0) > PROB_TOL:
        raise ConfigError(f"categorical probabilities sum to {float(total)!r}, not 1")
    atoms = tuple(sorted(((x, float(q / total)) for x, q in acc.items())))
    return JumpLaw("Categorical", dims.pop(), atoms)


def point_mass(x: Sequence[int]) -> JumpLaw:
    return categorical({tuple(x): 1})


def _unit_vectors(d: int) -> list[LatticePoint]:
    out = []
    for i in range(d):
        for s in (1, -1):
            e = [0] * d
            e[i] = s
            out.append(tuple(e))
    return out


def simple_neighbor(d: int) -> JumpLaw:
    """Uniform law on the 2d nearest neighbours of the origin."""
    atoms = tuple(sorted((e, 1.0 / (2 * d)) for e in _unit_vectors(d)))
    return JumpLaw("SimpleNeighbor", d, atoms)


def lazy_simple_neighbor(d: int, p0: float = 0.5) -> JumpLaw:
    """Stay put with probability p0, otherwise a simple-neighbour step."""
    p0 = float(p0)
    if not 0.0 < p0 < 1.0:
        raise ConfigError(f"laziness p0 must lie in (0, 1), got {p0}")
    atoms = [((0,) * d, p0)] + [(e, (1.0 - p0) / (2 * d)) for e in _unit_vectors(d)]
    return JumpLaw("LazySimpleNeighbor", d, tuple(sorted(atoms)), p0=p0)


def diagonal_embedding(base: JumpLaw) -> JumpLaw:
    """Embed a 1-D law as (k, -k) in Z^2, so the two coordinates are mirror images."""
    if base.dim != 1 or not base.is_finite:
        raise ConfigError("diagonal embedding needs a finite one-dimensional base law")
    atoms = tuple(sorted(((x[0], -x[0]), p) for x, p in base.atoms))
    return JumpLaw("DiagonalEmbedding", 2, atoms, inner=base)


def loglog_radial(a: float, dim: int = 2) -> JumpLaw:
    """Axis-directed jump whose radius R has P{R > t} = a / log log t for t >= exp(exp(a)).

    R = exp(exp(a / U)) for U uniform on (0, 1], rounded to the nearest
    integer; the direction is uniform over the 2*dim axis directions.
    """
    a = float(a)
    if a <= 0:
        raise ConfigError(f"scale a must be positive, got {a}")
    return JumpLaw("LogLogRadial", int(dim), scale=a)


def reg_varying(alpha: float, c_plus: float = 0.5) -> JumpLaw:
    """Two-sided Pareto-type law on Z \\ {0}: P{xi = +-n} = c_+- n^(-1-alpha) / zeta(1+alpha)."""
    alpha, c_plus = float(alpha), float(c_plus)
    if alpha <= 0:
        raise ConfigError(f"tail index alpha must be positive, got {alpha}")
    if not 0.0 <= c_plus <= 1.0:
        raise ConfigError(f"c_plus must lie in [0, 1], got {c_plus}")
    return JumpLaw("RegVaryingRadial", 1, alpha=alpha, c_plus=c_plus)


def polynomial_tail(alpha: float, window: int = 64) -> JumpLaw:
    """P{xi = x} proportional to 1 / (1 + |x|^(2+alpha)) on Z^2 (euclidean |x|)."""
    alpha = float(alpha)
    if alpha <= 0:
        raise ConfigError(f"alpha must be positive, got {alpha}")
    if window < 1:
        raise ConfigError("window must be at least 1")
    return JumpLaw("PolynomialTail", 2, alpha=alpha, window=int(window))


def law_from_dict(spec: Mapping, path: str = "law") -> JumpLaw:
    """Build a law from its JSON description (see ``JumpLaw.describe``)."""
    if not isinstance(spec, Mapping):
        raise ConfigError("law must be an object", path)
    kind = spec.get("kind")
    allowed = {
        "Categorical": {"support"},
        "SimpleNeighbor": {"dim"},
        "LazySimpleNeighbor": {"dim", "p0"},
        "PolynomialTail": {"alpha", "window"},
        "RegVaryingRadial": {"alpha", "c_plus"},
        "LogLogRadial": {"dim", "a"},
        "DiagonalEmbedding": {"base"},
    }
    if kind not in allowed:
        raise ConfigError(f"unknown law kind {kind!r}", f"{path}.kind")
    extra = set(spec) - allowed[kind] - {"kind"}
    if extra:
        raise ConfigError(f"unknown field(s) {sorted(extra)}", path)
    try:
        if kind == "Categorical":
            rows = spec["support"]
            pairs = []
            for i, row in enumerate(rows):
                if not isinstance(row, (list, tuple)) or len(row) < 2:
                    raise ConfigError("support rows are [coords..., probability]", f"{path}.support[{i}]")
                pairs.append((tuple(row[:-1]), row[-1]))
            try:
                return categorical(pairs)
            except ConfigError as exc:
                raise ConfigError(f"Categorical law: {exc.message}", path) from None
        if kind == "SimpleNeighbor":
            return simple_neighbor(int(spec["dim"]))
        if kind == "LazySimpleNeighbor":
            return lazy_simple_neighbor(int(spec["dim"]), float(_as_fraction(spec.get("p0", 0.5))))
        if kind == "PolynomialTail":
            return polynomial_tail(float(spec["alpha"]), int(spec.get("window", 64)))
        if kind == "RegVaryingRadial":
            return reg_varying(float(spec["alpha"]), float(_as_fraction(spec.get("c_plus", 0.5))))
        if kind == "LogLogRadial":
            return loglog_radial(float(spec["a"]), int(spec.get("dim", 2)))
        return diagonal_embedding(law_from_dict(spec["base"], f"{path}.base"))
    except KeyError as exc:
        raise ConfigError(f"missing field {exc.args[0]!r}", path) from None
    except ConfigError as exc:
        if exc.path:
            raise
        raise ConfigError(exc.message, path) from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{kind} law: {exc}", path) from None


# --------------------------------------------------------------------------
# polynomial-tail normalization

_POLY_R0 = 1024


def _poly_weight(r2: np.ndarray, alpha: float) -> np.ndarray:
    return 1.0 / (1.0 + r2 ** (1.0 + alpha / 2.0))


def _square_shell_sums(alpha: float, rmax: int) -> np.ndarray:
    """shell[r] = sum of weights over points with sup-norm exactly r, r <= rmax."""
    shell = np.zeros(rmax + 1)
    shell[0] = 1.0
    ys = np.arange(-rmax, rmax + 1, dtype=np.float64)
    r = np.arange(1, rmax + 1)
    # each shell: top+bottom rows (x in [-r, r]) plus left+right columns (|y| < r)
    for k in r:
        top = _poly_weight(k * k + ys[rmax - k: rmax + k + 1] ** 2, alpha).sum()
        side = _poly_weight(k * k + ys[rmax - k + 1: rmax + k] ** 2, alpha).sum()
        shell[k] = 2.0 * top + 2.0 * side
    return shell


def _outside_square_integral(alpha: float, s: float, shift: float) -> float:
    """Integral of 1/(1+(|y|-shift)^(2+alpha)) over {|y|_sup > s} in R^2."""

    def inner(theta):
        r0 = s / math.cos(theta)
        val, _ = integrate.quad(lambda r: r / (1.0 + (r - shift) ** (2.0 + alpha)), r0, np.inf, limit=200)
        return val

    val, _ = integrate.quad(inner, 0.0, math.pi / 4, limit=200)
    return 8.0 * val


@lru_cache(maxsize=None)
def _poly_normalization(alpha: float, window: int):
    """(shell sums up to R0, tail lower, tail upper, tail midpoint) beyond R0."""
    shell = _square_shell_sums(alpha, _POLY_R0)
    s = _POLY_R0 + 0.5
    h = math.sqrt(0.5)
    lo = _outside_square_integral(alpha, s, -h)
    hi = _outside_square_integral(alpha, s, h)
    mid = _outside_square_integral(alpha, s, 0.0)
    return shell, lo, hi, mid


def _poly_window_probability(alpha: float, window: int) -> float:
    shell, _, _, mid = _poly_normalization(alpha, window)
    total = shell.sum() + mid
    return float(shell[: window + 1].sum() / total)


# --------------------------------------------------------------------------
# packing and kernel samplers

LawTable = namedtuple("LawTable", "kinds fpar ipar atoms thresh alias")


def _alias_table(probs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vose alias table; thresholds are 32-bit fixed point (2**32 = always keep)."""
    m = len(probs)
    scaled = np.asarray(probs, dtype=float) * m
    alias = np.arange(m, dtype=np.int64)
    keep = np.ones(m)
    small = [i for i in range(m) if scaled[i] < 1.0]
    large = [i for i in range(m) if scaled[i] >= 1.0]
    while small and large:
        s, g = small.pop(), large.pop()
        keep[s] = scaled[s]
        alias[s] = g
        scaled[g] = (scaled[g] + scaled[s]) - 1.0
        (small if scaled[g] < 1.0 else large).append(g)
    for i in small + large:
        keep[i] = 1.0
    thresh = np.minimum(np.round(keep * _TWO32), _TWO32).astype(np.uint64)
    return thresh, alias


def _window_atoms(alpha: float, window: int):
    ax = np.arange(-window, window + 1)
    xx, yy = np.meshgrid(ax, ax, indexing="ij")
    pts = np.stack([xx.ravel(), yy.ravel()], axis=1).astype(np.int64)
    w = _poly_weight((pts.astype(float) ** 2).sum(axis=1), alpha)
    return pts, w / w.sum()


def pack_laws(laws: Sequence[JumpLaw], dim: int) -> LawTable:
    """Concatenate laws into flat arrays consumable by the numba kernels."""
    n = len(laws)
    kinds = np.zeros(n, np.int64)
    fpar = np.zeros((n, 4))
    ipar = np.zeros((n, 4), np.int64)
    atom_blocks, thr_blocks, alias_blocks = [], [], []
    off = 0
    for i, law in enumerate(laws):
        if law.dim != dim:
            raise ConfigError(f"law {law.kind} has dimension {law.dim}, walk has {dim}")
        if law.is_finite or law.kind == "PolynomialTail":
            if law.is_finite:
                pts = np.array([x for x, _ in law.atoms], dtype=np.int64).reshape(-1, dim)
                if np.abs(pts).max(initial=0) > CATEGORICAL_ATOM_LIMIT:
                    raise ConfigError(f"{law.kind} atoms must have coordinates of size at most 2**61")
                probs = np.array([p for _, p in law.atoms])
                kinds[i] = K_CAT
            else:
                pts, probs = _window_atoms(law.alpha, law.window)
                kinds[i] = K_POLY
                a = law.alpha
                w1 = law.window + 1
                fpar[i] = (a, _poly_window_probability(a, law.window),
                           8.0 * ((w1 + 1.0) / w1) ** (1.0 + a) / (a * w1 ** a), 0.0)
                ipar[i, 2] = law.window
            thr, al = _alias_table(probs)
            atom_blocks.append(pts)
            thr_blocks.append(thr)
            alias_blocks.append(al + off)
            ipar[i, 0] = off
            ipar[i, 1] = len(pts)
            ipar[i, 3] = _lemire_threshold(len(pts))
            off += len(pts)
        elif law.kind == "LogLogRadial":
            kinds[i] = K_LOGLOG
            fpar[i, 0] = law.scale
            ipar[i, 1] = 2 * dim
            ipar[i, 3] = _lemire_threshold(2 * dim)
        elif law.kind == "RegVaryingRadial":
            kinds[i] = K_ZETA
            fpar[i] = (law.alpha, law.c_plus, 2.0 ** law.alpha, 0.0)
        else:  # pragma: no cover - guarded by constructors
            raise ConfigError(f"cannot pack law kind {law.kind}")
    atoms = np.concatenate(atom_blocks) if atom_blocks else np.zeros((0, dim), np.int64)
    thresh = np.concatenate(thr_blocks) if thr_blocks else np.zeros(0, np.uint64)
    alias = np.concatenate(alias_blocks) if alias_blocks else np.zeros(0, np.int64)
    return LawTable(kinds, fpar, ipar, np.ascontiguousarray(atoms), thresh, alias)


def _lemire_threshold(m: int) -> int:
    return (_TWO32 - m) % m


@njit(cache=True, inline="always")
def _bounded_index(m, thr, key, index, attempt):
    """Uniform integer in [0, m) by Lemire's multiply-shift with rejection (m < 2**32).

    ``thr`` is ``(2**32 - m) % m``, precomputed because a runtime 64-bit
    modulo per draw costs more than the rest of the step.
    """
    mm = np.uint64(m)
    thr = np.uint64(thr)
    while True:
        u = _rng.draw_u64(key, _rng.block_counter(index, attempt))
        attempt += 1
        prod = (u >> np.uint64(32)) * mm
        if (prod & np.uint64(0xFFFFFFFF)) >= thr:
            return np.int64(prod >> np.uint64(32)), attempt, u


@njit(cache=True, inline="always")
def _categorical_index(off, m, thr, thresh, alias, key, index, attempt):
    j, attempt, u = _bounded_index(m, thr, key, index, attempt)
    c = off + j
    # branchless alias coin: the branch is unpredictable by construction
    flip = np.int64((u & np.uint64(0xFFFFFFFF)) >= thresh[c])
    return c + flip * (alias[c] - c), attempt


@njit(cache=True)
def draw_increment(kinds, fpar, ipar, atoms, thresh, alias, li, key, index, out, info):
    """Write increment number ``index`` of law ``li`` into ``out``.

    Returns 0 on success and 1 when the jump saturates; in that case ``out``
    holds a clamped axis vector of magnitude 2**62 and ``info[0]`` the
    log-log of the real-valued radius.
    """
    d = out.shape[0]
    for j in range(d):
        out[j] = 0
    kind = kinds[li]
    if kind == 0:
        c, _ = _categorical_index(ipar[li, 0], ipar[li, 1], ipar[li, 3], thresh, alias, key, index, 0)
        for j in range(d):
            out[j] = atoms[c, j]
        return 0
    if kind == 1:
        a = fpar[li, 0]
        u = _rng.u01_open_left(_rng.draw_u64(key, _rng.block_counter(index, 0)))
        ll = a / u
        direction, _, _ = _bounded_index(ipar[li, 1], ipar[li, 3], key, index, 1)
        axis = direction // 2
        sign = 1 if direction % 2 == 0 else -1
        if ll > _LOGLOG_SAT:
            out[axis] = sign * COORD_LIMIT
            info[0] = ll
            return 1
        r = math.floor(math.exp(math.exp(ll)) + 0.5)
        if r > _LIMIT_F:
            out[axis] = sign * COORD_LIMIT
            info[0] = ll
            return 1
        out[axis] = sign * np.int64(r)
        return 0
    if kind == 2:
        alpha = fpar[li, 0]
        b = fpar[li, 2]
        attempt = 1
        while True:
            u = _rng.u01_open_left(_rng.draw_u64(key, _rng.block_counter(index, attempt)))
            v = _rng.u01_open_right(_rng.draw_u64(key, _rng.block_counter(index, attempt + 1)))
            attempt += 2
            x = math.floor(u ** (-1.0 / alpha))
            t = math.exp(alpha * math.log1p(1.0 / x))
            if v * x * (t - 1.0) / (b - 1.0) <= t / b:
                break
        s = _rng.u01_open_right(_rng.draw_u64(key, _rng.block_counter(index, 0)))
        sign = 1 if s < fpar[li, 1] else -1
        if x > _LIMIT_F:
            out[0] = sign * COORD_LIMIT
            info[0] = math.log(math.log(x))
            return 1
        out[0] = sign * np.int64(x)
        return 0
    # polynomial tail on Z^2: exact window alias plus dyadic-free shell rejection beyond it
    alpha = fpar[li, 0]
    u = _rng.u01_open_right(_rng.draw_u64(key, _rng.block_counter(index, 0)))
    if u < fpar[li, 1]:
        c, _ = _categorical_index(ipar[li, 0], ipar[li, 1], ipar[li, 3], thresh, alias, key, index, 1)
        out[0] = atoms[c, 0]
        out[1] = atoms[c, 1]
        return 0
    w1 = float(ipar[li, 2] + 1)
    bound = fpar[li, 2]
    attempt = 1
    while True:
        v = _rng.u01_open_left(_rng.draw_u64(key, _rng.block_counter(index, attempt)))
        acc = _rng.u01_open_right(_rng.draw_u64(key, _rng.block_counter(index, attempt + 1)))
        pick = _rng.u01_open_right(_rng.draw_u64(key, _rng.block_counter(index, attempt + 2)))
        attempt += 3
        r = math.floor(w1 * v ** (-1.0 / alpha))
        if r > _LIMIT_F:
            sign = 1 if pick < 0.5 else -1
            out[0] = sign * COORD_LIMIT
            info[0] = math.log(math.log(r))
            return 1
        ri = np.int64(r)
        k = np.int64(pick * 8.0 * r)
        side = k // (2 * ri)
        o = k % (2 * ri)
        if side == 0:
            x0, y0 = -ri + o, ri
        elif side == 1:
            x0, y0 = ri, ri - o
        elif side == 2:
            x0, y0 = ri - o, -ri
        else:
            x0, y0 = -ri, -ri + o
        pr = (w1 / r) ** alpha * (-math.expm1(-alpha * math.log1p(1.0 / r)))
        rad2 = float(x0) * float(x0) + float(y0) * float(y0)
        weight = 1.0 / (1.0 + rad2 ** (1.0 + alpha / 2.0))
        if acc * bound * pr / (8.0 * r) < weight:
            out[0] = x0
            out[1] = y0
            return 0


@njit(cache=True)
def _draw_many(kinds, fpar, ipar, atoms, thresh, alias, li, key, start, count, d):
    out = np.zeros((count, d), np.int64)
    sat = np.zeros(count, np.bool_)
    buf = np.zeros(d, np.int64)
    info = np.zeros(1)
    for i in range(count):
        s = draw_increment(kinds, fpar, ipar, atoms, thresh, alias, li, key, start + i, buf, info)
        sat[i] = s == 1
        for j in range(d):
            out[i, j] = buf[j]
    return out, sat


@lru_cache(maxsize=256)
def packed(law: JumpLaw) -> LawTable:
    return pack_laws([law], law.dim)


def sample_at(law: JumpLaw, key: int, index: int) -> LatticePoint:
    """Increment number ``index`` of the stream with the given key."""
    t = packed(law)
    buf = np.zeros(law.dim, np.int64)
    info = np.zeros(1)
    status = draw_increment(*t, 0, np.uint64(key), index, buf, info)
    if status == 1:
        raise SaturationError(float(info[0]))
    return tuple(int(c) for c in buf)


def sample(law: JumpLaw, stream: _rng.Stream) -> LatticePoint:
    """Draw the next increment from ``stream`` and advance it."""
    try:
        return sample_at(law, stream.key, stream.index)
    finally:
        stream.index += 1


def sample_many(law: JumpLaw, key: int, count: int, start: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Increments ``start .. start+count-1``; returns (increments, saturated mask)."""
    t = packed(law)
    return _draw_many(*t, 0, np.uint64(key), start, count, law.dim)


# --------------------------------------------------------------------------
# exact tails, pmfs, moments

def loglog_radius_tail(a: float, t: float) -> float:
    """P{R > t} for the continuous radius R = exp(exp(a/U))."""
    if t < math.exp(math.exp(a)):
        return 1.0
    return min(1.0, a / math.log(math.log(t)))


def tail(law: JumpLaw, t: float, norm_kind: str = "euclidean") -> float:
    """Exact P{|xi| > t}.

    PolynomialTail has no closed form; ``tail_bracket`` returns an interval
    for it (and a degenerate interval for every other kind).
    """
    if t <= 0:
        raise ValueError("t must be positive")
    if law.is_finite:
        return float(math.fsum(p for x, p in law.atoms if norm(x, norm_kind) > t))
    if law.kind == "LogLogRadial":
        # radius is rounded to an integer r, and r > t iff R >= floor(t) + 1/2
        return loglog_radius_tail(law.scale, math.floor(t) + 0.5)
    if law.kind == "RegVaryingRadial":
        a = 1.0 + law.alpha
        return float(special.zeta(a, math.floor(t) + 1) / special.zeta(a, 1))
    raise TailUnavailable(f"no closed-form tail for {law.kind}; use tail_bracket()")


def tail_from_log(law: JumpLaw, log_t: float) -> float:
    """LogLogRadial tail at t = exp(log_t), usable far beyond double range."""
    if law.kind != "LogLogRadial":
        raise TailUnavailable("tail_from_log is only defined for LogLogRadial")
    if log_t < 700:
        return tail(law, math.exp(log_t))
    # rounding is immaterial at this scale
    if log_t < math.exp(law.scale):
        return 1.0
    return min(1.0, law.scale / math.log(log_t))


def tail_bracket(law: JumpLaw, t: float, norm_kind: str = "euclidean") -> tuple[float, float]:
    if law.kind != "PolynomialTail":
        v = tail(law, t, norm_kind)
        return v, v
    shell, lo, hi, _ = _poly_normalization(law.alpha, law.window)
    r0 = len(shell) - 1
    inner = shell.sum()
    if t >= r0:
        raise TailUnavailable(f"PolynomialTail bracket only for t < {r0}")
    # mass inside the square |x|_sup <= r0 with norm <= t
    m = int(math.floor(t))
    ax = np.arange(-m, m + 1, dtype=float)
    xx, yy = np.meshgrid(ax, ax, indexing="ij")
    if norm_kind == "sup":
        sel = np.ones_like(xx, dtype=bool)
    else:
        sel = xx ** 2 + yy ** 2 <= t * t
    near = _poly_weight(xx[sel] ** 2 + yy[sel] ** 2, law.alpha).sum()
    far_inside = inner - near
    return ((far_inside + lo) / (inner + lo), (far_inside + hi) / (inner + hi))


def pmf(law: JumpLaw, x: Sequence[int]) -> float:
    x = tuple(int(c) for c in x)
    if len(x) != law.dim:
        raise ValueError("dimension mismatch")
    if law.is_finite:
        return dict(law.atoms).get(x, 0.0)
    if law.kind == "RegVaryingRadial":
        n = x[0]
        if n == 0:
            return 0.0
        c = law.c_plus if n > 0 else 1.0 - law.c_plus
        return c * abs(n) ** (-1.0 - law.alpha) / float(special.zeta(1.0 + law.alpha, 1))
    if law.kind == "LogLogRadial":
        nz = [c for c in x if c != 0]
        if len(nz) != 1:
            return 0.0
        r = abs(nz[0])
        p = loglog_radius_tail(law.scale, r - 0.5) - loglog_radius_tail(law.scale, r + 0.5)
        return p / (2 * law.dim)
    shell, _, _, mid = _poly_normalization(law.alpha, law.window)
    return float(_poly_weight(np.float64(sum(c * c for c in x)), law.alpha) / (shell.sum() + mid))


def support_within(law: JumpLaw, radius: int) -> tuple[list[LatticePoint], bool]:
    """Atoms of sup-norm <= radius, and whether that list is the whole support."""
    if law.is_finite:
        pts = [x for x, _ in law.atoms if max(abs(c) for c in x) <= radius]
        return pts, len(pts) == len(law.atoms)
    if law.kind == "RegVaryingRadial":
        pts = [(n,) for n in range(-radius, radius + 1) if n != 0 and pmf(law, (n,)) > 0]
        return pts, False
    if law.kind == "LogLogRadial":
        rmin = math.ceil(math.exp(math.exp(law.scale)) - 0.5)
        pts = []
        for r in range(max(rmin, 1), radius + 1):
            for e in _unit_vectors(law.dim):
                pts.append(tuple(r * c for c in e))
        return pts, False
    ax = range(-radius, radius + 1)
    return [p for p in product(ax, ax)], False


def mean_and_covariance(law: JumpLaw) -> tuple[np.ndarray, CovarianceMatrix]:
    """Exact mean vector and covariance matrix."""
    if law.is_finite:
        pts = np.array([x for x, _ in law.atoms], dtype=float)
        p = np.array([q for _, q in law.atoms])
        mean = p @ pts
        centered = pts - mean
        cov = (centered * p[:, None]).T @ centered
        return mean, CovarianceMatrix(cov)
    if law.kind == "RegVaryingRadial":
        a = law.alpha
        if a <= 2:
            raise MomentUnavailable(f"second moment infinite for tail index {a} <= 2")
        z = special.zeta(1 + a, 1)
        m1 = (2 * law.c_plus - 1) * special.zeta(a, 1) / z
        m2 = special.zeta(a - 1, 1) / z
        return np.array([m1]), CovarianceMatrix([[m2 - m1 * m1]])
    if law.kind == "PolynomialTail":
        if law.alpha <= 2:
            raise MomentUnavailable(f"second moment infinite for alpha {law.alpha} <= 2")
        shell, _, _, mid = _poly_normalization(law.alpha, law.window)
        r0 = len(shell) - 1
        ax = np.arange(-r0, r0 + 1, dtype=float)
        second = 0.0
        for x in ax:
            r2 = x * x + ax * ax
            second += (r2 * _poly_weight(r2, law.alpha)).sum()
        # remainder beyond the square, radial approximation
        tail_second = 2 * math.pi * r0 ** (2 - law.alpha) / (law.alpha - 2)
        var = 0.5 * (second + tail_second) / (shell.sum() + mid)
        return np.zeros(2), CovarianceMatrix(np.eye(2) * var)
    raise MomentUnavailable(f"{law.kind} has no finite moments of the needed order")
