"""The perturbed walk: off the membrane it steps like the base walk, on it each point kicks by its own law.

Randomness follows a fixed discipline. Replicate ``r`` of a run with key
``K`` owns the key ``combine(K, r)``; inside it, family 0 feeds the base
increments and family ``j + 1`` feeds the kicks of the j-th membrane point
(sorted order). The i-th draw of a family is always the i-th element of
that family's stream, which is what makes the coupled representation
checkable by replay.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from numba import njit

from . import rng as _rng
from .errors import ConfigError, LatticeOverflowError, MemoryGuardError, PreconditionError, SaturationError
from .lattice import LatticePoint, Membrane, point, sup_norm
from .laws import JumpLaw, LawTable, _categorical_index, draw_increment, pack_laws, point_mass, sample

PATH_GUARD = 10_000_000
SAT_LOG_CAP = 64

# stop-rule bits, listed in evaluation order
STOP_HORIZON = 1
STOP_RADIUS = 2
STOP_HIT = 4
STOP_SATURATION = 8
STOP_OVERFLOW = 16

_I64_MAX = np.int64(9223372036854775807)
_SAFE = np.int64(1 << 61)

# scalar slots of the per-replicate output
S_TAU, S_SIGMA, S_RUNMAX, S_STEPS, S_STOP, S_NSAT, S_NCK = range(7)
N_SCALARS = 7


@dataclass(frozen=True)
class WalkConfig:
    """Everything that determines the law of one trajectory."""

    base: JumpLaw
    horizon: int
    start: LatticePoint | None = None
    membrane: Membrane = field(default_factory=Membrane)
    hit_set: tuple[LatticePoint, ...] = ()
    stop_on_hit: bool = False
    radius: int | None = None
    checkpoints: tuple[int, ...] = ()
    record_full_path: bool = False
    abort_on_saturation: bool = False

    def __post_init__(self):
        d = self.base.dim
        start = point(self.start) if self.start is not None else (0,) * d
        object.__setattr__(self, "start", start)
        if len(start) != d:
            raise ConfigError(f"start has dimension {len(start)}, base law has {d}", "start")
        if int(self.horizon) < 1:
            raise ConfigError("horizon must be at least 1", "horizon")
        object.__setattr__(self, "horizon", int(self.horizon))
        if self.membrane.dim not in (None, d):
            raise ConfigError(f"membrane dimension {self.membrane.dim} differs from walk dimension {d}", "membrane")
        ck = tuple(int(t) for t in self.checkpoints)
        if list(ck) != sorted(set(ck)):
            raise ConfigError("checkpoints must be strictly increasing", "checkpoints")
        if ck and (ck[0] < 0 or ck[-1] > self.horizon):
            raise ConfigError("checkpoints must lie in [0, horizon]", "checkpoints")
        object.__setattr__(self, "checkpoints", ck)
        hs = tuple(sorted({point(b) for b in self.hit_set}))
        if any(len(b) != d for b in hs):
            raise ConfigError("hit set points must match the walk dimension", "hit_set")
        object.__setattr__(self, "hit_set", hs)
        if self.radius is not None and self.radius < 0:
            raise ConfigError("radius must be nonnegative", "radius")
        if self.record_full_path and self.horizon + 1 > PATH_GUARD:
            raise MemoryGuardError(f"full path of {self.horizon + 1} points exceeds the {PATH_GUARD} guard")

    @property
    def dim(self) -> int:
        return self.base.dim


@dataclass(frozen=True)
class OccupationCounters:
    per_point: dict
    total: int


@dataclass
class TrajectorySummary:
    final: LatticePoint
    checkpoints: dict[int, LatticePoint]
    occupation: OccupationCounters
    first_hit: int | None
    first_entry: int | None
    running_max: int
    saturation_events: list[tuple[int, float]]
    steps: int
    stop_mask: int
    path: np.ndarray | None = None

    @property
    def stop_reason(self) -> str:
        for bit, name in ((STOP_OVERFLOW, "overflow"), (STOP_SATURATION, "saturation"),
                          (STOP_HORIZON, "horizon"), (STOP_RADIUS, "radius"), (STOP_HIT, "hit")):
            if self.stop_mask & bit:
                return name
        return "none"


@dataclass
class CoupledLedger:
    """Per-step record of which family fed each increment, plus the path.

    ``source[k]`` is 0 for a base draw and ``j + 1`` for a kick at the j-th
    membrane point; ``family_keys[f]`` is the stream key of family f.
    """

    source: np.ndarray
    increments: np.ndarray
    path: np.ndarray
    family_keys: tuple[int, ...]

    def replay_residual(self, config: WalkConfig) -> int:
        """Max |X(n) - X(0) - S_base(n - T(n)) - sum_x S_x(T_x(n))| over all n.

        The partial sums are rebuilt from the family streams directly, not
        from the recorded increments, so a zero residual is a real check.
        """
        from .laws import sample_many

        n = len(self.source)
        rec = np.zeros((n + 1, config.dim), np.int64)
        laws = [config.base] + [law for _, law in config.membrane]
        for f, law in enumerate(laws):
            mask = self.source == f
            uses = int(mask.sum())
            draws, _ = sample_many(law, self.family_keys[f], uses)
            counts = np.concatenate([[0], np.cumsum(mask)])  # draws consumed before time k
            partial = np.vstack([np.zeros((1, config.dim), np.int64), np.cumsum(draws, axis=0)])
            rec += partial[counts]
        expected = self.path - self.path[0]
        return int(np.max(np.abs(expected - rec))) if n else 0


# --------------------------------------------------------------------------
# kernels

@njit(cache=True, inline="always")
def _find(pos, pts):
    d = pos.shape[0]
    for j in range(pts.shape[0]):
        hit = True
        for i in range(d):
            if pts[j, i] != pos[i]:
                hit = False
                break
        if hit:
            return j
    return -1


@njit(cache=True, inline="always")
def _supnorm(pos):
    s = 0
    for i in range(pos.shape[0]):
        a = abs(pos[i])
        if a > s:
            s = a
    return s


@njit(cache=True, inline="always")
def _walk_one(kinds, fpar, ipar, atoms, thresh, alias, mpts, bpts, start, horizon, ckpts, radius,
              stop_on_hit, abort_on_sat, rep_key,
              final, ck_pos, ck_occ, visits, scalars, sat_log,
              record_path, path, record_ledger, src, incs):
    d = start.shape[0]
    m = mpts.shape[0]
    nfam = m + 1
    keys = np.empty(nfam, np.uint64)
    for f in range(nfam):
        keys[f] = _rng.combine(rep_key, np.uint64(f))
    cursor = np.zeros(nfam, np.int64)
    pos = start.copy()
    inc = np.zeros(d, np.int64)
    info = np.zeros(1)
    for j in range(m):
        visits[j] = 0
    tau = -1
    sigma = -1
    if bpts.shape[0] > 0 and _find(pos, bpts) >= 0:
        sigma = 0
    runmax = _supnorm(pos)
    nck = ckpts.shape[0]
    ci = 0
    total = 0
    while ci < nck and ckpts[ci] == 0:
        for i in range(d):
            ck_pos[ci, i] = pos[i]
        ck_occ[ci] = 0
        ci += 1
    if record_path:
        for i in range(d):
            path[0, i] = pos[i]
    nsat = 0
    stop = 0
    steps = 0
    next_ck = ckpts[ci] if ci < nck else -1
    key0 = keys[0]
    base_cat = kinds[0] == 0
    off0, m0, thr0 = ipar[0, 0], ipar[0, 1], ipar[0, 3]
    ib = 0  # base draws consumed; kept out of ``cursor`` so it stays in a register
    for k in range(horizon):
        j = _find(pos, mpts) if m > 0 else -1
        if j >= 0:
            visits[j] += 1
            total += 1
            fam = j + 1
            if kinds[fam] == 0:
                c, _ = _categorical_index(ipar[fam, 0], ipar[fam, 1], ipar[fam, 3], thresh, alias,
                                          keys[fam], cursor[fam], 0)
                for i in range(d):
                    inc[i] = atoms[c, i]
                status = 0
            else:
                status = draw_increment(kinds, fpar, ipar, atoms, thresh, alias, fam, keys[fam], cursor[fam],
                                        inc, info)
            cursor[fam] += 1
        else:
            fam = 0
            if base_cat:
                c, _ = _categorical_index(off0, m0, thr0, thresh, alias, key0, ib, 0)
                for i in range(d):
                    inc[i] = atoms[c, i]
                status = 0
            else:
                status = draw_increment(kinds, fpar, ipar, atoms, thresh, alias, 0, key0, ib, inc, info)
            ib += 1
        if status == 1:
            if nsat < sat_log.shape[0]:
                sat_log[nsat, 0] = k
                sat_log[nsat, 1] = info[0]
            nsat += 1
            if abort_on_sat:
                stop |= 8
                break
        # categorical atoms are capped at 2**61, so only heavy draws or far walks can overflow
        if kinds[fam] != 0 or runmax > _SAFE:
            bad = False
            for i in range(d):
                if (inc[i] > 0 and pos[i] > _I64_MAX - inc[i]) or (inc[i] < 0 and pos[i] < -_I64_MAX - inc[i]):
                    bad = True
            if bad:
                stop |= 16
                break
        for i in range(d):
            pos[i] += inc[i]
        t = k + 1
        steps = t
        if record_ledger:
            src[k] = fam
            for i in range(d):
                incs[k, i] = inc[i]
        if record_path:
            for i in range(d):
                path[t, i] = pos[i]
        grew = False
        for i in range(d):
            if pos[i] > runmax or pos[i] < -runmax:
                grew = True
        if grew:
            runmax = _supnorm(pos)
        if t == next_ck:
            while ci < nck and ckpts[ci] == t:
                for i in range(d):
                    ck_pos[ci, i] = pos[i]
                ck_occ[ci] = total
                ci += 1
            next_ck = ckpts[ci] if ci < nck else -1
        if t == horizon:
            stop |= 1
        if radius >= 0 and runmax > radius:
            stop |= 2
        if bpts.shape[0] > 0 and _find(pos, bpts) >= 0:
            if tau < 0:
                tau = t
            if sigma < 0:
                sigma = t
            if stop_on_hit:
                stop |= 4
        if stop != 0:
            break
    for i in range(d):
        final[i] = pos[i]
    scalars[0] = tau
    scalars[1] = sigma
    scalars[2] = runmax
    scalars[3] = steps
    scalars[4] = stop
    scalars[5] = nsat
    scalars[6] = ci


@njit(cache=True)
def _walk_batch(kinds, fpar, ipar, atoms, thresh, alias, mpts, bpts, start, horizon, ckpts, radius,
                stop_on_hit, abort_on_sat, run_key, r0, r1, sat_cap):
    d = start.shape[0]
    n = r1 - r0
    nck = ckpts.shape[0]
    m = mpts.shape[0]
    final = np.zeros((n, d), np.int64)
    ck_pos = np.zeros((n, nck, d), np.int64)
    ck_occ = np.zeros((n, nck), np.int64)
    visits = np.zeros((n, m), np.int64)
    scalars = np.zeros((n, N_SCALARS), np.int64)
    sat_ll = np.full(n, np.nan)
    sat_log = np.zeros((sat_cap, 2))
    dummy_path = np.zeros((1, d), np.int64)
    dummy_src = np.zeros(1, np.int64)
    for r in range(n):
        rep_key = _rng.combine(run_key, np.uint64(r0 + r))
        _walk_one(kinds, fpar, ipar, atoms, thresh, alias, mpts, bpts, start, horizon, ckpts, radius,
                  stop_on_hit, abort_on_sat, rep_key,
                  final[r], ck_pos[r], ck_occ[r], visits[r], scalars[r], sat_log,
                  False, dummy_path, False, dummy_src, dummy_path)
        if scalars[r, 5] > 0:
            sat_ll[r] = sat_log[0, 1]
    return final, ck_pos, ck_occ, visits, scalars, sat_ll


# --------------------------------------------------------------------------
# Python interface

def _arrays(config: WalkConfig):
    laws = [config.base] + [law for _, law in config.membrane]
    table: LawTable = pack_laws(laws, config.dim)
    d = config.dim
    mpts = np.array(config.membrane.points, np.int64).reshape(-1, d)
    bpts = np.array(config.hit_set, np.int64).reshape(-1, d)
    start = np.array(config.start, np.int64)
    ck = np.array(config.checkpoints, np.int64)
    radius = -1 if config.radius is None else int(config.radius)
    return table, mpts, bpts, start, ck, radius


def replicate_key(run_key: int, replicate: int) -> int:
    return _rng._combine_py(run_key, replicate & _rng.MASK64)


def family_keys(config: WalkConfig, run_key: int, replicate: int) -> tuple[int, ...]:
    rk = replicate_key(run_key, replicate)
    return tuple(_rng._combine_py(rk, f) for f in range(len(config.membrane) + 1))


class Streams:
    """Per-family stream cursors for stepping a walk from Python."""

    def __init__(self, config_or_membrane, run_key: int, replicate: int = 0):
        membrane = config_or_membrane.membrane if isinstance(config_or_membrane, WalkConfig) else config_or_membrane
        rk = replicate_key(run_key, replicate)
        self._membrane = membrane
        self.families = [_rng.Stream(_rng._combine_py(rk, f)) for f in range(len(membrane) + 1)]

    def for_point(self, x) -> _rng.Stream:
        if x in self._membrane:
            return self.families[self._membrane.family_tag(x)]
        return self.families[0]


def step(position: Sequence[int], membrane: Membrane, base: JumpLaw, streams: Streams) -> LatticePoint:
    """One transition of the perturbed walk; raises SaturationError on a saturated jump."""
    x = point(position)
    kick = membrane.get(x)
    law = base if kick is None else kick
    inc = sample(law, streams.for_point(x))
    return tuple(a + b for a, b in zip(x, inc))


def _summary(config, final, ck_pos, visits, scalars, sat_log, path=None) -> TrajectorySummary:
    pts = config.membrane.points
    per = {x: int(v) for x, v in zip(pts, visits)}
    nck = int(scalars[S_NCK])
    nsat = int(scalars[S_NSAT])
    return TrajectorySummary(
        final=tuple(int(c) for c in final),
        checkpoints={t: tuple(int(c) for c in ck_pos[i]) for i, t in enumerate(config.checkpoints[:nck])},
        occupation=OccupationCounters(per, sum(per.values())),
        first_hit=None if scalars[S_TAU] < 0 else int(scalars[S_TAU]),
        first_entry=None if scalars[S_SIGMA] < 0 else int(scalars[S_SIGMA]),
        running_max=int(scalars[S_RUNMAX]),
        saturation_events=[(int(sat_log[i, 0]), float(sat_log[i, 1])) for i in range(min(nsat, len(sat_log)))],
        steps=int(scalars[S_STEPS]),
        stop_mask=int(scalars[S_STOP]),
        path=path,
    )


def _run_single(config: WalkConfig, run_key: int, replicate: int, ledger: bool):
    table, mpts, bpts, start, ck, radius = _arrays(config)
    d = config.dim
    n = config.horizon
    if ledger and n + 1 > PATH_GUARD:
        raise MemoryGuardError("ledger exceeds the path guard")
    want_path = config.record_full_path or ledger
    final = np.zeros(d, np.int64)
    ck_pos = np.zeros((len(ck), d), np.int64)
    ck_occ = np.zeros(len(ck), np.int64)
    visits = np.zeros(len(mpts), np.int64)
    scalars = np.zeros(N_SCALARS, np.int64)
    sat_log = np.zeros((SAT_LOG_CAP, 2))
    path = np.zeros((n + 1 if want_path else 1, d), np.int64)
    src = np.zeros(n if ledger else 1, np.int64)
    incs = np.zeros((n if ledger else 1, d), np.int64)
    rk = np.uint64(replicate_key(run_key, replicate))
    _walk_one(*table, mpts, bpts, start, n, ck, radius, config.stop_on_hit, config.abort_on_saturation, rk,
              final, ck_pos, ck_occ, visits, scalars, sat_log, want_path, path, ledger, src, incs)
    if scalars[S_STOP] & STOP_OVERFLOW:
        raise LatticeOverflowError(f"coordinate overflow at step {int(scalars[S_STEPS]) + 1}")
    steps = int(scalars[S_STEPS])
    if scalars[S_STOP] & STOP_SATURATION:
        steps = int(sat_log[0, 0])
    summary = _summary(config, final, ck_pos, visits, scalars, sat_log,
                       path[: steps + 1] if config.record_full_path else None)
    if not ledger:
        return summary
    return summary, CoupledLedger(src[:steps], incs[:steps], path[: steps + 1], family_keys(config, run_key, replicate))


def run(config: WalkConfig, run_key: int, replicate: int = 0) -> TrajectorySummary:
    """Simulate one trajectory until the horizon or a stop rule fires."""
    return _run_single(config, run_key, replicate, ledger=False)


def coupled_run(config: WalkConfig, run_key: int, replicate: int = 0) -> tuple[TrajectorySummary, CoupledLedger]:
    """Like ``run`` but also returns the per-step ledger of increment sources."""
    return _run_single(config, run_key, replicate, ledger=True)


def auxiliary_config(config: WalkConfig, v: Sequence[int]) -> WalkConfig:
    """The chain that jumps straight to ``v`` from every membrane point."""
    v = point(v)
    if v in config.membrane:
        raise PreconditionError("the landing state v must lie outside the membrane")
    kicks = Membrane(tuple((x, point_mass(tuple(b - a for a, b in zip(x, v)))) for x, _ in config.membrane))
    return replace(config, membrane=kicks)


def run_auxiliary(config: WalkConfig, v: Sequence[int], run_key: int, replicate: int = 0) -> TrajectorySummary:
    return run(auxiliary_config(config, v), run_key, replicate)


@dataclass
class BatchResult:
    """Columnar outputs for replicates ``first .. first + count - 1``."""

    first: int
    final: np.ndarray
    checkpoint_positions: np.ndarray
    checkpoint_occupation: np.ndarray
    visits: np.ndarray
    scalars: np.ndarray
    first_saturation_loglog: np.ndarray

    @property
    def count(self) -> int:
        return len(self.final)

    @property
    def occupation(self) -> np.ndarray:
        return self.visits.sum(axis=1)

    def column(self, slot: int) -> np.ndarray:
        return self.scalars[:, slot]

    @staticmethod
    def concat(parts: Sequence["BatchResult"]) -> "BatchResult":
        parts = sorted(parts, key=lambda p: p.first)
        return BatchResult(parts[0].first, *(np.concatenate([getattr(p, f) for p in parts]) for f in
                           ("final", "checkpoint_positions", "checkpoint_occupation", "visits", "scalars",
                            "first_saturation_loglog")))


def _batch_chunk(config: WalkConfig, run_key: int, r0: int, r1: int) -> BatchResult:
    table, mpts, bpts, start, ck, radius = _arrays(config)
    out = _walk_batch(*table, mpts, bpts, start, config.horizon, ck, radius, config.stop_on_hit,
                      config.abort_on_saturation, np.uint64(run_key), r0, r1, SAT_LOG_CAP)
    res = BatchResult(r0, *out)
    bad = np.nonzero(res.scalars[:, S_STOP] & STOP_OVERFLOW)[0]
    if len(bad):
        raise LatticeOverflowError(f"coordinate overflow in replicate {r0 + int(bad[0])}")
    return res


def simulate_batch(config: WalkConfig, run_key: int, replicates: int, first: int = 0,
                   workers: int = 1) -> BatchResult:
    """Run ``replicates`` independent trajectories; output does not depend on ``workers``."""
    if replicates < 1:
        raise ValueError("need at least one replicate")
    workers = max(1, min(int(workers), replicates))
    if workers == 1:
        return _batch_chunk(config, run_key, first, first + replicates)
    edges = np.linspace(first, first + replicates, workers * 4 + 1).astype(int)
    chunks = [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futs = [pool.submit(_batch_chunk, config, run_key, a, b) for a, b in chunks]
        parts = [f.result() for f in futs]
    return BatchResult.concat(parts)


def default_workers() -> int:
    return os.cpu_count() or 1
