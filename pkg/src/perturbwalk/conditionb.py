"""Aperiodicity (subgroup generated by the jump support) and accessibility checks."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from itertools import product
from typing import Sequence

from .errors import InconclusiveError
from .lattice import LatticePoint, Membrane, sup_norm
from .laws import JumpLaw, support_within

INFINITE = "infinite"


def hermite_rows(vectors: Sequence[Sequence[int]], dim: int) -> list[list[int]]:
    """Row-style Hermite normal form basis of the subgroup generated by ``vectors``.

    Exact integer arithmetic; returns the nonzero rows (upper-triangular,
    positive pivots, entries above each pivot reduced modulo it).
    """
    rows = [list(map(int, v)) for v in vectors if any(v)]
    basis: list[list[int]] = []
    col = 0
    while rows and col < dim:
        live = [r for r in rows if r[col] != 0]
        rest = [r for r in rows if r[col] == 0]
        if not live:
            col += 1
            continue
        # Euclid on column `col` until a single row carries a nonzero entry
        while len(live) > 1:
            live.sort(key=lambda r: abs(r[col]))
            piv = live[0]
            nxt = [piv]
            for r in live[1:]:
                q = r[col] // piv[col]
                r = [a - q * b for a, b in zip(r, piv)]
                (nxt if r[col] != 0 else rest).append(r)
            live = nxt
        piv = live[0]
        if piv[col] < 0:
            piv = [-a for a in piv]
        basis.append(piv)
        rows = [r for r in rest if any(r)]
        col += 1
    for i, b in enumerate(basis):
        c = next(j for j, a in enumerate(b) if a)
        for k in range(i):
            q = basis[k][c] // b[c]
            if q:
                basis[k] = [x - q * y for x, y in zip(basis[k], b)]
    return basis


def subgroup_index(vectors: Sequence[Sequence[int]], dim: int) -> int | str:
    """Index of the subgroup generated by ``vectors`` in Z^dim ("infinite" if rank < dim)."""
    basis = hermite_rows(vectors, dim)
    if len(basis) < dim:
        return INFINITE
    return math.prod(b[next(j for j, a in enumerate(b) if a)] for b in basis)


@dataclass
class ConditionBReport:
    aperiodic: bool
    accessibility_ok: bool
    generated_subgroup_index: int | str
    witness_paths: list[list[LatticePoint]] = field(default_factory=list)
    unreached: dict[LatticePoint, list[LatticePoint]] = field(default_factory=dict)
    period: int | None = None
    support_truncated: bool = False

    @property
    def strongly_aperiodic(self) -> bool | None:
        if self.period is None:
            return None
        return self.aperiodic and self.period == 1

    @property
    def holds(self) -> bool:
        return self.aperiodic and self.accessibility_ok


def _moves(law: JumpLaw, reach: int) -> list[LatticePoint]:
    pts, _ = support_within(law, reach)
    return pts


def _kick_moves(law: JumpLaw, reach: int, limit: int = 256) -> list[LatticePoint]:
    """Kick support within ``reach``, widened for laws whose mass sits far out."""
    pts = _moves(law, reach)
    while not pts and reach < limit:
        reach *= 2
        pts = _moves(law, reach)
    return pts


def condition_b_check(base: JumpLaw, membrane: Membrane, search_radius: int = 6,
                      period_nmax: int | None = None) -> ConditionBReport:
    """Decide aperiodicity exactly and check accessibility inside a window.

    Accessibility is explored by breadth-first search from each membrane
    point through the perturbed transition graph. The search may wander out
    to ``search_radius`` plus the longest kick, so a kick that overshoots the
    window can still walk back in. Window points (``sup_norm <= search_radius``)
    outside A that are never reached are reported per starting point.
    """
    d = base.dim
    gens, complete = support_within(base, search_radius)
    index = subgroup_index(gens, d)
    if index != 1 and not complete:
        raise InconclusiveError(
            f"support truncated at radius {search_radius} and generated subgroup index is {index}")
    aperiodic = index == 1

    reach = 2 * search_radius
    base_moves = _moves(base, reach)
    kick_moves = {x: _kick_moves(law, reach) for x, law in membrane}
    # let the search leave the window far enough to come back after a long kick
    longest = max((sup_norm(m) for ms in kick_moves.values() for m in ms), default=0)
    bound = search_radius + max(longest, max(sup_norm(m) for m in base_moves))
    window = [p for p in product(range(-search_radius, search_radius + 1), repeat=d)]
    targets = {p for p in window if p not in membrane}

    unreached: dict[LatticePoint, list[LatticePoint]] = {}
    witnesses: list[list[LatticePoint]] = []
    for a, _ in membrane:
        parent = {a: None}
        queue = deque([a])
        while queue:
            x = queue.popleft()
            for mv in kick_moves.get(x, base_moves):
                y = tuple(u + v for u, v in zip(x, mv))
                if y not in parent and sup_norm(y) <= bound:
                    parent[y] = x
                    queue.append(y)
        missing = sorted(targets - parent.keys())
        if missing:
            unreached[a] = missing
        far = max((p for p in parent if sup_norm(p) <= search_radius), key=lambda p: (sup_norm(p), p))
        path = [far]
        while parent[path[-1]] is not None:
            path.append(parent[path[-1]])
        witnesses.append(path[::-1])

    period = None
    if base.is_finite:
        from .oracle import period_of_support

        period = period_of_support(base, period_nmax)
    return ConditionBReport(
        aperiodic=aperiodic,
        accessibility_ok=not unreached,
        generated_subgroup_index=index,
        witness_paths=witnesses,
        unreached=unreached,
        period=period,
        support_truncated=not complete,
    )
