"""Lattice points, norms, covariance matrices and membranes."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import ConfigError, LatticeOverflowError

if TYPE_CHECKING:
    from .laws import JumpLaw

MAX_DIM = 8
# Largest coordinate magnitude a walk may reach; leaves head-room so that
# adding any admissible increment cannot wrap a signed 64-bit integer.
COORD_LIMIT = 1 << 62

LatticePoint = tuple[int, ...]


def point(coords: Iterable[int]) -> LatticePoint:
    """Validate and normalize coordinates into a ``LatticePoint``."""
    out = []
    for c in coords:
        if isinstance(c, bool) or not isinstance(c, (int, np.integer)):
            if isinstance(c, float) and c.is_integer():
                c = int(c)
            else:
                raise ConfigError(f"lattice coordinates must be integers, got {c!r}")
        c = int(c)
        if abs(c) > COORD_LIMIT:
            raise LatticeOverflowError(f"coordinate {c} outside +-2**62")
        out.append(c)
    if not 1 <= len(out) <= MAX_DIM:
        raise ConfigError(f"dimension must be in 1..{MAX_DIM}, got {len(out)}")
    return tuple(out)


def origin(dim: int) -> LatticePoint:
    return (0,) * dim


def sup_norm(x: Sequence[int]) -> int:
    return max((abs(int(c)) for c in x), default=0)


def euclidean_norm(x: Sequence[int]) -> float:
    return math.sqrt(sum(int(c) * int(c) for c in x))


NORMS = {"sup": sup_norm, "euclidean": euclidean_norm}


def norm(x: Sequence[int], which: str = "euclidean") -> float:
    try:
        return NORMS[which](x)
    except KeyError:
        raise ConfigError(f"unknown norm {which!r}; expected 'sup' or 'euclidean'") from None


@dataclass(frozen=True)
class CovarianceMatrix:
    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("covariance must be a square matrix")
        if not np.allclose(a, a.T, rtol=0, atol=1e-12):
            raise ValueError("covariance must be symmetric")
        if np.linalg.eigvalsh(a).min() < -1e-12:
            raise ValueError("covariance must be positive semidefinite")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.entries))

    @property
    def nondegenerate(self) -> bool:
        return self.det > 1e-14


@dataclass(frozen=True)
class Membrane:
    """Finite set A of perturbed points with their kick laws.

    Points are kept sorted so that the stream family tag of each point
    (its position in the sorted order, plus one) is canonical.
    """

    entries: tuple[tuple[LatticePoint, "JumpLaw"], ...] = ()
    _index: Mapping[LatticePoint, int] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        ents = sorted(((point(p), law) for p, law in self.entries), key=lambda e: e[0])
        pts = [p for p, _ in ents]
        if len(set(pts)) != len(pts):
            raise ConfigError("membrane points must be distinct")
        if len({len(p) for p in pts}) > 1:
            raise ConfigError("membrane points must share one dimension")
        for p, law in ents:
            if law.dim != len(p):
                raise ConfigError(f"kick law at {p} has dimension {law.dim}, point has {len(p)}")
        object.__setattr__(self, "entries", tuple(ents))
        object.__setattr__(self, "_index", {p: i for i, p in enumerate(pts)})

    @classmethod
    def from_mapping(cls, kicks: Mapping[Sequence[int], "JumpLaw"]) -> "Membrane":
        return cls(tuple((tuple(p), law) for p, law in kicks.items()))

    @property
    def points(self) -> list[LatticePoint]:
        return [p for p, _ in self.entries]

    @property
    def dim(self) -> int | None:
        return len(self.entries[0][0]) if self.entries else None

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, x) -> bool:
        return tuple(x) in self._index

    def __iter__(self) -> Iterator[tuple[LatticePoint, "JumpLaw"]]:
        return iter(self.entries)

    def get(self, x) -> "JumpLaw | None":
        """Kick law at ``x``, or None when ``x`` is not a membrane point."""
        i = self._index.get(tuple(x))
        return None if i is None else self.entries[i][1]

    def family_tag(self, x) -> int:
        return self._index[tuple(x)] + 1
