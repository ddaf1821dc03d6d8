"""Cuboid lattice: enumeration, navigation and selection.

A cuboid fixes one consolidation choice per dimension: a hierarchy level
index (0 = finest) or ALL (dimension rolled away, encoded as ``None``).
The full lattice over dimensions with ``L_d`` levels has
``prod(L_d + 1)`` cuboids, ordered by one-step coarsening (raise one
level index by one, or drop the coarsest level to ALL).

Selection picks "interesting" cuboids: either an explicit pinned list, or
a balanced-occupancy policy that scores each candidate by the Shannon
entropy of its cell-size distribution and prefers spreading the picks
over at least two lattice levels.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .errors import LatticeError

#: refuse eager enumeration beyond this many cuboids
ENUMERATION_LIMIT = 2 ** 20


@dataclass(frozen=True)
class DimensionSpec:
    """One dimension with its hierarchy levels, finest first."""

    name: str
    levels: tuple[str, ...]

    def __post_init__(self):
        if not self.levels:
            raise LatticeError(f"dimension {self.name!r} must declare at least one level")
        if len(set(self.levels)) != len(self.levels):
            raise LatticeError(f"dimension {self.name!r} repeats a level name")


@dataclass(frozen=True)
class CuboidId:
    """Per-dimension choices in the cube's canonical dimension order.

    Each choice is a level index or ``None`` for ALL.  Instances are
    hashable and totally ordered via :func:`sort_key`.
    """

    choices: tuple[Optional[int], ...]

    def level(self) -> int:
        """Number of dimensions kept (non-ALL choices)."""
        return sum(1 for c in self.choices if c is not None)


@dataclass(frozen=True)
class CuboidLattice:
    dimensions: tuple[DimensionSpec, ...]
    cuboids: tuple[CuboidId, ...]

    def __post_init__(self):
        object.__setattr__(self, "_cuboid_set", frozenset(self.cuboids))

    def __contains__(self, c: CuboidId) -> bool:
        return c in self._cuboid_set

    @property
    def size(self) -> int:
        return len(self.cuboids)

    def dimension_index(self, name: str) -> int:
        for i, d in enumerate(self.dimensions):
            if d.name == name:
                return i
        raise LatticeError(f"unknown dimension {name!r}")

    @property
    def base(self) -> CuboidId:
        return CuboidId(tuple(0 for _ in self.dimensions))

    @property
    def apex(self) -> CuboidId:
        return CuboidId(tuple(None for _ in self.dimensions))


def lattice_size(dims: Sequence[DimensionSpec]) -> int:
    size = 1
    for d in dims:
        size *= len(d.levels) + 1
    return size


def enumerate_lattice(dims: Sequence[DimensionSpec]) -> CuboidLattice:
    """Eagerly materialize every cuboid over the given dimensions."""
    names = [d.name for d in dims]
    if len(set(names)) != len(names):
        raise LatticeError("duplicate dimension name")
    size = lattice_size(dims)
    if size > ENUMERATION_LIMIT:
        raise LatticeError(f"lattice has {size} cuboids, beyond the enumeration limit of {ENUMERATION_LIMIT}")
    per_dim = [list(range(len(d.levels))) + [None] for d in dims]
    cuboids = tuple(CuboidId(combo) for combo in itertools.product(*per_dim))
    return CuboidLattice(dimensions=tuple(dims), cuboids=cuboids)


def _check_member(lattice: CuboidLattice, c: CuboidId) -> None:
    if len(c.choices) != len(lattice.dimensions):
        raise LatticeError(f"cuboid arity {len(c.choices)} does not match {len(lattice.dimensions)} dimensions")
    if c not in lattice:
        raise LatticeError(f"cuboid with choices {c.choices!r} is not in the lattice")


def parents(lattice: CuboidLattice, c: CuboidId) -> set[CuboidId]:
    """Cuboids reached by coarsening exactly one dimension one step."""
    _check_member(lattice, c)
    out = set()
    for i, (dim, choice) in enumerate(zip(lattice.dimensions, c.choices)):
        if choice is None:
            continue
        coarser = choice + 1 if choice + 1 < len(dim.levels) else None
        out.add(CuboidId(c.choices[:i] + (coarser,) + c.choices[i + 1:]))
    return out


def children(lattice: CuboidLattice, c: CuboidId) -> set[CuboidId]:
    """Cuboids reached by refining exactly one dimension one step."""
    _check_member(lattice, c)
    out = set()
    for i, (dim, choice) in enumerate(zip(lattice.dimensions, c.choices)):
        if choice == 0:
            continue
        finer = len(dim.levels) - 1 if choice is None else choice - 1
        out.add(CuboidId(c.choices[:i] + (finer,) + c.choices[i + 1:]))
    return out


def sort_key(lattice: CuboidLattice, c: CuboidId) -> tuple[int, ...]:
    """Total order over cuboids: per dimension, level index with ALL last."""
    return tuple(len(d.levels) if choice is None else choice
                 for d, choice in zip(lattice.dimensions, c.choices))


# ---------------------------------------------------------------------------
# Selection


@dataclass(frozen=True)
class Pinned:
    cuboids: tuple[CuboidId, ...]


@dataclass(frozen=True)
class BalancedOccupancy:
    pass


SelectionPolicy = Pinned | BalancedOccupancy


def occupancy_entropy(cell_counts: Sequence[int]) -> float:
    """Shannon entropy (nats) of the cell-occupancy distribution."""
    total = sum(cell_counts)
    if total <= 0:
        return 0.0
    h = 0.0
    for n in cell_counts:
        if n > 0:
            p = n / total
            h -= p * math.log(p)
    return h


def select_cuboids(lattice: CuboidLattice,
                   cells: Mapping[CuboidId, Sequence[int]],
                   policy: SelectionPolicy,
                   k: int) -> list[CuboidId]:
    """Pick at most ``k`` interesting cuboids.

    ``Pinned`` returns the pinned list itself (truncated to ``k``; pins
    must be lattice members).  ``BalancedOccupancy`` ranks the candidates
    in ``cells`` by descending occupancy entropy, breaking ties by lower
    lattice level then lexicographic cuboid order; when ``k >= 2`` and the
    candidates span two or more levels, the result is forced to span at
    least two levels by swapping the best cuboid of an unrepresented level
    in for the worst pick.
    """
    if k < 0:
        raise LatticeError("selection count must be non-negative")
    if isinstance(policy, Pinned):
        for c in policy.cuboids:
            _check_member(lattice, c)
        return list(policy.cuboids[:k])

    ranked = sorted(cells, key=lambda c: (-occupancy_entropy(cells[c]), c.level(), sort_key(lattice, c)))
    picked = ranked[:k]
    if k >= 2 and len(picked) >= 2:
        candidate_levels = {c.level() for c in ranked}
        picked_levels = {c.level() for c in picked}
        if len(candidate_levels) >= 2 and len(picked_levels) < 2:
            alt = next((c for c in ranked if c.level() not in picked_levels), None)
            if alt is not None:
                picked[-1] = alt
    return picked


# ---------------------------------------------------------------------------
# External naming: "dim=level,dim=level"; omitted dimensions mean ALL.


def format_cuboid(dims: Sequence[DimensionSpec], c: CuboidId) -> str:
    parts = []
    for d, choice in zip(dims, c.choices):
        if choice is not None:
            parts.append(f"{d.name}={d.levels[choice]}")
    return ",".join(parts)


def parse_cuboid(dims: Sequence[DimensionSpec], text: str) -> CuboidId:
    """Parse the ``dim=level,...`` form; the empty string is the apex."""
    by_name = {d.name: i for i, d in enumerate(dims)}
    choices: list[Optional[int]] = [None] * len(dims)
    text = text.strip()
    if text:
        for part in text.split(","):
            if "=" not in part:
                raise LatticeError(f"bad cuboid component {part!r}, expected dim=level")
            name, level = (s.strip() for s in part.split("=", 1))
            if name not in by_name:
                raise LatticeError(f"unknown dimension {name!r}")
            d = dims[by_name[name]]
            if level not in d.levels:
                raise LatticeError(f"dimension {name!r} has no level {level!r} (levels: {', '.join(d.levels)})")
            choices[by_name[name]] = d.levels.index(level)
    return CuboidId(tuple(choices))
