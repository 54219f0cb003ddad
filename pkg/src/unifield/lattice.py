"""Sites, boxes and boundaries of the oriented square lattice.

Every site ``(i, j)`` has the two parents ``(i - 1, j)`` and ``(i, j - 1)``.
Regions are plain (frozen) sets of :class:`Site`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple


class Site(NamedTuple):
    i: int
    j: int


Region = frozenset


@dataclass(frozen=True)
class Box:
    """The window ``{1..m} x {1..n}``."""

    m: int
    n: int

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError(f"box dimensions must be >= 1, got {self.m}x{self.n}")

    def sites(self) -> list[Site]:
        return [Site(i, j) for i in range(1, self.m + 1) for j in range(1, self.n + 1)]

    @property
    def region(self) -> frozenset:
        return frozenset(self.sites())

    def __contains__(self, s) -> bool:
        return 1 <= s[0] <= self.m and 1 <= s[1] <= self.n

    def __len__(self) -> int:
        return self.m * self.n

    def internal_boundary(self) -> list[Site]:
        """Left column and bottom row, without building the whole region."""
        out = [Site(1, j) for j in range(1, self.n + 1)]
        out += [Site(i, 1) for i in range(2, self.m + 1)]
        return out

    def row_major(self) -> list[Site]:
        """Sites row by row (``j`` outer, ``i`` inner); the outcome order used in files."""
        return [Site(i, j) for j in range(1, self.n + 1) for i in range(1, self.m + 1)]


def parents_of(s) -> tuple[Site, Site]:
    i, j = s
    return Site(i - 1, j), Site(i, j - 1)


def external_boundary(r: Iterable) -> frozenset:
    r = r if isinstance(r, (set, frozenset)) else set(r)
    out = set()
    for i, j in r:
        for p in ((i - 1, j), (i, j - 1)):
            if p not in r:
                out.add(Site(*p))
    return frozenset(out)


def internal_boundary(r: Iterable) -> frozenset:
    r = r if isinstance(r, (set, frozenset)) else set(r)
    return frozenset(
        Site(i, j) for i, j in r if (i - 1, j) not in r or (i, j - 1) not in r
    )


def order_key(s) -> tuple[int, int]:
    return s[0] + s[1], s[0]


def increasing_order(r: Iterable) -> list[Site]:
    """Sort by anti-diagonal, then by ``i``; parents always come first."""
    return [Site(*s) for s in sorted(r, key=order_key)]
