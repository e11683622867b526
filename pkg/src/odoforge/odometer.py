"""Truncated G-odometers: points, the left action, clopen cells and Haar measure."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

from .group_core import ChainError, GroupWord, QuotientChain


@dataclass(frozen=True, slots=True)
class OdometerPoint:
    """(c_1, ..., c_N): one coset cell per level, compatible under projection."""

    cells: tuple[int, ...]

    @property
    def depth(self) -> int:
        return len(self.cells)

    def level(self, n: int) -> int:
        return self.cells[n - 1]

    def truncate(self, n: int) -> "OdometerPoint":
        return OdometerPoint(self.cells[:n])


@dataclass(frozen=True, slots=True)
class ClopenCell:
    """The basic clopen set g C_n."""

    level: int
    translator: GroupWord


def make_point(chain: QuotientChain, cells: Sequence[int]) -> OdometerPoint:
    cells = tuple(int(c) for c in cells)
    if len(cells) > chain.depth:
        raise ChainError(f"point has {len(cells)} levels, chain depth is {chain.depth}")
    for n, c in enumerate(cells, 1):
        if not 0 <= c < chain.index(n):
            raise ChainError(f"cell {c} out of range at level {n}")
    for n in range(1, len(cells)):
        if chain.project(n, cells[n]) != cells[n - 1]:
            raise ChainError(f"incompatible cells at levels {n}/{n + 1}: {cells}")
    return OdometerPoint(cells)


def point_from_top(chain: QuotientChain, cell: int, depth: int | None = None) -> OdometerPoint:
    """The unique depth-N point whose level-N cell is ``cell``."""
    depth = chain.depth if depth is None else depth
    out = [cell]
    for n in range(depth - 1, 0, -1):
        out.append(chain.project(n, out[-1]))
    return OdometerPoint(tuple(reversed(out)))


def basepoint(chain: QuotientChain, depth: int | None = None) -> OdometerPoint:
    depth = chain.depth if depth is None else depth
    return OdometerPoint(tuple(chain.base(n) for n in range(1, depth + 1)))


def orbit_point(chain: QuotientChain, g: GroupWord, depth: int | None = None) -> OdometerPoint:
    """tau(g) = (g Gamma_n)_n."""
    depth = chain.depth if depth is None else depth
    return OdometerPoint(tuple(chain.cell_of(n, g) for n in range(1, depth + 1)))


def act(chain: QuotientChain, g: GroupWord, z: OdometerPoint) -> OdometerPoint:
    chain.check_word(g)
    if z.depth == 0:
        return z
    # act at the top level and project: one pass over the word
    top = chain.act(z.depth, g, z.cells[-1])
    return point_from_top(chain, top, z.depth)


def all_points(chain: QuotientChain, depth: int | None = None) -> Iterator[OdometerPoint]:
    """Every depth-N point, in order of the level-N cell."""
    depth = chain.depth if depth is None else depth
    for c in chain.cells(depth):
        yield point_from_top(chain, c, depth)


def cell_measure(chain: QuotientChain, cell: ClopenCell) -> Fraction:
    chain._check_level(cell.level)
    return Fraction(1, chain.index(cell.level))


def in_cell(chain: QuotientChain, z: OdometerPoint, cell: ClopenCell) -> bool:
    if cell.level > z.depth:
        raise ChainError(f"cell level {cell.level} exceeds point depth {z.depth}")
    return z.level(cell.level) == chain.cell_of(cell.level, cell.translator)


def partition(chain: QuotientChain, n: int, translators: Sequence[GroupWord]) -> list[ClopenCell]:
    """The cells d C_n for d in ``translators`` (normally D_n^{-1})."""
    return [ClopenCell(n, t) for t in translators]


def free_orbit_certificate(chain: QuotientChain, z: OdometerPoint, radius: int) -> list[GroupWord]:
    """Nontrivial words of length <= radius fixing z at its depth.

    An empty list is the bounded certificate that no short word stabilises z.
    """
    ident = chain.identity()
    return [g for g in chain.ball(radius) if g != ident and act(chain, g, z) == z]
