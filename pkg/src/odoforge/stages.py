"""Capture stages of group elements relative to an odometer point.

For a point z = (z_n Gamma_n)_n, g is captured at stage n when
g in z_n Gamma_n D_{n-1} and at no earlier stage; the captured d in D_{n-1}
is its representative. Elements never captured up to the working depth are
unresolved (the finite shadow of Aper(z)).

g in z_n Gamma_n d  <=>  Gamma_n z_n^{-1} g = Gamma_n d  <=>  g^{-1} . c_n is
the right-coset label of d, where c_n is the level-n cell of z. Since the
action commutes with projection, one lookup table indexed by top-level cells
gives the stage of every element.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .group_core import ChainError, GroupWord
from .odometer import OdometerPoint, basepoint
from .tower import TransversalTower


@dataclass(frozen=True, slots=True)
class CellResolution:
    cell: GroupWord
    stage: int | None  # None: unresolved
    rep: GroupWord | None  # d in D_{stage-1}
    depth: int

    @property
    def resolved(self) -> bool:
        return self.stage is not None


class StageTable:
    """Stage/representative lookup for labels g^{-1} . c_N at a fixed depth."""

    def __init__(self, tower: TransversalTower, depth: int | None = None):
        depth = tower.depth if depth is None else depth
        if not 0 <= depth <= tower.depth:
            raise ChainError(f"depth {depth} exceeds tower depth {tower.depth}")
        self.tower = tower
        self.chain = tower.chain
        self.depth = depth
        chain = self.chain
        # captured labels per stage: right label of d -> d, d in D_{n-1}
        self.captured: list[dict[int, GroupWord]] = [{}]
        for n in range(1, depth + 1):
            self.captured.append({chain.right_cell(n, d): d for d in tower.levels[n - 1]})
        size = chain.index(depth) if depth else 1
        self._stage: list[int | None] = [None] * size
        self._rep: list[GroupWord | None] = [None] * size
        for top in range(size):
            for n in range(1, depth + 1):
                d = self.captured[n].get(chain.descend(depth, top, n))
                if d is not None:
                    self._stage[top] = n
                    self._rep[top] = d
                    break

    def lookup(self, top_label: int) -> tuple[int | None, GroupWord | None]:
        return self._stage[top_label], self._rep[top_label]

    def _top(self, z: OdometerPoint) -> int:
        if z.depth < self.depth:
            raise ChainError(f"point depth {z.depth} < resolution depth {self.depth}")
        return z.cells[self.depth - 1]

    def resolve(self, g: GroupWord, z: OdometerPoint) -> CellResolution:
        if self.depth == 0:
            return CellResolution(g, None, None, 0)
        label = self.chain.act(self.depth, self.chain.inv(g), self._top(z))
        stage, rep = self.lookup(label)
        return CellResolution(g, stage, rep, self.depth)

    def stage(self, g: GroupWord, z: OdometerPoint | None = None) -> int | None:
        z = basepoint(self.chain, self.depth) if z is None else z
        return self.resolve(g, z).stage

    def resolve_many(self, cells: Iterable[GroupWord], z: OdometerPoint) -> dict[GroupWord, CellResolution]:
        return {g: self.resolve(g, z) for g in cells}


_TABLES: dict[tuple[int, int], StageTable] = {}


def stage_table(tower: TransversalTower, depth: int | None = None) -> StageTable:
    """Cached StageTable per (tower object, depth)."""
    depth = tower.depth if depth is None else depth
    key = (id(tower), depth)
    tab = _TABLES.get(key)
    if tab is None or tab.tower is not tower:
        tab = StageTable(tower, depth)
        _TABLES[key] = tab
    return tab


def resolve_cells(
    tower: TransversalTower, z: OdometerPoint, window: Iterable[GroupWord], depth: int | None = None
) -> dict[GroupWord, CellResolution]:
    """Minimal-stage verdict for each cell of the window, in window order."""
    depth = min(z.depth, tower.depth) if depth is None else depth
    return stage_table(tower, depth).resolve_many(window, z)


def stage_sets(tower: TransversalTower, z: OdometerPoint, window: Iterable[GroupWord], depth: int):
    """Direct set form: J_n(z) n W = (z_n Gamma_n D_{n-1} n W) minus earlier stages.

    Independent of StageTable (membership is tested level by level), used as
    a cross-check.
    """
    chain = tower.chain
    out: dict[GroupWord, int | None] = {}
    for g in window:
        out[g] = None
        for n in range(1, depth + 1):
            # g in z_n Gamma_n d  <=>  g d^{-1} Gamma_n = z_n Gamma_n
            hit = any(
                chain.act(n, chain.mul(g, chain.inv(d)), chain.base(n)) == z.level(n)
                for d in tower.levels[n - 1]
            )
            if hit:
                out[g] = n
                break
    return out

