"""Toeplitz arrays over G marked by capture stage, and their period calculus.

The array x has x(g) = marking[min(g)], min(g) the capture stage of g at the
basepoint; cells not captured by the generation depth are holes. A translate
y = t.x is stored with its translator: y(k) = x(t^{-1} k).

Per(y, Gamma_n, alpha) is evaluated window-relatively: a right coset
Gamma_n k qualifies when at least two of its resolved cells are visible and
all of them carry alpha. Holes are skipped.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .group_core import ChainError, GroupWord
from .odometer import OdometerPoint, make_point
from .stages import stage_table
from .tower import TransversalTower


class _Hole:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self) -> str:
        return "HOLE"


HOLE = _Hole()


class InconclusiveLayout(ValueError):
    """The window does not single out one odometer cell."""


def parity_marking(depth: int, odd: str = "a", even: str = "b") -> dict[int, str]:
    return {n: odd if n % 2 else even for n in range(1, depth + 1)}


@dataclass(frozen=True)
class ToeplitzWindow:
    tower: TransversalTower = field(repr=False)
    depth: int
    marking: tuple[tuple[int, str], ...]
    alphabet: tuple[str, ...]
    cells: tuple[GroupWord, ...]
    values: tuple  # str or HOLE, aligned with cells
    stages: tuple  # int or None, aligned with cells
    translator: GroupWord

    @property
    def chain(self):
        return self.tower.chain

    def value(self, g: GroupWord):
        return self.values[self._index()[g]]

    def stage(self, g: GroupWord) -> int | None:
        return self.stages[self._index()[g]]

    def _index(self) -> dict[GroupWord, int]:
        idx = self.__dict__.get("_idx")
        if idx is None:
            idx = {g: i for i, g in enumerate(self.cells)}
            object.__setattr__(self, "_idx", idx)
        return idx

    def holes(self) -> list[GroupWord]:
        return [g for g, v in zip(self.cells, self.values) if v is HOLE]

    def items(self):
        return zip(self.cells, self.values)

    def text(self) -> str:
        return "".join("?" if v is HOLE else v for v in self.values)


def generate_toeplitz(
    tower: TransversalTower,
    marking: Mapping[int, str],
    depth: int,
    window: Sequence[GroupWord],
    translator: GroupWord | None = None,
    alphabet: Sequence[str] | None = None,
) -> ToeplitzWindow:
    """The window of t.x, x the stage-marked array at the basepoint (t = 1_G by default)."""
    chain = tower.chain
    missing = [n for n in range(1, depth + 1) if n not in marking]
    if missing:
        raise ChainError(f"marking undefined for stages {missing}")
    alphabet = tuple(sorted(set(marking[n] for n in range(1, depth + 1)))) if alphabet is None else tuple(alphabet)
    if len(alphabet) < 2:
        raise ChainError("alphabet needs at least two symbols")
    if any(marking[n] not in alphabet for n in range(1, depth + 1)):
        raise ChainError("marking uses symbols outside the alphabet")
    t = chain.identity() if translator is None else translator
    tinv = chain.inv(t)
    table = stage_table(tower, depth)
    cells = tuple(window)
    stages = []
    values = []
    base = chain.base(depth) if depth else 0
    for k in cells:
        if depth == 0:
            s = None
        else:
            # stage of t^{-1} k at the basepoint: label k^{-1} t . x_0
            s, _ = table.lookup(chain.act(depth, chain.inv(chain.mul(tinv, k)), base))
        stages.append(s)
        values.append(HOLE if s is None else marking[s])
    return ToeplitzWindow(
        tower, depth, tuple(sorted((n, marking[n]) for n in range(1, depth + 1))), alphabet,
        cells, tuple(values), tuple(stages), t,
    )


def translate(x: ToeplitzWindow, h: GroupWord, window: Sequence[GroupWord] | None = None) -> ToeplitzWindow:
    """h.x, i.e. (h.x)(k) = x(h^{-1} k), on the given window (default: same cells)."""
    chain = x.chain
    return generate_toeplitz(
        x.tower, dict(x.marking), x.depth, x.cells if window is None else window,
        chain.mul(h, x.translator), x.alphabet,
    )


def restrict(x: ToeplitzWindow, window: Sequence[GroupWord]) -> ToeplitzWindow:
    return translate(x, x.chain.identity(), window)


# ---------------------------------------------------------------------------
# window property and hole density


def window_property_violations(x: ToeplitzWindow) -> list[tuple[GroupWord, GroupWord]]:
    """Pairs (g, h) in W with h in t Gamma_s t^{-1} g, s = stage of g, but x(h) != x(g).

    For the untranslated array the conjugate is Gamma_s itself.
    """
    chain = x.chain
    tinv = chain.inv(x.translator)
    out = []
    by_stage: dict[int, dict[int, list[GroupWord]]] = {}
    for s in sorted({s for s in x.stages if s is not None}):
        groups: dict[int, list[GroupWord]] = defaultdict(list)
        for k in x.cells:
            groups[chain.right_cell(s, chain.mul(tinv, k))].append(k)
        by_stage[s] = groups
    for g, v, s in zip(x.cells, x.values, x.stages):
        if s is None:
            continue
        for h in by_stage[s][chain.right_cell(s, chain.mul(tinv, g))]:
            if x.value(h) != v:
                out.append((g, h))
    return out


@dataclass(frozen=True)
class HoleDensity:
    count: int  # cells of D_M captured at a stage in (N, M] or never
    window: int  # |D_M|
    bound: Fraction  # |D_M| * sum_{N<m<=M} |D_{m-1}|/|D_m|, plus uncaptured cells
    uncaptured: int

    @property
    def ok(self) -> bool:
        return self.count - self.uncaptured <= self.bound


def hole_density(tower: TransversalTower, n: int, m: int | None = None) -> HoleDensity:
    """Holes of the depth-n array inside the window D_M.

    Each stage j fills at most |D_M| |D_{j-1}|/|D_j| cells of D_M (D_M meets
    every Gamma_j-coset in [Gamma_j : Gamma_M] cells), so the cells first
    captured at stages n+1..M number at most |D_M| sum_{n<j<=M} |D_{j-1}|/|D_j|.
    """
    m = tower.depth if m is None else m
    if not 0 <= n <= m <= tower.depth:
        raise ChainError(f"need 0 <= n <= M <= {tower.depth}")
    table = stage_table(tower, m)
    chain = tower.chain
    late = uncaptured = 0
    for g in tower.levels[m]:
        s, _ = table.lookup(chain.right_cell(m, g)) if m else (None, None)
        if s is None:
            uncaptured += 1
            late += 1
        elif s > n:
            late += 1
    size = tower.size(m)
    bound = sum((Fraction(size * tower.size(j - 1), tower.size(j)) for j in range(n + 1, m + 1)), Fraction(0))
    return HoleDensity(late, size, bound, uncaptured)


# ---------------------------------------------------------------------------
# Per sets


@dataclass(frozen=True)
class PeriodReport:
    level: int
    sets: dict  # symbol -> tuple of cells (window order)
    conjugator: GroupWord | None = None
    classes: tuple = ()  # sorted (orbit label, symbol) of the qualifying orbits

    def union(self) -> set[GroupWord]:
        return set().union(*self.sets.values()) if self.sets else set()

    def layout(self) -> tuple:
        """The qualifying orbits with their symbols; holes do not change it."""
        return self.classes


def _orbit_label(chain, n: int, k: GroupWord, conj_inv: GroupWord | None) -> int:
    return chain.right_cell(n, k if conj_inv is None else chain.mul(conj_inv, k))


def per_sets(x: ToeplitzWindow, n: int, conj: GroupWord | None = None) -> PeriodReport:
    """Window form of Per(x, Gamma_n, alpha) for each alpha.

    With ``conj`` = c the orbits are those of c Gamma_n c^{-1}.
    """
    chain = x.chain
    chain._check_level(n)
    cinv = None if conj is None else chain.inv(conj)
    orbits: dict[int, list[tuple[GroupWord, object]]] = defaultdict(list)
    for k, v in zip(x.cells, x.values):
        if v is not HOLE:
            orbits[_orbit_label(chain, n, k, cinv)].append((k, v))
    member: dict[GroupWord, str] = {}
    classes = []
    for label, pts in orbits.items():
        syms = {v for _, v in pts}
        if len(pts) >= 2 and len(syms) == 1:
            (a,) = syms
            classes.append((label, a))
            for k, _ in pts:
                member[k] = a
    sets = {a: tuple(k for k in x.cells if member.get(k) == a) for a in x.alphabet}
    return PeriodReport(n, sets, conj, tuple(sorted(classes)))


@dataclass(frozen=True)
class Essential:
    radius: int
    # one (g, w) per scanned g: w in W with g w in a Per class of the wrong symbol
    certificate: tuple


@dataclass(frozen=True)
class NotEssential:
    witness: GroupWord
    comparisons: int


@dataclass(frozen=True)
class Inconclusive:
    reason: str


def essential_test(x: ToeplitzWindow, n: int, radius: int):
    """Is Gamma_n an essential period of x, judged on the window and the radius-R ball?

    g preserves Per(x, Gamma_n, alpha) when Per(x, Gamma_n, alpha) is inside
    Per(g x, Gamma_n, alpha); a violation is a cell w in W with g w in a Per
    class of x carrying alpha while x(w) is a resolved symbol other than alpha.
    """
    chain = x.chain
    rep = per_sets(x, n)
    label_sym: dict[int, str] = {}
    for a, cells in rep.sets.items():
        for k in cells:
            label_sym[chain.right_cell(n, k)] = a
    if not label_sym:
        return Inconclusive("no Gamma_n-class with two visible resolved cells")
    certificate = []
    undecided = []
    for g in chain.ball(radius):
        if chain.in_subgroup(n, g):
            continue
        comparisons = 0
        bad = None
        for w, v in zip(x.cells, x.values):
            if v is HOLE:
                continue
            a = label_sym.get(chain.right_cell(n, chain.mul(g, w)))
            if a is None:
                continue
            comparisons += 1
            if v != a:
                bad = w
                break
        if bad is not None:
            certificate.append((g, bad))
        elif comparisons:
            return NotEssential(g, comparisons)
        else:
            undecided.append(g)
    if undecided:
        return Inconclusive(f"{len(undecided)} shifts never meet a Per class inside the window")
    if not certificate:
        return Inconclusive("no shifts outside Gamma_n within the radius")
    return Essential(radius, tuple(certificate))


# ---------------------------------------------------------------------------
# B_n cells and the factor map


@dataclass
class BnReport:
    level: int
    classes: list[list[GroupWord]]  # translators g of the samples g^{-1} x, grouped by layout
    violations: list[tuple[GroupWord, GroupWord, str]]

    @property
    def ok(self) -> bool:
        return not self.violations


def bn_partition_check(x: ToeplitzWindow, translators: Sequence[GroupWord], n: int) -> BnReport:
    """Group the samples g^{-1} x by their Per(., Gamma_n, .) layout on the window.

    Window form of the B_n partition: two samples share a layout iff
    Gamma_n g = Gamma_n h. The layout is taken with respect to Gamma_n itself,
    so the check is meaningful where the levels are normal.
    """
    chain = x.chain
    groups: dict[tuple, list[GroupWord]] = {}
    for g in translators:
        y = translate(x, chain.inv(g))
        groups.setdefault(per_sets(y, n).layout(), []).append(g)
    classes = list(groups.values())
    violations = []
    owner: dict[int, int] = {}
    for i, members in enumerate(classes):
        labels = {chain.right_cell(n, g) for g in members}
        if len(labels) > 1:
            a = members[0]
            b = next(g for g in members if chain.right_cell(n, g) != chain.right_cell(n, a))
            violations.append((a, b, "same layout, different Gamma_n-cosets"))
        for c in labels:
            if c in owner and owner[c] != i:
                a = next(g for g in classes[owner[c]] if chain.right_cell(n, g) == c)
                b = next(g for g in members if chain.right_cell(n, g) == c)
                violations.append((a, b, "same Gamma_n-coset, different layouts"))
            owner.setdefault(c, i)
    return BnReport(n, classes, violations)


def factor_to_odometer(y: ToeplitzWindow, depth: int | None = None) -> OdometerPoint:
    """The odometer point under y, read off the period layout of the window.

    At level n the cell c is accepted when y lies in h_c B_n, h_c = d^{-1} with
    d in D_n the representative labelled c: y and h_c x must show the same
    Per layout for the orbits of h_c Gamma_n h_c^{-1}. Candidates are searched
    coarse to fine inside the fibre of the previous choice.
    """
    chain = y.chain
    tower = y.tower
    depth = y.depth if depth is None else depth
    if depth > y.depth:
        raise ChainError(f"depth {depth} exceeds generation depth {y.depth}")
    x = translate(y, chain.inv(y.translator))  # the untranslated array on y's window
    cells: list[int] = []
    for n in range(1, depth + 1):
        cands = [c for c in chain.cells(n) if n == 1 or chain.project(n - 1, c) == cells[-1]]
        hits = []
        for c in cands:
            h = tower.fiber_coordinate(n, c)
            ref = translate(x, h)
            if per_sets(y, n, h).layout() == per_sets(ref, n, h).layout():
                hits.append(c)
        if len(hits) != 1:
            raise InconclusiveLayout(f"level {n}: {len(hits)} matching cells among {len(cands)}")
        cells.append(hits[0])
    return make_point(chain, cells)
