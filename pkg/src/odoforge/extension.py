"""Staged marker maps over a pointed system (Y, pi) and the window constructions built on them.

A system exposes a basepoint y_0 over the basepoint of the odometer, the
G-action, the factor pi and a finite "pattern" view of each point. For each
cell g of a window, phi(y)(g) is

* Marker(d) (standing for d^{-1} y_0) when g is captured at stage n for
  pi(y), d in D_{n-1} the captured representative;
* Free(pattern of g^{-1} y) when g is never captured.

phi_stage(i) is the stage-i truncation: markers only up to stage i, every
later cell Free. phi_approx(i) is what is already certain at stage i: later
cells are Pending.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Sequence

from .group_core import ChainError, GroupWord
from .odometer import OdometerPoint, act as odo_act, basepoint, orbit_point
from .stages import CellResolution, resolve_cells, stage_table
from .toeplitz import HOLE, ToeplitzWindow, generate_toeplitz, translate
from .tower import TransversalTower

__all__ = [
    "CellResolution",
    "resolve_cells",
    "Marker",
    "Free",
    "Pending",
    "PENDING",
    "OdometerSystem",
    "ToeplitzSystem",
]


# ---------------------------------------------------------------------------
# values


@dataclass(frozen=True, slots=True)
class Marker:
    rep: GroupWord  # d, meaning d^{-1} y_0
    stage: int


@dataclass(frozen=True, slots=True)
class Free:
    pattern: Hashable
    base: tuple[int, ...]  # pi of the translated point, truncated to the comparison level


class _Pending:
    def __repr__(self) -> str:
        return "Pending"


Pending = _Pending
PENDING = _Pending()


# ---------------------------------------------------------------------------
# systems


class PointedWindowSystem:
    """Interface for (Y, pi); points are opaque hashable values."""

    tower: TransversalTower
    depth: int
    compare_level: int

    @property
    def chain(self):
        return self.tower.chain

    def basepoint(self):
        raise NotImplementedError

    def act(self, g: GroupWord, y):
        raise NotImplementedError

    def factor(self, y) -> OdometerPoint:
        raise NotImplementedError

    def pattern(self, y) -> Hashable:
        """Finite view of y used for comparisons (agreement at the comparison level)."""
        raise NotImplementedError

    def agree(self, y1, y2, k: int) -> bool:
        """y1 and y2 are close at level k: same odometer cells to level k, same pattern."""
        return (
            self.factor(y1).truncate(k) == self.factor(y2).truncate(k)
            and self.pattern(y1) == self.pattern(y2)
        )

    def fiber_coordinate(self, n: int, y) -> GroupWord:
        """t_{n,y} in D_n^{-1} with pi(y) in t_{n,y} C_n."""
        return self.tower.fiber_coordinate(n, self.factor(y).level(n))


class OdometerSystem(PointedWindowSystem):
    """Y = the depth-N odometer, pi = identity."""

    def __init__(self, tower: TransversalTower, depth: int | None = None, compare_level: int | None = None):
        self.tower = tower
        self.depth = tower.depth if depth is None else depth
        self.compare_level = self.depth if compare_level is None else compare_level
        if not 1 <= self.compare_level <= self.depth <= tower.depth:
            raise ChainError("need 1 <= compare_level <= depth <= tower depth")

    def basepoint(self) -> OdometerPoint:
        return basepoint(self.chain, self.depth)

    def act(self, g: GroupWord, y: OdometerPoint) -> OdometerPoint:
        return odo_act(self.chain, g, y)

    def factor(self, y: OdometerPoint) -> OdometerPoint:
        return y

    def pattern(self, y: OdometerPoint) -> Hashable:
        return y.cells[: self.compare_level]

    def agree(self, y1: OdometerPoint, y2: OdometerPoint, k: int) -> bool:
        return y1.truncate(k) == y2.truncate(k)


class ToeplitzSystem(PointedWindowSystem):
    """Y = orbit of the stage-marked Toeplitz array; a point is its translator t (y = t.x).

    pi(t.x) = tau(t); the pattern is the array on the comparison window.
    """

    def __init__(
        self,
        tower: TransversalTower,
        marking: dict[int, str],
        depth: int | None = None,
        window: Sequence[GroupWord] | None = None,
        compare_level: int | None = None,
    ):
        self.tower = tower
        self.depth = tower.depth if depth is None else depth
        self.compare_level = self.depth if compare_level is None else compare_level
        self.marking = dict(marking)
        self.window = tuple(self.chain.ball(2) if window is None else window)
        self._x = generate_toeplitz(tower, self.marking, self.depth, self.window)

    def basepoint(self) -> GroupWord:
        return self.chain.identity()

    def act(self, g: GroupWord, y: GroupWord) -> GroupWord:
        return self.chain.mul(g, y)

    def factor(self, y: GroupWord) -> OdometerPoint:
        return orbit_point(self.chain, y, self.depth)

    def view(self, y: GroupWord, window: Sequence[GroupWord] | None = None) -> ToeplitzWindow:
        return translate(self._x, y, window)

    def pattern(self, y: GroupWord) -> Hashable:
        return self.view(y).values


# ---------------------------------------------------------------------------
# J-partition checks


def jpartition_equivariance_check(
    tower: TransversalTower, z: OdometerPoint, g: GroupWord, window: Sequence[GroupWord]
) -> list[GroupWord]:
    """Cells h with (stage, rep) of h at g z different from those of g^{-1} h at z."""
    chain = tower.chain
    table = stage_table(tower, min(z.depth, tower.depth))
    gz = odo_act(chain, g, z)
    ginv = chain.inv(g)
    bad = []
    for h in window:
        a = table.resolve(h, gz)
        b = table.resolve(chain.mul(ginv, h), z)
        if (a.stage, a.rep) != (b.stage, b.rep):
            bad.append(h)
    return bad


def stage_invariance_check(tower: TransversalTower, z: OdometerPoint, window: Sequence[GroupWord]) -> list:
    """Pairs (g, h) in W with h in z_j Gamma_j z_j^{-1} g for some j >= stage(g) but different stage.

    At the basepoint this is min(g) = min(gamma g) for gamma in Gamma_j.
    """
    chain = tower.chain
    depth = min(z.depth, tower.depth)
    res = resolve_cells(tower, z, window, depth)
    bad = []
    for g in window:
        s = res[g].stage
        if s is None:
            continue
        # h = c gamma c^{-1} g with c z_j-cell  <=>  h^{-1} . c_j = g^{-1} . c_j
        for h in window:
            lab = chain.act(s, chain.inv(h), z.level(s))
            if lab == chain.act(s, chain.inv(g), z.level(s)) and res[h].stage != s:
                bad.append((g, h))
    return bad


def one_one_check(sys: PointedWindowSystem, y, g: GroupWord, n: int) -> GroupWord | None:
    """gamma = t_{n,gy}^{-1} g t_{n,y}; returns it when it is not in Gamma_n, else None."""
    chain = sys.chain
    t_y = sys.fiber_coordinate(n, y)
    t_gy = sys.fiber_coordinate(n, sys.act(g, y))
    gamma = chain.mul(chain.mul(chain.inv(t_gy), g), t_y)
    return None if chain.in_subgroup(n, gamma) else gamma


# ---------------------------------------------------------------------------
# phi


def _free(sys: PointedWindowSystem, y, g: GroupWord) -> Free:
    p = sys.act(sys.chain.inv(g), y)
    return Free(sys.pattern(p), sys.factor(p).cells[: sys.compare_level])


def phi_stage(sys: PointedWindowSystem, y, i: int, window: Sequence[GroupWord]) -> dict:
    """phi_i(y) on the window: Marker up to stage i, Free beyond."""
    if not 0 <= i <= sys.depth:
        raise ChainError(f"stage {i} outside 0..{sys.depth}")
    res = resolve_cells(sys.tower, sys.factor(y), window, sys.depth)
    out = {}
    for g in window:
        r = res[g]
        if r.stage is not None and r.stage <= i:
            out[g] = Marker(r.rep, r.stage)
        else:
            out[g] = _free(sys, y, g)
    return out


def phi_approx(sys: PointedWindowSystem, y, i: int, window: Sequence[GroupWord]) -> dict:
    """What phi(y) is known to be after stage i: Marker up to stage i, else Pending."""
    if not 0 <= i <= sys.depth:
        raise ChainError(f"stage {i} outside 0..{sys.depth}")
    res = resolve_cells(sys.tower, sys.factor(y), window, sys.depth)
    return {
        g: Marker(r.rep, r.stage) if r.stage is not None and r.stage <= i else PENDING
        for g, r in res.items()
    }


def psi(sys: PointedWindowSystem, y, window: Sequence[GroupWord]) -> tuple[OdometerPoint, dict]:
    """(pi(y), phi(y)) at the full working depth."""
    return sys.factor(y), phi_stage(sys, y, sys.depth, window)


def phi_equivariance_check(sys: PointedWindowSystem, y, h: GroupWord, i: int, window: Sequence[GroupWord]) -> list:
    """Cells g with phi_i(h y)(g) != phi_i(y)(h^{-1} g)."""
    chain = sys.chain
    hinv = chain.inv(h)
    shifted = [chain.mul(hinv, g) for g in window]
    left = phi_stage(sys, sys.act(h, y), i, window)
    right = phi_stage(sys, y, i, shifted)
    return [g for g, g2 in zip(window, shifted) if left[g] != right[g2]]


# ---------------------------------------------------------------------------
# sampling the extension


@dataclass(frozen=True)
class ExtensionSample:
    base: OdometerPoint
    phi: tuple  # PhiValue per window cell


def sample_extension_window(sys: PointedWindowSystem, translators: Iterable[GroupWord], window: Sequence[GroupWord]):
    """Distinct windows of h^{-1} psi(y_0), h in H, in order of first appearance."""
    chain = sys.chain
    y0 = sys.basepoint()
    seen = {}
    for h in translators:
        base, phi = psi(sys, sys.act(chain.inv(h), y0), window)
        s = ExtensionSample(base, tuple(phi[g] for g in window))
        seen.setdefault(s, None)
    return list(seen)


@dataclass
class FiberReport:
    level: int
    groups: int
    comparisons: int
    violations: list  # (base cells, cell, description)

    @property
    def ok(self) -> bool:
        return not self.violations


def fiber_agreement(
    sys: PointedWindowSystem, samples: Sequence[ExtensionSample], window: Sequence[GroupWord], level: int
) -> FiberReport:
    """Samples over the same level-L base cell agree on every cell captured by stage L.

    Each such marker must also be the representative captured at the shared
    base (for the base of y_0 this is x(g) = d^{-1} y_0), and every Free cell
    must sit over g^{-1} pi(sample).
    """
    chain = sys.chain
    tower = sys.tower
    groups: dict[tuple, list[ExtensionSample]] = {}
    for s in samples:
        groups.setdefault(s.base.cells[:level], []).append(s)
    violations = []
    comparisons = 0
    for key, members in groups.items():
        z = OdometerPoint(key)
        expect = resolve_cells(tower, z, window, level)
        for s in members:
            for g, v in zip(window, s.phi):
                e = expect[g]
                if e.stage is not None:
                    comparisons += 1
                    if v != Marker(e.rep, e.stage):
                        violations.append((key, g, "marker differs from the shared base"))
                elif isinstance(v, Marker) and v.stage <= level:
                    violations.append((key, g, "marker at a stage the base leaves open"))
                if isinstance(v, Free):
                    want = odo_act(chain, chain.inv(g), s.base).cells[: sys.compare_level]
                    if v.base != want:
                        violations.append((key, g, "free cell not over g^{-1} z"))
    return FiberReport(level, len(groups), comparisons, violations)


# ---------------------------------------------------------------------------
# bounded search for returns of y_0


@dataclass(frozen=True)
class Found:
    witness: GroupWord


@dataclass(frozen=True)
class NotFound:
    radius: int


def bounded_minimality_search(sys: PointedWindowSystem, y, k: int, radius: int):
    """First h (ball order) with h^{-1} y_0 close to y at level k and h in Gamma_k t_{k,y}^{-1}."""
    chain = sys.chain
    if not 1 <= k <= sys.depth:
        raise ChainError(f"level {k} outside 1..{sys.depth}")
    target = sys.factor(y).level(k)
    y0 = sys.basepoint()
    for h in chain.ball(radius):
        if chain.right_cell(k, h) != target:
            continue
        if sys.agree(sys.act(chain.inv(h), y0), y, k):
            return Found(h)
    return NotFound(radius)


# ---------------------------------------------------------------------------
# clopen coding


class PartitionViolation(ValueError):
    def __init__(self, cell: GroupWord, matches: list):
        super().__init__(f"pattern at {cell} matches {len(matches)} partition cells: {matches}")
        self.cell = cell
        self.matches = matches


@dataclass(frozen=True)
class ClopenSet:
    """{y : accept(y restricted to support)}; ``accept`` gets a dict cell -> symbol."""

    label: Hashable
    support: tuple[GroupWord, ...]
    accept: Callable[[dict], bool]


def code_cell(view: Callable[[GroupWord, Sequence[GroupWord]], dict], partition: Sequence[ClopenSet], g: GroupWord):
    hits = [A.label for A in partition if A.accept(view(g, A.support))]
    if len(hits) != 1:
        raise PartitionViolation(g, hits)
    return hits[0]


def clopen_code(x: ToeplitzWindow, partition: Sequence[ClopenSet], window: Sequence[GroupWord] | None = None) -> tuple:
    """x'(g) = label of the partition cell containing g^{-1} x, for g in the window."""
    chain = x.chain
    window = x.cells if window is None else tuple(window)

    def view(g, support):
        y = translate(x, chain.inv(g), support)
        return dict(zip(y.cells, y.values))

    return tuple(code_cell(view, partition, g) for g in window)


def symbol_partition(chain, alphabet: Sequence[str], holes: bool = True) -> list[ClopenSet]:
    """Cells {y : y(1_G) = alpha}; coding by it is the identity."""
    e = chain.identity()
    labels = list(alphabet) + ([HOLE] if holes else [])
    return [ClopenSet(a, (e,), lambda p, a=a: p[e] is a or p[e] == a) for a in labels]


def layout_partition(x: ToeplitzWindow, n: int, support: Sequence[GroupWord]) -> list[ClopenSet]:
    """Cells h_c B_n, c in G/Gamma_n, recognised on the support.

    y is accepted into the cell of c when it matches h_c x on the support
    cells that h_c x fills by stage n (its Gamma_n-periodic skeleton).
    """
    chain = x.chain
    tower = x.tower
    support = tuple(support)
    out = []
    for c in chain.cells(n):
        h = tower.fiber_coordinate(n, c)
        ref = translate(x, chain.mul(h, chain.inv(x.translator)), support)
        skel = {k: v for k, v, s in zip(ref.cells, ref.values, ref.stages) if s is not None and s <= n}
        out.append(ClopenSet(c, support, lambda p, skel=skel: all(p[k] == v for k, v in skel.items())))
    return out


# ---------------------------------------------------------------------------
# fiber products


class FiberMismatch(ValueError):
    pass


@dataclass(frozen=True)
class FiberSample:
    base: OdometerPoint
    window: tuple


def fiber_product(
    samples_a: Sequence[FiberSample], samples_b: Sequence[FiberSample], level: int, unique: bool = False
) -> list[tuple[FiberSample, FiberSample]]:
    """Pairs (a, b) whose bases agree to the given level."""
    index: dict[tuple, list[FiberSample]] = {}
    for b in samples_b:
        index.setdefault(b.base.cells[:level], []).append(b)
    out = []
    for a in samples_a:
        key = a.base.cells[:level]
        matches = index.get(key, [])
        if not matches:
            raise FiberMismatch(f"no sample over base {key}")
        if unique and len(matches) > 1:
            raise FiberMismatch(f"{len(matches)} samples over base {key}")
        out += [(a, b) for b in matches]
    return out


def toeplitz_samples(sys: ToeplitzSystem, translators: Iterable[GroupWord], window: Sequence[GroupWord] | None = None):
    """FiberSample records of h^{-1} x over tau(h^{-1})."""
    chain = sys.chain
    out = []
    for h in translators:
        y = chain.inv(h)
        out.append(FiberSample(sys.factor(y), sys.view(y, window).values))
    return out
