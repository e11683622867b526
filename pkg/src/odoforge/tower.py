"""Nested transversal towers D_0 = {1} c D_1 c ... c D_N.

D_n holds one representative of each right coset Gamma_n g. Level n+1 is
built as V_n . D_n with V_n a transversal of Gamma_{n+1} inside Gamma_n, which
gives the factorisation D_{n+1} = U_{v in D_{n+1} n Gamma_j} v D_j for every j.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Sequence

from .group_core import ChainError, GroupWord, QuotientChain, TableChain, ZdChain


class DepthExhausted(ValueError):
    def __init__(self, failed_at: int, achieved: int, depth: int):
        super().__init__(
            f"no level <= {depth} satisfies the ratio bound for step {failed_at}"
            f" (deepest achieved step: {achieved})"
        )
        self.failed_at = failed_at
        self.achieved = achieved


class PlanMismatch(ValueError):
    pass


@dataclass
class TransversalTower:
    chain: QuotientChain
    levels: list[tuple[GroupWord, ...]]
    # witnesses[(n, j)][w] = (v, d) with w = v d, v in D_n n Gamma_j, d in D_j
    witnesses: dict[tuple[int, int], dict[GroupWord, tuple[GroupWord, GroupWord]]] = field(
        default_factory=dict
    )

    def __post_init__(self) -> None:
        self._by_right: list[dict[int, GroupWord]] = []
        for n, level in enumerate(self.levels):
            index: dict[int, GroupWord] = {}
            for w in level:
                index.setdefault(self.chain.right_cell(n, w), w)
            self._by_right.append(index)

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def size(self, n: int) -> int:
        return len(self.levels[n])

    def sizes(self) -> list[int]:
        return [len(level) for level in self.levels]

    def rep(self, n: int, right_cell: int) -> GroupWord:
        """The d in D_n with Gamma_n d labelled ``right_cell``."""
        return self._by_right[n][right_cell]

    def rep_of(self, n: int, g: GroupWord) -> GroupWord:
        return self.rep(n, self.chain.right_cell(n, g))

    def fiber_coordinate(self, n: int, cell: int) -> GroupWord:
        """t in D_n^{-1} with t C_n the level-n cell ``cell`` (t = d^{-1})."""
        return self.chain.inv(self.rep(n, cell))

    def inverse_level(self, n: int) -> list[GroupWord]:
        """D_n^{-1}, the translators of the partition P_n."""
        return [self.chain.inv(w) for w in self.levels[n]]

    def witness(self, n: int, j: int, w: GroupWord) -> tuple[GroupWord, GroupWord]:
        key = (n, j)
        if key not in self.witnesses:
            self.witnesses[key] = _witnesses(self, n, j)
        return self.witnesses[key][w]

    def all_witnesses(self) -> None:
        for n in range(2, self.depth + 1):
            for j in range(1, n):
                if (n, j) not in self.witnesses:
                    self.witnesses[(n, j)] = _witnesses(self, n, j)

    def truncate(self, depth: int) -> "TransversalTower":
        wit = {k: v for k, v in self.witnesses.items() if k[0] <= depth}
        return TransversalTower(self.chain.truncate(depth), self.levels[: depth + 1], wit)


def _witnesses(tower: TransversalTower, n: int, j: int) -> dict:
    chain = tower.chain
    reps = {c: (d, chain.inv(d)) for c, d in tower._by_right[j].items()}
    out = {}
    for w in tower.levels[n]:
        hit = reps.get(chain.right_cell(j, w))
        if hit is None:
            continue
        out[w] = (chain.mul(w, hit[1]), hit[0])
    return out


def _letter_key(chain: QuotientChain, g: GroupWord):
    if isinstance(chain, TableChain):
        order = {s: i for i, s in enumerate(chain.letters())}
        return (len(g.payload), [order[s] for s in g.payload])
    return (len(g), g.payload)


def subgroup_transversal(chain: QuotientChain, n: int) -> list[GroupWord]:
    """V_n: representatives in Gamma_n of the right cosets of Gamma_{n+1}, identity first."""
    if isinstance(chain, ZdChain):
        lo, hi = chain.modulus(n), chain.modulus(n + 1)
        steps = [range(0, h, l) for l, h in zip(lo, hi)]
        return [chain.word(*reversed(p)) for p in product(*reversed(steps))]
    assert isinstance(chain, TableChain)
    paths = chain.schreier_paths(n + 1)
    base = chain.base(n)
    fibre = [c for c in chain.cells(n + 1) if chain.project(n, c) == base] if n else list(
        chain.cells(1)
    )
    if len(fibre) * chain.index(n) != chain.index(n + 1):
        raise ChainError(f"projection {n + 1}->{n} is not surjective")
    out = [chain.inv(paths[c]) for c in fibre]
    out.sort(key=lambda g: _letter_key(chain, g))
    return out


def build_tower(chain: QuotientChain) -> TransversalTower:
    chain.require_side("right") if isinstance(chain, TableChain) else None
    levels: list[tuple[GroupWord, ...]] = [(chain.identity(),)]
    for n in range(chain.depth):
        V = subgroup_transversal(chain, n)
        levels.append(tuple(chain.mul(v, d) for v in V for d in levels[n]))
    tower = TransversalTower(chain, levels)
    return tower


# ---------------------------------------------------------------------------
# verification


@dataclass
class PropertyResult:
    name: str
    passed: bool
    detail: str = ""
    counterexample: str | None = None

    def to_json(self) -> dict:
        return {
            "property": self.name,
            "passed": self.passed,
            "detail": self.detail,
            "counterexample": self.counterexample,
        }


@dataclass
class TowerReport:
    results: list[PropertyResult]
    coverage_radius: int

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def get(self, name: str) -> PropertyResult:
        return next(r for r in self.results if r.name == name)

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "properties": [r.to_json() for r in self.results],
            "P3_coverage_radius": self.coverage_radius,
        }


def _check_p1(t: TransversalTower) -> PropertyResult:
    chain = t.chain
    fmt = chain.format_word
    if t.levels[0] != (chain.identity(),):
        return PropertyResult("P1", False, "D_0 must be {1_G}", fmt(t.levels[0][0]))
    if t.depth >= 1 and chain.identity() not in t.levels[1]:
        return PropertyResult("P1", False, "1_G not in D_1", fmt(chain.identity()))
    for n in range(1, t.depth):
        upper = set(t.levels[n + 1])
        for w in t.levels[n]:
            if w not in upper:
                return PropertyResult("P1", False, f"D_{n} not contained in D_{n + 1}", fmt(w))
    return PropertyResult("P1", True, f"nested through level {t.depth}")


def _check_p2(t: TransversalTower) -> PropertyResult:
    chain = t.chain
    for n in range(1, t.depth + 1):
        level = t.levels[n]
        if len(level) != chain.index(n):
            return PropertyResult(
                "P2", False, f"|D_{n}| = {len(level)} but [G:Gamma_{n}] = {chain.index(n)}"
            )
        seen: dict[int, GroupWord] = {}
        for w in level:
            c = chain.right_cell(n, w)
            if c in seen:
                return PropertyResult(
                    "P2", False, f"two elements of D_{n} in one right coset", chain.format_word(w)
                )
            seen[c] = w
    return PropertyResult("P2", True, "each D_n is a right transversal")


def _check_p4(t: TransversalTower) -> PropertyResult:
    chain = t.chain
    fmt = chain.format_word
    for n in range(2, t.depth + 1):
        target = set(t.levels[n])
        for j in range(1, n):
            V = [w for w in t.levels[n] if chain.in_subgroup(j, w)]
            wit = t.witnesses.get((n, j))
            if wit is not None:
                # witnesses cover D_n; with |V| |D_j| = |D_n| the union is then
                # forced to be disjoint and to stay inside D_n
                Vset = set(V)
                Dj = set(t.levels[j])
                for w in t.levels[n]:
                    if w not in wit:
                        return PropertyResult("P4", False, f"missing witness at n={n}, j={j}", fmt(w))
                    v, d = wit[w]
                    if v not in Vset or d not in Dj or chain.mul(v, d) != w:
                        return PropertyResult("P4", False, f"bad witness at n={n}, j={j}", fmt(w))
                if len(V) * len(Dj) != len(t.levels[n]):
                    return PropertyResult(
                        "P4", False, f"|D_{n} n Gamma_{j}| |D_{j}| != |D_{n}|", fmt(V[0]) if V else None
                    )
                continue
            counts = Counter(chain.mul(v, d) for v in V for d in t.levels[j])
            for w, k in counts.items():
                if k > 1:
                    return PropertyResult("P4", False, f"union not disjoint at n={n}, j={j}", fmt(w))
                if w not in target:
                    return PropertyResult("P4", False, f"v D_{j} leaves D_{n}", fmt(w))
            for w in t.levels[n]:
                if w not in counts:
                    return PropertyResult("P4", False, f"D_{n} not covered at j={j}", fmt(w))
    return PropertyResult("P4", True, "factorisation holds for all j < n")


def coverage_radius(t: TransversalTower, cap: int = 64) -> int:
    """Largest R with the radius-R ball inside D_N (-1 if even 1_G is missing)."""
    top = set(t.levels[-1])
    r = -1
    while r < cap:
        if not all(g in top for g in t.chain.ball(r + 1)):
            break
        r += 1
    return r


def verify_tower(t: TransversalTower) -> TowerReport:
    results = [_check_p1(t), _check_p2(t), _check_p4(t)]
    return TowerReport(results, coverage_radius(t))


# ---------------------------------------------------------------------------
# (P7) thinning and the Z_0(S) bound


@dataclass(frozen=True)
class ThinningPlan:
    """Levels n_1 < ... < n_k with |D_{n_{i-1}}| / |D_{n_i}| < 2^-(i+1) (n_0 = 0)."""

    levels: tuple[int, ...]
    sizes: tuple[int, ...]  # |D_{n_0}|, |D_{n_1}|, ..., |D_{n_k}|

    def __post_init__(self) -> None:
        if len(self.sizes) != len(self.levels) + 1:
            raise PlanMismatch("need one size per level plus |D_0|")
        if list(self.levels) != sorted(set(self.levels)) or (self.levels and self.levels[0] < 1):
            raise PlanMismatch(f"levels must increase from 1: {self.levels}")
        for i, r in enumerate(self.ratios, 1):
            if not r < Fraction(1, 2 ** (i + 1)):
                raise PlanMismatch(f"step {i}: ratio {r} is not < 1/2^{i + 1}")

    @property
    def ratios(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(a, b) for a, b in zip(self.sizes, self.sizes[1:]))

    def __len__(self) -> int:
        return len(self.levels)

    def to_json(self) -> dict:
        return {
            "levels": list(self.levels),
            "sizes": list(self.sizes),
            "ratios": [f"{r.numerator}/{r.denominator}" for r in self.ratios],
        }


def greedy_plan(sizes: Sequence[int], count: int | None = None) -> ThinningPlan:
    """Greedy (P7) subsequence of a size sequence |D_0|, ..., |D_N|.

    n_i is the least level beyond n_{i-1} whose ratio beats 2^-(i+1). With
    ``count`` the plan must reach that many steps; without, it runs until the
    depth is used up and only fails if not even one step fits.
    """
    depth = len(sizes) - 1
    levels: list[int] = []
    prev = 0
    i = 1
    while count is None or i <= count:
        bound = Fraction(1, 2 ** (i + 1))
        nxt = next((n for n in range(prev + 1, depth + 1) if Fraction(sizes[prev], sizes[n]) < bound), None)
        if nxt is None:
            if count is not None or i == 1:
                raise DepthExhausted(i, i - 1, depth)
            break
        levels.append(nxt)
        prev = nxt
        i += 1
    return ThinningPlan(tuple(levels), tuple(sizes[n] for n in [0] + levels))


def thin_for_P7(t: TransversalTower, count: int | None = None) -> ThinningPlan:
    return greedy_plan(t.sizes(), count)


def valid_plans(sizes: Sequence[int], max_len: int | None = None) -> list[ThinningPlan]:
    """Every (P7)-valid plan over the given sizes, shortest first."""
    depth = len(sizes) - 1
    out: list[ThinningPlan] = []

    def grow(levels: list[int]) -> None:
        i = len(levels) + 1
        if max_len is not None and i > max_len:
            return
        prev = levels[-1] if levels else 0
        bound = Fraction(1, 2 ** (i + 1))
        for n in range(prev + 1, depth + 1):
            if Fraction(sizes[prev], sizes[n]) < bound:
                plan = levels + [n]
                out.append(ThinningPlan(tuple(plan), tuple(sizes[m] for m in [0] + plan)))
                grow(plan)

    grow([])
    out.sort(key=lambda p: (len(p), p.levels))
    return out


def _check_plan(t: TransversalTower, plan: ThinningPlan) -> None:
    if plan.levels and plan.levels[-1] > t.depth:
        raise PlanMismatch(f"plan reaches level {plan.levels[-1]}, tower depth is {t.depth}")
    if tuple(t.size(n) for n in (0,) + plan.levels) != plan.sizes:
        raise PlanMismatch("plan sizes do not match the tower")


def z0_bound(t: TransversalTower, plan: ThinningPlan) -> Fraction:
    """Sum of the plan ratios: the union bound on nu(U_j g A_j)."""
    _check_plan(t, plan)
    return sum(plan.ratios, Fraction(0))


def z0_tail(plan: ThinningPlan) -> Fraction:
    """Bound on the ratios of any further steps: sum_{i>k} 2^-(i+1) = 2^-(k+1)."""
    return Fraction(1, 2 ** (len(plan) + 1))


def thinned(t: TransversalTower, plan: ThinningPlan) -> TransversalTower:
    """The tower D'_i = D_{n_i} over the chain (Gamma_{n_i})_i."""
    _check_plan(t, plan)
    chain = t.chain.subsequence(plan.levels)
    return TransversalTower(chain, [t.levels[0]] + [t.levels[n] for n in plan.levels])


# ---------------------------------------------------------------------------
# serialisation


def tower_to_json(t: TransversalTower, witnesses: bool = True) -> dict:
    fmt = t.chain.format_word
    out: dict = {"depth": t.depth, "levels": [[fmt(w) for w in level] for level in t.levels]}
    if witnesses:
        t.all_witnesses()
        out["witnesses"] = [
            {"n": n, "j": j, "triples": [[fmt(w), fmt(v), fmt(d)] for w, (v, d) in t.witnesses[(n, j)].items()]}
            for (n, j) in sorted(t.witnesses)
        ]
    return out


def tower_from_json(chain: QuotientChain, data: dict) -> TransversalTower:
    parse = chain.parse_word
    levels = [tuple(parse(s) for s in level) for level in data["levels"]]
    if len(levels) - 1 > chain.depth:
        raise ChainError(f"tower depth {len(levels) - 1} exceeds chain depth {chain.depth}")
    if len(levels) - 1 < chain.depth:
        chain = chain.truncate(len(levels) - 1)
    wit = {}
    for block in data.get("witnesses", []):
        wit[(int(block["n"]), int(block["j"]))] = {
            parse(w): (parse(v), parse(d)) for w, v, d in block["triples"]
        }
    return TransversalTower(chain, levels, wit)
