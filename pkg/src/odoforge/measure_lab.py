"""Exact measures on the odometer cylinder algebra and the measure bounds built on the tower.

Everything here is Fraction/int arithmetic. The module avoids the ``/``
operator and float literals altogether; tests/test_measure_lab.py audits the
source for that.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .group_core import QuotientChain
from .odometer import OdometerPoint, all_points
from .stages import stage_table
from .tower import ThinningPlan, TransversalTower, valid_plans, thinned


class MeasureError(ValueError):
    pass


def _pow2_inv(n: int) -> Fraction:
    return Fraction(1, 2**n)


@dataclass(frozen=True)
class CylinderMeasure:
    """Weights of the level-n cells (indexed by cell id); they sum to 1."""

    level: int
    weights: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        w = tuple(Fraction(x) for x in self.weights)
        object.__setattr__(self, "weights", w)
        if any(x < 0 for x in w):
            raise MeasureError("negative weight")
        if sum(w, Fraction(0)) != 1:
            raise MeasureError(f"weights sum to {sum(w, Fraction(0))}, not 1")

    def __getitem__(self, cell: int) -> Fraction:
        return self.weights[cell]

    def marginal(self, chain: QuotientChain, m: int) -> "CylinderMeasure":
        if not 1 <= m <= self.level:
            raise MeasureError(f"cannot marginalise level {self.level} to {m}")
        out = [Fraction(0)] * chain.index(m)
        for c, w in enumerate(self.weights):
            out[chain.descend(self.level, c, m)] += w
        return CylinderMeasure(m, tuple(out))

    def refine(self, chain: QuotientChain, split: Sequence[Fraction] | None = None) -> "CylinderMeasure":
        """Level n+1 weights: each cell's mass spread uniformly over its children,
        or according to ``split`` (one weight per level-(n+1) cell, summing to 1
        within every fibre)."""
        n = self.level
        if n >= chain.depth:
            raise MeasureError(f"level {n} is the chain depth")
        kids: dict[int, list[int]] = {}
        for c in chain.cells(n + 1):
            kids.setdefault(chain.project(n, c), []).append(c)
        out = [Fraction(0)] * chain.index(n + 1)
        for parent, cs in kids.items():
            for c in cs:
                share = Fraction(1, len(cs)) if split is None else Fraction(split[c])
                out[c] = self.weights[parent] * share
        return CylinderMeasure(n + 1, tuple(out))


@dataclass(frozen=True)
class MeasureFamily:
    """Consistent cylinder marginals at levels 1..N of one measure."""

    measures: tuple[CylinderMeasure, ...]

    @property
    def depth(self) -> int:
        return len(self.measures)

    def level(self, n: int) -> CylinderMeasure:
        return self.measures[n - 1]

    def check(self, chain: QuotientChain) -> None:
        for n, mu in enumerate(self.measures, 1):
            if mu.level != n or len(mu.weights) != chain.index(n):
                raise MeasureError(f"level {n} does not match the chain partition")
            if n > 1 and mu.marginal(chain, n - 1) != self.measures[n - 2]:
                raise MeasureError(f"levels {n - 1} and {n} are not consistent")


def family_from_top(chain: QuotientChain, top: CylinderMeasure) -> MeasureFamily:
    return MeasureFamily(tuple(top.marginal(chain, m) for m in range(1, top.level + 1)))


def uniform(chain: QuotientChain, depth: int | None = None) -> MeasureFamily:
    """nu, the Haar measure: every level-n cell has weight 1/[G:Gamma_n]."""
    depth = chain.depth if depth is None else depth
    return MeasureFamily(
        tuple(CylinderMeasure(n, (Fraction(1, chain.index(n)),) * chain.index(n)) for n in range(1, depth + 1))
    )


def point_mass(chain: QuotientChain, z: OdometerPoint) -> MeasureFamily:
    out = []
    for n in range(1, z.depth + 1):
        w = [Fraction(0)] * chain.index(n)
        w[z.level(n)] = Fraction(1)
        out.append(CylinderMeasure(n, tuple(w)))
    return MeasureFamily(tuple(out))


def random_family(chain: QuotientChain, rng, depth: int | None = None, max_weight: int = 9) -> MeasureFamily:
    """Random positive integer weights at the top level, normalised exactly."""
    depth = chain.depth if depth is None else depth
    raw = [rng.randint(1, max_weight) for _ in chain.cells(depth)]
    total = sum(raw)
    top = CylinderMeasure(depth, tuple(Fraction(r, total) for r in raw))
    return family_from_top(chain, top)


def translate_measure(chain: QuotientChain, g, mu: CylinderMeasure) -> CylinderMeasure:
    """(g mu)(K) = mu(g^{-1} K)."""
    ginv = chain.inv(g)
    return CylinderMeasure(mu.level, tuple(mu.weights[chain.act(mu.level, ginv, c)] for c in chain.cells(mu.level)))


# ---------------------------------------------------------------------------
# the metric


@dataclass(frozen=True)
class MetricTruncation:
    level: int
    partial: Fraction
    tail: Fraction

    @property
    def upper(self) -> Fraction:
        return self.partial + self.tail

    def contains(self, value: Fraction) -> bool:
        return self.partial <= value <= self.upper


def metric_d(chain: QuotientChain, mu1: MeasureFamily, mu2: MeasureFamily, depth: int | None = None) -> MetricTruncation:
    """sum_{n<=N} sum_K |mu1(K) - mu2(K)| / (2^n s_n) over the level-n cells K.

    Each level contributes at most 2^{1-n} / s_n <= 2^{1-n}, so the levels
    beyond N add at most 2^{1-N}.
    """
    depth = min(mu1.depth, mu2.depth) if depth is None else depth
    if depth > mu1.depth or depth > mu2.depth:
        raise MeasureError(f"families stop before level {depth}")
    partial = Fraction(0)
    for n in range(1, depth + 1):
        a, b = mu1.level(n), mu2.level(n)
        s = chain.index(n)
        if len(a.weights) != s or len(b.weights) != s:
            raise MeasureError(f"level {n}: partition mismatch")
        diff = sum((abs(x - y) for x, y in zip(a.weights, b.weights)), Fraction(0))
        partial += diff * Fraction(1, 2**n * s)
    return MetricTruncation(depth, partial, Fraction(2, 2**depth))


# ---------------------------------------------------------------------------
# averaging over D_n


def average_measure(lam: MeasureFamily, tower: TransversalTower, n: int) -> MeasureFamily:
    """mu = (1/|D_n|) sum_{g in D_n} g lam, at every level lam provides."""
    chain = tower.chain
    if not 0 <= n <= tower.depth:
        raise MeasureError(f"level {n} outside the tower")
    if n > lam.depth:
        raise MeasureError(f"measure known to level {lam.depth} < {n}")
    D = tower.levels[n]
    k = Fraction(1, len(D))
    out = []
    for mu in lam.measures:
        # integer numerators over a common denominator keep the sum cheap
        den = 1
        for w in mu.weights:
            den = w.denominator * Fraction(den, w.denominator).numerator
        num = [w.numerator * Fraction(den, w.denominator).numerator for w in mu.weights]
        acc = [0] * chain.index(mu.level)
        cells = chain.cells(mu.level)
        for g in D:
            ginv = chain.inv(g)
            for c in cells:
                acc[c] += num[chain.act(mu.level, ginv, c)]
        out.append(CylinderMeasure(mu.level, tuple(Fraction(a, den) * k for a in acc)))
    return MeasureFamily(tuple(out))


def nonuniform_marginals(chain: QuotientChain, fam: MeasureFamily, n: int) -> list[tuple[int, int, Fraction]]:
    """(m, cell, weight) for level-m cells, m <= n, whose weight is not 1/[G:Gamma_m]."""
    out = []
    for m in range(1, n + 1):
        want = Fraction(1, chain.index(m))
        for c, w in enumerate(fam.level(m).weights):
            if w != want:
                out.append((m, c, w))
    return out


# ---------------------------------------------------------------------------
# V_{k,n} bound and its empirical counterpart


@dataclass(frozen=True)
class VknBound:
    partial: Fraction  # |D'_n| sum_{k<m<=M} r_m
    tail: Fraction  # |D'_n| 2^{-(M+1)}, covering every m > M
    cap: Fraction  # |D'_n| 2^{-k}

    @property
    def total(self) -> Fraction:
        return self.partial + self.tail

    def to_json(self) -> dict:
        return {k: _q(getattr(self, k)) for k in ("partial", "tail", "total", "cap")}


def _q(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def vkn_bound(tower: TransversalTower, plan: ThinningPlan, n: int, k: int, horizon: int) -> VknBound:
    """Bound on the measure of points whose stage-k marker array differs from
    the limit somewhere on D'_n, in plan indices (D'_i = D_{n_i})."""
    if horizon > len(plan):
        raise MeasureError(f"plan has {len(plan)} steps, horizon {horizon} requested")
    if not 0 <= n <= len(plan):
        raise MeasureError(f"plan index {n} out of range")
    if k < 0:
        raise MeasureError("k must be >= 0")
    size = plan.sizes[n]
    ratios = plan.ratios
    partial = sum((ratios[m - 1] for m in range(k + 1, horizon + 1)), Fraction(0)) * size
    return VknBound(partial, size * _pow2_inv(horizon + 1), size * _pow2_inv(k))


def empirical_unresolved_fraction(
    tower: TransversalTower,
    n: int,
    k: int,
    horizon: int,
    cells: Sequence | None = None,
    count: str = "late",
    limit: int = 1 << 14,
) -> Fraction:
    """Exact fraction of depth-M points z for which some g in the window (default D_n) is

    * ``late``: captured at a stage in (k, M];
    * ``unresolved``: not captured by stage k (later stage or never).
    """
    chain = tower.chain
    if k < 0:
        raise MeasureError("k must be >= 0")
    if horizon > tower.depth:
        raise MeasureError(f"horizon {horizon} exceeds tower depth {tower.depth}")
    if count not in ("late", "unresolved"):
        raise MeasureError(f"unknown count mode {count!r}")
    if horizon < 1:
        raise MeasureError("horizon must be >= 1")
    size = chain.index(horizon)
    window = list(tower.levels[n] if cells is None else cells)
    if size * max(len(window), 1) > limit * 64 or size > limit:
        raise MeasureError(f"{size} points x {len(window)} cells exceeds the enumeration guard")
    table = stage_table(tower, horizon)
    inv = [chain.inv(g) for g in window]
    hits = 0
    for z in all_points(chain, horizon):
        top = z.cells[-1]
        for gi in inv:
            s, _ = table.lookup(chain.act(horizon, gi, top))
            if (count == "late" and s is not None and k < s) or (count == "unresolved" and (s is None or s > k)):
                hits += 1
                break
    return Fraction(hits, size)


@dataclass(frozen=True)
class BoundRow:
    plan: tuple[int, ...]
    n: int
    k: int
    horizon: int
    empirical: Fraction
    bound: VknBound

    @property
    def ok(self) -> bool:
        return self.empirical <= self.bound.total <= self.bound.cap

    def to_json(self) -> dict:
        return {
            "plan": list(self.plan),
            "n": self.n,
            "k": self.k,
            "M": self.horizon,
            "empirical": _q(self.empirical),
            **self.bound.to_json(),
            "ok": self.ok,
        }


def bounds_sweep(
    tower: TransversalTower, max_points: int = 4096, max_work: int = 1 << 14, max_plans: int = 6
) -> list[BoundRow]:
    """empirical <= vkn total <= cap over (P7)-valid plans and (n, k, M) triples.

    Plans are those whose levels fit the enumeration guard; for each, every
    n <= M and k < M is tried while |D'_n| * |X_M| stays below ``max_work``.
    """
    sizes = tower.sizes()
    plans = [p for p in valid_plans(sizes) if p.sizes[-1] <= max_points]
    plans.sort(key=lambda p: (-len(p), p.levels))
    rows = []
    for plan in plans[:max_plans]:
        tt = thinned(tower, plan)
        for M in range(1, len(plan) + 1):
            for n in range(0, M + 1):
                if plan.sizes[n] * plan.sizes[M] > max_work:
                    continue
                for k in range(0, M):
                    emp = empirical_unresolved_fraction(tt, n, k, M, limit=max_points)
                    rows.append(BoundRow(plan.levels, n, k, M, emp, vkn_bound(tower, plan, n, k, M)))
    return rows
