"""Group words and finite-quotient chains.

Two backends share one interface:

* ``ZdChain``: G = Z^d, Gamma_n = m_n[0] Z x ... x m_n[d-1] Z.
* ``TableChain``: G = free group on named generators, each level given by a
  transitive action of the generators on the coset space G/Gamma_n
  (explicit permutations, or a finite quotient group via its
  multiplication table).

Cells are integers ``0 .. index(n) - 1``. ``coset(n, g)`` is the cell of the
left coset g Gamma_n, which is where the odometer point tau(g) sits at level
n. ``right_cell(n, g)`` labels the right coset Gamma_n g by the cell of
g^{-1} Gamma_n; transversals are built from right cosets.
"""

from __future__ import annotations

import json
import re
import string
from collections import deque
from dataclasses import dataclass
from itertools import product
from pathlib import Path
from typing import Iterable, Iterator, Sequence


class ChainError(ValueError):
    """Raised for malformed or inconsistent chain descriptions."""


class BackendMismatch(TypeError):
    pass


@dataclass(frozen=True, slots=True)
class GroupWord:
    """An element of G in normal form.

    ``kind`` is ``"zd"`` (payload = integer vector) or ``"table"`` (payload =
    freely reduced word; generator i is ``i + 1`` and its inverse ``-(i + 1)``).
    """

    kind: str
    payload: tuple[int, ...]

    def __len__(self) -> int:
        if self.kind == "zd":
            return sum(abs(c) for c in self.payload)
        return len(self.payload)


@dataclass(frozen=True, slots=True)
class FiniteQuotientElement:
    level: int
    cell: int


def _free_reduce(letters: Iterable[int]) -> tuple[int, ...]:
    out: list[int] = []
    for s in letters:
        if out and out[-1] == -s:
            out.pop()
        else:
            out.append(s)
    return tuple(out)


class QuotientChain:
    """Common interface; see the module docstring for conventions."""

    kind: str
    depth: int
    side: str

    # -- group arithmetic -------------------------------------------------
    def identity(self) -> GroupWord:
        raise NotImplementedError

    def mul(self, a: GroupWord, b: GroupWord) -> GroupWord:
        raise NotImplementedError

    def inv(self, a: GroupWord) -> GroupWord:
        raise NotImplementedError

    def check_word(self, g: GroupWord) -> None:
        if not isinstance(g, GroupWord) or g.kind != self.kind:
            raise BackendMismatch(f"expected a {self.kind} word, got {g!r}")

    # -- quotient structure -----------------------------------------------
    def index(self, n: int) -> int:
        """[G : Gamma_n]; level 0 is G itself."""
        raise NotImplementedError

    def base(self, n: int) -> int:
        """Cell of the identity coset at level n."""
        raise NotImplementedError

    def act(self, n: int, g: GroupWord, cell: int) -> int:
        """Left action of g on the cells of G/Gamma_n."""
        raise NotImplementedError

    def project(self, n: int, cell: int) -> int:
        """Projection G/Gamma_{n+1} -> G/Gamma_n of a level-(n+1) cell."""
        raise NotImplementedError

    def ball(self, radius: int) -> list[GroupWord]:
        """All words of length <= radius, shortest first, deterministic order."""
        raise NotImplementedError

    def random_word(self, rng, length: int) -> GroupWord:
        raise NotImplementedError

    def truncate(self, depth: int) -> "QuotientChain":
        raise NotImplementedError

    def subsequence(self, levels: Sequence[int]) -> "QuotientChain":
        """The chain (Gamma_{levels[0]}, Gamma_{levels[1]}, ...)."""
        raise NotImplementedError

    def format_word(self, g: GroupWord) -> str:
        raise NotImplementedError

    def parse_word(self, text: str) -> GroupWord:
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError

    # -- derived ------------------------------------------------------------
    def _check_level(self, n: int, lo: int = 1) -> None:
        if not lo <= n <= self.depth:
            raise ChainError(f"level {n} out of range {lo}..{self.depth}")

    def coset(self, n: int, g: GroupWord) -> FiniteQuotientElement:
        self._check_level(n)
        self.check_word(g)
        return FiniteQuotientElement(n, self.act(n, g, self.base(n)))

    def cell_of(self, n: int, g: GroupWord) -> int:
        return self.act(n, g, self.base(n))

    def right_cell(self, n: int, g: GroupWord) -> int:
        """Label of the right coset Gamma_n g (the cell of g^{-1} Gamma_n)."""
        return self.act(n, self.inv(g), self.base(n))

    def in_subgroup(self, n: int, g: GroupWord) -> bool:
        return self.cell_of(n, g) == self.base(n)

    def descend(self, n: int, cell: int, m: int) -> int:
        """Project a level-n cell down to level m <= n."""
        while n > m:
            n -= 1
            cell = self.project(n, cell)
        return cell

    def cells(self, n: int) -> range:
        return range(self.index(n))

    def require_side(self, side: str) -> None:
        if self.side != side:
            raise ChainError(f"operation needs side={side!r}, chain declares {self.side!r}")

    def validate(self) -> None:
        """Check the chain invariants; raise ChainError on the first failure."""
        prev = 1
        for n in range(1, self.depth + 1):
            k = self.index(n)
            if k <= prev:
                raise ChainError(f"index not strictly increasing at level {n}: {prev} -> {k}")
            if k % prev:
                raise ChainError(f"index {prev} does not divide {k} at level {n}")
            prev = k
        for n in range(1, self.depth):
            if self.project(n, self.base(n + 1)) != self.base(n):
                raise ChainError(f"projection {n + 1}->{n} does not fix the base cell")
            hit = {self.project(n, c) for c in self.cells(n + 1)}
            if len(hit) != self.index(n):
                raise ChainError(f"projection {n + 1}->{n} is not surjective")


# ---------------------------------------------------------------------------
# Z^d backend


def _radix_encode(res: Sequence[int], mod: Sequence[int]) -> int:
    cell = 0
    for r, m in zip(reversed(res), reversed(mod)):
        cell = cell * m + r
    return cell


def _radix_decode(cell: int, mod: Sequence[int]) -> tuple[int, ...]:
    out = []
    for m in mod:
        cell, r = divmod(cell, m)
        out.append(r)
    return tuple(out)


class ZdChain(QuotientChain):
    kind = "zd"

    def __init__(self, d: int, moduli: Sequence[Sequence[int]], side: str = "right"):
        if d < 1:
            raise ChainError("d must be >= 1")
        self.d = d
        self.moduli = tuple(tuple(int(m) for m in row) for row in moduli)
        self.depth = len(self.moduli)
        self.side = side
        if side not in ("right", "left"):
            raise ChainError(f"unknown side {side!r}")
        for n, row in enumerate(self.moduli, 1):
            if len(row) != d or any(m < 1 for m in row):
                raise ChainError(f"bad modulus vector at level {n}: {row}")
        for n in range(1, self.depth):
            lo, hi = self.moduli[n - 1], self.moduli[n]
            if any(h % l for l, h in zip(lo, hi)):
                raise ChainError(f"moduli at level {n} do not divide level {n + 1}")
        self.validate()

    def identity(self) -> GroupWord:
        return GroupWord("zd", (0,) * self.d)

    def word(self, *coords: int) -> GroupWord:
        if len(coords) != self.d:
            raise ChainError(f"expected {self.d} coordinates, got {len(coords)}")
        return GroupWord("zd", tuple(int(c) for c in coords))

    def mul(self, a: GroupWord, b: GroupWord) -> GroupWord:
        if a.kind != "zd" or b.kind != "zd" or len(a.payload) != self.d or len(b.payload) != self.d:
            self.check_word(a)
            self.check_word(b)
        if self.d == 1:
            return GroupWord("zd", (a.payload[0] + b.payload[0],))
        return GroupWord("zd", tuple(x + y for x, y in zip(a.payload, b.payload)))

    def inv(self, a: GroupWord) -> GroupWord:
        return GroupWord("zd", tuple(-x for x in a.payload))

    def check_word(self, g: GroupWord) -> None:
        super().check_word(g)
        if len(g.payload) != self.d:
            raise BackendMismatch(f"expected {self.d} coordinates, got {g.payload}")

    def modulus(self, n: int) -> tuple[int, ...]:
        return (1,) * self.d if n == 0 else self.moduli[n - 1]

    def index(self, n: int) -> int:
        out = 1
        for m in self.modulus(n):
            out *= m
        return out

    def base(self, n: int) -> int:
        return 0

    def right_cell(self, n: int, g: GroupWord) -> int:
        # abelian: Gamma_n g is labelled by the residues of -g
        mod = self.modulus(n)
        if self.d == 1:
            return (-g.payload[0]) % mod[0]
        return _radix_encode([(-x) % m for x, m in zip(g.payload, mod)], mod)

    def residues(self, n: int, cell: int) -> tuple[int, ...]:
        return _radix_decode(cell, self.modulus(n))

    def cell_from_residues(self, n: int, res: Sequence[int]) -> int:
        mod = self.modulus(n)
        return _radix_encode([r % m for r, m in zip(res, mod)], mod)

    def act(self, n: int, g: GroupWord, cell: int) -> int:
        mod = self.modulus(n)
        if self.d == 1:
            return (cell + g.payload[0]) % mod[0]
        res = _radix_decode(cell, mod)
        return _radix_encode([(r + x) % m for r, x, m in zip(res, g.payload, mod)], mod)

    def project(self, n: int, cell: int) -> int:
        if self.d == 1:
            return cell % self.moduli[n - 1][0] if n else 0
        res = _radix_decode(cell, self.moduli[n])
        return self.cell_from_residues(n, res)

    def ball(self, radius: int) -> list[GroupWord]:
        pts = [
            p
            for p in product(range(-radius, radius + 1), repeat=self.d)
            if sum(abs(c) for c in p) <= radius
        ]
        pts.sort(key=lambda p: (sum(abs(c) for c in p), tuple(abs(c) for c in p), p))
        return [GroupWord("zd", p) for p in pts]

    def box(self, lo: Sequence[int], hi: Sequence[int]) -> list[GroupWord]:
        """Cells of the box lo <= g <= hi, first coordinate varying fastest."""
        ranges = [range(a, b + 1) for a, b in zip(lo, hi)]
        return [GroupWord("zd", tuple(reversed(p))) for p in product(*reversed(ranges))]

    def random_word(self, rng, length: int) -> GroupWord:
        return GroupWord("zd", tuple(rng.randint(-length, length) for _ in range(self.d)))

    def truncate(self, depth: int) -> "ZdChain":
        return ZdChain(self.d, self.moduli[:depth], self.side)

    def subsequence(self, levels: Sequence[int]) -> "ZdChain":
        return ZdChain(self.d, [self.moduli[n - 1] for n in levels], self.side)

    def format_word(self, g: GroupWord) -> str:
        return ",".join(str(c) for c in g.payload)

    def parse_word(self, text: str) -> GroupWord:
        text = text.strip().strip("()")
        if text in ("", "e", "1_G"):
            return self.identity()
        try:
            coords = [int(t) for t in text.split(",")]
        except ValueError as exc:
            raise ChainError(f"cannot parse Z^{self.d} word {text!r}") from exc
        return self.word(*coords)

    def to_json(self) -> dict:
        return {
            "backend": "zd",
            "depth": self.depth,
            "side": self.side,
            "zd": {"d": self.d, "moduli": [list(r) for r in self.moduli]},
        }


# ---------------------------------------------------------------------------
# table backend


def _invert_perm(perm: Sequence[int]) -> list[int]:
    out = [0] * len(perm)
    for i, j in enumerate(perm):
        out[j] = i
    return out


class TableChain(QuotientChain):
    """Free group on ``generators`` acting on finite coset spaces.

    ``perms[n-1][i]`` is the permutation of level-n cells induced by generator
    i; ``projections[n-1]`` maps level-(n+1) cells to level-n cells;
    ``bases[n-1]`` is the cell of the identity coset.
    """

    kind = "table"

    def __init__(
        self,
        generators: Sequence[str],
        perms: Sequence[Sequence[Sequence[int]]],
        projections: Sequence[Sequence[int]],
        bases: Sequence[int] | None = None,
        side: str = "right",
    ):
        self.generators = tuple(generators)
        if not self.generators:
            raise ChainError("table backend needs at least one generator")
        for name in self.generators:
            if len(name) != 1 or not name.islower():
                raise ChainError(f"generator names must be single lowercase letters: {name!r}")
        self.perms = [[list(p) for p in level] for level in perms]
        self.depth = len(self.perms)
        self.projections = [list(p) for p in projections]
        self.bases = list(bases) if bases is not None else [0] * self.depth
        self.side = side
        if side != "right":
            # transversal/J-calculus formulas are written for right cosets
            raise ChainError("table backend supports side='right' only")
        if len(self.projections) != max(self.depth - 1, 0):
            raise ChainError("need exactly depth-1 projection maps")
        for n, level in enumerate(self.perms, 1):
            if len(level) != len(self.generators):
                raise ChainError(f"level {n}: one permutation per generator required")
            size = len(level[0])
            for p in level:
                if sorted(p) != list(range(size)):
                    raise ChainError(f"level {n}: generator image is not a permutation")
        self.inverse_perms = [[_invert_perm(p) for p in level] for level in self.perms]
        for n in range(1, self.depth):
            proj = self.projections[n - 1]
            if len(proj) != self.index(n + 1) or any(not 0 <= c < self.index(n) for c in proj):
                raise ChainError(f"projection {n + 1}->{n} has wrong shape")
            for p_hi, p_lo in zip(self.perms[n], self.perms[n - 1]):
                for c in range(self.index(n + 1)):
                    if proj[p_hi[c]] != p_lo[proj[c]]:
                        raise ChainError(f"projection {n + 1}->{n} is not equivariant")
        for n in range(1, self.depth + 1):
            if self._orbit_size(n) != self.index(n):
                raise ChainError(f"level {n}: action is not transitive")
        self.validate()

    def _orbit_size(self, n: int) -> int:
        seen = {self.base(n)}
        todo = [self.base(n)]
        while todo:
            c = todo.pop()
            for p in self.perms[n - 1]:
                if p[c] not in seen:
                    seen.add(p[c])
                    todo.append(p[c])
        return len(seen)

    # words
    def identity(self) -> GroupWord:
        return GroupWord("table", ())

    def word(self, letters: Iterable[int]) -> GroupWord:
        return GroupWord("table", _free_reduce(letters))

    def mul(self, a: GroupWord, b: GroupWord) -> GroupWord:
        self.check_word(a)
        self.check_word(b)
        return GroupWord("table", _free_reduce(a.payload + b.payload))

    def inv(self, a: GroupWord) -> GroupWord:
        return GroupWord("table", tuple(-s for s in reversed(a.payload)))

    def letters(self) -> list[int]:
        out = []
        for i in range(len(self.generators)):
            out += [i + 1, -(i + 1)]
        return out

    # quotients
    def index(self, n: int) -> int:
        return 1 if n == 0 else len(self.perms[n - 1][0])

    def base(self, n: int) -> int:
        return 0 if n == 0 else self.bases[n - 1]

    def act(self, n: int, g: GroupWord, cell: int) -> int:
        if n == 0:
            return 0
        fwd = self.perms[n - 1]
        bwd = self.inverse_perms[n - 1]
        for s in reversed(g.payload):
            cell = fwd[s - 1][cell] if s > 0 else bwd[-s - 1][cell]
        return cell

    def project(self, n: int, cell: int) -> int:
        return 0 if n == 0 else self.projections[n - 1][cell]

    def ball(self, radius: int) -> list[GroupWord]:
        out = [self.identity()]
        frontier = [()]
        for _ in range(radius):
            nxt = []
            for w in frontier:
                for s in self.letters():
                    if w and w[-1] == -s:
                        continue
                    nxt.append(w + (s,))
            out += [GroupWord("table", w) for w in nxt]
            frontier = nxt
        return out

    def random_word(self, rng, length: int) -> GroupWord:
        letters = self.letters()
        return self.word(rng.choice(letters) for _ in range(length))

    def schreier_paths(self, n: int) -> dict[int, GroupWord]:
        """Shortest word u with u . base = c, for each level-n cell c.

        Breadth-first over the Schreier graph; among shortest words the one
        found first in letter order wins.
        """
        start = self.base(n)
        words = {start: ()}
        queue = deque([start])
        while queue:
            c = queue.popleft()
            for s in self.letters():
                w = words[c]
                if w and w[0] == -s:
                    continue
                c2 = self.act(n, GroupWord("table", (s,)), c)
                if c2 not in words:
                    words[c2] = (s,) + w
                    queue.append(c2)
        return {c: GroupWord("table", w) for c, w in words.items()}

    def truncate(self, depth: int) -> "TableChain":
        return TableChain(
            self.generators, self.perms[:depth], self.projections[: max(depth - 1, 0)],
            self.bases[:depth], self.side,
        )

    def subsequence(self, levels: Sequence[int]) -> "TableChain":
        levels = list(levels)
        if levels != sorted(set(levels)) or levels[0] < 1 or levels[-1] > self.depth:
            raise ChainError(f"bad level subsequence {levels}")
        projs = []
        for lo, hi in zip(levels, levels[1:]):
            projs.append([self.descend(hi, c, lo) for c in range(self.index(hi))])
        return TableChain(
            self.generators,
            [self.perms[n - 1] for n in levels],
            projs,
            [self.bases[n - 1] for n in levels],
            self.side,
        )

    def with_bases(self, bases: Sequence[int]) -> "TableChain":
        return TableChain(self.generators, self.perms, self.projections, bases, self.side)

    def format_word(self, g: GroupWord) -> str:
        if not g.payload:
            return "1"
        return "".join(
            self.generators[s - 1] if s > 0 else self.generators[-s - 1].upper() for s in g.payload
        )

    def parse_word(self, text: str) -> GroupWord:
        text = text.strip()
        if text in ("", "1", "e", "1_G"):
            return self.identity()
        letters = []
        for ch in text:
            if ch.lower() not in self.generators:
                raise ChainError(f"unknown generator {ch!r} in {text!r}")
            i = self.generators.index(ch.lower()) + 1
            letters.append(i if ch.islower() else -i)
        return self.word(letters)

    def to_json(self) -> dict:
        return {
            "backend": "table",
            "depth": self.depth,
            "side": self.side,
            "table": {
                "generators": list(self.generators),
                "quotients": [
                    {"size": self.index(n), "gen_perms": self.perms[n - 1], "base": self.base(n)}
                    for n in range(1, self.depth + 1)
                ],
                "projections": self.projections,
            },
        }


# ---------------------------------------------------------------------------
# conjugation and loading


def conjugate_chain(chain: QuotientChain, z: Sequence[GroupWord]) -> QuotientChain:
    """Chain of the conjugates z_n Gamma_n z_n^{-1}.

    The conjugate of Gamma_n is the stabiliser of the cell z_n Gamma_n, so the
    coset spaces and actions are unchanged and only the base cells move.
    """
    if len(z) != chain.depth:
        raise ChainError(f"need one conjugator per level ({chain.depth}), got {len(z)}")
    cells = [chain.cell_of(n, g) for n, g in enumerate(z, 1)]
    for n in range(1, chain.depth):
        if chain.project(n, cells[n]) != cells[n - 1]:
            raise ChainError(f"conjugators incompatible at levels {n}/{n + 1}")
    if isinstance(chain, ZdChain):
        return chain
    assert isinstance(chain, TableChain)
    return chain.with_bases(cells)


def _quotient_to_perms(q: dict, n_gens: int, level: int) -> tuple[list[list[int]], int]:
    size = int(q["size"])
    if "gen_perms" in q:
        perms = [list(map(int, p)) for p in q["gen_perms"]]
        return perms, int(q.get("base", 0))
    mul = q["mul"]
    if len(mul) != size or any(len(row) != size for row in mul):
        raise ChainError(f"level {level}: multiplication table must be {size}x{size}")
    idents = [e for e in range(size) if all(mul[e][x] == x and mul[x][e] == x for x in range(size))]
    if len(idents) != 1:
        raise ChainError(f"level {level}: multiplication table has no unique identity")
    for a in range(size):
        for b in range(size):
            for c in range(size):
                if mul[mul[a][b]][c] != mul[a][mul[b][c]]:
                    raise ChainError(f"level {level}: multiplication table is not associative")
    images = [int(x) for x in q["gen_images"]]
    if len(images) != n_gens:
        raise ChainError(f"level {level}: need one image per generator")
    perms = [[mul[img][x] for x in range(size)] for img in images]
    return perms, idents[0]


def chain_from_json(spec: dict) -> QuotientChain:
    backend = spec.get("backend")
    side = spec.get("side", "right")
    if backend == "zd":
        zd = spec["zd"]
        chain: QuotientChain = ZdChain(int(zd["d"]), zd["moduli"], side)
    elif backend == "table":
        tab = spec["table"]
        quotients = tab["quotients"]
        names = tab.get("generators")
        if names is None:
            first = quotients[0]
            count = len(first["gen_perms"]) if "gen_perms" in first else len(first["gen_images"])
            names = list(string.ascii_lowercase[:count])
        perms, bases = [], []
        for level, q in enumerate(quotients, 1):
            p, b = _quotient_to_perms(q, len(names), level)
            if any(len(row) != int(q["size"]) for row in p):
                raise ChainError(f"level {level}: size does not match permutations")
            perms.append(p)
            bases.append(b)
        chain = TableChain(names, perms, tab.get("projections", []), bases, side)
    else:
        raise ChainError(f"unknown backend {backend!r}")
    if "depth" in spec and int(spec["depth"]) != chain.depth:
        raise ChainError(f"declared depth {spec['depth']} but {chain.depth} levels given")
    return chain


DATA_DIR = Path(__file__).parent / "data"


def builtin_chains() -> list[str]:
    return sorted(p.stem for p in DATA_DIR.glob("*.json"))


def load_chain(path: str | Path) -> QuotientChain:
    """Load a chain-spec JSON file; bare names refer to the shipped fixtures."""
    p = Path(path)
    if not p.exists() and re.fullmatch(r"[\w-]+", str(path)):
        p = DATA_DIR / f"{path}.json"
    with open(p) as fh:
        return chain_from_json(json.load(fh))
