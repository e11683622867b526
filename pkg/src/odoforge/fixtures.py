"""Builders for the shipped chain fixtures (``python -m odoforge.fixtures`` rewrites data/)."""

from __future__ import annotations

import json
import random

from .group_core import DATA_DIR, TableChain, ZdChain


def dyadic_chain(depth: int = 14) -> ZdChain:
    return ZdChain(1, [[2**n] for n in range(1, depth + 1)])


def z2_chain(depth: int = 7) -> ZdChain:
    return ZdChain(2, [[2**n, 2**n] for n in range(1, depth + 1)])


def tree_chain(depth: int = 10, seed: int = 7) -> TableChain:
    """F(a, b) acting on the levels of the binary tree.

    A level-n vertex is an n-bit integer, first letter in bit 0. ``a`` is the
    adding machine x -> x + 1; ``b`` flips bit i according to a seeded random
    portrait indexed by the lower bits. Stabilisers are not normal.
    """
    rng = random.Random(seed)
    portrait = [[rng.randint(0, 1) for _ in range(2**i)] for i in range(depth)]

    def b(x: int, n: int) -> int:
        out = 0
        for i in range(n):
            bit = (x >> i) & 1
            out |= (bit ^ portrait[i][x & ((1 << i) - 1)]) << i
        return out

    perms = []
    for n in range(1, depth + 1):
        size = 2**n
        perms.append([[(x + 1) % size for x in range(size)], [b(x, n) for x in range(size)]])
    projections = [[x % 2**n for x in range(2 ** (n + 1))] for n in range(1, depth)]
    return TableChain(("a", "b"), perms, projections)


def _dihedral8() -> list[list[int]]:
    # element r^i s^j encoded as i + 4j
    def mul(x: int, y: int) -> int:
        i, j = x % 4, x // 4
        k, l = y % 4, y // 4
        if j == 0:
            return (i + k) % 4 + 4 * l
        return (i - k) % 4 + 4 * (1 - l)

    return [[mul(x, y) for y in range(8)] for x in range(8)]


def table3_spec() -> dict:
    """F(a, b) -> D4 -> Z2 x Z2 -> Z2, given by multiplication tables."""
    z2 = [[0, 1], [1, 0]]
    v4 = [[x ^ y for y in range(4)] for x in range(4)]
    d8 = _dihedral8()
    # D4 -> V4: r -> (1,1)=3, s -> (1,0)=1; V4 -> Z2: first bit
    def d8_to_v4(x: int) -> int:
        i, j = x % 4, x // 4
        return (3 if i % 2 else 0) ^ (1 if j else 0)

    return {
        "backend": "table",
        "depth": 3,
        "side": "right",
        "table": {
            "generators": ["a", "b"],
            "quotients": [
                {"size": 2, "mul": z2, "gen_images": [1, 0]},
                {"size": 4, "mul": v4, "gen_images": [1, 2]},
                # a -> s, b -> s r
                {"size": 8, "mul": d8, "gen_images": [4, d8[4][1]]},
            ],
            "projections": [[x & 1 for x in range(4)], [d8_to_v4(x) for x in range(8)]],
        },
    }


def write_all() -> None:
    DATA_DIR.mkdir(exist_ok=True)
    specs = {
        "dyadic": dyadic_chain().to_json(),
        "z2": z2_chain().to_json(),
        "tree": tree_chain().to_json(),
        "table3": table3_spec(),
    }
    for name, spec in specs.items():
        with open(DATA_DIR / f"{name}.json", "w") as fh:
            json.dump(spec, fh, separators=(",", ":"))
            fh.write("\n")


if __name__ == "__main__":
    write_all()
