"""Command line front end: ``odoforge <group> <command> [options]``.

Output is JSON by default; windows can also be written as text or (for Z^2)
as a plain PGM. Rationals are printed as "p/q" strings.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
from fractions import Fraction
from pathlib import Path

from .extension import (
    Found,
    Free,
    Marker,
    OdometerSystem,
    ToeplitzSystem,
    bounded_minimality_search,
    clopen_code,
    fiber_product,
    layout_partition,
    phi_approx,
    phi_stage,
    sample_extension_window,
    symbol_partition,
    toeplitz_samples,
)
from .group_core import ChainError, QuotientChain, ZdChain, builtin_chains, load_chain
from .measure_lab import (
    average_measure,
    bounds_sweep,
    empirical_unresolved_fraction,
    metric_d,
    nonuniform_marginals,
    point_mass,
    random_family,
    uniform,
    vkn_bound,
)
from .odometer import act as odo_act, basepoint, make_point, orbit_point
from .stages import resolve_cells
from .toeplitz import (
    HOLE,
    Essential,
    InconclusiveLayout,
    NotEssential,
    essential_test,
    factor_to_odometer,
    generate_toeplitz,
    parity_marking,
    per_sets,
)
from .tower import (
    DepthExhausted,
    ThinningPlan,
    build_tower,
    thin_for_P7,
    thinned,
    tower_from_json,
    tower_to_json,
    verify_tower,
    z0_bound,
    z0_tail,
)
from .verify import run_verify_all


def _q(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def _jsonable(obj):
    if isinstance(obj, Fraction):
        return _q(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


# ---------------------------------------------------------------------------
# argument helpers


def parse_window(chain: QuotientChain, spec: str, tower=None) -> list:
    """Window specs: "0..7", "-8..8", "0..3,0..3" (a Z^d box), "ball:R",
    "D:n" (the tower level D_n), or words separated by ';'."""
    spec = spec.strip()
    if spec == "":
        return []
    if spec.startswith("ball:"):
        return chain.ball(int(spec[5:]))
    if spec.startswith("D:"):
        if tower is None:
            raise ChainError("window D:n needs a tower")
        return list(tower.levels[int(spec[2:])])
    if ".." in spec and isinstance(chain, ZdChain):
        parts = spec.split(",")
        if len(parts) != chain.d:
            raise ChainError(f"box {spec!r} has {len(parts)} ranges, group has rank {chain.d}")
        lo, hi = [], []
        for p in parts:
            a, b = p.split("..")
            lo.append(int(a))
            hi.append(int(b))
        if any(a > b for a, b in zip(lo, hi)):
            return []
        return chain.box(lo, hi)
    return [chain.parse_word(w) for w in spec.split(";") if w.strip()]


def parse_point(chain: QuotientChain, spec: str | None, depth: int):
    if spec is None or spec in ("", "e", "base"):
        return basepoint(chain, depth)
    if spec.startswith("tau:"):
        return orbit_point(chain, chain.parse_word(spec[4:]), depth)
    cells = [int(c) for c in spec.split(",")]
    return make_point(chain, cells).truncate(min(depth, len(cells)))


def parse_plan(spec: str, tower) -> ThinningPlan:
    levels = tuple(int(x) for x in spec.split(","))
    return ThinningPlan(levels, (1,) + tuple(tower.size(n) for n in levels))


def _load(args):
    chain = load_chain(args.chain)
    if getattr(args, "tower", None):
        tower = tower_from_json(chain, json.loads(Path(args.tower).read_text()))
        chain = tower.chain
    else:
        tower = build_tower(chain)
    depth = getattr(args, "depth", None)
    if depth is not None:
        if depth > tower.depth:
            raise ChainError(f"depth {depth} exceeds tower depth {tower.depth}")
    return chain, tower


def _depth(args, tower) -> int:
    return tower.depth if args.depth is None else args.depth


def _jobs(args) -> int:
    if args.jobs is not None:
        return args.jobs
    return int(os.environ.get("ODOFORGE_JOBS", "1"))


# ---------------------------------------------------------------------------
# window export


def window_text(chain, cells, values) -> str:
    sym = ["?" if v is HOLE else str(v) for v in values]
    if isinstance(chain, ZdChain) and chain.d == 2 and cells:
        xs = sorted({c.payload[0] for c in cells})
        ys = sorted({c.payload[1] for c in cells}, reverse=True)
        at = {c.payload: s for c, s in zip(cells, sym)}
        return "\n".join("".join(at.get((x, y), " ") for x in xs) for y in ys) + "\n"
    if isinstance(chain, ZdChain) and chain.d == 1:
        return "".join(sym) + "\n"
    return "".join(f"{chain.format_word(c)}\t{s}\n" for c, s in zip(cells, sym))


def window_pgm(chain, cells, values, alphabet) -> str:
    """Plain PGM (P2); holes are 0, symbol i of the alphabet is i + 1."""
    if not (isinstance(chain, ZdChain) and chain.d == 2):
        raise ChainError("PGM export needs a Z^2 chain")
    maxval = max(1, len(alphabet))
    if not cells:
        return f"P2\n0 0\n{maxval}\n"
    xs = sorted({c.payload[0] for c in cells})
    ys = sorted({c.payload[1] for c in cells}, reverse=True)
    grey = {s: i + 1 for i, s in enumerate(alphabet)}
    at = {c.payload: (0 if v is HOLE else grey[v]) for c, v in zip(cells, values)}
    rows = [" ".join(str(at.get((x, y), 0)) for x in xs) for y in ys]
    return f"P2\n{len(xs)} {len(ys)}\n{maxval}\n" + "\n".join(rows) + "\n"


def window_json(chain, cells, values, **extra) -> dict:
    out = {"cells": [chain.format_word(c) for c in cells],
           "values": [None if v is HOLE else v for v in values]}
    out.update(extra)
    return out


def _emit(args, payload, text: str | None = None, pgm: str | None = None) -> None:
    fmt = getattr(args, "format", "json")
    if fmt == "txt" and text is not None:
        out = text
    elif fmt == "pgm":
        if pgm is None:
            raise ChainError("this command has no PGM output")
        out = pgm
    else:
        out = json.dumps(_jsonable(payload), indent=2) + "\n"
    if getattr(args, "out", None):
        Path(args.out).write_text(out)
    else:
        sys.stdout.write(out)


# ---------------------------------------------------------------------------
# commands


def cmd_chain(args) -> int:
    if args.action == "list":
        _emit(args, {"builtin": builtin_chains()})
        return 0
    chain = load_chain(args.chain)
    chain.validate()
    _emit(args, {"depth": chain.depth, "indices": [chain.index(n) for n in range(chain.depth + 1)],
                 "spec": chain.to_json()})
    return 0


def cmd_odometer(args) -> int:
    chain, tower = _load(args)
    depth = _depth(args, tower)
    if args.action == "cells":
        n = args.level if args.level is not None else depth
        _emit(args, {"level": n, "index": chain.index(n),
                     "basepoint": list(basepoint(chain, depth).cells),
                     "labels": [chain.format_word(d) for d in tower.levels[n]]})
        return 0
    z = parse_point(chain, args.point, depth)
    g = chain.parse_word(args.g)
    _emit(args, {"point": list(z.cells), "g": args.g, "image": list(odo_act(chain, g, z).cells)})
    return 0


def cmd_tower(args) -> int:
    chain, tower = _load(args)
    if args.depth is not None and args.depth < tower.depth:
        tower = tower.truncate(args.depth)
    if args.action == "build":
        _emit(args, tower_to_json(tower, witnesses=not args.no_witnesses))
        return 0
    if args.action == "verify":
        rep = verify_tower(tower)
        _emit(args, rep.to_json())
        return 0 if rep.passed else 1
    try:
        plan = parse_plan(args.plan, tower) if args.plan else thin_for_P7(tower, args.count)
    except DepthExhausted as exc:
        _emit(args, {"error": str(exc), "failed_at": exc.failed_at, "achieved": exc.achieved})
        return 1
    payload = {"plan": plan.to_json(), "z0_bound": z0_bound(tower, plan), "z0_tail": z0_tail(plan)}
    if args.emit_tower:
        payload["tower"] = tower_to_json(thinned(tower, plan), witnesses=False)
    _emit(args, payload)
    return 0


def _toeplitz_window(args, chain, tower):
    depth = _depth(args, tower)
    window = parse_window(chain, args.window, tower)
    g = chain.parse_word(args.g) if args.g else None
    marking = parity_marking(depth)
    return generate_toeplitz(tower, marking, depth, window, translator=g, alphabet="ab")


def cmd_toeplitz(args) -> int:
    chain, tower = _load(args)
    x = _toeplitz_window(args, chain, tower)
    if args.action == "window":
        _emit(args, window_json(chain, x.cells, x.values, depth=x.depth,
                                holes=[chain.format_word(h) for h in x.holes()]),
              text=window_text(chain, x.cells, x.values),
              pgm=window_pgm(chain, x.cells, x.values, x.alphabet) if args.format == "pgm" else None)
        return 0
    if args.action == "periods":
        rep = per_sets(x, args.level)
        _emit(args, {"level": rep.level,
                     "per": {s: sorted(chain.format_word(g) for g in cells) for s, cells in rep.sets.items()},
                     "layout": [[str(a), b] for a, b in rep.layout()]})
        return 0
    if args.action == "essential":
        verdict = essential_test(x, args.level, args.radius)
        if isinstance(verdict, Essential):
            _emit(args, {"verdict": "essential", "radius": verdict.radius})
        elif isinstance(verdict, NotEssential):
            _emit(args, {"verdict": "not essential", "witness": chain.format_word(verdict.witness)})
        else:
            _emit(args, {"verdict": "inconclusive", "reason": verdict.reason})
        return 0
    try:
        z = factor_to_odometer(x, args.level)
    except InconclusiveLayout as exc:
        _emit(args, {"verdict": "inconclusive", "reason": str(exc)})
        return 2
    _emit(args, {"point": list(z.cells)})
    return 0


def _phi_json(chain, window, phi) -> list:
    out = []
    for g in window:
        v = phi[g]
        if isinstance(v, Marker):
            out.append({"cell": chain.format_word(g), "marker": chain.format_word(v.rep), "stage": v.stage})
        elif isinstance(v, Free):
            out.append({"cell": chain.format_word(g), "free": list(getattr(v.base, "cells", v.base))})
        else:
            out.append({"cell": chain.format_word(g), "pending": True})
    return out


def _system(args, tower, depth):
    t = tower.truncate(depth) if depth < tower.depth else tower
    if args.system == "odometer":
        return OdometerSystem(t)
    return ToeplitzSystem(t, parity_marking(depth), window=tower.chain.ball(1))


def cmd_extension(args) -> int:
    chain, tower = _load(args)
    depth = _depth(args, tower)
    window = parse_window(chain, args.window, tower)
    if args.action == "resolve":
        z = parse_point(chain, args.point, depth)
        res = resolve_cells(tower, z, window, depth)
        rows = [{"cell": chain.format_word(g), "stage": r.stage,
                 "rep": None if r.rep is None else chain.format_word(r.rep)} for g, r in res.items()]
        _emit(args, {"point": list(z.cells), "cells": rows},
              text="".join(f"{r['cell']}\t{r['stage'] if r['stage'] is not None else '?'}\n" for r in rows))
        return 0
    sys_ = _system(args, tower, depth)
    y = sys_.act(chain.parse_word(args.g), sys_.basepoint()) if args.g else sys_.basepoint()
    if args.action == "phi":
        phi = (phi_approx if args.pending else phi_stage)(sys_, y, args.level, window)
        _emit(args, {"level": args.level, "phi": _phi_json(chain, window, phi)})
        return 0
    if args.action == "sample":
        translators = parse_window(chain, args.translators, tower)
        samples = sample_extension_window(sys_, translators, window)
        _emit(args, {"samples": [{"base": list(s.base.cells),
                                  "phi": _phi_json(chain, window, dict(zip(window, s.phi)))} for s in samples]})
        return 0
    if args.action == "search":
        res = bounded_minimality_search(sys_, y, args.level, args.radius)
        if isinstance(res, Found):
            _emit(args, {"found": chain.format_word(res.witness)})
            return 0
        _emit(args, {"found": None, "radius": args.radius})
        return 2
    if not isinstance(sys_, ToeplitzSystem):
        raise ChainError(f"'{args.action}' needs --system toeplitz")
    x = sys_.view(y, window)
    if args.action == "code":
        part = symbol_partition(chain, x.alphabet) if args.level is None else layout_partition(
            x, args.level, parse_window(chain, args.support, tower))
        code = clopen_code(x, part)
        _emit(args, window_json(chain, x.cells, [str(c) if c is not HOLE else HOLE for c in code]),
              text=window_text(chain, x.cells, code))
        return 0
    # fiber: pair samples of the Toeplitz system over D_n with themselves
    translators = parse_window(chain, args.translators, tower)
    samples = toeplitz_samples(sys_, translators, window)
    level = depth if args.level is None else args.level
    pairs = fiber_product(samples, samples, level)
    _emit(args, {"level": level, "pairs": len(pairs), "diagonal": sum(a == b for a, b in pairs)})
    return 0


def _family(args, chain, depth, which: str, seed_offset: int):
    if which == "uniform":
        return uniform(chain, depth)
    if which == "random":
        return random_family(chain, random.Random(args.seed + seed_offset), depth)
    return point_mass(chain, parse_point(chain, which[6:] if which.startswith("point:") else which, depth))


def cmd_measure(args) -> int:
    chain, tower = _load(args)
    depth = _depth(args, tower)
    if args.action == "distance":
        mu = _family(args, chain, depth, args.mu, 0)
        nu = _family(args, chain, depth, args.nu, 1)
        m = metric_d(chain, mu, nu, depth)
        _emit(args, {"depth": depth, "partial": m.partial, "tail": m.tail, "upper": m.upper})
        return 0
    if args.action == "average":
        lam = _family(args, chain, depth, args.mu, 0)
        avg = average_measure(lam, tower, args.level)
        bad = nonuniform_marginals(chain, avg, args.level)
        _emit(args, {"level": args.level, "weights": list(avg.level(args.level).weights),
                     "nonuniform": [[m, c, w] for m, c, w in bad]})
        return 0 if not bad else 1
    if args.action == "vkn":
        plan = parse_plan(args.plan, tower) if args.plan else thin_for_P7(tower)
        b = vkn_bound(tower, plan, args.level, args.k, args.horizon)
        _emit(args, {"plan": list(plan.levels), **b.to_json()})
        return 0
    if args.action == "empirical":
        cells = parse_window(chain, args.window, tower) if args.window else None
        f = empirical_unresolved_fraction(tower, args.level, args.k, args.horizon, cells, count=args.count)
        _emit(args, {"fraction": f})
        return 0
    rows = bounds_sweep(tower)
    _emit(args, {"configs": len(rows), "ok": all(r.ok for r in rows), "rows": [r.to_json() for r in rows]})
    return 0 if all(r.ok for r in rows) else 1


def cmd_verify(args) -> int:
    chain = load_chain(args.chain)
    tower_spec = json.loads(Path(args.tower).read_text()) if args.tower else None
    report = run_verify_all(chain.to_json(), tower_spec, seed=args.seed, jobs=_jobs(args),
                            samples=args.samples, radius=args.radius)
    if args.format == "txt":
        lines = [f"{'PASS' if c['passed'] else 'FAIL'}  {c['check']}  [{c['anchor']}]"
                 + ("" if c["passed"] else f"  {c['first_failure']}") for c in report["checks"]]
        lines.append(f"violations: {report['violations']}")
        _emit(args, report, text="\n".join(lines) + "\n")
    else:
        _emit(args, report)
    return 0 if report["passed"] else 1


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="odoforge", description="Odometer, tower and Toeplitz toolkit")
    sub = p.add_subparsers(dest="group", required=True)

    def common(sp, tower=True, window=False):
        sp.add_argument("--chain", required=True, help="builtin name or chain JSON path")
        if tower:
            sp.add_argument("--tower", help="tower JSON (default: build one)")
        sp.add_argument("--depth", type=int)
        sp.add_argument("--format", choices=["json", "txt", "pgm"], default="json")
        sp.add_argument("--out", help="write output to a file")
        sp.add_argument("--seed", type=int, default=0)
        if window:
            sp.add_argument("--window", default="ball:2")

    sp = sub.add_parser("chain", help="inspect a quotient chain")
    sp.add_argument("action", choices=["info", "list"])
    sp.add_argument("--chain", default="dyadic")
    sp.add_argument("--format", choices=["json"], default="json")
    sp.set_defaults(func=cmd_chain)

    sp = sub.add_parser("odometer", help="odometer cells and the action")
    sp.add_argument("action", choices=["cells", "act"])
    common(sp)
    sp.add_argument("--level", type=int)
    sp.add_argument("--point")
    sp.add_argument("--g", default="0")
    sp.set_defaults(func=cmd_odometer)

    sp = sub.add_parser("tower", help="build, verify and thin transversal towers")
    sp.add_argument("action", choices=["build", "verify", "thin"])
    common(sp)
    sp.add_argument("--plan", help="comma separated levels")
    sp.add_argument("--count", type=int)
    sp.add_argument("--no-witnesses", action="store_true")
    sp.add_argument("--emit-tower", action="store_true")
    sp.set_defaults(func=cmd_tower)

    sp = sub.add_parser("toeplitz", help="stage-marked Toeplitz windows")
    sp.add_argument("action", choices=["window", "periods", "essential", "factor"])
    common(sp, window=True)
    sp.add_argument("--g", help="translator t (window of t.x)")
    sp.add_argument("--level", type=int, default=1)
    sp.add_argument("--radius", type=int, default=4)
    sp.set_defaults(func=cmd_toeplitz)

    sp = sub.add_parser("extension", help="stage resolution and the extension maps")
    sp.add_argument("action", choices=["resolve", "phi", "sample", "search", "code", "fiber"])
    common(sp, window=True)
    sp.add_argument("--system", choices=["odometer", "toeplitz"], default="odometer")
    sp.add_argument("--point")
    sp.add_argument("--g")
    sp.add_argument("--level", type=int)
    sp.add_argument("--pending", action="store_true", help="unfilled cells as pending")
    sp.add_argument("--translators", default="D:3")
    sp.add_argument("--support", default="ball:2")
    sp.add_argument("--radius", type=int, default=4)
    sp.set_defaults(func=cmd_extension)

    sp = sub.add_parser("measure", help="exact cylinder measures and bounds")
    sp.add_argument("action", choices=["distance", "average", "vkn", "empirical", "sweep"])
    common(sp)
    sp.add_argument("--mu", default="uniform", help="uniform, random, or point:<cells>")
    sp.add_argument("--nu", default="point:base")
    sp.add_argument("--level", type=int, default=1)
    sp.add_argument("--k", type=int, default=1)
    sp.add_argument("--horizon", type=int, default=3)
    sp.add_argument("--plan")
    sp.add_argument("--window", help="cells for the empirical count")
    sp.add_argument("--count", choices=["late", "unresolved"], default="late")
    sp.set_defaults(func=cmd_measure)

    sp = sub.add_parser("verify", help="run the invariant suite")
    sp.add_argument("action", choices=["all"])
    sp.add_argument("--chain", required=True)
    sp.add_argument("--tower")
    sp.add_argument("--jobs", type=int, help="worker processes (default $ODOFORGE_JOBS or 1)")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--samples", type=int, default=1000)
    sp.add_argument("--radius", type=int)
    sp.add_argument("--format", choices=["json", "txt"], default="json")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ChainError, ValueError, KeyError) as exc:
        print(f"odoforge: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
