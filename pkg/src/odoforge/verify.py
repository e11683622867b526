"""The full invariant suite behind ``odoforge verify all``.

Every check is a top-level function taking a picklable context dict and
returning a plain-JSON result, so checks can run in worker processes and be
merged in a fixed order. Nothing in a result depends on timing or on the
worker that produced it.
"""

from __future__ import annotations

import random
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction

from .extension import (
    OdometerSystem,
    ToeplitzSystem,
    clopen_code,
    fiber_agreement,
    fiber_product,
    jpartition_equivariance_check,
    one_one_check,
    phi_equivariance_check,
    sample_extension_window,
    stage_invariance_check,
    symbol_partition,
    toeplitz_samples,
)
from .group_core import QuotientChain, ZdChain, chain_from_json
from .measure_lab import (
    average_measure,
    bounds_sweep,
    metric_d,
    nonuniform_marginals,
    point_mass,
    random_family,
    uniform,
)
from .odometer import all_points, basepoint, orbit_point
from .stages import resolve_cells, stage_sets
from .toeplitz import (
    InconclusiveLayout,
    factor_to_odometer,
    generate_toeplitz,
    hole_density,
    parity_marking,
    translate,
    window_property_violations,
)
from .tower import (
    DepthExhausted,
    build_tower,
    thin_for_P7,
    tower_from_json,
    valid_plans,
    verify_tower,
    z0_bound,
    z0_tail,
)


def q(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def _result(name: str, anchor: str, violations: int, detail: dict, first: str | None = None) -> dict:
    return {
        "check": name,
        "anchor": anchor,
        "passed": violations == 0,
        "violations": violations,
        "first_failure": first,
        "detail": detail,
    }


def _setup(ctx: dict):
    chain = chain_from_json(ctx["chain"])
    tower = tower_from_json(chain, ctx["tower"]) if ctx.get("tower") else build_tower(chain)
    return tower.chain, tower


def _work_depth(chain: QuotientChain, cap: int) -> int:
    """Deepest level <= cap with at most 1024 cells."""
    d = 1
    while d < chain.depth and d < cap and chain.index(d + 1) <= 1024:
        d += 1
    return d


def _window(chain: QuotientChain, radius: int):
    return chain.ball(radius)


def _radius(chain: QuotientChain, ctx: dict) -> int:
    if ctx.get("radius") is not None:
        return ctx["radius"]
    return 8 if isinstance(chain, ZdChain) and chain.d == 1 else (3 if isinstance(chain, ZdChain) else 2)


# ---------------------------------------------------------------------------
# checks


def check_tower(ctx: dict) -> list[dict]:
    chain, tower = _setup(ctx)
    if not ctx.get("tower"):
        tower.all_witnesses()
    rep = verify_tower(tower)
    out = []
    for r in rep.results:
        out.append(
            _result(
                f"tower {r.name}",
                {"P1": "1_G in D_1 and D_n inside D_{n+1}", "P2": "D_n is a right transversal of Gamma_n",
                 "P4": "D_n = disjoint union of v D_j over v in D_n n Gamma_j"}[r.name],
                0 if r.passed else 1,
                {"depth": tower.depth, "note": r.detail},
                None if r.passed else f"{r.detail}: {r.counterexample}",
            )
        )
    out.append(_result("tower P3 coverage", "largest ball inside D_N (reported only)", 0,
                       {"radius": rep.coverage_radius}))
    return out


def check_plans(ctx: dict) -> list[dict]:
    chain, tower = _setup(ctx)
    try:
        plan = thin_for_P7(tower)
    except DepthExhausted as exc:
        return [_result("P7 greedy plan", "|D_{n_{i-1}}|/|D_{n_i}| < 2^-(i+1)", 1, {}, str(exc))]
    bad = [r for i, r in enumerate(plan.ratios, 1) if not r < Fraction(1, 2 ** (i + 1))]
    plans = valid_plans(tower.sizes(), max_len=4)[:500]
    over = [p.levels for p in plans if z0_bound(tower, p) > Fraction(1, 2)]
    return [
        _result("P7 greedy plan", "|D_{n_{i-1}}|/|D_{n_i}| < 2^-(i+1)", len(bad),
                {"levels": list(plan.levels), "ratios": [q(r) for r in plan.ratios]}),
        _result("Z_0 bound", "sum of plan ratios <= 1/2", len(over),
                {"greedy": q(z0_bound(tower, plan)), "tail": q(z0_tail(plan)), "plans_checked": len(plans)},
                str(over[0]) if over else None),
    ]


def check_jpartition(ctx: dict) -> list[dict]:
    chain, tower = _setup(ctx)
    depth = _work_depth(chain, 5)
    window = _window(chain, _radius(chain, ctx))
    multi = 0
    mismatch = []
    points = 0
    for z in all_points(chain, depth):
        points += 1
        fast = resolve_cells(tower, z, window, depth)
        slow = stage_sets(tower, z, window, depth)
        for g in window:
            if fast[g].stage != slow[g]:
                mismatch.append((z.cells, chain.format_word(g)))
    inv = stage_invariance_check(tower, basepoint(chain, depth), window)
    return [
        _result("J-partition", "stages z_n Gamma_n D_{n-1} minus earlier stages partition the captured cells",
                multi + len(mismatch), {"depth": depth, "points": points, "window": len(window)},
                str(mismatch[0]) if mismatch else None),
        _result("stage invariance", "min(g) = min(gamma g), gamma in Gamma_j, j >= min(g)", len(inv),
                {"window": len(window)}, str(inv[0]) if inv else None),
    ]


def check_jotas(ctx: dict) -> list[dict]:
    chain, tower = _setup(ctx)
    depth = _work_depth(chain, 6)
    rng = random.Random(ctx["seed"])
    window = _window(chain, _radius(chain, ctx))
    bad = 0
    first = None
    cases = ctx["samples"]
    for _ in range(cases):
        z = orbit_point(chain, chain.random_word(rng, 12), depth)
        g = chain.random_word(rng, 6)
        v = jpartition_equivariance_check(tower, z, g, window)
        if v and first is None:
            first = f"g={chain.format_word(g)} z={z.cells} cell={chain.format_word(v[0])}"
        bad += len(v)
    return [_result("J equivariance", "g J_n(y) = J_n(g y)", bad, {"cases": cases, "depth": depth}, first)]


def _systems(chain, tower, depth):
    tdepth = tower.truncate(depth) if depth < tower.depth else tower
    return [
        ("odometer", OdometerSystem(tdepth)),
        ("toeplitz", ToeplitzSystem(tdepth, parity_marking(depth), window=chain.ball(1))),
    ]


def check_phi(ctx: dict) -> list[dict]:
    chain, tower = _setup(ctx)
    depth = _work_depth(chain, 6)
    rng = random.Random(ctx["seed"] + 1)
    window = _window(chain, min(_radius(chain, ctx), 3))
    out = []
    for name, sys in _systems(chain, tower, depth):
        bad = one_bad = 0
        first = None
        for _ in range(ctx["samples"]):
            y = sys.act(chain.random_word(rng, 12), sys.basepoint())
            h = chain.random_word(rng, 6)
            i = rng.randint(0, depth)
            v = phi_equivariance_check(sys, y, h, i, window)
            if v and first is None:
                first = f"h={chain.format_word(h)} i={i} cell={chain.format_word(v[0])}"
            bad += len(v)
            gamma = one_one_check(sys, y, h, rng.randint(1, depth))
            one_bad += gamma is not None
        out.append(_result(f"phi equivariance ({name})", "phi_i(h y)(g) = phi_i(y)(h^{-1} g)", bad,
                           {"cases": ctx["samples"], "depth": depth}, first))
        out.append(_result(f"fiber coordinates ({name})", "g t_{n,y} = t_{n,gy} gamma, gamma in Gamma_n", one_bad,
                           {"cases": ctx["samples"]}))
    return out


def check_fibers(ctx: dict) -> list[dict]:
    chain, tower = _setup(ctx)
    depth = _work_depth(chain, 6)
    h_level = min(5, depth)
    window = _window(chain, min(_radius(chain, ctx), 3))
    out = []
    for name, sys in _systems(chain, tower, depth):
        samples = sample_extension_window(sys, tower.levels[h_level], window)
        bad = 0
        first = None
        comparisons = 0
        for level in range(1, h_level + 1):
            rep = fiber_agreement(sys, samples, window, level)
            comparisons += rep.comparisons
            bad += len(rep.violations)
            if rep.violations and first is None:
                first = str(rep.violations[0])
        out.append(_result(f"fiber agreement ({name})", "x(g) = d^{-1} y_0 on captured cells over a shared base",
                           bad, {"samples": len(samples), "translators": f"D_{h_level}", "comparisons": comparisons},
                           first))
    return out


def check_toeplitz(ctx: dict) -> list[dict]:
    chain, tower = _setup(ctx)
    depth = _work_depth(chain, 6)
    window = _window(chain, _radius(chain, ctx) + 2)
    x = generate_toeplitz(tower, parity_marking(depth), depth, window)
    rng = random.Random(ctx["seed"] + 2)
    viol = window_property_violations(x)
    for _ in range(20):
        viol += window_property_violations(translate(x, chain.random_word(rng, 8)))
    dens_bad = []
    for n in range(0, depth + 1):
        hd = hole_density(tower, n, depth)
        if not hd.ok:
            dens_bad.append(n)
    # factor map from period layouts against tau(translator)
    fdepth = min(depth, 3)
    fwin = _factor_window(chain)
    base = generate_toeplitz(tower, parity_marking(depth), depth, fwin)
    wrong = 0
    inconclusive = 0
    for _ in range(30):
        g = chain.random_word(rng, 10)
        try:
            f = factor_to_odometer(translate(base, g), fdepth)
        except InconclusiveLayout:
            inconclusive += 1
            continue
        wrong += f != orbit_point(chain, g, fdepth)
    return [
        _result("Toeplitz window property", "x(gamma g) = x(g), gamma in Gamma_{min(g)}", len(viol),
                {"window": len(window), "depth": depth, "holes": len(x.holes())},
                str(viol[0]) if viol else None),
        _result("hole density", "cells of D_M first captured after stage n <= |D_M| sum r_m", len(dens_bad),
                {"depth": depth}),
        _result("factor map", "layout factor of g x = tau(g)", wrong,
                {"cases": 30, "depth": fdepth, "inconclusive": inconclusive}),
    ]


def _factor_window(chain: QuotientChain):
    # level-3 layouts need several points of every conjugated orbit in view
    if isinstance(chain, ZdChain):
        side = 2 * max(chain.modulus(min(3, chain.depth)))
        return chain.box((0,) * chain.d, (side - 1,) * chain.d) if chain.d > 1 else chain.ball(3 * side)
    return chain.ball(5)


def _left_transversal(chain, tower, n: int) -> bool:
    return len({chain.cell_of(n, d) for d in tower.levels[n]}) == chain.index(n)


def check_measures(ctx: dict) -> list[dict]:
    chain, tower = _setup(ctx)
    out = []
    # metric: each truncation contains the deeper one
    levels = [n for n in (2, 4, 6, 10, 14) if n <= chain.depth]
    nu = uniform(chain, levels[-1] if levels else 1)
    delta = point_mass(chain, basepoint(chain, levels[-1] if levels else 1))
    bad = 0
    detail = {}
    deep = metric_d(chain, nu, delta, levels[-1]) if levels else None
    for n in levels:
        m = metric_d(chain, nu, delta, n)
        detail[str(n)] = [q(m.partial), q(m.tail)]
        bad += not (m.partial <= deep.partial and deep.upper <= m.upper)
    out.append(_result("metric truncation", "d(nu, delta) within [partial, partial + 2^{1-N}]", bad, detail))
    # averaging: uniform marginals wherever D_n is also a left transversal
    d = _work_depth(chain, 4)
    rng = random.Random(ctx["seed"] + 3)
    lams = [point_mass(chain, basepoint(chain, d)), random_family(chain, rng, d)]
    bad = 0
    skipped = []
    for n in range(1, d + 1):
        if not _left_transversal(chain, tower, n):
            skipped.append(n)
            continue
        for lam in lams:
            bad += len(nonuniform_marginals(chain, average_measure(lam, tower, n), n))
    out.append(_result("averaged marginals", "mu_n(C_m) = mu_n(g C_m), m <= n", bad,
                       {"levels": d, "skipped_not_left_transversal": skipped}))
    rows = bounds_sweep(tower)
    fails = [r for r in rows if not r.ok]
    out.append(_result("V_kn bounds", "empirical <= partial + tail <= |D_n| 2^-k", len(fails),
                       {"configs": len(rows)}, str(fails[0].to_json()) if fails else None))
    return out


def check_coding(ctx: dict) -> list[dict]:
    chain, tower = _setup(ctx)
    depth = _work_depth(chain, 5)
    window = chain.ball(2)
    sys = ToeplitzSystem(tower.truncate(depth) if depth < tower.depth else tower, parity_marking(depth),
                         window=window)
    x = sys.view(chain.identity())
    part = symbol_partition(chain, x.alphabet)
    rng = random.Random(ctx["seed"] + 4)
    bad = 0
    if clopen_code(x, part) != x.values:
        bad += 1
    for _ in range(10):
        h = chain.random_word(rng, 6)
        hinv = chain.inv(h)
        lhs = clopen_code(translate(x, hinv), part)
        rhs = clopen_code(x, part, [chain.mul(h, g) for g in window])
        bad += lhs != rhs
    hs = list(tower.levels[min(3, depth)])
    A = toeplitz_samples(sys, hs)
    pairs = fiber_product(A, A, depth)
    bad_fp = sum(a != b for a, b in pairs)
    for _ in range(5):
        h = chain.random_word(rng, 6)
        shifted = toeplitz_samples(sys, [chain.mul(g, h) for g in hs])
        bad_fp += sum(a != b for a, b in fiber_product(shifted, shifted, depth))
    return [
        _result("clopen coding", "x'(g) = i iff g^{-1} x in A_i; commutes with shifts", bad, {"window": len(window)}),
        _result("fiber product", "identity factor gives the diagonal", bad_fp, {"pairs": len(pairs)}),
    ]


CHECKS = [
    check_tower,
    check_plans,
    check_jpartition,
    check_jotas,
    check_phi,
    check_fibers,
    check_toeplitz,
    check_measures,
    check_coding,
]


def _run(args):
    index, ctx = args
    return CHECKS[index](ctx)


def run_verify_all(chain_spec: dict, tower_spec: dict | None = None, seed: int = 0, jobs: int = 1,
                   samples: int = 1000, radius: int | None = None) -> dict:
    ctx = {"chain": chain_spec, "tower": tower_spec, "seed": seed, "samples": samples, "radius": radius}
    tasks = [(i, ctx) for i in range(len(CHECKS))]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_run, tasks))
    else:
        parts = [_run(t) for t in tasks]
    checks = [c for part in parts for c in part]
    total = sum(c["violations"] for c in checks)
    first = next((f"{c['check']}: {c['first_failure']}" for c in checks if not c["passed"]), None)
    return {"checks": checks, "violations": total, "passed": total == 0, "first_failure": first, "seed": seed}
