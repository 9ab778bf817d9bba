"""Acceptance criteria 1-12, one PASS/FAIL line each (see the terminal summary)."""
import math

import numpy as np
import pytest

from conftest import record_criterion
from fpuriemann.conservative import ConsShockPoint, bifurcation_check, dset_slope, solve_conjugate, trace_dset
from fpuriemann.errors import NoSolutionError, RiemannLabError
from fpuriemann.io import load_recipe
from fpuriemann.mesoscope import (
    front_back_velocities,
    jump_residuals,
    measure_dispersive_shock_curve,
    profile_l1,
    rescale_to_c,
    segment_snapshot,
    segment_waves,
)
from fpuriemann.nonclassical import (
    conservative_anchors,
    conservative_segments,
    nucleation_diagnostic,
    single_wave_solution,
    solve_riemann_dissipative,
)
from fpuriemann.potential import builtin, polynomial, sound_speed
from fpuriemann.psystem import (
    StatePoint,
    hugoniot_v,
    rh_speed_sq,
    solve_riemann_classical,
    weak_form_residuals,
)

FAST = builtin("quintic_fast")
SLOW = builtin("quintic_slow")


def within(x, ref, tol):
    return abs(x - ref) <= tol


def report(n, parts):
    """parts: list of (label, ok); records one line and asserts."""
    bad = [lab for lab, ok in parts if not ok]
    detail = "; ".join(lab for lab, _ in parts) if not bad else "failing: " + "; ".join(bad)
    record_criterion(n, not bad, detail)
    assert not bad, detail


# --------------------------------------------------------------------------
# 1-2: conservative shock data
# --------------------------------------------------------------------------
def test_criterion_01_fast_conservative_shock():
    r0 = solve_conjugate(FAST, 2.0, (0.0, 1.2))
    pt = ConsShockPoint.at(FAST, 2.0, r0)
    dv = abs(hugoniot_v(FAST, (2.0, 0.0), r0, 1))
    # independent closed form: Phi'' = 2 - s - s^2/2 + s^3/6 with s = r - 2
    s = r0 - 2.0
    lam_R = math.sqrt(2 - s - s * s / 2 + s**3 / 6)
    report(1, [
        (f"r_R {r0:.4f}", within(r0, 0.59, 0.01)),
        (f"|c_rh| {pt.c_rh_abs:.4f}", within(pt.c_rh_abs, 1.50, 0.01)),
        (f"|dv| {dv:.4f}", within(dv, 2.11, 0.02)),
        (f"lambda_L {pt.lambda_L:.4f}", within(pt.lambda_L, 1.41, 0.01)),
        (f"lambda_R {pt.lambda_R:.4f} (oracle)", within(pt.lambda_R, lam_R, 1e-12) and within(lam_R, 1.3977, 1e-4)),
        (pt.classification, pt.classification == "fast_undercompressive"),
    ])


def test_criterion_02_slow_conservative_shock():
    r0 = solve_conjugate(SLOW, 4.0, (0.5, 2.5))
    pt = ConsShockPoint.at(SLOW, 4.0, r0)
    dv = abs(hugoniot_v(SLOW, (4.0, 0.0), r0, 2))
    report(2, [
        (f"r_R {r0:.4f}", within(r0, 1.24, 0.01)),
        (f"|c_rh| {pt.c_rh_abs:.4f}", within(pt.c_rh_abs, 1.46, 0.01)),
        (f"|dv| {dv:.4f}", within(dv, 4.03, 0.03)),
        (f"lambda_L {pt.lambda_L:.4f}", within(pt.lambda_L, 1.83, 0.01)),
        (f"lambda_R {pt.lambda_R:.4f}", within(pt.lambda_R, 1.73, 0.01)),
        (pt.classification, pt.classification == "slow_undercompressive"),
    ])


# --------------------------------------------------------------------------
# 3-4: topology and bifurcation of D
# --------------------------------------------------------------------------
def test_criterion_03_dset_topology():
    # the lower turning point 1 - sqrt(3) lies outside [0, 6]; the window is widened to contain both
    wide = builtin("quintic_slow", eval_domain=(-3.5, 5.5), strict=False)
    curves = trace_dset(wide, (-3.5, 5.5, -3.5, 5.5))
    tps = [1 - math.sqrt(3), 1 + math.sqrt(3)]
    closed = [c for c in curves if c.closed]
    ok_cross = len(closed) == 1 and np.allclose(sorted(closed[0].crossings), tps, atol=1e-6)
    toda = builtin("toda")
    report(3, [
        ("one closed curve", len(curves) == 1 and len(closed) == 1),
        ("crossings at turning points", ok_cross),
        ("toda empty", trace_dset(toda, (-1.0, 4.0, -1.0, 4.0)) == []),
    ])


def test_criterion_04_bifurcation_structure():
    parts = []
    for p, rs in ((FAST, 3 - math.sqrt(3)), (SLOW, 1 + math.sqrt(3))):
        d4, d5 = float(p.raw(rs, 4)), float(p.raw(rs, 5))
        rl = rs + 1e-3
        rr = solve_conjugate(p, rl, (rs - 3e-3, rs))
        parts.append((f"{p.name} slope", within(dset_slope(p, rl, rr), -1.0, 1e-3)))
        for s in (0.01, 0.05):
            rep = bifurcation_check(p, rs, s)
            parts.append((f"{p.name} s={s} speed sign", rep.sgn_c_vs_sound == -int(np.sign(d4))))
            parts.append((f"{p.name} s={s} lambda sign", rep.sgn_cL_vs_cR == int(np.sign(d5))))
    report(4, parts)


# --------------------------------------------------------------------------
# 5: classical solver
# --------------------------------------------------------------------------
def test_criterion_05_classical_solver():
    rng = np.random.default_rng(5)
    worst = {"rh": 0.0, "fan": 0.0, "gal": 0.0, "refl": 0.0}
    solved = 0
    while solved < 200:
        name = ("toda", "modified_toda")[solved % 2]
        p = builtin(name)
        uL = (rng.uniform(-1.0, 1.6), rng.uniform(-1.0, 1.0))
        uR = (rng.uniform(-1.0, 1.6), rng.uniform(-1.0, 1.0))
        try:
            sol = solve_riemann_classical(p, uL, uR)
        except NoSolutionError:
            continue
        solved += 1
        res = weak_form_residuals(sol)
        worst["rh"] = max(worst["rh"], res["rh"])
        worst["fan"] = max(worst["fan"], res["fan"])
        v0 = rng.uniform(-2, 2)
        moved = solve_riemann_classical(p, (uL[0], uL[1] + v0), (uR[0], uR[1] + v0))
        for a, b in zip(sol.waves, moved.waves):
            worst["gal"] = max(worst["gal"], abs(b.u_right.v - a.u_right.v - v0), abs(b.u_right.r - a.u_right.r),
                               *np.abs(np.subtract(b.speed_range, a.speed_range)))
        # reflection alpha -> -alpha: (r, v) -> (r, -v), states swapped, fan mirrored
        refl = solve_riemann_classical(p, (uR[0], -uR[1]), (uL[0], -uL[1]))
        for a, b in zip(sol.waves, reversed(refl.waves)):
            worst["refl"] = max(worst["refl"], abs(b.u_left.r - a.u_right.r), abs(b.u_left.v + a.u_right.v),
                                abs(b.speed_range[0] + a.speed_range[1]))
    # piston: 4 a^2 = (r_M - 1)(1 - exp(1 - r_M)) solved by plain bisection on (0, 1)
    a = 0.1
    f = lambda r: (r - 1.0) * (1.0 - math.exp(1.0 - r)) - 4 * a * a
    lo, hi = 0.0, 1.0 - 1e-12
    for _ in range(200):
        m = 0.5 * (lo + hi)
        lo, hi = (m, hi) if (f(m) > 0) == (f(lo) > 0) else (lo, m)
    toda = builtin("toda")
    r_M = solve_riemann_classical(toda, (1.0, 2 * a), (1.0, -2 * a)).waves[0].u_right.r
    report(5, [
        ("RH residual", worst["rh"] <= 1e-9),
        ("fan residual", worst["fan"] <= 1e-9),
        ("Galilean", worst["gal"] <= 1e-12),
        ("reflection", worst["refl"] <= 1e-12),
        ("piston", within(r_M, 0.5 * (lo + hi), 1e-10)),
    ])


# --------------------------------------------------------------------------
# 6: nonclassical solvers
# --------------------------------------------------------------------------
def random_convex_concave_quintic(rng):
    """Phi''' = -k x + m x^2 about a turning point at 0, on the largest convex symmetric interval."""
    while True:
        c0, k, m = rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0), rng.uniform(-0.3, 0.3)
        xs = np.linspace(-6.0, 6.0, 24001)
        ok = (c0 - k * xs**2 / 2 + m * xs**3 / 3 > 0.1 * c0) & (xs * np.sign(m) < k / max(abs(m), 1e-12))
        i = 12000
        lo = hi = i
        while lo > 0 and ok[lo - 1]:
            lo -= 1
        while hi < len(xs) - 1 and ok[hi + 1]:
            hi += 1
        L = min(-xs[lo], xs[hi])
        if L >= 0.6:
            p = polynomial([0.0, 0.0, c0 / 2, 0.0, -k / 24, m / 60], eval_domain=(-L, L), name="random_quintic")
            return p, rng.uniform(0.05, 0.9) * L


def test_criterion_06_nonclassical_structure():
    parts = []
    a = conservative_anchors(FAST, (2.0, 0.0), 1)
    parts.append((f"quintic_fast ordering (r1={a.r1}, r2-r*={a.r2 - a.r_star:+.4g})", a.ordered()))
    rng = np.random.default_rng(6)
    n_ok = n_r1 = n_r2 = 0
    for _ in range(50):
        p, rl = random_convex_concave_quintic(rng)
        try:
            an = conservative_anchors(p, (rl, 0.0), 1)
        except RiemannLabError:
            continue
        n_ok += an.ordered()
        n_r1 += an.r1 is not None
        n_r2 += an.r2 is not None and an.r2 < an.r_star
    parts.append((f"random quintics ordered {n_ok}/50 (r1 defined {n_r1}, r2 < r* {n_r2})", n_ok == 50))
    # segment table on both sides and the amplitude jump at r2
    seg_ok = True
    for fam in (1, 2):
        for s in conservative_segments(FAST, (2.0, 0.0), fam):
            lo, hi = s["r_R"]
            for x in np.linspace(lo, hi, 6)[1:-1]:
                seg_ok &= single_wave_solution(FAST, (2.0, 0.0), float(x), fam).structure() == s["letters"]
    parts.append(("segment table", seg_ok))
    above = single_wave_solution(FAST, (2.0, 0.0), a.r2 + 1e-7, 1)
    below = single_wave_solution(FAST, (2.0, 0.0), a.r2 - 1e-7, 1)
    jump = abs(below.waves[0].u_right.r - above.waves[0].u_left.r)
    parts.append(("amplitude jump at r2", above.structure() == ["C"] and below.structure() == ["N", "C"] and jump > 1))
    # dissipative solver on the slow quintic
    diss_ok, worst = True, 0.0
    for fam in (1, 2):
        for x in np.linspace(0.0, 6.5, 27):
            sol = single_wave_solution(SLOW, (4.0, 0.0), float(x), fam, "dissipative")
            diss_ok &= "conservative_shock" not in sol.kinds
            for k, w in enumerate(sol.waves):
                if w.kind == "lax_shock" and len(sol.waves) == 2:
                    u = w.u_right if k == 0 else w.u_left
                    worst = max(worst, abs(abs(w.shock.c_rh) - sound_speed(SLOW, u.r)))
    parts.append(("no conservative shocks", diss_ok))
    parts.append((f"sonic attachment {worst:.2g}", worst <= 1e-8))
    report(6, parts)


# --------------------------------------------------------------------------
# 7-8: lattice
# --------------------------------------------------------------------------
@pytest.mark.slow
def test_criterion_07_lattice_conservation(recipe_run):
    res = recipe_run("fig4")
    b = res.balances
    report(7, [
        (f"N={res.config.N} potential={res.config.potential.name}",
         res.config.N == 4000 and res.config.potential.name == "modified_toda"),
        (f"energy {b.energy_rel:.2g}", b.energy_rel <= 1e-6),
        (f"momentum {b.momentum_rel:.2g}", b.momentum_rel <= 1e-8),
    ])


def causal_window(cfg, t):
    """c-range not yet reached by signals reflected at the chain ends."""
    sol = solve_riemann_classical(cfg.potential, cfg.u_L, cfg.u_R)
    rs = [cfg.u_L.r] + [w.u_right.r for w in sol.waves]
    lam = max(sound_speed(cfg.potential, r) for r in np.linspace(min(rs), max(rs), 201))
    a = cfg.alpha_star
    return (lam - 2 * a / t, (2 - 2 * a) / t - lam)


@pytest.mark.slow
def test_criterion_08_self_similarity_and_refinement(recipe_run):
    profs = {}
    for N in (1000, 4000, 16000):
        res = recipe_run("fig4", N=N)
        cfg = res.config
        profs[N] = {t: rescale_to_c(s, cfg.alpha_star, t, cfg.potential) for t, s in res if t > 0}
    lo1, hi1 = causal_window(cfg, 0.15)
    lo2, hi2 = causal_window(cfg, 0.3)
    win = (max(lo1, lo2), min(hi1, hi2))
    parts = []
    for N, pr in profs.items():
        a, b = pr[0.15], pr[0.3]
        d = profile_l1(a, b, win)
        grid = a.c_grid[(a.c_grid >= win[0]) & (a.c_grid <= win[1])]
        tv = float(np.sum(np.abs(np.diff(np.interp(grid, a.c_grid, a.mean_r)))))
        tol = 2 * tv * max(a.window_c, b.window_c)
        parts.append((f"N={N} self-similar L1 {d:.3g} <= {tol:.3g}", d <= tol))
    d1 = profile_l1(profs[1000][0.3], profs[4000][0.3], win)
    d2 = profile_l1(profs[4000][0.3], profs[16000][0.3], win)
    parts.append((f"refinement {d1:.3g} > {d2:.3g}", d1 > d2))
    report(8, parts)


# --------------------------------------------------------------------------
# 9-10: supersonic realisation, subsonic non-realisation
# --------------------------------------------------------------------------
@pytest.mark.slow
def test_criterion_09_supersonic_sharp_fronts(recipe_run):
    parts = []
    for name, sign in (("fig8_shock1", -1), ("fig8_shock2", 1)):
        res = recipe_run("fig8", name)
        cfg = res.config
        t, s = res.snapshots[-1]
        seg = segment_snapshot(s, cfg.potential, cfg.alpha_star, t)[1]
        fronts = [x for x in seg.of_kind("sharp_front") if not x.minor]
        if not fronts:
            parts.append((f"{name}: no sharp_front in {seg.letters()}", False))
            continue
        f = fronts[0]
        sp = [w for w in front_back_velocities(res.snapshots, cfg.alpha_star, cfg.potential)
              if w.kind == "sharp_front"]
        c = sp[0].c_f
        um, up = (f.left_state, f.right_state)
        ref_m, ref_p = (cfg.u_L, cfg.u_R)
        close = lambda u, ref: all(abs(x - y) <= 0.02 * max(1.0, abs(y)) for x, y in zip(u.as_tuple(), ref.as_tuple()))
        res_j = jump_residuals(cfg.potential, um, up, c)
        parts.append((f"{name} speed {c:.5f}", abs(c - sign * 1.50) <= 0.03 * 1.50))
        parts.append((f"{name} plateaus", close(um, ref_m) and close(up, ref_p)))
        parts.append((f"{name} jump residuals {max(res_j.values()):.2g}", max(res_j.values()) <= 0.03))
    report(9, parts)


@pytest.mark.slow
def test_criterion_10_subsonic_no_sharp_front(recipe_run):
    res = recipe_run("fig16")
    cfg = res.config
    t, s = res.snapshots[-1]
    seg = segment_snapshot(s, cfg.potential, cfg.alpha_star, t)[1]
    fronts = [x for x in seg.of_kind("sharp_front") if not x.minor]
    ds = [x for x in seg.of_kind("dispersive_shock") if not x.minor]
    rf = [x for x in seg.of_kind("rarefaction") if not x.minor]
    attached = any(seg.adjacent(d, r) for d in ds for r in rf)
    pred = solve_riemann_dissipative(cfg.potential, cfg.u_L, cfg.u_R)
    report(10, [
        (f"no sharp_front ({seg.letters()})", not fronts),
        ("dispersive shock with attached rarefaction", attached and seg.letters() == ["D", "R"]),
        ("dissipative prediction has R", "rarefaction" in pred.kinds),
    ])


# --------------------------------------------------------------------------
# 11-12: empirical dispersive shock curves
# --------------------------------------------------------------------------
@pytest.fixture(scope="session")
def fig9_points():
    dc = load_recipe("fig9").dcurves[0]
    pts, _ = measure_dispersive_shock_curve(dc.potential, dc.u_L, dc.family, dc.r_R, dc.N, dc.alpha_star,
                                            dc.t_macro_end, dc.dt)
    half, _ = measure_dispersive_shock_curve(dc.potential, dc.u_L, dc.family, [-0.7], dc.N, dc.alpha_star,
                                             dc.t_macro_end, dc.dt)
    return dc, pts, half[0]


@pytest.mark.slow
def test_criterion_11_dispersive_shock_speeds(fig9_points):
    dc, pts, half = fig9_points
    parts = []
    for pt in pts:
        # 1-shocks move left, so the ordering holds for the speed magnitudes
        parts.append((f"r_R={pt.r_R}: |c_b|={abs(pt.c_b):.4f} < |c_rh|={abs(pt.c_rh):.4f} < |c_f|={abs(pt.c_f):.4f}",
                      abs(pt.c_b) < abs(pt.c_rh) < abs(pt.c_f)))
    full = next(p for p in pts if p.r_R == -1.4)
    d_full = full.lax_distance(StatePoint(full.r_R, full.v_R))
    d_half = half.lax_distance(StatePoint(half.r_R, half.v_R))
    parts.append((f"halving ratio {d_full / d_half:.3g}", d_full / d_half >= 6.0))
    report(11, parts)


@pytest.mark.slow
def test_criterion_12_non_nucleation():
    dc = load_recipe("fig16").dcurves[0]
    pts, table = measure_dispersive_shock_curve(dc.potential, dc.u_L, dc.family, dc.r_R, dc.N, dc.alpha_star,
                                                dc.t_macro_end, dc.dt)
    diag = nucleation_diagnostic(dc.potential, dc.u_L, dc.family, table)
    report(12, [
        (f"c_cons={diag['c_cons']:.4f}, min |c_f|={min(diag['c_f']):.4f}", diag["never_met"]),
    ])
