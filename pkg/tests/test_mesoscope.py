import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fpuriemann.errors import UndefinedRescaleError, UnmatchedWaveError
from fpuriemann.io import load_recipe
from fpuriemann.lattice import ChainState, SimConfig, run
from fpuriemann.mesoscope import (
    compare,
    conservation_check,
    front_back_velocities,
    jump_residuals,
    local_means,
    predicted_letters,
    rescale_to_c,
    segment_snapshot,
    segment_waves,
)
from fpuriemann.nonclassical import solve_riemann_conservative, solve_riemann_dissipative
from fpuriemann.potential import builtin
from fpuriemann.psystem import StatePoint, make_shock, solve_riemann_classical

TODA = builtin("toda")
FAST = builtin("quintic_fast")


def uniform(N, r, v):
    return ChainState(float(N), np.full(N, r), np.full(N, v))


# --------------------------------------------------------------------------
# window statistics
# --------------------------------------------------------------------------
@settings(max_examples=20, deadline=None)
@given(r=st.floats(-0.5, 3.0), v=st.floats(-2.0, 2.0))
def test_uniform_state_means(r, v):
    s = uniform(512, r, v)
    for W in (16, 32):
        recs = local_means(s, FAST, W)
        assert max(abs(m.mean_r - r) for m in recs) < 1e-12
        assert max(abs(m.mean_v - v) for m in recs) < 1e-12
        assert all(m.amp_r == 0.0 and m.osc_r == 0.0 for m in recs)
    seg = segment_snapshot(s, FAST, 0.5, 1.0)[1]
    assert seg.kinds() == ["plateau"] and seg.waves() == []


def test_plateau_pair_gives_one_sharp_front():
    r = np.where(np.arange(2000) < 1000, 2.0, 0.6)
    v = np.where(np.arange(2000) < 1000, 0.0, -2.0)
    prof, seg = segment_snapshot(ChainState(0.0, r, v), FAST, 0.5, 0.5)
    assert seg.kinds() == ["plateau", "sharp_front", "plateau"]
    f = seg.of_kind("sharp_front")[0]
    assert f.left_state.r == pytest.approx(2.0, abs=1e-12) and f.right_state.v == pytest.approx(-2.0, abs=1e-12)
    assert f.c_range[0] < 0.0 < f.c_range[1]
    assert f.c_range[1] - f.c_range[0] <= 3 * prof.window_c


def test_window_bounds_and_support():
    s = ChainState(1.0, np.linspace(0.0, 1.0, 400), np.zeros(400))
    with pytest.raises(ValueError):
        local_means(s, TODA, 4)
    with pytest.raises(ValueError):
        local_means(s, TODA, 101)
    rng = np.random.default_rng(1)
    big = ChainState(1.0, rng.uniform(0.5, 1.5, 40000), rng.uniform(-1, 1, 40000))
    for m in local_means(big, TODA, 1000, 500):
        sup = m.support_samples
        assert len(sup) <= 256
        assert m.mean_r - m.amp_r <= sup[:, 0].min() and sup[:, 0].max() <= m.mean_r + m.amp_r


def test_rescale_rejects_zero_time():
    s = uniform(100, 1.0, 0.0)
    s.t_micro = 0.0
    with pytest.raises(UndefinedRescaleError):
        rescale_to_c(s, 0.5, p=TODA)
    with pytest.raises(UndefinedRescaleError):
        rescale_to_c(local_means(uniform(100, 1.0, 0.0), TODA, 8), 0.5, 0.0, N=100)


def test_rescale_record_list_matches_state():
    s = ChainState(300.0, np.linspace(0.5, 1.5, 1000), np.zeros(1000))
    a = rescale_to_c(s, 0.4, p=TODA)
    b = rescale_to_c(local_means(s, TODA, a.window, a.stride), 0.4, 0.3, N=1000)
    assert np.allclose(a.c_grid, b.c_grid, atol=1e-14) and b.stride == a.stride


# --------------------------------------------------------------------------
# jump conditions and balance laws
# --------------------------------------------------------------------------
def test_jump_residuals_vanish_on_exact_shocks():
    s = make_shock(TODA, (1.0, 0.0), 0.4, 1)
    res = jump_residuals(TODA, s.u_left, s.u_right, s.c_rh)
    assert res["mass"] < 1e-12 and res["momentum"] < 1e-12 and res["energy"] > 1e-3
    r0 = 0.5934851809023707
    n = make_shock(FAST, (2.0, 0.0), r0, 1)
    assert max(jump_residuals(FAST, n.u_left, n.u_right, n.c_rh).values()) < 1e-9


@pytest.fixture(scope="module")
def fig4_early():
    cfg = load_recipe("fig4").run().to_dict()
    cfg.pop("dt")
    cfg.update(N=1000, t_macro_end=0.15, snapshot_times=[0.1, 0.15])
    return SimConfig.from_dict(cfg), run(SimConfig.from_dict(cfg))


def test_conservation_check_between_plateaus(fig4_early):
    cfg, res = fig4_early
    (t1, s1), (t2, s2) = res.snapshots
    p1 = rescale_to_c(s1, cfg.alpha_star, t1, cfg.potential)
    p2 = rescale_to_c(s2, cfg.alpha_star, t2, cfg.potential)
    al = p1.alpha_bar
    ends = (int(np.searchsorted(al, 0.25)), int(np.searchsorted(al, 0.9)))
    assert max(conservation_check(p1, p2, ends).values()) < 2e-3
    # a control volume whose ends sit inside moving fans is not balanced by end-time averages
    inner = (int(np.searchsorted(al, 0.45)), int(np.searchsorted(al, 0.75)))
    assert max(conservation_check(p1, p2, inner).values()) > 1e-2


# --------------------------------------------------------------------------
# segmentation on recipe runs
# --------------------------------------------------------------------------
def test_fig4_two_rarefactions(recipe_run):
    res = recipe_run("fig4", N=1000)
    cfg = res.config
    for t, s in res:
        if t == 0:
            continue
        prof, seg = segment_snapshot(s, cfg.potential, cfg.alpha_star, t)
        assert seg.letters() == ["R", "R"]
    cmp = compare(prof, solve_riemann_classical(cfg.potential, cfg.u_L, cfg.u_R), seg)
    assert cmp["structure_match"] and cmp["sharp_fronts"] == 0
    assert cmp["l1_r"] < 0.1 and cmp["l1_v"] < 0.15


def test_compare_identical_data():
    s = uniform(800, 1.0, 0.2)
    prof = rescale_to_c(s, 0.5, 0.2, TODA)
    cmp = compare(prof, solve_riemann_classical(TODA, (1.0, 0.2), (1.0, 0.2)))
    assert cmp["measured"] == cmp["predicted"] == [] and cmp["structure_match"]
    assert cmp["l1_r"] < 1e-12 and cmp["l1_v"] < 1e-12


@pytest.fixture(scope="module")
def fig16_final(recipe_run):
    res = recipe_run("fig16")
    t, s = res.snapshots[-1]
    return res.config, rescale_to_c(s, res.config.alpha_star, t, res.config.potential)


def test_fig16_threshold_stability(fig16_final):
    _, prof = fig16_final
    base = segment_waves(prof)
    for f in (0.8, 1.2):
        assert segment_waves(prof, f * base.threshold).letters() == base.letters() == ["D", "R"]


def test_fig16_prediction_agreement(fig16_final):
    cfg, prof = fig16_final
    seg = segment_waves(prof)
    diss = solve_riemann_dissipative(cfg.potential, cfg.u_L, cfg.u_R)
    cons = solve_riemann_conservative(cfg.potential, cfg.u_L, cfg.u_R)
    # the dissipative fan carries a 1-shock far below the resolvable strength
    assert diss.structure() == ["C", "C", "R"] and predicted_letters(diss) == ["D", "R"]
    assert compare(prof, diss, seg)["structure_match"]
    assert not compare(prof, cons, seg)["structure_match"]


def test_sharp_front_width_scales_with_inverse_n(recipe_run):
    widths = {}
    for N in (2000, 8000):
        res = recipe_run("fig8", "fig8_shock1", N)
        cfg = res.config
        t, s = res.snapshots[-1]
        seg = segment_snapshot(s, cfg.potential, cfg.alpha_star, t)[1]
        f = seg.of_kind("sharp_front")[0]
        hi, lo = f.left_state.r, f.right_state.r
        a = max(0, int((cfg.alpha_star + (f.c_range[0] - 0.05) * t) * N))
        b = min(N, int((cfg.alpha_star + (f.c_range[1] + 0.05) * t) * N))
        y = (s.r[a:b] - lo) / (hi - lo)
        # raw particle 10-90% width, in alpha_bar units
        widths[N] = (np.flatnonzero(y <= 0.1)[0] - np.flatnonzero(y >= 0.9)[-1]) / N
    assert widths[2000] / widths[8000] == pytest.approx(4.0, rel=0.3)


def test_front_speed_two_snapshots(recipe_run):
    res = recipe_run("fig8", "fig8_shock1", 2000)
    cfg = res.config
    sp = front_back_velocities(res.snapshots, cfg.alpha_star, cfg.potential)
    fronts = [w for w in sp if w.kind == "sharp_front"]
    assert len(fronts) == 1 and not fronts[0].low_confidence
    assert fronts[0].c_f == pytest.approx(-1.5025333663926828, abs=2e-3)
    single = front_back_velocities(res.snapshots[-1:], cfg.alpha_star, cfg.potential)
    assert all(w.low_confidence for w in single)
    with pytest.raises(UnmatchedWaveError):
        front_back_velocities([(0.0, res.snapshots[0][1])], cfg.alpha_star, cfg.potential)
