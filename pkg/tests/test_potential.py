import math
import pickle

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fpuriemann.errors import ConvexityError, DomainError, UsageError
from fpuriemann.potential import (
    DEFAULT_DOMAINS,
    TP_GRID,
    builtin,
    evaluate,
    from_dict,
    mirrored,
    polynomial,
    shifted,
    sound_speed,
    turning_points,
)

BUILTINS = sorted(DEFAULT_DOMAINS)


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------
def test_toda_value_at_one():
    assert evaluate(builtin("toda"), 1.0, 0) == pytest.approx(1.0, abs=1e-15)


def test_quintic_fast_curvature_at_two():
    p = builtin("quintic_fast")
    assert evaluate(p, 2.0, 2) == pytest.approx(2.0, abs=1e-14)
    assert sound_speed(p, 2.0) == pytest.approx(1.41, abs=5e-3)


def test_harmonic_third_derivative_vanishes():
    p = builtin("harmonic")
    xs = np.linspace(-9, 9, 37)
    assert np.all(evaluate(p, xs, 3) == 0.0)


def test_sound_speed_examples():
    assert sound_speed(builtin("toda"), 1.0) == pytest.approx(1.0, abs=1e-15)
    slow = builtin("quintic_slow")
    assert sound_speed(slow, 4.0) == pytest.approx(1.83, abs=5e-3)
    assert sound_speed(slow, 1.24) == pytest.approx(1.73, abs=5e-3)


def test_closed_forms_against_independent_formulas():
    # quintic_slow: Phi'' = 2 - s + s^2/2 + s^3/6 with s = r - 2
    s = np.linspace(-2.5, 4.5, 11)
    assert np.allclose(builtin("quintic_slow").raw(s + 2, 2), 2 - s + s**2 / 2 + s**3 / 6, rtol=1e-14)
    # arctan flux
    r = np.linspace(-5, 5, 11)
    assert np.allclose(builtin("arctan_flux").raw(r, 1), (r + np.arctan(r)) / 16, rtol=1e-14)
    # modified Toda: exp(1 - r) + 12 q (r - 1)^2 for Phi''
    assert np.allclose(builtin("modified_toda").raw(r, 2), np.exp(1 - r) + 12 / 40 * (r - 1) ** 2, rtol=1e-14)


@pytest.mark.parametrize("name", BUILTINS)
def test_derivatives_match_finite_differences(name):
    p = builtin(name)
    lo, hi = p.eval_domain
    h = 1e-3 * (hi - lo) / 10
    xs = np.linspace(lo + 3 * h, hi - 3 * h, 100)
    for k in range(1, 6):
        f = lambda x: p.raw(x, k - 1)
        # fourth-order central stencil
        fd = (f(xs - 2 * h) - 8 * f(xs - h) + 8 * f(xs + h) - f(xs + 2 * h)) / (12 * h)
        exact = p.raw(xs, k)
        scale = np.maximum(np.abs(exact), 1e-3 * np.max(np.abs(f(xs))) + 1e-12)
        assert np.max(np.abs(fd - exact) / scale) < 1e-6, (name, k)


def test_eval_errors():
    p = builtin("toda")
    with pytest.raises(UsageError):
        p.eval(1.0, 6)
    with pytest.raises(DomainError):
        p.eval(11.0, 0)
    with pytest.raises(DomainError):
        p.eval(np.array([0.0, -6.0]), 1)


def test_sound_speed_rejects_nonconvex_point():
    p = polynomial([0.0, 0.0, 0.5, 0.0, -1.0], eval_domain=(-1.0, 1.0), strict=False)
    with pytest.raises(ConvexityError):
        sound_speed(p, 0.9)


def test_construction_rejects_nonconvex_domain():
    with pytest.raises(ConvexityError):
        polynomial([0.0, 0.0, 0.5, 0.0, -1.0], eval_domain=(-1.0, 1.0))


# --------------------------------------------------------------------------
# turning points
# --------------------------------------------------------------------------
def test_quintic_fast_turning_points_on_wide_interval():
    tps = turning_points(builtin("quintic_fast"), (0.0, 6.0))
    assert [t.r_star for t in tps] == pytest.approx([3 - math.sqrt(3), 3 + math.sqrt(3)], abs=1e-12)
    assert [t.fourth_sign for t in tps] == [-1, 1]


def test_quintic_slow_turning_point():
    tps = turning_points(builtin("quintic_slow"), (0.0, 6.0))
    assert len(tps) == 1
    assert tps[0].r_star == pytest.approx(1 + math.sqrt(3), abs=1e-12)
    assert tps[0].r_star == pytest.approx(2.7, abs=0.05)
    assert tps[0].fourth_sign == 1


def test_toda_has_no_turning_points():
    assert turning_points(builtin("toda")) == []
    assert turning_points(builtin("toda"), (-3.0, 8.0)) == []


def test_arctan_single_convex_concave_turning_point():
    tps = turning_points(builtin("arctan_flux"))
    assert len(tps) == 1
    assert abs(tps[0].r_star) < 1e-12
    assert tps[0].fourth_sign == -1 and tps[0].convex_concave


@pytest.mark.parametrize("name", BUILTINS)
def test_turning_point_refinement_tolerance(name):
    p = builtin(name)
    for t in turning_points(p):
        assert abs(p.raw(t.r_star, 3)) <= 1e-10 * max(1.0, abs(p.raw(t.r_star, 4)))
        assert t.fourth_sign in (-1, 0, 1)


@pytest.mark.parametrize("name", BUILTINS)
def test_turning_points_equal_grid_sign_changes(name):
    p = builtin(name)
    lo, hi = p.eval_domain
    xs = np.linspace(lo, hi, TP_GRID)
    s = np.sign(p.raw(xs, 3))
    changes = int(np.sum(s[:-1] * s[1:] < 0))
    assert len(turning_points(p)) == changes


def test_trig_multi_has_many_turning_points():
    assert len(turning_points(builtin("trig_multi"))) >= 4


# --------------------------------------------------------------------------
# derived potentials and serialisation
# --------------------------------------------------------------------------
@settings(max_examples=40, deadline=None)
@given(r=st.floats(-0.5, 2.5), k=st.integers(0, 5))
def test_mirror_and_shift_identities(r, k):
    base = builtin("quintic_fast")
    rc = 1.3
    m = mirrored(base, rc)
    assert m.raw(r, k) == pytest.approx((-1) ** k * base.raw(2 * rc - r, k), rel=1e-13, abs=1e-13)
    s = shifted(base, 0.7)
    assert s.raw(r + 0.7, k) == pytest.approx(base.raw(r, k), rel=1e-13, abs=1e-13)


@pytest.mark.parametrize("name", BUILTINS)
def test_dict_and_pickle_round_trip(name):
    p = builtin(name)
    assert from_dict(p.to_dict()) == p
    q = pickle.loads(pickle.dumps(p))
    assert q == p and q.raw(0.3, 2) == p.raw(0.3, 2)


def test_derived_round_trip():
    p = mirrored(shifted(builtin("toda"), 0.5), 1.0)
    q = from_dict(p.to_dict())
    assert q == p
    assert q.raw(0.2, 3) == pytest.approx(p.raw(0.2, 3), rel=1e-15)


def test_from_dict_rejects_unknown_keys():
    with pytest.raises(UsageError):
        from_dict({"kind": "toda", "colour": "red"})
    with pytest.raises(UsageError):
        from_dict({"kind": "nonsense", "eval_domain": [0, 1]})
