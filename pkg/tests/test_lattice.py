import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fpuriemann.errors import ConfigError, DomainError
from fpuriemann.lattice import (
    ChainState,
    SimConfig,
    boundary_power,
    default_dt,
    forces,
    init_riemann,
    rates,
    run,
    step_verlet,
    total_energy,
    total_momentum,
)
from fpuriemann.potential import builtin

TODA = builtin("toda")
HARM = builtin("harmonic")
FAST = builtin("quintic_fast")


def test_init_threshold():
    cfg = SimConfig(10, TODA, (1.0, 0.5), (2.0, -0.5), alpha_star=0.5, t_macro_end=0.0)
    s = init_riemann(cfg)
    assert list(s.r) == [1.0] * 5 + [2.0] * 5
    assert list(s.v) == [0.5] * 5 + [-0.5] * 5
    assert s.t_micro == 0.0 and s.t_macro() == 0.0
    assert s.alpha_bar()[[0, -1]] == pytest.approx([0.1, 1.0])


@settings(max_examples=20, deadline=None)
@given(r=st.floats(-0.1, 3.3), v=st.floats(-3.0, 3.0))
def test_uniform_state_is_fixed(r, v):
    s = ChainState(0.0, np.full(17, r), np.full(17, v))
    assert np.all(forces(FAST, s.r) == 0.0) and np.all(rates(s.v) == 0.0)
    out = step_verlet(s, FAST, 0.01)
    assert np.all(out.r == s.r) and np.all(out.v == s.v)
    assert total_energy(s, FAST) == pytest.approx(17 * (0.5 * v * v + FAST.raw(r, 0)), rel=1e-14)
    assert total_momentum(s) == pytest.approx(17 * v, rel=1e-14, abs=1e-14)


def test_boundary_closure():
    r = np.array([0.3, 1.1, 0.7])
    v = np.array([0.2, -0.4, 0.9])
    assert forces(HARM, r).tolist() == pytest.approx([0.0, 0.8, -0.4])
    assert rates(v).tolist() == pytest.approx([-0.6, 1.3, 0.0])


def two_particle_error(dt, T=2.0):
    # r1'' = r2 - r1 with r2 and v1 frozen; x = r1 - r2 oscillates with unit frequency
    r0 = np.array([0.4, -0.1])
    v0 = np.array([0.3, 0.8])
    s = ChainState(0.0, r0.copy(), v0.copy())
    n = int(round(T / dt))
    for _ in range(n):
        s = step_verlet(s, HARM, dt)
    t = n * dt
    x0, w0 = r0[0] - r0[1], v0[1] - v0[0]
    x = x0 * math.cos(t) + w0 * math.sin(t)
    assert s.r[1] == r0[1] and s.v[0] == v0[0]
    return abs(s.r[0] - r0[1] - x)


def test_two_particle_second_order():
    e1, e2 = two_particle_error(0.02), two_particle_error(0.01)
    assert e1 < 1e-3
    assert e1 / e2 == pytest.approx(4.0, rel=0.05)


def test_reversibility():
    cfg = SimConfig(60, TODA, (1.0, 0.3), (0.6, -0.3), t_macro_end=0.0)
    s0 = init_riemann(cfg)
    s = s0
    for _ in range(400):
        s = step_verlet(s, TODA, cfg.dt)
    s = ChainState(s.t_micro, s.r, -s.v)
    for _ in range(400):
        s = step_verlet(s, TODA, cfg.dt)
    assert np.max(np.abs(s.r - s0.r)) <= 1e-12
    assert np.max(np.abs(-s.v - s0.v)) <= 1e-12


def test_boundary_power_matches_energy_rate():
    r = np.array([0.9, 1.2, 0.8, 1.05])
    v = np.array([0.1, -0.2, 0.3, 0.05])
    s = ChainState(0.0, r, v)
    # dH/dt = sum v dv/dt + sum Phi'(r) dr/dt, evaluated directly
    dh = float(np.dot(v, forces(TODA, r)) + np.dot(TODA.raw(r, 1), rates(v)))
    dp = float(np.sum(forces(TODA, r)))
    pe, pp = boundary_power(s, TODA)
    assert pe == pytest.approx(dh, abs=1e-14) and pp == pytest.approx(dp, abs=1e-14)


@pytest.fixture(scope="module")
def small_run():
    cfg = SimConfig(400, FAST, (2.0, 0.0), (0.75, 0.0), t_macro_end=0.2, snapshot_times=(0.0, 0.1, 0.2))
    return run(cfg, balance_every=10)


def test_balances_small(small_run):
    b = small_run.balances
    assert b.energy_rel <= 1e-5
    assert b.momentum_rel <= 1e-8
    assert b.to_dict()["samples"] == len(b.t_micro) > 10


def test_energy_defect_is_second_order(small_run):
    cfg = SimConfig.from_dict({**small_run.config.to_dict(), "dt": small_run.config.dt / 2})
    fine = run(cfg, balance_every=10).balances
    assert small_run.balances.energy_rel / fine.energy_rel == pytest.approx(4.0, rel=0.05)


def test_snapshots_and_zero_time(small_run):
    assert [t for t, _ in small_run] == [0.0, 0.1, 0.2]
    s0 = small_run.at(0.0)
    init = init_riemann(small_run.config)
    assert np.array_equal(s0.r, init.r) and np.array_equal(s0.v, init.v)
    assert small_run.at(0.2).t_micro == pytest.approx(0.2 * 400, abs=small_run.config.dt)
    assert small_run.steps == small_run.config.steps_for(0.2)
    assert small_run.warnings == []


def test_determinism(small_run):
    again = run(small_run.config, balance_every=10)
    for (_, a), (_, b) in zip(small_run, again):
        assert np.array_equal(a.r, b.r) and np.array_equal(a.v, b.v)


def test_contamination_warning():
    cfg = SimConfig(60, TODA, (1.0, 0.5), (1.0, -0.5), t_macro_end=1.0)
    res = run(cfg)
    assert res.warnings and "contamination" in res.warnings[0]


def test_domain_error_when_strain_escapes():
    p = builtin("toda", eval_domain=(0.0, 1.6))
    cfg = SimConfig(100, p, (1.0, -1.0), (1.0, 1.0), t_macro_end=0.3)
    with pytest.raises(DomainError):
        run(cfg)


def test_config_validation():
    with pytest.raises(ConfigError):
        SimConfig(1, TODA, (1, 0), (1, 0))
    with pytest.raises(ConfigError):
        SimConfig(10, TODA, (1, 0), (1, 0), alpha_star=1.0)
    with pytest.raises(ConfigError):
        SimConfig(10, TODA, (1, 0), (1, 0), t_macro_end=0.2, snapshot_times=(0.3,))
    with pytest.raises(ConfigError):
        SimConfig(10, TODA, (1, 0), (1, 0), dt=1.0)
    with pytest.raises(ConfigError):
        SimConfig(10, TODA, (50.0, 0), (1, 0))


def test_default_dt_and_round_trip():
    cfg = SimConfig(10, FAST, (2.0, 0.0), (1.0, 0.0), t_macro_end=0.1, snapshot_times=(0.05, 0.1))
    assert cfg.dt == default_dt(FAST, (2.0, 0.0), (1.0, 0.0))
    back = SimConfig.from_dict(cfg.to_dict())
    assert back.to_dict() == cfg.to_dict()
    assert cfg.epsilon == 0.1
