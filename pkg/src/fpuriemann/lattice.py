"""FPU chain simulator in distance/velocity variables.

The chain is

    dr_a/dt = v_{a+1} - v_a,   dv_a/dt = Phi'(r_a) - Phi'(r_{a-1}),   a = 1..N,

closed by v_{N+1} = v_N and r_0 = r_1.  Time stepping is velocity Verlet.
Because r is a linear image of the particle positions, kick-drift-kick in
(r, v) is exactly the position-form Verlet map, so the scheme stays
symplectic and reversible while avoiding the rounding of large positions.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import ConfigError, DomainError
from .potential import Potential, from_dict as potential_from_dict
from .psystem import StatePoint

log = logging.getLogger(__name__)

DT_SAFETY = 0.05
DT_GUARD = 0.1
BOUNDARY_FRACTION = 0.01
BOUNDARY_TOL = 1e-6
DOMAIN_CHECK_EVERY = 16


def data_range_speed(p: Potential, u_L, u_R, samples: int = 2001) -> float:
    """max sqrt(Phi'') over [min r - D, max r + D] clipped to the domain, D = 2|r_L - r_R| + 1."""
    u_L, u_R = StatePoint.coerce(u_L), StatePoint.coerce(u_R)
    d = 2.0 * abs(u_L.r - u_R.r) + 1.0
    lo, hi = p.eval_domain
    a = max(lo, min(u_L.r, u_R.r) - d)
    b = min(hi, max(u_L.r, u_R.r) + d)
    xs = np.linspace(a, b, samples)
    return float(np.sqrt(np.max(np.clip(p.raw(xs, 2), 0.0, None))))


def default_dt(p: Potential, u_L, u_R) -> float:
    return DT_SAFETY / data_range_speed(p, u_L, u_R)


@dataclass
class SimConfig:
    """Parameters of one cold Riemann run."""

    N: int
    potential: Potential
    u_L: StatePoint
    u_R: StatePoint
    alpha_star: float = 0.5
    t_macro_end: float = 0.3
    dt: Optional[float] = None
    snapshot_times: tuple = ()
    name: str = "run"

    def __post_init__(self):
        self.u_L = StatePoint.coerce(self.u_L)
        self.u_R = StatePoint.coerce(self.u_R)
        if int(self.N) != self.N or self.N < 2:
            raise ConfigError(f"N must be an integer >= 2, got {self.N!r}")
        self.N = int(self.N)
        if not 0.0 < self.alpha_star < 1.0:
            raise ConfigError(f"alpha_star must lie in (0, 1), got {self.alpha_star}")
        if self.t_macro_end < 0.0:
            raise ConfigError("t_macro_end must be non-negative")
        for u in (self.u_L, self.u_R):
            if not self.potential.in_domain(u.r):
                raise ConfigError(f"r = {u.r} outside the evaluation domain {self.potential.eval_domain}")
        if not self.snapshot_times:
            self.snapshot_times = (self.t_macro_end,)
        self.snapshot_times = tuple(sorted(float(t) for t in self.snapshot_times))
        if self.snapshot_times[0] < 0.0 or self.snapshot_times[-1] > self.t_macro_end + 1e-12:
            raise ConfigError("snapshot_times must lie in [0, t_macro_end]")
        lam = data_range_speed(self.potential, self.u_L, self.u_R)
        if self.dt is None:
            self.dt = DT_SAFETY / lam
        if not self.dt > 0.0:
            raise ConfigError("dt must be positive")
        if self.dt * lam > DT_GUARD:
            raise ConfigError(f"dt * max sound speed = {self.dt * lam:.3g} exceeds the stability guard {DT_GUARD}")

    @property
    def epsilon(self) -> float:
        return 1.0 / self.N

    def steps_for(self, t_macro: float) -> int:
        return int(round(self.N * t_macro / self.dt))

    def to_dict(self) -> dict:
        return {"name": self.name, "N": self.N, "potential": self.potential.to_dict(),
                "u_L": list(self.u_L.as_tuple()), "u_R": list(self.u_R.as_tuple()),
                "alpha_star": self.alpha_star, "t_macro_end": self.t_macro_end, "dt": self.dt,
                "snapshot_times": list(self.snapshot_times)}

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        pot = d.pop("potential")
        if isinstance(pot, dict):
            pot = potential_from_dict(pot)
        d["snapshot_times"] = tuple(d.get("snapshot_times", ()))
        return cls(potential=pot, **d)


@dataclass
class ChainState:
    t_micro: float
    r: np.ndarray
    v: np.ndarray

    @property
    def N(self) -> int:
        return len(self.r)

    def copy(self) -> "ChainState":
        return ChainState(self.t_micro, self.r.copy(), self.v.copy())

    def t_macro(self) -> float:
        return self.t_micro / self.N

    def alpha_bar(self) -> np.ndarray:
        return np.arange(1, self.N + 1) / self.N


def init_riemann(cfg: SimConfig) -> ChainState:
    """Piecewise-constant data: u_L for a/N <= alpha_star, u_R beyond."""
    alpha = np.arange(1, cfg.N + 1)
    left = alpha <= cfg.alpha_star * cfg.N + 1e-9
    r = np.where(left, cfg.u_L.r, cfg.u_R.r).astype(float)
    v = np.where(left, cfg.u_L.v, cfg.u_R.v).astype(float)
    return ChainState(0.0, r, v)


def forces(p: Potential, r: np.ndarray) -> np.ndarray:
    """dv/dt = Phi'(r_a) - Phi'(r_{a-1}) with r_0 = r_1."""
    f = p.raw(r, 1)
    out = np.empty_like(f)
    out[0] = 0.0
    out[1:] = f[1:] - f[:-1]
    return out


def rates(v: np.ndarray) -> np.ndarray:
    """dr/dt = v_{a+1} - v_a with v_{N+1} = v_N."""
    out = np.empty_like(v)
    out[:-1] = v[1:] - v[:-1]
    out[-1] = 0.0
    return out


def _check_domain(p: Potential, state: ChainState):
    lo, hi = p.eval_domain
    bad = np.flatnonzero((state.r < lo) | (state.r > hi) | ~np.isfinite(state.r))
    if bad.size:
        i = int(bad[0])
        raise DomainError(f"r[{i + 1}] = {state.r[i]:.6g} left the evaluation domain {p.eval_domain} "
                          f"at t = {state.t_micro:.6g}")


def step_verlet(state: ChainState, p: Potential, dt: float, check: bool = True) -> ChainState:
    """One kick-drift-kick step; returns a new state."""
    v = state.v + 0.5 * dt * forces(p, state.r)
    r = state.r + dt * rates(v)
    v = v + 0.5 * dt * forces(p, r)
    out = ChainState(state.t_micro + dt, r, v)
    if check:
        _check_domain(p, out)
    return out


def total_energy(state: ChainState, p: Potential) -> float:
    return float(0.5 * np.dot(state.v, state.v) + np.sum(p.raw(state.r, 0)))


def total_momentum(state: ChainState) -> float:
    return float(np.sum(state.v))


def boundary_power(state: ChainState, p: Potential) -> tuple:
    """(dH/dt, dP/dt) from the boundary closure."""
    f1 = float(p.raw(state.r[0], 1))
    fn = float(p.raw(state.r[-1], 1))
    return fn * state.v[-1] - f1 * state.v[0], fn - f1


@dataclass
class Balances:
    """Boundary-corrected conservation residuals, sampled along a run."""

    t_micro: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    momentum: list = field(default_factory=list)
    energy_scale: float = 1.0
    momentum_scale: float = 1.0

    @property
    def energy_rel(self) -> float:
        return max((abs(e) for e in self.energy), default=0.0) / self.energy_scale

    @property
    def momentum_rel(self) -> float:
        return max((abs(m) for m in self.momentum), default=0.0) / self.momentum_scale

    def to_dict(self) -> dict:
        return {"energy_rel": float(self.energy_rel), "momentum_rel": float(self.momentum_rel),
                "energy_scale": float(self.energy_scale), "momentum_scale": float(self.momentum_scale),
                "samples": len(self.t_micro)}


@dataclass
class RunResult:
    config: SimConfig
    snapshots: list
    balances: Balances
    warnings: list
    steps: int
    wall_time: float

    def __iter__(self) -> Iterator:
        return iter(self.snapshots)

    def __len__(self) -> int:
        return len(self.snapshots)

    def at(self, t_macro: float) -> ChainState:
        return min(self.snapshots, key=lambda s: abs(s[0] - t_macro))[1]


def boundary_drift(state: ChainState, init: ChainState, fraction: float = BOUNDARY_FRACTION) -> float:
    k = max(1, int(math.ceil(fraction * state.N)))
    d = 0.0
    for sl in (slice(0, k), slice(state.N - k, state.N)):
        d = max(d, float(np.max(np.abs(state.r[sl] - init.r[sl]))),
                float(np.max(np.abs(state.v[sl] - init.v[sl]))))
    return d


def run(cfg: SimConfig, balance_every: int = 50, progress=None) -> RunResult:
    """Integrate to N * t_macro_end, recording snapshots at the requested macro times."""
    t0 = time.perf_counter()
    p, dt = cfg.potential, cfg.dt
    state = init_riemann(cfg)
    _check_domain(p, state)
    init = state.copy()
    snap_steps = [cfg.steps_for(t) for t in cfg.snapshot_times]
    n_end = max(snap_steps) if snap_steps else 0

    h0, p0 = total_energy(state, p), total_momentum(state)
    bal = Balances(energy_scale=max(1.0, float(0.5 * np.dot(state.v, state.v) + np.sum(np.abs(p.raw(state.r, 0))))),
                   momentum_scale=max(1.0, float(np.sum(np.abs(state.v)))))
    work_e = work_p = 0.0
    pe_prev, pp_prev = boundary_power(state, p)

    def record(s: ChainState):
        bal.t_micro.append(s.t_micro)
        bal.energy.append(total_energy(s, p) - h0 - work_e)
        bal.momentum.append(total_momentum(s) - p0 - work_p)

    record(state)
    snaps = []
    pending = sorted(zip(snap_steps, cfg.snapshot_times))
    warnings: list = []
    step = 0
    while pending and pending[0][0] == 0:
        snaps.append((pending.pop(0)[1], state.copy()))
    while step < n_end:
        state = step_verlet(state, p, dt, check=(step % DOMAIN_CHECK_EVERY == 0))
        step += 1
        pe, pp = boundary_power(state, p)
        work_e += 0.5 * dt * (pe + pe_prev)
        work_p += 0.5 * dt * (pp + pp_prev)
        pe_prev, pp_prev = pe, pp
        if step % balance_every == 0:
            record(state)
        while pending and pending[0][0] == step:
            _check_domain(p, state)
            t_bar = pending.pop(0)[1]
            snaps.append((t_bar, state.copy()))
            drift = boundary_drift(state, init)
            if drift > BOUNDARY_TOL:
                msg = f"boundary contamination at t_macro = {t_bar:g}: drift {drift:.3g} at the outer 1%"
                warnings.append(msg)
                log.warning(msg)
        if progress is not None and step % 1000 == 0:
            progress(step, n_end)
    _check_domain(p, state)
    record(state)
    return RunResult(cfg, snaps, bal, warnings, step, time.perf_counter() - t0)
