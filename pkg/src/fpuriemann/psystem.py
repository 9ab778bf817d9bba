"""Exact classical Riemann solver for the p-system r_t = v_x, v_t = Phi'(r)_x.

Sign conventions are fixed once here.  Family 1 moves left (lambda = -sqrt(Phi''),
shock speed c < 0), family 2 moves right.  Jumps are [[x]] = x_L - x_R and the
Rankine-Hugoniot conditions read

    c [[r]] + [[v]] = 0,        c [[v]] + [[Phi'(r)]] = 0.

Along both rarefaction curves and Hugoniot curves dv/dr = -c, so family 1
curves climb in v as r increases and family 2 curves descend.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, optimize

from .errors import (
    DegenerateJumpError,
    DomainError,
    NoSolutionError,
    NonclassicalRegimeError,
    NumericError,
    UnsupportedRegimeError,
)
from .potential import Potential, sound_speed, turning_points

SONIC_TOL = 1e-9
ZERO_STRENGTH = 1e-12
QUAD_EPSABS = 1e-14
QUAD_EPSREL = 1e-13
QUAD_LIMIT = 400

CLASSIFICATIONS = (
    "compressive",
    "rarefaction_shock",
    "fast_undercompressive",
    "slow_undercompressive",
    "sonic",
)
WAVE_KINDS = ("rarefaction", "lax_shock", "conservative_shock", "contact")


def family_sign(family: int) -> float:
    if family == 1:
        return -1.0
    if family == 2:
        return 1.0
    raise ValueError(f"family must be 1 or 2, got {family!r}")


@dataclass(frozen=True)
class StatePoint:
    """Macroscopic state u = (r, v)."""

    r: float
    v: float

    def reflect(self) -> "StatePoint":
        return StatePoint(self.r, -self.v)

    def shift(self, v0: float) -> "StatePoint":
        return StatePoint(self.r, self.v + v0)

    def as_tuple(self):
        return (self.r, self.v)

    @classmethod
    def coerce(cls, u) -> "StatePoint":
        if isinstance(u, StatePoint):
            return u
        r, v = u
        return cls(float(r), float(v))


@dataclass(frozen=True)
class ShockData:
    """Discontinuity u_left -> u_right travelling with signed speed c_rh."""

    u_left: StatePoint
    u_right: StatePoint
    c_rh: float
    family: int
    classification: str

    def rh_residuals(self, p: Potential):
        rl, vl = self.u_left.r, self.u_left.v
        rr, vr = self.u_right.r, self.u_right.v
        c = self.c_rh
        return (c * (rl - rr) + (vl - vr),
                c * (vl - vr) + (p.raw(rl, 1) - p.raw(rr, 1)))


@dataclass(frozen=True)
class ElementaryWave:
    """One wave of a self-similar fan.

    ``attached`` marks a wave whose edge is glued to a neighbouring wave of
    the same family without an intermediate constant state of its own.
    """

    kind: str
    family: int
    u_left: StatePoint
    u_right: StatePoint
    speed_range: tuple
    shock: Optional[ShockData] = None
    attached: bool = False

    @property
    def letter(self) -> str:
        return {"rarefaction": "R", "lax_shock": "C", "conservative_shock": "N",
                "contact": "C"}[self.kind]

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "family": self.family,
             "u_left": list(self.u_left.as_tuple()), "u_right": list(self.u_right.as_tuple()),
             "speed_range": list(self.speed_range), "attached": self.attached}
        if self.shock is not None:
            d["classification"] = self.shock.classification
        return d


@dataclass(frozen=True)
class PSolution:
    """Self-similar Riemann solution u(c) as an ordered fan of waves."""

    potential: Potential
    u_far_left: StatePoint
    u_far_right: StatePoint
    waves: tuple = ()
    solver: str = "classical"
    notes: tuple = ()

    @property
    def intermediate_states(self) -> list:
        return [w.u_right for w in self.waves[:-1]]

    @property
    def kinds(self) -> list:
        return [w.kind for w in self.waves]

    def structure(self, family: Optional[int] = None) -> list:
        return [w.letter for w in self.waves if family is None or w.family == family]

    def sample(self, c: float) -> StatePoint:
        return sample_solution(self, c)

    def sample_many(self, cs) -> tuple:
        cs = np.asarray(cs, dtype=float)
        r = np.empty_like(cs)
        v = np.empty_like(cs)
        for i, c in enumerate(cs):
            u = sample_solution(self, float(c))
            r[i], v[i] = u.r, u.v
        return r, v

    def to_dict(self) -> dict:
        return {"solver": self.solver, "potential": self.potential.to_dict(),
                "u_L": list(self.u_far_left.as_tuple()), "u_R": list(self.u_far_right.as_tuple()),
                "waves": [w.to_dict() for w in self.waves],
                "intermediate_states": [list(u.as_tuple()) for u in self.intermediate_states],
                "notes": list(self.notes)}


# --------------------------------------------------------------------------
# curves
# --------------------------------------------------------------------------
def _check_range(p: Potential, a: float, b: float):
    if not (p.in_domain(a) and p.in_domain(b)):
        raise DomainError(f"{p.name}: [{min(a, b):.6g}, {max(a, b):.6g}] leaves eval_domain {p.eval_domain}")


def sqrt_phi2_integral(p: Potential, a: float, b: float) -> float:
    """int_a^b sqrt(Phi''(s)) ds by adaptive Gauss-Kronrod quadrature."""
    if a == b:
        return 0.0
    _check_range(p, a, b)
    f = p._fn

    def integrand(s):
        d2 = f(s, 2)
        if d2 <= 0.0:
            raise NumericError(f"{p.name}: Phi''({s:.6g}) <= 0 inside the integral")
        return math.sqrt(d2)

    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, _ = integrate.quad(integrand, a, b, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL,
                                    limit=QUAD_LIMIT)
        except integrate.IntegrationWarning as exc:
            raise NumericError(f"quadrature did not converge on [{a}, {b}]: {exc}") from exc
    return float(val)


def integral_curve_v(p: Potential, u_L, r: float, family: int) -> float:
    """v-coordinate at abscissa r on the family-``family`` integral curve through u_L.

    Family 2 descends (v = v_L - int), family 1 climbs (v = v_L + int).
    """
    u_L = StatePoint.coerce(u_L)
    return u_L.v - family_sign(family) * sqrt_phi2_integral(p, u_L.r, float(r))


def rh_speed(p: Potential, r_L: float, r_R: float, family: int) -> float:
    """Signed Rankine-Hugoniot speed, negative for family 1."""
    if r_L == r_R:
        raise DegenerateJumpError("rh_speed needs r_L != r_R; use sound_speed for the limit")
    _check_range(p, r_L, r_R)
    q = (p.raw(r_L, 1) - p.raw(r_R, 1)) / (r_L - r_R)
    if q < 0.0:
        raise NumericError(f"negative secant slope {q:.3g} of Phi' between {r_L} and {r_R}")
    return family_sign(family) * math.sqrt(q)


def rh_speed_sq(p: Potential, r_L: float, r_R: float) -> float:
    """Secant slope of Phi' (squared shock speed) with the diagonal limit Phi''."""
    if r_L == r_R:
        return float(p.raw(r_L, 2))
    return float((p.raw(r_L, 1) - p.raw(r_R, 1)) / (r_L - r_R))


def hugoniot_v(p: Potential, u_L, r: float, family: int) -> float:
    """v-coordinate at abscissa r on the family-``family`` Hugoniot locus of u_L."""
    u_L = StatePoint.coerce(u_L)
    r = float(r)
    if r == u_L.r:
        return u_L.v
    _check_range(p, u_L.r, r)
    rad = (p.raw(r, 1) - p.raw(u_L.r, 1)) * (r - u_L.r)
    if rad < 0.0:
        raise NumericError(f"negative Hugoniot radicand {rad:.3g}: flux is not monotone on the jump")
    return u_L.v - family_sign(family) * math.copysign(math.sqrt(rad), r - u_L.r)


def classify(c_abs: float, lam_L: float, lam_R: float, family: int, tol: float = SONIC_TOL) -> str:
    """Shock taxonomy from |c| and the two sound speeds."""
    if abs(c_abs - lam_L) <= tol * max(1.0, lam_L) or abs(c_abs - lam_R) <= tol * max(1.0, lam_R):
        return "sonic"
    if c_abs > lam_L and c_abs > lam_R:
        return "fast_undercompressive"
    if c_abs < lam_L and c_abs < lam_R:
        return "slow_undercompressive"
    # family 2: lambda(u_L) > c > lambda(u_R); family 1 mirrors this
    upstream, downstream = (lam_L, lam_R) if family == 2 else (lam_R, lam_L)
    if upstream > c_abs > downstream:
        return "compressive"
    return "rarefaction_shock"


def classify_shock(p: Potential, s: ShockData, tol: float = SONIC_TOL) -> str:
    return classify(abs(s.c_rh), sound_speed(p, s.u_left.r), sound_speed(p, s.u_right.r), s.family, tol)


def make_shock(p: Potential, u_L, r_R: float, family: int) -> ShockData:
    """Shock from u_L to abscissa r_R along the family Hugoniot locus."""
    u_L = StatePoint.coerce(u_L)
    c = rh_speed(p, u_L.r, r_R, family)
    u_R = StatePoint(float(r_R), u_L.v + c * (u_L.r - r_R))
    lab = classify(abs(c), sound_speed(p, u_L.r), sound_speed(p, r_R), family)
    return ShockData(u_L, u_R, c, family, lab)


def energy_production(p: Potential, s: ShockData) -> float:
    """c [[v^2/2 + Phi]] + [[v Phi']]; nonpositive for admissible shocks."""
    l, r = s.u_left, s.u_right
    e = lambda u: 0.5 * u.v**2 + p.raw(u.r, 0)
    q = lambda u: u.v * p.raw(u.r, 1)
    return float(s.c_rh * (e(l) - e(r)) + (q(l) - q(r)))


# --------------------------------------------------------------------------
# wave sets
# --------------------------------------------------------------------------
@lru_cache(maxsize=64)
def domain_turning_points(p: Potential) -> tuple:
    return tuple(t.r_star for t in turning_points(p))


def turning_points_between(p: Potential, a: float, b: float) -> list:
    lo, hi = min(a, b), max(a, b)
    return [x for x in domain_turning_points(p) if lo + 1e-12 < x < hi - 1e-12]


def is_rarefaction_side(p: Potential, r_L: float, r_R: float, family: int) -> bool:
    """Selection rule lambda_f(r_R) > lambda_f(r_L)."""
    d2L, d2R = p.raw(r_L, 2), p.raw(r_R, 2)
    return d2R > d2L if family == 2 else d2R < d2L


def rarefaction_wave(p: Potential, u_L: StatePoint, r_R: float, family: int,
                     attached: bool = False) -> ElementaryWave:
    v_R = integral_curve_v(p, u_L, r_R, family)
    s = family_sign(family)
    c0, c1 = s * sound_speed(p, u_L.r), s * sound_speed(p, r_R)
    return ElementaryWave("rarefaction", family, u_L, StatePoint(float(r_R), v_R),
                          (min(c0, c1), max(c0, c1)), attached=attached)


def shock_wave(p: Potential, u_L: StatePoint, r_R: float, family: int, kind: Optional[str] = None,
               attached: bool = False) -> ElementaryWave:
    sh = make_shock(p, u_L, r_R, family)
    if kind is None:
        kind = "contact" if float(p.raw(u_L.r, 3)) == 0.0 and float(p.raw(r_R, 3)) == 0.0 else "lax_shock"
    return ElementaryWave(kind, family, u_L, sh.u_right, (sh.c_rh, sh.c_rh), shock=sh, attached=attached)


def classical_wave(p: Potential, u_L: StatePoint, r_R: float, family: int) -> list:
    """Waves connecting u_L to abscissa r_R inside W_family[u_L] (zero or one wave)."""
    if abs(r_R - u_L.r) < ZERO_STRENGTH:
        return []
    tps = turning_points_between(p, u_L.r, r_R)
    if tps:
        raise NonclassicalRegimeError(
            f"Phi''' changes sign at r = {tps[0]:.6g} between {u_L.r:.6g} and {r_R:.6g}; "
            "use the nonclassical solvers")
    if is_rarefaction_side(p, u_L.r, r_R, family):
        return [rarefaction_wave(p, u_L, r_R, family)]
    return [shock_wave(p, u_L, r_R, family)]


def wave_set_point(p: Potential, u_L, r_R: float, family: int):
    """Point of W_family[u_L] at abscissa r_R, tagged 'rarefaction' or 'lax_shock'."""
    u_L = StatePoint.coerce(u_L)
    waves = classical_wave(p, u_L, float(r_R), family)
    if not waves:
        return u_L, "rarefaction"
    w = waves[0]
    return w.u_right, ("rarefaction" if w.kind == "rarefaction" else "lax_shock")


def _end_state(u: StatePoint, waves: list) -> StatePoint:
    return waves[-1].u_right if waves else u


# --------------------------------------------------------------------------
# Riemann problem
# --------------------------------------------------------------------------
WaveFn = Callable[[Potential, StatePoint, float, int], list]


def bisect_increasing(g: Callable[[float], float], a: float, b: float, ga: float, gb: float) -> float:
    """Bisection on an increasing function, run until the bracket stops shrinking."""
    if ga == 0.0:
        return a
    if gb == 0.0:
        return b
    for _ in range(200):
        m = 0.5 * (a + b)
        if m <= a or m >= b:
            break
        gm = g(m)
        if gm == 0.0:
            return m
        if gm < 0.0:
            a = m
        else:
            b = m
    return 0.5 * (a + b)


def solve_two_wave(p: Potential, u_L: StatePoint, u_R: StatePoint, wave_fn: WaveFn,
                   interval: Sequence[float], solver: str, growth: float = 1.6,
                   max_expand: int = 60) -> PSolution:
    """Generic intermediate-state solve along family-1 then family-2 wave sets.

    The solve is done with v_L = 0 and shifted afterwards, so Galilean
    invariance holds to rounding.
    """
    u_L, u_R = StatePoint.coerce(u_L), StatePoint.coerce(u_R)
    if u_L == u_R:
        return PSolution(p, u_L, u_R, (), solver)
    v0 = u_L.v
    uL0 = StatePoint(u_L.r, 0.0)
    dv = u_R.v - v0
    lo, hi = interval

    def g(rm):
        w1 = wave_fn(p, uL0, rm, 1)
        um = _end_state(uL0, w1)
        w2 = wave_fn(p, um, u_R.r, 2)
        return _end_state(um, w2).v - dv

    def step(x, target):
        # back off toward x when the trial point leaves the supported regime
        for _ in range(40):
            try:
                return target, g(target)
            except UnsupportedRegimeError:
                if abs(target - x) < 1e-12 * max(1.0, abs(x)):
                    raise
                target = 0.5 * (x + target)
        raise UnsupportedRegimeError("no supported trial point for the intermediate state")

    # g increases with r_M; expand a symmetric bracket around r_L
    h = max(1e-3, 0.25 * abs(u_R.r - u_L.r) + 0.05 * abs(dv))
    a = b = u_L.r
    ga = gb = g(u_L.r)
    for _ in range(max_expand):
        if ga <= 0.0 <= gb:
            break
        if ga > 0.0:
            if a <= lo:
                raise NoSolutionError(f"intermediate state below the admissible range [{lo:.6g}, {hi:.6g}]")
            a, ga = step(a, max(lo, a - h))
        if gb < 0.0:
            if b >= hi:
                raise NoSolutionError(f"intermediate state above the admissible range [{lo:.6g}, {hi:.6g}]")
            b, gb = step(b, min(hi, b + h))
        h *= growth
    else:
        raise NoSolutionError("bracket exhaustion in the intermediate-state solve")
    rm = bisect_increasing(g, a, b, ga, gb)

    w1 = wave_fn(p, uL0, rm, 1)
    um = _end_state(uL0, w1)
    w2 = wave_fn(p, um, u_R.r, 2)
    waves = [_shift_wave(w, v0) for w in (*w1, *w2)]
    return PSolution(p, u_L, u_R, tuple(waves), solver)


def _shift_wave(w: ElementaryWave, v0: float) -> ElementaryWave:
    if v0 == 0.0:
        return w
    sh = w.shock
    if sh is not None:
        sh = replace(sh, u_left=sh.u_left.shift(v0), u_right=sh.u_right.shift(v0))
    return replace(w, u_left=w.u_left.shift(v0), u_right=w.u_right.shift(v0), shock=sh)


def classical_interval(p: Potential, r_L: float, r_R: float) -> tuple:
    """Largest sub-interval of eval_domain around r_L free of turning points."""
    lo, hi = p.eval_domain
    tps = domain_turning_points(p)
    for x in tps:
        if x < r_L - 1e-12:
            lo = max(lo, x)
        elif x > r_L + 1e-12:
            hi = min(hi, x)
    if not lo - 1e-12 <= r_R <= hi + 1e-12:
        raise NonclassicalRegimeError(
            f"r_L = {r_L:.6g} and r_R = {r_R:.6g} are separated by a turning point of Phi'")
    return lo, hi


def solve_riemann_classical(p: Potential, u_L, u_R) -> PSolution:
    """Classical (Lax) Riemann solution: family-1 wave, u_M, family-2 wave.

    Raises
    ------
    NonclassicalRegimeError
        If a turning point separates u_L and u_R.
    NoSolutionError
        If no intermediate state exists in the admissible range.
    """
    u_L, u_R = StatePoint.coerce(u_L), StatePoint.coerce(u_R)
    interval = classical_interval(p, u_L.r, u_R.r)
    return solve_two_wave(p, u_L, u_R, classical_wave, interval, "classical")


# --------------------------------------------------------------------------
# sampling
# --------------------------------------------------------------------------
def rarefaction_state(p: Potential, w: ElementaryWave, c: float) -> StatePoint:
    """Interior of a rarefaction fan: solve lambda_f(r) = c, v on the integral curve."""
    c_lo, c_hi = w.speed_range
    s = family_sign(w.family)
    # speed grows monotonically along the fan, so endpoints map to endpoints
    r_at_lo = w.u_left.r if abs(s * sound_speed(p, w.u_left.r) - c_lo) <= abs(s * sound_speed(p, w.u_right.r) - c_lo) else w.u_right.r
    if c <= c_lo:
        r = r_at_lo
    elif c >= c_hi:
        r = w.u_right.r if r_at_lo == w.u_left.r else w.u_left.r
    else:
        a, b = sorted((w.u_left.r, w.u_right.r))
        target = c * c
        f = lambda x: p.raw(x, 2) - target
        r = optimize.brentq(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    if r == w.u_left.r:
        return w.u_left
    if r == w.u_right.r:
        return w.u_right
    return StatePoint(float(r), integral_curve_v(p, w.u_left, r, w.family))


def sample_solution(sol: PSolution, c: float) -> StatePoint:
    """u(c) of a self-similar solution; left limit at shock speeds."""
    state = sol.u_far_left
    for w in sol.waves:
        c_lo, c_hi = w.speed_range
        if c <= c_lo:
            return w.u_left if w.kind != "rarefaction" or c < c_lo else w.u_left
        if w.kind == "rarefaction" and c < c_hi:
            return rarefaction_state(sol.potential, w, c)
        state = w.u_right
    return state


def weak_form_residuals(sol: PSolution, samples: int = 9) -> dict:
    """Largest RH residual over shocks and |c - lambda(r(c))| over fans."""
    p = sol.potential
    rh = 0.0
    fan = 0.0
    link = 0.0
    prev = sol.u_far_left
    for w in sol.waves:
        link = max(link, abs(w.u_left.r - prev.r), abs(w.u_left.v - prev.v))
        prev = w.u_right
        if w.shock is not None:
            rh = max(rh, *map(abs, w.shock.rh_residuals(p)))
        else:
            c_lo, c_hi = w.speed_range
            for c in np.linspace(c_lo, c_hi, samples + 2)[1:-1]:
                u = rarefaction_state(p, w, float(c))
                fan = max(fan, abs(c - family_sign(w.family) * sound_speed(p, u.r)))
    link = max(link, abs(prev.r - sol.u_far_right.r), abs(prev.v - sol.u_far_right.v))
    return {"rh": rh, "fan": fan, "link": link}


def reflect_solution_point(u: StatePoint) -> StatePoint:
    return u.reflect()
