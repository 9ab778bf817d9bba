"""Nonclassical p-system solvers for flux with a single turning point.

Both solvers are built from modified single-family wave sets.  All
constructions are carried out in a working frame where r_L > r* and the
target r_R lies below r*; data with r_L < r* are handled by the mirror

    (r, v) -> (2 r* - r, -v),   Phi~(r) = Phi(2 r* - r),

which maps p-system solutions to p-system solutions with the same speeds
and families and keeps the sign of Phi''''.

Labels: C compressive shock, N conservative shock, R rarefaction; the
FPU-prediction mode replaces C by D (dispersive shock).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize

from .conservative import (
    AmbiguousBracketError,
    NoConjugateError,
    jfunc,
    kfunc,
    solve_conjugate,
)
from .errors import (
    AnchorUndefinedError,
    ConfigError,
    UnsupportedRegimeError,
)
from .potential import Potential, mirrored
from .psystem import (
    ZERO_STRENGTH,
    ElementaryWave,
    PSolution,
    ShockData,
    StatePoint,
    classical_wave,
    domain_turning_points,
    family_sign,
    make_shock,
    rarefaction_wave,
    rh_speed_sq,
    shock_wave,
    solve_two_wave,
    turning_points_between,
)

INTERVAL_TOL = 1e-12
SCAN = 400


# --------------------------------------------------------------------------
# working frame
# --------------------------------------------------------------------------
@lru_cache(maxsize=64)
def _mirror_potential(p: Potential, r_star: float) -> Potential:
    return mirrored(p, r_star)


@dataclass(frozen=True)
class Frame:
    """Potential and coordinate map of the working frame (r_L > r*)."""

    p: Potential
    r_star: float
    flip: bool

    def r(self, x: float) -> float:
        return 2.0 * self.r_star - x if self.flip else x

    def u(self, s: StatePoint) -> StatePoint:
        return StatePoint(2.0 * self.r_star - s.r, -s.v) if self.flip else s

    def wave(self, w: ElementaryWave) -> ElementaryWave:
        if not self.flip:
            return w
        sh = w.shock
        if sh is not None:
            sh = replace(sh, u_left=self.u(sh.u_left), u_right=self.u(sh.u_right))
        return replace(w, u_left=self.u(w.u_left), u_right=self.u(w.u_right), shock=sh)


def frame_for(p: Potential, r_L: float, r_star: float) -> Frame:
    if r_L > r_star:
        return Frame(p, r_star, False)
    return Frame(_mirror_potential(p, r_star), r_star, True)


def nearest_turning_point(p: Potential, r: float) -> float:
    tps = domain_turning_points(p)
    if not tps:
        raise UnsupportedRegimeError(f"{p.name} has no turning point in its domain")
    return float(min(tps, key=lambda t: abs(t - r)))


def rarefaction_side(p: Potential, r_L: float, family: int) -> bool:
    """True if, for r_R just below r_L, the family wave is a rarefaction."""
    d3 = float(p.raw(r_L, 3))
    return d3 < 0 if family == 2 else d3 > 0


# --------------------------------------------------------------------------
# scalar roots
# --------------------------------------------------------------------------
def _scan_root(f: Callable[[float], float], a: float, b: float, name: str, pick: str = "only") -> float:
    """Unique (or first/last) sign change of f on (a, b), refined by brentq."""
    if not b > a:
        raise AnchorUndefinedError(f"{name}: empty bracket [{a:.6g}, {b:.6g}]")
    # roots collapse onto the turning point for data near it, so cluster points at both ends
    frac = 2.0 ** -np.arange(1, 25) / SCAN
    xs = np.unique(np.concatenate([np.linspace(a, b, SCAN + 1)[1:-1], a + (b - a) * frac, b - (b - a) * frac]))
    xs = xs[(xs > a) & (xs < b)]
    vals = np.array([f(x) for x in xs])
    ok = np.isfinite(vals)
    s = np.sign(vals)
    idx = [i for i in range(len(xs) - 1) if ok[i] and ok[i + 1] and s[i] * s[i + 1] < 0]
    zeros = [i for i in range(len(xs)) if ok[i] and vals[i] == 0.0]
    if zeros and not idx:
        return float(xs[zeros[0]])
    if not idx:
        raise AnchorUndefinedError(f"{name}: no root in [{a:.6g}, {b:.6g}]")
    if len(idx) > 1 and pick == "only":
        pick = "first"
    i = idx[0] if pick == "first" else idx[-1]
    return float(optimize.brentq(f, xs[i], xs[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps,
                                 maxiter=200))


def _conjugate(p: Potential, r: float, a: float, b: float, name: str) -> float:
    try:
        return solve_conjugate(p, r, (a, b))
    except (NoConjugateError, AmbiguousBracketError) as exc:
        raise AnchorUndefinedError(f"{name}: {exc}") from exc


# --------------------------------------------------------------------------
# conservative solver anchors
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class ConservativeAnchors:
    """Anchors of the conservative solver, in the caller's coordinates.

    ``r0`` and ``r2`` depend on r_L only; ``r_m`` and ``r1_of`` are maps of
    r_R, and ``r1`` is the threshold where r1_of(r_R) = r_R.
    """

    r_star: float
    r_L: float
    family: int
    side: str
    flipped: bool
    r0: float
    r2: Optional[float]
    r1: Optional[float]
    r_m: Callable = field(repr=False, compare=False, default=None)
    r1_of: Callable = field(repr=False, compare=False, default=None)

    def ordered(self) -> bool:
        """r1 < r0 < r2 < r* < r_L in the working frame."""
        m = (lambda x: 2 * self.r_star - x) if self.flipped else (lambda x: x)
        vals = [self.r1, self.r0, self.r2, self.r_star, self.r_L]
        if any(v is None for v in vals):
            return False
        w = [m(v) for v in vals]
        return all(a < b for a, b in zip(w, w[1:]))

    def to_dict(self) -> dict:
        return {"r_star": self.r_star, "r_L": self.r_L, "family": self.family, "side": self.side,
                "mirrored": self.flipped, "r0": self.r0, "r2": self.r2, "r1": self.r1}


def _r2(q: Potential, rl: float, r0: float) -> float:
    """Middle intersection of the chord (r0, r_L) with the graph of Phi'.

    It lies close to r* but not necessarily below it.
    """
    return _scan_root(lambda x: rh_speed_sq(q, rl, x) - rh_speed_sq(q, r0, x), r0, rl, "r2")


def _work_anchors(q: Potential, rl: float, rs: float):
    """r0, r2 and the conjugate maps in the working frame (rl > rs)."""
    lo, hi = q.eval_domain
    r0 = _conjugate(q, rl, lo, rs, "r0")
    try:
        r2 = _r2(q, rl, r0)
    except AnchorUndefinedError:
        r2 = None

    def r_m(r_R: float) -> float:
        return _conjugate(q, r_R, rs, hi, "r_m")

    def r1_of(r_R: float) -> float:
        target = rh_speed_sq(q, rl, r_m(r_R))
        return _scan_root(lambda x: rh_speed_sq(q, rl, x) - target, lo, r0, "r1")

    return r0, r2, r_m, r1_of


@lru_cache(maxsize=256)
def _work_r1(q: Potential, rl: float, rs: float) -> Optional[float]:
    """Fixed point of r_R -> r1(r_R) below r0, or None inside the domain."""
    lo, hi = q.eval_domain
    r0 = _cached_work_anchors(q, rl, rs)[0]

    def h(x):
        try:
            return rh_speed_sq(q, rl, x) - rh_speed_sq(q, rl, _conjugate(q, x, rs, hi, "r_m"))
        except AnchorUndefinedError:
            return float("nan")

    xs = np.linspace(lo, r0, 65)[1:-1]
    vals = np.array([h(x) for x in xs])
    for i in range(len(xs) - 2, -1, -1):
        if np.isfinite(vals[i]) and np.isfinite(vals[i + 1]) and vals[i] * vals[i + 1] <= 0:
            return float(optimize.brentq(h, xs[i], xs[i + 1], xtol=1e-14, rtol=4 * np.finfo(float).eps))
    return None


@lru_cache(maxsize=256)
def _cached_work_anchors(q: Potential, rl: float, rs: float):
    return _work_anchors(q, rl, rs)


@lru_cache(maxsize=256)
def _cached_work_dissipative(q: Potential, rl: float, rs: float):
    return _work_dissipative(q, rl, rs)


def conservative_anchors(p: Potential, u_L, family: int, r_star: Optional[float] = None) -> ConservativeAnchors:
    """Anchors r0, r2, r1 and the maps r_R -> r_m, r_R -> r1 for one family.

    Raises
    ------
    AnchorUndefinedError
        If r0 has no root inside the evaluation domain.
    """
    u_L = StatePoint.coerce(u_L)
    rs = nearest_turning_point(p, u_L.r) if r_star is None else float(r_star)
    fr = frame_for(p, u_L.r, rs)
    q = fr.p
    rl = fr.r(u_L.r)
    r0, r2, r_m_w, r1_of_w = _cached_work_anchors(q, rl, rs)
    r1 = _work_r1(q, rl, rs)
    side = "rarefaction" if rarefaction_side(q, rl, family) else "shock"
    back = fr.r
    return ConservativeAnchors(
        r_star=rs, r_L=u_L.r, family=family, side=side, flipped=fr.flip,
        r0=back(r0), r2=None if r2 is None else back(r2), r1=None if r1 is None else back(r1),
        r_m=lambda r_R: back(r_m_w(fr.r(r_R))),
        r1_of=lambda r_R: back(r1_of_w(fr.r(r_R))),
    )


# --------------------------------------------------------------------------
# dissipative solver anchors
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class DissipativeAnchors:
    r_star: float
    r_L: float
    family: int
    side: str
    flipped: bool
    r0_star: Optional[float]
    r1_star: Optional[float]
    tangent_point: Callable = field(repr=False, compare=False, default=None)

    def to_dict(self) -> dict:
        return {"r_star": self.r_star, "r_L": self.r_L, "family": self.family, "side": self.side,
                "mirrored": self.flipped, "r0_star": self.r0_star, "r1_star": self.r1_star}


def _work_dissipative(q: Potential, rl: float, rs: float):
    lo, hi = q.eval_domain
    try:
        r0s = _scan_root(lambda x: rh_speed_sq(q, rl, x) - q.raw(x, 2), lo, rs, "r0_star", pick="last")
    except AnchorUndefinedError:
        r0s = None
    d2l = q.raw(rl, 2)
    try:
        r1s = _scan_root(lambda x: rh_speed_sq(q, rl, x) - d2l, lo, rs, "r1_star", pick="last")
    except AnchorUndefinedError:
        r1s = None

    def tangent_point(r_R: float) -> float:
        # r_m in (r*, r_L] with c_rh(r_m, r_R)^2 = Phi''(r_m)
        return _scan_root(lambda x: rh_speed_sq(q, x, r_R) - q.raw(x, 2), rs, rl + 1e-9 * max(1.0, abs(rl)),
                          "tangent point", pick="last")

    return r0s, r1s, tangent_point


def dissipative_anchors(p: Potential, u_L, family: int, r_star: Optional[float] = None) -> DissipativeAnchors:
    """Anchors r0* (shock tangent to the flux) and r1* (shock speed equals lambda(r_L))."""
    u_L = StatePoint.coerce(u_L)
    rs = nearest_turning_point(p, u_L.r) if r_star is None else float(r_star)
    fr = frame_for(p, u_L.r, rs)
    q = fr.p
    rl = fr.r(u_L.r)
    r0s, r1s, tp = _cached_work_dissipative(q, rl, rs)
    side = "rarefaction" if rarefaction_side(q, rl, family) else "shock"
    back = fr.r
    if r0s is None and side == "shock":
        raise AnchorUndefinedError("r0_star: no tangent point below the turning point")
    return DissipativeAnchors(
        r_star=rs, r_L=u_L.r, family=family, side=side, flipped=fr.flip,
        r0_star=None if r0s is None else back(r0s), r1_star=None if r1s is None else back(r1s),
        tangent_point=lambda r_R: back(tp(fr.r(r_R))))


# --------------------------------------------------------------------------
# single-family modified wave sets
# --------------------------------------------------------------------------
def _crossing(p: Potential, r_L: float, r_R: float) -> Optional[float]:
    tps = turning_points_between(p, r_L, r_R)
    if not tps:
        return None
    if len(tps) > 1:
        raise UnsupportedRegimeError(
            f"{len(tps)} turning points between {r_L:.6g} and {r_R:.6g}; at most one is supported")
    return tps[0]


def _guard_single(p: Potential, a: float, b: float, rs: float, what: str):
    others = [x for x in turning_points_between(p, a, b) if abs(x - rs) > 1e-9]
    if others:
        raise UnsupportedRegimeError(f"{what} [{min(a, b):.6g}, {max(a, b):.6g}] contains a second "
                                     f"turning point at {others[0]:.6g}")


def _tp_ahead(p: Potential, r_L: float, r_R: float) -> Optional[float]:
    """Nearest turning point beyond r_R, seen from r_L."""
    d = np.sign(r_R - r_L)
    ahead = [t for t in domain_turning_points(p) if (t - r_R) * d > 0]
    return min(ahead, key=lambda t: abs(t - r_R)) if ahead else None


def _before_r2(p: Potential, u_L: StatePoint, r_R: float, family: int, rs: float) -> bool:
    fr = frame_for(p, u_L.r, rs)
    q, rl, rr = fr.p, fr.r(u_L.r), fr.r(r_R)
    if rarefaction_side(q, rl, family):
        return False
    try:
        r2 = _cached_work_anchors(q, rl, rs)[1]
    except AnchorUndefinedError:
        return False
    return r2 is not None and rr < r2 - INTERVAL_TOL * max(1.0, abs(rl))


def _cons_shock(q: Potential, u: StatePoint, r: float, family: int) -> ElementaryWave:
    return shock_wave(q, u, r, family, kind="conservative_shock")


def conservative_wave(p: Potential, u_L: StatePoint, r_R: float, family: int) -> list:
    """Waves from u_L to abscissa r_R inside the conservative wave set."""
    if abs(r_R - u_L.r) < ZERO_STRENGTH:
        return []
    rs = _crossing(p, u_L.r, r_R)
    if rs is None:
        # the nucleation threshold r2 may lie beyond r*, so a shock that
        # does not reach r* can still be replaced by {N, C}
        rs = _tp_ahead(p, u_L.r, r_R)
        if rs is None or not _before_r2(p, u_L, r_R, family, rs):
            return classical_wave(p, u_L, r_R, family)
    fr = frame_for(p, u_L.r, rs)
    q, ul, rr = fr.p, fr.u(u_L), fr.r(r_R)
    waves = _cons_work(q, ul, rr, family, rs)
    return [fr.wave(w) for w in waves]


def _cons_work(q: Potential, ul: StatePoint, rr: float, family: int, rs: float) -> list:
    rl = ul.r
    lo, hi = q.eval_domain
    r0, r2 = _cached_work_anchors(q, rl, rs)[:2]
    _guard_single(q, r0, rl, rs, "[r0, r_L]")
    tol = INTERVAL_TOL * max(1.0, abs(rl))
    if not rarefaction_side(q, rl, family):
        if r2 is None:
            raise AnchorUndefinedError("r2: the chord through r0 and r_L meets Phi' nowhere in between")
        if rr >= r2 - tol:
            return [shock_wave(q, ul, rr, family)]
        n = _cons_shock(q, ul, r0, family)
        u0 = n.u_right
        if rr > r0 + tol:
            return [n, shock_wave(q, u0, rr, family)]
        if rr >= r0 - tol:
            return [n]
        return [n, rarefaction_wave(q, u0, rr, family)]
    # rarefaction side
    if rr > r0 + tol:
        rm = _conjugate(q, rr, rs, hi, "r_m")
        _guard_single(q, rr, rm, rs, "[r_R, r_m]")
        r_wave = rarefaction_wave(q, ul, rm, family, attached=True)
        return [r_wave, _cons_shock(q, r_wave.u_right, rr, family)]
    if rr >= r0 - tol:
        return [_cons_shock(q, ul, rr, family)]

    r1 = _work_r1(q, rl, rs)
    if r1 is None or rr > r1 + tol:
        rm = _conjugate(q, rr, rs, hi, "r_m")
        _guard_single(q, rr, rm, rs, "[r_R, r_m]")
        c = shock_wave(q, ul, rm, family)
        return [c, _cons_shock(q, c.u_right, rr, family)]
    return [shock_wave(q, ul, rr, family)]


def dissipative_wave(p: Potential, u_L: StatePoint, r_R: float, family: int) -> list:
    """Waves from u_L to abscissa r_R inside the dissipative (tangent) wave set."""
    if abs(r_R - u_L.r) < ZERO_STRENGTH:
        return []
    rs = _crossing(p, u_L.r, r_R)
    if rs is None:
        return classical_wave(p, u_L, r_R, family)
    fr = frame_for(p, u_L.r, rs)
    q, ul, rr = fr.p, fr.u(u_L), fr.r(r_R)
    waves = _diss_work(q, ul, rr, family, rs)
    return [fr.wave(w) for w in waves]


def _diss_work(q: Potential, ul: StatePoint, rr: float, family: int, rs: float) -> list:
    rl = ul.r
    r0s, r1s, tangent_point = _cached_work_dissipative(q, rl, rs)
    tol = INTERVAL_TOL * max(1.0, abs(rl))
    if not rarefaction_side(q, rl, family):
        if r0s is None:
            raise AnchorUndefinedError("r0_star: no tangent point below the turning point")
        _guard_single(q, r0s, rl, rs, "[r0*, r_L]")
        if rr >= r0s - tol:
            return [shock_wave(q, ul, rr, family)]
        c = shock_wave(q, ul, r0s, family)
        return [c, rarefaction_wave(q, c.u_right, rr, family, attached=True)]
    # an undefined r1* means the composite extends to the domain edge
    if r1s is None or rr > r1s + tol:
        rm = tangent_point(rr)
        r_wave = rarefaction_wave(q, ul, rm, family)
        c = shock_wave(q, r_wave.u_right, rr, family, attached=True)
        return [r_wave, c]
    return [shock_wave(q, ul, rr, family)]


# --------------------------------------------------------------------------
# Riemann problems
# --------------------------------------------------------------------------
def _wave_fn_checked(fn):
    def wrapped(p, u, r, family):
        return fn(p, u, r, family)
    return wrapped


def solve_riemann_conservative(p: Potential, u_L, u_R) -> PSolution:
    """Riemann solution built from the conservative modified wave sets."""
    u_L, u_R = StatePoint.coerce(u_L), StatePoint.coerce(u_R)
    return solve_two_wave(p, u_L, u_R, conservative_wave, p.eval_domain, "conservative")


def solve_riemann_dissipative(p: Potential, u_L, u_R) -> PSolution:
    """Riemann solution built from the dissipative modified wave sets."""
    u_L, u_R = StatePoint.coerce(u_L), StatePoint.coerce(u_R)
    return solve_two_wave(p, u_L, u_R, dissipative_wave, p.eval_domain, "dissipative")


def single_wave_solution(p: Potential, u_L, r_R: float, family: int, solver: str = "conservative") -> PSolution:
    """Fan obtained by following one modified wave set from u_L to abscissa r_R."""
    u_L = StatePoint.coerce(u_L)
    fn = {"conservative": conservative_wave, "dissipative": dissipative_wave,
          "classical": classical_wave}[solver]
    waves = fn(p, u_L, float(r_R), family)
    end = waves[-1].u_right if waves else u_L
    return PSolution(p, u_L, end, tuple(waves), solver)


def conservative_segments(p: Potential, u_L, family: int) -> list:
    """Segment table (r_R interval, letters) on the far side of the turning point.

    Intervals are in the caller's coordinates; an open end toward the
    domain edge is reported as the edge itself.
    """
    a = conservative_anchors(p, u_L, family)
    w = (lambda x: 2 * a.r_star - x) if a.flipped else (lambda x: x)
    q_lo = w(p.eval_domain[1]) if a.flipped else p.eval_domain[0]
    if a.side == "shock":
        cuts = [(w(a.r2), w(a.r_L), ["C"]), (w(a.r0), w(a.r2), ["N", "C"]), (q_lo, w(a.r0), ["N", "R"])]
    else:
        r1 = w(a.r1) if a.r1 is not None else q_lo
        cuts = [(w(a.r0), a.r_star, ["R", "N"]), (r1, w(a.r0), ["C", "N"])]
        if a.r1 is not None:
            cuts.append((q_lo, r1, ["C"]))
    return [{"r_R": sorted((w(lo), w(hi))), "letters": lett} for lo, hi, lett in cuts]


# --------------------------------------------------------------------------
# FPU predictions
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class CfTable:
    """Measured front (and back) velocities of dispersive shocks from u_L."""

    u_L: StatePoint
    family: int
    r_R: tuple
    c_f: tuple
    c_b: tuple = ()

    def __post_init__(self):
        order = np.argsort(self.r_R)
        object.__setattr__(self, "r_R", tuple(float(self.r_R[i]) for i in order))
        object.__setattr__(self, "c_f", tuple(float(self.c_f[i]) for i in order))
        if self.c_b:
            object.__setattr__(self, "c_b", tuple(float(self.c_b[i]) for i in order))

    @property
    def range(self) -> tuple:
        return (self.r_R[0], self.r_R[-1])

    def covers(self, x: float) -> bool:
        return self.r_R[0] - 1e-12 <= x <= self.r_R[-1] + 1e-12

    def __call__(self, x: float) -> float:
        if not self.covers(x):
            raise ValueError(f"r_R = {x:.6g} outside the measured range {self.range}")
        return float(np.interp(x, self.r_R, self.c_f))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r_L", "v_L", "family", "r_R", "c_f", "c_b"])
            for i, (r, c) in enumerate(zip(self.r_R, self.c_f)):
                w.writerow([self.u_L.r, self.u_L.v, self.family, r, c,
                            self.c_b[i] if self.c_b else ""])

    @classmethod
    def from_csv(cls, path) -> "CfTable":
        rows = list(csv.DictReader(open(path)))
        if not rows:
            raise ConfigError(f"empty cf table {path}")
        u = StatePoint(float(rows[0]["r_L"]), float(rows[0]["v_L"]))
        fam = int(rows[0]["family"])
        cb = tuple(float(r["c_b"]) for r in rows) if all(r.get("c_b") for r in rows) else ()
        return cls(u, fam, tuple(float(r["r_R"]) for r in rows), tuple(float(r["c_f"]) for r in rows), cb)


@dataclass
class PredictedStructure:
    mode: str
    letters: list
    per_family: dict
    anchors: dict
    proxy: bool
    solution: Optional[PSolution] = None
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"mode": self.mode, "letters": self.letters,
                "per_family": {str(k): v for k, v in self.per_family.items()},
                "anchors": self.anchors, "proxy": self.proxy, "notes": self.notes}


def _cf_root(f: Callable[[float], float], table: CfTable, name: str) -> Optional[float]:
    a, b = table.range
    xs = np.array(table.r_R)
    vals = np.array([f(x) for x in xs])
    s = np.sign(vals)
    for i in range(len(xs) - 1):
        if s[i] == 0:
            return float(xs[i])
        if s[i] * s[i + 1] < 0:
            return float(optimize.brentq(f, xs[i], xs[i + 1], xtol=1e-12))
    if s[-1] == 0:
        return float(xs[-1])
    return None


def _family_letters_from_anchors(side: str, mode: str, r_R_w: float, a: dict) -> list:
    """Letters from the working-frame anchors (r_R below the turning point)."""
    if mode == "supersonic_conjecture":
        if side == "shock":
            if r_R_w >= a["r2"]:
                return ["D"]
            if r_R_w > a["r0"]:
                return ["N", "D"]
            return ["N", "R"] if r_R_w < a["r0"] else ["N"]
        if r_R_w > a["r0"]:
            return ["R", "N"]
        if r_R_w == a["r0"]:
            return ["N"]
        # an undefined r1 means the composite reaches the domain edge
        if a.get("r1") is None or r_R_w > a["r1"]:
            return ["D", "N"]
        return ["D"]
    # subsonic: dissipative structure, never N
    if side == "shock":
        return ["D"] if r_R_w >= a["r0_star"] else ["D", "R"]
    if a.get("r1_star") is None or r_R_w > a["r1_star"]:
        return ["R", "D"]
    return ["D"]


def fpu_predicted_structure(p: Potential, u_L, u_R, mode: str,
                            cf_table: Optional[CfTable] = None) -> PredictedStructure:
    """Predicted macroscopic FPU wave sequence.

    ``supersonic_conjecture`` uses the conservative solver with C -> D and
    (given a table) the nucleation anchor r2 replaced by the root of
    |c_f(r_L, r)| = |c_rh(r_L, r0)|, r1 by the root of
    |c_f(r_L, r_m(r))| = |c_rh(r, r_m(r))|.  ``subsonic_conjecture`` uses
    the dissipative solver with r0* and r1* recomputed from c_f.  Without a
    usable table the p-system anchors are kept and ``proxy`` is set.
    """
    if mode not in ("supersonic_conjecture", "subsonic_conjecture"):
        raise ConfigError(f"unknown mode {mode!r}")
    u_L, u_R = StatePoint.coerce(u_L), StatePoint.coerce(u_R)
    solver = solve_riemann_conservative if mode == "supersonic_conjecture" else solve_riemann_dissipative
    sol = solver(p, u_L, u_R)
    notes: list = []
    per_family: dict = {}
    anchors_out: dict = {}
    proxy = True
    left = u_L
    for fam in (1, 2):
        waves = [w for w in sol.waves if w.family == fam]
        if not waves:
            per_family[fam] = []
            continue
        start = waves[0].u_left
        end = waves[-1].u_right
        rs_list = turning_points_between(p, start.r, end.r)
        if not rs_list:
            per_family[fam] = ["D" if w.letter == "C" else w.letter for w in waves]
            continue
        rs = rs_list[0]
        fr = frame_for(p, start.r, rs)
        q = fr.p
        rl = fr.r(start.r)
        r_R_w = fr.r(end.r)
        side = "rarefaction" if rarefaction_side(q, rl, fam) else "shock"
        a: dict = {}
        if mode == "supersonic_conjecture":
            r0, r2 = _cached_work_anchors(q, rl, rs)[:2]
            r1 = _work_r1(q, rl, rs) if side == "rarefaction" else None
            a.update(r0=r0, r2=r2, r1=r1)
        else:
            r0s, r1s, _ = _cached_work_dissipative(q, rl, rs)
            a.update(r0_star=r0s, r1_star=r1s)
        table_ok = (cf_table is not None and cf_table.family == fam
                    and abs(cf_table.u_L.r - start.r) < 1e-9 and abs(cf_table.u_L.v - start.v) < 1e-9)
        if cf_table is not None and not table_ok:
            notes.append(f"cf table does not match the family-{fam} wave group; proxy anchors used")
        fam_proxy = True
        if table_ok:
            cf = lambda x_w: abs(cf_table(fr.r(x_w)))
            tbl_w = CfTable(StatePoint(rl, 0.0), fam, tuple(fr.r(x) for x in cf_table.r_R), cf_table.c_f)
            try:
                if mode == "supersonic_conjecture":
                    c_cons = math.sqrt(rh_speed_sq(q, rl, a["r0"]))
                    if side == "shock":
                        hat = _cf_root(lambda x: cf(x) - c_cons, tbl_w, "r2_hat")
                        if hat is not None:
                            a["r2"] = hat
                            fam_proxy = False
                    else:
                        hi = q.eval_domain[1]
                        def g(x):
                            rm = _conjugate(q, x, rs, hi, "r_m")
                            return cf(rm) - math.sqrt(rh_speed_sq(q, x, rm))
                        lo = q.eval_domain[0]
                        try:
                            a["r1"] = _scan_root(g, lo, a["r0"], "r1_hat", pick="last")
                            fam_proxy = False
                        except (AnchorUndefinedError, ValueError):
                            notes.append("r1_hat not covered by the cf table")
                else:
                    if side == "shock":
                        hat = _cf_root(lambda x: cf(x) ** 2 - q.raw(x, 2), tbl_w, "r0_star_hat")
                        if hat is not None:
                            a["r0_star"] = hat
                            fam_proxy = False
                    else:
                        d2l = q.raw(rl, 2)
                        hat = _cf_root(lambda x: cf(x) ** 2 - d2l, tbl_w, "r1_star_hat")
                        if hat is not None:
                            a["r1_star"] = hat
                            fam_proxy = False
            except ValueError as exc:
                notes.append(f"extrapolation refused: {exc}")
        if fam_proxy and table_ok:
            notes.append(f"family {fam}: nucleation anchor outside the measured range; proxy used")
        proxy = proxy and fam_proxy
        per_family[fam] = _family_letters_from_anchors(side, mode, r_R_w, a)
        anchors_out[fam] = {k: (None if v is None else fr.r(v)) for k, v in a.items()}
        anchors_out[fam]["side"] = side
    letters = per_family.get(1, []) + per_family.get(2, [])
    return PredictedStructure(mode, letters, per_family, anchors_out, proxy, sol, notes)


def nucleation_diagnostic(p: Potential, u_L, family: int, cf_table: CfTable,
                          r_star: Optional[float] = None) -> dict:
    """Is |c_f(r_L, r_R)| > |c_rh(r_L, r0)| over the whole measured range?

    If so the FPU nucleation criterion for a conservative shock is never met.
    """
    u_L = StatePoint.coerce(u_L)
    a = conservative_anchors(p, u_L, family, r_star)
    c_cons = math.sqrt(rh_speed_sq(p, u_L.r, a.r0))
    cf = np.abs(np.array(cf_table.c_f))
    margin = cf - c_cons
    return {"c_cons": c_cons, "r0": a.r0, "r_R": list(cf_table.r_R), "c_f": list(map(float, cf)),
            "min_margin": float(margin.min()), "never_met": bool(np.all(margin > 0.0))}
