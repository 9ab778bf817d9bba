"""Energy-conserving shocks: the function J and its zero set D.

J(r_L, r_R) = [[Phi]] - [[r]] <Phi'> vanishes on the diagonal to third
order.  Tracing and root finding therefore work with the regularised

    K(r_L, r_R) = J / (r_L - r_R)^3,

which equals -Phi'''(m)/12 - Phi^(5)(m) d^2/480 + O(d^4) near the diagonal
(m the midpoint, d the jump), so K = 0 is exactly the off-diagonal part of
D and meets the diagonal at the roots of Phi'''.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, optimize

from .errors import (
    AmbiguousBracketError,
    BifurcationAbsentError,
    DomainError,
    NoConjugateError,
    NotConservativeError,
)
from .potential import DEGENERATE_FOURTH, Potential, turning_points
from .psystem import (
    ShockData,
    StatePoint,
    classify,
    family_sign,
    rh_speed,
    rh_speed_sq,
)

SERIES_SWITCH = 0.03
J_TOL = 1e-10
SEED_GRID = 200
CONJ_SCAN = 400


# --------------------------------------------------------------------------
# J and K
# --------------------------------------------------------------------------
def jfunc(p: Potential, r_L, r_R):
    """J(r_L, r_R) = (Phi_L - Phi_R) - (r_L - r_R)(Phi'_L + Phi'_R)/2."""
    f = p._fn
    return (f(r_L, 0) - f(r_R, 0)) - (np.subtract(r_L, r_R)) * 0.5 * (f(r_L, 1) + f(r_R, 1))


def j_tolerance(p: Potential, r_L: float, r_R: float) -> float:
    return J_TOL * max(1.0, abs(p.raw(r_L, 0)) + abs(p.raw(r_R, 0)))


def kfunc(p: Potential, r_L, r_R):
    """Regularised J/(r_L - r_R)^3, smooth across the diagonal."""
    rl = np.asarray(r_L, dtype=float)
    rr = np.asarray(r_R, dtype=float)
    d = rl - rr
    m = 0.5 * (rl + rr)
    f = p._fn
    near = np.abs(d) < SERIES_SWITCH
    ser = -f(m, 3) / 12.0 - f(m, 5) * d * d / 480.0
    with np.errstate(divide="ignore", invalid="ignore"):
        dd = np.where(near, 1.0, d)
        direct = jfunc(p, rl, rr) / dd**3
    out = np.where(near, ser, direct)
    return float(out) if out.ndim == 0 else out


def kgrad(p: Potential, r_L: float, r_R: float) -> np.ndarray:
    """Gradient of K (series region uses the leading terms)."""
    f = p._fn
    d = r_L - r_R
    if abs(d) < SERIES_SWITCH:
        m = 0.5 * (r_L + r_R)
        km = -f(m, 4) / 12.0
        kd = -f(m, 5) * d / 240.0
        return np.array([0.5 * km + kd, 0.5 * km - kd])
    j = float(jfunc(p, r_L, r_R))
    half = 0.5 * (f(r_L, 1) - f(r_R, 1))
    jl = half - 0.5 * d * f(r_L, 2)
    jr = half - 0.5 * d * f(r_R, 2)
    return np.array([jl / d**3 - 3.0 * j / d**4, jr / d**3 + 3.0 * j / d**4])


def j_area(p: Potential, r_L: float, r_R: float) -> float:
    """Signed area between Phi' and its secant over [r_R, r_L] (quadrature)."""
    if r_L == r_R:
        return 0.0
    f = p._fn
    slope = (f(r_L, 1) - f(r_R, 1)) / (r_L - r_R)
    g = lambda s: f(s, 1) - (f(r_R, 1) + slope * (s - r_R))
    val, _ = integrate.quad(g, r_R, r_L, epsabs=1e-14, epsrel=1e-12, limit=200)
    return float(val)


# --------------------------------------------------------------------------
# points of D
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class ConsShockPoint:
    """A conservative-shock distance pair with its speeds.

    ``classification`` is the taxonomy label of the jump read as a 2-shock
    from r_L to r_R; undercompressive labels do not depend on the family.
    It is ``'undefined'`` if Phi'' is not positive at an endpoint.
    """

    r_L: float
    r_R: float
    c_rh_abs: float
    lambda_L: float
    lambda_R: float
    classification: str
    slope: float = float("nan")

    @classmethod
    def at(cls, p: Potential, r_L: float, r_R: float, with_slope: bool = True) -> "ConsShockPoint":
        q = rh_speed_sq(p, r_L, r_R)
        d2l, d2r = float(p.raw(r_L, 2)), float(p.raw(r_R, 2))
        c = math.sqrt(q) if q >= 0 else float("nan")
        lam_l = math.sqrt(d2l) if d2l > 0 else float("nan")
        lam_r = math.sqrt(d2r) if d2r > 0 else float("nan")
        if math.isnan(c) or math.isnan(lam_l) or math.isnan(lam_r):
            lab = "undefined"
        else:
            lab = classify(c, lam_l, lam_r, 2)
        sl = _slope(q, d2l, d2r) if with_slope else float("nan")
        return cls(float(r_L), float(r_R), c, lam_l, lam_r, lab, sl)


@dataclass
class DCurve:
    """Traced off-diagonal component of D inside a window."""

    points: np.ndarray
    closed: bool = False
    crossings: list = field(default_factory=list)
    extrema: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    step: float = 1e-2

    def shock_points(self, p: Potential) -> list:
        return [ConsShockPoint.at(p, float(a), float(b)) for a, b in self.points]

    def length(self) -> float:
        return float(np.sum(np.hypot(*np.diff(self.points, axis=0).T)))

    def to_dict(self) -> dict:
        return {"n_points": int(len(self.points)), "closed": self.closed,
                "crossings": list(self.crossings), "extrema": list(self.extrema),
                "warnings": list(self.warnings), "length": self.length()}


def _slope(q: float, d2l: float, d2r: float) -> float:
    den = q - d2r
    num = -(q - d2l)
    if abs(den) <= 1e-13 * max(1.0, abs(q)):
        return math.copysign(math.inf, num if num != 0 else 1.0)
    return num / den


def dset_slope(p: Potential, r_L: float, r_R: float) -> float:
    """dR/dr_L along D:  -(c_rh^2 - c_L^2) / (c_rh^2 - c_R^2).

    Returns a signed infinity at a vertical tangent (c_rh^2 = c_R^2).
    """
    return _slope(rh_speed_sq(p, r_L, r_R), float(p.raw(r_L, 2)), float(p.raw(r_R, 2)))


def _sign_changes(vals: np.ndarray) -> np.ndarray:
    s = np.sign(vals)
    return np.nonzero(s[:-1] * s[1:] < 0)[0]


def solve_conjugate(p: Potential, r_fixed: float, bracket: Sequence[float]) -> float:
    """Off-diagonal root r of J(r_fixed, r) = 0 inside ``bracket``.

    Raises
    ------
    NoConjugateError
        If K(r_fixed, .) has no sign change in the bracket.
    AmbiguousBracketError
        If it has more than one.
    """
    a, b = float(min(bracket)), float(max(bracket))
    xs = np.linspace(a, b, CONJ_SCAN + 1)
    ks = kfunc(p, np.full_like(xs, r_fixed), xs)
    zeros = np.nonzero(ks == 0.0)[0]
    idx = _sign_changes(ks)
    n = len(idx) + len(zeros)
    if n == 0:
        raise NoConjugateError(f"J({r_fixed:.6g}, r) has no off-diagonal root in [{a:.6g}, {b:.6g}]")
    if n > 1:
        raise AmbiguousBracketError(f"J({r_fixed:.6g}, r) has {n} roots in [{a:.6g}, {b:.6g}]")
    if len(zeros):
        return float(xs[zeros[0]])
    i = idx[0]
    g = lambda x: float(kfunc(p, r_fixed, x))
    return float(optimize.brentq(g, xs[i], xs[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps,
                                 maxiter=200))


def build_conservative_shock(p: Potential, r_L: float, r_R: float, v_L: float, family: int) -> ShockData:
    """Conservative shock with the given distances; v_R from the mass jump condition."""
    j = float(jfunc(p, r_L, r_R))
    if abs(j) > max(j_tolerance(p, r_L, r_R), 1e-8 * abs(r_L - r_R) ** 3):
        raise NotConservativeError(f"J({r_L:.6g}, {r_R:.6g}) = {j:.3g} is not zero")
    c = rh_speed(p, r_L, r_R, family)
    u_L = StatePoint(float(r_L), float(v_L))
    u_R = StatePoint(float(r_R), float(v_L + c * (r_L - r_R)))
    lam_l, lam_r = math.sqrt(p.raw(r_L, 2)), math.sqrt(p.raw(r_R, 2))
    return ShockData(u_L, u_R, c, family, classify(abs(c), lam_l, lam_r, family))


# --------------------------------------------------------------------------
# continuation
# --------------------------------------------------------------------------
def _correct(p: Potential, x_pred: np.ndarray, t: np.ndarray, iters: int = 12):
    """Newton on {K = 0, t.(x - x_pred) = 0}."""
    x = x_pred.copy()
    for _ in range(iters):
        k = float(kfunc(p, x[0], x[1]))
        g = kgrad(p, x[0], x[1])
        A = np.array([g, t])
        rhs = -np.array([k, t @ (x - x_pred)])
        try:
            dx = np.linalg.solve(A, rhs)
        except np.linalg.LinAlgError:
            return None
        x = x + dx
        if not np.all(np.isfinite(x)):
            return None
        if np.max(np.abs(dx)) < 1e-13:
            break
    if abs(float(kfunc(p, x[0], x[1]))) > 1e-11 * max(1.0, float(np.abs(kgrad(p, x[0], x[1])).max())):
        return None
    return x


def _tangent(p: Potential, x: np.ndarray, ref: np.ndarray) -> np.ndarray:
    g = kgrad(p, x[0], x[1])
    t = np.array([-g[1], g[0]])
    t /= np.linalg.norm(t)
    return t if t @ ref >= 0 else -t


def _inside(x, win, slack=0.0) -> bool:
    return (win[0] - slack <= x[0] <= win[1] + slack) and (win[2] - slack <= x[1] <= win[3] + slack)


def _boundary_hit(p: Potential, x_in: np.ndarray, x_out: np.ndarray, win) -> np.ndarray:
    """Intersection of D with the window edge crossed between two points."""
    lo = np.array([win[0], win[2]])
    hi = np.array([win[1], win[3]])
    # fraction along the segment to the first edge
    d = x_out - x_in
    best, axis, edge = 1.0, 0, hi[0]
    for k in range(2):
        for e in (lo[k], hi[k]):
            if d[k] != 0.0:
                s = (e - x_in[k]) / d[k]
                if 0.0 <= s < best:
                    best, axis, edge = s, k, e
    guess = x_in + best * d
    other = 1 - axis

    def g(y):
        pt = [0.0, 0.0]
        pt[axis], pt[other] = edge, y
        return float(kfunc(p, pt[0], pt[1]))

    a, b = sorted((x_in[other], x_out[other]))
    pad = 0.5 * (b - a) + 1e-9
    try:
        y = optimize.brentq(g, a - pad, b + pad, xtol=1e-14)
    except ValueError:
        y = guess[other]
    out = np.empty(2)
    out[axis], out[other] = edge, y
    return out


def _trace_branch(p: Potential, x0: np.ndarray, t0: np.ndarray, win, h: float,
                  max_steps: int, warn: list):
    pts = [x0.copy()]
    x, t = x0.copy(), t0.copy()
    start = x0.copy()
    travelled = 0.0
    for _ in range(max_steps):
        step = h
        for _halving in range(9):
            xn = _correct(p, x + step * t, t)
            if xn is not None and np.linalg.norm(xn - x) < 1.5 * step:
                break
            step *= 0.5
        else:
            warn.append(f"continuation failed near ({x[0]:.6g}, {x[1]:.6g}) after 8 halvings")
            return np.array(pts), False
        if not _inside(xn, win):
            pts.append(_boundary_hit(p, x, xn, win))
            return np.array(pts), False
        travelled += np.linalg.norm(xn - x)
        if travelled > 10 * h and np.linalg.norm(xn - start) < 1.5 * h and len(pts) > 10:
            pts.append(xn)
            pts.append(start.copy())
            return np.array(pts), True
        sec = xn - x
        t = _tangent(p, xn, sec)
        x = xn
        pts.append(x.copy())
    warn.append("maximum number of continuation steps reached")
    return np.array(pts), False


def _refine_crossing(p: Potential, r0: float, r1: float) -> float:
    # on the diagonal K(r, r) = -Phi'''(r)/12
    g = lambda r: float(p.raw(r, 3))
    a, b = sorted((r0, r1))
    pad = 0.5 * (b - a) + 1e-9
    try:
        return float(optimize.brentq(g, a - pad, b + pad, xtol=1e-15, maxiter=200))
    except ValueError:
        return 0.5 * (r0 + r1)


def _refine_extremum(p: Potential, pts: np.ndarray, i: int, axis: int) -> Optional[dict]:
    """Extremum of coordinate ``axis`` near polyline vertex i."""
    other = 1 - axis
    lo = max(i - 2, 0)
    hi = min(i + 2, len(pts) - 1)
    a, b = pts[lo, other], pts[hi, other]
    # coordinate `axis` as a function of `other`, corrected by Newton on K
    def solve_axis(y, guess):
        z = guess
        for _ in range(30):
            pt = [0.0, 0.0]
            pt[axis], pt[other] = z, y
            k = float(kfunc(p, *pt))
            dk = kgrad(p, *pt)[axis]
            if dk == 0.0:
                break
            dz = k / dk
            z -= dz
            if abs(dz) < 1e-14:
                break
        return z

    def h(y):
        z = solve_axis(y, pts[i, axis])
        rl, rr = (z, y) if axis == 0 else (y, z)
        q = rh_speed_sq(p, rl, rr)
        # r_L-extremum: c^2 = Phi''(r_R); r_R-extremum: c^2 = Phi''(r_L)
        return q - float(p.raw(rr if axis == 0 else rl, 2))

    try:
        ha, hb = h(a), h(b)
        if ha * hb > 0:
            return None
        y = optimize.brentq(h, min(a, b), max(a, b), xtol=1e-13)
    except (ValueError, ZeroDivisionError):
        return None
    z = solve_axis(y, pts[i, axis])
    rl, rr = (z, y) if axis == 0 else (y, z)
    return {"direction": "r_L" if axis == 0 else "r_R", "r_L": float(rl), "r_R": float(rr),
            "c_rh_abs": math.sqrt(max(rh_speed_sq(p, rl, rr), 0.0)),
            "before": float(h(a)), "after": float(h(b))}


def _annotate(p: Potential, curve: DCurve):
    pts = curve.points
    diff = pts[:, 0] - pts[:, 1]
    for i in _sign_changes(diff):
        r = _refine_crossing(p, pts[i, 0], pts[i + 1, 0])
        if not any(abs(r - c) < 1e-9 for c in curve.crossings):
            curve.crossings.append(r)
    for i in np.nonzero(diff == 0.0)[0]:
        if not any(abs(pts[i, 0] - c) < 1e-9 for c in curve.crossings):
            curve.crossings.append(float(pts[i, 0]))
    curve.crossings.sort()
    for axis in (0, 1):
        dx = np.diff(pts[:, axis])
        for j in _sign_changes(dx):
            ex = _refine_extremum(p, pts, j + 1, axis)
            if ex is not None and not any(abs(ex["r_L"] - e["r_L"]) + abs(ex["r_R"] - e["r_R"]) < 1e-7
                                          for e in curve.extrema):
                curve.extrema.append(ex)


def _seeds(p: Potential, win, grid: int) -> list:
    seeds = []
    lo, hi = max(win[0], win[2]), min(win[1], win[3])
    if lo < hi:
        for tp in turning_points(p, (lo, hi)):
            seeds.append((np.array([tp.r_star, tp.r_star]), np.array([1.0, -1.0]) / math.sqrt(2.0)))
    xs = np.linspace(win[0], win[1], grid)
    ys = np.linspace(win[2], win[3], grid)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    K = kfunc(p, X, Y)
    g = lambda a, b: float(kfunc(p, a, b))
    for i in range(grid):
        for j in range(grid):
            # edges to the right and upward neighbour (row-major order)
            for di, dj in ((1, 0), (0, 1)):
                ii, jj = i + di, j + dj
                if ii >= grid or jj >= grid:
                    continue
                if K[i, j] * K[ii, jj] < 0:
                    if di:
                        x = optimize.brentq(lambda s: g(s, ys[j]), xs[i], xs[ii], xtol=1e-14)
                        pt = np.array([x, ys[j]])
                    else:
                        y = optimize.brentq(lambda s: g(xs[i], s), ys[j], ys[jj], xtol=1e-14)
                        pt = np.array([xs[i], y])
                    seeds.append((pt, None))
    return seeds


def trace_dset(p: Potential, window: Sequence[float], seed_step: float = 1e-2,
               grid: int = SEED_GRID, max_steps: int = 200_000) -> list:
    """All off-diagonal components of D inside ``window`` = (rLmin, rLmax, rRmin, rRmax).

    Components are seeded at turning points on the diagonal and at sign
    changes of K on a coarse grid, then followed by pseudo-arclength
    continuation.  The diagonal itself is never traced.
    """
    win = tuple(float(x) for x in window)
    if not (p.in_domain([win[0], win[1]]) and p.in_domain([win[2], win[3]])):
        raise DomainError(f"window {win} is not inside eval_domain {p.eval_domain} squared")
    h = float(seed_step)
    cell = math.hypot((win[1] - win[0]) / grid, (win[3] - win[2]) / grid)
    curves: list = []
    traced = np.empty((0, 2))
    for x0, t0 in _seeds(p, win, grid):
        if len(traced) and np.min(np.hypot(*(traced - x0).T)) < 2.0 * cell + 2.0 * h:
            continue
        if t0 is None:
            t0 = _tangent(p, x0, np.array([1.0, -1.0]))
        warn: list = []
        fwd, closed = _trace_branch(p, x0, t0, win, h, max_steps, warn)
        if closed:
            pts = fwd
        else:
            bwd, _ = _trace_branch(p, x0, -t0, win, h, max_steps, warn)
            pts = np.vstack([bwd[::-1], fwd[1:]])
        curve = DCurve(points=pts, closed=closed, warnings=warn, step=h)
        _annotate(p, curve)
        curves.append(curve)
        traced = np.vstack([traced, pts])
    return curves


# --------------------------------------------------------------------------
# local structure at a turning point
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class BifurcationReport:
    r_star: float
    s: float
    r_L: float
    r_R: float
    tangent_residual: float
    slope: float
    sgn_c_vs_sound_L: int
    sgn_c_vs_sound_R: int
    sgn_cL_vs_cR: int
    fourth: float
    fifth: float

    @property
    def sgn_c_vs_sound(self) -> int:
        return self.sgn_c_vs_sound_L if self.sgn_c_vs_sound_L == self.sgn_c_vs_sound_R else 0


def bifurcation_check(p: Potential, r_star: float, s: float) -> BifurcationReport:
    """Locate the D branch through (r*+s, r*-s) and report the sign structure."""
    d4 = float(p.raw(r_star, 4))
    if abs(d4) <= DEGENERATE_FOURTH:
        raise BifurcationAbsentError(f"turning point {r_star:.6g} is degenerate (Phi''''={d4:.3g})")
    r_L = r_star + s
    try:
        r_R = solve_conjugate(p, r_L, (r_star - 3.0 * s, r_star + 0.5 * s))
    except (NoConjugateError, AmbiguousBracketError) as exc:
        raise BifurcationAbsentError(f"no D branch near ({r_L:.6g}, {r_star - s:.6g}): {exc}") from exc
    q = rh_speed_sq(p, r_L, r_R)
    d2l, d2r = float(p.raw(r_L, 2)), float(p.raw(r_R, 2))
    sg = lambda x: int(np.sign(x))
    return BifurcationReport(
        r_star=float(r_star), s=float(s), r_L=float(r_L), r_R=float(r_R),
        tangent_residual=abs(r_R - (r_star - s)) / s**2,
        slope=_slope(q, d2l, d2r),
        sgn_c_vs_sound_L=sg(q - d2l), sgn_c_vs_sound_R=sg(q - d2r), sgn_cL_vs_cR=sg(d2l - d2r),
        fourth=d4, fifth=float(p.raw(r_star, 5)))


def bifurcation_polynomial() -> np.ndarray:
    """Coefficients (highest first) of 2x^4 - 3x^3 + 3x - 2."""
    return np.array([2.0, -3.0, 0.0, 3.0, -2.0])
