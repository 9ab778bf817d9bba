"""Interaction potentials with closed-form derivatives up to fifth order.

Each potential carries an evaluation interval on which Phi'' > 0 is
checked at construction.  Derivatives are hand coded per kind; there is
no numerical differentiation anywhere in the production path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConvexityError, DomainError, UsageError

MAX_ORDER = 5
CONVEXITY_SAMPLES = 10_000
TP_GRID = 10_000
DEGENERATE_FOURTH = 1e-8
POTENTIAL_KEYS = frozenset({"name", "kind", "params", "eval_domain", "base", "strict"})

KINDS = (
    "toda",
    "modified_toda",
    "arctan_flux",
    "quintic_fast",
    "quintic_slow",
    "trig_multi",
    "harmonic",
    "polynomial",
    "shifted",
    "mirrored",
)

# Narrowed where the nominal ranges leave the convex region, see README.
DEFAULT_DOMAINS = {
    "toda": (-5.0, 10.0),
    "modified_toda": (-5.0, 10.0),
    "arctan_flux": (-20.0, 20.0),
    "quintic_fast": (-0.15, 3.4),
    "quintic_slow": (-1.0, 7.0),
    "trig_multi": (-0.05, 10.0),
    "harmonic": (-10.0, 10.0),
}

QUINTIC_FAST = (0.0, 0.0, 1.0, -1.0 / 6.0, -1.0 / 24.0, 1.0 / 120.0)
QUINTIC_SLOW = (0.0, 0.0, 1.0, -1.0 / 6.0, 1.0 / 24.0, 1.0 / 120.0)


def _poly_derivs(coeffs: Sequence[float], center: float) -> list:
    """Coefficient lists of a polynomial in (r - center) and its derivatives."""
    out = []
    c = np.asarray(coeffs, dtype=float)
    for _ in range(MAX_ORDER + 1):
        out.append(c.copy())
        c = c[1:] * np.arange(1, len(c)) if len(c) > 1 else np.zeros(1)
    return out


def _polyval(c: np.ndarray, s):
    # Horner in increasing-power storage
    acc = np.zeros_like(s, dtype=float) + c[-1]
    for a in c[-2::-1]:
        acc = acc * s + a
    return acc


def _make_polynomial(coeffs, center):
    tab = _poly_derivs(coeffs, center)

    def fn(r, k):
        return _polyval(tab[k], r - center)

    return fn


def _ipow(s, n: int):
    # repeated products: array ** int goes through the slow generic pow
    out = np.ones_like(s) if isinstance(s, np.ndarray) else 1.0
    for _ in range(n):
        out = out * s
    return out


def _toda(r, k):
    e = np.exp(1.0 - r)
    if k == 0:
        return e - (1.0 - r)
    if k == 1:
        return 1.0 - e
    return e if k % 2 == 0 else -e


def _make_modified_toda(quartic):
    def fn(r, k):
        s = r - 1.0
        # d^k/dr^k of quartic*s^4
        falling = (1.0, 4.0, 12.0, 24.0, 24.0, 0.0)[k]
        extra = quartic * falling * _ipow(s, 4 - k) if k <= 4 else 0.0 * s
        return _toda(r, k) + extra

    return fn


def _make_arctan(scale):
    def fn(r, k):
        q = 1.0 + r * r
        if k == 0:
            val = 0.5 * r * r + r * np.arctan(r) - 0.5 * np.log(q)
        elif k == 1:
            val = r + np.arctan(r)
        elif k == 2:
            val = 1.0 + 1.0 / q
        elif k == 3:
            val = -2.0 * r / (q * q)
        elif k == 4:
            val = (6.0 * r * r - 2.0) / (q * q * q)
        else:
            val = 24.0 * r * (1.0 - r * r) / ((q * q) * (q * q))
        return scale * val

    return fn


def _make_trig(center, poly, waves):
    """Polynomial in s = r - center plus sum of A cos(w s + phase)."""
    ptab = _poly_derivs(poly, center)

    def fn(r, k):
        s = r - center
        val = _polyval(ptab[k], s)
        for amp, w, ph in waves:
            val = val + amp * w**k * np.cos(w * s + ph + 0.5 * k * math.pi)
        return val

    return fn


# s + s^2/2 + s^3/20 - cos(2s)/4 + sin(3s)/10 with s = r - 1
TRIG_MULTI_POLY = (0.0, 1.0, 0.5, 0.05)
TRIG_MULTI_WAVES = ((-0.25, 2.0, 0.0), (0.1, 3.0, -0.5 * math.pi))


@dataclass(frozen=True)
class TurningPoint:
    """Root of Phi''' together with the local sign structure."""

    r_star: float
    fourth_sign: int
    fifth: float
    fourth: float = 0.0

    @property
    def degenerate(self) -> bool:
        return self.fourth_sign == 0

    @property
    def convex_concave(self) -> bool:
        return self.fourth_sign < 0


@dataclass(frozen=True, eq=False)
class Potential:
    """Interaction potential Phi with trusted evaluation interval.

    Parameters
    ----------
    name : str
        Identifier used in configs and reports.
    kind : str
        One of ``KINDS``.
    params : tuple of float
        Kind-specific coefficients.
    eval_domain : (float, float)
        Interval on which evaluation is permitted.
    base : Potential, optional
        Underlying potential for ``shifted`` and ``mirrored``.
    strict : bool
        If False the convexity scan is skipped.  Only meant for looking at
        the geometry of J = 0 outside the hyperbolic region.
    """

    name: str
    kind: str
    params: tuple = ()
    eval_domain: tuple = (-1.0, 1.0)
    base: Optional["Potential"] = None
    strict: bool = True
    _fn: Callable = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UsageError(f"unknown potential kind {self.kind!r}")
        lo, hi = float(self.eval_domain[0]), float(self.eval_domain[1])
        if not lo < hi:
            raise UsageError(f"empty eval_domain {self.eval_domain}")
        object.__setattr__(self, "eval_domain", (lo, hi))
        object.__setattr__(self, "params", tuple(float(x) for x in self.params))
        object.__setattr__(self, "_fn", self._build())
        if self.strict:
            self._check_convexity()

    # construction ---------------------------------------------------------
    def _build(self):
        k, p = self.kind, self.params
        if k == "toda":
            return _toda
        if k == "modified_toda":
            return _make_modified_toda(p[0] if p else 1.0 / 40.0)
        if k == "arctan_flux":
            return _make_arctan(p[0] if p else 1.0 / 16.0)
        if k == "quintic_fast":
            return _make_polynomial(QUINTIC_FAST, 2.0)
        if k == "quintic_slow":
            return _make_polynomial(QUINTIC_SLOW, 2.0)
        if k == "trig_multi":
            return _make_trig(1.0, TRIG_MULTI_POLY, TRIG_MULTI_WAVES)
        if k == "harmonic":
            stiff = p[0] if p else 1.0
            return _make_polynomial((0.0, 0.0, 0.5 * stiff), 0.0)
        if k == "polynomial":
            # params = (center, a0, a1, ...), Phi = sum a_j (r - center)^j
            if len(p) < 2:
                raise UsageError("polynomial needs a center and coefficients")
            return _make_polynomial(p[1:], p[0])
        if self.base is None or len(p) != 1:
            raise UsageError(f"{k} needs a base potential and one parameter")
        b, r0 = self.base, p[0]
        if k == "shifted":
            return lambda r, n: b._fn(r - r0, n)
        # mirrored about r0: Phi(r) = base(2 r0 - r)
        return lambda r, n: (-1.0) ** n * b._fn(2.0 * r0 - r, n)

    def _check_convexity(self):
        lo, hi = self.eval_domain
        rs = np.linspace(lo, hi, CONVEXITY_SAMPLES)
        d2 = self._fn(rs, 2)
        bad = rs[~(d2 > 0.0)]
        if bad.size:
            shown = ", ".join(f"{x:.4g}" for x in bad[:8])
            raise ConvexityError(
                f"{self.name}: Phi'' <= 0 at {bad.size} of {rs.size} samples "
                f"in {self.eval_domain}, e.g. r = {shown}"
            )

    # evaluation -----------------------------------------------------------
    def in_domain(self, r, slack: float = 1e-12) -> bool:
        lo, hi = self.eval_domain
        r = np.asarray(r)
        return bool(np.all((r >= lo - slack) & (r <= hi + slack)))

    def raw(self, r, order: int = 0):
        """Evaluate without the domain check (internal hot paths)."""
        return self._fn(r, order)

    def eval(self, r, order: int = 0):
        """Return d^order Phi / dr^order at r (scalar or array).

        Raises
        ------
        UsageError
            If ``order`` is outside 0..5.
        DomainError
            If any abscissa lies outside ``eval_domain``.
        """
        if not isinstance(order, (int, np.integer)) or not 0 <= order <= MAX_ORDER:
            raise UsageError(f"derivative order must be in 0..{MAX_ORDER}, got {order!r}")
        if not self.in_domain(r):
            arr = np.atleast_1d(np.asarray(r, dtype=float))
            lo, hi = self.eval_domain
            off = arr[(arr < lo) | (arr > hi)]
            raise DomainError(f"{self.name}: r = {off[0]:.6g} outside eval_domain {self.eval_domain}")
        out = self._fn(np.asarray(r, dtype=float), order)
        return float(out) if np.ndim(out) == 0 else out

    def phi(self, r):
        return self.eval(r, 0)

    def dphi(self, r):
        return self.eval(r, 1)

    def d2phi(self, r):
        return self.eval(r, 2)

    def sound_speed(self, r):
        return sound_speed(self, r)

    # serialisation --------------------------------------------------------
    def to_dict(self) -> dict:
        d = {"name": self.name, "kind": self.kind, "params": list(self.params),
             "eval_domain": list(self.eval_domain)}
        if self.base is not None:
            d["base"] = self.base.to_dict()
        if not self.strict:
            d["strict"] = False
        return d

    def __eq__(self, other):
        return isinstance(other, Potential) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash((self.name, self.kind, self.params, self.eval_domain))

    def __reduce__(self):
        return (from_dict, (self.to_dict(),))


def evaluate(p: Potential, r, order: int = 0):
    """Module-level form of :meth:`Potential.eval`."""
    return p.eval(r, order)


def sound_speed(p: Potential, r):
    """Positive characteristic speed sqrt(Phi''(r)).

    Raises
    ------
    ConvexityError
        If Phi''(r) <= 0.
    """
    d2 = np.asarray(p.eval(r, 2))
    if np.any(d2 <= 0.0):
        raise ConvexityError(f"{p.name}: Phi''(r) <= 0 at r = {np.atleast_1d(r)[np.argmin(np.atleast_1d(d2))]}")
    out = np.sqrt(d2)
    return float(out) if out.ndim == 0 else out


def _refine_root(f3, f4, a: float, b: float, fa: float) -> float:
    # bisection to a tight bracket, then Newton kept inside it
    for _ in range(200):
        m = 0.5 * (a + b)
        if m == a or m == b or b - a < 1e-9:
            break
        fm = f3(m)
        if fm == 0.0:
            return m
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    x = 0.5 * (a + b)
    for _ in range(50):
        d = f4(x)
        if d == 0.0:
            break
        step = f3(x) / d
        xn = x - step
        if not a - 1e-9 <= xn <= b + 1e-9:
            break
        x = xn
        if abs(step) < 1e-12:
            break
    return x


def turning_points(p: Potential, interval: Optional[Sequence[float]] = None) -> list:
    """Roots of Phi''' in ``interval`` (default: the evaluation domain).

    The interval may extend past ``eval_domain``: only the analytic third
    derivative is sampled, so the scan itself needs no convexity.

    Returns
    -------
    list of TurningPoint, sorted ascending.
    """
    lo, hi = interval if interval is not None else p.eval_domain
    rs = np.linspace(float(lo), float(hi), TP_GRID + 1)
    f3v = p.raw(rs, 3)
    f3 = lambda x: float(p.raw(x, 3))
    f4 = lambda x: float(p.raw(x, 4))
    roots = []
    sg = np.sign(f3v)
    if not np.any(sg):
        # linear flux: linearly degenerate everywhere, no isolated roots
        return []
    for i in range(len(rs)):
        if sg[i] == 0.0:
            # isolated grid hit; both neighbours nonzero
            left = sg[i - 1] if i > 0 else 1.0
            right = sg[i + 1] if i + 1 < len(rs) else 1.0
            if left != 0.0 and right != 0.0:
                roots.append(float(rs[i]))
            continue
        if i + 1 < len(rs) and sg[i] * sg[i + 1] < 0:
            roots.append(_refine_root(f3, f4, float(rs[i]), float(rs[i + 1]), float(f3v[i])))
    out = []
    for x in roots:
        d4 = f4(x)
        sgn = 0 if abs(d4) <= DEGENERATE_FOURTH else int(np.sign(d4))
        out.append(TurningPoint(r_star=x, fourth_sign=sgn, fifth=float(p.raw(x, 5)), fourth=d4))
    return out


def third_sign_changes(p: Potential, lo: float, hi: float) -> list:
    """Turning points strictly inside (lo, hi), any order of endpoints."""
    a, b = min(lo, hi), max(lo, hi)
    if b - a < 1e-14:
        return []
    tps = turning_points(p, (a, b))
    return [t for t in tps if a + 1e-12 < t.r_star < b - 1e-12]


# catalogue -------------------------------------------------------------------
def builtin(name: str, eval_domain=None, strict: bool = True, **kw) -> Potential:
    """Built-in potential by kind name.

    ``harmonic`` accepts ``stiffness``, ``modified_toda`` accepts
    ``quartic`` and ``arctan_flux`` accepts ``scale`` as keywords.
    """
    if name not in DEFAULT_DOMAINS:
        raise UsageError(f"no built-in potential {name!r}; choose from {sorted(DEFAULT_DOMAINS)}")
    params = ()
    if name == "harmonic" and "stiffness" in kw:
        params = (kw["stiffness"],)
    if name == "modified_toda" and "quartic" in kw:
        params = (kw["quartic"],)
    if name == "arctan_flux" and "scale" in kw:
        params = (kw["scale"],)
    dom = tuple(eval_domain) if eval_domain is not None else DEFAULT_DOMAINS[name]
    return Potential(name=name, kind=name, params=params, eval_domain=dom, strict=strict)


def polynomial(coeffs: Sequence[float], center: float = 0.0, eval_domain=(-1.0, 1.0),
               name: str = "polynomial", strict: bool = True) -> Potential:
    """Phi(r) = sum_j coeffs[j] (r - center)^j."""
    return Potential(name=name, kind="polynomial", params=(center, *coeffs),
                     eval_domain=tuple(eval_domain), strict=strict)


def shifted(base: Potential, r0: float, name: Optional[str] = None) -> Potential:
    """Phi(r) = base(r - r0) on the translated domain."""
    lo, hi = base.eval_domain
    return Potential(name=name or f"{base.name}+{r0:g}", kind="shifted", params=(r0,),
                     eval_domain=(lo + r0, hi + r0), base=base, strict=base.strict)


def mirrored(base: Potential, r_c: float, name: Optional[str] = None) -> Potential:
    """Phi(r) = base(2 r_c - r); keeps Phi'' and the sign of even derivatives."""
    lo, hi = base.eval_domain
    return Potential(name=name or f"{base.name}~", kind="mirrored", params=(r_c,),
                     eval_domain=(2 * r_c - hi, 2 * r_c - lo), base=base, strict=base.strict)


def from_dict(d: dict) -> Potential:
    """Inverse of :meth:`Potential.to_dict` (also accepts bare built-in names)."""
    if isinstance(d, str):
        return builtin(d)
    d = dict(d)
    unknown = set(d) - POTENTIAL_KEYS
    if unknown:
        raise UsageError(f"unknown potential keys {sorted(unknown)}; allowed: {sorted(POTENTIAL_KEYS)}")
    kind = d.get("kind", d.get("name"))
    base = from_dict(d["base"]) if "base" in d else None
    dom = d.get("eval_domain")
    if dom is None:
        if kind in DEFAULT_DOMAINS:
            dom = DEFAULT_DOMAINS[kind]
        elif base is not None:
            r0 = float(d["params"][0])
            blo, bhi = base.eval_domain
            dom = (blo + r0, bhi + r0) if kind == "shifted" else (2 * r0 - bhi, 2 * r0 - blo)
        else:
            raise UsageError(f"potential {d} needs an eval_domain")
    return Potential(name=d.get("name", kind), kind=kind, params=tuple(d.get("params", ())),
                     eval_domain=tuple(dom), base=base, strict=bool(d.get("strict", True)))
