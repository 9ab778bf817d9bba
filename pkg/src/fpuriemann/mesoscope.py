"""Macroscopic diagnostics for chain snapshots.

Window statistics stand in for the local Young measure; profiles are
re-indexed by the self-similar variable c = (alpha_bar - alpha_star) / t_bar
and split into plateaus, rarefactions, dispersive shocks and sharp fronts.

Per-window oscillation is detected from the backtracking variation
(total variation minus net change); a monotone transition that is steep
on the particle scale is a front, a gentle one a rarefaction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage, stats

from .errors import UndefinedRescaleError, UnmatchedWaveError
from .lattice import ChainState, SimConfig, run
from .nonclassical import CfTable
from .potential import Potential
from .psystem import PSolution, StatePoint, hugoniot_v, rh_speed

WINDOW_EXPONENT = 0.6
AMP_FRACTION = 0.05
NOISE_FACTOR = 10.0
BOUNDARY_FRACTION = 0.01
SUPPORT_MAX = 256
STEP_CONCENTRATION = 0.5
OSC_FRACTION = 0.5
FLAT_FRACTION = 2e-3
MINOR_FRACTION = 0.01
RANGE_FRACTION = 0.2
KIND_LETTER = {"rarefaction": "R", "dispersive_shock": "D", "sharp_front": "N", "unknown": "?"}


def default_window(N: int) -> int:
    return int(min(max(8, round(N ** WINDOW_EXPONENT)), max(8, N // 4)))


def default_stride(window: int) -> int:
    return max(1, window // 4)


def noise_floor(state: ChainState) -> float:
    """Spread of r over the outer 1% of particles, at the quieter end."""
    k = max(2, int(math.ceil(BOUNDARY_FRACTION * state.N)))
    return float(min(np.ptp(state.r[:k]), np.ptp(state.r[-k:])))


@dataclass
class LocalMeasure:
    center_alpha_bar: float
    window_particles: int
    mean_r: float
    mean_v: float
    mean_energy: float
    amp_r: float
    amp_v: float
    osc_r: float = 0.0
    step_r: float = 0.0
    net_r: float = 0.0
    mean_flux: float = 0.0
    mean_energy_flux: float = 0.0
    support_samples: np.ndarray = field(default=None, repr=False)


def local_means(state: ChainState, p: Potential, window_particles: Optional[int] = None,
                stride: Optional[int] = None, support: bool = True) -> list:
    """Sliding-window statistics at centers spaced by ``stride`` particles.

    Besides means and max-min amplitudes, each record carries the
    backtracking variation ``osc_r`` and the step concentration
    ``step_r`` (largest change over W/8 particles divided by the window's
    net change), plus the fluxes <Phi'(r)> and <v Phi'(r)>.
    """
    N = state.N
    W = default_window(N) if window_particles is None else int(window_particles)
    if W < 8 or W > max(8, N // 4):
        raise ValueError(f"window_particles must lie in [8, N/4], got {W}")
    s = default_stride(W) if stride is None else int(stride)
    r, v = state.r, state.v
    dphi = p.raw(r, 1)
    e = 0.5 * v * v + p.raw(r, 0)
    R = sliding_window_view(r, W)[::s]
    V = sliding_window_view(v, W)[::s]
    starts = np.arange(N - W + 1)[::s]
    centers = (starts + 0.5 * (W - 1) + 1.0) / N
    mean = lambda a: sliding_window_view(a, W)[::s].mean(axis=1)
    mr, mv, me = R.mean(axis=1), V.mean(axis=1), mean(e)
    mf, mef = mean(dphi), mean(v * dphi)
    amp_r, amp_v = np.ptp(R, axis=1), np.ptp(V, axis=1)
    net = np.abs(R[:, -1] - R[:, 0])
    tv = np.abs(np.diff(R, axis=1)).sum(axis=1)
    osc = 0.5 * (tv - net)
    m = max(2, W // 8)
    local = np.abs(R[:, m:] - R[:, :-m]).max(axis=1)
    step = np.where(net > 0, local / np.maximum(net, 1e-300), 0.0)
    dec = max(1, int(math.ceil(W / SUPPORT_MAX)))
    out = []
    for i in range(len(starts)):
        sup = np.column_stack((R[i, ::dec], V[i, ::dec])) if support else None
        out.append(LocalMeasure(float(centers[i]), W, float(mr[i]), float(mv[i]), float(me[i]),
                                float(amp_r[i]), float(amp_v[i]), float(osc[i]), float(step[i]),
                                float(net[i]), float(mf[i]), float(mef[i]), sup))
    return out


@dataclass
class ProfileInC:
    c_grid: np.ndarray
    records: list
    t_macro: float
    alpha_star: float
    N: int
    window: int
    stride: int
    noise: float = 0.0

    def _col(self, name):
        return np.array([getattr(m, name) for m in self.records])

    @property
    def alpha_bar(self):
        return self._col("center_alpha_bar")

    @property
    def mean_r(self):
        return self._col("mean_r")

    @property
    def mean_v(self):
        return self._col("mean_v")

    @property
    def mean_energy(self):
        return self._col("mean_energy")

    @property
    def amp_r(self):
        return self._col("amp_r")

    @property
    def amp_v(self):
        return self._col("amp_v")

    @property
    def window_c(self) -> float:
        """Window width in units of c."""
        return self.window / (self.N * self.t_macro)

    @property
    def stride_c(self) -> float:
        return self.stride / (self.N * self.t_macro)

    def state_at(self, i: int) -> StatePoint:
        return StatePoint(self.records[i].mean_r, self.records[i].mean_v)

    def to_rows(self) -> list:
        return [(float(c), m.mean_r, m.mean_v, m.mean_energy, m.amp_r, m.amp_v)
                for c, m in zip(self.c_grid, self.records)]


def rescale_to_c(snapshot, alpha_star: float, t_macro: Optional[float] = None, p: Optional[Potential] = None,
                 window_particles: Optional[int] = None, stride: Optional[int] = None,
                 N: Optional[int] = None) -> ProfileInC:
    """Index window statistics by c = (alpha_bar - alpha_star) / t_macro.

    ``snapshot`` is a ChainState (then ``p`` is required) or a list of
    LocalMeasure records from :func:`local_means` (then ``N`` is required).
    """
    if isinstance(snapshot, ChainState):
        if p is None:
            raise ValueError("a potential is needed to compute window energies")
        t = snapshot.t_macro() if t_macro is None else t_macro
        if not t > 0.0:
            raise UndefinedRescaleError("t_macro = 0: the self-similar variable is undefined")
        W = default_window(snapshot.N) if window_particles is None else window_particles
        s = default_stride(W) if stride is None else stride
        recs = local_means(snapshot, p, W, s)
        N, nf = snapshot.N, noise_floor(snapshot)
    else:
        recs = list(snapshot)
        if t_macro is None or not t_macro > 0.0:
            raise UndefinedRescaleError("t_macro must be positive")
        if N is None:
            raise ValueError("N is required when rescaling a list of window records")
        t, W = t_macro, recs[0].window_particles
        centers = np.array([m.center_alpha_bar for m in recs])
        s = stride if stride is not None else (
            max(1, int(round(float(np.median(np.diff(centers))) * N))) if len(recs) > 1 else 1)
        nf = 0.0
    c = (np.array([m.center_alpha_bar for m in recs]) - alpha_star) / t
    return ProfileInC(c, recs, float(t), float(alpha_star), int(N), int(W), int(s), nf)


def profile_l1(a: ProfileInC, b: ProfileInC, c_range: Optional[tuple] = None, field_name: str = "mean_r") -> float:
    """L1 distance over c of two profiles, b interpolated onto a's grid."""
    lo = max(a.c_grid[0], b.c_grid[0])
    hi = min(a.c_grid[-1], b.c_grid[-1])
    if c_range is not None:
        lo, hi = max(lo, c_range[0]), min(hi, c_range[1])
    if not hi > lo:
        raise ValueError("profiles share no c-range")
    grid = np.linspace(lo, hi, 2001)
    fa = np.interp(grid, a.c_grid, getattr(a, field_name))
    fb = np.interp(grid, b.c_grid, getattr(b, field_name))
    return float(np.trapezoid(np.abs(fa - fb), grid))


# --------------------------------------------------------------------------
# segmentation
# --------------------------------------------------------------------------
@dataclass
class Segment:
    kind: str
    c_range: tuple
    index_range: tuple
    left_state: StatePoint
    right_state: StatePoint
    c_b: Optional[float] = None
    c_f: Optional[float] = None
    front: Optional[str] = None
    minor: bool = False
    notes: list = field(default_factory=list)

    @property
    def letter(self) -> str:
        return KIND_LETTER.get(self.kind, "")

    @property
    def family(self) -> Optional[int]:
        if self.kind == "dispersive_shock":
            return 1 if self.front == "left" else 2
        if self.kind in ("sharp_front", "rarefaction"):
            mid = 0.5 * (self.c_range[0] + self.c_range[1])
            return 1 if mid < 0 else 2
        return None

    def to_dict(self) -> dict:
        return {"kind": self.kind, "c_range": list(self.c_range), "left_state": list(self.left_state.as_tuple()),
                "right_state": list(self.right_state.as_tuple()), "c_b": self.c_b, "c_f": self.c_f,
                "front": self.front, "minor": self.minor, "notes": self.notes}


@dataclass
class WaveSegmentation:
    segments: list
    threshold: float
    noise: float
    window_c: float
    labels: list = field(default_factory=list, repr=False)

    def kinds(self, include_minor: bool = False) -> list:
        return [s.kind for s in self.segments if include_minor or not s.minor]

    def waves(self, include_minor: bool = False) -> list:
        return [s for s in self.segments if s.kind != "plateau" and (include_minor or not s.minor)]

    def of_kind(self, kind: str) -> list:
        return [s for s in self.segments if s.kind == kind]

    def letters(self) -> list:
        return [s.letter for s in self.waves()]

    def adjacent(self, a: Segment, b: Segment) -> bool:
        """No plateau between the two segments."""
        i, j = sorted((self.segments.index(a), self.segments.index(b)))
        return all(s.kind != "plateau" or s.minor for s in self.segments[i + 1:j])

    def to_dict(self) -> dict:
        return {"threshold": self.threshold, "noise": self.noise, "window_c": self.window_c,
                "segments": [s.to_dict() for s in self.segments]}


def _labels(prof: ProfileInC, T: float) -> list:
    """Per-window labels: osc, jump, ramp or flat.

    Oscillation means backtracking variation above half the amplitude;
    sub-threshold windows are flat unless their net change is monotone and
    resolvable.
    """
    amp = prof.amp_r
    osc = prof._col("osc_r")
    step = prof._col("step_r")
    net = prof._col("net_r")
    tol = max(FLAT_FRACTION * max(np.ptp(prof.mean_r), 1e-12), 2.0 * prof.noise)
    lab = []
    for i in range(len(amp)):
        if amp[i] > T and osc[i] > OSC_FRACTION * amp[i]:
            lab.append("osc")
        elif amp[i] > T and step[i] > STEP_CONCENTRATION and net[i] > 2.0 * T:
            lab.append("jump")
        elif net[i] > tol and osc[i] <= OSC_FRACTION * amp[i]:
            lab.append("ramp")
        else:
            lab.append("flat")
    return lab


def _runs(lab: list) -> list:
    out, start = [], 0
    for i in range(1, len(lab) + 1):
        if i == len(lab) or lab[i] != lab[start]:
            out.append((lab[start], start, i - 1))
            start = i
    return out


def default_threshold(profile: ProfileInC) -> float:
    """max(5% of the largest window amplitude, 10 x end noise, 20% of the mean-r range).

    The last term keeps the dispersive tails of rarefaction heads, whose
    amplitude decays with N, out of the oscillatory class when the run
    contains no dispersive shock at all.
    """
    return max(AMP_FRACTION * float(profile.amp_r.max()), NOISE_FACTOR * profile.noise,
               RANGE_FRACTION * float(np.ptp(profile.mean_r)))


def _absorb_edge_oscillations(segs: list, min_width: float) -> list:
    """Oscillatory runs narrower than ``min_width`` cannot be resolved as dispersive shocks.

    Next to a rarefaction they are the dispersive corner of its edge and are
    folded into it (with a note); elsewhere they become ``unknown``.
    """
    out: list = []
    k = 0
    while k < len(segs):
        s = segs[k]
        width = s.c_range[1] - s.c_range[0]
        if s.kind == "dispersive_shock" and not s.minor and width < min_width:
            nb = [x for x in (out[-1] if out else None, segs[k + 1] if k + 1 < len(segs) else None)
                  if x is not None and x.kind == "rarefaction" and not x.minor]
            if nb:
                r = nb[0]
                r.c_range = (min(r.c_range[0], s.c_range[0]), max(r.c_range[1], s.c_range[1]))
                r.index_range = (min(r.index_range[0], s.index_range[0]), max(r.index_range[1], s.index_range[1]))
                r.notes.append(f"edge oscillation of width {width:.3g} in c folded in")
                if r is out[-1] if out else False:
                    r.right_state = s.right_state
                else:
                    r.left_state = s.left_state
                k += 1
                continue
            s.kind, s.c_b, s.c_f, s.front = "unknown", None, None, None
            s.notes.append(f"oscillatory run of width {width:.3g} in c, below two windows")
        out.append(s)
        k += 1
    return out


def segment_waves(profile: ProfileInC, osc_threshold: Optional[float] = None) -> WaveSegmentation:
    """Split a profile into plateau / rarefaction / dispersive_shock / sharp_front / unknown."""
    amp = profile.amp_r
    T = osc_threshold if osc_threshold is not None else default_threshold(profile)
    T = max(T, 1e-12)
    lab = _labels(profile, T)
    c = profile.c_grid
    mr, mv = profile.mean_r, profile.mean_v
    span = max(np.ptp(mr), 1e-12), max(np.ptp(mv), 1e-12)
    w_front = int(math.ceil(profile.window / profile.stride)) + 3
    half = 0.5 * profile.stride_c
    segs = []
    for kind, i, j in _runs(lab):
        c_lo = c[i] - half if i > 0 else c[i]
        c_hi = c[j] + half if j < len(c) - 1 else c[j]
        ls = StatePoint(float(mr[max(i - 1, 0)]), float(mv[max(i - 1, 0)]))
        rs = StatePoint(float(mr[min(j + 1, len(c) - 1)]), float(mv[min(j + 1, len(c) - 1)]))
        seg = Segment("unknown", (float(c_lo), float(c_hi)), (i, j), ls, rs)
        if kind == "flat":
            seg.kind = "plateau"
            st = StatePoint(float(mr[i:j + 1].mean()), float(mv[i:j + 1].mean()))
            seg.left_state = seg.right_state = st
        elif kind == "jump":
            seg.kind = "sharp_front" if j - i + 1 <= w_front else "unknown"
            if seg.kind == "unknown":
                seg.notes.append("steep monotone transition wider than a window")
        elif kind == "ramp":
            d = np.diff(mr[max(i - 1, 0):j + 2])
            mono = np.all(d >= -0.05 * T) or np.all(d <= 0.05 * T)
            seg.kind = "rarefaction" if mono else "unknown"
            if not mono:
                seg.notes.append("non-monotone means without oscillation")
        else:
            env = amp[i:j + 1]
            if len(env) >= 3:
                rho = stats.spearmanr(np.arange(len(env)), env)[0]
            else:
                rho = 1.0 if env[-1] >= env[0] else -1.0
            if not np.isfinite(rho) or abs(rho) < 0.5:
                seg.kind = "unknown"
                seg.notes.append(f"oscillatory region without a monotone envelope (rank corr {rho:.2f})")
            else:
                seg.kind = "dispersive_shock"
                seg.front = "right" if rho > 0 else "left"
                seg.c_f, seg.c_b = (c_hi, c_lo) if rho > 0 else (c_lo, c_hi)
        if seg.kind == "rarefaction":
            # judged on its own windows: neighbours may straddle another wave
            dr = max(abs(mr[j] - mr[i]), float(amp[i:j + 1].max())) / span[0]
            dv = max(abs(mv[j] - mv[i]), float(profile.amp_v[i:j + 1].max())) / span[1]
        else:
            dr = abs(seg.right_state.r - seg.left_state.r) / span[0]
            dv = abs(seg.right_state.v - seg.left_state.v) / span[1]
        if seg.kind != "plateau" and max(dr, dv) < MINOR_FRACTION:
            seg.minor = True
            if seg.kind == "dispersive_shock":
                seg.notes.append("oscillatory packet without a resolvable net jump")
        segs.append(seg)
    segs = _absorb_edge_oscillations(segs, 2.0 * profile.window_c)
    # a wave's end states are the neighbouring plateau values where they exist
    def plateau_toward(k, step):
        k += step
        while 0 <= k < len(segs) and segs[k].minor:
            k += step
        return segs[k] if 0 <= k < len(segs) and segs[k].kind == "plateau" else None

    for k, s in enumerate(segs):
        if s.kind == "plateau" or s.minor:
            continue
        left, right = plateau_toward(k, -1), plateau_toward(k, 1)
        if left is not None:
            s.left_state = left.right_state
        if right is not None:
            s.right_state = right.left_state
    return WaveSegmentation(segs, float(T), float(profile.noise), float(profile.window_c), lab)


def segment_snapshot(state: ChainState, p: Potential, alpha_star: float, t_macro: Optional[float] = None,
                     window_particles: Optional[int] = None, osc_threshold: Optional[float] = None):
    prof = rescale_to_c(state, alpha_star, t_macro, p, window_particles)
    return prof, segment_waves(prof, osc_threshold)


# --------------------------------------------------------------------------
# front and back tracking
# --------------------------------------------------------------------------
def envelope(r: np.ndarray, width: int) -> np.ndarray:
    """Windowed max - min of r, per particle."""
    return ndimage.maximum_filter1d(r, width, mode="nearest") - ndimage.minimum_filter1d(r, width, mode="nearest")


def _alpha_index(c: float, alpha_star: float, t: float, N: int) -> int:
    return int(np.clip(round((alpha_star + c * t) * N) - 1, 0, N - 1))


def locate_wave(state: ChainState, seg: Segment, alpha_star: float, t: float, threshold: float,
                window: int) -> dict:
    """Particle-level edges of a dispersive shock or midpoint of a sharp front (in alpha_bar)."""
    N = state.N
    pad = window
    a = max(0, _alpha_index(seg.c_range[0], alpha_star, t, N) - pad)
    b = min(N - 1, _alpha_index(seg.c_range[1], alpha_star, t, N) + pad)
    r = state.r
    if seg.kind == "sharp_front":
        mid = 0.5 * (seg.left_state.r + seg.right_state.r)
        x = r[a:b + 1] - mid
        idx = np.flatnonzero(np.sign(x[:-1]) * np.sign(x[1:]) <= 0)
        if idx.size == 0:
            raise UnmatchedWaveError("no midpoint crossing inside the sharp-front segment")
        k = idx[np.argmin(np.abs(idx - (b - a) / 2))]
        frac = x[k] / (x[k] - x[k + 1]) if x[k] != x[k + 1] else 0.0
        pos = (a + k + frac + 1.0) / N
        return {"front": pos, "back": pos}
    width = max(4, window // 4)
    env = envelope(r, width)[a:b + 1]
    mask = ndimage.binary_closing(env > threshold, structure=np.ones(window))
    if not mask.any():
        raise UnmatchedWaveError("dispersive shock vanished below threshold")
    lab, n = ndimage.label(mask)
    # the block reaching furthest toward the front
    idx = np.flatnonzero(mask)
    k_front = idx[-1] if seg.front == "right" else idx[0]
    block = np.flatnonzero(lab == lab[k_front])
    lo, hi = block[0], block[-1]
    front, back = (hi, lo) if seg.front == "right" else (lo, hi)
    return {"front": (a + front + 1.0) / N, "back": (a + back + 1.0) / N}


@dataclass
class WaveSpeeds:
    kind: str
    family: Optional[int]
    c_b: float
    c_f: float
    low_confidence: bool
    positions: list

    def to_dict(self) -> dict:
        return {"kind": self.kind, "family": self.family, "c_b": self.c_b, "c_f": self.c_f,
                "low_confidence": self.low_confidence, "positions": self.positions}


def front_back_velocities(snapshots: Sequence, alpha_star: float, p: Potential,
                          window_particles: Optional[int] = None, osc_threshold: Optional[float] = None,
                          include_fronts: bool = True) -> list:
    """Back and front speeds of each dispersive shock (and speed of each sharp front).

    ``snapshots`` is a sequence of (t_macro, ChainState).  With two or
    more snapshots speeds are position differences over time differences
    of the outermost threshold crossings; with one snapshot the c-values
    are used directly and marked low-confidence.
    """
    snaps = sorted([(float(t), s) for t, s in snapshots if t > 0], key=lambda x: x[0])
    if not snaps:
        raise UnmatchedWaveError("need at least one snapshot at positive time")
    kinds = ("dispersive_shock", "sharp_front") if include_fronts else ("dispersive_shock",)
    per = []
    for t, s in snaps:
        prof, seg = segment_snapshot(s, p, alpha_star, t, window_particles, osc_threshold)
        waves = [w for w in seg.segments if w.kind in kinds and not w.minor]
        locs = [locate_wave(s, w, alpha_star, t, seg.threshold, prof.window) for w in waves]
        per.append((t, waves, locs))
    n = len(per[-1][1])
    if any(len(w) != n for _, w, _ in per) or any(
            [x.kind for x in w] != [x.kind for x in per[-1][1]] for _, w, _ in per):
        raise UnmatchedWaveError("wave lists differ between snapshots: "
                                 + "; ".join(f"t={t:g}: {[x.kind for x in w]}" for t, w, _ in per))
    out = []
    for k in range(n):
        w = per[-1][1][k]
        pos = [(t, locs[k]["back"], locs[k]["front"]) for t, _, locs in per]
        if len(per) >= 2:
            (t1, b1, f1), (t2, b2, f2) = pos[0], pos[-1]
            cb, cf = (b2 - b1) / (t2 - t1), (f2 - f1) / (t2 - t1)
            low = False
        else:
            t1, b1, f1 = pos[0]
            cb, cf = (b1 - alpha_star) / t1, (f1 - alpha_star) / t1
            low = True
        out.append(WaveSpeeds(w.kind, w.family, float(cb), float(cf), low, pos))
    return out


# --------------------------------------------------------------------------
# conservation
# --------------------------------------------------------------------------
def jump_residuals(p: Potential, u_minus: StatePoint, u_plus: StatePoint, c: float) -> dict:
    """Relative residuals of the mass, momentum and energy jump conditions.

    With [[x]] = x_minus - x_plus the conditions read c[[q]] + [[f]] = 0 for
    (q, f) = (r, v), (v, Phi'), (v^2/2 + Phi, v Phi').
    """
    um, up = StatePoint.coerce(u_minus), StatePoint.coerce(u_plus)
    d1m, d1p = float(p.raw(um.r, 1)), float(p.raw(up.r, 1))
    em = 0.5 * um.v ** 2 + float(p.raw(um.r, 0))
    ep = 0.5 * up.v ** 2 + float(p.raw(up.r, 0))
    laws = {
        "mass": (um.r - up.r, um.v - up.v),
        "momentum": (um.v - up.v, d1m - d1p),
        "energy": (em - ep, um.v * d1m - up.v * d1p),
    }
    out = {}
    for k, (jq, jf) in laws.items():
        scale = max(abs(c * jq), abs(jf), 1e-300)
        out[k] = float(abs(c * jq + jf) / scale)
    return out


def conservation_check(prof1: ProfileInC, prof2: ProfileInC, index_range: Optional[tuple] = None) -> dict:
    """Space-time weak-form residuals of the three macroscopic balance laws.

    Over [a, b] (window centers) and [t1, t2]:
    int q(t2) - int q(t1) - (t2 - t1) (f(b) - f(a)), with (q, f) =
    (r, v), (v, Phi'), (e, v Phi').  Fluxes at the ends are averaged over
    the two times.  Each residual is divided by the sum of the magnitudes
    of the terms.
    """
    if len(prof1.records) != len(prof2.records):
        raise ValueError("profiles must share the window grid")
    i, j = index_range if index_range is not None else (0, len(prof1.records) - 1)
    dt = prof2.t_macro - prof1.t_macro
    h = prof1.stride / prof1.N
    out = {}
    pairs = {"mass": ("mean_r", "mean_v"), "momentum": ("mean_v", "mean_flux"),
             "energy": ("mean_energy", "mean_energy_flux")}
    for law, (q, f) in pairs.items():
        q1 = prof1._col(q)[i:j + 1]
        q2 = prof2._col(q)[i:j + 1]
        fa = 0.5 * (getattr(prof1.records[i], f) + getattr(prof2.records[i], f))
        fb = 0.5 * (getattr(prof1.records[j], f) + getattr(prof2.records[j], f))
        dq = h * float(np.sum(q2 - q1))
        flux = dt * (fb - fa)
        scale = h * float(np.sum(np.abs(q2 - q1))) + abs(flux)
        out[law] = float(abs(dq - flux) / max(scale, 1e-300))
    return out


# --------------------------------------------------------------------------
# comparison with p-system predictions
# --------------------------------------------------------------------------
def predicted_letters(sol: PSolution, tol: float = 1e-6, minor_fraction: float = MINOR_FRACTION) -> list:
    """Wave letters of a p-system solution with C relabelled D.

    Waves below ``tol`` in absolute strength, or whose r- and v-jumps are
    both below ``minor_fraction`` of the solution's ranges (the rule that
    marks measured segments minor), are dropped.
    """
    states = [sol.u_far_left] + [w.u_right for w in sol.waves]
    span_r = max(np.ptp([u.r for u in states]), 1e-12)
    span_v = max(np.ptp([u.v for u in states]), 1e-12)
    out = []
    for w in sol.waves:
        dr, dv = abs(w.u_right.r - w.u_left.r), abs(w.u_right.v - w.u_left.v)
        if dr + dv < tol or max(dr / span_r, dv / span_v) < minor_fraction:
            continue
        out.append("D" if w.letter == "C" else w.letter)
    return out


def compare(profile: ProfileInC, prediction: PSolution, segmentation: Optional[WaveSegmentation] = None) -> dict:
    """L1 distance and wave-structure agreement between a profile and a p-system prediction."""
    seg = segmentation if segmentation is not None else segment_waves(profile)
    c = profile.c_grid
    pr, pv = prediction.sample_many(c)
    dr = np.abs(profile.mean_r - pr)
    dv = np.abs(profile.mean_v - pv)
    inside = np.zeros(len(c), dtype=bool)
    for s in seg.of_kind("dispersive_shock"):
        inside |= (c >= s.c_range[0]) & (c <= s.c_range[1])
    l1 = lambda f, m: float(np.trapezoid(np.where(m, f, 0.0), c))
    measured = seg.letters()
    predicted = predicted_letters(prediction)
    return {
        "solver": prediction.solver,
        "l1_r": l1(dr, np.ones_like(inside)),
        "l1_v": l1(dv, np.ones_like(inside)),
        "l1_r_outside_ds": l1(dr, ~inside),
        "l1_v_outside_ds": l1(dv, ~inside),
        "measured": measured,
        "predicted": predicted,
        "structure_match": measured == predicted,
        "sharp_fronts": len([s for s in seg.of_kind("sharp_front") if not s.minor]),
    }


# --------------------------------------------------------------------------
# empirical dispersive shock curves
# --------------------------------------------------------------------------
@dataclass
class DPoint:
    r_R: float
    v_R: float
    u_M: StatePoint
    c_b: float
    c_f: float
    c_rh: float
    hot_intermediate: bool
    kinds: list

    def lax_distance(self, u_lax: StatePoint) -> float:
        return math.hypot(self.u_M.r - u_lax.r, self.u_M.v - u_lax.v)

    def to_dict(self) -> dict:
        return {"r_R": self.r_R, "v_R": self.v_R, "u_M": list(self.u_M.as_tuple()), "c_b": self.c_b,
                "c_f": self.c_f, "c_rh": self.c_rh, "hot_intermediate": self.hot_intermediate,
                "kinds": self.kinds}


def _intermediate(seg: WaveSegmentation, ds: Segment, family: int):
    k = seg.segments.index(ds)
    nb = seg.segments[k + 1] if family == 1 else seg.segments[k - 1] if k > 0 else None
    if family == 1 and k + 1 >= len(seg.segments):
        nb = None
    if nb is not None and nb.kind == "plateau":
        return nb.left_state, False
    st = ds.right_state if family == 1 else ds.left_state
    return st, True


def measure_dispersive_shock_curve(p: Potential, u_L, family: int, r_R_list: Sequence[float], N: int,
                                   alpha_star: float, t_macro: float, dt: Optional[float] = None,
                                   window_particles: Optional[int] = None, runner=None) -> tuple:
    """Run the Lax-shock-data protocol for each r_R; return (points, CfTable).

    Each run uses u_R on the Lax shock curve of u_L, snapshots at t/2 and t.
    ``runner`` maps a SimConfig to a RunResult (default: lattice.run).
    """
    u_L = StatePoint.coerce(u_L)
    runner = run if runner is None else runner
    points = []
    for r_R in r_R_list:
        v_R = hugoniot_v(p, u_L, float(r_R), family)
        cfg = SimConfig(N=N, potential=p, u_L=u_L, u_R=(float(r_R), v_R), alpha_star=alpha_star,
                        t_macro_end=t_macro, dt=dt, snapshot_times=(0.5 * t_macro, t_macro),
                        name=f"dcurve_{r_R:g}")
        res = runner(cfg)
        speeds = front_back_velocities(res.snapshots, alpha_star, p, window_particles, include_fronts=False)
        prof, seg = segment_snapshot(res.snapshots[-1][1], p, alpha_star, t_macro, window_particles)
        dss = [s for s in seg.of_kind("dispersive_shock") if s.family == family]
        if not dss:
            raise UnmatchedWaveError(f"no family-{family} dispersive shock for r_R = {r_R:g}: {seg.kinds()}")
        ds = max(dss, key=lambda s: abs(s.c_range[1] - s.c_range[0]))
        sp = [w for w in speeds if w.family == family]
        main = max(sp, key=lambda w: abs(w.c_f - w.c_b)) if sp else None
        u_M, hot = _intermediate(seg, ds, family)
        points.append(DPoint(float(r_R), float(v_R), u_M,
                             main.c_b if main else float(ds.c_b), main.c_f if main else float(ds.c_f),
                             rh_speed(p, u_L.r, float(r_R), family), hot, seg.kinds()))
    table = CfTable(u_L, family, tuple(pt.r_R for pt in points), tuple(pt.c_f for pt in points),
                    tuple(pt.c_b for pt in points))
    return points, table
