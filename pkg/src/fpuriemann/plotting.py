"""PNG figures written next to the CSV/JSON outputs."""
from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

SEGMENT_COLORS = {"rarefaction": "tab:green", "dispersive_shock": "tab:red",
                  "sharp_front": "tab:purple", "unknown": "tab:gray"}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=110, bbox_inches="tight", metadata={"Software": None})
    plt.close(fig)
    return path


def plot_snapshots(snapshots: Sequence, path, title: str = "") -> Path:
    """Atomic distances and velocities against alpha/N, one column per snapshot."""
    n = len(snapshots)
    fig, axes = plt.subplots(2, n, figsize=(3.6 * n, 5.0), squeeze=False, sharex=True)
    for k, (t, s) in enumerate(snapshots):
        x = s.alpha_bar()
        axes[0, k].plot(x, s.r, lw=0.4, color="k")
        axes[1, k].plot(x, s.v, lw=0.4, color="k")
        axes[0, k].set_title(f"t = {t:g}")
        axes[1, k].set_xlabel(r"$\alpha/N$")
    axes[0, 0].set_ylabel("r")
    axes[1, 0].set_ylabel("v")
    if title:
        fig.suptitle(title)
    return _save(fig, path)


def plot_profile(profile, path, segmentation=None, prediction=None, title: str = "") -> Path:
    """Window means with max/min bands over c, segments shaded, prediction dashed."""
    c = profile.c_grid
    fig, axes = plt.subplots(2, 1, figsize=(7.0, 5.5), sharex=True)
    for ax, mean, amp, lab in ((axes[0], profile.mean_r, profile.amp_r, "r"),
                               (axes[1], profile.mean_v, profile.amp_v, "v")):
        ax.fill_between(c, mean - 0.5 * amp, mean + 0.5 * amp, color="0.85", lw=0)
        ax.plot(c, mean, color="k", lw=1.0, label="window mean")
        ax.set_ylabel(lab)
        if segmentation is not None:
            for s in segmentation.segments:
                if s.kind in SEGMENT_COLORS and not s.minor:
                    ax.axvspan(*s.c_range, color=SEGMENT_COLORS[s.kind], alpha=0.15, lw=0)
    if prediction is not None:
        r, v = prediction.sample_many(c)
        axes[0].plot(c, r, "--", color="tab:blue", lw=1.0, label=f"p-system ({prediction.solver})")
        axes[1].plot(c, v, "--", color="tab:blue", lw=1.0)
        axes[0].legend(fontsize=8)
    axes[1].set_xlabel("c")
    if title:
        axes[0].set_title(title)
    return _save(fig, path)


def plot_support(profile, path, c_values: Optional[Sequence[float]] = None) -> Path:
    """Window contents in the (r, v) plane for a few c-values."""
    recs = profile.records
    if c_values is None:
        amp = profile.amp_r
        idx = np.argsort(amp)[-6:]
    else:
        idx = [int(np.argmin(np.abs(profile.c_grid - x))) for x in c_values]
    fig, ax = plt.subplots(figsize=(5.0, 4.5))
    for i in sorted(set(int(j) for j in idx)):
        sup = recs[i].support_samples
        if sup is not None:
            ax.plot(sup[:, 0], sup[:, 1], ".", ms=1.5, label=f"c = {profile.c_grid[i]:.3f}")
    ax.set_xlabel("r")
    ax.set_ylabel("v")
    ax.legend(fontsize=7, markerscale=5)
    return _save(fig, path)


def plot_dset(curves: Sequence, path, window: Optional[Sequence[float]] = None, turning: Sequence[float] = ()) -> Path:
    fig, ax = plt.subplots(figsize=(5.0, 5.0))
    for k, cv in enumerate(curves):
        ax.plot(cv.points[:, 0], cv.points[:, 1], lw=1.2, label=f"component {k + 1}")
    if window:
        ax.plot([window[0], window[1]], [window[0], window[1]], color="0.6", lw=0.8)
        ax.set_xlim(window[0], window[1])
        ax.set_ylim(window[2], window[3])
    for r in turning:
        ax.plot([r], [r], "ko", ms=4)
    ax.set_xlabel(r"$r_L$")
    ax.set_ylabel(r"$r_R$")
    ax.set_aspect("equal", adjustable="box")
    if curves:
        ax.legend(fontsize=8)
    return _save(fig, path)


def plot_dcurve(points: Sequence, path, lax_points: Optional[Sequence] = None) -> Path:
    """Measured intermediate states and front/back speeds of a dispersive-shock curve."""
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 4.0))
    rr = [p.r_R for p in points]
    axes[0].plot([p.u_M.r for p in points], [p.u_M.v for p in points], "o", label="measured u_M")
    if lax_points is not None:
        axes[0].plot([u.r for u in lax_points], [u.v for u in lax_points], "x", label="Lax u_R")
    axes[0].set_xlabel("r")
    axes[0].set_ylabel("v")
    axes[0].legend(fontsize=8)
    axes[1].plot(rr, [p.c_f for p in points], "o-", label="c_f")
    axes[1].plot(rr, [p.c_b for p in points], "s-", label="c_b")
    axes[1].plot(rr, [p.c_rh for p in points], "k--", label="c_rh")
    axes[1].set_xlabel(r"$r_R$")
    axes[1].legend(fontsize=8)
    return _save(fig, path)


def plot_potential(p, path, samples: int = 1001) -> Path:
    lo, hi = p.eval_domain
    x = np.linspace(lo, hi, samples)
    fig, axes = plt.subplots(1, 3, figsize=(10.0, 3.2))
    for k, ax in enumerate(axes):
        ax.plot(x, p.raw(x, k + 1), color="k", lw=1.0)
        ax.axhline(0.0, color="0.7", lw=0.6)
        ax.set_title(["Phi'", "Phi''", "Phi'''"][k])
        ax.set_xlabel("r")
    return _save(fig, path)
