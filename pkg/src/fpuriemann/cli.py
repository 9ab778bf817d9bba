"""Command line: ``fpuriemann <subcommand> ...``.

Exit codes: 0 success, 2 configuration/usage, 3 numeric failure, 4 domain
violation.  Outputs go below ``$FPURIEMANN_OUT`` (default
``./fpuriemann_out``) unless ``--out`` is given.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import io as fio
from . import mesoscope as meso
from . import plotting
from .conservative import ConsShockPoint, solve_conjugate, trace_dset
from .errors import ConfigError, RiemannLabError
from .lattice import run as run_lattice
from .nonclassical import (CfTable, fpu_predicted_structure, nearest_turning_point, nucleation_diagnostic,
                           solve_riemann_conservative, solve_riemann_dissipative)
from .potential import evaluate, from_dict as potential_from_dict, turning_points
from .psystem import StatePoint, hugoniot_v, solve_riemann_classical, weak_form_residuals

log = logging.getLogger("fpuriemann")

DERIV_NAMES = ("phi", "dphi", "d2phi", "d3phi", "d4phi", "d5phi")
SOLVERS = {"classical": solve_riemann_classical, "conservative": solve_riemann_conservative,
           "dissipative": solve_riemann_dissipative}


def _potential(spec: str):
    """Built-in name, or a YAML file holding a potential mapping."""
    if spec.endswith((".yaml", ".yml")):
        return potential_from_dict(fio.load_yaml(spec))
    return potential_from_dict(spec)


def _out(args, name: str) -> Path:
    base = Path(args.out) if args.out else fio.output_root() / name
    base.mkdir(parents=True, exist_ok=True)
    return base


def _state(pair) -> StatePoint:
    return StatePoint(float(pair[0]), float(pair[1]))


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------
def cmd_potential(args) -> int:
    names = [x for x in args.potential if x != "info"] if len(args.potential) > 1 else args.potential
    if len(names) != 1:
        raise ConfigError("potential expects one name: potential [info] NAME")
    p = _potential(names[0])
    tps = turning_points(p)
    out = {"potential": p.to_dict(),
           "turning_points": [{"r_star": t.r_star, "fourth": t.fourth, "fifth": t.fifth} for t in tps]}
    w = csv.writer(sys.stdout, lineterminator="\n")
    if args.at:
        xs = np.array(args.at, dtype=float)
        cols = [evaluate(p, xs, k) for k in range(0, args.order + 1)]
        out["values"] = {f"d{k}": c.tolist() for k, c in enumerate(cols)}
        out["at"] = xs.tolist()
        w.writerow(["r"] + [DERIV_NAMES[k] for k in range(args.order + 1)])
        for i, x in enumerate(xs):
            w.writerow([repr(float(x))] + [repr(float(c[i])) for c in cols])
        sys.stdout.write("\n")
    w.writerow(["r_star", "d4phi", "d5phi"])
    for t in tps:
        w.writerow([repr(t.r_star), repr(t.fourth), repr(t.fifth)])
    d = _out(args, f"potential_{p.name}")
    fio.write_json(d / "potential.json", out)
    plotting.plot_potential(p, d / "potential.png")
    return 0


def _simulate_one(cfg_dict: dict, out_dir: str, plot: bool = True) -> dict:
    cfg = fio.sim_config_from_dict(cfg_dict)
    res = run_lattice(cfg)
    man = fio.save_run(res, out_dir)
    if plot:
        plotting.plot_snapshots(res.snapshots, Path(out_dir) / "snapshots.png", cfg.name)
    return {"name": cfg.name, "manifest": str(Path(out_dir) / "manifest.json"),
            "balances": man.balances, "warnings": man.warnings, "wall_time_s": man.timing["wall_time_s"]}


def _load_run_config(path: str, name=None):
    d = fio.load_yaml(path) if Path(path).exists() else None
    if d is None:
        return fio.load_recipe(path).run(name)
    if "recipe" in d:
        return fio.Recipe.from_dict(d).run(name)
    return fio.sim_config_from_dict(d)


def cmd_simulate(args) -> int:
    cfg = _load_run_config(args.config, args.run)
    if args.N is not None:
        d = fio.sim_config_to_dict(cfg, with_dt=False)
        d["N"] = args.N
        cfg = fio.sim_config_from_dict(d)
    d = _out(args, cfg.name)
    summary = _simulate_one(fio.sim_config_to_dict(cfg), str(d), plot=not args.no_plot)
    print(summary["manifest"])
    return 0


def cmd_psolve(args) -> int:
    p = _potential(args.potential)
    u_L, u_R = _state(args.uL), _state(args.uR)
    d = _out(args, f"psolve_{args.solver}")
    report: dict = {}
    if args.solver == "fpu-predict":
        table = CfTable.from_csv(args.cf_table) if args.cf_table else None
        ps = fpu_predicted_structure(p, u_L, u_R, args.mode, table)
        sol = ps.solution
        report["prediction"] = ps.to_dict()
    else:
        sol = SOLVERS[args.solver](p, u_L, u_R)
    report["solution"] = sol.to_dict()
    report["weak_form_residuals"] = weak_form_residuals(sol)
    fio.write_json(d / "solution.json", report)
    speeds = [x for w in sol.waves for x in w.speed_range]
    lo = min(speeds + [-1.0]) - 0.5
    hi = max(speeds + [1.0]) + 0.5
    cs = np.linspace(lo, hi, 801)
    r, v = sol.sample_many(cs)
    fio.write_csv(d / "solution.csv", ["c", "r", "v"], zip(cs, r, v))
    _plot_solution(cs, r, v, d / "solution.png", sol.solver)
    print(d / "solution.json")
    return 0


def _plot_solution(cs, r, v, path, label):
    import matplotlib.pyplot as plt
    fig, axes = plt.subplots(2, 1, figsize=(6.0, 4.5), sharex=True)
    axes[0].plot(cs, r, color="k")
    axes[1].plot(cs, v, color="k")
    axes[0].set_ylabel("r")
    axes[1].set_ylabel("v")
    axes[1].set_xlabel("c")
    axes[0].set_title(label)
    plotting._save(fig, path)


def cmd_consdata(args) -> int:
    if args.dcurve:
        return _consdata_dcurve(args)
    if not args.potential:
        raise ConfigError("consdata needs --potential (or --dcurve)")
    p = _potential(args.potential)
    d = _out(args, f"consdata_{p.name}")
    out: dict = {}
    if args.rL is not None:
        rs = nearest_turning_point(p, args.rL)
        lo, hi = p.eval_domain
        bracket = (lo, rs) if args.rL > rs else (rs, hi)
        r0 = solve_conjugate(p, args.rL, bracket)
        pt = ConsShockPoint.at(p, args.rL, r0)
        out["pair"] = fio.to_plain(pt.__dict__) | {
            "r_star": rs,
            "v_R_family1": hugoniot_v(p, (args.rL, 0.0), r0, 1),
            "v_R_family2": hugoniot_v(p, (args.rL, 0.0), r0, 2)}
    if args.dset:
        curves = trace_dset(p, args.dset, seed_step=args.seed_step)
        out["dset"] = [c.to_dict() for c in curves]
        for k, c in enumerate(curves):
            fio.write_csv(d / f"dset_{k:02d}.csv", ["r_L", "r_R"], c.points)
        tps = [t.r_star for t in turning_points(p)]
        plotting.plot_dset(curves, d / "dset.png", args.dset, tps)
    fio.write_json(d / "consdata.json", out)
    print(d / "consdata.json")
    return 0


def _consdata_dcurve(args) -> int:
    src = args.dcurve
    if Path(src).exists():
        d = fio.load_yaml(src)
        dcs = fio.Recipe.from_dict(d).dcurves if "recipe" in d else [fio.DCurveConfig.from_dict(d)]
    else:
        dcs = fio.load_recipe(src).dcurves
    if not dcs:
        raise ConfigError(f"{src} holds no dispersive-curve block")
    for dc in dcs:
        out = _out(args, dc.name) if not args.out else Path(args.out) / dc.name
        out.mkdir(parents=True, exist_ok=True)
        N = args.N or dc.N
        pts, table = meso.measure_dispersive_shock_curve(dc.potential, dc.u_L, dc.family, dc.r_R, N,
                                                         dc.alpha_star, dc.t_macro_end, dc.dt, args.window)
        table.to_csv(out / "cf_table.csv")
        rep = {"config": dc.to_dict(), "N": N, "points": [pt.to_dict() for pt in pts]}
        try:
            rep["nucleation"] = nucleation_diagnostic(dc.potential, dc.u_L, dc.family, table)
        except RiemannLabError as exc:
            rep["nucleation"] = {"error": str(exc)}
        fio.write_json(out / "dcurve.json", rep)
        lax = [StatePoint(pt.r_R, pt.v_R) for pt in pts]
        plotting.plot_dcurve(pts, out / "dcurve.png", lax)
        print(out / "dcurve.json")
    return 0


def _measure(man: fio.RunManifest, args):
    cfg = man.sim_config()
    snaps = [(t, s) for t, s in man.load_snapshots() if t > 0]
    if not snaps:
        raise ConfigError("manifest has no snapshot at positive time")
    t, s = snaps[args.snapshot] if args.snapshot is not None else snaps[-1]
    prof = meso.rescale_to_c(s, cfg.alpha_star, t, cfg.potential, args.window)
    seg = meso.segment_waves(prof, args.threshold)
    return cfg, snaps, prof, seg


def cmd_measure(args) -> int:
    man = fio.RunManifest.read(args.run)
    cfg, snaps, prof, seg = _measure(man, args)
    d = Path(args.out) if args.out else man.root / "measure"
    d.mkdir(parents=True, exist_ok=True)
    fio.write_csv(d / "profile.csv", ["c", "mean_r", "mean_v", "mean_energy", "amp_r", "amp_v"], prof.to_rows())
    rep = seg.to_dict()
    if len(snaps) >= 2:
        try:
            rep["speeds"] = [w.to_dict() for w in meso.front_back_velocities(snaps, cfg.alpha_star, cfg.potential,
                                                                           args.window, args.threshold)]
        except RiemannLabError as exc:
            rep["speeds_error"] = str(exc)
    fio.write_json(d / "segmentation.json", rep)
    rows = [(c, a, b) for c, m in zip(prof.c_grid, prof.records) if m.support_samples is not None
            for a, b in m.support_samples]
    fio.write_csv(d / "support.csv", ["c", "r", "v"], rows)
    plotting.plot_profile(prof, d / "profile.png", seg, title=cfg.name)
    plotting.plot_support(prof, d / "support.png")
    print(d / "segmentation.json")
    return 0


def cmd_compare(args) -> int:
    man = fio.RunManifest.read(args.run)
    cfg, snaps, prof, seg = _measure(man, args)
    sol = SOLVERS[args.solver](cfg.potential, cfg.u_L, cfg.u_R)
    rep = meso.compare(prof, sol, seg)
    rep["segmentation"] = seg.to_dict()
    d = Path(args.out) if args.out else man.root / f"compare_{args.solver}"
    d.mkdir(parents=True, exist_ok=True)
    fio.write_json(d / "compare.json", rep)
    plotting.plot_profile(prof, d / "compare.png", seg, sol, title=f"{cfg.name} vs {args.solver}")
    print(d / "compare.json")
    return 0


def cmd_sweep(args) -> int:
    recipe = fio.load_recipe(args.recipe)
    if not recipe.runs:
        raise ConfigError(f"recipe {recipe.recipe} has no lattice runs")
    base = Path(args.out) if args.out else fio.output_root() / recipe.recipe
    jobs = [(fio.sim_config_to_dict(c), str(base / c.name), not args.no_plot) for c in recipe.runs]
    threads = max(1, int(args.threads))
    if threads == 1:
        results = [_simulate_one(*j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(_simulate_one, *zip(*jobs)))
    fio.write_json(base / "sweep.json", {"recipe": recipe.recipe, "version": __version__, "runs": results})
    print(base / "sweep.json")
    return 0


def cmd_recipe(args) -> int:
    if args.list or not args.figure:
        print("\n".join(fio.recipe_ids()))
        return 0
    rec = fio.load_recipe(args.figure)
    if args.out:
        fio.dump_yaml(args.out, rec.to_dict())
        print(args.out)
    else:
        import yaml
        sys.stdout.write(yaml.safe_dump(fio.to_plain(rec.to_dict()), sort_keys=False))
    return 0


# --------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fpuriemann", description="Riemann problems in FPU chains and the p-system")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("--log-level", default="WARNING")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory (default below $FPURIEMANN_OUT)")
    common.add_argument("--threads", type=int, default=1, help="worker processes for sweeps")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("potential", parents=[common], help="evaluate a potential and its turning points")
    s.add_argument("potential", nargs="+", metavar="[info] NAME")
    s.add_argument("--at", type=float, nargs="+")
    s.add_argument("--order", type=int, default=4, choices=range(6))
    s.set_defaults(fn=cmd_potential)

    s = sub.add_parser("simulate", parents=[common], help="run the chain for a config or recipe")
    s.add_argument("config", help="config YAML, recipe YAML or shipped recipe id")
    s.add_argument("--run", help="run name inside a recipe")
    s.add_argument("--N", type=int, help="override the particle number")
    s.add_argument("--no-plot", action="store_true")
    s.set_defaults(fn=cmd_simulate)

    s = sub.add_parser("psolve", parents=[common], help="solve the p-system Riemann problem")
    s.add_argument("--potential", required=True)
    s.add_argument("--uL", type=float, nargs=2, required=True)
    s.add_argument("--uR", type=float, nargs=2, required=True)
    s.add_argument("--solver", choices=[*SOLVERS, "fpu-predict"], default="classical")
    s.add_argument("--mode", choices=["supersonic_conjecture", "subsonic_conjecture"],
                   default="supersonic_conjecture")
    s.add_argument("--cf-table", help="CSV of measured front speeds")
    s.set_defaults(fn=cmd_psolve)

    s = sub.add_parser("consdata", parents=[common], help="conservative shock data, D set, dispersive curves")
    s.add_argument("--potential")
    s.add_argument("--rL", type=float, help="partner and speeds of the conservative shock from r_L")
    s.add_argument("--dset", type=float, nargs=4, metavar=("RLMIN", "RLMAX", "RRMIN", "RRMAX"),
                   help="trace the off-diagonal set D inside this window")
    s.add_argument("--window", type=int, help="measurement window in particles for --dcurve")
    s.add_argument("--seed-step", type=float, default=1e-2)
    s.add_argument("--dcurve", help="recipe id or YAML with a dispersive-curve block")
    s.add_argument("--N", type=int)
    s.set_defaults(fn=cmd_consdata)

    for name, fn, hlp in (("measure", cmd_measure, "macroscopic diagnostics of a run"),
                          ("compare", cmd_compare, "compare a run with a p-system solution")):
        s = sub.add_parser(name, parents=[common], help=hlp)
        s.add_argument("--run", required=True, help="run manifest or its directory")
        s.add_argument("--window", type=int, help="window in particles (default N^0.6)")
        s.add_argument("--threshold", type=float, help="oscillation threshold on amp_r")
        s.add_argument("--snapshot", type=int, help="index among positive-time snapshots (default last)")
        if name == "compare":
            s.add_argument("--solver", choices=list(SOLVERS), default="classical")
        s.set_defaults(fn=fn)

    s = sub.add_parser("sweep", parents=[common], help="run every lattice run of a recipe")
    s.add_argument("recipe")
    s.add_argument("--no-plot", action="store_true")
    s.set_defaults(fn=cmd_sweep)

    s = sub.add_parser("recipe", parents=[common], help="print or write a shipped recipe")
    s.add_argument("figure", nargs="?")
    s.add_argument("--list", action="store_true")
    s.set_defaults(fn=cmd_recipe)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else ConfigError.exit_code
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return int(args.fn(args) or 0)
    except RiemannLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
