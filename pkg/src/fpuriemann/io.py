"""Configuration files, recipes and run manifests.

Configs are YAML mappings; array data are CSV; structured reports are
JSON.  Every file referenced by a manifest carries its SHA-256 so that a
rerun with the same config and version can be compared byte for byte.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import __version__
from .errors import ConfigError
from .lattice import ChainState, RunResult, SimConfig
from .potential import Potential, from_dict as potential_from_dict

OUT_ENV = "FPURIEMANN_OUT"
SIM_KEYS = frozenset({"name", "N", "potential", "u_L", "u_R", "alpha_star", "t_macro_end", "dt", "snapshot_times"})
DCURVE_KEYS = frozenset({"name", "N", "potential", "u_L", "family", "r_R", "alpha_star", "t_macro_end", "dt"})
RECIPE_KEYS = frozenset({"recipe", "description", "runs", "dcurves", "analysis"})
FLOAT_FMT = "%.17g"


def output_root(default: str = "fpuriemann_out") -> Path:
    return Path(os.environ.get(OUT_ENV, default))


# --------------------------------------------------------------------------
# plain serialisation helpers
# --------------------------------------------------------------------------
def to_plain(obj):
    """Recursively convert numpy scalars/arrays and dataclasses to JSON-able values."""
    if hasattr(obj, "to_dict"):
        return to_plain(obj.to_dict())
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return to_plain(dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_plain(obj), indent=2, sort_keys=True) + "\n")
    return path


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return path


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# --------------------------------------------------------------------------
# configs
# --------------------------------------------------------------------------
def _check_keys(d: dict, allowed: frozenset, what: str):
    if not isinstance(d, dict):
        raise ConfigError(f"{what} must be a mapping, got {type(d).__name__}")
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown {what} keys {sorted(unknown)}; allowed: {sorted(allowed)}")


def potential_spec(p: Potential):
    """Short form for built-ins with default parameters, full mapping otherwise."""
    d = p.to_dict()
    try:
        from .potential import builtin
        if builtin(p.kind) == p:
            return p.kind
    except ConfigError:
        pass
    return d


def sim_config_from_dict(d: dict) -> SimConfig:
    _check_keys(d, SIM_KEYS, "simulation config")
    d = dict(d)
    if "potential" not in d or "N" not in d or "u_L" not in d or "u_R" not in d:
        raise ConfigError("simulation config needs N, potential, u_L and u_R")
    d["potential"] = potential_from_dict(d["potential"])
    d["u_L"] = tuple(float(x) for x in d["u_L"])
    d["u_R"] = tuple(float(x) for x in d["u_R"])
    if "snapshot_times" in d:
        d["snapshot_times"] = tuple(float(t) for t in d["snapshot_times"])
    try:
        return SimConfig(**d)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def sim_config_to_dict(cfg: SimConfig, with_dt: bool = True) -> dict:
    d = {"name": cfg.name, "N": cfg.N, "potential": potential_spec(cfg.potential),
         "u_L": list(cfg.u_L.as_tuple()), "u_R": list(cfg.u_R.as_tuple()),
         "alpha_star": cfg.alpha_star, "t_macro_end": cfg.t_macro_end,
         "snapshot_times": list(cfg.snapshot_times)}
    if with_dt:
        d["dt"] = cfg.dt
    return to_plain(d)


def load_yaml(path) -> dict:
    try:
        with open(path) as fh:
            d = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return d


def dump_yaml(path, d: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(to_plain(d), sort_keys=False))
    return path


def load_sim_config(path) -> SimConfig:
    return sim_config_from_dict(load_yaml(path))


@dataclass
class DCurveConfig:
    """Lax-shock-data protocol: one run per r_R with u_R on the Lax shock curve."""

    name: str
    N: int
    potential: Potential
    u_L: tuple
    family: int
    r_R: tuple
    alpha_star: float
    t_macro_end: float
    dt: Optional[float] = None

    @classmethod
    def from_dict(cls, d: dict) -> "DCurveConfig":
        _check_keys(d, DCURVE_KEYS, "dispersive-curve config")
        d = dict(d)
        try:
            d["potential"] = potential_from_dict(d["potential"])
            d["u_L"] = tuple(float(x) for x in d["u_L"])
            d["r_R"] = tuple(float(x) for x in d["r_R"])
            d["family"] = int(d["family"])
            out = cls(**d)
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"dispersive-curve config: {exc}") from exc
        if out.family not in (1, 2):
            raise ConfigError("family must be 1 or 2")
        return out

    def to_dict(self) -> dict:
        return to_plain({"name": self.name, "N": self.N, "potential": potential_spec(self.potential),
                         "u_L": list(self.u_L), "family": self.family, "r_R": list(self.r_R),
                         "alpha_star": self.alpha_star, "t_macro_end": self.t_macro_end, "dt": self.dt})


@dataclass
class Recipe:
    recipe: str
    description: str = ""
    runs: list = field(default_factory=list)
    dcurves: list = field(default_factory=list)
    analysis: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "Recipe":
        _check_keys(d, RECIPE_KEYS, "recipe")
        if "recipe" not in d:
            raise ConfigError("recipe needs a 'recipe' id")
        return cls(str(d["recipe"]), str(d.get("description", "")),
                   [sim_config_from_dict(r) for r in d.get("runs", []) or []],
                   [DCurveConfig.from_dict(r) for r in d.get("dcurves", []) or []],
                   dict(d.get("analysis", {}) or {}))

    def to_dict(self) -> dict:
        d = {"recipe": self.recipe, "description": self.description,
             "runs": [sim_config_to_dict(c, with_dt=False) for c in self.runs]}
        if self.dcurves:
            d["dcurves"] = [c.to_dict() for c in self.dcurves]
        if self.analysis:
            d["analysis"] = self.analysis
        return d

    def run(self, name: Optional[str] = None) -> SimConfig:
        if name is None:
            if len(self.runs) != 1:
                raise ConfigError(f"recipe {self.recipe} has runs {[r.name for r in self.runs]}; pick one")
            return self.runs[0]
        for r in self.runs:
            if r.name == name:
                return r
        raise ConfigError(f"recipe {self.recipe} has no run {name!r}")


def recipe_ids() -> list:
    root = resources.files("fpuriemann") / "recipes"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def load_recipe(figure_id: str) -> Recipe:
    """Shipped recipe by id (e.g. 'fig4'), or a recipe file path."""
    if os.path.exists(figure_id):
        return Recipe.from_dict(load_yaml(figure_id))
    path = resources.files("fpuriemann") / "recipes" / f"{figure_id}.yaml"
    if not path.is_file():
        raise ConfigError(f"no recipe {figure_id!r}; available: {recipe_ids()}")
    with resources.as_file(path) as p:
        return Recipe.from_dict(load_yaml(p))


# --------------------------------------------------------------------------
# snapshots and manifests
# --------------------------------------------------------------------------
def write_snapshot(path, state: ChainState) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arr = np.column_stack((state.alpha_bar(), state.r, state.v))
    header = f"t_micro={state.t_micro!r}\nalpha_bar,r,v"
    np.savetxt(path, arr, delimiter=",", fmt=FLOAT_FMT, header=header, comments="# ")
    return path


def read_snapshot(path) -> ChainState:
    with open(path) as fh:
        first = fh.readline()
    if not first.startswith("# t_micro="):
        raise ConfigError(f"{path}: not a snapshot file")
    t = float(first.split("=", 1)[1])
    arr = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    return ChainState(t, arr[:, 1].copy(), arr[:, 2].copy())


@dataclass
class RunManifest:
    config: dict
    version: str
    snapshots: list
    balances: dict
    warnings: list
    timing: dict
    root: Optional[Path] = None

    def to_dict(self) -> dict:
        return {"config": self.config, "version": self.version, "snapshots": self.snapshots,
                "balances": self.balances, "warnings": self.warnings, "timing": self.timing}

    def write(self, path) -> Path:
        return write_json(path, self.to_dict())

    @classmethod
    def read(cls, path) -> "RunManifest":
        path = Path(path)
        if path.is_dir():
            path = path / "manifest.json"
        try:
            d = read_json(path)
            return cls(d["config"], d["version"], d["snapshots"], d["balances"], d["warnings"],
                       d["timing"], path.parent)
        except (OSError, KeyError, json.JSONDecodeError) as exc:
            raise ConfigError(f"{path}: not a run manifest ({exc})") from exc

    def sim_config(self) -> SimConfig:
        return sim_config_from_dict(self.config)

    def verify(self) -> list:
        """Paths whose file is missing or whose checksum differs."""
        bad = []
        for s in self.snapshots:
            p = (self.root or Path(".")) / s["path"]
            if not p.is_file() or sha256(p) != s["sha256"]:
                bad.append(str(p))
        return bad

    def load_snapshots(self) -> list:
        bad = self.verify()
        if bad:
            raise ConfigError(f"manifest files missing or modified: {bad}")
        return [(float(s["t_macro"]), read_snapshot((self.root or Path(".")) / s["path"])) for s in self.snapshots]


def save_run(result: RunResult, out_dir) -> RunManifest:
    """Write snapshots as CSV plus manifest.json into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    snaps = []
    for k, (t, s) in enumerate(result.snapshots):
        name = f"snapshot_{k:02d}_t{t:.6g}.csv"
        write_snapshot(out / name, s)
        snaps.append({"t_macro": t, "path": name, "sha256": sha256(out / name)})
    bal = result.balances.to_dict()
    man = RunManifest(sim_config_to_dict(result.config), __version__, snaps, to_plain(bal),
                      list(result.warnings), {"wall_time_s": float(result.wall_time), "steps": int(result.steps)},
                      out)
    man.write(out / "manifest.json")
    return man
