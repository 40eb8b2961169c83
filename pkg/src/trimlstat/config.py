"""Experiment configuration files.

A config is a YAML (or JSON) mapping.  Every key is listed in ``SCHEMA`` with
its default; ``REQUIRED`` marks keys without one.  Unknown keys are rejected so
that typos never silently fall back to defaults.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass

import yaml

from . import distributions, weights
from .conditions import DEFAULT_N_GRID, DEFAULT_T_GRID
from .errors import ConfigError, TrimError, TrimLStatError
from .lstat import TrimSpec
from .montecarlo import ExperimentConfig, XGrid, config_hash


class _Required:
    def __repr__(self):
        return "REQUIRED"


REQUIRED = _Required()

SCHEMA = {
    "distribution": {"family": REQUIRED, "params": None, "loc": 0.0, "scale": 1.0,
                     "moment_order": None},
    "weight": {"kind": "constant", "coefficients": None, "knots": [], "domain": [0.0, 1.0],
               "lipschitz": None, "perturb_epsilon": None, "perturb_budget": 0.0,
               "perturb_random": False},
    "trim": {"n": REQUIRED, "alpha": REQUIRED, "beta": REQUIRED, "k": None, "m": None,
             "n_grid": [500, 2000, 8000], "shift_scale": 0.0, "shift_power": 0.5},
    "replications": REQUIRED,
    "seed": REQUIRED,
    "normalization": "sigma",
    "grid": {"lower": 2.0, "reach": 1.0, "step": 0.25},
    "band": {"md_rel": 0.15, "md_se_mult": 3.0, "variance_rel": 0.05},
    "conditions": {"t_grid": list(DEFAULT_T_GRID), "n_grid": list(DEFAULT_N_GRID),
                   "epsilon": 0.1, "trim_bound": 1.0, "coefficient_bound": 2.0},
    "identity": {"replications": 1000},
    "variance": {"replications": None},
    "diagnostics": {"epsilon1": 0.05, "replications": 10000},
}

# tails at reach * sqrt(log n) stay above ~1e-5 for n <= 1e4
MAX_REACH = 1.5

DEFAULT_PARAMS = {"uniform": [0.0, 1.0], "exponential": [1.0], "normal": [0.0, 1.0],
                  "cauchy": [0.0, 1.0]}


@dataclass(frozen=True)
class Settings:
    """Parsed config: the experiment plus the report and acceptance knobs."""

    experiment: ExperimentConfig
    resolved: dict

    def section(self, name):
        return self.resolved[name]

    @property
    def hash(self):
        return config_hash(self.resolved)


def _merge(schema, data, path, unknown, missing):
    out = {}
    for key in data:
        if key not in schema:
            unknown.append(path + str(key))
    for key, default in schema.items():
        name = path + key
        if isinstance(default, dict):
            sub = data.get(key, {})
            if sub is None:
                sub = {}
            if not isinstance(sub, dict):
                raise ConfigError(f"{name} must be a mapping")
            out[key] = _merge(default, sub, name + ".", unknown, missing)
        elif key in data and data[key] is not None:
            out[key] = data[key]
        elif default is REQUIRED:
            missing.append(name)
        else:
            out[key] = copy.deepcopy(default)
    return out


def resolve(data):
    """Fill defaults, reporting every unknown and missing key at once."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping at the top level")
    unknown, missing = [], []
    out = _merge(SCHEMA, data, "", unknown, missing)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    if missing:
        raise ConfigError(f"missing required config keys: {', '.join(missing)}")
    return out


def _number(value, name, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    if integer:
        if value != int(value):
            raise ConfigError(f"{name} must be an integer, got {value!r}")
        return int(value)
    return float(value)


def _numbers(values, name, integer=False):
    if not isinstance(values, (list, tuple)):
        raise ConfigError(f"{name} must be a list")
    return [_number(v, f"{name}[{i}]", integer) for i, v in enumerate(values)]


def _normalise(cfg):
    """Coerce types in place so the hash does not depend on ``1`` vs ``1.0``."""
    d, w, t = cfg["distribution"], cfg["weight"], cfg["trim"]
    family = d["family"]
    if family not in distributions.FAMILY_CODES:
        raise ConfigError(f"unknown distribution family {family!r}")
    if d["params"] is None:
        if family not in DEFAULT_PARAMS:
            raise ConfigError(f"missing required config keys: distribution.params ({family} has no default)")
        d["params"] = list(DEFAULT_PARAMS[family])
    d["params"] = _numbers(d["params"], "distribution.params")
    for key in ("loc", "scale"):
        d[key] = _number(d[key], f"distribution.{key}")
    if d["moment_order"] is not None:
        d["moment_order"] = _number(d["moment_order"], "distribution.moment_order")

    if w["coefficients"] is None:
        if w["kind"] == "polynomial":
            raise ConfigError("missing required config keys: weight.coefficients")
        w["coefficients"] = [1.0] if w["kind"] == "constant" else []
    w["coefficients"] = _numbers(w["coefficients"], "weight.coefficients")
    w["knots"] = [_numbers(k, f"weight.knots[{i}]") for i, k in enumerate(w["knots"])]
    w["domain"] = _numbers(w["domain"], "weight.domain")
    for key in ("lipschitz", "perturb_epsilon"):
        if w[key] is not None:
            w[key] = _number(w[key], f"weight.{key}")
    w["perturb_budget"] = _number(w["perturb_budget"], "weight.perturb_budget")
    w["perturb_random"] = bool(w["perturb_random"])

    t["n"] = _number(t["n"], "trim.n", integer=True)
    for key in ("alpha", "beta", "shift_scale", "shift_power"):
        t[key] = _number(t[key], f"trim.{key}")
    if not 0 < t["alpha"] < 1 - t["beta"] < 1:
        raise TrimError(f"heavy trimming violated: need 0 < alpha < 1 - beta < 1, "
                        f"got alpha={t['alpha']}, beta={t['beta']}")
    for key in ("k", "m"):
        if t[key] is not None:
            t[key] = _number(t[key], f"trim.{key}", integer=True)
    if (t["k"] is None) != (t["m"] is None):
        raise ConfigError("trim.k and trim.m must be given together")
    t["n_grid"] = _numbers(t["n_grid"], "trim.n_grid", integer=True)

    cfg["replications"] = _number(cfg["replications"], "replications", integer=True)
    cfg["seed"] = _number(cfg["seed"], "seed", integer=True)
    if not 0 <= cfg["seed"] < 2 ** 64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    for key in ("lower", "reach", "step"):
        cfg["grid"][key] = _number(cfg["grid"][key], f"grid.{key}")
    if cfg["grid"]["reach"] > MAX_REACH:
        raise ConfigError(f"grid.reach is capped at {MAX_REACH}: plain Monte Carlo cannot "
                          "resolve tails beyond that at desk-scale replication counts")
    for key in cfg["band"]:
        cfg["band"][key] = _number(cfg["band"][key], f"band.{key}")
    c = cfg["conditions"]
    c["t_grid"] = _numbers(c["t_grid"], "conditions.t_grid")
    c["n_grid"] = _numbers(c["n_grid"], "conditions.n_grid", integer=True)
    for key in ("epsilon", "trim_bound", "coefficient_bound"):
        c[key] = _number(c[key], f"conditions.{key}")
    for section in ("identity", "variance", "diagnostics"):
        if cfg[section]["replications"] is not None:
            cfg[section]["replications"] = _number(cfg[section]["replications"],
                                                   f"{section}.replications", integer=True)
    cfg["diagnostics"]["epsilon1"] = _number(cfg["diagnostics"]["epsilon1"], "diagnostics.epsilon1")
    counts = [("replications", cfg["replications"])] + [
        (f"{s}.replications", cfg[s]["replications"]) for s in ("identity", "variance", "diagnostics")]
    for name, value in counts:
        if value is not None and value < 1:
            raise ConfigError(f"{name} must be >= 1, got {value}")
    for name, grid in (("trim.n_grid", t["n_grid"]), ("conditions.n_grid", c["n_grid"])):
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] < 3:
            raise ConfigError(f"{name} must be a non-empty increasing list of sizes >= 3")
    return cfg


def build_experiment(cfg):
    d, w, t = cfg["distribution"], cfg["weight"], cfg["trim"]
    dist = distributions.Distribution(d["family"], tuple(d["params"]), d["loc"], d["scale"],
                                      d["moment_order"])
    common = {"domain": tuple(w["domain"]), "lipschitz": w["lipschitz"]}
    if w["kind"] == "piecewise_linear":
        weight = weights.piecewise_linear([tuple(k) for k in w["knots"]], **common)
    else:
        weight = weights.WeightSpec(w["kind"], tuple(w["coefficients"]), **common)
    if t["k"] is None:
        trim = TrimSpec.from_limits(t["n"], t["alpha"], t["beta"], t["shift_scale"], t["shift_power"])
    else:
        trim = TrimSpec(t["n"], t["k"], t["m"], t["alpha"], t["beta"])
    grid = XGrid(cfg["grid"]["lower"], cfg["grid"]["reach"], cfg["grid"]["step"])
    return ExperimentConfig(
        distribution=dist, weight=weight, trim=trim, replications=cfg["replications"],
        seed=cfg["seed"], normalization=cfg["normalization"], grid=grid,
        perturb_epsilon=w["perturb_epsilon"], perturb_budget=w["perturb_budget"],
        perturb_random=w["perturb_random"], n_grid=tuple(t["n_grid"]),
        shift_scale=t["shift_scale"], shift_power=t["shift_power"])


def parse_config(text, seed=None):
    """Parse, validate and resolve a config document; ``seed`` overrides the file."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from None
    if data is None:
        data = {}
    if seed is not None:
        data = dict(data)
        data["seed"] = seed
    cfg = _normalise(resolve(data))
    try:
        experiment = build_experiment(cfg)
    except (ConfigError, TrimError):
        raise
    except TrimLStatError as exc:
        raise ConfigError(str(exc)) from None
    for key, value in cfg["band"].items():
        if not (value > 0 and math.isfinite(value)):
            raise ConfigError(f"band.{key} must be positive")
    return Settings(experiment, cfg)


def load_config(path, seed=None):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, seed=seed)
