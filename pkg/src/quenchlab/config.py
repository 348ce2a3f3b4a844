"""Experiment configuration files (YAML) and their validation.

A config is a mapping with a required ``experiment`` key, an explicit
integer ``seed`` for stochastic experiments, and optional ``symbol``,
``environment``, ``numeric`` and ``output`` blocks.  Missing numeric
entries are filled from :data:`DEFAULTS`, and the resolved mapping is what
gets echoed into the manifest.  See configs/SCHEMA.md.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import yaml

from .environment import BumpProfile
from .errors import ConfigError, QuenchLabError
from .symbols import LevySymbol, symbol_from_config

EXPERIMENTS = ("table1", "rates-asymptotics", "eigen", "cf-check", "env-stats", "quenched-ratio", "empty-ball")

STOCHASTIC = {"eigen", "cf-check", "env-stats", "quenched-ratio", "empty-ball"}

BROWNIAN_1D = {"dimension": 1, "gaussian": {"kind": "isotropic", "a": 1.0}, "jump": {"family": "none"}}

DEFAULTS: dict[str, dict[str, Any]] = {
    "table1": {"d": 1, "rho": 1.0, "alpha": 1.0, "grid_n": 2000, "lambdas": {}, "params": {}, "tol": 1e-12},
    "rates-asymptotics": {"t_min": 1e4, "t_max": 1e9, "n": 11, "cases": [
        {"name": "polynomial", "family": "polynomial", "p": 2.0, "alpha": 2.0, "kappa": 1.0, "d": 1, "tol": 1e-3},
        {"name": "log_decay", "family": "log_decay", "theta": 1.0, "beta": 2.0, "alpha": 2.0, "kappa": 1.0,
         "d": 1, "tol": 0.02},
        {"name": "stretched_exp", "family": "stretched_exp", "theta": 1.0, "beta": 0.5, "alpha": 2.0,
         "kappa": 1.0, "d": 1, "tol": 0.02},
    ]},
    "eigen": {"radius": 1.0, "methods": ["closed_form", "grid", "mc"], "dt": 1e-3, "n_paths": 100000,
              "n_batches": 10, "grid_n": 2000, "k_sigma": 2.0, "mc_rel_tol": 0.1},
    "cf-check": {"t": 1.0, "n": 100000, "radii": [0.25, 0.5, 1.0, 2.0, 4.0], "epsilon": 1e-2, "k": 4.5},
    "env-stats": {"radii": [0.5, 1.0], "n_seeds": 10000, "z_max": 3.0},
    "quenched-ratio": {"times": [3.0, 5.0, 7.5, 10.0, 15.0, 20.0, 25.0, 30.0, 40.0, 50.0], "n_env": 20,
                       "dt": 0.02, "n_paths": 10000, "box_c": 3.0, "row": {"family": "brownian"}},
    "empty-ball": {"r": 1.0, "r_in": 0.0, "epsilon": 0.1},
}

ENV_DEFAULTS = {"d": 1, "rho": 1.0, "box": "auto", "W": {"shape": "indicator_ball", "height": 1.0, "a": 1.0}}


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int | None
    symbol: dict | None
    environment: dict | None
    numeric: dict
    output: str | None
    source: bytes = b""

    def resolved(self) -> dict:
        """Full echo of every setting used (after defaults)."""
        out = {"experiment": self.experiment, "seed": self.seed, "numeric": self.numeric}
        if self.symbol is not None:
            out["symbol"] = self.symbol
        if self.environment is not None:
            out["environment"] = self.environment
        return out

    def build_symbol(self) -> LevySymbol:
        try:
            return symbol_from_config(self.symbol, "symbol")
        except ConfigError:
            raise
        except (QuenchLabError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc), "symbol") from exc

    def build_W(self) -> BumpProfile:
        return bump_from_config(self.environment["W"], "environment.W")


def bump_from_config(block: Mapping, where: str) -> BumpProfile:
    if not isinstance(block, Mapping):
        raise ConfigError("expected a mapping", where)
    shape = block.get("shape")
    try:
        if shape == "indicator_ball":
            return BumpProfile.indicator_ball(float(block["height"]), float(block["a"]))
        if shape == "cone":
            return BumpProfile.cone(float(block["height"]), float(block["a"]))
        if shape == "table":
            return BumpProfile.table(block["radii"], block["values"])
    except KeyError as exc:
        raise ConfigError(f"missing parameter {exc.args[0]!r}", f"{where}.{exc.args[0]}") from exc
    except QuenchLabError as exc:
        raise ConfigError(str(exc), where) from exc
    raise ConfigError(f"unknown bump shape {shape!r}", f"{where}.shape")


def _merge(defaults: Mapping, given: Mapping | None, where: str) -> dict:
    out = copy.deepcopy(dict(defaults))
    for k, v in (given or {}).items():
        if k not in defaults:
            raise ConfigError("unknown key", f"{where}.{k}")
        out[k] = v
    return out


def parse_config(text: str | bytes, seed_override: int | None = None) -> ExperimentConfig:
    raw = text.encode() if isinstance(text, str) else text
    try:
        data = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"not valid YAML: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, Mapping):
        raise ConfigError("top level must be a mapping")
    if "experiment" not in data:
        raise ConfigError("missing required key", "experiment")
    exp = data["experiment"]
    if exp not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {exp!r}; choose from {', '.join(EXPERIMENTS)}", "experiment")
    known = {"experiment", "seed", "symbol", "environment", "numeric", "output"}
    for k in data:
        if k not in known:
            raise ConfigError("unknown key", str(k))
    seed = data.get("seed")
    if seed_override is not None:
        seed = int(seed_override)
    if exp in STOCHASTIC:
        if seed is None:
            raise ConfigError("stochastic experiments need an explicit integer seed", "seed")
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0 or seed >= 2 ** 64:
            raise ConfigError("seed must be an integer in [0, 2^64)", "seed")
    numeric = _merge(DEFAULTS[exp], data.get("numeric"), "numeric")
    symbol = None
    if exp in ("eigen", "cf-check", "quenched-ratio"):
        symbol = copy.deepcopy(data.get("symbol", BROWNIAN_1D if exp == "quenched-ratio" else None))
        if symbol is None:
            raise ConfigError("missing required block", "symbol")
    environment = None
    if exp in ("env-stats", "quenched-ratio", "empty-ball"):
        environment = _merge(ENV_DEFAULTS, data.get("environment"), "environment")
        if environment["W"] is not ENV_DEFAULTS["W"]:
            bump_from_config(environment["W"], "environment.W")
        if not (isinstance(environment["rho"], (int, float)) and environment["rho"] > 0):
            raise ConfigError("rho must be positive", "environment.rho")
        if environment["box"] != "auto" and not (isinstance(environment["box"], (int, float))
                                                 and environment["box"] > 0):
            raise ConfigError("box must be 'auto' or a positive number", "environment.box")
    cfg = ExperimentConfig(exp, seed, symbol, environment, numeric, data.get("output"), raw)
    if symbol is not None:
        cfg.build_symbol()
    return cfg


def load_config(path, seed_override: int | None = None) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {p} not found")
    return parse_config(p.read_bytes(), seed_override)
