"""Run configuration: a JSON file with sections ``model``, ``materials``,
``box``, ``noise``, ``bond`` and ``experiment``.

Missing sections and keys fall back to the shipped defaults
(``data/default_config.json``); unknown keys are rejected so typos fail
before any computation starts.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .model import PARAM_NAMES, FrequencyGrid, MaterialSpec, ParameterBox, ParameterVector
from .simulation import BondParams, ExperimentConfig, NoiseGrid

_SECTIONS = ("model", "materials", "box", "noise", "bond", "experiment")


def default_config_dict() -> dict:
    text = resources.files("bondgauge").joinpath("data/default_config.json").read_text()
    return json.loads(text)


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict) and key != "profiles":
            if not isinstance(value, dict):
                raise ConfigError(f"{where!r} must be an object")
            out[key] = _merge(base[key], value, where + ".")
        elif key == "profiles":
            if not isinstance(value, dict):
                raise ConfigError(f"{where!r} must be an object")
            out[key].update(copy.deepcopy(value))
        else:
            out[key] = value
    return out


def _theta(values, where) -> np.ndarray:
    if not isinstance(values, dict):
        raise ConfigError(f"{where} must map parameter names to numbers")
    missing = set(PARAM_NAMES) - set(values)
    extra = set(values) - set(PARAM_NAMES)
    if missing or extra:
        raise ConfigError(f"{where}: missing {sorted(missing)} / unknown {sorted(extra)}")
    try:
        return np.array([float(values[name]) for name in PARAM_NAMES])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


@dataclass(frozen=True)
class RunConfig:
    """Everything a command needs, validated up front."""

    experiment: ExperimentConfig
    profile: str
    profiles: dict
    beta1_grid: tuple
    sigma_b_grid: tuple
    n_grid: tuple
    max_exponent: int
    output_dir: str
    verbosity: str

    @property
    def theta_true(self) -> ParameterVector:
        return self.experiment.theta_true

    def with_profile(self, name: str) -> "RunConfig":
        if name not in self.profiles:
            raise ConfigError(f"unknown profile {name!r}; available: {sorted(self.profiles)}")
        exp = replace(self.experiment, theta_true=self.profiles[name])
        return replace(self, experiment=exp, profile=name)


def build_run_config(raw: dict) -> RunConfig:
    """Validate a merged config dictionary into a :class:`RunConfig`."""
    try:
        return _build(raw)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _build(raw: dict) -> RunConfig:
    model, mats, box_s = raw["model"], raw["materials"], raw["box"]
    noise, bond, exp = raw["noise"], raw["bond"], raw["experiment"]

    profiles = {
        name: ParameterVector.from_array(_theta(vals, f"model.profiles.{name}"))
        for name, vals in model["profiles"].items()
    }
    profile = model["profile"]
    if profile not in profiles:
        raise ConfigError(f"model.profile {profile!r} is not one of {sorted(profiles)}")
    g = model["grid"]
    if int(g["n"]) != g["n"]:
        raise ConfigError("model.grid.n must be an integer")
    grid = FrequencyGrid.linear_hz(float(g["f_lo_hz"]), float(g["f_hi_hz"]), int(g["n"]))
    mat = MaterialSpec(**{k: float(v) for k, v in mats.items()})
    box = ParameterBox(_theta(box_s["lower"], "box.lower"), _theta(box_s["upper"], "box.upper"))

    if noise.get("sigmas"):
        sigmas = NoiseGrid(tuple(noise["sigmas"]))
    else:
        full = NoiseGrid.linear(float(noise["lo"]), float(noise["hi"]), int(noise["n"]))
        pick = noise.get("select")
        sigmas = full if not pick else NoiseGrid(tuple(full.sigmas[int(i)] for i in pick))

    bp = BondParams(float(bond["beta1"]), float(bond["sigma_b"]), int(bond["n_pairs"]),
                    float(bond["x_lo"]), float(bond["x_hi"]))
    if bp.n_pairs < 3 or not bp.x_lo < bp.x_hi:
        raise ConfigError("bond needs n_pairs >= 3 and x_lo < x_hi")
    sweep = bond["sweep"]

    experiment = ExperimentConfig(
        theta_true=profiles[profile],
        box=box,
        grid=grid,
        mat=mat,
        noise_grid=sigmas,
        replications=int(exp["replications"]),
        alpha=float(exp["alpha"]),
        eta=float(exp["eta"]),
        bond_params=bp,
        methods=tuple(exp["methods"]),
        seed=int(exp["seed"]),
        starts=int(exp["starts"]),
        threads=int(exp["threads"]),
    )
    for name, theta in profiles.items():
        if not box.contains(np.asarray(theta)):
            raise ConfigError(f"profile {name!r} lies outside the box")
    n_grid = tuple(int(n) for n in sweep["n_pairs"])
    if not (sweep["beta1"] and sweep["sigma_b"] and n_grid) or min(n_grid) < 3:
        raise ConfigError("bond.sweep grids must be nonempty with n_pairs >= 3")
    if int(exp["max_exponent"]) < 1:
        raise ConfigError("experiment.max_exponent must be >= 1")
    if exp["verbosity"] not in ("quiet", "info", "debug"):
        raise ConfigError("experiment.verbosity must be quiet, info or debug")
    return RunConfig(
        experiment=experiment,
        profile=profile,
        profiles=profiles,
        beta1_grid=tuple(float(b) for b in sweep["beta1"]),
        sigma_b_grid=tuple(float(s) for s in sweep["sigma_b"]),
        n_grid=n_grid,
        max_exponent=int(exp["max_exponent"]),
        output_dir=str(exp["output_dir"]),
        verbosity=str(exp["verbosity"]),
    )


def load_config(path=None, profile: str | None = None) -> RunConfig:
    """Read a JSON config (defaults when ``path`` is None) and validate it."""
    raw = default_config_dict()
    if path is not None:
        try:
            user = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError(f"{path}: top level must be an object")
        raw = _merge(raw, user)
    cfg = build_run_config(raw)
    return cfg.with_profile(profile) if profile else cfg
