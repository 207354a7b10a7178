"""Scenario configuration: presets, file loading, validation.

A scenario is described by a flat mapping (system, duration, step, seed,
noise switch, gain overrides, initial states).  Everything is validated
before any simulation or file output happens.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import yaml

from .car import CarGains
from .ins import InsEnvironment, InsGains, ins_pack
from .quaternions import axis_angle
from .reactor import (ReactorInput, ReactorObserverGains, ReactorParams,
                      reactor_equilibrium)
from .sim import SensorNoiseSpec, n_grid_steps
from .vtol import VtolTrajectorySpec, vtol_reference


class ConfigError(ValueError):
    """A scenario description failed validation; nothing was run or written."""


SYSTEMS = ("car", "reactor", "ins")

_GAIN_FIELDS = {
    "car": ("a", "b", "c"),
    "reactor": ("beta", "kappa"),
    "ins": ("M12", "M21", "N11", "N22", "N33", "lam"),
}

_NOISE_FIELDS = ("accel_bias", "gyro_bias", "vel_bias", "mag_bias",
                 "accel_sigma", "gyro_sigma", "vel_sigma", "mag_sigma")


@dataclass(frozen=True)
class ScenarioConfig:
    system: str
    label: str
    t_end: float
    dt: float
    seed: int = 0
    noise: bool = False
    gains: dict = field(default_factory=dict)
    noise_overrides: dict = field(default_factory=dict)
    initial_truth: tuple | None = None      # None: system default
    initial_estimate: tuple | None = None


def preset(name: str) -> ScenarioConfig:
    """Named ready-to-run scenarios; ``<system>-...`` fixes the system."""
    if name == "car-default":
        return ScenarioConfig(system="car", label=name, t_end=20.0, dt=0.01)
    if name == "reactor-default":
        return ScenarioConfig(system="reactor", label=name, t_end=300.0, dt=0.1)
    if name == "ins-flight":
        # corrupted sensors; pass noise=False (--no-noise) for the clean variant
        return ScenarioConfig(system="ins", label=name, t_end=6.15, dt=1e-3,
                              noise=True)
    raise ConfigError(f"unknown preset {name!r}; "
                      "use car-default, reactor-default or ins-flight")


DEFAULT_PRESETS = {"car": "car-default", "reactor": "reactor-default",
                   "ins": "ins-flight"}


def default_initial_states(system: str):
    """(truth, estimate) used when a scenario does not pin them."""
    if system == "car":
        return (np.zeros(3), np.array([2.0, -1.0, 1.5]))
    if system == "reactor":
        xeq = reactor_equilibrium(ReactorParams(), ReactorInput())
        return (xeq, np.array([3.0 * xeq[0], 0.2 * xeq[1], xeq[2] + 30.0]))
    if system == "ins":
        truth = vtol_reference(VtolTrajectorySpec(), InsEnvironment(), 0.0).state
        qhat = axis_angle(np.array([1.0, -1.0, 1.0]) / np.sqrt(3.0), 2.0 * np.pi / 3.0)
        return (truth, ins_pack(qhat, np.array([10.0, -10.0, 5.0])))
    raise ConfigError(f"unknown system {system!r}")


def build_gains(cfg: ScenarioConfig):
    """Per-system gain record with ``cfg.gains`` overrides applied."""
    extra = set(cfg.gains) - set(_GAIN_FIELDS[cfg.system])
    if extra:
        raise ConfigError(
            f"unknown gain fields for {cfg.system}: {sorted(extra)}")
    try:
        if cfg.system == "car":
            return CarGains(**cfg.gains)
        if cfg.system == "reactor":
            return ReactorObserverGains(**cfg.gains)
        return InsGains(**cfg.gains)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad gains for {cfg.system}: {exc}") from exc


def build_noise(cfg: ScenarioConfig) -> SensorNoiseSpec | None:
    if not cfg.noise:
        return None
    if cfg.system != "ins":
        raise ConfigError("the sensor noise model only applies to the ins system")
    base = SensorNoiseSpec.flight_test()
    extra = set(cfg.noise_overrides) - set(_NOISE_FIELDS)
    if extra:
        raise ConfigError(f"unknown noise fields: {sorted(extra)}")
    fixed = {}
    for key, val in cfg.noise_overrides.items():
        if key.endswith("_bias"):
            arr = np.asarray(val, dtype=float)
            if arr.shape != (3,):
                raise ConfigError(f"noise field {key} must be a 3-vector")
            fixed[key] = arr
        else:
            fixed[key] = float(val)
    return replace(base, **fixed) if fixed else base


def validate(cfg: ScenarioConfig) -> ScenarioConfig:
    """Raise ConfigError on any invalid field; returns cfg unchanged."""
    if cfg.system not in SYSTEMS:
        raise ConfigError(f"system must be one of {SYSTEMS}, got {cfg.system!r}")
    if not cfg.label or any(ch in cfg.label for ch in "/\\ \t\n"):
        raise ConfigError("label must be a non-empty name without separators")
    try:
        n_grid_steps(cfg.t_end, cfg.dt)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if not isinstance(cfg.seed, int) or isinstance(cfg.seed, bool) or cfg.seed < 0:
        raise ConfigError("seed must be a nonnegative integer")
    build_gains(cfg)
    build_noise(cfg)
    dim = 7 if cfg.system == "ins" else 3
    for which in ("initial_truth", "initial_estimate"):
        val = getattr(cfg, which)
        if val is None:
            continue
        arr = np.asarray(val, dtype=float)
        if arr.shape != (dim,) or not np.all(np.isfinite(arr)):
            raise ConfigError(f"{which} must be a finite {dim}-vector")
        if cfg.system == "reactor" and (np.any(arr[:2] <= 0) or arr[2] <= 0):
            raise ConfigError(f"{which}: concentrations and temperature must be positive")
        if cfg.system == "ins" and abs(np.linalg.norm(arr[:4]) - 1.0) > 1e-6:
            raise ConfigError(f"{which}: quaternion part must have unit norm")
    return cfg


_TOP_KEYS = {"system", "label", "preset", "t_end", "dt", "seed", "noise",
             "gains", "noise_overrides", "initial_truth", "initial_estimate"}


def config_from_mapping(doc: dict, fallback_label: str = "scenario") -> ScenarioConfig:
    """Build and validate a config from a parsed key-value mapping.

    A ``preset`` key supplies defaults; every other key overrides it.
    """
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a key-value mapping")
    extra = set(doc) - _TOP_KEYS
    if extra:
        raise ConfigError(f"unknown configuration keys: {sorted(extra)}")
    if "preset" in doc:
        cfg = preset(doc["preset"])
    else:
        for key in ("system", "t_end", "dt"):
            if key not in doc:
                raise ConfigError(f"configuration needs {key!r} (or a preset)")
        cfg = ScenarioConfig(system=doc["system"], label=fallback_label,
                             t_end=float(doc["t_end"]), dt=float(doc["dt"]))
    updates = {}
    for key in _TOP_KEYS - {"preset"}:
        if key in doc:
            val = doc[key]
            if key in ("t_end", "dt"):
                val = float(val)
            elif key in ("initial_truth", "initial_estimate") and val is not None:
                val = tuple(float(v) for v in val)
            elif key in ("gains", "noise_overrides"):
                if not isinstance(val, dict):
                    raise ConfigError(f"{key} must be a mapping")
            elif key == "noise":
                if not isinstance(val, bool):
                    raise ConfigError("noise must be true or false")
            updates[key] = val
    if updates:
        cfg = replace(cfg, **updates)
    return validate(cfg)


def load_config(path: str) -> ScenarioConfig:
    """Read one scenario from a structured text file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return config_from_mapping(doc or {})


def load_batch(path: str) -> list[ScenarioConfig]:
    """Read a list of scenarios from a file with a top-level ``scenarios`` key."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(doc, dict) or "scenarios" not in doc:
        raise ConfigError("batch file needs a top-level 'scenarios' list")
    entries = doc["scenarios"]
    if not isinstance(entries, list) or not entries:
        raise ConfigError("'scenarios' must be a non-empty list")
    configs = []
    for i, entry in enumerate(entries):
        cfg = config_from_mapping(entry, fallback_label=f"scenario-{i}")
        configs.append(cfg)
    labels = [c.label for c in configs]
    if len(set(labels)) != len(labels):
        raise ConfigError("scenario labels in a batch must be unique")
    return configs
