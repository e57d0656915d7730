"""Strict JSON run configuration.

A config document looks like::

    {
      "experiment": "sync-scan",
      "drive": {"rabi_frequency_mhz": 6, "mw_detuning_mhz": 0, ...},
      "settings": {"rabi_scan": {"start": 4, "stop": 8, "points": 41}},
      "output_dir": "out/sync", "jobs": 4, "seed": 0
    }

Unknown keys anywhere are rejected so that a misspelled physics parameter
never silently falls back to a default.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ConfigError, MissingKeyError, ParseError, UnknownKeyError
from .model import DriveParams, Hyperfine

EXPERIMENTS = (
    "esr",
    "phase-gated-esr",
    "rabi-map",
    "sync-scan",
    "amplitude-scan",
    "rf-scan",
    "floquet",
    "lightshift",
)

DRIVE_KEYS = {
    "rabi_frequency_mhz": "rabi_frequency",
    "mw_detuning_mhz": "mw_detuning",
    "rf_frequency_mhz": "rf_frequency",
    "rf_amplitude_mhz": "rf_amplitude",
    "rf_phase_rad": "rf_phase",
    "gamma1_per_us": "gamma1",
    "gamma2_per_us": "gamma2",
    "w_eq": "w_eq",
}
TOP_KEYS = {"experiment", "drive", "settings", "output_dir", "jobs", "seed"}

_TRACE = {
    "tau_max_us": 20.0,
    "n_tau": 2048,
    "rf_phase_average": 16,
    "integrator": "fixed",
    "dt_max_us": None,
    "rel_tol": 1e-8,
    "shot_noise_photons": None,
}
_ESR = {
    "mw_scan": {"start": -50.0, "stop": 50.0, "points": 2001},
    "regime": "resolved-sideband",
    "linewidth_mhz": 0.5,
    "contrast": 0.2,
}
_FLOQUET = {"truncation": 40, "eigentolerance": 1e-9}

# experiment -> (defaults, required scan key or None)
SETTINGS: dict[str, tuple[dict[str, Any], str | None]] = {
    "esr": (_ESR, None),
    "phase-gated-esr": ({**_ESR, "regime": "adiabatic", "n_phase_bins": 10, "duty": 0.2}, None),
    "rabi-map": ({**_TRACE, "tau_max_us": 10.0, "n_tau": 1024}, "detuning_scan"),
    "sync-scan": (dict(_TRACE), "rabi_scan"),
    "amplitude-scan": (dict(_TRACE), "rf_amplitude_scan"),
    "rf-scan": (dict(_TRACE), "rf_frequency_scan"),
    "floquet": (dict(_FLOQUET), "rabi_scan"),
    "lightshift": (dict(_FLOQUET), "rf_amplitude_scan"),
}


def _check_keys(obj: dict, allowed, where: str):
    extra = sorted(set(obj) - set(allowed))
    if extra:
        raise UnknownKeyError(f"unknown key {extra[0]!r} in {where}")


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"{where} must be a finite number, got {value!r}")
    return float(value)


def _integer(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where} must be an integer, got {value!r}")
    return value


def parse_grid(spec, where: str) -> np.ndarray:
    """A scan grid: a list of numbers or {"start", "stop", "points"}."""
    if isinstance(spec, list):
        if not spec:
            raise ConfigError(f"{where} is empty")
        return np.array([_number(v, where) for v in spec])
    if isinstance(spec, dict):
        _check_keys(spec, {"start", "stop", "points"}, where)
        for k in ("start", "stop", "points"):
            if k not in spec:
                raise MissingKeyError(f"missing key {k!r} in {where}")
        n = _integer(spec["points"], f"{where}.points")
        if n < 1:
            raise ConfigError(f"{where}.points must be >= 1")
        return np.linspace(_number(spec["start"], where), _number(spec["stop"], where), n)
    raise ConfigError(f"{where} must be a list or a start/stop/points object")


def parse_drive(d) -> DriveParams:
    if not isinstance(d, dict):
        raise ConfigError("'drive' must be an object")
    _check_keys(d, set(DRIVE_KEYS) | {"hyperfine"}, "drive")
    kwargs = {}
    for key, attr in DRIVE_KEYS.items():
        if key not in d:
            raise MissingKeyError(f"missing key {key!r} in drive")
        kwargs[attr] = _number(d[key], f"drive.{key}")
    hf = d.get("hyperfine")
    if hf is not None:
        if not isinstance(hf, dict):
            raise ConfigError("drive.hyperfine must be an object or null")
        _check_keys(hf, {"splitting_mhz", "weights"}, "drive.hyperfine")
        splitting = _number(hf.get("splitting_mhz", 2.16), "drive.hyperfine.splitting_mhz")
        weights = hf.get("weights", [1 / 3, 1 / 3, 1 / 3])
        if not isinstance(weights, list):
            raise ConfigError("drive.hyperfine.weights must be a list")
        try:
            kwargs["hyperfine"] = Hyperfine(splitting, tuple(_number(w, "drive.hyperfine.weights") for w in weights))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    try:
        return DriveParams(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"invalid drive: {exc}") from None


def drive_to_dict(p: DriveParams) -> dict[str, Any]:
    out: dict[str, Any] = {key: getattr(p, attr) for key, attr in DRIVE_KEYS.items()}
    if p.hyperfine is not None:
        out["hyperfine"] = {"splitting_mhz": p.hyperfine.splitting, "weights": list(p.hyperfine.weights)}
    return out


def _check_settings(experiment: str, settings: dict) -> dict:
    defaults, scan_key = SETTINGS[experiment]
    allowed = set(defaults) | ({scan_key} if scan_key else set())
    _check_keys(settings, allowed, f"settings ({experiment})")
    merged = copy.deepcopy(defaults)
    merged.update(settings)
    if scan_key:
        if scan_key not in merged:
            raise MissingKeyError(f"missing key {scan_key!r} in settings ({experiment})")
        grid = parse_grid(merged[scan_key], f"settings.{scan_key}")
        d = np.diff(grid)
        if d.size and not (np.all(d > 0) or np.all(d < 0)):
            raise ConfigError(f"settings.{scan_key} must be strictly monotone")
    if "mw_scan" in merged:
        grid = parse_grid(merged["mw_scan"], "settings.mw_scan")
        if grid.size < 2:
            raise ConfigError("settings.mw_scan needs at least 2 points")
    for key in ("tau_max_us", "linewidth_mhz", "contrast", "duty", "rel_tol", "eigentolerance"):
        if key in merged:
            if _number(merged[key], f"settings.{key}") <= 0:
                raise ConfigError(f"settings.{key} must be > 0")
    for key in ("n_tau", "rf_phase_average", "n_phase_bins", "truncation"):
        if key in merged and _integer(merged[key], f"settings.{key}") < 1:
            raise ConfigError(f"settings.{key} must be >= 1")
    if merged.get("dt_max_us") is not None and _number(merged["dt_max_us"], "settings.dt_max_us") <= 0:
        raise ConfigError("settings.dt_max_us must be > 0")
    if merged.get("shot_noise_photons") is not None:
        if _integer(merged["shot_noise_photons"], "settings.shot_noise_photons") < 1:
            raise ConfigError("settings.shot_noise_photons must be >= 1")
    if "integrator" in merged and merged["integrator"] not in ("fixed", "adaptive"):
        raise ConfigError("settings.integrator must be 'fixed' or 'adaptive'")
    if "regime" in merged and merged["regime"] not in ("adiabatic", "resolved-sideband"):
        raise ConfigError("settings.regime must be 'adiabatic' or 'resolved-sideband'")
    return merged


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    drive: DriveParams
    settings: dict[str, Any]
    output_dir: Path = Path("out")
    jobs: int | None = None
    seed: int | None = None

    def to_dict(self) -> dict[str, Any]:
        """Fully resolved document; :func:`config_from_dict` inverts it."""
        return {
            "experiment": self.experiment,
            "drive": drive_to_dict(self.drive),
            "settings": copy.deepcopy(self.settings),
            "output_dir": str(self.output_dir),
            "jobs": self.jobs,
            "seed": self.seed,
        }

    def grid(self, key: str) -> np.ndarray:
        return parse_grid(self.settings[key], f"settings.{key}")


def config_from_dict(doc) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    _check_keys(doc, TOP_KEYS, "config")
    for key in ("experiment", "drive"):
        if key not in doc:
            raise MissingKeyError(f"missing key {key!r} in config")
    experiment = doc["experiment"]
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}")
    drive = parse_drive(doc["drive"])
    settings = doc.get("settings", {})
    if not isinstance(settings, dict):
        raise ConfigError("'settings' must be an object")
    settings = _check_settings(experiment, settings)
    jobs = doc.get("jobs")
    if jobs is not None and _integer(jobs, "jobs") < 1:
        raise ConfigError("jobs must be >= 1")
    seed = doc.get("seed")
    if seed is not None:
        _integer(seed, "seed")
    out = doc.get("output_dir", "out")
    if not isinstance(out, str):
        raise ConfigError("output_dir must be a string")
    return RunConfig(experiment, drive, settings, Path(out), jobs, seed)


def load_config(path) -> RunConfig:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return config_from_dict(doc)
