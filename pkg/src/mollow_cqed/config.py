"""Run configuration: YAML files mapped onto frozen dataclasses.

A config file looks like::

    name: fig3b
    protocol: linewidth_sweep
    params: {delta_c: 42, frame: displaced}
    sweep: {omega: {start: 15, stop: 70, num: 12}}
    fock: auto
    output_dir: runs/fig3b

``sweep`` takes exactly one of ``omega`` (target bare Rabi frequencies,
GHz) or ``J`` (drive amplitudes), each a list or a ``start/stop/num``
range.  Unknown keys anywhere are errors.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .model import SystemParams

PROTOCOLS = ("spectrum", "linewidth_sweep", "intensity_sweep", "ablation", "calibrate")

# ablation curves: name -> parameter overrides
ABLATION_VARIANTS = {
    "coherent_only": dict(gamma_d=0.0, gamma_ph_ads=0.0, gamma_ph_asp=0.0),
    "dephasing_only": dict(gamma_ph_ads=0.0, gamma_ph_asp=0.0),
    "full": {},
}


class ConfigError(ValueError):
    """Invalid or inconsistent configuration (CLI exit code 2)."""


@dataclass(frozen=True)
class SweepAxis:
    kind: str  # "omega" or "J"
    values: tuple

    def __post_init__(self):
        if self.kind not in ("omega", "J"):
            raise ConfigError(f"sweep axis must be 'omega' or 'J', got {self.kind!r}")
        if len(self.values) == 0:
            raise ConfigError("sweep is empty")
        if any(not np.isfinite(v) or v < 0 for v in self.values):
            raise ConfigError("sweep values must be finite and >= 0")


@dataclass(frozen=True)
class GridConfig:
    t_max: float | None = None
    omega_min: float | None = None
    omega_max: float | None = None
    omega_step: float | None = None

    def __post_init__(self):
        given = [v is not None for v in (self.omega_min, self.omega_max, self.omega_step)]
        if any(given) and not all(given):
            raise ConfigError("grid needs all of omega_min, omega_max, omega_step or none")
        if all(given):
            if not self.omega_step > 0 or not self.omega_max > self.omega_min:
                raise ConfigError("grid must have omega_step > 0 and omega_max > omega_min")
        if self.t_max is not None and not self.t_max > 0:
            raise ConfigError("grid.t_max must be > 0")

    def omega(self):
        if self.omega_step is None:
            return None
        n = int(round((self.omega_max - self.omega_min) / self.omega_step))
        return self.omega_min + self.omega_step * np.arange(n + 1)


@dataclass(frozen=True)
class CalibrationConfig:
    data: str | None = None  # CSV path; synthetic data when absent
    rates: tuple = (0.19, 0.28)  # generating rates for synthetic data
    noise: float = 0.0
    start: tuple = (0.2, 0.3)


@dataclass(frozen=True)
class RunConfig:
    name: str
    protocol: str
    params: SystemParams
    sweep: SweepAxis
    output_dir: Path
    seed: int = 0
    grid: GridConfig = field(default_factory=GridConfig)
    fock: int | str | None = None  # None: params.fock_dim
    workers: int = 1
    plot: bool = True
    variants: tuple = ("default",)
    calibration: CalibrationConfig = field(default_factory=CalibrationConfig)

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")
        if self.fock not in (None, "auto") and not (isinstance(self.fock, int) and self.fock >= 2):
            raise ConfigError(f"fock must be an integer >= 2 or 'auto', got {self.fock!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.protocol == "ablation" and self.variants == ("default",):
            object.__setattr__(self, "variants", tuple(ABLATION_VARIANTS))
        for v in self.variants:
            if v != "default" and v not in ABLATION_VARIANTS:
                raise ConfigError(f"unknown variant {v!r}")

    def variant_params(self, variant: str) -> SystemParams:
        if variant == "default":
            return self.params
        return self.params.with_(**ABLATION_VARIANTS[variant])

    def with_(self, **changes) -> RunConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["output_dir"] = str(self.output_dir)
        d["sweep"] = {"kind": self.sweep.kind, "values": list(self.sweep.values)}
        d["variants"] = list(self.variants)
        d["calibration"]["rates"] = list(self.calibration.rates)
        d["calibration"]["start"] = list(self.calibration.start)
        return d


_TOP_KEYS = {
    "name", "protocol", "params", "sweep", "output_dir", "seed", "grid",
    "fock", "workers", "plot", "variants", "calibration",
}


def _check_keys(section: str, got: dict, allowed) -> None:
    if not isinstance(got, dict):
        raise ConfigError(f"{section} must be a mapping")
    unknown = sorted(set(got) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {section}: {', '.join(unknown)}")


def _parse_values(section: str, spec) -> tuple:
    if isinstance(spec, dict):
        _check_keys(section, spec, ("start", "stop", "num"))
        try:
            vals = np.linspace(float(spec["start"]), float(spec["stop"]), int(spec["num"]))
        except KeyError as exc:
            raise ConfigError(f"{section} range needs start, stop and num") from exc
        return tuple(float(v) for v in vals)
    if isinstance(spec, (list, tuple)):
        return tuple(float(v) for v in spec)
    if isinstance(spec, (int, float)):
        return (float(spec),)
    raise ConfigError(f"{section} must be a list, a number or a start/stop/num range")


def parse_sweep(spec) -> SweepAxis:
    _check_keys("sweep", spec, ("omega", "J"))
    if len(spec) != 1:
        raise ConfigError("sweep needs exactly one of 'omega' or 'J'")
    ((kind, vals),) = spec.items()
    return SweepAxis(kind, _parse_values(f"sweep.{kind}", vals))


_PARAM_FIELDS = {f.name for f in dataclasses.fields(SystemParams)}


def config_from_dict(raw: dict, base_dir: Path | None = None) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping at top level")
    _check_keys("config", raw, _TOP_KEYS)
    for key in ("protocol", "sweep"):
        if key not in raw:
            raise ConfigError(f"missing required key {key!r}")
    params_raw = raw.get("params", {}) or {}
    _check_keys("params", params_raw, _PARAM_FIELDS)
    try:
        params = SystemParams(**params_raw)
        grid_raw = raw.get("grid", {}) or {}
        _check_keys("grid", grid_raw, [f.name for f in dataclasses.fields(GridConfig)])
        grid = GridConfig(**grid_raw)
        cal_raw = dict(raw.get("calibration", {}) or {})
        _check_keys("calibration", cal_raw, [f.name for f in dataclasses.fields(CalibrationConfig)])
        for k in ("rates", "start"):
            if k in cal_raw:
                cal_raw[k] = tuple(float(v) for v in cal_raw[k])
        calibration = CalibrationConfig(**cal_raw)
        name = str(raw.get("name", raw["protocol"]))
        out = Path(raw.get("output_dir", Path("runs") / name))
        if base_dir is not None and not out.is_absolute():
            out = base_dir / out
        variants = raw.get("variants")
        return RunConfig(
            name=name,
            protocol=raw["protocol"],
            params=params,
            sweep=parse_sweep(raw["sweep"]),
            output_dir=out,
            seed=int(raw.get("seed", 0)),
            grid=grid,
            fock=raw.get("fock"),
            workers=int(raw.get("workers", 1)),
            plot=bool(raw.get("plot", True)),
            variants=tuple(variants) if variants else ("default",),
            calibration=calibration,
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML: {exc}") from exc
    return config_from_dict(raw)
