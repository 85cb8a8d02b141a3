"""Flat ``key = value`` experiment configuration.

One pair per line, ``#`` starts a comment, lists are comma separated and
``inf`` is accepted where a capacity is expected.  Missing keys take the
defaults below; unknown keys are rejected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

EXPERIMENTS = ("beam", "mac", "relay", "overhead", "rsu")

DEFAULT_SWEEPS = {
    "beam": (16.0, 64.0, 256.0),
    "mac": (5.0, 10.0, 20.0, 30.0, 40.0),
    "relay": (0.0, 5.0, 10.0, 15.0, 20.0, 25.0),
    "overhead": (0.0, 5.0, 10.0, 15.0, 20.0, 25.0),
    "rsu": (2.0, 4.0, 6.0, 8.0, 10.0),
}


class ConfigError(ValueError):
    """Bad configuration; ``line`` is 1-based, or 0 when not tied to a line."""

    def __init__(self, message: str, line: int = 0):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "relay"
    seeds: tuple[int, ...] = (1,)
    sweep: tuple[float, ...] = ()
    # scenario
    density_veh_per_km: float = 60.0
    duration_s: float = 300.0
    mobility_step_s: float = 0.1
    grid_blocks: int = 4
    block_size_m: float = 250.0
    road_width_m: float = 20.0
    blockage_clear_mean_s: float = 20.0
    blockage_min_s: float = 3.0
    blockage_max_s: float = 10.0
    # radio
    carrier_ghz: float = 28.0
    eirp_dbm: float = 23.0
    bandwidth_hz: float = 100e6
    noise_figure_db: float = 9.0
    # control plane
    latency_s: float = 0.030
    message_bits: int = 1000
    # beam
    beam_links: int = 40
    beam_candidates: int = 0
    # mac
    period_slots: int = 100
    subchannels: int = 4
    mac_demand: int = 20
    interference_range_m: float = 150.0
    # relay / overhead
    relay_pairs: int = 40
    relay_rsus: bool = True
    relay_rx_gain_db: float = 18.06
    # rsu
    rsu_active_fraction: float = 0.25
    rsu_attach_snr_db: float = 6.5
    rsu_epoch_s: float = 1.0
    rsu_horizon: int = 5
    rsu_forecast_weight: float = 1.0

    @property
    def sweep_values(self) -> tuple[float, ...]:
        return self.sweep or DEFAULT_SWEEPS[self.experiment]

    def with_experiment(self, experiment: str) -> "ExperimentConfig":
        cfg = replace(self, experiment=experiment)
        validate(cfg)
        return cfg

    def echo(self) -> str:
        """Fully resolved config in the input format."""
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "sweep":
                value = self.sweep_values
            lines.append(f"{f.name} = {_format(value)}")
        return "\n".join(lines) + "\n"


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return "inf" if math.isinf(value) else repr(value)
    return str(value)


_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _parse_value(name: str, raw: str):
    kind = _TYPES[name]
    if kind == "str":
        return raw
    if kind == "bool":
        low = raw.lower()
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    items = [s.strip() for s in raw.split(",") if s.strip()]
    if not items:
        raise ValueError("empty list")
    if kind == "tuple[int, ...]":
        return tuple(int(s) for s in items)
    return tuple(float(s) for s in items)


_POSITIVE = ("density_veh_per_km", "duration_s", "mobility_step_s", "grid_blocks", "block_size_m",
             "road_width_m", "blockage_clear_mean_s", "blockage_min_s", "carrier_ghz", "bandwidth_hz",
             "message_bits", "beam_links", "period_slots", "subchannels", "mac_demand",
             "interference_range_m", "relay_pairs", "rsu_epoch_s", "rsu_horizon")
_NON_NEGATIVE = ("latency_s", "noise_figure_db", "beam_candidates", "rsu_forecast_weight",
                 "relay_rx_gain_db")


def _check(cfg: ExperimentConfig, name: str) -> None:
    v = getattr(cfg, name)
    if name in _POSITIVE and not v > 0:
        raise ValueError(f"{name} must be > 0")
    if name in _NON_NEGATIVE and not v >= 0:
        raise ValueError(f"{name} must be >= 0")
    if name == "experiment" and v not in EXPERIMENTS:
        raise ValueError(f"experiment must be one of {', '.join(EXPERIMENTS)}")
    if name == "density_veh_per_km" and v > 500:
        raise ValueError("density_veh_per_km must be <= 500")
    if name == "blockage_max_s" and not v > cfg.blockage_min_s:
        raise ValueError("blockage_max_s must exceed blockage_min_s")
    if name == "road_width_m" and v >= cfg.block_size_m:
        raise ValueError("road_width_m must be smaller than block_size_m")
    if name == "rsu_active_fraction" and not 0 < v <= 1:
        raise ValueError("rsu_active_fraction must be in (0, 1]")
    if name == "seeds" and any(s < 0 for s in v):
        raise ValueError("seeds must be >= 0")
    if name == "mobility_step_s":
        slots = v / 0.000125
        if abs(slots - round(slots)) > 1e-6:
            raise ValueError("mobility_step_s must be a whole number of 0.125 ms slots")


def validate(cfg: ExperimentConfig, lines: dict[str, int] | None = None) -> None:
    lines = lines or {}
    for f in fields(cfg):
        try:
            _check(cfg, f.name)
        except ValueError as exc:
            raise ConfigError(str(exc), lines.get(f.name, 0)) from None
    if cfg.experiment == "beam" and cfg.beam_candidates:
        too_big = [c for c in cfg.sweep_values if cfg.beam_candidates > c]
        if too_big:
            raise ConfigError("beam_candidates exceeds a codebook cardinality", lines.get("beam_candidates", 0))
    if cfg.experiment == "beam":
        for c in cfg.sweep_values:
            if c != int(c) or c < 4:
                raise ConfigError("beam sweep values must be integer cardinalities >= 4", lines.get("sweep", 0))
    if cfg.experiment == "mac":
        for c in cfg.sweep_values:
            if c != int(c) or c < 1:
                raise ConfigError("mac sweep values must be integer vehicle counts >= 1", lines.get("sweep", 0))
    if cfg.experiment == "rsu":
        for c in cfg.sweep_values:
            if not (math.isinf(c) or (c == int(c) and c >= 0)):
                raise ConfigError("rsu sweep values must be integer capacities or inf", lines.get("sweep", 0))


def parse_config(text: str, experiment: str | None = None) -> ExperimentConfig:
    """Parse config text; ``experiment`` (from the command line) overrides the file."""
    values: dict = {}
    where: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        try:
            values[key] = _parse_value(key, value)
        except ValueError as exc:
            raise ConfigError(f"malformed value for {key!r}: {exc}", lineno) from None
        where[key] = lineno
    if experiment is not None:
        values["experiment"] = experiment
        where.pop("experiment", None)
    cfg = ExperimentConfig(**values)
    validate(cfg, where)
    return cfg
