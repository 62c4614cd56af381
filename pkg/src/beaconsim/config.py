"""Scenario configuration: typed sections, YAML round-trip, dotted overrides.

Every radio/dimensioning default below is a named key so experiments can
sweep or override it from the CLI (``--set section.key=value``).
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from typing import Any

import yaml


class ConfigError(ValueError):
    """Raised for unknown keys, bad values, or malformed config files."""


@dataclass
class DeploymentConfig:
    isd_m: float = 24.0              # inter-site distance of the TRP grid
    trps_per_side: int = 6           # square grid; world side = isd_m * trps_per_side
    n_users: int = 1500
    grouped: bool = False            # True: users deploy as co-moving clusters
    group_size: int = 3
    group_radius_m: float = 5.0      # members placed in a disc around the cluster head
    speed_kmh: float = 30.0
    direction_change_mean_s: float = 5.0

    @property
    def world_m(self) -> float:
        return self.isd_m * self.trps_per_side

    @property
    def speed_mps(self) -> float:
        return self.speed_kmh / 3.6


@dataclass
class DimensioningConfig:
    system_bandwidth_hz: float = 100e6
    seq_subcarrier_spacing_hz: float = 240e3
    n_berb: int = 53                 # beacon resource blocks per occasion
    n_roots: int = 6                 # root sequences
    n_shifts: int = 2                # cyclic shifts per root
    t_scp_us: float = 0.35
    n_scp: int = 86
    t_seq_us: float = 4.17
    n_seq: int = 1024
    t_sgt_us: float = 0.22
    n_sgt: int = 54
    occasions_per_second: int = 5
    max_beacon_rate_hz: float = 5.0


@dataclass
class DetectionConfig:
    n_antennas: int = 1
    search_window: int = 1           # detection search window length D
    target_false_alarm: float = 0.01
    threshold: float | None = None   # detection threshold; None -> calibrated from target_false_alarm
    sequence_length: int = 7         # usable sequence samples / subcarriers per block
    beacon_range_m: float = 32.9
    noise_mode: str = "paper"        # "paper": use noise_power_dbm; "derived": kT*NF*B_seq
    noise_power_dbm: float = -72.74
    noise_figure_db: float = 9.0
    temperature_k: float = 290.0


@dataclass
class ChannelConfig:
    carrier_frequency_hz: float = 3.5e9
    trp_height_m: float = 10.0
    ue_height_m: float = 1.5
    sigma_sf_los_db: float = 3.0
    sigma_sf_nlos_db: float = 4.0
    shadow_correlation_m: float = 10.0   # decorrelation distance for the wrong-cell study
    los_model: str = "distance_probabilistic"  # or "always_los"
    path_loss_model: str = "umi"         # or "log_distance"
    log_distance_ref_db: float = 46.0    # log-distance model: loss at 1 m
    log_distance_exponent: float = 3.0
    tx_power_dbm: float = 15.0


@dataclass
class ProtocolConfig:
    miss_limit: int = 4              # consecutive missed group beacons before a member leaves
    track_window: int = 5            # observation periods required to identify co-movement
    identify_radius_m: float = 15.0  # pairwise estimated-distance bound for grouping
    rotation_period_s: float = 10.0
    trps_per_gnb_side: int = 2       # gNB = square block of TRPs
    handover_hysteresis: int = 2     # consecutive occasions favouring a new gNB
    identification: bool = True      # run group identification / re-formation


@dataclass
class AllocatorConfig:
    reuse_enabled: bool = True
    reuse_distance_m: float = 20.0
    zone_scale: float = 1.2          # allocation zone side = zone_scale * isd_m
    realloc_period_s: float = 1.0


@dataclass
class RunConfig:
    duration_s: float = 60.0
    warmup_s: float = 5.0
    seed: int = 1
    replications: int = 10


@dataclass
class Scenario:
    deployment: DeploymentConfig = field(default_factory=DeploymentConfig)
    dimensioning: DimensioningConfig = field(default_factory=DimensioningConfig)
    detection: DetectionConfig = field(default_factory=DetectionConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    allocator: AllocatorConfig = field(default_factory=AllocatorConfig)
    run: RunConfig = field(default_factory=RunConfig)

    def validate(self) -> None:
        d = self.deployment
        if d.isd_m <= 0 or d.trps_per_side < 1:
            raise ConfigError("deployment: isd_m and trps_per_side must be positive")
        if d.n_users < 1:
            raise ConfigError("deployment: n_users must be >= 1")
        if d.grouped and d.n_users % d.group_size != 0:
            raise ConfigError(
                f"deployment: group_size {d.group_size} does not divide n_users {d.n_users}"
            )
        m = self.dimensioning
        if m.n_roots < 1 or m.n_shifts < 1 or m.n_berb < 1:
            raise ConfigError("dimensioning: counts must be >= 1")
        if m.occasions_per_second < 1:
            raise ConfigError("dimensioning: occasions_per_second must be >= 1")
        det = self.detection
        if det.n_antennas < 1 or det.search_window < 1:
            raise ConfigError("detection: n_antennas and search_window must be >= 1")
        if not 0.0 < det.target_false_alarm < 1.0:
            raise ConfigError("detection: target_false_alarm must be in (0, 1)")
        if det.sequence_length < 1 or det.beacon_range_m <= 0:
            raise ConfigError("detection: sequence_length >= 1 and beacon_range_m > 0 required")
        if det.noise_mode not in ("paper", "derived"):
            raise ConfigError(f"detection: unknown noise_mode {det.noise_mode!r}")
        ch = self.channel
        if ch.carrier_frequency_hz <= 0:
            raise ConfigError("channel: carrier_frequency_hz must be > 0")
        if ch.sigma_sf_los_db < 0 or ch.sigma_sf_nlos_db < 0:
            raise ConfigError("channel: shadow-fading sigmas must be >= 0")
        if ch.los_model not in ("always_los", "distance_probabilistic"):
            raise ConfigError(f"channel: unknown los_model {ch.los_model!r}")
        if ch.path_loss_model not in ("umi", "log_distance"):
            raise ConfigError(f"channel: unknown path_loss_model {ch.path_loss_model!r}")
        p = self.protocol
        if p.miss_limit < 1 or p.track_window < 1:
            raise ConfigError("protocol: miss_limit and track_window must be >= 1")
        if self.deployment.trps_per_side % p.trps_per_gnb_side != 0:
            raise ConfigError("protocol: trps_per_gnb_side must divide trps_per_side")
        a = self.allocator
        if a.reuse_distance_m <= 0 or a.realloc_period_s <= 0:
            raise ConfigError("allocator: reuse_distance_m and realloc_period_s must be > 0")
        r = self.run
        if r.duration_s <= r.warmup_s:
            raise ConfigError("run: duration_s must exceed warmup_s")
        if r.replications < 1:
            raise ConfigError("run: replications must be >= 1")


_SECTIONS = {f.name: f.type for f in fields(Scenario)}


def to_dict(scenario: Scenario) -> dict[str, Any]:
    return dataclasses.asdict(scenario)


def from_dict(data: dict[str, Any]) -> Scenario:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping of sections")
    scenario = Scenario()
    for section, values in data.items():
        if not hasattr(scenario, section):
            raise ConfigError(f"unknown config section {section!r}")
        target = getattr(scenario, section)
        if not isinstance(values, dict):
            raise ConfigError(f"section {section!r} must be a mapping")
        known = {f.name: f for f in fields(target)}
        for key, value in values.items():
            if key not in known:
                raise ConfigError(f"unknown config key {section}.{key}")
            setattr(target, key, _coerce(value, getattr(target, key), f"{section}.{key}"))
    scenario.validate()
    return scenario


def _coerce(value: Any, current: Any, where: str) -> Any:
    """Coerce a parsed YAML/CLI value to the type of the default it replaces."""
    if current is None or value is None:
        return value
    if isinstance(current, bool):
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false", "on", "off", "1", "0"):
            return value.lower() in ("true", "on", "1")
        raise ConfigError(f"{where}: expected a boolean, got {value!r}")
    if isinstance(current, int) and not isinstance(current, bool):
        if isinstance(value, int):
            return value
        if isinstance(value, float) and value.is_integer():
            return int(value)
        if isinstance(value, str):
            try:
                return int(value)
            except ValueError as exc:
                raise ConfigError(f"{where}: expected an integer, got {value!r}") from exc
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    if isinstance(current, float):
        if isinstance(value, (int, float)):
            return float(value)
        if isinstance(value, str):
            try:
                return float(value)
            except ValueError as exc:
                raise ConfigError(f"{where}: expected a number, got {value!r}") from exc
    return value


def load(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    return from_dict(data or {})


def dump(scenario: Scenario) -> str:
    return yaml.safe_dump(to_dict(scenario), sort_keys=False)


def save(scenario: Scenario, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump(scenario))


def apply_overrides(scenario: Scenario, overrides: dict[str, Any]) -> Scenario:
    """Apply dotted-path overrides like ``{"deployment.isd_m": 18}`` to a copy."""
    data = to_dict(scenario)
    for path, value in overrides.items():
        parts = path.split(".")
        if len(parts) != 2:
            raise ConfigError(f"override key must be section.field, got {path!r}")
        section, key = parts
        if section not in data:
            raise ConfigError(f"unknown config section {section!r}")
        if key not in data[section]:
            raise ConfigError(f"unknown config key {path}")
        data[section][key] = value
    return from_dict(data)
