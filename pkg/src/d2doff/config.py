"""Typed configuration objects and JSON config loading."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field


class ConfigError(Exception):
    """Raised when a configuration file or value is invalid."""


@dataclass(frozen=True)
class ScenarioConfig:
    """Corridor scenario parameters (SI units throughout)."""

    street_length: float = 3000.0          # m
    lane_offset: float = 10.0              # m between the two lane axes
    enb_positions: tuple[float, ...] = (0.0, 600.0, 1200.0, 1800.0, 2400.0, 3000.0)
    enb_antenna_height: float = 10.0       # m
    vehicle_arrival_rate: float = 1.0 / 3.0  # vehicles/s, both ends combined
    speed_min: float = 9.0                 # m/s
    speed_max: float = 24.0                # m/s
    request_rate: float = 0.1              # requests/s per device
    zipf_alpha: float = 1.1
    library_size: int = 10000
    content_timeout: float = 20.0          # s, delay tolerance of a request
    sharing_timeout: float = 600.0         # s, cache retention after receipt
    d2d_max_range: float = 100.0           # m
    i2d_max_range: float = 300.0           # m (cell radius for the energy model)
    control_interval: float = 1.0          # s
    rng_seed: int = 12345

    def validate(self) -> None:
        if not (0.0 < self.speed_min <= self.speed_max):
            raise ConfigError("need 0 < speed_min <= speed_max")
        if not (0.0 < self.content_timeout < self.sharing_timeout):
            raise ConfigError("need 0 < content_timeout < sharing_timeout")
        if not self.d2d_max_range > self.lane_offset:
            raise ConfigError("d2d_max_range must exceed lane_offset")
        for name in ("vehicle_arrival_rate", "request_rate"):
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"{name} must be > 0")
        if self.library_size < 1:
            raise ConfigError("library_size must be >= 1")
        if self.zipf_alpha < 0.0:
            raise ConfigError("zipf_alpha must be >= 0")
        if list(self.enb_positions) != sorted(self.enb_positions):
            raise ConfigError("enb_positions must be sorted ascending")
        if len(self.enb_positions) < 1:
            raise ConfigError("need at least one eNB")
        if self.street_length <= 0.0:
            raise ConfigError("street_length must be > 0")
        if self.control_interval <= 0.0:
            raise ConfigError("control_interval must be > 0")
        if self.i2d_max_range <= 0.0:
            raise ConfigError("i2d_max_range must be > 0")


@dataclass(frozen=True)
class GainModel:
    """Dual-slope log-distance nominal channel gain.

    Path loss in dB at distance r (clamped to ref_distance):
        PL(r) = PL0 + 10 n_near log10(r)                   for r <= breakpoint
        PL(r) = PL(bp) + 10 n_far log10(r / breakpoint)    for r >  breakpoint
    with PL0 = 46.4 + 20 log10(f0 / 5 GHz) + extra_loss_db.
    """

    exp_near: float = 2.2
    exp_far: float = 4.0
    breakpoint: float = 100.0   # m
    extra_loss_db: float = 0.0
    ref_distance: float = 1.0   # m

    def validate(self) -> None:
        if self.breakpoint <= 0.0 or self.ref_distance <= 0.0:
            raise ConfigError("gain model distances must be > 0")


@dataclass(frozen=True)
class PhyConfig:
    """Physical-layer parameters (LTE-like numerology)."""

    center_frequency: float = 2.3e9        # Hz
    subcarrier_bandwidth: float = 15e3     # Hz
    subcarriers_per_prb: int = 12
    prb_bandwidth: float = 180e3           # Hz
    prb_duration: float = 5e-4             # s
    system_bandwidth: float = 10.8e6       # Hz
    noise_psd_dbm_hz: float = -174.0
    noise_figure_db: float = 10.0
    spectral_efficiency: float = 6.0       # bits/s/Hz cap
    fec_rate: float = 0.8
    link_margin_i2d_db: float = 10.0
    link_margin_d2d_db: float = 13.0
    payload_bits: float = 432e3 * 8        # one content
    shadowing_sigma_db: float = 4.0
    shadowing_decorrelation: float = 25.0  # m
    delay_spread: float = 100e-9           # s RMS
    n_taps: int = 6
    harq_attempts: int = 4                 # transmissions per interval
    gain_i2d: GainModel = field(default_factory=GainModel)
    gain_d2d: GainModel = field(default_factory=lambda: GainModel(extra_loss_db=5.0))

    def validate(self) -> None:
        if abs(self.subcarriers_per_prb * self.subcarrier_bandwidth - self.prb_bandwidth) > 1e-6:
            raise ConfigError("subcarriers_per_prb * subcarrier_bandwidth must equal prb_bandwidth")
        if not (0.0 < self.fec_rate <= 1.0):
            raise ConfigError("fec_rate must be in (0, 1]")
        if self.link_margin_i2d_db <= 0.0 or self.link_margin_d2d_db <= 0.0:
            raise ConfigError("link margins must be > 0 dB")
        if self.payload_bits <= 0.0:
            raise ConfigError("payload_bits must be > 0")
        if self.n_taps < 1:
            raise ConfigError("n_taps must be >= 1")
        if self.harq_attempts < 1:
            raise ConfigError("harq_attempts must be >= 1")
        self.gain_i2d.validate()
        self.gain_d2d.validate()

    @property
    def freq_blocks(self) -> int:
        """Number of PRB-wide frequency blocks in the system band."""
        return int(round(self.system_bandwidth / self.prb_bandwidth))


@dataclass(frozen=True)
class RrrmConfig:
    """Radio-resource reuse management parameters."""

    # Max tolerable interference-to-noise ratio between links sharing PRBs.
    gamma_inr_db: float = 3.0

    def validate(self) -> None:
        pass


@dataclass(frozen=True)
class AnalyticConfig:
    """Numerical-integration controls for the analytic model."""

    dr: float = 0.1            # m, distance grid step
    dv: float = 0.01           # m/s, generic speed grid step (cross-checks)
    dva: float = 0.5           # m/s, outer averaging grid over requester speed
    content_bins: int = 48     # log-spaced bins over per-content densities
    provider_speed_bins: int = 8  # sub-intervals of the holder speed law
    same_lane_probability: float = 0.5
    # "region": mean provider count from the reachability half-width
    # 2*(r_max + (v_max - v_a) tau_c); "closing": alternative using
    # (v_max + v_min - 2 v_a) tau_c closing-speed form.
    mean_count_variant: str = "region"

    def validate(self) -> None:
        if self.dr <= 0.0 or self.dv <= 0.0 or self.dva <= 0.0:
            raise ConfigError("grid resolutions must be > 0")
        if self.content_bins < 1:
            raise ConfigError("content_bins must be >= 1")
        if self.provider_speed_bins < 1:
            raise ConfigError("provider_speed_bins must be >= 1")
        if not (0.0 <= self.same_lane_probability <= 1.0):
            raise ConfigError("same_lane_probability must be in [0, 1]")
        if self.mean_count_variant not in ("region", "closing"):
            raise ConfigError("mean_count_variant must be 'region' or 'closing'")


@dataclass(frozen=True)
class Config:
    """Bundle of all configuration sections."""

    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    phy: PhyConfig = field(default_factory=PhyConfig)
    rrrm: RrrmConfig = field(default_factory=RrrmConfig)
    analytic: AnalyticConfig = field(default_factory=AnalyticConfig)

    def validate(self) -> None:
        self.scenario.validate()
        self.phy.validate()
        self.rrrm.validate()
        self.analytic.validate()


_SECTIONS = {
    "scenario": ScenarioConfig,
    "phy": PhyConfig,
    "rrrm": RrrmConfig,
    "analytic": AnalyticConfig,
}


def _build_dataclass(cls, data: dict, where: str):
    names = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in names:
            raise ConfigError(f"{where}: unknown key '{key}'")
        ftype = names[key].type
        if key in ("gain_i2d", "gain_d2d"):
            if not isinstance(value, dict):
                raise ConfigError(f"{where}.{key}: expected an object")
            value = _build_dataclass(GainModel, value, f"{where}.{key}")
        elif key == "enb_positions":
            value = tuple(float(x) for x in value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def config_from_dict(data: dict) -> Config:
    if not isinstance(data, dict):
        raise ConfigError("top-level config must be an object")
    sections = {}
    for key, value in data.items():
        if key not in _SECTIONS:
            raise ConfigError(f"unknown config section '{key}'")
        if not isinstance(value, dict):
            raise ConfigError(f"section '{key}' must be an object")
        sections[key] = _build_dataclass(_SECTIONS[key], value, key)
    cfg = Config(**sections)
    cfg.validate()
    return cfg


def load_config(path: str) -> Config:
    """Load and validate a JSON config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}")
    return config_from_dict(data)


def config_to_dict(cfg: Config) -> dict:
    """Inverse of config_from_dict (round-trippable)."""
    return dataclasses.asdict(cfg)
