"""System configuration, polar positions and config-file loading.

Angles are radians everywhere inside the package. Configuration files and the
CLI speak degrees; conversion happens only in :func:`config_from_dict` /
:func:`config_to_dict` and in the CLI layer.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from .exceptions import ConfigError

SPEED_OF_LIGHT = 299_792_458.0


class FarFieldWarning(UserWarning):
    """Sensing region extends beyond the Rayleigh distance."""


@dataclass(frozen=True)
class PolarPosition:
    """A point in the array's polar frame: angle from broadside and range."""

    theta: float
    r: float

    def __post_init__(self):
        if not (self.r > 0 and math.isfinite(self.r)):
            raise ConfigError(f"range must be positive and finite, got {self.r}")
        if not (-math.pi / 2 < self.theta < math.pi / 2):
            raise ConfigError(f"angle must lie in (-pi/2, pi/2), got {self.theta}")

    @classmethod
    def from_degrees(cls, theta_deg: float, r: float) -> "PolarPosition":
        return cls(math.radians(theta_deg), float(r))

    @property
    def theta_deg(self) -> float:
        return math.degrees(self.theta)

    def as_array(self) -> np.ndarray:
        return np.array([self.theta, self.r])


@dataclass(frozen=True)
class SensingRegion:
    theta_min: float
    theta_max: float
    r_min: float
    r_max: float

    def __post_init__(self):
        if not (-math.pi / 2 < self.theta_min < self.theta_max < math.pi / 2):
            raise ConfigError("need -pi/2 < theta_min < theta_max < pi/2")
        if not (0 < self.r_min < self.r_max):
            raise ConfigError("need 0 < r_min < r_max")

    def contains(self, pos: PolarPosition, tol: float = 1e-12) -> bool:
        return (
            self.theta_min - tol <= pos.theta <= self.theta_max + tol
            and self.r_min - tol <= pos.r <= self.r_max + tol
        )

    @property
    def start(self) -> PolarPosition:
        return PolarPosition(self.theta_min, self.r_min)

    @property
    def end(self) -> PolarPosition:
        return PolarPosition(self.theta_max, self.r_max)


@dataclass(frozen=True)
class SystemConfig:
    """Array geometry, OFDM grid and sensing region.

    ``num_subcarriers`` counts subcarriers ``m = 0..M`` so it equals ``M + 1``.
    ``element_spacing=None`` means half a wavelength at the carrier.
    """

    num_antennas: int = 256
    carrier_freq: float = 60e9
    bandwidth: float = 3e9
    num_subcarriers: int = 2049
    element_spacing: float | None = None
    noise_variance: float = 0.0
    region: SensingRegion = field(
        default_factory=lambda: SensingRegion(
            math.radians(-60.0), math.radians(60.0), 15.0, 50.0
        )
    )

    def __post_init__(self):
        if self.element_spacing is None:
            object.__setattr__(self, "element_spacing", self.wavelength / 2)
        if self.num_antennas < 2:
            raise ConfigError("num_antennas must be >= 2")
        if self.num_subcarriers < 2:
            raise ConfigError("num_subcarriers must be >= 2 (M >= 1)")
        if not self.element_spacing > 0:
            raise ConfigError("element_spacing must be positive")
        if not self.bandwidth > 0:
            raise ConfigError("bandwidth must be positive")
        if not self.carrier_freq > self.bandwidth / 2:
            raise ConfigError("carrier_freq must exceed bandwidth / 2")
        if self.noise_variance < 0:
            raise ConfigError("noise_variance must be nonnegative")
        if self.region.r_max > self.rayleigh_distance:
            warnings.warn(
                f"r_max={self.region.r_max:g} m exceeds the Rayleigh distance "
                f"{self.rayleigh_distance:.3g} m",
                FarFieldWarning,
                stacklevel=3,
            )

    # presets ---------------------------------------------------------------

    @classmethod
    def full(cls, **overrides) -> "SystemConfig":
        """256 antennas, 60 GHz carrier, 3 GHz over 2048 subcarrier spacings."""
        return cls(**overrides)

    @classmethod
    def desk(cls, **overrides) -> "SystemConfig":
        """Reduced-size variant for fast Monte Carlo runs (N=64, M=256)."""
        kw = dict(num_antennas=64, num_subcarriers=257)
        kw.update(overrides)
        return cls(**kw)

    # derived quantities ----------------------------------------------------

    @property
    def M(self) -> int:
        return self.num_subcarriers - 1

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq

    @property
    def f0(self) -> float:
        return self.carrier_freq - self.bandwidth / 2

    @property
    def fM(self) -> float:
        return self.f0 + self.bandwidth

    @property
    def aperture(self) -> float:
        return (self.num_antennas - 1) * self.element_spacing

    @property
    def rayleigh_distance(self) -> float:
        return 2 * self.aperture**2 / self.wavelength

    def baseband_freqs(self) -> np.ndarray:
        """``m * W / M`` for m = 0..M; the last entry is exactly ``W``."""
        m = np.arange(self.num_subcarriers)
        ft = m * (self.bandwidth / self.M)
        ft[-1] = self.bandwidth
        return ft

    def subcarrier_freqs(self) -> np.ndarray:
        return self.f0 + self.baseband_freqs()

    def subcarrier_freq(self, m: int) -> float:
        if not 0 <= m <= self.M:
            raise IndexError(f"subcarrier {m} outside 0..{self.M}")
        return float(self.subcarrier_freqs()[m])

    def antenna_indices(self) -> np.ndarray:
        """Centered indices n - (N-1)/2; half-integers when N is even."""
        return np.arange(self.num_antennas) - (self.num_antennas - 1) / 2

    def replace(self, **changes) -> "SystemConfig":
        kw = config_to_kwargs(self)
        kw.update(changes)
        return SystemConfig(**kw)


def config_to_kwargs(cfg: SystemConfig) -> dict[str, Any]:
    return dict(
        num_antennas=cfg.num_antennas,
        carrier_freq=cfg.carrier_freq,
        bandwidth=cfg.bandwidth,
        num_subcarriers=cfg.num_subcarriers,
        element_spacing=cfg.element_spacing,
        noise_variance=cfg.noise_variance,
        region=cfg.region,
    )


_REGION_KEYS = ("theta_min", "theta_max", "r_min", "r_max")
_CONFIG_KEYS = (
    "num_antennas",
    "carrier_freq",
    "bandwidth",
    "num_subcarriers",
    "element_spacing",
    "noise_variance",
    "sensing_region",
)


def config_from_dict(data: Mapping[str, Any]) -> SystemConfig:
    """Build a :class:`SystemConfig` from file-style keys (angles in degrees)."""
    unknown = set(data) - set(_CONFIG_KEYS) - {"preset"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    preset = data.get("preset", "full")
    if preset not in ("full", "desk"):
        raise ConfigError(f"unknown preset {preset!r}")
    base = config_to_kwargs(SystemConfig.desk() if preset == "desk" else SystemConfig.full())
    if data.get("element_spacing") is None:
        base["element_spacing"] = None
    for key in _CONFIG_KEYS[:-1]:
        if key in data and data[key] is not None:
            base[key] = data[key]
    try:
        base["num_antennas"] = int(base["num_antennas"])
        base["num_subcarriers"] = int(base["num_subcarriers"])
        for key in ("carrier_freq", "bandwidth", "noise_variance"):
            base[key] = float(base[key])
        if base["element_spacing"] is not None:
            base["element_spacing"] = float(base["element_spacing"])
        reg = data.get("sensing_region")
        if reg is not None:
            missing = [k for k in _REGION_KEYS if k not in reg]
            if missing:
                raise ConfigError(f"sensing_region missing keys: {missing}")
            base["region"] = SensingRegion(
                math.radians(float(reg["theta_min"])),
                math.radians(float(reg["theta_max"])),
                float(reg["r_min"]),
                float(reg["r_max"]),
            )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    return SystemConfig(**base)


def config_to_dict(cfg: SystemConfig) -> dict[str, Any]:
    reg = cfg.region
    return {
        "num_antennas": cfg.num_antennas,
        "carrier_freq": cfg.carrier_freq,
        "bandwidth": cfg.bandwidth,
        "num_subcarriers": cfg.num_subcarriers,
        "element_spacing": cfg.element_spacing,
        "noise_variance": cfg.noise_variance,
        "sensing_region": {
            "theta_min": math.degrees(reg.theta_min),
            "theta_max": math.degrees(reg.theta_max),
            "r_min": reg.r_min,
            "r_max": reg.r_max,
        },
    }


def read_structured(path: str | Path) -> Any:
    """Read a YAML or JSON file (JSON is accepted by the YAML parser too)."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc


def load_config(path: str | Path) -> SystemConfig:
    data = read_structured(path)
    if not isinstance(data, Mapping):
        raise ConfigError(f"{path}: expected a mapping at top level")
    return config_from_dict(data)


def config_hash(cfg: SystemConfig) -> str:
    blob = json.dumps(config_to_dict(cfg), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
