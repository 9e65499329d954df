"""Phase-shifter and TTD beamformers, array gain, squint and JAD trajectories.

Phases are stored in cycles (the quantity multiplied by 2*pi in the weight
exponent) and delays in seconds. Weights at baseband frequency ``ft`` are::

    w_n = exp(-j 2 pi (phi_n + ft * t_n)) / sqrt(N)
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .channel import fresnel_distance, steering_vector
from .config import SPEED_OF_LIGHT, PolarPosition, SystemConfig
from .exceptions import ConfigError, InfeasibleSquint, InfeasibleTrajectory

C = SPEED_OF_LIGHT


@dataclass(frozen=True)
class PsBeamformer:
    phases: np.ndarray

    @property
    def num_antennas(self) -> int:
        return len(self.phases)

    def weights(self, ft: float = 0.0) -> np.ndarray:
        # frequency-flat by construction
        return np.exp(-2j * np.pi * np.mod(self.phases, 1.0)) / np.sqrt(self.num_antennas)


@dataclass(frozen=True)
class TtdBeamformer:
    phases: np.ndarray
    delays: np.ndarray
    start: PolarPosition | None = None
    end: PolarPosition | None = None

    @property
    def num_antennas(self) -> int:
        return len(self.phases)

    def weights(self, ft: float) -> np.ndarray:
        cycles = np.mod(self.phases + ft * self.delays, 1.0)
        return np.exp(-2j * np.pi * cycles) / np.sqrt(self.num_antennas)

    def weight_matrix(self, cfg: SystemConfig) -> np.ndarray:
        """Weights for every subcarrier, shape ``(M+1, N)``."""
        ft = cfg.baseband_freqs()[:, None]
        cycles = np.mod(self.phases[None, :] + ft * self.delays[None, :], 1.0)
        return np.exp(-2j * np.pi * cycles) / np.sqrt(self.num_antennas)

    def with_delay_offset(self, offset: float) -> "TtdBeamformer":
        return TtdBeamformer(self.phases, self.delays + offset, self.start, self.end)

    # serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        out = {
            "num_antennas": self.num_antennas,
            "phases_cycles": [float(v) for v in self.phases],
            "delays_s": [float(v) for v in self.delays],
        }
        for name, pos in (("start", self.start), ("end", self.end)):
            if pos is not None:
                out[name] = {"theta_deg": pos.theta_deg, "r": pos.r}
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "TtdBeamformer":
        phases = np.asarray(data["phases_cycles"], dtype=float)
        delays = np.asarray(data["delays_s"], dtype=float)
        if phases.shape != delays.shape or phases.ndim != 1:
            raise ConfigError("phases and delays must be equal-length sequences")
        pts = {}
        for name in ("start", "end"):
            if name in data:
                pts[name] = PolarPosition.from_degrees(data[name]["theta_deg"], data[name]["r"])
        return cls(phases, delays, pts.get("start"), pts.get("end"))

    def save(self, path: str | Path) -> None:
        path = Path(path)
        if path.suffix == ".json":
            path.write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")
        else:
            path.write_text(yaml.safe_dump(self.to_dict(), sort_keys=False), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "TtdBeamformer":
        return cls.from_dict(yaml.safe_load(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class TrajectoryTable:
    """Focal point of every subcarrier, ``thetas[m], ranges[m]`` for m = 0..M."""

    thetas: np.ndarray
    ranges: np.ndarray
    freqs: np.ndarray
    start: PolarPosition
    end: PolarPosition

    def __len__(self) -> int:
        return len(self.thetas)

    def __getitem__(self, m: int) -> PolarPosition:
        return PolarPosition(float(self.thetas[m]), float(self.ranges[m]))

    def steps(self) -> tuple[np.ndarray, np.ndarray]:
        return np.diff(self.thetas), np.diff(self.ranges)

    def max_steps(self) -> tuple[float, float]:
        dth, dr = self.steps()
        return float(np.max(np.abs(dth))), float(np.max(np.abs(dr)))

    def to_rows(self):
        for m in range(len(self)):
            yield m, float(self.freqs[m]), float(np.degrees(self.thetas[m])), float(self.ranges[m])


# ---------------------------------------------------------------------------
# beamformer synthesis


def ps_beamformer(target: PolarPosition, cfg: SystemConfig) -> PsBeamformer:
    """Phase-only beam conjugate-matched to ``target`` at the lowest subcarrier."""
    dist = fresnel_distance(target.theta, target.r, cfg.antenna_indices(), cfg.element_spacing)
    return PsBeamformer(cfg.f0 * dist / C)


def synthesize_ttd(start: PolarPosition, end: PolarPosition, cfg: SystemConfig) -> TtdBeamformer:
    """TTD+PS beam focusing ``f_0`` at ``start`` and ``f_M`` at ``end``.

    Both endpoint phase profiles are matched exactly; in between the per-antenna
    phase is linear in frequency, which places the focal points on the JAD
    trajectory. Delays get a common shift so that none is negative.
    """
    jad_trajectory(start, end, cfg)  # feasibility check only
    n_d = cfg.antenna_indices()
    d_s = fresnel_distance(start.theta, start.r, n_d, cfg.element_spacing)
    d_e = fresnel_distance(end.theta, end.r, n_d, cfg.element_spacing)
    phases = cfg.f0 * d_s / C
    delays = (cfg.fM * d_e - cfg.f0 * d_s) / (C * cfg.bandwidth)
    delays = delays + max(0.0, -float(delays.min()))
    return TtdBeamformer(phases, delays, start, end)


# ---------------------------------------------------------------------------
# gain evaluation


def array_gain(pos: PolarPosition, f: float, w: np.ndarray, cfg: SystemConfig) -> float:
    """``|w^H a(pos, f)|`` with the normalized steering vector."""
    a = steering_vector(pos, f, cfg, normalized=True)
    return float(abs(np.vdot(w, a)))


def gain_surface(
    w: np.ndarray,
    f: float,
    thetas: np.ndarray,
    ranges: np.ndarray,
    cfg: SystemConfig,
    chunk: int = 64,
) -> np.ndarray:
    """Array gain of weights ``w`` over a polar grid, shape ``(len(thetas), len(ranges))``.

    The common range term is dropped from the steering phase; it is a global
    phase and dropping it keeps the exponent small.
    """
    thetas = np.asarray(thetas, dtype=float)
    ranges = np.asarray(ranges, dtype=float)
    x = cfg.antenna_indices() * cfg.element_spacing
    k = 2 * np.pi * f / C
    wc = np.conj(w) / np.sqrt(len(x))
    out = np.empty((len(thetas), len(ranges)))
    inv_2r = 1.0 / (2 * ranges)[None, :, None]
    for i in range(0, len(thetas), chunk):
        th = thetas[i : i + chunk, None, None]
        rel = -x * np.sin(th) + x**2 * np.cos(th) ** 2 * inv_2r
        out[i : i + chunk] = np.abs(np.exp(-1j * k * rel) @ wc)
    return out


def g_function(x, y, cfg: SystemConfig):
    """``(1/N) |sum_n exp(j 2 pi (n d)^2 x / c + j 2 pi n d y / c)|`` over the N centered indices."""
    nd = cfg.antenna_indices() * cfg.element_spacing
    x = np.asarray(x, dtype=float)[..., None]
    y = np.asarray(y, dtype=float)[..., None]
    s = np.exp(2j * np.pi * (nd**2 * x + nd * y) / C).sum(axis=-1)
    return np.abs(s) / cfg.num_antennas


def gain_peak(
    w: np.ndarray,
    f: float,
    cfg: SystemConfig,
    thetas: np.ndarray,
    ranges: np.ndarray,
) -> tuple[PolarPosition, float]:
    """Grid argmax of the gain surface (first index on exact ties)."""
    surf = gain_surface(w, f, thetas, ranges, cfg)
    i, j = np.unravel_index(int(np.argmax(surf)), surf.shape)
    return PolarPosition(float(thetas[i]), float(ranges[j])), float(surf[i, j])


def polish_gain_peak(
    w: np.ndarray,
    f: float,
    cfg: SystemConfig,
    center: PolarPosition,
    dtheta: float,
    dr: float,
    levels: int = 3,
    points: int = 41,
) -> tuple[PolarPosition, float]:
    """Zoom-grid refinement of a gain maximum found on a grid of step (dtheta, dr).

    Each level searches +-2 previous steps with ``points`` samples per axis,
    i.e. a 10x zoom for the default 41 points.
    """
    th, r = center.theta, center.r
    gain = array_gain(center, f, w, cfg)
    for _ in range(levels):
        thetas = th + np.linspace(-2 * dtheta, 2 * dtheta, points)
        ranges = r + np.linspace(-2 * dr, 2 * dr, points)
        ranges = ranges[ranges > 0]
        pos, gain = gain_peak(w, f, cfg, thetas, ranges)
        th, r = pos.theta, pos.r
        dtheta, dr = 4 * dtheta / (points - 1), 4 * dr / (points - 1)
    return PolarPosition(th, r), gain


# ---------------------------------------------------------------------------
# analytic focal points


def squint_focal_point(
    design: PolarPosition, f: float, cfg: SystemConfig, design_freq: float | None = None
) -> PolarPosition:
    """Where a phase-only beam designed at ``design_freq`` focuses at ``f``."""
    f_ref = cfg.f0 if design_freq is None else design_freq
    s = f_ref / f * np.sin(design.theta)
    if abs(s) >= 1:
        raise InfeasibleSquint(f"sin(theta) = {s:.6f} outside (-1, 1)")
    if np.cos(design.theta) == 0:
        raise InfeasibleSquint("design angle at endfire")
    theta = float(np.arcsin(s))
    r = design.r * (f / f_ref) * np.cos(theta) ** 2 / np.cos(design.theta) ** 2
    return PolarPosition(theta, float(r))


def trajectory_points(
    start: PolarPosition, end: PolarPosition, ft, cfg: SystemConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Controllable focal points at baseband frequencies ``ft`` (any shape)."""
    ft = np.asarray(ft, dtype=float)
    W, f0 = cfg.bandwidth, cfg.f0
    fm = f0 + ft
    a = (W - ft) * f0 / (W * fm)
    b = (W + f0) * ft / (W * fm)
    s = a * np.sin(start.theta) + b * np.sin(end.theta)
    if np.any(np.abs(s) >= 1):
        raise InfeasibleTrajectory("trajectory angle leaves the visible region")
    theta = np.arcsin(s)
    cos2 = np.cos(theta) ** 2
    inv_r = (a * np.cos(start.theta) ** 2 / start.r + b * np.cos(end.theta) ** 2 / end.r) / cos2
    if np.any(inv_r <= 0):
        raise InfeasibleTrajectory("trajectory range is not positive")
    return theta, 1.0 / inv_r


def jad_trajectory(start: PolarPosition, end: PolarPosition, cfg: SystemConfig) -> TrajectoryTable:
    ft = cfg.baseband_freqs()
    theta, r = trajectory_points(start, end, ft, cfg)
    return TrajectoryTable(theta, r, cfg.subcarrier_freqs(), start, end)
