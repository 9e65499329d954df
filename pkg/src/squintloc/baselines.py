"""Comparison schemes: cascaded two-scan localization and the power-peak estimator."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .beamforming import TrajectoryTable, jad_trajectory, synthesize_ttd
from .coarse import coarse_estimate, power_spectrum
from .config import PolarPosition, SystemConfig
from .exceptions import ConfigError
from .signals import SnapshotSet, UserSet, echo_snapshots

# scans needed for one localization, per method
SCANS_PER_LOCALIZATION = {"proposed": 1, "power_peak": 1, "cbs_low": 2}


@dataclass(frozen=True)
class TwoStepResult:
    theta: float
    r: float
    angle_peak: int
    range_peak: int
    angle_trajectory: TrajectoryTable
    range_trajectory: TrajectoryTable
    scans: int = 2

    @property
    def position(self) -> PolarPosition:
        return PolarPosition(self.theta, self.r)


def reference_range(cfg: SystemConfig) -> float:
    return math.sqrt(cfg.region.r_min * cfg.region.r_max)


def _scan(users, start, end, cfg, seed, noise_variance, round_trip):
    w = synthesize_ttd(start, end, cfg)
    traj = jad_trajectory(start, end, cfg)
    snap = echo_snapshots(users, w, cfg, seed=seed, noise_variance=noise_variance, round_trip=round_trip)
    return traj, snap


def cbs_low_localize(
    users: UserSet,
    cfg: SystemConfig,
    seed: int | np.random.SeedSequence | None = None,
    noise_variance: float | None = None,
    r_ref: float | None = None,
    theta_override: float | None = None,
    round_trip: bool = False,
) -> TwoStepResult:
    """Angle from an angular sweep, then range from a constant-angle radial sweep.

    The two scans draw independent noise (child seeds of ``seed``).
    ``theta_override`` replaces the first scan's estimate, which is useful
    for studying how an angle error propagates into range.
    """
    if len(users) != 1:
        raise ConfigError("the cascaded baseline localizes one user at a time")
    reg = cfg.region
    r_ref = reference_range(cfg) if r_ref is None else float(r_ref)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    s1, s2 = ss.spawn(2)

    traj1, snap1 = _scan(
        users,
        PolarPosition(reg.theta_min, r_ref),
        PolarPosition(reg.theta_max, r_ref),
        cfg,
        s1,
        noise_variance,
        round_trip,
    )
    m1 = coarse_estimate(power_spectrum(snap1), traj1, 1)[0].peak_index
    theta_hat = float(traj1.thetas[m1]) if theta_override is None else float(theta_override)

    traj2, snap2 = _scan(
        users,
        PolarPosition(theta_hat, reg.r_min),
        PolarPosition(theta_hat, reg.r_max),
        cfg,
        s2,
        noise_variance,
        round_trip,
    )
    m2 = coarse_estimate(power_spectrum(snap2), traj2, 1)[0].peak_index
    return TwoStepResult(theta_hat, float(traj2.ranges[m2]), m1, m2, traj1, traj2)


def power_peak_localize(
    snapshots: SnapshotSet | np.ndarray, trajectory: TrajectoryTable, num_users: int = 1
) -> list[PolarPosition]:
    """Coarse stage alone: strongest subcarriers mapped through the trajectory."""
    return [c.position for c in coarse_estimate(power_spectrum(snapshots), trajectory, num_users)]


def quantization_floor(trajectory: TrajectoryTable, mask: np.ndarray | None = None) -> tuple[float, float]:
    """RMSE of rounding a position uniformly distributed along the trajectory to the nearest sample.

    Within a step of length ``delta`` the error is uniform on +-delta/2, so the
    floor per axis is ``sqrt(mean(delta^2) / 12)`` over the intervals selected by
    ``mask`` (a boolean per interval; default all). Returns (theta rad, r m).
    """
    dth, dr = trajectory.steps()
    if mask is not None:
        dth, dr = dth[mask], dr[mask]
    if dth.size == 0:
        raise ConfigError("no trajectory intervals selected")
    # weight intervals by how likely a uniformly placed user falls in them:
    # placement is uniform in subcarrier (trajectory parameter), so equal weights
    return float(np.sqrt(np.mean(dth**2) / 12)), float(np.sqrt(np.mean(dr**2) / 12))
