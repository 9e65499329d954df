"""Estimator-style wrappers around the localization pipeline.

Both estimators follow the scikit-learn conventions: hyperparameters are
stored verbatim in ``__init__``, ``fit`` builds the scan (beamformer and
trajectory table) from the system configuration and ``predict`` maps echo
snapshots to ``(theta, r)`` rows. ``fit`` ignores its data argument; the
scan design depends only on the configuration.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_positive_int, check_snapshots
from .beamforming import jad_trajectory, synthesize_ttd
from .coarse import coarse_estimate, power_spectrum
from .config import PolarPosition, SystemConfig
from .exceptions import ConfigError
from .music import (
    SearchWindow,
    SmoothingConfig,
    estimate_num_users,
    fuse_and_refine,
    wideband_covariance,
)


class _ScanEstimator(BaseEstimator):
    def _fit_scan(self):
        cfg = self.config if self.config is not None else SystemConfig.desk()
        if not isinstance(cfg, SystemConfig):
            raise ConfigError("config must be a SystemConfig")
        start = self.start if self.start is not None else cfg.region.start
        end = self.end if self.end is not None else cfg.region.end
        self.config_ = cfg
        self.beamformer_ = synthesize_ttd(start, end, cfg)
        self.trajectory_ = jad_trajectory(start, end, cfg)

    def fit(self, X=None, y=None):
        self._fit_scan()
        return self

    def fit_predict(self, X, y=None):
        return self.fit(X).predict(X)

    def predict(self, X):
        check_is_fitted(self, "trajectory_")
        arr = check_snapshots(X, self.config_)
        if arr.ndim == 3:
            return [self._predict_one(a) for a in arr]
        return self._predict_one(arr)

    @staticmethod
    def _as_rows(positions: list[PolarPosition]) -> np.ndarray:
        if not positions:
            return np.empty((0, 2))
        return np.array([[p.theta, p.r] for p in positions])


class PowerPeakLocalizer(_ScanEstimator):
    """Coarse localization: strongest subcarriers mapped through the trajectory."""

    def __init__(self, config=None, start=None, end=None, num_users=1, smooth_window=1):
        self.config = config
        self.start = start
        self.end = end
        self.num_users = num_users
        self.smooth_window = smooth_window

    def _predict_one(self, Y):
        k = check_positive_int(self.num_users, "num_users")
        est = coarse_estimate(
            power_spectrum(Y), self.trajectory_, k, smooth_window=self.smooth_window
        )
        self.coarse_ = est
        return self._as_rows([e.position for e in est])


class SquintLocalizer(_ScanEstimator):
    """Single-scan coarse-to-fine localizer.

    Parameters
    ----------
    config : SystemConfig, optional
        Array and band description; defaults to the desk-scale preset.
    start, end : PolarPosition, optional
        Trajectory endpoints; default to the sensing-region corners.
    num_users : int or None
        Known user count. ``None`` estimates it from the eigenvalues of the
        band-averaged smoothed covariance.
    subarray_size : int or None
        Spatial smoothing subarray length, default ``ceil(N / 2)``.
    delta_m : int
        Half-width of the subcarrier set fused around each coarse peak.
    count_threshold, count_method, noise_floor
        Forwarded to :func:`squintloc.music.estimate_num_users`.
    half_theta_deg, half_r
        Level-0 refinement window; ``half_r=None`` spans the sensing range.

    Attributes set by ``predict``: ``num_users_``, ``coarse_``, ``refined_``.
    """

    def __init__(
        self,
        config=None,
        start=None,
        end=None,
        num_users=1,
        subarray_size=None,
        delta_m=2,
        count_threshold=0.05,
        count_method="ratio",
        noise_floor=None,
        half_theta_deg=1.0,
        half_r=None,
        smooth_window=1,
    ):
        self.config = config
        self.start = start
        self.end = end
        self.num_users = num_users
        self.subarray_size = subarray_size
        self.delta_m = delta_m
        self.count_threshold = count_threshold
        self.count_method = count_method
        self.noise_floor = noise_floor
        self.half_theta_deg = half_theta_deg
        self.half_r = half_r
        self.smooth_window = smooth_window

    def _subarray(self) -> int:
        cfg = self.config_
        ms = self.subarray_size or math.ceil(cfg.num_antennas / 2)
        SmoothingConfig(ms, cfg.num_antennas)
        return ms

    def count_users(self, Y) -> int:
        check_is_fitted(self, "trajectory_")
        Y = check_snapshots(Y, self.config_, allow_batch=False)
        ms = self._subarray()
        lam = np.linalg.eigvalsh(wideband_covariance(Y, ms))[::-1]
        samples = Y.shape[0] * (Y.shape[1] - ms + 1)
        return estimate_num_users(
            lam,
            threshold=self.count_threshold,
            noise_floor=self.noise_floor,
            method=self.count_method,
            num_samples=samples,
        )

    def _predict_one(self, Y):
        k = self.count_users(Y) if self.num_users is None else check_positive_int(self.num_users, "num_users")
        self.num_users_ = k
        if k == 0:
            self.coarse_, self.refined_ = [], []
            return self._as_rows([])
        coarse = coarse_estimate(power_spectrum(Y), self.trajectory_, k, smooth_window=self.smooth_window)
        refined = []
        for c in coarse:
            window = SearchWindow(c.position, half_theta=math.radians(self.half_theta_deg), half_r=self.half_r)
            refined.append(
                fuse_and_refine(
                    Y,
                    c,
                    self.trajectory_,
                    self.config_,
                    signal_dim=k,
                    subarray_size=self._subarray(),
                    delta_m=self.delta_m,
                    window=window,
                )
            )
        self.coarse_, self.refined_ = coarse, refined
        return self._as_rows([r.position for r in refined])
