"""Fisher information and Cramer-Rao bounds for joint (theta, r) estimation.

Model: ``y_l = a(theta, r) s_l + n_l`` with unit-modulus steering entries
``a_n = exp(j Phi_n)`` and

    Phi_n = -(2 pi f / c) (r - x_n sin(theta) + x_n^2 cos^2(theta) / (2 r)),  x_n = n_d d.

``snr_eff`` is the per-element ratio ``|s|^2 / sigma^2``; see
:func:`squintloc.signals.effective_snr` for the conversion from an array SNR
in dB.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .config import SPEED_OF_LIGHT, PolarPosition, SystemConfig
from .exceptions import ConfigError, DegenerateGeometry
from .signals import effective_snr


def phase(pos: PolarPosition, n_d, cfg: SystemConfig, f: float | None = None) -> np.ndarray:
    f = cfg.carrier_freq if f is None else f
    x = np.asarray(n_d, dtype=float) * cfg.element_spacing
    th, r = pos.theta, pos.r
    return -2 * np.pi * f / SPEED_OF_LIGHT * (r - x * np.sin(th) + x**2 * np.cos(th) ** 2 / (2 * r))


def phase_derivatives(
    pos: PolarPosition, n_d, cfg: SystemConfig, f: float | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """``(dPhi/dtheta, dPhi/dr)`` per antenna, evaluated at ``f`` (default the carrier)."""
    if pos.r <= 0:
        raise ConfigError("range must be positive")
    if abs(np.cos(pos.theta)) < 1e-12:
        raise DegenerateGeometry("endfire direction")
    f = cfg.carrier_freq if f is None else f
    k = 2 * np.pi * f / SPEED_OF_LIGHT
    x = np.asarray(n_d, dtype=float) * cfg.element_spacing
    th, r = pos.theta, pos.r
    d_theta = k * (x * np.cos(th) + x**2 * np.sin(2 * th) / (2 * r))
    d_r = -k * (1 - x**2 * np.cos(th) ** 2 / (2 * r**2))
    return d_theta, d_r


@dataclass(frozen=True)
class FisherInfo:
    matrix: np.ndarray  # 2x2, order (theta, r)
    position: PolarPosition
    snr_eff: float
    num_snapshots: int

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.matrix))


@dataclass(frozen=True)
class CrlbValues:
    crlb_theta: float  # rad^2
    crlb_r: float  # m^2

    @property
    def rmse_theta(self) -> float:
        return float(np.sqrt(self.crlb_theta))

    @property
    def rmse_theta_deg(self) -> float:
        return float(np.degrees(np.sqrt(self.crlb_theta)))

    @property
    def rmse_r(self) -> float:
        return float(np.sqrt(self.crlb_r))


def steering_derivatives(pos: PolarPosition, cfg: SystemConfig, f: float | None = None):
    n_d = cfg.antenna_indices()
    a = np.exp(1j * phase(pos, n_d, cfg, f))
    p_th, p_r = phase_derivatives(pos, n_d, cfg, f)
    return 1j * p_th * a, 1j * p_r * a


def fisher_matrix(
    pos: PolarPosition,
    snr_eff: float,
    num_snapshots: int,
    cfg: SystemConfig,
    f: float | None = None,
    unknown_gain: bool = False,
) -> FisherInfo:
    """2x2 Fisher information for (theta, r).

    By default the echo amplitude and phase are treated as known. With
    ``unknown_gain`` they are nuisance parameters: the derivatives are
    projected onto the complement of the steering vector, which removes the
    information carried by the common phase term.
    """
    if not snr_eff > 0:
        raise ConfigError("snr_eff must be positive")
    if num_snapshots < 1:
        raise ConfigError("need at least one snapshot")
    if unknown_gain:
        # with unit-modulus entries, projecting j*dPhi*a off a just centers dPhi;
        # the -k constant of dPhi/dr is removed first to avoid cancellation
        p_th, p_r = phase_derivatives(pos, cfg.antenna_indices(), cfg, f)
        p_r = p_r + 2 * np.pi * (cfg.carrier_freq if f is None else f) / SPEED_OF_LIGHT
        P = np.stack([p_th - p_th.mean(), p_r - p_r.mean()])
        J = 2 * snr_eff * num_snapshots * (P @ P.T)
    else:
        D = np.stack(steering_derivatives(pos, cfg, f))
        J = 2 * snr_eff * num_snapshots * np.real(D.conj() @ D.T)
    J = 0.5 * (J + J.T)
    a, b, c = J[0, 0], J[0, 1], J[1, 1]
    if a * c - b * b <= 1e-12 * a * c:
        raise DegenerateGeometry("Fisher information is singular at this position")
    return FisherInfo(J, pos, float(snr_eff), int(num_snapshots))


def crlb(
    pos: PolarPosition,
    snr_eff: float,
    num_snapshots: int,
    cfg: SystemConfig,
    f: float | None = None,
    unknown_gain: bool = False,
) -> CrlbValues:
    J = fisher_matrix(pos, snr_eff, num_snapshots, cfg, f, unknown_gain).matrix
    a, b, c = J[0, 0], J[0, 1], J[1, 1]
    det = a * c - b * b
    return CrlbValues(float(c / det), float(a / det))


def scan_crlb(
    pos: PolarPosition,
    amplitudes: np.ndarray,
    freqs: np.ndarray,
    noise_variance: float,
    cfg: SystemConfig,
    unknown_gain: bool = False,
) -> CrlbValues:
    """Bound for snapshots taken at several frequencies with their own amplitudes.

    ``amplitudes[l]`` is the per-element echo amplitude on frequency
    ``freqs[l]``; the Fisher matrices of the independent snapshots add.
    ``unknown_gain`` gives each snapshot its own unknown complex gain.
    """
    amplitudes = np.atleast_1d(np.asarray(amplitudes, dtype=float))
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    if amplitudes.shape != freqs.shape or amplitudes.size == 0:
        raise ConfigError("one amplitude per frequency required")
    if not noise_variance > 0:
        raise ConfigError("noise variance must be positive")
    J = np.zeros((2, 2))
    for amp, f in zip(amplitudes, freqs):
        if amp > 0:
            J += fisher_matrix(pos, amp**2 / noise_variance, 1, cfg, f, unknown_gain).matrix
    a, b, c = J[0, 0], J[0, 1], J[1, 1]
    det = a * c - b * b
    if not det > 1e-12 * a * c:
        raise DegenerateGeometry("Fisher information is singular at this position")
    return CrlbValues(float(c / det), float(a / det))


def crlb_curve(
    pos: PolarPosition,
    snr_db: Iterable[float],
    cfg: SystemConfig,
    num_snapshots: int = 1,
    unknown_gain: bool = False,
) -> list[tuple[float, CrlbValues]]:
    """Bounds over an SNR grid using the simulator's SNR convention."""
    out = []
    for s in snr_db:
        eff = effective_snr(float(s), cfg.num_antennas, num_snapshots)
        out.append((float(s), crlb(pos, eff, num_snapshots, cfg, unknown_gain=unknown_gain)))
    return out


def write_crlb_csv(path: str | Path, curve: list[tuple[float, CrlbValues]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(["snr_db", "sqrt_crlb_theta_deg", "sqrt_crlb_r_m"])
        for s, v in curve:
            wr.writerow([repr(s), repr(v.rmse_theta_deg), repr(v.rmse_r)])
