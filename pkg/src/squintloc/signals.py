"""Downlink UE signals and monostatic echo snapshots at the BS array.

Echo model, one snapshot per subcarrier::

    y_m = sum_k g_km * s_k * sqrt(N) * a(theta_k, r_k, f_m) + n_m

where ``a`` is the normalized near-field steering vector,
``g_km = |h_km^H w_m|`` the illumination of user k by the transmit beam and
``n_m ~ CN(0, sigma^2 I)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .beamforming import PsBeamformer, TtdBeamformer
from .channel import fresnel_distance, path_gain
from .config import SPEED_OF_LIGHT, PolarPosition, SensingRegion, SystemConfig
from .exceptions import ConfigError


@dataclass(frozen=True)
class User:
    position: PolarPosition
    amplitude: complex = 1.0 + 0j


@dataclass(frozen=True)
class UserSet:
    """Users seen by the array. May be empty (pure-noise experiments)."""

    users: tuple[User, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))
        seen = set()
        for u in self.users:
            key = (u.position.theta, u.position.r)
            if key in seen:
                raise ConfigError(f"duplicate user position {key}")
            seen.add(key)

    @classmethod
    def from_positions(
        cls, positions: Iterable[PolarPosition], amplitudes: Sequence[complex] | None = None
    ) -> "UserSet":
        positions = list(positions)
        if amplitudes is None:
            amplitudes = [1.0] * len(positions)
        if len(amplitudes) != len(positions):
            raise ConfigError("one amplitude per user required")
        return cls(tuple(User(p, complex(a)) for p, a in zip(positions, amplitudes)))

    def __len__(self) -> int:
        return len(self.users)

    def __iter__(self):
        return iter(self.users)

    @property
    def positions(self) -> list[PolarPosition]:
        return [u.position for u in self.users]

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([u.amplitude for u in self.users], dtype=complex)

    def check_inside(self, region: SensingRegion) -> None:
        for u in self.users:
            if not region.contains(u.position):
                raise ConfigError(f"user at {u.position} lies outside the sensing region")


@dataclass
class SnapshotSet:
    """Received data for one scan: BS echo vectors and per-user UE scalars."""

    y: np.ndarray  # (M+1, N) echo vectors, one row per subcarrier
    ue: np.ndarray  # (M+1, K) noise-free UE scalars h^H w
    illumination: np.ndarray  # (M+1, K) g_km
    noise_variance: float
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def num_subcarriers(self) -> int:
        return self.y.shape[0]

    @property
    def num_antennas(self) -> int:
        return self.y.shape[1]

    def to_csv(self, path: str | Path) -> None:
        """Write echo vectors as ``m, re_0, im_0, re_1, im_1, ...`` rows."""
        N = self.num_antennas
        header = ["m"] + [f"{p}_{n}" for n in range(N) for p in ("re", "im")]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh)
            wr.writerow(header)
            for m, row in enumerate(self.y):
                pairs = np.column_stack([row.real, row.imag]).ravel()
                wr.writerow([m] + [repr(float(v)) for v in pairs])

    @staticmethod
    def read_csv(path: str | Path) -> np.ndarray:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        ri = data[:, 1:]
        return ri[:, 0::2] + 1j * ri[:, 1::2]

    def save_npy(self, path: str | Path) -> None:
        """Binary variant: float64 array of shape (M+1, 2N) with re/im interleaved."""
        out = np.empty((self.y.shape[0], 2 * self.y.shape[1]))
        out[:, 0::2] = self.y.real
        out[:, 1::2] = self.y.imag
        np.save(path, out)

    @staticmethod
    def load_npy(path: str | Path) -> np.ndarray:
        arr = np.load(path)
        return arr[:, 0::2] + 1j * arr[:, 1::2]


def _steering_all_subcarriers(pos: PolarPosition, cfg: SystemConfig) -> np.ndarray:
    """Normalized steering vectors at every subcarrier, shape (M+1, N)."""
    dist = fresnel_distance(pos.theta, pos.r, cfg.antenna_indices(), cfg.element_spacing)
    f = cfg.subcarrier_freqs()[:, None]
    return np.exp(-2j * np.pi * f * dist[None, :] / SPEED_OF_LIGHT) / np.sqrt(cfg.num_antennas)


def _weights_all(w, cfg: SystemConfig) -> np.ndarray:
    if isinstance(w, TtdBeamformer):
        return w.weight_matrix(cfg)
    if isinstance(w, PsBeamformer):
        return np.broadcast_to(w.weights(), (cfg.num_subcarriers, cfg.num_antennas))
    w = np.asarray(w)
    if w.shape == (cfg.num_antennas,):
        return np.broadcast_to(w, (cfg.num_subcarriers, cfg.num_antennas))
    if w.shape != (cfg.num_subcarriers, cfg.num_antennas):
        raise ConfigError(f"weights of shape {w.shape} do not match the config")
    return w


def ue_signals(users: UserSet, w, cfg: SystemConfig) -> np.ndarray:
    """Noise-free ``h_km^H w_m`` for all subcarriers and users, shape (M+1, K)."""
    W = _weights_all(w, cfg)
    f = cfg.subcarrier_freqs()
    out = np.empty((cfg.num_subcarriers, len(users)), dtype=complex)
    for k, u in enumerate(users):
        A = _steering_all_subcarriers(u.position, cfg)
        h_scale = np.sqrt(cfg.num_antennas) * path_gain(u.position.r, f)
        out[:, k] = h_scale * np.sum(A.conj() * W, axis=1)
    return out


def ue_received_scalar(
    user: PolarPosition,
    m: int,
    w,
    cfg: SystemConfig,
    noise_variance: float = 0.0,
    rng: np.random.Generator | None = None,
) -> complex:
    """Received pilot at a UE on subcarrier ``m`` (all-one pilot)."""
    f = cfg.subcarrier_freq(m)
    W = _weights_all(w, cfg)
    dist = fresnel_distance(user.theta, user.r, cfg.antenna_indices(), cfg.element_spacing)
    a = np.exp(-2j * np.pi * f * dist / SPEED_OF_LIGHT) / np.sqrt(cfg.num_antennas)
    y = np.sqrt(cfg.num_antennas) * path_gain(user.r, f) * np.vdot(a, W[m])
    if noise_variance > 0:
        rng = np.random.default_rng() if rng is None else rng
        y += np.sqrt(noise_variance / 2) * (rng.standard_normal() + 1j * rng.standard_normal())
    return complex(y)


def illumination_gains(users: UserSet, w, cfg: SystemConfig, round_trip: bool = False) -> np.ndarray:
    """``g_km = |h_km^H w_m|``; with ``round_trip`` the return leg's path gain is applied too."""
    g = np.abs(ue_signals(users, w, cfg))
    if round_trip:
        f = cfg.subcarrier_freqs()
        for k, u in enumerate(users):
            g[:, k] *= path_gain(u.position.r, f)
    return g


def complex_noise(rng: np.random.Generator, shape, variance: float) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with E|n|^2 = variance."""
    scale = np.sqrt(variance / 2)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def echo_snapshots(
    users: UserSet,
    w,
    cfg: SystemConfig,
    seed: int | np.random.SeedSequence | None = None,
    noise_variance: float | None = None,
    round_trip: bool = False,
) -> SnapshotSet:
    """Simulate one scan. ``noise_variance`` defaults to ``cfg.noise_variance``."""
    sigma2 = cfg.noise_variance if noise_variance is None else float(noise_variance)
    if sigma2 < 0:
        raise ConfigError("noise variance must be nonnegative")
    N = cfg.num_antennas
    ue = ue_signals(users, w, cfg)
    g = np.abs(ue)
    if round_trip:
        f = cfg.subcarrier_freqs()
        for k, u in enumerate(users):
            g[:, k] *= path_gain(u.position.r, f)
    y = np.zeros((cfg.num_subcarriers, N), dtype=complex)
    for k, u in enumerate(users):
        A = _steering_all_subcarriers(u.position, cfg)
        y += (g[:, k] * u.amplitude * np.sqrt(N))[:, None] * A
    seed_int = seed if isinstance(seed, (int, np.integer)) else None
    if sigma2 > 0:
        rng = np.random.default_rng(seed)
        y = y + complex_noise(rng, y.shape, sigma2)
    return SnapshotSet(y, ue, g, sigma2, seed_int, {"round_trip": round_trip})


def snr_to_sigma(
    snr_db: float,
    users: UserSet,
    w,
    cfg: SystemConfig,
    num_snapshots: int = 1,
    round_trip: bool = False,
) -> float:
    """Noise variance realizing ``SNR = sum_l |s_l|^2 / (N sigma^2)`` at the peak subcarrier.

    The effective per-element amplitude of user k is ``g_km * |s_k|`` at its
    best-illuminated subcarrier. With several users the weakest one is the
    reference, so every user sees at least the requested SNR.
    """
    if not np.isfinite(snr_db):
        raise ConfigError("snr_db must be finite")
    if len(users) == 0:
        raise ConfigError("need at least one user to reference the SNR")
    g = illumination_gains(users, w, cfg, round_trip=round_trip)
    peak_amp = g.max(axis=0) * np.abs(users.amplitudes)
    s2 = float(np.min(peak_amp) ** 2)
    snr = 10.0 ** (snr_db / 10.0)
    return num_snapshots * s2 / (cfg.num_antennas * snr)


def effective_snr(snr_db: float, num_antennas: int, num_snapshots: int = 1) -> float:
    """Per-element, per-snapshot ``|s|^2 / sigma^2`` implied by an array SNR in dB."""
    return num_antennas * 10.0 ** (snr_db / 10.0) / num_snapshots
