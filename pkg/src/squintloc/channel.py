"""Near-field geometry, steering vectors and LoS channel vectors."""

from __future__ import annotations

import numpy as np

from .config import SPEED_OF_LIGHT, PolarPosition, SystemConfig


def fresnel_distance(theta, r, n_d, d):
    """Second-order (Fresnel) element-to-user distance.

    Broadcasts over all arguments, so it serves both a single antenna and a
    whole grid of candidate positions.
    """
    x = np.asarray(n_d) * d
    return r - x * np.sin(theta) + x**2 * np.cos(theta) ** 2 / (2 * r)


def exact_distance(theta, r, n_d, d):
    x = np.asarray(n_d) * d
    return np.sqrt(r**2 + x**2 - 2 * r * x * np.sin(theta))


def element_distances(pos: PolarPosition, cfg: SystemConfig, exact: bool = False) -> np.ndarray:
    fn = exact_distance if exact else fresnel_distance
    return fn(pos.theta, pos.r, cfg.antenna_indices(), cfg.element_spacing)


def steering_vector(
    pos: PolarPosition, f: float, cfg: SystemConfig, normalized: bool = True
) -> np.ndarray:
    """Near-field array response ``exp(-j 2 pi f r_n / c)``, optionally / sqrt(N)."""
    a = np.exp(-2j * np.pi * f / SPEED_OF_LIGHT * element_distances(pos, cfg))
    if normalized:
        a /= np.sqrt(cfg.num_antennas)
    return a


def steering_matrix(thetas, ranges, f: float, n_d: np.ndarray, d: float, normalized: bool = True):
    """Steering vectors for many positions at once.

    ``thetas`` and ``ranges`` broadcast against each other; the antenna axis
    is appended last, so the result has shape ``broadcast_shape + (len(n_d),)``.
    """
    th = np.asarray(thetas, dtype=float)[..., None]
    rr = np.asarray(ranges, dtype=float)[..., None]
    x = n_d * d
    # the common range term only contributes a global phase; keep it so the
    # result equals steering_vector() entrywise
    phase = -2 * np.pi * f / SPEED_OF_LIGHT * (rr - x * np.sin(th) + x**2 * np.cos(th) ** 2 / (2 * rr))
    a = np.exp(1j * phase)
    if normalized:
        a /= np.sqrt(len(n_d))
    return a


def path_gain(r: float, f: float) -> float:
    """Free-space amplitude ``c / (4 pi f r)`` (the same coefficient for all elements)."""
    return SPEED_OF_LIGHT / (4 * np.pi * f * r)


def channel_vector(pos: PolarPosition, f: float, cfg: SystemConfig) -> np.ndarray:
    """LoS channel ``sqrt(N) * beta * a`` with ``a`` normalized."""
    beta = path_gain(pos.r, f)
    return np.sqrt(cfg.num_antennas) * beta * steering_vector(pos, f, cfg, normalized=True)


def rayleigh_distance(cfg: SystemConfig) -> float:
    return cfg.rayleigh_distance
