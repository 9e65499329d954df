"""Input checks shared by the estimators (sklearn's check_array rejects complex data)."""

from __future__ import annotations

import numpy as np

from .config import SystemConfig
from .exceptions import ConfigError
from .signals import SnapshotSet


def check_snapshots(X, cfg: SystemConfig | None = None, allow_batch: bool = True) -> np.ndarray:
    """Return ``X`` as a complex array of shape (M+1, N) or (batch, M+1, N)."""
    if isinstance(X, SnapshotSet):
        X = X.y
    elif isinstance(X, (list, tuple)) and X and isinstance(X[0], SnapshotSet):
        X = np.stack([s.y for s in X])
    arr = np.asarray(X)
    if arr.dtype == object or not np.issubdtype(arr.dtype, np.number):
        raise ConfigError(f"snapshots must be numeric, got dtype {arr.dtype}")
    arr = arr.astype(complex, copy=False)
    if arr.ndim not in ((2, 3) if allow_batch else (2,)):
        raise ConfigError(f"snapshots must be 2-D (subcarriers x antennas), got shape {arr.shape}")
    if arr.size == 0:
        raise ConfigError("empty snapshot array")
    if not np.all(np.isfinite(arr)):
        raise ConfigError("snapshots contain NaN or inf")
    if cfg is not None and arr.shape[-2:] != (cfg.num_subcarriers, cfg.num_antennas):
        raise ConfigError(
            f"snapshot shape {arr.shape[-2:]} does not match "
            f"({cfg.num_subcarriers}, {cfg.num_antennas}) from the config"
        )
    return arr


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < minimum:
        raise ConfigError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)
