"""Stage I: subcarrier power spectrum and peak-to-trajectory mapping."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import uniform_filter1d

from .beamforming import TrajectoryTable
from .config import PolarPosition
from .exceptions import ConfigError, TooFewPeaks
from .signals import SnapshotSet


@dataclass(frozen=True)
class CoarseEstimate:
    peak_index: int
    position: PolarPosition
    peak_power: float


def power_spectrum(snapshots, mode: str = "vector", user: int = 0) -> np.ndarray:
    """Per-subcarrier received power.

    ``mode="vector"`` uses the BS echo vectors (``||y_m||^2``); ``mode="scalar"``
    uses the UE-side scalars ``|y_km|^2`` of user ``user``.
    """
    if mode == "vector":
        y = snapshots.y if isinstance(snapshots, SnapshotSet) else np.asarray(snapshots)
        if y.ndim != 2:
            raise ConfigError("expected a (subcarriers, antennas) array")
        return np.sum(np.abs(y) ** 2, axis=1)
    if mode == "scalar":
        ue = snapshots.ue if isinstance(snapshots, SnapshotSet) else np.asarray(snapshots)
        ue = ue.reshape(len(ue), -1)
        return np.abs(ue[:, user]) ** 2
    raise ConfigError(f"unknown power spectrum mode {mode!r}")


def local_maxima(p: np.ndarray) -> np.ndarray:
    """Indices of local maxima; plateaus report their first index, endpoints count."""
    p = np.asarray(p, dtype=float)
    n = len(p)
    # split into runs of equal values
    starts = np.flatnonzero(np.r_[True, p[1:] != p[:-1]])
    ends = np.r_[starts[1:], n] - 1
    out = []
    for i, j in zip(starts, ends):
        if (i == 0 or p[i - 1] < p[i]) and (j == n - 1 or p[j + 1] < p[j]):
            out.append(i)
    return np.array(out, dtype=int)


def find_peaks(p: np.ndarray, k: int, min_gap: int = 1, smooth_window: int = 1) -> list[int]:
    """The ``k`` highest local maxima separated by at least ``min_gap`` indices.

    With ``smooth_window > 1`` candidates are found on a moving average of the
    spectrum and then snapped to the raw maximum within half a window.
    Ties go to the smaller index.
    """
    p = np.asarray(p, dtype=float)
    if k < 1:
        raise ConfigError("need k >= 1")
    if smooth_window > 1:
        ps = uniform_filter1d(p, smooth_window, mode="nearest")
    else:
        ps = p
    cand = local_maxima(ps)
    order = sorted(cand, key=lambda i: (-ps[i], i))
    chosen: list[int] = []
    for i in order:
        if all(abs(i - j) >= min_gap for j in chosen):
            chosen.append(int(i))
            if len(chosen) == k:
                break
    if len(chosen) < k:
        raise TooFewPeaks(f"found {len(chosen)} separated peaks, need {k}")
    if smooth_window > 1:
        h = smooth_window // 2
        snapped = []
        for i in chosen:
            lo, hi = max(0, i - h), min(len(p), i + h + 1)
            snapped.append(lo + int(np.argmax(p[lo:hi])))
        chosen = snapped
    return chosen


def coarse_estimate(
    spectrum: np.ndarray,
    trajectory: TrajectoryTable,
    num_users: int = 1,
    min_gap: int | None = None,
    smooth_window: int = 1,
) -> list[CoarseEstimate]:
    """Map the strongest separated spectrum peaks through the trajectory table.

    ``min_gap`` defaults to ``M // 64`` subcarriers (at least 1). Results are
    ordered by decreasing peak power.
    """
    spectrum = np.asarray(spectrum, dtype=float)
    if len(spectrum) != len(trajectory):
        raise ConfigError("spectrum and trajectory lengths differ")
    if min_gap is None:
        min_gap = max(1, (len(spectrum) - 1) // 64)
    idx = find_peaks(spectrum, num_users, min_gap=min_gap, smooth_window=smooth_window)
    return [CoarseEstimate(m, trajectory[m], float(spectrum[m])) for m in idx]


def write_spectrum_csv(path: str | Path, spectrum: np.ndarray, freqs: np.ndarray) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(["m", "f_hz", "power"])
        for m, (f, p) in enumerate(zip(freqs, spectrum)):
            wr.writerow([m, repr(float(f)), repr(float(p))])
