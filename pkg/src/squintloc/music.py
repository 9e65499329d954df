"""Stage II: spatial smoothing, noise subspace and local near-field MUSIC.

The per-subcarrier pseudo-spectrum is

    P_m(theta, r) = 1 / (a^H U_n U_n^H a + eps)

with ``a`` the subarray-sized near-field steering vector (centered indices,
phase center at the full-array center). Spectra are kept as log10 values and
fused across subcarriers by averaging the logs, i.e. a geometric mean.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .beamforming import TrajectoryTable
from .coarse import CoarseEstimate
from .config import SPEED_OF_LIGHT, PolarPosition, SensingRegion, SystemConfig
from .exceptions import ConfigError, DecompositionFailure, InvalidSubarray, WindowExhausted

EPS_REL = 1e-12


# ---------------------------------------------------------------------------
# covariance


@dataclass(frozen=True)
class SmoothingConfig:
    subarray_size: int
    num_antennas: int

    def __post_init__(self):
        if not 1 <= self.subarray_size <= self.num_antennas:
            raise InvalidSubarray(
                f"subarray size {self.subarray_size} outside 1..{self.num_antennas}"
            )

    @classmethod
    def default(cls, num_antennas: int) -> "SmoothingConfig":
        return cls(math.ceil(num_antennas / 2), num_antennas)

    @property
    def num_subarrays(self) -> int:
        return self.num_antennas - self.subarray_size + 1

    def check_rank(self, num_sources: int) -> None:
        """Smoothing restores rank ``num_sources`` only if ``K < M_s`` and ``P >= K + 1``."""
        if not num_sources < self.subarray_size:
            raise InvalidSubarray(f"need K < M_s, got K={num_sources}, M_s={self.subarray_size}")
        if self.num_subarrays < num_sources + 1:
            raise InvalidSubarray(
                f"{self.num_subarrays} subarrays cannot restore rank {num_sources}"
            )


def sample_covariance(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y)
    return np.outer(y, y.conj())


def spatial_smooth(y: np.ndarray, subarray_size: int | SmoothingConfig) -> np.ndarray:
    """Average of the outer products of all overlapping length-``M_s`` subvectors."""
    y = np.asarray(y)
    if isinstance(subarray_size, SmoothingConfig):
        subarray_size = subarray_size.subarray_size
    SmoothingConfig(subarray_size, len(y))
    sub = sliding_window_view(y, subarray_size)  # (P, M_s)
    return sub.T @ sub.conj() / sub.shape[0]


def wideband_covariance(Y: np.ndarray, subarray_size: int, rows: Sequence[int] | None = None) -> np.ndarray:
    """Smoothed covariance averaged over subcarriers (used for user counting)."""
    Y = np.asarray(Y)
    if rows is not None:
        Y = Y[np.asarray(rows)]
    SmoothingConfig(subarray_size, Y.shape[1])
    sub = sliding_window_view(Y, subarray_size, axis=1)  # (M+1, P, M_s)
    sub = sub.reshape(-1, subarray_size)
    return sub.T @ sub.conj() / sub.shape[0]


# ---------------------------------------------------------------------------
# eigen-structure


@dataclass(frozen=True)
class SubspaceDecomposition:
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # columns, same order
    signal_dim: int

    @property
    def signal_subspace(self) -> np.ndarray:
        return self.eigenvectors[:, : self.signal_dim]

    @property
    def noise_subspace(self) -> np.ndarray:
        return self.eigenvectors[:, self.signal_dim :]


def decompose(R: np.ndarray, signal_dim: int) -> SubspaceDecomposition:
    R = np.asarray(R)
    n = R.shape[0]
    if R.shape != (n, n):
        raise ConfigError("covariance must be square")
    if not 0 <= signal_dim < n:
        raise ConfigError(f"signal dimension {signal_dim} must be in [0, {n})")
    if not np.all(np.isfinite(R)):
        raise DecompositionFailure("covariance has non-finite entries")
    try:
        lam, E = np.linalg.eigh(0.5 * (R + R.conj().T))
    except np.linalg.LinAlgError as exc:
        raise DecompositionFailure(str(exc)) from exc
    return SubspaceDecomposition(lam[::-1].copy(), E[:, ::-1].copy(), signal_dim)


def estimate_num_users(
    eigenvalues: np.ndarray,
    threshold: float = 0.05,
    noise_floor: float | None = None,
    guard: float = 3.0,
    method: str = "ratio",
    num_samples: int | None = None,
) -> int:
    """Number of significant eigenvalues.

    ``ratio``: count eigenvalues above ``threshold * lambda_max``. In either mode
    an eigenvalue must also exceed ``guard * noise_floor``; the floor defaults
    to the median eigenvalue, which is what makes pure noise report 0.
    ``mdl``: minimum description length with ``num_samples`` snapshots.
    """
    lam = np.sort(np.clip(np.asarray(eigenvalues, dtype=float), 0, None))[::-1]
    if lam.size == 0 or lam[0] <= 0:
        return 0
    floor = float(np.median(lam)) if noise_floor is None else float(noise_floor)
    if lam[0] < guard * floor:
        return 0
    if method == "ratio":
        keep = (lam > threshold * lam[0]) & (lam > guard * floor)
        return int(np.count_nonzero(keep))
    if method == "mdl":
        if num_samples is None:
            raise ConfigError("mdl needs num_samples")
        p = lam.size
        tiny = np.finfo(float).tiny
        scores = []
        for k in range(p):
            tail = np.maximum(lam[k:], tiny)
            geo = np.exp(np.mean(np.log(tail)))
            ari = np.mean(tail)
            ll = -num_samples * (p - k) * np.log(geo / ari)
            scores.append(ll + 0.5 * k * (2 * p - k) * np.log(num_samples))
        return int(np.argmin(scores))
    raise ConfigError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# spectra


def subarray_steering(thetas, ranges, f: float, subarray_size: int, d: float) -> np.ndarray:
    """Normalized subarray steering vectors, shape ``broadcast(thetas, ranges) + (M_s,)``.

    The common range term is omitted: it is a global phase and cancels in
    every quadratic form used here.
    """
    k = np.arange(subarray_size) - (subarray_size - 1) / 2
    x = k * d
    th = np.asarray(thetas, dtype=float)[..., None]
    rr = np.asarray(ranges, dtype=float)[..., None]
    rel = -x * np.sin(th) + x**2 * np.cos(th) ** 2 / (2 * rr)
    return np.exp(-2j * np.pi * f / SPEED_OF_LIGHT * rel) / np.sqrt(subarray_size)


def music_denominator(
    subspace,
    thetas: np.ndarray,
    ranges: np.ndarray,
    f: float,
    cfg: SystemConfig,
    chunk: int = 32,
) -> np.ndarray:
    """``a^H U_n U_n^H a`` on the grid ``thetas x ranges``.

    ``subspace`` is either a :class:`SubspaceDecomposition` or a raw noise
    subspace matrix. With a decomposition the cheaper of the two equivalent
    forms (noise projection or one minus signal projection) is used.
    """
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    ranges = np.atleast_1d(np.asarray(ranges, dtype=float))
    if isinstance(subspace, SubspaceDecomposition):
        ms = subspace.eigenvectors.shape[0]
        use_signal = subspace.signal_dim < ms - subspace.signal_dim
        basis = subspace.signal_subspace if use_signal else subspace.noise_subspace
    else:
        basis = np.asarray(subspace)
        ms = basis.shape[0]
        use_signal = False
    out = np.empty((len(thetas), len(ranges)))
    bc = basis.conj()
    rchunk = max(1, 65536 // (chunk * ms))
    for i in range(0, len(thetas), chunk):
        for j in range(0, len(ranges), rchunk):
            A = subarray_steering(
                thetas[i : i + chunk, None], ranges[None, j : j + rchunk], f, ms, cfg.element_spacing
            )
            proj = np.sum(np.abs(A @ bc) ** 2, axis=-1)
            out[i : i + chunk, j : j + rchunk] = np.clip(1.0 - proj, 0.0, None) if use_signal else proj
    return out


def music_spectrum(
    subspace, thetas: np.ndarray, ranges: np.ndarray, f: float, cfg: SystemConfig
) -> np.ndarray:
    """log10 pseudo-spectrum with a denominator floor of 1e-12 x the grid maximum."""
    den = music_denominator(subspace, thetas, ranges, f, cfg)
    eps = EPS_REL * float(den.max()) if den.max() > 0 else np.finfo(float).tiny
    return -np.log10(den + eps)


def ambiguity_coefficients(true: PolarPosition, other: PolarPosition, d: float) -> tuple[float, float]:
    """Linear and quadratic coefficients of the phase difference in the antenna index.

    Both vanish together only at ``other == true``.
    """
    c1 = d * (math.sin(other.theta) - math.sin(true.theta))
    c2 = d**2 / 2 * (math.cos(true.theta) ** 2 / true.r - math.cos(other.theta) ** 2 / other.r)
    return c1, c2


# ---------------------------------------------------------------------------
# search window and refinement


@dataclass(frozen=True)
class SearchWindow:
    """Local search region around a coarse estimate.

    ``half_r=None`` spans the whole sensing range. Level 0 uses steps
    ``(step_theta, step_r)``; every further level searches +-2 steps of the
    previous level with ``points`` samples per axis.
    """

    center: PolarPosition
    half_theta: float = math.radians(1.0)
    half_r: float | None = None
    step_theta: float = math.radians(0.05)
    step_r: float = 0.1
    target_theta: float = math.radians(0.001)
    target_r: float = 0.001
    points: int = 41

    def __post_init__(self):
        if self.half_theta <= 0 or (self.half_r is not None and self.half_r <= 0):
            raise ConfigError("window half-widths must be positive")
        if self.step_theta <= 0 or self.step_r <= 0 or self.points < 5:
            raise ConfigError("invalid window resolution")

    def level0_grid(self, region: SensingRegion) -> tuple[np.ndarray, np.ndarray]:
        c = self.center
        th_lo = max(c.theta - self.half_theta, region.theta_min)
        th_hi = min(c.theta + self.half_theta, region.theta_max)
        if self.half_r is None:
            r_lo, r_hi = region.r_min, region.r_max
        else:
            r_lo = max(c.r - self.half_r, region.r_min)
            r_hi = min(c.r + self.half_r, region.r_max)
        if th_lo > th_hi or r_lo > r_hi:
            raise WindowExhausted("search window does not intersect the sensing region")
        return _axis(th_lo, th_hi, self.step_theta), _axis(r_lo, r_hi, self.step_r)


def _axis(lo: float, hi: float, step: float) -> np.ndarray:
    n = max(1, int(math.floor((hi - lo) / step + 1e-9)) + 1)
    return lo + step * np.arange(n)


@dataclass
class FusedSpectrum:
    thetas: np.ndarray
    ranges: np.ndarray
    values: np.ndarray  # log10 of the geometric-mean spectrum
    subcarriers: tuple[int, ...]

    def argmax(self) -> tuple[int, int]:
        i, j = np.unravel_index(int(np.argmax(self.values)), self.values.shape)
        return int(i), int(j)

    def peak(self) -> PolarPosition:
        i, j = self.argmax()
        return PolarPosition(float(self.thetas[i]), float(self.ranges[j]))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh)
            wr.writerow(["theta_deg", "r_m", "log10_power"])
            for i, th in enumerate(self.thetas):
                deg = repr(float(np.degrees(th)))
                for j, r in enumerate(self.ranges):
                    wr.writerow([deg, repr(float(r)), repr(float(self.values[i, j]))])


@dataclass
class RefinedEstimate:
    position: PolarPosition
    coarse: CoarseEstimate | None
    spectrum: FusedSpectrum  # level-0 fused spectrum
    levels: int
    extensions: int = 0
    history: list = field(default_factory=list)


def fuse_spectra(spectra: Sequence[np.ndarray], order: Sequence[int] | None = None) -> np.ndarray:
    """Geometric mean of spectra given in log domain: the mean of the logs.

    Summation follows ascending subcarrier index so any permutation of the
    inputs yields bit-identical output.
    """
    if order is None:
        order = range(len(spectra))
    pairs = sorted(zip(order, range(len(spectra))))
    acc = np.zeros_like(np.asarray(spectra[0], dtype=float))
    for _, k in pairs:
        acc = acc + spectra[k]
    return acc / len(spectra)


def subcarrier_set(peak: int, delta_m: int, num_subcarriers: int) -> list[int]:
    lo, hi = max(0, peak - delta_m), min(num_subcarriers - 1, peak + delta_m)
    return list(range(lo, hi + 1))


def subspaces_for(
    Y: np.ndarray, subcarriers: Sequence[int], subarray_size: int, signal_dim: int
) -> list[SubspaceDecomposition]:
    return [decompose(spatial_smooth(Y[m], subarray_size), signal_dim) for m in subcarriers]


def fused_spectrum_on_grid(
    decomps: Sequence[SubspaceDecomposition],
    subcarriers: Sequence[int],
    thetas: np.ndarray,
    ranges: np.ndarray,
    cfg: SystemConfig,
) -> FusedSpectrum:
    freqs = cfg.subcarrier_freqs()
    spectra = [music_spectrum(dec, thetas, ranges, freqs[m], cfg) for dec, m in zip(decomps, subcarriers)]
    return FusedSpectrum(thetas, ranges, fuse_spectra(spectra, subcarriers), tuple(subcarriers))


def _on_free_edge(idx: int, n: int, axis: np.ndarray, lo: float, hi: float) -> int:
    """-1/+1 if the argmax sits on a grid edge that is not a region boundary, else 0."""
    tol = 1e-12 * max(1.0, abs(hi))
    if n > 1 and idx == 0 and axis[0] > lo + tol:
        return -1
    if n > 1 and idx == n - 1 and axis[-1] < hi - tol:
        return 1
    return 0


def fuse_and_refine(
    Y: np.ndarray,
    coarse: CoarseEstimate,
    trajectory: TrajectoryTable | None,
    cfg: SystemConfig,
    *,
    signal_dim: int = 1,
    subarray_size: int | None = None,
    delta_m: int = 2,
    window: SearchWindow | None = None,
    max_extend: int = 40,
) -> RefinedEstimate:
    """Coarse-to-fine MUSIC refinement around one coarse estimate.

    ``trajectory`` is accepted for symmetry with the coarse stage; the window
    center comes from ``coarse.position``. When a level's maximum sits on a
    window edge that is not a region boundary, that axis is doubled in length
    towards the edge (same step) and the level is re-evaluated. The fused
    ridge is sharp in angle but can be nearly flat in range, so the peak of a
    zoomed window may lie well outside it.
    """
    Y = np.asarray(Y)
    ms = subarray_size or math.ceil(cfg.num_antennas / 2)
    SmoothingConfig(ms, cfg.num_antennas).check_rank(signal_dim)
    S = subcarrier_set(coarse.peak_index, delta_m, Y.shape[0])
    decomps = subspaces_for(Y, S, ms, signal_dim)
    if window is None:
        window = SearchWindow(coarse.position)
    region = cfg.region

    thetas, ranges = window.level0_grid(region)
    level0 = None
    extensions = 0
    history = []
    step_th, step_r = window.step_theta, window.step_r
    level = 0
    while True:
        fused = fused_spectrum_on_grid(decomps, S, thetas, ranges, cfg)
        if level0 is None:
            level0 = fused
        i, j = fused.argmax()
        th, r = float(thetas[i]), float(ranges[j])
        history.append((level, th, r))
        edge_t = _on_free_edge(i, len(thetas), thetas, region.theta_min, region.theta_max)
        edge_r = _on_free_edge(j, len(ranges), ranges, region.r_min, region.r_max)
        if edge_t or edge_r:
            if extensions >= max_extend:
                raise WindowExhausted(f"peak still on the window edge after {extensions} extensions")
            extensions += 1
            thetas = _extend(thetas, edge_t, region.theta_min, region.theta_max)
            ranges = _extend(ranges, edge_r, region.r_min, region.r_max)
            continue
        if step_th <= window.target_theta * (1 + 1e-9) and step_r <= window.target_r * (1 + 1e-9):
            break
        level += 1
        half_t, half_r = 2 * step_th, 2 * step_r
        step_th = max(2 * half_t / (window.points - 1), 0.0)
        step_r = max(2 * half_r / (window.points - 1), 0.0)
        thetas = _clip_axis(th + np.linspace(-half_t, half_t, window.points), region.theta_min, region.theta_max)
        ranges = _clip_axis(r + np.linspace(-half_r, half_r, window.points), region.r_min, region.r_max)
    return RefinedEstimate(PolarPosition(th, r), coarse, level0, level + 1, extensions, history)


def _extend(axis: np.ndarray, direction: int, lo: float, hi: float) -> np.ndarray:
    """Append ``len(axis)`` more points past the edge on side ``direction``."""
    if direction == 0 or len(axis) < 2:
        return axis
    step = axis[1] - axis[0]
    k = np.arange(1, len(axis) + 1)
    if direction > 0:
        extra = axis[-1] + k * step
        inside = extra[extra < hi - 1e-12 * max(1.0, abs(hi))]
        # a truncated extension ends exactly on the region boundary
        tail = [hi] if inside.size < extra.size else []
        return np.concatenate([axis, inside, tail])
    extra = axis[0] - k * step
    inside = extra[extra > lo + 1e-12 * max(1.0, abs(lo))]
    head = [lo] if inside.size < extra.size else []
    return np.concatenate([head, inside[::-1], axis])


def _clip_axis(axis: np.ndarray, lo: float, hi: float) -> np.ndarray:
    axis = axis[(axis >= lo - 1e-12) & (axis <= hi + 1e-12)]
    if axis.size == 0:
        raise WindowExhausted("refinement window left the sensing region")
    return np.clip(axis, lo, hi)


def full_region_spectrum(
    Y: np.ndarray,
    subcarriers: Sequence[int],
    cfg: SystemConfig,
    *,
    signal_dim: int = 1,
    subarray_size: int | None = None,
    step_theta: float = math.radians(0.1),
    step_r: float = 0.1,
) -> FusedSpectrum:
    """Fused MUSIC spectrum over the whole sensing region (heatmap output)."""
    ms = subarray_size or math.ceil(cfg.num_antennas / 2)
    reg = cfg.region
    thetas = _axis(reg.theta_min, reg.theta_max, step_theta)
    ranges = _axis(reg.r_min, reg.r_max, step_r)
    decomps = subspaces_for(np.asarray(Y), subcarriers, ms, signal_dim)
    return fused_spectrum_on_grid(decomps, list(subcarriers), thetas, ranges, cfg)
