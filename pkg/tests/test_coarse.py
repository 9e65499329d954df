import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from squintloc.beamforming import trajectory_points
from squintloc.coarse import coarse_estimate, find_peaks, local_maxima, power_spectrum, write_spectrum_csv
from squintloc.config import PolarPosition
from squintloc.exceptions import ConfigError, TooFewPeaks
from squintloc.signals import UserSet, echo_snapshots

from .conftest import deg


def brute_top_k(p, k, gap):
    """Reference: scan all local maxima by height, keep those at least gap apart."""
    n = len(p)
    cands = []
    i = 0
    while i < n:
        j = i
        while j + 1 < n and p[j + 1] == p[i]:
            j += 1
        left = i == 0 or p[i - 1] < p[i]
        right = j == n - 1 or p[j + 1] < p[i]
        if left and right:
            cands.append(i)
        i = j + 1
    cands.sort(key=lambda c: (-p[c], c))
    out = []
    for c in cands:
        if all(abs(c - o) >= gap for o in out):
            out.append(c)
    return out[:k]


def test_zero_input_and_scaling(desk):
    z = np.zeros((desk.num_subcarriers, desk.num_antennas), complex)
    assert np.all(power_spectrum(z) == 0)
    y = np.random.default_rng(0).standard_normal(z.shape) + 0j
    np.testing.assert_allclose(power_spectrum(3j * y), 9 * power_spectrum(y))
    with pytest.raises(ConfigError):
        power_spectrum(np.ones(4))
    with pytest.raises(ConfigError):
        power_spectrum(y, mode="bogus")


def test_argmax_matches_illumination(desk_scan, desk):
    bf, traj = desk_scan
    for pos in (deg(-33, 18), deg(12, 44)):
        snap = echo_snapshots(UserSet.from_positions([pos]), bf, desk)
        p = power_spectrum(snap)
        assert int(np.argmax(p)) == int(np.argmax(snap.illumination[:, 0]))
        # scalar UE-side spectrum peaks at the same subcarrier
        assert int(np.argmax(power_spectrum(snap, mode="scalar"))) == int(np.argmax(p))


def test_user_on_trajectory_point_recovered_exactly(desk_scan, desk):
    bf, traj = desk_scan
    for m in (3, 128, 250):
        snap = echo_snapshots(UserSet.from_positions([traj[m]]), bf, desk)
        est = coarse_estimate(power_spectrum(snap), traj)[0]
        assert est.peak_index == m
        assert est.position == traj[m]


def test_coarse_angle_for_reference_user(full_scan, full):
    bf, traj = full_scan
    snap = echo_snapshots(UserSet.from_positions([deg(15, 30)]), bf, full)
    est = coarse_estimate(power_spectrum(snap), traj)[0]
    assert abs(est.position.theta_deg - 14.8) < 0.3


def test_two_users_match_brute_force(desk_scan, desk):
    bf, traj = desk_scan
    snap = echo_snapshots(UserSet.from_positions([deg(-20, 20), deg(30, 40)]), bf, desk, seed=2, noise_variance=1e-12)
    p = power_spectrum(snap)
    est = coarse_estimate(p, traj, 2)
    gap = max(1, desk.M // 64)
    assert [e.peak_index for e in est] == brute_top_k(p, 2, gap)
    assert sorted(round(e.position.theta_deg) for e in est) == [-20, 30]


@settings(max_examples=80, deadline=None)
@given(p=arrays(float, st.integers(3, 60), elements=st.floats(0, 10)), k=st.integers(1, 3), gap=st.integers(1, 5))
def test_find_peaks_matches_reference(p, k, gap):
    ref = brute_top_k(p, k, gap)
    if len(ref) < k:
        with pytest.raises(TooFewPeaks):
            find_peaks(p, k, gap)
    else:
        assert find_peaks(p, k, gap) == ref


@settings(max_examples=60, deadline=None)
@given(p=arrays(float, st.integers(3, 60), elements=st.floats(0.01, 10), unique=True), k=st.integers(1, 3))
def test_monotone_transform_invariance(p, k):
    try:
        idx = find_peaks(p, k, 2)
    except TooFewPeaks:
        return
    assert find_peaks(np.log(p), k, 2) == idx
    assert find_peaks(p**3 + 7, k, 2) == idx


def test_tie_breaks_to_smallest_index():
    assert find_peaks(np.array([0, 5, 0, 5, 0.0]), 1) == [1]
    assert local_maxima(np.array([1.0, 1.0, 0.0])).tolist() == [0]
    assert local_maxima(np.zeros(4)).tolist() == [0]


def test_smoothing_snaps_to_raw_maximum():
    p = np.zeros(50)
    p[20:31] = 1.0
    p[24] = 3.0
    p[40] = 3.5  # isolated spike, wins without smoothing
    p[26] = 2.0
    assert find_peaks(p, 1) == [40]
    assert find_peaks(p, 1, smooth_window=5) == [24]


@settings(max_examples=40, deadline=None)
@given(frac=st.floats(0.0, 1.0))
def test_noiseless_error_within_one_step_on_trajectory(desk_scan, desk, frac):
    bf, traj = desk_scan
    ft = frac * desk.bandwidth
    th, r = trajectory_points(traj.start, traj.end, ft, desk)
    pos = PolarPosition(float(th), float(r))
    est = coarse_estimate(power_spectrum(echo_snapshots(UserSet.from_positions([pos]), bf, desk)), traj)[0]
    dth, dr = traj.max_steps()
    assert abs(est.position.theta - pos.theta) <= dth + 1e-12
    assert abs(est.position.r - pos.r) <= dr + 1e-9


def test_spectrum_csv(tmp_path, desk):
    p = np.arange(desk.num_subcarriers, dtype=float)
    write_spectrum_csv(tmp_path / "s.csv", p, desk.subcarrier_freqs())
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "m,f_hz,power"
    assert len(lines) == desk.num_subcarriers + 1
    assert float(lines[-1].split(",")[1]) == desk.fM


def test_length_mismatch(desk_scan):
    with pytest.raises(ConfigError):
        coarse_estimate(np.ones(5), desk_scan[1])
