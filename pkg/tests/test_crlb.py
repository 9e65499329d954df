import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from squintloc.config import PolarPosition, SystemConfig
from squintloc.crlb import (
    crlb,
    crlb_curve,
    fisher_matrix,
    phase,
    phase_derivatives,
    scan_crlb,
    write_crlb_csv,
)
from squintloc.exceptions import ConfigError, DegenerateGeometry

from .conftest import deg


@settings(max_examples=40, deadline=None)
@given(th=st.floats(-70, 70), r=st.floats(5, 80), nd=st.floats(-127.5, 127.5))
def test_phase_derivatives_match_finite_differences(full, th, r, nd):
    pos = deg(th, r)
    h = 1e-7
    d_th, d_r = phase_derivatives(pos, nd, full)
    num_th = (phase(PolarPosition(pos.theta + h, r), nd, full) - phase(PolarPosition(pos.theta - h, r), nd, full)) / (2 * h)
    hr = 1e-7 * r
    num_r = (phase(PolarPosition(pos.theta, r + hr), nd, full) - phase(PolarPosition(pos.theta, r - hr), nd, full)) / (2 * hr)
    assert d_th == pytest.approx(num_th, rel=1e-5, abs=1e-5 * abs(d_r))
    assert d_r == pytest.approx(num_r, rel=1e-5)


def test_center_element_and_broadside(full):
    k = 2 * np.pi * full.carrier_freq / 299_792_458.0
    d_th, d_r = phase_derivatives(deg(25, 30), 0.0, full)
    assert d_th == 0 and d_r == pytest.approx(-k)
    # at broadside the quadratic term in the angle derivative drops out
    x = 10 * full.element_spacing
    d_th, _ = phase_derivatives(deg(0, 30), 10.0, full)
    assert d_th == pytest.approx(k * x)


def test_fisher_scales_linearly(desk):
    pos = deg(20, 25)
    J1 = fisher_matrix(pos, 3.0, 1, desk).matrix
    np.testing.assert_allclose(fisher_matrix(pos, 3.0, 4, desk).matrix, 4 * J1)
    np.testing.assert_allclose(fisher_matrix(pos, 6.0, 1, desk).matrix, 2 * J1)
    np.testing.assert_allclose(J1, J1.T)
    assert np.all(np.linalg.eigvalsh(J1) > 0)


def test_fisher_matches_direct_sum(desk):
    pos = deg(-30, 40)
    snr, L = 2.5, 3
    d_th, d_r = phase_derivatives(pos, desk.antenna_indices(), desk)
    ref = 2 * snr * L * np.array(
        [[np.sum(d_th * d_th), np.sum(d_th * d_r)], [np.sum(d_th * d_r), np.sum(d_r * d_r)]]
    )
    np.testing.assert_allclose(fisher_matrix(pos, snr, L, desk).matrix, ref, rtol=1e-12)


def test_crlb_is_inverse_diagonal(desk):
    pos = deg(10, 35)
    info = fisher_matrix(pos, 1.0, 1, desk)
    inv = np.linalg.inv(info.matrix)
    b = crlb(pos, 1.0, 1, desk)
    assert b.crlb_theta == pytest.approx(inv[0, 0], rel=1e-9)
    assert b.crlb_r == pytest.approx(inv[1, 1], rel=1e-9)
    # Schur complement: joint estimation is never easier than known range
    assert b.crlb_theta >= 1 / info.matrix[0, 0]
    assert b.crlb_r >= 1 / info.matrix[1, 1]
    assert b.rmse_theta_deg == pytest.approx(np.degrees(np.sqrt(inv[0, 0])))


def test_crlb_decreases_with_aperture():
    pos = deg(15, 30)
    prev = None
    for n in (16, 32, 64, 128, 256):
        cfg = SystemConfig.full(num_antennas=n)
        b = crlb(pos, 1.0, 1, cfg)
        if prev is not None:
            assert b.crlb_theta < prev.crlb_theta and b.crlb_r <= prev.crlb_r * (1 + 1e-9)
        prev = b


def test_crlb_symmetric_in_angle(desk):
    a = crlb(deg(25, 30), 1.0, 1, desk)
    b = crlb(deg(-25, 30), 1.0, 1, desk)
    assert a.crlb_theta == pytest.approx(b.crlb_theta, rel=1e-9)
    assert a.crlb_r == pytest.approx(b.crlb_r, rel=1e-9)


def test_scan_crlb_reduces_to_single(desk):
    pos = deg(5, 20)
    single = crlb(pos, 4.0, 1, desk, f=desk.carrier_freq)
    scan = scan_crlb(pos, [2.0], [desk.carrier_freq], 1.0, desk)
    assert scan.crlb_theta == pytest.approx(single.crlb_theta, rel=1e-9)
    # more subcarriers only help
    f = desk.subcarrier_freqs()[120:125]
    multi = scan_crlb(pos, np.full(5, 2.0), f, 1.0, desk)
    assert multi.crlb_theta < single.crlb_theta


def test_errors(desk):
    with pytest.raises(DegenerateGeometry):
        crlb(PolarPosition(np.nextafter(np.pi / 2, 0), 30), 1.0, 1, desk)
    with pytest.raises(ConfigError):
        crlb(deg(0, 30), 0.0, 1, desk)
    with pytest.raises(ConfigError):
        crlb(deg(0, 30), 1.0, 0, desk)
    with pytest.raises(ConfigError):
        scan_crlb(deg(0, 30), [1.0, 2.0], [60e9], 1.0, desk)
    with pytest.raises(DegenerateGeometry):
        scan_crlb(deg(0, 30), [0.0], [60e9], 1.0, desk)


def test_curve_and_csv(tmp_path, desk):
    curve = crlb_curve(deg(15, 30), [-10, 0, 10], desk)
    vals = [v.crlb_theta for _, v in curve]
    assert vals[0] == pytest.approx(10 * vals[1]) and vals[1] == pytest.approx(10 * vals[2])
    write_crlb_csv(tmp_path / "c.csv", curve)
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "snr_db,sqrt_crlb_theta_deg,sqrt_crlb_r_m" and len(lines) == 4


def test_unknown_gain_projects_out_common_phase(desk):
    pos = deg(30, 40)
    known = fisher_matrix(pos, 2.0, 1, desk).matrix
    unknown = fisher_matrix(pos, 2.0, 1, desk, unknown_gain=True).matrix
    # information can only drop, and the known-gain matrix dominates
    assert np.all(np.linalg.eigvalsh(known - unknown) > -1e-9 * known.max())
    # direct oracle: project the derivatives onto the complement of a
    a = np.exp(1j * phase(pos, desk.antenna_indices(), desk))
    d_th, d_r = phase_derivatives(pos, desk.antenna_indices(), desk)
    k = 2 * np.pi * desk.carrier_freq / 299_792_458.0
    P = np.eye(a.size) - np.outer(a, a.conj()) / a.size
    # P annihilates a, so the constant part of dPhi/dr can be dropped before projecting
    D = np.stack([1j * d_th * a, 1j * (d_r + k) * a], 1)
    np.testing.assert_allclose(unknown, 4.0 * np.real(D.conj().T @ P @ D), rtol=1e-9)
    # the common-phase term dominates the range bound when the gain is known
    b_known = crlb(pos, 2.0, 1, desk)
    b_unknown = crlb(pos, 2.0, 1, desk, unknown_gain=True)
    assert b_unknown.crlb_r > 1e6 * b_known.crlb_r
    assert b_unknown.crlb_theta >= b_known.crlb_theta
