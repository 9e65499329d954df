import json
import math

import numpy as np
import pytest

from squintloc.exceptions import ConfigError
from squintloc.harness import (
    Campaign,
    campaign_from_dict,
    eligible_intervals,
    emit_spectrum_artifacts,
    parse_snr_grid,
    power_peak_floor,
    run_campaign,
    run_trial,
    sample_positions,
)
from squintloc.beamforming import jad_trajectory

from .conftest import deg


def small(desk, **kw):
    base = dict(scenario="t", config=desk, snr_db=(10.0, 30.0), trials=2, placement="uniform", seed=7)
    base.update(kw)
    return Campaign(**base)


def test_parse_snr_grid():
    assert parse_snr_grid("-10:5:30") == tuple(float(v) for v in range(-10, 31, 5))
    assert parse_snr_grid([1, 2]) == (1.0, 2.0)
    for bad in ("1:2", "0:-1:5", "a:b:c", 5):
        with pytest.raises(ConfigError):
            parse_snr_grid(bad)


def test_campaign_validation(desk):
    with pytest.raises(ConfigError):
        small(desk, trials=0)
    with pytest.raises(ConfigError):
        small(desk, methods=("magic",))
    with pytest.raises(ConfigError):
        small(desk, placement="fixed")
    with pytest.raises(ConfigError):
        small(desk, num_users=2)  # cbs_low is single-user
    with pytest.raises(ConfigError):
        small(desk, placement="fixed", positions=(deg(80, 30),))
    with pytest.raises(ConfigError):
        campaign_from_dict({"bogus": 1})
    with pytest.raises(ConfigError):
        campaign_from_dict({"system": {"preset": "huge"}})
    c = campaign_from_dict({"positions": [[10, 30]]}, seed=3, trials=4)
    assert c.placement == "fixed" and c.seed == 3 and c.trials == 4
    assert campaign_from_dict({}).trials == 100
    assert campaign_from_dict({}, scale="full").trials == 10


def test_noiseless_like_trial_is_accurate(desk):
    c = small(desk, placement="fixed", positions=(deg(15, 30),), snr_db=(60.0,))
    rows = {r["method"]: r for r in run_trial(c, 0, 0)}
    assert abs(rows["proposed"]["err_theta_deg"]) < 1e-3
    assert abs(rows["proposed"]["err_r_m"]) < 0.05
    assert rows["proposed"]["k_hat"] == 1
    assert rows["crlb"]["err_theta_deg"] > 0


def test_determinism_and_jobs(tmp_path, desk):
    a = run_campaign(small(desk, output_dir=tmp_path / "a"))
    b = run_campaign(small(desk, output_dir=tmp_path / "b", n_jobs=2))
    for name in ("results.csv", "trials.csv", "rmse_angle.csv", "rmse_range.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    ma = json.loads((tmp_path / "a" / "manifest.json").read_text())
    mb = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert ma["outputs_sha256"] == mb["outputs_sha256"]
    assert ma["seed"] == 7 and len(ma["config_hash"]) > 8
    assert ma["scans_per_localization"] == {"proposed": 1, "cbs_low": 2, "power_peak": 1}
    assert {"numpy", "scipy", "squintloc", "python"} <= set(ma["versions"])
    assert a.record("proposed", 30.0).trials == 2
    c = run_campaign(small(desk, seed=8))
    assert c.rows != a.rows


def test_csv_headers(tmp_path, desk):
    run_campaign(small(desk, output_dir=tmp_path, methods=("proposed",), snr_db=(20.0,), trials=1))
    assert (tmp_path / "results.csv").read_text().splitlines()[0].startswith("method,snr_db,angle_rmse_deg")
    assert (tmp_path / "rmse_angle.csv").read_text().splitlines()[0] == "snr_db,proposed"
    assert (tmp_path / "trials.csv").read_text().splitlines()[0].startswith("method,snr_db,trial,user")


def test_placements(desk):
    rng = np.random.default_rng(0)
    c = small(desk, placement="trajectory")
    traj = jad_trajectory(desk.region.start, desk.region.end, desk)
    for _ in range(20):
        (p,) = sample_positions(c, rng)
        assert desk.region.contains(p)
    assert eligible_intervals(traj, desk).any()
    c2 = small(desk, methods=("proposed",), num_users=3, min_separation_deg=20)
    for _ in range(10):
        ps = sample_positions(c2, rng)
        th = sorted(p.theta_deg for p in ps)
        assert len(ps) == 3 and min(np.diff(th)) >= 20


def test_power_peak_floor_positive(desk):
    th, r = power_peak_floor(desk)
    assert 0 < th < 1 and 0 < r < 1


def test_spectrum_artifacts(tmp_path, desk):
    files = emit_spectrum_artifacts(desk, [deg(-20, 20), deg(30, 40)], tmp_path, snr_db=20, heatmap_step=(math.radians(5), 5))
    for k in (0, 1):
        for kind in ("angular_slice", "radial_slice"):
            arr = np.loadtxt(files[f"{kind}_user{k}"], delimiter=",", skiprows=1)
            assert arr[:, 1].max() == pytest.approx(1.0)
        head = files[f"heatmap_user{k}"].read_text().splitlines()[0]
        assert head == "theta_deg,r_m,log10_power"
    est = np.loadtxt(files["estimates"], delimiter=",", skiprows=1)
    assert est.shape == (2, 3)
    assert files["trajectory"].read_text().startswith("m,f_hz,theta_deg,r_m")
