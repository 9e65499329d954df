import json

import numpy as np
import pytest

from squintloc.cli import main


def test_run(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("scenario: smoke\nsnr_db: [20]\ntrials: 1\nmethods: [proposed, power_peak]\n")
    assert main(["run", str(cfg), "--seed", "1", "--out", str(tmp_path / "o")]) == 0
    m = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert m["seed"] == 1 and m["config"]["num_antennas"] == 64


def test_run_config_errors(tmp_path, capsys):
    assert main(["run", str(tmp_path / "missing.yaml")]) == 2
    bad = tmp_path / "b.yaml"
    bad.write_text("trials: 0\n")
    assert main(["run", str(bad), "--out", str(tmp_path)]) == 2
    bad.write_text("unknown_key: 1\n")
    assert main(["run", str(bad), "--out", str(tmp_path)]) == 2
    assert "config error" in capsys.readouterr().err


def test_spectrum(tmp_path):
    sc = tmp_path / "s.json"
    sc.write_text(json.dumps({"positions": [[15, 30]], "snr_db": 20}))
    assert main(["spectrum", str(sc), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "heatmap_user0.csv").exists()
    sc.write_text(json.dumps({"positions": []}))
    assert main(["spectrum", str(sc), "--out", str(tmp_path / "o")]) == 2


def test_crlb_and_trajectory(tmp_path):
    assert main(["crlb", "--position", "15,30", "--snr", "0:10:20", "--scale", "full", "--out", str(tmp_path)]) == 0
    arr = np.loadtxt(tmp_path / "crlb.csv", delimiter=",", skiprows=1)
    assert arr.shape == (3, 3) and np.all(np.diff(arr[:, 1]) < 0)
    known_r = arr[0, 2]
    assert main(["crlb", "--position", "15,30", "--snr", "0", "--unknown-gain", "--out", str(tmp_path)]) == 0
    arr = np.loadtxt(tmp_path / "crlb.csv", delimiter=",", skiprows=1, ndmin=2)
    assert arr[0, 2] > known_r
    assert main(["trajectory", "--out", str(tmp_path)]) == 0
    assert len((tmp_path / "trajectory.csv").read_text().splitlines()) == 258
    with pytest.raises(SystemExit) as exc:
        main(["crlb", "--position", "nonsense"])
    assert exc.value.code != 0
    assert main(["crlb", "--position", "15,30", "--snr", "bad", "--out", str(tmp_path)]) == 2
