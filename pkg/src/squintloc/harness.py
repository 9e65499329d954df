"""Seeded Monte Carlo campaigns and spectrum artifacts.

Every (snr index, trial) pair owns a ``SeedSequence([seed, snr_index, trial])``
so results do not depend on the worker count or scheduling order. All
methods in a trial see the same user placement; the proposed and power-peak
estimators also share the same echo realization.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from ._version import __version__
from .baselines import SCANS_PER_LOCALIZATION, cbs_low_localize, power_peak_localize, quantization_floor
from .beamforming import TrajectoryTable, jad_trajectory, synthesize_ttd, trajectory_points
from .coarse import coarse_estimate, power_spectrum, write_spectrum_csv
from .config import PolarPosition, SystemConfig, config_from_dict, config_hash, config_to_dict
from .crlb import scan_crlb
from .exceptions import ConfigError, SquintLocError
from .music import (
    estimate_num_users,
    fuse_and_refine,
    fused_spectrum_on_grid,
    subcarrier_set,
    subspaces_for,
    wideband_covariance,
    _axis,
)
from .signals import UserSet, echo_snapshots, illumination_gains, snr_to_sigma

log = logging.getLogger(__name__)

METHODS = ("proposed", "cbs_low", "power_peak", "crlb")
PLACEMENTS = ("fixed", "uniform", "trajectory")
SCHEMA_VERSION = 1
DEFAULT_SNR_GRID = (-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)


@dataclass(frozen=True)
class Campaign:
    scenario: str
    config: SystemConfig
    snr_db: tuple[float, ...] = DEFAULT_SNR_GRID
    trials: int = 100
    methods: tuple[str, ...] = ("proposed", "cbs_low", "power_peak", "crlb")
    placement: str = "fixed"
    positions: tuple[PolarPosition, ...] = ()
    num_users: int = 1
    min_separation_deg: float = 10.0
    seed: int = 0
    output_dir: Path | None = None
    n_jobs: int = 1
    subarray_size: int | None = None
    delta_m: int = 2
    round_trip: bool = False

    def __post_init__(self):
        object.__setattr__(self, "snr_db", tuple(float(s) for s in self.snr_db))
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "positions", tuple(self.positions))
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.snr_db:
            raise ConfigError("empty SNR grid")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown methods {bad}; choose from {METHODS}")
        if self.placement not in PLACEMENTS:
            raise ConfigError(f"unknown placement {self.placement!r}")
        if self.placement == "fixed":
            if not self.positions:
                raise ConfigError("fixed placement needs positions")
            object.__setattr__(self, "num_users", len(self.positions))
            UserSet.from_positions(self.positions).check_inside(self.config.region)
        if self.num_users < 1:
            raise ConfigError("num_users must be >= 1")
        if "cbs_low" in self.methods and self.num_users != 1:
            raise ConfigError("cbs_low is a single-user baseline")
        if self.placement == "trajectory" and self.num_users != 1:
            raise ConfigError("trajectory placement supports one user")
        if self.n_jobs < 1:
            raise ConfigError("n_jobs must be >= 1")

    @property
    def scans_per_localization(self) -> dict[str, int]:
        return {m: SCANS_PER_LOCALIZATION[m] for m in self.methods if m in SCANS_PER_LOCALIZATION}


@dataclass(frozen=True)
class RmseRecord:
    method: str
    snr_db: float
    angle_rmse_deg: float
    range_rmse_m: float
    trials: int
    failures: int
    config_hash: str


@dataclass
class CampaignResult:
    records: list[RmseRecord]
    rows: list[dict]
    manifest: dict
    files: dict[str, Path] = field(default_factory=dict)

    def record(self, method: str, snr_db: float) -> RmseRecord:
        for r in self.records:
            if r.method == method and r.snr_db == snr_db:
                return r
        raise KeyError((method, snr_db))


# ---------------------------------------------------------------------------
# placement


def eligible_intervals(traj: TrajectoryTable, cfg: SystemConfig) -> np.ndarray:
    """Boolean per trajectory interval: both endpoints inside the sensing region."""
    inside = np.array([cfg.region.contains(traj[m]) for m in range(len(traj))])
    return inside[:-1] & inside[1:]


def sample_positions(campaign: Campaign, rng: np.random.Generator) -> list[PolarPosition]:
    cfg, reg = campaign.config, campaign.config.region
    if campaign.placement == "fixed":
        return list(campaign.positions)
    if campaign.placement == "trajectory":
        traj = jad_trajectory(reg.start, reg.end, cfg)
        idx = np.flatnonzero(eligible_intervals(traj, cfg))
        if idx.size == 0:
            raise ConfigError("the trajectory never stays inside the sensing region")
        m = int(rng.choice(idx))
        ft = cfg.baseband_freqs()
        f = ft[m] + rng.random() * (ft[m + 1] - ft[m])
        th, r = trajectory_points(reg.start, reg.end, f, cfg)
        return [PolarPosition(float(th), float(r))]
    out: list[PolarPosition] = []
    sep = math.radians(campaign.min_separation_deg)
    for _ in range(10000):
        p = PolarPosition(rng.uniform(reg.theta_min, reg.theta_max), rng.uniform(reg.r_min, reg.r_max))
        if all(abs(p.theta - q.theta) >= sep for q in out):
            out.append(p)
            if len(out) == campaign.num_users:
                return out
    raise ConfigError("could not place users with the requested separation")


# ---------------------------------------------------------------------------
# trials


def _match(truth: Sequence[PolarPosition], est: Sequence[PolarPosition]):
    """Pair estimates with true users (minimum total normalized squared error)."""
    if not est:
        return [(i, None) for i in range(len(truth))]
    cost = np.array(
        [[(math.degrees(e.theta - t.theta)) ** 2 + (e.r - t.r) ** 2 for e in est] for t in truth]
    )
    rows, cols = linear_sum_assignment(cost)
    pairs = dict(zip(rows.tolist(), cols.tolist()))
    return [(i, pairs.get(i)) for i in range(len(truth))]


def _rows_for(method, snr, trial, truth, est, k_hat, status):
    rows = []
    for i, j in _match(truth, est or []):
        t = truth[i]
        row = {
            "method": method,
            "snr_db": snr,
            "trial": trial,
            "user": i,
            "theta_true_deg": t.theta_deg,
            "r_true_m": t.r,
            "theta_est_deg": math.nan,
            "r_est_m": math.nan,
            "err_theta_deg": math.nan,
            "err_r_m": math.nan,
            "k_hat": k_hat,
            "status": status,
        }
        if j is not None and status == "ok":
            e = est[j]
            row.update(
                theta_est_deg=e.theta_deg,
                r_est_m=e.r,
                err_theta_deg=e.theta_deg - t.theta_deg,
                err_r_m=e.r - t.r,
            )
        elif status == "ok":
            row["status"] = "missed"
        rows.append(row)
    return rows


def run_trial(campaign: Campaign, snr_index: int, trial: int) -> list[dict]:
    cfg = campaign.config
    snr = campaign.snr_db[snr_index]
    ss = np.random.SeedSequence([campaign.seed, snr_index, trial])
    s_place, s_scan, s_cbs = ss.spawn(3)
    truth = sample_positions(campaign, np.random.default_rng(s_place))
    users = UserSet.from_positions(truth)
    reg = cfg.region
    w = synthesize_ttd(reg.start, reg.end, cfg)
    traj = jad_trajectory(reg.start, reg.end, cfg)
    sigma2 = snr_to_sigma(snr, users, w, cfg, round_trip=campaign.round_trip)
    K = len(truth)
    rows: list[dict] = []

    needs_scan = {"proposed", "power_peak"} & set(campaign.methods)
    snap = None
    if needs_scan:
        snap = echo_snapshots(users, w, cfg, seed=s_scan, noise_variance=sigma2, round_trip=campaign.round_trip)

    for method in campaign.methods:
        est, k_hat, status = None, K, "ok"
        try:
            if method == "proposed":
                est, k_hat = _proposed(snap.y, traj, cfg, K, campaign)
            elif method == "power_peak":
                est = power_peak_localize(snap, traj, K)
            elif method == "cbs_low":
                est = [cbs_low_localize(users, cfg, seed=s_cbs, noise_variance=sigma2,
                                        round_trip=campaign.round_trip).position]
            elif method == "crlb":
                illum = illumination_gains(users, w, cfg, round_trip=campaign.round_trip)
                rows.extend(_crlb_rows(truth, snr, trial, cfg, sigma2, illum, users.amplitudes, campaign.delta_m))
                continue
        except SquintLocError as exc:
            status = type(exc).__name__
            log.debug("trial %d method %s failed: %s", trial, method, exc)
        rows.extend(_rows_for(method, snr, trial, truth, est, k_hat, status))
    return rows


def _proposed(Y, traj, cfg, K, campaign: Campaign) -> tuple[list[PolarPosition], int]:
    """Localize with the known user count; the eigenvalue-based count is reported alongside."""
    ms = campaign.subarray_size or math.ceil(cfg.num_antennas / 2)
    k_hat = estimate_num_users(np.linalg.eigvalsh(wideband_covariance(Y, ms)))
    coarse = coarse_estimate(power_spectrum(Y), traj, K)
    out = []
    for c in coarse:
        r = fuse_and_refine(
            Y, c, traj, cfg, signal_dim=K, subarray_size=campaign.subarray_size, delta_m=campaign.delta_m
        )
        out.append(r.position)
    return out, k_hat


def _crlb_rows(truth, snr, trial, cfg, sigma2, illum, amplitudes, delta_m) -> list[dict]:
    """Bound matched to the fused data: the subcarriers around each user's illumination peak."""
    freqs = cfg.subcarrier_freqs()
    rows = []
    for i, t in enumerate(truth):
        S = subcarrier_set(int(np.argmax(illum[:, i])), delta_m, cfg.num_subcarriers)
        v = scan_crlb(t, illum[S, i] * abs(amplitudes[i]), freqs[S], sigma2, cfg)
        rows.append(
            {
                "method": "crlb",
                "snr_db": snr,
                "trial": trial,
                "user": i,
                "theta_true_deg": t.theta_deg,
                "r_true_m": t.r,
                "theta_est_deg": math.nan,
                "r_est_m": math.nan,
                # bound standard deviations; squared and averaged like errors
                "err_theta_deg": v.rmse_theta_deg,
                "err_r_m": v.rmse_r,
                "k_hat": len(truth),
                "status": "ok",
            }
        )
    return rows


# ---------------------------------------------------------------------------
# aggregation and output

ROW_FIELDS = (
    "method",
    "snr_db",
    "trial",
    "user",
    "theta_true_deg",
    "r_true_m",
    "theta_est_deg",
    "r_est_m",
    "err_theta_deg",
    "err_r_m",
    "k_hat",
    "status",
)
RESULT_FIELDS = ("method", "snr_db", "angle_rmse_deg", "range_rmse_m", "trials", "failures", "config_hash")


def aggregate(rows: Sequence[dict], campaign: Campaign) -> list[RmseRecord]:
    h = config_hash(campaign.config)
    out = []
    for method in campaign.methods:
        for snr in campaign.snr_db:
            sel = [r for r in rows if r["method"] == method and r["snr_db"] == snr]
            ok = [r for r in sel if r["status"] == "ok"]
            failed_trials = {r["trial"] for r in sel if r["status"] != "ok"}
            if ok:
                a = math.sqrt(sum(r["err_theta_deg"] ** 2 for r in ok) / len(ok))
                b = math.sqrt(sum(r["err_r_m"] ** 2 for r in ok) / len(ok))
            else:
                a = b = math.nan
            out.append(RmseRecord(method, snr, a, b, campaign.trials, len(failed_trials), h))
    return out


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([_fmt(v) for v in row])


def _versions() -> dict[str, str]:
    import scipy
    import sklearn

    return {
        "squintloc": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "scikit-learn": sklearn.__version__,
    }


def campaign_manifest(campaign: Campaign) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "scenario": campaign.scenario,
        "seed": campaign.seed,
        "config_hash": config_hash(campaign.config),
        "config": config_to_dict(campaign.config),
        "snr_db": list(campaign.snr_db),
        "trials": campaign.trials,
        "methods": list(campaign.methods),
        "placement": campaign.placement,
        "positions": [[p.theta_deg, p.r] for p in campaign.positions],
        "num_users": campaign.num_users,
        "scans_per_localization": campaign.scans_per_localization,
        "versions": _versions(),
    }


def _task(args):
    campaign, i, t = args
    return run_trial(campaign, i, t)


def run_campaign(campaign: Campaign) -> CampaignResult:
    tasks = [(campaign, i, t) for i in range(len(campaign.snr_db)) for t in range(campaign.trials)]
    if campaign.n_jobs > 1:
        with ProcessPoolExecutor(max_workers=campaign.n_jobs) as pool:
            chunks = list(pool.map(_task, tasks, chunksize=max(1, len(tasks) // (4 * campaign.n_jobs))))
    else:
        chunks = [_task(t) for t in tasks]
    # ordered reduction keyed by (method, snr, trial, user)
    order = {m: k for k, m in enumerate(campaign.methods)}
    rows = sorted(
        (r for c in chunks for r in c),
        key=lambda r: (order[r["method"]], campaign.snr_db.index(r["snr_db"]), r["trial"], r["user"]),
    )
    records = aggregate(rows, campaign)
    manifest = campaign_manifest(campaign)
    result = CampaignResult(records, rows, manifest)
    if campaign.output_dir is not None:
        result.files = write_campaign(result, campaign, Path(campaign.output_dir))
    return result


def write_campaign(result: CampaignResult, campaign: Campaign, out: Path) -> dict[str, Path]:
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "results": out / "results.csv",
        "trials": out / "trials.csv",
        "rmse_angle": out / "rmse_angle.csv",
        "rmse_range": out / "rmse_range.csv",
        "manifest": out / "manifest.json",
    }
    _write_csv(
        files["results"],
        RESULT_FIELDS,
        [[getattr(r, f) for f in RESULT_FIELDS] for r in result.records],
    )
    _write_csv(files["trials"], ROW_FIELDS, [[r[f] for f in ROW_FIELDS] for r in result.rows])
    for key, attr in (("rmse_angle", "angle_rmse_deg"), ("rmse_range", "range_rmse_m")):
        table = []
        for snr in campaign.snr_db:
            table.append([snr] + [getattr(result.record(m, snr), attr) for m in campaign.methods])
        _write_csv(files[key], ("snr_db",) + campaign.methods, table)
    digest = hashlib.sha256()
    for key in ("results", "trials", "rmse_angle", "rmse_range"):
        digest.update(files[key].read_bytes())
    manifest = dict(result.manifest, outputs_sha256=digest.hexdigest())
    files["manifest"].write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return files


def power_peak_floor(cfg: SystemConfig) -> tuple[float, float]:
    """Analytic power-peak RMSE floor (degrees, meters) for trajectory placement."""
    reg = cfg.region
    traj = jad_trajectory(reg.start, reg.end, cfg)
    th, r = quantization_floor(traj, eligible_intervals(traj, cfg))
    return math.degrees(th), r


# ---------------------------------------------------------------------------
# config files


def parse_snr_grid(value) -> tuple[float, ...]:
    """A list of numbers or a ``start:step:stop`` string (stop inclusive)."""
    if isinstance(value, str):
        parts = value.split(":")
        if len(parts) != 3:
            raise ConfigError(f"SNR grid {value!r} is not start:step:stop")
        try:
            a, s, b = (float(p) for p in parts)
        except ValueError as exc:
            raise ConfigError(f"bad SNR grid {value!r}") from exc
        if s <= 0 or b < a:
            raise ConfigError(f"bad SNR grid {value!r}")
        n = int(math.floor((b - a) / s + 1e-9)) + 1
        return tuple(a + s * i for i in range(n))
    try:
        return tuple(float(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad SNR grid {value!r}") from exc


def _positions(value) -> tuple[PolarPosition, ...]:
    try:
        return tuple(PolarPosition.from_degrees(float(p[0]), float(p[1])) for p in value)
    except (TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"positions must be [theta_deg, r_m] pairs, got {value!r}") from exc


CAMPAIGN_KEYS = {
    "scenario", "scale", "system", "snr_db", "trials", "methods", "placement", "positions",
    "num_users", "min_separation_deg", "seed", "n_jobs", "subarray_size", "delta_m", "round_trip",
}


def campaign_from_dict(data: Mapping[str, Any], **overrides) -> Campaign:
    """Build a campaign from a parsed YAML/JSON mapping.

    ``overrides`` (``scale``, ``seed``, ``output_dir``, ``trials``, ``n_jobs``)
    take precedence over file values when not None.
    """
    if not isinstance(data, Mapping):
        raise ConfigError("campaign file must contain a mapping")
    unknown = set(data) - CAMPAIGN_KEYS
    if unknown:
        raise ConfigError(f"unknown campaign keys: {sorted(unknown)}")
    ov = {k: v for k, v in overrides.items() if v is not None}
    scale = ov.pop("scale", None)
    system = dict(data.get("system") or {})
    if scale is not None:
        system["preset"] = scale
    else:
        scale = system.setdefault("preset", data.get("scale", "desk"))
    cfg = config_from_dict(system)
    trials = data.get("trials", 100 if scale == "desk" else 10)
    kwargs = dict(
        scenario=str(data.get("scenario", "campaign")),
        config=cfg,
        snr_db=parse_snr_grid(data.get("snr_db", list(DEFAULT_SNR_GRID))),
        trials=int(trials),
        methods=tuple(data.get("methods", METHODS)),
        placement=data.get("placement", "fixed" if data.get("positions") else "uniform"),
        positions=_positions(data.get("positions", [])),
        num_users=int(data.get("num_users", 1)),
        min_separation_deg=float(data.get("min_separation_deg", 10.0)),
        seed=int(data.get("seed", 0)),
        n_jobs=int(data.get("n_jobs", 1)),
        subarray_size=data.get("subarray_size"),
        delta_m=int(data.get("delta_m", 2)),
        round_trip=bool(data.get("round_trip", False)),
    )
    kwargs.update(ov)
    try:
        return Campaign(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# spectrum artifacts


def _normalized(values: np.ndarray) -> np.ndarray:
    """log10 spectrum to linear power with peak 1."""
    return 10.0 ** (values - values.max())


def emit_spectrum_artifacts(
    cfg: SystemConfig,
    positions: Sequence[PolarPosition],
    out_dir: str | Path,
    snr_db: float | None = None,
    seed: int = 0,
    heatmap_step: tuple[float, float] = (math.radians(0.5), 0.5),
    slice_step: tuple[float, float] = (math.radians(0.01), 0.01),
    subarray_size: int | None = None,
    delta_m: int = 2,
) -> dict[str, Path]:
    """Run one scan and write the spectra behind heatmap and slice plots.

    Per user k: ``heatmap_user{k}.csv`` (fused MUSIC spectrum over the sensing
    region), ``angular_slice_user{k}.csv`` at the estimated range and
    ``radial_slice_user{k}.csv`` at the estimated angle, both normalized to
    peak 1. Also ``power_spectrum.csv``, ``trajectory.csv`` and ``estimates.csv``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    users = UserSet.from_positions(positions)
    users.check_inside(cfg.region)
    reg = cfg.region
    w = synthesize_ttd(reg.start, reg.end, cfg)
    traj = jad_trajectory(reg.start, reg.end, cfg)
    sigma2 = 0.0 if snr_db is None else snr_to_sigma(snr_db, users, w, cfg)
    snap = echo_snapshots(users, w, cfg, seed=np.random.SeedSequence(seed), noise_variance=sigma2)
    K = len(users)
    ms = subarray_size or math.ceil(cfg.num_antennas / 2)

    files: dict[str, Path] = {}
    files["power_spectrum"] = out / "power_spectrum.csv"
    write_spectrum_csv(files["power_spectrum"], power_spectrum(snap), cfg.subcarrier_freqs())
    files["trajectory"] = out / "trajectory.csv"
    write_trajectory_csv(files["trajectory"], traj)

    estimates = []
    for k, c in enumerate(coarse_estimate(power_spectrum(snap), traj, K)):
        ref = fuse_and_refine(snap.y, c, traj, cfg, signal_dim=K, subarray_size=ms, delta_m=delta_m)
        estimates.append(ref.position)
        S = subcarrier_set(c.peak_index, delta_m, cfg.num_subcarriers)
        dec = subspaces_for(snap.y, S, ms, K)
        heat = fused_spectrum_on_grid(
            dec, S, _axis(reg.theta_min, reg.theta_max, heatmap_step[0]), _axis(reg.r_min, reg.r_max, heatmap_step[1]), cfg
        )
        files[f"heatmap_user{k}"] = out / f"heatmap_user{k}.csv"
        heat.to_csv(files[f"heatmap_user{k}"])
        ang = fused_spectrum_on_grid(
            dec, S, _axis(reg.theta_min, reg.theta_max, slice_step[0]), np.array([ref.position.r]), cfg
        )
        rad = fused_spectrum_on_grid(
            dec, S, np.array([ref.position.theta]), _axis(reg.r_min, reg.r_max, slice_step[1]), cfg
        )
        files[f"angular_slice_user{k}"] = out / f"angular_slice_user{k}.csv"
        _write_csv(
            files[f"angular_slice_user{k}"],
            ("theta_deg", "power_norm"),
            zip(np.degrees(ang.thetas).tolist(), _normalized(ang.values[:, 0]).tolist()),
        )
        files[f"radial_slice_user{k}"] = out / f"radial_slice_user{k}.csv"
        _write_csv(
            files[f"radial_slice_user{k}"],
            ("r_m", "power_norm"),
            zip(rad.ranges.tolist(), _normalized(rad.values[0, :]).tolist()),
        )
    files["estimates"] = out / "estimates.csv"
    _write_csv(
        files["estimates"],
        ("user", "theta_est_deg", "r_est_m"),
        [[k, p.theta_deg, p.r] for k, p in enumerate(estimates)],
    )
    return files


def write_trajectory_csv(path: str | Path, traj: TrajectoryTable) -> None:
    _write_csv(Path(path), ("m", "f_hz", "theta_deg", "r_m"), list(traj.to_rows()))
