"""Command line entry point: ``squintloc {run,spectrum,crlb,trajectory}``."""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

from .beamforming import jad_trajectory
from .config import FarFieldWarning, PolarPosition, SystemConfig, config_from_dict, read_structured
from .crlb import crlb_curve, write_crlb_csv
from .exceptions import ConfigError, SquintLocError
from .harness import (
    _positions,
    campaign_from_dict,
    emit_spectrum_artifacts,
    parse_snr_grid,
    run_campaign,
    write_trajectory_csv,
)

log = logging.getLogger("squintloc")


def _point(text: str) -> PolarPosition:
    try:
        th, r = (float(v) for v in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected THETA_DEG,R_M, got {text!r}") from exc
    try:
        return PolarPosition.from_degrees(th, r)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _system(args, data: dict | None = None) -> SystemConfig:
    system = dict((data or {}).get("system") or {})
    if args.scale is not None:
        system["preset"] = args.scale
    else:
        system.setdefault("preset", (data or {}).get("scale", "desk"))
    return config_from_dict(system)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="master seed (overrides the file)")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--scale", choices=("desk", "full"), default=None, help="system preset")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="squintloc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a Monte Carlo campaign file")
    p.add_argument("campaign", type=Path)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None, help="worker processes")
    _common(p)

    p = sub.add_parser("spectrum", help="emit fused-spectrum heatmap and slice CSVs for a scenario")
    p.add_argument("scenario", type=Path)
    _common(p)

    p = sub.add_parser("crlb", help="square-root CRLB over an SNR grid")
    p.add_argument("--position", type=_point, required=True, metavar="THETA_DEG,R_M")
    p.add_argument("--snr", default="-10:5:30", help="list 'a,b,c' or 'start:step:stop' in dB")
    p.add_argument("--snapshots", type=int, default=1)
    p.add_argument("--unknown-gain", action="store_true", help="treat the echo gain as a nuisance parameter")
    _common(p)

    p = sub.add_parser("trajectory", help="write the per-subcarrier focal points")
    p.add_argument("--start", type=_point, default=None, metavar="THETA_DEG,R_M")
    p.add_argument("--end", type=_point, default=None, metavar="THETA_DEG,R_M")
    _common(p)
    return parser


def _snr_arg(text: str):
    return parse_snr_grid(text if ":" in text else text.split(","))


def _cmd_run(args) -> int:
    data = read_structured(args.campaign)
    campaign = campaign_from_dict(
        data, scale=args.scale, seed=args.seed, output_dir=args.out, trials=args.trials, n_jobs=args.jobs
    )
    result = run_campaign(campaign)
    for r in result.records:
        log.info("%-10s %6.1f dB  angle %.4g deg  range %.4g m  failures %d",
                 r.method, r.snr_db, r.angle_rmse_deg, r.range_rmse_m, r.failures)
    print(result.files["results"])
    return 0


def _cmd_spectrum(args) -> int:
    data = read_structured(args.scenario) or {}
    if not isinstance(data, dict):
        raise ConfigError("scenario file must contain a mapping")
    unknown = set(data) - {"scale", "system", "positions", "snr_db", "seed", "subarray_size", "delta_m"}
    if unknown:
        raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
    cfg = _system(args, data)
    positions = _positions(data.get("positions", []))
    if not positions:
        raise ConfigError("scenario needs at least one position")
    snr = data.get("snr_db")
    files = emit_spectrum_artifacts(
        cfg,
        positions,
        args.out,
        snr_db=None if snr is None else float(snr),
        seed=args.seed if args.seed is not None else int(data.get("seed", 0)),
        subarray_size=data.get("subarray_size"),
        delta_m=int(data.get("delta_m", 2)),
    )
    for path in files.values():
        print(path)
    return 0


def _cmd_crlb(args) -> int:
    cfg = _system(args)
    curve = crlb_curve(
        args.position, _snr_arg(args.snr), cfg, num_snapshots=args.snapshots, unknown_gain=args.unknown_gain
    )
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / "crlb.csv"
    write_crlb_csv(path, curve)
    print(path)
    return 0


def _cmd_trajectory(args) -> int:
    cfg = _system(args)
    start = args.start or cfg.region.start
    end = args.end or cfg.region.end
    traj = jad_trajectory(start, end, cfg)
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / "trajectory.csv"
    write_trajectory_csv(path, traj)
    print(path)
    return 0


COMMANDS = {"run": _cmd_run, "spectrum": _cmd_spectrum, "crlb": _cmd_crlb, "trajectory": _cmd_trajectory}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    with warnings.catch_warnings():
        if not args.verbose:
            warnings.simplefilter("ignore", FarFieldWarning)
        try:
            return COMMANDS[args.command](args)
        except (ConfigError, FileNotFoundError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
        except SquintLocError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1


if __name__ == "__main__":
    sys.exit(main())
