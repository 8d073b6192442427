"""Command-line entry points.

Exit codes: 0 ok, 2 usage or domain error, 3 fit failure, 4 missing model
artifact, 5 missing data.
"""

from __future__ import annotations

import argparse
import glob
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .core import (
    CORNERS,
    QR_POS,
    InvalidInputError,
    OutOfDomainError,
    config_label,
    mean_euclidean_distance,
    parse_config,
    rest_state,
)
from .experiments import (
    PIPELINE_RIDGE,
    SWING_N,
    SWING_TARGET,
    fit_all_corners,
    rest_augmented,
    run_growth,
    run_lemniscate,
    run_swing,
)
from .model import CornerSet, rollout
from .plant import PlantParams, run_plant
from .plots import overlay_plots
from .sysid import N_INPUTS, FitError, build_dataset, fit_config_model, validate
from .training import SCRIPTS, script_commands

log = logging.getLogger("vinetraj")

EXIT_USAGE, EXIT_FIT, EXIT_ARTIFACT, EXIT_DATA = 2, 3, 4, 5
SEED_ENV = "VINETRAJ_SEED"


class CliError(Exception):
    def __init__(self, msg: str, code: int):
        super().__init__(msg)
        self.code = code


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise CliError(f"{SEED_ENV} must be an integer, got {raw!r}", EXIT_USAGE) from None


def _seed(args) -> int:
    return default_seed() if args.seed is None else args.seed


def _config(text: str):
    try:
        return parse_config(text)
    except (InvalidInputError, OutOfDomainError) as exc:
        raise CliError(str(exc), EXIT_USAGE) from None


def _corner_name(text: str) -> str:
    name = text.upper()
    if name not in CORNERS:
        raise CliError(f"config must be one of {', '.join(CORNERS)}, got {text!r}", EXIT_USAGE)
    return name


def _load_models(directory, names):
    directory = Path(directory)
    found = io.load_corner_models(directory) if directory.is_dir() else {}
    missing = [n for n in names if n not in found]
    if missing:
        raise CliError(f"missing corner model(s) {', '.join(missing)} in {directory}", EXIT_ARTIFACT)
    return {n: found[n] for n in names}


# ---------------------------------------------------------------- commands


def cmd_gen_data(args) -> int:
    cfg = _config(args.config)
    seed = _seed(args)
    names = list(SCRIPTS) if args.script == "all" else [args.script]
    out = Path(args.out)
    for name in names:
        flight = run_plant(script_commands(name, args.duration), cfg, PlantParams(), seed)
        path = out / f"{config_label(cfg)}_{name}_s{seed}.csv"
        io.write_flight_log(path, flight, {"script": name})
        print(f"{path}: {len(flight)} rows")
    return 0


def cmd_fit(args) -> int:
    paths = sorted(glob.glob(args.logs))
    if not paths:
        raise CliError(f"no logs match {args.logs!r}", EXIT_DATA)
    logs = [io.read_flight_log(p) for p in paths]
    if args.config is not None:
        cfg = _config(args.config)
    else:
        cfgs = {lg.config for lg in logs}
        if len(cfgs) != 1 or None in cfgs:
            raise CliError("logs do not share one fixed config; pass --config", EXIT_USAGE)
        cfg = cfgs.pop()
    try:
        data = build_dataset(logs)
    except InvalidInputError as exc:
        raise CliError(f"insufficient rows: {exc}", EXIT_FIT) from None
    if len(data) < N_INPUTS:
        raise CliError(f"insufficient rows: {len(data)} usable, need at least {N_INPUTS}", EXIT_FIT)
    try:
        model = fit_config_model(logs, cfg, args.ridge)
    except FitError as exc:
        raise CliError(f"fit failed: {exc}", EXIT_FIT) from None
    report = validate(model, data)
    io.write_model(args.out, model, {"train": report.to_dict(), "ridge": args.ridge,
                                     "logs": [str(p) for p in paths]})
    print(f"fitted {config_label(cfg)} on {report.n_rows} rows from {len(paths)} log(s) -> {args.out}")
    print("one-step RMSE per channel:", " ".join(f"{r:.6g}" for r in report.rmse))
    print(f"one-step EE RMSE: {report.ee_rmse:.6g} m")
    print(f"condition number: {report.condition_number:.3g}")
    return 0


def cmd_fit_corners(args) -> int:
    fit = fit_all_corners(_seed(args), PlantParams(), args.ridge, args.out)
    for name, rep in fit.heldout_reports.items():
        print(f"{name}: held-out one-step EE RMSE {rep.ee_rmse:.4f} m, "
              f"divergence horizon {rep.divergence_horizon}")
    for w in fit.warnings:
        print("warning:", w)
    return 0


def cmd_optimize(args) -> int:
    seed = _seed(args)
    out = Path(args.out)
    if args.task == "growth":
        corners = CornerSet(_load_models(args.models, list(CORNERS)))
        result = run_growth(corners, args.N or 400, args.T or 10.0, seed, out_dir=out)
    else:
        if args.config is None:
            raise CliError(f"--config is required for {args.task}", EXIT_USAGE)
        name = _corner_name(args.config)
        models = _load_models(args.models, [name])
        if args.task == "lemniscate":
            if args.T is None:
                raise CliError("--T is required for lemniscate", EXIT_USAGE)
            result = run_lemniscate(models, name, args.T, seed, out_dir=out)
        else:
            result = run_swing(models, name, args.x_target, args.z_target, args.N or SWING_N,
                               seed, out_dir=out)
    rep = result.report
    if result.solution is None:
        print(f"{rep.task} {rep.config}: solver failed", file=sys.stderr)
        io.write_json(out / "metrics.json", rep.to_dict())
        return 1
    print(f"{rep.task} {rep.config}: plant mean EE error {rep.mean_ee_error_m:.4f} m, "
          f"model {rep.model_ee_error_m:.4f} m, converged {rep.success} -> {out}")
    return 0


def cmd_rollout(args) -> int:
    if not Path(args.controls).exists():
        raise CliError(f"controls file {args.controls} not found", EXIT_DATA)
    U, dt = io.read_controls(args.controls)
    cfg = _config(args.config)
    out = Path(args.out)
    if args.plant:
        padded = np.vstack([U, U[-1:]])
        flight = run_plant(padded, cfg, PlantParams(), _seed(args), p0=rest_state(cfg.length)[QR_POS],
                           dt=dt)
        path = io.write_flight_log(out / "plant_log.csv", flight)
    else:
        if args.models is None:
            raise CliError("--model needs --models", EXIT_USAGE)
        name = _corner_name(args.config)
        model = _load_models(args.models, [name])[name]
        traj = rollout(model, rest_augmented(cfg.length), U)
        path = io.write_trajectory(out / "model_trajectory.csv", traj)
    print(f"wrote {path}")
    return 0


def cmd_report(args) -> int:
    run = Path(args.run)
    traces = [p for p in (run / "plant_log.csv", run / "model_trajectory.csv") if p.exists()]
    if not run.is_dir() or not traces:
        raise CliError(f"{run}: no plant_log.csv or model_trajectory.csv to report on", EXIT_DATA)
    metrics_path = run / "metrics.json"
    metrics = io.read_json(metrics_path) if metrics_path.exists() else {}
    ref_x = None
    if (run / "reference.csv").exists():
        ref_x = io.read_state_csv(run / "reference.csv")[2]
    t, u, x = io.read_state_csv(traces[0])
    model_x = io.read_state_csv(run / "model_trajectory.csv")[2] if len(traces) == 2 else None

    def ee_err(a, b):
        if b is None or len(a) != len(b):
            return None
        return mean_euclidean_distance(a[:, 6:9], b[:, 6:9])

    metrics["mean_ee_error_m"] = ee_err(x, ref_x if ref_x is not None else model_x)
    metrics["mean_ee_error_reference"] = "reference" if ref_x is not None else (
        "model_trajectory" if model_x is not None else None)
    if model_x is not None and ref_x is not None:
        metrics["model_ee_error_m"] = ee_err(model_x, ref_x)
    stem = traces[0].stem.split("_")[0] + "_"
    plots = overlay_plots(run / "plots", t, u, x, ref_x, prefix=stem)
    if model_x is not None and traces[0].name != "model_trajectory.csv":
        tm, um, _ = io.read_state_csv(run / "model_trajectory.csv")
        plots += overlay_plots(run / "plots", tm, um, model_x, ref_x, prefix="model_")
    metrics.setdefault("paths", {})["report_plots"] = [str(p) for p in plots]
    io.write_json(metrics_path, metrics)
    err = metrics["mean_ee_error_m"]
    print(f"{run}: mean EE error {'n/a' if err is None else f'{err:.4f} m'}; "
          f"{len(plots)} plots, metrics in {metrics_path}")
    return 0


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vinetraj", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    seed_help = f"RNG seed (default: ${SEED_ENV} or 0)"

    g = sub.add_parser("gen-data", help="fly a training script on the synthetic plant")
    g.add_argument("--config", required=True, help="corner name (ES/IS/EL/IL) or 'pressure,length'")
    g.add_argument("--script", required=True, choices=[*SCRIPTS, "all"])
    g.add_argument("--seed", type=int, help=seed_help)
    g.add_argument("--duration", type=float, default=30.0, help="seconds per script")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_data)

    f = sub.add_parser("fit", help="fit one configuration's model from flight logs")
    f.add_argument("--logs", required=True, help="glob of flight-log CSVs")
    f.add_argument("--out", required=True, help="model JSON path")
    f.add_argument("--ridge", type=float, default=PIPELINE_RIDGE)
    f.add_argument("--config", help="override the config recorded in the log sidecars")
    f.set_defaults(func=cmd_fit)

    c = sub.add_parser("fit-corners", help="generate training data and fit all four corners")
    c.add_argument("--seed", type=int, help=seed_help)
    c.add_argument("--ridge", type=float, default=PIPELINE_RIDGE)
    c.add_argument("--out", required=True, help="directory for ES/IS/EL/IL.json")
    c.set_defaults(func=cmd_fit_corners)

    o = sub.add_parser("optimize", help="optimise a task and replay it on the plant")
    o.add_argument("--task", required=True, choices=["lemniscate", "swing", "growth"])
    o.add_argument("--models", required=True, help="directory holding ES/IS/EL/IL.json")
    o.add_argument("--config", help="corner name (lemniscate, swing)")
    o.add_argument("--T", type=float, help="lemniscate period; growth period (default 10)")
    o.add_argument("--N", type=int, help="horizon in states (swing, growth)")
    o.add_argument("--x-target", type=float, default=SWING_TARGET[0])
    o.add_argument("--z-target", type=float, default=None,
                   help="default: same rise above the hanging tip for every vine length")
    o.add_argument("--seed", type=int, help=seed_help)
    o.add_argument("--out", required=True, help="run directory")
    o.set_defaults(func=cmd_optimize)

    r = sub.add_parser("rollout", help="roll a controls CSV through the plant or a model")
    mode = r.add_mutually_exclusive_group(required=True)
    mode.add_argument("--plant", action="store_true")
    mode.add_argument("--model", action="store_true")
    r.add_argument("--controls", required=True)
    r.add_argument("--config", required=True)
    r.add_argument("--models", help="model directory (with --model)")
    r.add_argument("--seed", type=int, help=seed_help)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_rollout)

    rp = sub.add_parser("report", help="SVG overlays and metrics for a run directory")
    rp.add_argument("--run", required=True)
    rp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (OutOfDomainError, InvalidInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except io.FileFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
