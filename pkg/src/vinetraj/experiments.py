"""End-to-end runs on the synthetic plant: fit corners, optimise, replay open-loop, report."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .core import (
    AUG_DIM,
    CONTROL_DIM,
    CORNERS,
    DT,
    EE_POS,
    EE_Z,
    LENGTH_BOUNDS,
    QR_POS,
    VineConfig,
    augment,
    mean_euclidean_distance,
    rest_state,
)
from .model import CornerSet, DynModel, interpolate
from .plant import FlightLog, PlantParams, run_plant
from .plots import overlay_plots
from .reference import (
    HOVER_HEIGHT,
    ReferenceSet,
    growth_reference,
    lemniscate_reference,
    swing_reference,
)
from .sysid import FitReport, build_dataset, fit_config_model, split_log, validate
from .training import SCRIPTS, script_commands
from .trajopt import (
    Equality,
    SolverDivergedError,
    SolverOptions,
    SolveStats,
    TrajOptProblem,
    solve,
)

log = logging.getLogger(__name__)

PIPELINE_RIDGE = 1e-4
EE_RMSE_WARN = 0.05  # [m]
EE_WEIGHT = 20.0
LEMNISCATE_LIMIT = 3.0  # [m]
SWING_U_MIN = np.array([-2.0, -0.1, HOVER_HEIGHT - 0.1])
SWING_U_MAX = np.array([2.0, 0.1, HOVER_HEIGHT + 0.1])
SWING_TARGET = (1.0, 1.1)  # x, z for the shortest vine
SWING_N = 200
SWING_QR_X_MARGIN = 0.4  # quadrotor x stays this far behind the target
SWING_QR_Z_BAND = 0.25
MINOR_EXCURSION = 0.05  # [m]


# ------------------------------------------------------------ corner fits


@dataclass(frozen=True, eq=False)
class CornerFit:
    corners: CornerSet
    train_reports: dict[str, FitReport]
    heldout_reports: dict[str, FitReport]
    warnings: tuple[str, ...] = ()


def training_logs(cfg: VineConfig, seed: int, params: PlantParams = PlantParams(),
                  corner_index: int = 0) -> list[FlightLog]:
    """One 30 s flight per training script, each with its own noise stream."""
    logs = []
    for j, name in enumerate(SCRIPTS):
        sub_seed = int(np.random.SeedSequence([seed, corner_index, j]).generate_state(1)[0])
        logs.append(run_plant(script_commands(name), cfg, params, sub_seed))
    return logs


def fit_all_corners(seed: int = 0, params: PlantParams = PlantParams(),
                    ridge: float = PIPELINE_RIDGE, out_dir=None) -> CornerFit:
    """Fly the training scripts at each corner, fit on the first 80 % of every
    log and validate on the rest."""
    models, train_reports, heldout_reports, warnings = {}, {}, {}, []
    for i, (name, cfg) in enumerate(CORNERS.items()):
        parts = [split_log(lg) for lg in training_logs(cfg, seed, params, i)]
        train = [p[0] for p in parts]
        held = [p[1] for p in parts]
        m = fit_config_model(train, cfg, ridge)
        train_reports[name] = validate(m, build_dataset(train))
        heldout_reports[name] = rep = validate(m, build_dataset(held))
        if rep.ee_rmse > EE_RMSE_WARN:
            msg = f"{name}: held-out one-step EE RMSE {rep.ee_rmse:.3f} m exceeds {EE_RMSE_WARN} m"
            log.warning(msg)
            warnings.append(msg)
        models[name] = m
        if out_dir is not None:
            io.write_model(Path(out_dir) / f"{name}.json", m,
                           {"train": train_reports[name].to_dict(), "heldout": rep.to_dict(),
                            "seed": seed, "ridge": ridge})
    return CornerFit(CornerSet(models), train_reports, heldout_reports, tuple(warnings))


# ---------------------------------------------------------------- reports


@dataclass
class ExperimentReport:
    task: str
    config: str
    mean_ee_error_m: float  # plant replay vs reference
    model_ee_error_m: float  # model-predicted trajectory vs reference
    plant_model_ee_error_m: float  # plant replay vs model-predicted trajectory
    violations: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    success: bool = True
    paths: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class RunResult:
    report: ExperimentReport
    reference: ReferenceSet
    solution: object  # Trajectory
    stats: SolveStats
    plant: FlightLog
    baseline: FlightLog | None = None


def rest_augmented(length: float, height: float = HOVER_HEIGHT) -> np.ndarray:
    x = rest_state(length, height)
    return augment(x, x, x)


def replay(U, configs, params: PlantParams, seed: int, p0) -> FlightLog:
    """Open-loop plant replay of ``N-1`` controls; returns ``N`` observations
    aligned with the model states (the final command is a repeat)."""
    U = np.asarray(U, dtype=float)
    padded = np.vstack([U, U[-1:]])
    return run_plant(padded, configs, params, seed, p0=p0)


def _box_violation(U, lo, hi) -> float:
    return float(max(np.max(U - hi), np.max(lo - U), 0.0))


def _write_run(out_dir, result: RunResult, extra_logs: dict[str, FlightLog] | None = None) -> dict:
    out = Path(out_dir)
    ref, sol, plant = result.reference, result.solution, result.plant
    paths = {
        "reference": io.write_reference(out / "reference.csv", ref.z_bar, ref.u_bar, ref.dt),
        "controls": io.write_controls(out / "controls.csv", sol.controls, sol.dt),
        "model_trajectory": io.write_trajectory(out / "model_trajectory.csv", sol),
        "plant_log": io.write_flight_log(out / "plant_log.csv", plant),
    }
    for name, lg in (extra_logs or {}).items():
        paths[name] = io.write_flight_log(out / f"{name}.csv", lg)
    plots = overlay_plots(out / "plots", plant.t, plant.u, plant.x, ref.x_bar, prefix="plant_")
    paths["plots"] = [str(p) for p in plots]
    paths = {k: (str(v) if isinstance(v, Path) else v) for k, v in paths.items()}
    result.report.paths = paths
    io.write_json(out / "metrics.json", result.report.to_dict())
    return paths


def _errors(ref: ReferenceSet, sol, plant: FlightLog) -> tuple[float, float, float]:
    return (
        mean_euclidean_distance(plant.x[:, EE_POS], ref.ee),
        mean_euclidean_distance(sol.ee, ref.ee),
        mean_euclidean_distance(plant.x[:, EE_POS], sol.ee),
    )


def _solve_or_fail(problem, task, label, options):
    try:
        return solve(problem, options=options)
    except SolverDivergedError as exc:
        log.error("%s/%s: solver diverged: %s", task, label, exc)
        return None, exc.stats


def _failed(task: str, label: str, stats) -> ExperimentReport:
    nan = float("nan")
    return ExperimentReport(task, label, nan, nan, nan, solver=stats.to_dict() if stats else {},
                            success=False)


# ------------------------------------------------------------- lemniscate


def lemniscate_problem(model, cfg: VineConfig, T: float, refs: ReferenceSet | None = None):
    refs = lemniscate_reference(T, cfg.length) if refs is None else refs
    Q = np.ones(AUG_DIM)
    Q[EE_POS] = EE_WEIGHT
    problem = TrajOptProblem.from_reference(
        model, refs, Q=Q, R=np.ones(CONTROL_DIM), z_rest=rest_augmented(refs.qr[0, 2] - refs.ee[0, 2]),
        u_min=np.full(CONTROL_DIM, -LEMNISCATE_LIMIT), u_max=np.full(CONTROL_DIM, LEMNISCATE_LIMIT),
    )
    return problem, refs


def run_lemniscate(corners: CornerSet, cfg_name: str, T: float, seed: int = 0,
                   params: PlantParams = PlantParams(), out_dir=None,
                   options: SolverOptions = SolverOptions()):
    cfg = CORNERS[cfg_name]
    problem, refs = lemniscate_problem(corners[cfg_name], cfg, T)
    sol, stats = _solve_or_fail(problem, "lemniscate", cfg_name, options)
    if sol is None:
        return RunResult(_failed("lemniscate", cfg_name, stats), refs, None, stats, None)
    p0 = refs.qr[0]
    plant = replay(sol.controls, cfg, params, seed, p0)
    baseline = replay(refs.qr[:-1], cfg, params, seed, p0)
    plant_err, model_err, gap = _errors(refs, sol, plant)
    base_err = mean_euclidean_distance(baseline.x[:, EE_POS], refs.ee)
    lo, hi = problem.u_min, problem.u_max
    report = ExperimentReport(
        "lemniscate", cfg_name, plant_err, model_err, gap,
        violations={"control_box_m": _box_violation(sol.controls, lo, hi)},
        metrics={
            "T": T,
            "N": problem.N,
            "baseline_ee_error_m": base_err,
            "improvement_vs_baseline": 1.0 - plant_err / base_err,
            "max_abs_control_xy_m": float(np.max(np.abs(sol.controls[:, :2]))),
        },
        solver=stats.to_dict(),
        success=stats.converged,
    )
    result = RunResult(report, refs, sol, stats, plant, baseline)
    if out_dir is not None:
        _write_run(out_dir, result, {"baseline_log": baseline})
    return result


# ------------------------------------------------------------------ swing


def swing_target_height(length: float, z_short: float = SWING_TARGET[1]) -> float:
    """Target height for a vine of ``length``: the same rise above the hanging
    rest height as ``z_short`` gives the shortest vine."""
    return z_short - (length - LENGTH_BOUNDS[0])


def swing_problem(model, cfg: VineConfig, x_target: float, z_target: float, N: int = SWING_N,
                  refs: ReferenceSet | None = None):
    refs = swing_reference(N, l_vine=cfg.length) if refs is None else refs
    k = N // 2 - 1  # the N/2-th state, 0-based
    z_min = np.full(AUG_DIM, -np.inf)
    z_max = np.full(AUG_DIM, np.inf)
    z_max[0] = x_target - SWING_QR_X_MARGIN
    z_min[2], z_max[2] = HOVER_HEIGHT - SWING_QR_Z_BAND, HOVER_HEIGHT + SWING_QR_Z_BAND
    eqs = [
        Equality(k, 6, x_target),
        Equality(k, EE_Z, z_target),
        Equality(k - 1, 6, x_target - 0.1),
        Equality(k - 1, EE_Z, z_target - 0.1),
    ]
    problem = TrajOptProblem.from_reference(
        model, refs, Q=np.ones(AUG_DIM), R=np.full(CONTROL_DIM, 10.0),
        z_rest=rest_augmented(cfg.length), u_min=SWING_U_MIN, u_max=SWING_U_MAX,
        z_min=z_min, z_max=z_max, equalities=eqs,
    )
    return problem, refs, k


def run_swing(corners: CornerSet, cfg_name: str, x_target: float = SWING_TARGET[0],
              z_target: float | None = None, N: int = SWING_N, seed: int = 0,
              params: PlantParams = PlantParams(), out_dir=None,
              options: SolverOptions = SolverOptions()):
    cfg = CORNERS[cfg_name]
    if z_target is None:
        z_target = swing_target_height(cfg.length)
    problem, refs, k = swing_problem(corners[cfg_name], cfg, x_target, z_target, N)
    sol, stats = _solve_or_fail(problem, "swing", cfg_name, options)
    if sol is None:
        return RunResult(_failed("swing", cfg_name, stats), refs, None, stats, None)
    plant = replay(sol.controls, cfg, params, seed, rest_state(cfg.length)[QR_POS])
    plant_err, model_err, gap = _errors(refs, sol, plant)
    target = np.array([x_target, 0.0, z_target])
    qr = plant.x[:, QR_POS]
    x_exc = float(max(np.max(qr[:, 0] - problem.z_max[0]), 0.0))
    z_exc = float(max(np.max(np.abs(qr[:, 2] - HOVER_HEIGHT) - SWING_QR_Z_BAND), 0.0))
    ee = sol.ee
    eq_res = max(abs(ee[k, 0] - x_target), abs(ee[k, 2] - z_target),
                 abs(ee[k - 1, 0] - x_target + 0.1), abs(ee[k - 1, 2] - z_target + 0.1))
    report = ExperimentReport(
        "swing", cfg_name, plant_err, model_err, gap,
        violations={
            "control_box_m": _box_violation(sol.controls, problem.u_min, problem.u_max),
            "equality_residual_m": float(eq_res),
            "plant_qr_x_excursion_m": x_exc,
            "plant_qr_z_excursion_m": z_exc,
            "excursions_minor": bool(max(x_exc, z_exc) <= MINOR_EXCURSION),
        },
        metrics={
            "N": N,
            "target": [x_target, z_target],
            "target_step": k,
            "plant_miss_distance_m": float(np.linalg.norm(plant.x[k, EE_POS] - target)),
            "model_miss_distance_m": float(np.linalg.norm(ee[k] - target)),
            "model_ee_velocity_at_target": ((ee[k] - ee[k - 1]) / sol.dt).tolist(),
        },
        solver=stats.to_dict(),
        success=stats.converged,
    )
    result = RunResult(report, refs, sol, stats, plant)
    if out_dir is not None:
        _write_run(out_dir, result)
    return result


# ----------------------------------------------------------------- growth


def growth_problem(corners: CornerSet, N: int = 400, T: float = 10.0):
    refs, schedule = growth_reference(N, T)
    models = [interpolate(corners, c) for c in schedule[:-1]]
    Q = np.ones(AUG_DIM)
    Q[EE_POS] = EE_WEIGHT
    problem = TrajOptProblem.from_reference(
        models, refs, Q=Q, R=np.ones(CONTROL_DIM), z_rest=rest_augmented(schedule[0].length),
        u_min=np.full(CONTROL_DIM, -LEMNISCATE_LIMIT), u_max=np.full(CONTROL_DIM, LEMNISCATE_LIMIT),
    )
    return problem, refs, schedule


def run_growth(corners: CornerSet, N: int = 400, T: float = 10.0, seed: int = 0,
               params: PlantParams = PlantParams(), out_dir=None,
               options: SolverOptions = SolverOptions()):
    problem, refs, schedule = growth_problem(corners, N, T)
    sol, stats = _solve_or_fail(problem, "growth", "ES->IL", options)
    if sol is None:
        return RunResult(_failed("growth", "ES->IL", stats), refs, None, stats, None)
    plant = replay(sol.controls, schedule, params, seed, refs.qr[0])
    plant_err, model_err, gap = _errors(refs, sol, plant)
    report = ExperimentReport(
        "growth", "ES->IL", plant_err, model_err, gap,
        violations={"control_box_m": _box_violation(sol.controls, problem.u_min, problem.u_max)},
        metrics={
            "N": N,
            "T": T,
            "model_ee_height_max_dev_m": float(np.max(np.abs(sol.ee[:, 2] - refs.ee[:, 2]))),
            "plant_ee_height_max_dev_m": float(np.max(np.abs(plant.x[:, EE_Z] - refs.ee[:, 2]))),
            "qr_reference_rise_m": float(refs.qr[-1, 2] - refs.qr[0, 2]),
            "schedule_start": [schedule[0].pressure, schedule[0].length],
            "schedule_end": [schedule[-1].pressure, schedule[-1].length],
        },
        solver=stats.to_dict(),
        success=stats.converged,
    )
    result = RunResult(report, refs, sol, stats, plant)
    if out_dir is not None:
        _write_run(out_dir, result)
    return result
