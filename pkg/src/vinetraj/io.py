"""File formats: flight-log CSV (+ JSON sidecar), model JSON, controls CSV, metrics JSON."""

from __future__ import annotations

import csv
import json
import os
import tempfile
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .core import DT, STATE_DIM, Trajectory, VineConfig
from .model import DynModel, N_FEATURES
from .plant import FlightLog, PlantParams
from .sysid import FEATURE_VERSION

LOG_HEADER = ["t", "ux", "uy", "uz", "qrx", "qry", "qrz", "qvx", "qvy", "qvz", "eex", "eey", "eez"]
CONTROLS_HEADER = ["t", "ux", "uy", "uz"]
REFERENCE_HEADER = LOG_HEADER


class FileFormatError(ValueError):
    pass


def _fmt(v: float) -> str:
    # 17 significant digits round-trips every double exactly
    return format(float(v), ".17g")


def atomic_write_text(path, text: str) -> Path:
    """Write via a temporary file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_json(path, obj) -> Path:
    return atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def _csv_text(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _read_csv(path, header) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            found = next(reader)
        except StopIteration:
            raise FileFormatError(f"{path}: empty file") from None
        if [h.strip() for h in found] != header:
            raise FileFormatError(f"{path}: expected header {','.join(header)}")
        rows = [[float(v) for v in row] for row in reader if row]
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    return data


def _check_times(path, t: np.ndarray) -> float:
    if len(t) < 2:
        return DT
    steps = np.diff(t)
    dt = float(np.median(steps))
    if dt <= 0 or np.any(np.abs(steps - dt) > 1e-6):
        raise FileFormatError(f"{path}: t must increase at a uniform step")
    # differences of stored times carry rounding noise; the step itself is a short decimal
    return float(f"{dt:.9g}")


# ------------------------------------------------------------- flight logs


def sidecar_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".json")


def _config_dict(cfg: VineConfig) -> dict:
    return {"pressure": cfg.pressure, "length": cfg.length}


def write_flight_log(path, flight: FlightLog, extra: dict | None = None) -> Path:
    rows = np.column_stack([flight.t, flight.u, flight.x])
    atomic_write_text(path, _csv_text(LOG_HEADER, rows))
    meta = {"dt": flight.dt, "seed": flight.seed, "plant_params": asdict(flight.params)}
    if flight.config is not None:
        meta["config"] = _config_dict(flight.config)
    elif flight.configs:
        meta["schedule"] = [_config_dict(c) for c in flight.configs]
    if extra:
        meta.update(extra)
    write_json(sidecar_path(path), meta)
    return Path(path)


def read_flight_log(path) -> FlightLog:
    data = _read_csv(path, LOG_HEADER)
    dt = _check_times(path, data[:, 0])
    meta = read_json(sidecar_path(path)) if sidecar_path(path).exists() else {}
    dt = float(meta.get("dt", dt))
    if "config" in meta:
        configs = (VineConfig(**meta["config"]),) * len(data)
    elif "schedule" in meta:
        configs = tuple(VineConfig(**c) for c in meta["schedule"])
    else:
        configs = ()
    params = PlantParams(**meta["plant_params"]) if "plant_params" in meta else PlantParams()
    return FlightLog(data[:, 1:4], data[:, 4:13], dt, configs, meta.get("seed"), params)


def trajectory_rows(traj: Trajectory) -> np.ndarray:
    """Model trajectory in flight-log layout; the last row repeats the last control."""
    u = np.vstack([traj.controls, traj.controls[-1:]])
    return np.column_stack([traj.times, u, traj.states[:, :STATE_DIM]])


def write_trajectory(path, traj: Trajectory) -> Path:
    return atomic_write_text(path, _csv_text(LOG_HEADER, trajectory_rows(traj)))


def write_reference(path, z_bar, u_bar, dt: float) -> Path:
    u = np.vstack([u_bar, u_bar[-1:]])
    rows = np.column_stack([np.arange(len(z_bar)) * dt, u, z_bar[:, :STATE_DIM]])
    return atomic_write_text(path, _csv_text(REFERENCE_HEADER, rows))


def read_state_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(t, u, x)`` from any file in flight-log layout."""
    data = _read_csv(path, LOG_HEADER)
    return data[:, 0], data[:, 1:4], data[:, 4:13]


# ---------------------------------------------------------------- controls


def write_controls(path, U, dt: float = DT) -> Path:
    U = np.asarray(U, dtype=float).reshape(-1, 3)
    rows = np.column_stack([np.arange(len(U)) * dt, U])
    return atomic_write_text(path, _csv_text(CONTROLS_HEADER, rows))


def read_controls(path) -> tuple[np.ndarray, float]:
    data = _read_csv(path, CONTROLS_HEADER)
    if len(data) == 0:
        raise FileFormatError(f"{path}: no controls")
    return data[:, 1:4], _check_times(path, data[:, 0])


# ------------------------------------------------------------------ models


def model_to_dict(m: DynModel, report: dict | None = None) -> dict:
    return {
        "feature_version": m.version,
        "cfg": _config_dict(m.cfg),
        "dt": m.dt,
        "A": m.A.tolist(),
        "B": m.B.tolist(),
        "a": m.a.tolist(),
        "fit_report": report or {},
    }


def model_from_dict(d: dict) -> DynModel:
    if d.get("feature_version") != FEATURE_VERSION:
        raise FileFormatError(f"unrecognised feature version {d.get('feature_version')!r}")
    A = np.array(d["A"], dtype=float)
    B = np.array(d["B"], dtype=float)
    a = np.array(d["a"], dtype=float)
    if A.shape != (9, 27) or B.shape != (9, 3) or a.shape != (N_FEATURES,):
        raise FileFormatError("model dimensions do not match 9x27 / 9x3 / 496")
    return DynModel(A, B, a, VineConfig(**d["cfg"]), float(d["dt"]), d["feature_version"])


def write_model(path, m: DynModel, report: dict | None = None) -> Path:
    # json writes floats with repr(), which round-trips exactly
    return write_json(path, model_to_dict(m, report))


def read_model(path) -> DynModel:
    try:
        return model_from_dict(read_json(path))
    except (KeyError, TypeError) as exc:
        raise FileFormatError(f"{path}: malformed model file ({exc})") from None


def load_corner_models(directory) -> dict[str, DynModel]:
    directory = Path(directory)
    found = {}
    for name in ("ES", "IS", "EL", "IL"):
        path = directory / f"{name}.json"
        if path.exists():
            found[name] = read_model(path)
    return found
