"""Least-squares identification of the augmented-state dynamics model.

Channels 0-7 of the next state are fitted as ``A z + B u`` (no intercept).
The end-effector height (channel 8) is fitted on the quadratic feature map
``phi(w)`` of ``w = [z; u]``::

    phi(w) = [1, w_0 .. w_29, w_0^2 .. w_29^2, w_i w_j for i < j]

with the pairs in lexicographic ``(i, j)`` order, 496 features in total.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core import (
    AUG_DIM,
    CONTROL_DIM,
    DT,
    EE_POS,
    EE_Z,
    QR_POS,
    STATE_DIM,
    FloatArray,
    InvalidInputError,
    VineConfig,
)
from .plant import FlightLog

log = logging.getLogger(__name__)

FEATURE_VERSION = "quad-lex-v1"
N_INPUTS = AUG_DIM + CONTROL_DIM
MIN_LOG_LENGTH = 4
DEFAULT_RIDGE = 1e-8
DIVERGENCE_THRESHOLD = 0.5  # [m]


class FitError(RuntimeError):
    """Regression could not be solved as posed."""


# ---------------------------------------------------------------- features


def n_quadratic_features(n_inputs: int = N_INPUTS) -> int:
    return 1 + 2 * n_inputs + n_inputs * (n_inputs - 1) // 2


def pair_index(i: int, j: int, n_inputs: int = N_INPUTS) -> int:
    """Flat feature index of the product ``w_i w_j`` (``i < j``)."""
    if not 0 <= i < j < n_inputs:
        raise IndexError(f"need 0 <= i < j < {n_inputs}, got ({i}, {j})")
    offset = 1 + 2 * n_inputs
    # pairs preceding row i: sum_{r<i} (n - 1 - r)
    before = i * (n_inputs - 1) - i * (i - 1) // 2
    return offset + before + (j - i - 1)


def pair_from_index(k: int, n_inputs: int = N_INPUTS) -> tuple[int, int]:
    pairs = np.triu_indices(n_inputs, k=1)
    pos = k - (1 + 2 * n_inputs)
    if not 0 <= pos < len(pairs[0]):
        raise IndexError(f"feature {k} is not a pair term")
    return int(pairs[0][pos]), int(pairs[1][pos])


def feature_names(n_z: int = AUG_DIM, n_u: int = CONTROL_DIM) -> list[str]:
    """Symbolic names, 1-based like ``z1``, ``u1``."""
    w = [f"z{i + 1}" for i in range(n_z)] + [f"u{i + 1}" for i in range(n_u)]
    if n_u == 1:
        w[-1] = "u"
    names = ["1"] + w + [f"{v}^2" for v in w]
    iu, ju = np.triu_indices(len(w), k=1)
    names += [f"{w[i]}*{w[j]}" for i, j in zip(iu, ju)]
    return names


def quadratic_features(z, u) -> FloatArray:
    """Offset, linear, squared and pairwise terms of ``[z; u]``.

    Works on single points or on row-stacked batches.
    """
    z = np.asarray(z, dtype=float)
    u = np.asarray(u, dtype=float)
    single = z.ndim == 1
    w = np.concatenate([np.atleast_2d(z), np.atleast_2d(u)], axis=1)
    iu, ju = np.triu_indices(w.shape[1], k=1)
    phi = np.concatenate([np.ones((w.shape[0], 1)), w, w * w, w[:, iu] * w[:, ju]], axis=1)
    return phi[0] if single else phi


# ----------------------------------------------------------------- dataset


@dataclass(frozen=True, eq=False)
class Dataset:
    """Regression rows ``(z_k, u_k) -> x_{k+1}`` with per-log segment bounds."""

    z: FloatArray
    u: FloatArray
    x_next: FloatArray
    segments: tuple[tuple[int, int], ...]
    source_config: VineConfig | None = None
    dt: float = DT

    def __len__(self) -> int:
        return self.z.shape[0]

    def linear_design(self) -> FloatArray:
        return np.hstack([self.z, self.u])

    def quadratic_design(self) -> FloatArray:
        return quadratic_features(self.z, self.u)


def build_dataset(logs: FlightLog | Iterable[FlightLog]) -> Dataset:
    """Rows for ``k = 2 .. M-2`` of every log; logs are never stitched together."""
    if isinstance(logs, FlightLog):
        logs = [logs]
    zs, us, xs, segments = [], [], [], []
    dts, configs = set(), set()
    n = 0
    for flight in logs:
        M = len(flight)
        if M < MIN_LOG_LENGTH:
            log.warning("skipping log with %d timesteps (< %d)", M, MIN_LOG_LENGTH)
            continue
        x = flight.x
        z = np.hstack([x[2 : M - 1], x[1 : M - 2], x[0 : M - 3]])
        zs.append(z)
        us.append(flight.u[2 : M - 1])
        xs.append(x[3:M])
        segments.append((n, n + M - 3))
        n += M - 3
        dts.add(flight.dt)
        configs.add(flight.config)
    if not segments:
        raise InvalidInputError(f"every log is shorter than {MIN_LOG_LENGTH} timesteps")
    if len(dts) != 1:
        raise InvalidInputError(f"logs disagree on dt: {sorted(dts)}")
    cfg = configs.pop() if len(configs) == 1 else None
    return Dataset(np.vstack(zs), np.vstack(us), np.vstack(xs), tuple(segments), cfg, dts.pop())


def split_log(flight: FlightLog, train_fraction: float = 0.8) -> tuple[FlightLog, FlightLog]:
    """Split by time: the head trains, the tail validates."""
    cut = int(round(len(flight) * train_fraction))
    return flight.slice(0, cut), flight.slice(cut, len(flight))


# ----------------------------------------------------------------- solvers


def _ridge_lstsq(X: FloatArray, Y: FloatArray, ridge: float, free: Sequence[int] = ()) -> FloatArray:
    """Minimise ``|X b - Y|^2 + ridge |b|^2`` (``free`` columns unpenalised).

    Solved as an augmented least-squares problem with an SVD-based solver; the
    normal equations are never formed. All-zero columns are unidentifiable and
    pinned to zero when ``ridge > 0``.
    """
    if ridge < 0:
        raise InvalidInputError("ridge must be non-negative")
    n_rows, n_cols = X.shape
    Y2 = Y.reshape(n_rows, -1)
    coef = np.zeros((n_cols, Y2.shape[1]))
    active = np.flatnonzero(np.any(X != 0.0, axis=0))
    if ridge == 0.0:
        if n_rows < n_cols:
            raise FitError(
                f"{n_rows} rows cannot determine {n_cols} coefficients; use a nonzero ridge"
            )
        if len(active) < n_cols or np.linalg.matrix_rank(X) < n_cols:
            raise FitError(
                f"regressors are rank deficient (condition number {np.linalg.cond(X):.3g}); "
                "use a nonzero ridge"
            )
        coef[:] = np.linalg.lstsq(X, Y2, rcond=None)[0]
        return coef.reshape((n_cols,) + Y.shape[1:])
    penalised = np.array([c for c in active if c not in set(free)], dtype=int)
    Xa = X[:, active]
    pen_rows = np.zeros((len(penalised), len(active)))
    pen_rows[np.arange(len(penalised)), np.searchsorted(active, penalised)] = np.sqrt(ridge)
    X_aug = np.vstack([Xa, pen_rows])
    Y_aug = np.vstack([Y2, np.zeros((len(penalised), Y2.shape[1]))])
    coef[active] = np.linalg.lstsq(X_aug, Y_aug, rcond=None)[0]
    return coef.reshape((n_cols,) + Y.shape[1:])


def fit_linear(data: Dataset, ridge: float = DEFAULT_RIDGE) -> tuple[FloatArray, FloatArray]:
    """Fit ``x_next ~ A z + B u`` for all nine channels."""
    X = data.linear_design()
    if ridge == 0.0 and len(data) < N_INPUTS:
        raise FitError(f"need at least {N_INPUTS} rows, got {len(data)}; or use a nonzero ridge")
    coef = _ridge_lstsq(X, data.x_next, ridge)  # (30, 9)
    return coef[:AUG_DIM].T.copy(), coef[AUG_DIM:].T.copy()


def fit_tip_height(data: Dataset, ridge: float = DEFAULT_RIDGE) -> FloatArray:
    """Fit end-effector height on the quadratic features; the offset is not penalised."""
    Phi = data.quadratic_design()
    return _ridge_lstsq(Phi, data.x_next[:, EE_Z], ridge, free=(0,))


def fit_config_model(logs, cfg: VineConfig, ridge: float = DEFAULT_RIDGE):
    from .model import DynModel

    data = build_dataset(logs)
    A, B = fit_linear(data, ridge)
    a = fit_tip_height(data, ridge)
    return DynModel(A, B, a, cfg, data.dt)


# -------------------------------------------------------------- validation


@dataclass(frozen=True)
class FitReport:
    rmse: tuple[float, ...]  # one-step, per channel
    ee_rmse: float  # one-step 3-D end-effector RMSE [m]
    divergence_horizon: int  # shortest rollout (over logs) staying within 0.5 m
    horizons: tuple[int, ...] = field(default=())
    condition_number: float = 0.0
    n_rows: int = 0

    def to_dict(self) -> dict:
        return {
            "rmse": list(self.rmse),
            "ee_rmse": self.ee_rmse,
            "divergence_horizon": self.divergence_horizon,
            "horizons": list(self.horizons),
            "condition_number": self.condition_number,
            "n_rows": self.n_rows,
        }


def _divergence_horizon(model, data: Dataset, start: int, stop: int) -> int:
    from .model import predict

    z = data.z[start].copy()
    for k, row in enumerate(range(start, stop)):
        x = predict(model, z, data.u[row])
        truth = data.x_next[row]
        err = max(
            np.linalg.norm(x[QR_POS] - truth[QR_POS]), np.linalg.norm(x[EE_POS] - truth[EE_POS])
        )
        if not np.isfinite(err) or err > DIVERGENCE_THRESHOLD:
            return k
        z = np.concatenate([x, z[: AUG_DIM - STATE_DIM]])
    return stop - start


def validate(model, data: Dataset) -> FitReport:
    from .model import predict_batch

    if abs(model.dt - data.dt) > 1e-12:
        raise InvalidInputError(f"model dt {model.dt} does not match data dt {data.dt}")
    pred = predict_batch(model, data.z, data.u)
    err = pred - data.x_next
    rmse = np.sqrt(np.mean(err**2, axis=0))
    ee_rmse = float(np.sqrt(np.mean(np.sum(err[:, EE_POS] ** 2, axis=1))))
    horizons = tuple(_divergence_horizon(model, data, s, e) for s, e in data.segments)
    X = data.linear_design()
    # structurally empty columns are pinned by the fit, so leave them out
    cond = float(np.linalg.cond(X[:, np.any(X != 0.0, axis=0)]))
    return FitReport(
        tuple(float(r) for r in rmse),
        ee_rmse,
        min(horizons),
        horizons,
        cond if np.isfinite(cond) else float("inf"),
        len(data),
    )
