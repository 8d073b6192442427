"""Fitted dynamics model: prediction, rollout, Jacobians and corner interpolation."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .core import (
    AUG_DIM,
    CONTROL_DIM,
    CORNERS,
    DT,
    EE_Z,
    LENGTH_BOUNDS,
    PRESSURE_BOUNDS,
    STATE_DIM,
    FloatArray,
    InvalidInputError,
    OutOfDomainError,
    Trajectory,
    VineConfig,
)
from .sysid import FEATURE_VERSION, N_INPUTS, n_quadratic_features

N_FEATURES = n_quadratic_features(N_INPUTS)
_IU, _JU = np.triu_indices(N_INPUTS, k=1)


class FeatureVersionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DynModel:
    """``x_next[0:8] = A z + B u`` and ``x_next[8] = a . phi(z, u)``."""

    A: FloatArray
    B: FloatArray
    a: FloatArray
    cfg: VineConfig
    dt: float = DT
    version: str = FEATURE_VERSION

    def __post_init__(self) -> None:
        A = np.array(self.A, dtype=float)
        B = np.array(self.B, dtype=float)
        a = np.array(self.a, dtype=float).reshape(-1)
        if A.shape != (STATE_DIM, AUG_DIM) or B.shape != (STATE_DIM, CONTROL_DIM):
            raise InvalidInputError(f"bad model shapes A{A.shape} B{B.shape}")
        if a.shape != (N_FEATURES,):
            raise InvalidInputError(f"tip-height model needs {N_FEATURES} coefficients")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B)) and np.all(np.isfinite(a))):
            raise InvalidInputError("model parameters must be finite")
        for name, arr in (("A", A), ("B", B), ("a", a)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @cached_property
    def _quad(self) -> tuple[float, FloatArray, FloatArray]:
        """(offset, linear coefficients, symmetric Hessian) of the height model."""
        a = self.a
        lin = a[1 : 1 + N_INPUTS]
        H = np.zeros((N_INPUTS, N_INPUTS))
        H[_IU, _JU] = a[1 + 2 * N_INPUTS :]
        H = H + H.T
        H[np.diag_indices(N_INPUTS)] = 2.0 * a[1 + N_INPUTS : 1 + 2 * N_INPUTS]
        return float(a[0]), lin, H

    def params_vector(self) -> FloatArray:
        return np.concatenate([self.A.ravel(), self.B.ravel(), self.a])


def zero_model(cfg: VineConfig = CORNERS["ES"], dt: float = DT) -> DynModel:
    return DynModel(
        np.zeros((STATE_DIM, AUG_DIM)), np.zeros((STATE_DIM, CONTROL_DIM)), np.zeros(N_FEATURES), cfg, dt
    )


def _check_version(m: DynModel) -> None:
    if m.version != FEATURE_VERSION:
        raise FeatureVersionError(f"model feature version {m.version!r} != {FEATURE_VERSION!r}")


def predict(m: DynModel, z, u) -> FloatArray:
    _check_version(m)
    z = np.asarray(z, dtype=float)
    u = np.asarray(u, dtype=float)
    x = m.A @ z + m.B @ u
    w = np.concatenate([z, u])
    a0, lin, H = m._quad
    x[EE_Z] = a0 + lin @ w + 0.5 * (w @ (H @ w))
    return x


def predict_batch(m: DynModel, Z, U) -> FloatArray:
    """Row-wise :func:`predict` for stacked inputs."""
    from .sysid import quadratic_features

    _check_version(m)
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    U = np.atleast_2d(np.asarray(U, dtype=float))
    X = Z @ m.A.T + U @ m.B.T
    X[:, EE_Z] = quadratic_features(Z, U) @ m.a
    return X


def jacobians(m: DynModel, z, u) -> tuple[FloatArray, FloatArray]:
    """Analytic ``(df/dz, df/du)``; row 8 is the gradient of the quadratic height model."""
    w = np.concatenate([np.asarray(z, dtype=float), np.asarray(u, dtype=float)])
    _, lin, H = m._quad
    grad = lin + H @ w
    fz = m.A.copy()
    fu = m.B.copy()
    fz[EE_Z] = grad[:AUG_DIM]
    fu[EE_Z] = grad[AUG_DIM:]
    return fz, fu


def _schedule(model: DynModel | Sequence[DynModel], n_steps: int) -> list[DynModel]:
    if isinstance(model, DynModel):
        return [model] * n_steps
    models = list(model)
    if len(models) != n_steps:
        raise InvalidInputError(f"model schedule has {len(models)} entries, need {n_steps}")
    return models


def step(m: DynModel, z: FloatArray, u: FloatArray) -> FloatArray:
    """One augmented-state transition: predict, then shift the history."""
    z_next = np.empty(AUG_DIM)
    z_next[:STATE_DIM] = predict(m, z, u)
    z_next[STATE_DIM:] = z[: AUG_DIM - STATE_DIM]
    return z_next


def rollout(model: DynModel | Sequence[DynModel], z0, U) -> Trajectory:
    """Open-loop rollout; with a schedule, transition ``k`` uses ``model[k]``."""
    U = np.asarray(U, dtype=float).reshape(-1, CONTROL_DIM)
    z0 = np.asarray(z0, dtype=float)
    if z0.shape != (AUG_DIM,):
        raise InvalidInputError("z0 must have 27 entries")
    if U.shape[0] < 1:
        raise InvalidInputError("need at least one control")
    models = _schedule(model, U.shape[0])
    Z = np.empty((U.shape[0] + 1, AUG_DIM))
    Z[0] = z0
    for k, mk in enumerate(models):
        Z[k + 1] = step(mk, Z[k], U[k])
    return Trajectory(models[0].dt, Z, U)


# ------------------------------------------------------------ interpolation


@dataclass(frozen=True)
class Bounds:
    pressure: tuple[float, float] = PRESSURE_BOUNDS
    length: tuple[float, float] = LENGTH_BOUNDS


CORNER_NAMES = ("ES", "IS", "EL", "IL")


def interp_weights(cfg: VineConfig, bounds: Bounds = Bounds()) -> tuple[float, float, float, float]:
    """Bilinear weights ``(ES, IS, EL, IL)``; no extrapolation."""
    (p0, p1), (l0, l1) = bounds.pressure, bounds.length
    s = (cfg.pressure - p0) / (p1 - p0)
    t = (cfg.length - l0) / (l1 - l0)
    if not (0.0 <= s <= 1.0 and 0.0 <= t <= 1.0):
        raise OutOfDomainError(f"{cfg} outside interpolation rectangle")
    return ((1 - s) * (1 - t), s * (1 - t), (1 - s) * t, s * t)


@dataclass(frozen=True, eq=False)
class CornerSet:
    """The four corner models, keyed ``ES``, ``IS``, ``EL``, ``IL``."""

    models: Mapping[str, DynModel]
    bounds: Bounds = Bounds()

    def __post_init__(self) -> None:
        missing = [n for n in CORNER_NAMES if n not in self.models]
        if missing:
            raise InvalidInputError(f"missing corner models: {missing}")
        models = {n: self.models[n] for n in CORNER_NAMES}
        (p0, p1), (l0, l1) = self.bounds.pressure, self.bounds.length
        expected = {"ES": (p0, l0), "IS": (p1, l0), "EL": (p0, l1), "IL": (p1, l1)}
        for name, m in models.items():
            if (m.cfg.pressure, m.cfg.length) != expected[name]:
                raise InvalidInputError(f"{name} model sits at {m.cfg}, expected {expected[name]}")
        if len({m.dt for m in models.values()}) != 1 or len({m.version for m in models.values()}) != 1:
            raise InvalidInputError("corner models disagree on dt or feature version")
        object.__setattr__(self, "models", models)

    def __getitem__(self, name: str) -> DynModel:
        return self.models[name]


def interpolate(cs: CornerSet, cfg: VineConfig) -> DynModel:
    """Blend corner parameters with the bilinear weights at ``cfg``."""
    weights = interp_weights(cfg, cs.bounds)
    ms = [cs[n] for n in CORNER_NAMES]
    for name, w, m in zip(CORNER_NAMES, weights, ms):
        if w == 1.0:
            return DynModel(m.A, m.B, m.a, cfg, m.dt, m.version)
    A = sum(w * m.A for w, m in zip(weights, ms))
    B = sum(w * m.B for w, m in zip(weights, ms))
    a = sum(w * m.a for w, m in zip(weights, ms))
    return DynModel(A, B, a, cfg, ms[0].dt, ms[0].version)
