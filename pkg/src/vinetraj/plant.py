"""Synthetic flying vine: position-controlled quadrotor carrying a damped spherical pendulum.

The quadrotor tracks its position command as a second-order system::

    p'' = wn^2 (u - p) - 2 zeta wn p'

The vine is a pendulum of length ``cfg.length`` hanging from the quadrotor,
described by a unit direction ``n`` (quadrotor -> end effector) and an angular
velocity ``w``::

    n' = w x n
    w' = k_eff (n x -e_z) - (n x p'') / length - c_damp w
    k_eff = g / length + k0 + k1 * pressure

Pressure stiffens the vine through ``k1``. Integration is fixed-step RK4.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (
    CONTROL_DIM,
    DT,
    GRAVITY,
    FloatArray,
    InvalidInputError,
    VineConfig,
    as_control,
)

SUBSTEPS = 5


@dataclass(frozen=True)
class PlantParams:
    omega_n: float = 4.0  # [rad/s] quadrotor position-loop natural frequency
    zeta: float = 0.95
    k0: float = 0.0  # [1/s^2]
    k1: float = 25.0  # [1/s^2 per kPa]
    c_damp: float = 0.8  # [1/s]
    g: float = GRAVITY
    noise_sigma: float = 0.002  # [m]

    def __post_init__(self) -> None:
        if self.omega_n <= 0 or self.zeta <= 0:
            raise InvalidInputError("omega_n and zeta must be positive")
        if self.k0 < 0 or self.c_damp < 0 or self.noise_sigma < 0:
            raise InvalidInputError("k0, c_damp and noise_sigma must be non-negative")

    def stiffness(self, cfg: VineConfig) -> float:
        return self.g / cfg.length + self.k0 + self.k1 * cfg.pressure


@dataclass(frozen=True, eq=False)
class PlantState:
    p_qr: FloatArray
    v_qr: FloatArray
    pend_dir: FloatArray
    pend_omega: FloatArray
    length: float

    def __post_init__(self) -> None:
        for name in ("p_qr", "v_qr", "pend_dir", "pend_omega"):
            arr = np.array(getattr(self, name), dtype=float).reshape(3)
            if not np.all(np.isfinite(arr)):
                raise InvalidInputError(f"non-finite plant state field {name}")
            object.__setattr__(self, name, arr)
        if abs(np.linalg.norm(self.pend_dir) - 1.0) > 1e-9:
            raise InvalidInputError("pend_dir must be a unit vector")

    @property
    def p_ee(self) -> FloatArray:
        return self.p_qr + self.length * self.pend_dir

    def pack(self) -> FloatArray:
        return np.concatenate([self.p_qr, self.v_qr, self.pend_dir, self.pend_omega])

    @classmethod
    def unpack(cls, y: FloatArray, length: float) -> "PlantState":
        return cls(y[0:3], y[3:6], y[6:9], y[9:12], length)


def equilibrium(p_qr, length: float) -> PlantState:
    """Hover at ``p_qr`` with the vine hanging straight down, everything at rest."""
    return PlantState(
        np.asarray(p_qr, dtype=float), np.zeros(3), np.array([0.0, 0.0, -1.0]), np.zeros(3), length
    )


def _cross(a: FloatArray, b: FloatArray) -> FloatArray:
    return np.array(
        [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
    )


def _deriv(y: FloatArray, u: FloatArray, k_eff: float, length: float, params: PlantParams):
    p, v, n, w = y[0:3], y[3:6], y[6:9], y[9:12]
    wn = params.omega_n
    acc = wn * wn * (u - p) - 2.0 * params.zeta * wn * v
    # n x (-e_z) = (-n_y, n_x, 0)
    restoring = np.array([-n[1], n[0], 0.0])
    dw = k_eff * restoring - _cross(n, acc) / length - params.c_damp * w
    return np.concatenate([v, acc, _cross(w, n), dw])


def _normalize(y: FloatArray) -> None:
    n = y[6:9]
    n /= np.sqrt(n @ n)
    # spin about the vine axis does not move the end effector
    y[9:12] -= (y[9:12] @ n) * n


def _step_packed(y, u, cfg: VineConfig, params: PlantParams, dt: float) -> FloatArray:
    k_eff = params.stiffness(cfg)
    length = cfg.length
    h = dt / SUBSTEPS
    y = y.copy()
    for _ in range(SUBSTEPS):
        k1 = _deriv(y, u, k_eff, length, params)
        k2 = _deriv(y + 0.5 * h * k1, u, k_eff, length, params)
        k3 = _deriv(y + 0.5 * h * k2, u, k_eff, length, params)
        k4 = _deriv(y + h * k3, u, k_eff, length, params)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        _normalize(y)
    return y


def plant_step(
    s: PlantState, u, cfg: VineConfig, params: PlantParams = PlantParams(), dt: float = DT
) -> PlantState:
    """Advance the plant by ``dt`` holding command ``u``."""
    if dt <= 0:
        raise InvalidInputError("dt must be positive")
    y = _step_packed(s.pack(), as_control(u), cfg, params, dt)
    return PlantState.unpack(y, cfg.length)


def observe(
    s: PlantState, u_prev, params: PlantParams = PlantParams(), rng=None
) -> FloatArray:
    """Motion-capture surrogate returning a 9-element state.

    ``rng`` may be an integer seed or a ``numpy.random.Generator``. The tilt is
    the small-angle quaternion implied by the commanded acceleration.
    """
    gen = np.random.default_rng(rng)
    acc = params.omega_n**2 * (np.asarray(u_prev, dtype=float) - s.p_qr)
    q_vec = np.array([-acc[1], acc[0], 0.0]) / (2.0 * params.g)
    noise = gen.normal(0.0, params.noise_sigma, size=6) if params.noise_sigma > 0 else np.zeros(6)
    return np.concatenate([s.p_qr + noise[:3], q_vec, s.p_ee + noise[3:]])


@dataclass(frozen=True, eq=False)
class FlightLog:
    """One logged flight. Row ``k`` holds the observation at ``t_k`` and the
    command sent at ``t_k``; ``x[k + 1]`` is the response to ``u[k]``."""

    u: FloatArray
    x: FloatArray
    dt: float = DT
    configs: tuple[VineConfig, ...] = ()
    seed: int | None = None
    params: PlantParams = field(default_factory=PlantParams)

    def __post_init__(self) -> None:
        u = np.asarray(self.u, dtype=float).reshape(-1, CONTROL_DIM)
        x = np.asarray(self.x, dtype=float).reshape(-1, 9)
        if u.shape[0] != x.shape[0]:
            raise InvalidInputError("flight log needs one command per observation")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "configs", tuple(self.configs))

    def __len__(self) -> int:
        return self.x.shape[0]

    @property
    def t(self) -> FloatArray:
        return np.arange(len(self)) * self.dt

    @property
    def config(self) -> VineConfig | None:
        """The configuration if constant over the log."""
        if self.configs and all(c == self.configs[0] for c in self.configs):
            return self.configs[0]
        return None

    def slice(self, start: int, stop: int) -> "FlightLog":
        return FlightLog(
            self.u[start:stop],
            self.x[start:stop],
            self.dt,
            self.configs[start:stop],
            self.seed,
            self.params,
        )


def run_plant(
    u_traj,
    cfg_schedule: VineConfig | Sequence[VineConfig],
    params: PlantParams = PlantParams(),
    seed: int = 0,
    p0=None,
    dt: float = DT,
) -> FlightLog:
    """Replay a command sequence open-loop on the plant.

    Starts at rest under ``p0`` (default: the first command). Step ``k`` holds
    ``u_traj[k]`` under ``cfg_schedule[k]``; the response to the final command
    is not logged, so the log has exactly one row per command.
    """
    u_traj = np.asarray(u_traj, dtype=float).reshape(-1, CONTROL_DIM)
    M = u_traj.shape[0]
    if M == 0:
        raise InvalidInputError("empty command trajectory")
    if not np.all(np.isfinite(u_traj)):
        raise InvalidInputError("non-finite commands")
    if isinstance(cfg_schedule, VineConfig):
        configs = (cfg_schedule,) * M
    else:
        configs = tuple(cfg_schedule)
        if len(configs) != M:
            raise InvalidInputError("config schedule length must equal command length")

    rng = np.random.default_rng(seed)
    start = u_traj[0] if p0 is None else np.asarray(p0, dtype=float)
    state = equilibrium(start, configs[0].length)
    xs = np.empty((M, 9))
    xs[0] = observe(state, start, params, rng)
    y = state.pack()
    for k in range(M - 1):
        y = _step_packed(y, u_traj[k], configs[k], params, dt)
        state = PlantState.unpack(y, configs[k].length)
        xs[k + 1] = observe(state, u_traj[k], params, rng)
    return FlightLog(u_traj.copy(), xs, dt, configs, seed, params)
