"""Reference state and control trajectories for the three tasks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    AUG_DIM,
    CONTROL_DIM,
    CORNERS,
    DT,
    STATE_DIM,
    FloatArray,
    InvalidInputError,
    VineConfig,
)

HOVER_HEIGHT = 1.5  # [m]
ALPHA_T = 10
ALPHA_X = 0.9
ALPHA_Y_SLOW = 1.0
ALPHA_Y_FAST = 0.6


@dataclass(frozen=True, eq=False)
class ReferenceSet:
    z_bar: FloatArray  # (N, 27)
    u_bar: FloatArray  # (N-1, 3)
    dt: float = DT
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        z = np.asarray(self.z_bar, dtype=float)
        u = np.asarray(self.u_bar, dtype=float)
        if z.ndim != 2 or z.shape[1] != AUG_DIM or u.shape != (z.shape[0] - 1, CONTROL_DIM):
            raise InvalidInputError(f"inconsistent reference shapes {z.shape}, {u.shape}")
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(u))):
            raise InvalidInputError("reference contains non-finite values")
        object.__setattr__(self, "z_bar", z)
        object.__setattr__(self, "u_bar", u)

    @property
    def N(self) -> int:
        return self.z_bar.shape[0]

    @property
    def x_bar(self) -> FloatArray:
        return self.z_bar[:, :STATE_DIM]

    @property
    def ee(self) -> FloatArray:
        return self.z_bar[:, 6:9]

    @property
    def qr(self) -> FloatArray:
        return self.z_bar[:, 0:3]


def stack_history(x_bar: FloatArray) -> FloatArray:
    """Reference augmented states repeat each reference state in all three slots."""
    return np.tile(x_bar, (1, 3))


def lemniscate_point(t, T: float, l_vine: float):
    """End-effector point on the figure-eight; ``t`` may be an array."""
    if T <= 0:
        raise InvalidInputError("lap period must be positive")
    theta = 2.0 * np.pi * np.asarray(t, dtype=float) / T
    x = np.sin(theta)
    y = np.cos(theta) * np.sin(theta)
    z = np.broadcast_to(HOVER_HEIGHT - np.asarray(l_vine, dtype=float), x.shape)
    return np.stack([x, y, z], axis=-1)


def ramped_time(t, ramp: float):
    """Path time whose rate rises linearly from 0 to 1 over ``ramp`` seconds."""
    t = np.asarray(t, dtype=float)
    if ramp <= 0:
        return t.copy()
    return np.where(t < ramp, t * t / (2.0 * ramp), t - ramp / 2.0)


def default_ramp(T: float) -> float:
    return 2.0 if T >= 7.5 else 3.0


def default_alphas(T: float) -> tuple[float, float, int]:
    return (ALPHA_X, ALPHA_Y_SLOW if T >= 7.5 else ALPHA_Y_FAST, ALPHA_T)


def shape_control(z_bar_qr, alpha_x: float = 1.0, alpha_y: float = 1.0, alpha_t: int = 0):
    """Scale and time-advance the quadrotor position reference into a control reference.

    ``z_bar_qr`` is the ``(N, 3)`` quadrotor reference; returns ``N-1`` controls.
    Indices beyond the horizon clamp to the last reference sample.
    """
    qr = np.asarray(z_bar_qr, dtype=float).reshape(-1, 3)
    if int(alpha_t) != alpha_t or alpha_t < 0:
        raise InvalidInputError("alpha_t must be a non-negative integer")
    N = qr.shape[0]
    k = np.arange(N - 1)
    lead = np.minimum(k + int(alpha_t), N - 1)
    u = np.empty((N - 1, CONTROL_DIM))
    u[:, 0] = alpha_x * qr[lead, 0]
    u[:, 1] = alpha_y * qr[lead, 1]
    u[:, 2] = qr[k, 2]
    return u


def lemniscate_reference(
    T: float,
    l_vine,
    N: int | None = None,
    dt: float = DT,
    ramp: float | None = None,
    alphas: tuple[float, float, int] | None = None,
    ee_height: float | None = None,
) -> ReferenceSet:
    """Figure-eight end-effector reference with rigid-offset quadrotor reference.

    ``l_vine`` may be a per-step array (growing vine); the end-effector height
    is then held at ``ee_height`` (default: that of the first step) and the
    quadrotor reference rises with the vine.
    """
    ramp = default_ramp(T) if ramp is None else ramp
    if N is None:
        N = int(round((T + ramp) / dt)) + 1
    if ramp >= N * dt:
        raise InvalidInputError("ramp must be shorter than the horizon")
    lengths = np.broadcast_to(np.asarray(l_vine, dtype=float), (N,))
    if ee_height is None:
        ee_height = HOVER_HEIGHT - lengths[0]
    t = np.arange(N) * dt
    ee = lemniscate_point(ramped_time(t, ramp), T, lengths)
    ee[:, 2] = ee_height
    x_bar = np.zeros((N, STATE_DIM))
    x_bar[:, 0:3] = ee + np.outer(lengths, [0.0, 0.0, 1.0])
    x_bar[:, 6:9] = ee
    ax, ay, at = default_alphas(T) if alphas is None else alphas
    u_bar = shape_control(x_bar[:, 0:3], ax, ay, at)
    meta = {"task": "lemniscate", "T": T, "ramp": ramp, "alphas": [ax, ay, at]}
    return ReferenceSet(stack_history(x_bar), u_bar, dt, meta)


def swing_profile(N: int, x_amp: float = 1.2, dt: float = DT, plateau: float = 0.5,
                  cross: float = 1.0, ramp: float = 1.5, center: int | None = None) -> FloatArray:
    """Trapezoidal x-command: out to ``+x_amp``, across to ``-x_amp``, back to 0.

    The profile is point-symmetric about ``center``: ``f(c + s) = -f(c - s)``.
    """
    c = N // 2 - 1 if center is None else center
    s = np.abs(np.arange(N) - c) * dt
    mag = np.select(
        [s <= cross / 2, s <= cross / 2 + plateau, s <= cross / 2 + plateau + ramp],
        [x_amp * s / (cross / 2), np.full_like(s, x_amp),
         x_amp * (1.0 - (s - cross / 2 - plateau) / ramp)],
        0.0,
    )
    return np.where(np.arange(N) < c, mag, -mag)


def swing_reference(N: int = 200, x_amp: float = 1.2, l_vine: float = 0.85,
                    dt: float = DT, **profile) -> ReferenceSet:
    """Hand-made swing reference: the quadrotor follows the trapezoid, vine hanging below."""
    if N % 2:
        raise InvalidInputError("swing horizon must be even")
    ux = swing_profile(N, x_amp, dt, **profile)
    x_bar = np.zeros((N, STATE_DIM))
    x_bar[:, 0] = ux
    x_bar[:, 2] = HOVER_HEIGHT
    x_bar[:, 6] = ux
    x_bar[:, 8] = HOVER_HEIGHT - l_vine
    u_bar = np.column_stack([ux[:-1], np.zeros(N - 1), np.full(N - 1, HOVER_HEIGHT)])
    meta = {"task": "swing", "x_amp": x_amp, "l_vine": l_vine}
    return ReferenceSet(stack_history(x_bar), u_bar, dt, meta)


def growth_schedule(N: int = 400, dt: float = DT, start: VineConfig = CORNERS["ES"],
                    end: VineConfig = CORNERS["IL"]) -> list[VineConfig]:
    """Linear pressure and length ramp from ``start`` at step 0 to ``end`` at step N-1."""
    if N < 2:
        raise InvalidInputError("growth schedule needs at least two steps")
    s = np.arange(N) / (N - 1)
    return [
        VineConfig((1 - si) * start.pressure + si * end.pressure,
                   (1 - si) * start.length + si * end.length)
        for si in s
    ]


def growth_reference(N: int = 400, T: float = 10.0, dt: float = DT,
                     ramp: float | None = None) -> tuple[ReferenceSet, list[VineConfig]]:
    schedule = growth_schedule(N, dt)
    lengths = np.array([c.length for c in schedule])
    ref = lemniscate_reference(T, lengths, N=N, dt=dt, ramp=ramp)
    ref.meta.update(task="growth", lengths=[lengths[0], lengths[-1]])
    return ref, schedule
