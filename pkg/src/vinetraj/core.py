"""Shared types and conventions for the flying-vine toolkit.

State layout (0-based, flat 9-vector)::

    0:3  quadrotor position [m]
    3:6  vector part of the quadrotor orientation quaternion
    6:9  end-effector position [m], world frame

The augmented state stacks three of those, newest first::

    z = [x(k); x(k-1); x(k-2)]      (27 entries)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

FloatArray = npt.NDArray[np.float64]

DT = 0.05  # [s] position commands are published at 20 Hz
GRAVITY = 9.81

STATE_DIM = 9
AUG_DIM = 27
CONTROL_DIM = 3

QR_POS = slice(0, 3)
Q_VEC = slice(3, 6)
EE_POS = slice(6, 9)
EE_Z = 8  # end-effector height

PRESSURE_BOUNDS = (0.0, 0.4)  # [kPa gauge]
LENGTH_BOUNDS = (0.7, 1.0)  # [m]
_DOMAIN_TOL = 1e-12


class InvalidInputError(ValueError):
    """Raised for malformed or non-finite inputs."""


class OutOfDomainError(ValueError):
    """Raised when a vine configuration lies outside the interpolation rectangle."""


@dataclass(frozen=True)
class VineConfig:
    """Gauge pressure [kPa] and vine length [m]."""

    pressure: float
    length: float

    def __post_init__(self) -> None:
        p, l = float(self.pressure), float(self.length)
        if not (np.isfinite(p) and np.isfinite(l)):
            raise InvalidInputError(f"non-finite vine config ({p}, {l})")
        lo_p, hi_p = PRESSURE_BOUNDS
        lo_l, hi_l = LENGTH_BOUNDS
        if not (lo_p - _DOMAIN_TOL <= p <= hi_p + _DOMAIN_TOL) or not (
            lo_l - _DOMAIN_TOL <= l <= hi_l + _DOMAIN_TOL
        ):
            raise OutOfDomainError(
                f"config (pressure={p}, length={l}) outside "
                f"[{lo_p}, {hi_p}] kPa x [{lo_l}, {hi_l}] m"
            )
        object.__setattr__(self, "pressure", min(max(p, lo_p), hi_p))
        object.__setattr__(self, "length", min(max(l, lo_l), hi_l))


CORNERS: dict[str, VineConfig] = {
    "ES": VineConfig(PRESSURE_BOUNDS[0], LENGTH_BOUNDS[0]),
    "IS": VineConfig(PRESSURE_BOUNDS[1], LENGTH_BOUNDS[0]),
    "EL": VineConfig(PRESSURE_BOUNDS[0], LENGTH_BOUNDS[1]),
    "IL": VineConfig(PRESSURE_BOUNDS[1], LENGTH_BOUNDS[1]),
}


def parse_config(text: str) -> VineConfig:
    """Accept a corner name (``ES``) or ``pressure,length``."""
    key = text.strip().upper()
    if key in CORNERS:
        return CORNERS[key]
    try:
        p, l = (float(v) for v in text.split(","))
    except ValueError:
        raise InvalidInputError(f"cannot parse vine config {text!r}") from None
    return VineConfig(p, l)


def config_label(cfg: VineConfig) -> str:
    for name, corner in CORNERS.items():
        if corner == cfg:
            return name
    return f"p{cfg.pressure:.3f}_l{cfg.length:.3f}"


def as_state(x, name: str = "state") -> FloatArray:
    """Validate and copy a 9-element state vector."""
    arr = np.array(x, dtype=float).reshape(-1)
    if arr.shape != (STATE_DIM,):
        raise InvalidInputError(f"{name} must have {STATE_DIM} entries, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} has non-finite entries")
    if np.linalg.norm(arr[Q_VEC]) > 1.0:
        raise InvalidInputError(f"{name} quaternion vector part exceeds unit norm")
    return arr


def as_control(u, name: str = "control") -> FloatArray:
    arr = np.array(u, dtype=float).reshape(-1)
    if arr.shape != (CONTROL_DIM,) or not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} must be {CONTROL_DIM} finite values")
    return arr


def make_state(p_qr, q_vec, p_ee) -> FloatArray:
    return as_state(np.concatenate([p_qr, q_vec, p_ee]))


def augment(x_k, x_km1, x_km2) -> FloatArray:
    """Stack the current and two previous states, newest first."""
    return np.concatenate(
        [as_state(x_k, "x_k"), as_state(x_km1, "x_km1"), as_state(x_km2, "x_km2")]
    )


def shift(z, x_new) -> FloatArray:
    """Push ``x_new`` into the history, dropping the oldest slot."""
    z = np.asarray(z, dtype=float)
    if z.shape != (AUG_DIM,) or not np.all(np.isfinite(z)):
        raise InvalidInputError("augmented state must be 27 finite values")
    out = np.empty(AUG_DIM)
    out[:STATE_DIM] = as_state(x_new, "x_new")
    out[STATE_DIM:] = z[: AUG_DIM - STATE_DIM]
    return out


def rest_state(length: float, height: float = 1.5) -> FloatArray:
    """Hover at the origin with the vine hanging straight down."""
    x = np.zeros(STATE_DIM)
    x[2] = height
    x[8] = height - length
    return x


def mean_euclidean_distance(actual_ee, reference_ee) -> float:
    """Mean over timesteps of the 3-D distance between two position tracks."""
    a = np.asarray(actual_ee, dtype=float).reshape(-1, 3)
    b = np.asarray(reference_ee, dtype=float).reshape(-1, 3)
    if a.shape != b.shape or a.shape[0] == 0:
        raise InvalidInputError(f"sequence shapes differ or are empty: {a.shape} vs {b.shape}")
    return float(np.mean(np.linalg.norm(a - b, axis=1)))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Augmented states ``(N, 27)`` and controls ``(N-1, 3)`` on a uniform grid."""

    dt: float
    states: FloatArray
    controls: FloatArray

    def __post_init__(self) -> None:
        states = np.asarray(self.states, dtype=float)
        controls = np.asarray(self.controls, dtype=float).reshape(-1, CONTROL_DIM)
        if self.dt <= 0:
            raise InvalidInputError("dt must be positive")
        if states.ndim != 2 or states.shape[1] != AUG_DIM:
            raise InvalidInputError(f"states must be (N, {AUG_DIM}), got {states.shape}")
        if controls.shape[0] != states.shape[0] - 1:
            raise InvalidInputError("need exactly one control fewer than states")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "controls", controls)

    @property
    def N(self) -> int:
        return self.states.shape[0]

    @property
    def times(self) -> FloatArray:
        return np.arange(self.N) * self.dt

    @property
    def x(self) -> FloatArray:
        """Newest-slot states, ``(N, 9)``."""
        return self.states[:, :STATE_DIM]

    @property
    def ee(self) -> FloatArray:
        return self.states[:, EE_POS]

    @property
    def qr(self) -> FloatArray:
        return self.states[:, QR_POS]
