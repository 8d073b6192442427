"""Hand-crafted command scripts for collecting training flights."""

from __future__ import annotations

import numpy as np

from .core import DT, FloatArray
from .reference import HOVER_HEIGHT, lemniscate_point, ramped_time

SCRIPT_DURATION = 30.0  # [s]


def _lemniscate_commands(T: float, duration: float, dt: float) -> FloatArray:
    t = np.arange(int(round(duration / dt))) * dt
    pts = lemniscate_point(ramped_time(t, 1.0), T, 0.0)
    pts[:, 2] = HOVER_HEIGHT
    return pts


def slow_lemniscate(duration: float = SCRIPT_DURATION, dt: float = DT) -> FloatArray:
    return _lemniscate_commands(10.0, duration, dt)


def fast_lemniscate(duration: float = SCRIPT_DURATION, dt: float = DT) -> FloatArray:
    return _lemniscate_commands(5.0, duration, dt)


def pretzel(duration: float = SCRIPT_DURATION, dt: float = DT) -> FloatArray:
    """Waypoint hops of mixed size and speed across +-1 m in xy, 1.2-1.9 m in z.

    Moves use a cosine blend so commands never jump; the waypoint table is
    fixed so every configuration sees the same script.
    """
    rng = np.random.default_rng(20240917)
    n = int(round(duration / dt))
    out = np.empty((n, 3))
    here = np.array([0.0, 0.0, HOVER_HEIGHT])
    k = 0
    while k < n:
        if rng.random() < 0.3:
            # small hop around the current point
            target = np.clip(here + rng.uniform(-0.25, 0.25, size=3), [-1.0, -1.0, 1.2], [1.0, 1.0, 1.9])
        else:
            target = np.array([
                rng.uniform(-1.0, 1.0),
                rng.uniform(-1.0, 1.0),
                rng.uniform(1.2, 1.9) if rng.random() < 0.5 else HOVER_HEIGHT,
            ])
        move = int(round(rng.uniform(0.4, 1.5) / dt))
        hold = int(round(rng.uniform(0.3, 1.2) / dt))
        blend = 0.5 - 0.5 * np.cos(np.pi * np.arange(1, move + 1) / move)
        seg = np.vstack([here + np.outer(blend, target - here), np.tile(target, (hold, 1))])
        take = min(len(seg), n - k)
        out[k : k + take] = seg[:take]
        k += take
        here = target
    return out


def swing(duration: float = SCRIPT_DURATION, dt: float = DT) -> FloatArray:
    """Back-and-forth x trapezoids of mixed amplitude and tempo that pump large swings.

    y and z stay inside the narrow band the swing task allows.
    """
    rng = np.random.default_rng(20240918)
    n = int(round(duration / dt))
    knots_t, knots = [0.0], [np.array([0.0, 0.0, HOVER_HEIGHT])]
    t = 0.0
    while t < duration:
        amp = rng.uniform(0.4, 1.2)
        for sign in (1.0, -1.0):
            t += rng.uniform(0.3, 1.0)
            knots_t.append(t)
            knots.append(np.array([sign * amp * rng.uniform(0.7, 1.0),
                                   rng.uniform(-0.1, 0.1),
                                   HOVER_HEIGHT + rng.uniform(-0.1, 0.1)]))
            t += rng.uniform(0.2, 1.0)
            knots_t.append(t)
            knots.append(knots[-1].copy())
        t += rng.uniform(0.4, 1.0)
        knots_t.append(t)
        knots.append(np.array([0.0, 0.0, HOVER_HEIGHT]))
        t += rng.uniform(0.5, 2.0)
        knots_t.append(t)
        knots.append(knots[-1].copy())
    knots = np.array(knots)
    grid = np.arange(n) * dt
    return np.column_stack([np.interp(grid, knots_t, knots[:, i]) for i in range(3)])


SCRIPTS = {
    "slow-lemniscate": slow_lemniscate,
    "fast-lemniscate": fast_lemniscate,
    "pretzel": pretzel,
    "swing": swing,
}


def script_commands(name: str, duration: float = SCRIPT_DURATION, dt: float = DT) -> FloatArray:
    try:
        fn = SCRIPTS[name]
    except KeyError:
        raise KeyError(f"unknown training script {name!r}; choose from {sorted(SCRIPTS)}") from None
    return fn(duration, dt)
