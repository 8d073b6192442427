import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vinetraj.core import CORNERS, InvalidInputError, VineConfig
from vinetraj.plant import (
    PlantParams,
    PlantState,
    equilibrium,
    observe,
    plant_step,
    run_plant,
)
from vinetraj.reference import growth_schedule, lemniscate_point
from vinetraj.training import SCRIPTS, script_commands

QUIET = PlantParams(noise_sigma=0.0)
ES = CORNERS["ES"]


def tilted(angle: float, length: float = 0.85, p_qr=(0.0, 0.0, 1.5)) -> PlantState:
    n = np.array([np.sin(angle), 0.0, -np.cos(angle)])
    return PlantState(np.asarray(p_qr, float), np.zeros(3), n, np.zeros(3), length)


def test_equilibrium_is_a_fixed_point():
    s = equilibrium([0.3, -0.2, 1.5], ES.length)
    out = plant_step(s, s.p_qr, ES)
    assert np.allclose(out.pack(), s.pack(), atol=1e-15)


def test_step_response_has_no_overshoot_when_critically_damped():
    params = PlantParams(zeta=1.0, noise_sigma=0.0)
    s = equilibrium([0.0, 0.0, 1.5], ES.length)
    xs = []
    for _ in range(200):
        s = plant_step(s, [1.0, 0.0, 1.5], ES, params)
        xs.append(s.p_qr[0])
    xs = np.array(xs)
    assert np.all(np.diff(xs) >= -1e-12)
    assert xs.max() <= 1.0 + 1e-9
    assert xs[-1] == pytest.approx(1.0, abs=1e-4)


def _swing_period(cfg: VineConfig, params=QUIET) -> float:
    s = tilted(0.05, cfg.length)
    xs = []
    for _ in range(400):
        s = plant_step(s, s.p_qr, cfg, params)
        xs.append(s.pend_dir[0])
    xs = np.array(xs)
    crossings = np.flatnonzero(np.sign(xs[:-1]) != np.sign(xs[1:]))
    return 2.0 * np.mean(np.diff(crossings)) * 0.05


def test_pressure_raises_swing_frequency():
    empty = _swing_period(VineConfig(0.0, 0.85))
    inflated = _swing_period(VineConfig(0.4, 0.85))
    assert inflated < empty
    # small-oscillation period is close to 2 pi / sqrt(k_eff)
    k = QUIET.stiffness(VineConfig(0.4, 0.85))
    assert inflated == pytest.approx(2 * np.pi / np.sqrt(k), rel=0.1)


def test_plant_step_rejects_bad_dt():
    with pytest.raises(InvalidInputError):
        plant_step(equilibrium([0, 0, 1.5], 0.8), [0, 0, 1.5], ES, dt=0.0)


def test_observe_at_hover():
    s = equilibrium([0.1, 0.2, 1.5], 0.8)
    x = observe(s, s.p_qr, QUIET, 0)
    assert np.array_equal(x[3:6], np.zeros(3))
    assert np.allclose(x[6:9], s.p_qr + [0, 0, -0.8])


def test_observe_is_deterministic_per_seed():
    s = tilted(0.2)
    assert np.array_equal(observe(s, [0.5, 0, 1.5], rng=7), observe(s, [0.5, 0, 1.5], rng=7))


def test_observe_tilt_follows_commanded_acceleration():
    s = equilibrium([0.0, 0.0, 1.5], 0.8)
    x = observe(s, [0.1, 0.2, 1.5], QUIET, 0)
    a = 16.0 * np.array([0.1, 0.2])
    assert np.allclose(x[3:6], [-a[1] / (2 * 9.81), a[0] / (2 * 9.81), 0.0])


def test_observation_noise_level():
    s = tilted(0.3)
    rng = np.random.default_rng(3)
    obs = np.array([observe(s, s.p_qr, PlantParams(), rng) for _ in range(10000)])
    err = np.concatenate([obs[:, 0:3] - s.p_qr, obs[:, 6:9] - s.p_ee])
    std = err.std(axis=0)
    assert np.all((std >= 0.0018) & (std <= 0.0022))


def test_constant_command_from_equilibrium_is_stationary():
    u = np.tile([0.2, -0.1, 1.6], (100, 1))
    flight = run_plant(u, ES, QUIET, seed=0)
    assert np.all(flight.x == flight.x[0])
    assert len(flight) == 100


def test_lemniscate_commands_sweep_about_a_metre():
    t = np.arange(400) * 0.05
    u = lemniscate_point(t, 10.0, 0.0)
    u[:, 2] = 1.5
    flight = run_plant(u, CORNERS["IS"], QUIET)
    assert 0.5 <= np.max(np.abs(flight.x[:, 6])) <= 1.5


def test_growth_lowers_the_tip_by_the_added_length():
    schedule = growth_schedule(400)
    u = np.tile([0.0, 0.0, 1.5], (400, 1))
    flight = run_plant(u, schedule, QUIET)
    drop = flight.x[0, 8] - flight.x[-1, 8]
    assert drop == pytest.approx(0.3, abs=0.02)


def _linear_energy(s: PlantState, k_eff: float) -> float:
    n, w = s.pend_dir, s.pend_omega
    L = s.length
    return 0.5 * L**2 * (w @ w) + 0.5 * k_eff * L**2 * (n[0] ** 2 + n[1] ** 2)


def test_pendulum_energy_decays_under_constant_command():
    cfg = VineConfig(0.1, 0.9)
    s = PlantState([0, 0, 1.5], np.zeros(3), [0.3, 0.1, -np.sqrt(1 - 0.1)], [0.0, 0.5, 0.2], 0.9)
    k_eff = QUIET.stiffness(cfg)
    energy = []
    for _ in range(400):
        s = plant_step(s, [0.0, 0.0, 1.5], cfg, QUIET)
        energy.append(_linear_energy(s, k_eff))
        assert abs(np.linalg.norm(s.pend_dir) - 1.0) <= 1e-9
    energy = np.array(energy)
    assert np.all(energy[100:] <= energy[:-100])


@pytest.mark.parametrize("name", sorted(SCRIPTS))
def test_unit_vine_direction_along_training_flights(name):
    u = script_commands(name, duration=5.0)
    s = equilibrium(u[0], 0.85)
    cfg = VineConfig(0.2, 0.85)
    for k in range(len(u)):
        s = plant_step(s, u[k], cfg)
        assert abs(np.linalg.norm(s.pend_dir) - 1.0) <= 1e-9


def test_run_plant_is_deterministic():
    u = script_commands("pretzel", duration=10.0)
    a = run_plant(u, ES, PlantParams(), seed=5)
    b = run_plant(u, ES, PlantParams(), seed=5)
    c = run_plant(u, ES, PlantParams(), seed=6)
    assert np.array_equal(a.x, b.x)
    assert not np.array_equal(a.x, c.x)


def test_run_plant_errors():
    with pytest.raises(InvalidInputError):
        run_plant(np.zeros((0, 3)), ES)
    with pytest.raises(InvalidInputError):
        run_plant(np.zeros((5, 3)), [ES] * 4)


def test_run_plant_starts_at_rest_under_first_command():
    u = np.tile([0.4, 0.3, 1.4], (5, 1))
    u[1:] += 0.2
    flight = run_plant(u, ES, QUIET)
    assert np.allclose(flight.x[0, 0:3], u[0])
    assert np.allclose(flight.x[0, 6:9], u[0] - [0, 0, ES.length])


@settings(max_examples=20, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(1.2, 1.8), st.floats(0.7, 1.0))
def test_any_hover_point_is_an_equilibrium(x, y, z, length):
    s = equilibrium([x, y, z], length)
    out = plant_step(s, [x, y, z], VineConfig(0.2, length), QUIET)
    assert np.allclose(out.pack(), s.pack(), atol=1e-14)


def test_plant_state_validation():
    with pytest.raises(InvalidInputError):
        PlantState([0, 0, 0], [0, 0, 0], [0, 0, -2.0], [0, 0, 0], 0.8)
    with pytest.raises(InvalidInputError):
        PlantParams(omega_n=0.0)
