import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_model, random_point
from vinetraj.core import CORNERS, InvalidInputError, OutOfDomainError, VineConfig, augment
from vinetraj.model import (
    CORNER_NAMES,
    Bounds,
    CornerSet,
    DynModel,
    FeatureVersionError,
    interp_weights,
    interpolate,
    jacobians,
    predict,
    predict_batch,
    rollout,
    step,
    zero_model,
)
from vinetraj.sysid import build_dataset, quadratic_features
from vinetraj.trajopt import linearize_step

ES = CORNERS["ES"]


def identity_model() -> DynModel:
    a = np.zeros(496)
    a[1 + 8] = 1.0
    return DynModel(np.eye(9, 27), np.zeros((9, 3)), a, ES)


def random_corners(seed: int) -> CornerSet:
    rng = np.random.default_rng(seed)
    return CornerSet({n: random_model(rng, CORNERS[n]) for n in CORNER_NAMES})


def central_jacobian(f, x, h=1e-5):
    cols = []
    for i in range(len(x)):
        e = np.zeros(len(x))
        e[i] = h
        cols.append((f(x + e) - f(x - e)) / (2 * h))
    return np.column_stack(cols)


def rel_err(a, b) -> float:
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-12))


# ------------------------------------------------------------- prediction


def test_zero_model_predicts_zero(rng):
    z, u = random_point(rng)
    assert np.array_equal(predict(zero_model(), z, u), np.zeros(9))


def test_identity_dynamics_copy_the_newest_state(rng):
    z, u = random_point(rng)
    assert np.array_equal(predict(identity_model(), z, u), z[:9])


def test_predict_matches_design_rows(rng):
    m = random_model(rng)
    Z, U = rng.normal(size=(50, 27)), rng.normal(size=(50, 3))
    X = predict_batch(m, Z, U)
    design = np.hstack([Z, U]) @ np.hstack([m.A, m.B]).T
    assert np.max(np.abs(X[:, :8] - design[:, :8])) < 1e-12
    assert np.max(np.abs(X[:, 8] - quadratic_features(Z, U) @ m.a)) < 1e-12
    for k in range(50):
        assert np.max(np.abs(predict(m, Z[k], U[k]) - X[k])) < 1e-12


def test_fitted_model_predict_matches_design(corner_fit):
    from vinetraj.experiments import training_logs

    m = corner_fit.corners["IS"]
    data = build_dataset(training_logs(CORNERS["IS"], 0, corner_index=1)[:1])
    X = predict_batch(m, data.z[:200], data.u[:200])
    ref = data.linear_design()[:200] @ np.hstack([m.A, m.B]).T
    assert np.max(np.abs(X[:, :8] - ref[:, :8])) < 1e-12
    assert np.max(np.abs(X[:, 8] - data.quadratic_design()[:200] @ m.a)) < 1e-12


def test_version_mismatch_is_rejected(rng):
    m = dataclasses.replace(random_model(rng), version="other")
    z, u = random_point(rng)
    with pytest.raises(FeatureVersionError):
        predict(m, z, u)


def test_model_validation():
    with pytest.raises(InvalidInputError):
        DynModel(np.zeros((9, 26)), np.zeros((9, 3)), np.zeros(496), ES)
    with pytest.raises(InvalidInputError):
        DynModel(np.zeros((9, 27)), np.zeros((9, 3)), np.zeros(495), ES)
    A = np.zeros((9, 27))
    A[0, 0] = np.inf
    with pytest.raises(InvalidInputError):
        DynModel(A, np.zeros((9, 3)), np.zeros(496), ES)


def test_parameters_are_read_only(rng):
    m = random_model(rng)
    with pytest.raises(ValueError):
        m.A[0, 0] = 1.0


# ----------------------------------------------------------------- rollout


def test_identity_rollout_is_constant():
    x = np.linspace(0.1, 0.9, 9)
    z0 = augment(x, x, x)
    traj = rollout(identity_model(), z0, np.zeros((20, 3)))
    assert np.all(traj.states == z0)


def test_control_copied_into_position():
    B = np.zeros((9, 3))
    B[0, 0] = 1.0
    m = DynModel(np.zeros((9, 27)), B, np.zeros(496), ES)
    traj = rollout(m, np.zeros(27), [[0.7, 0.0, 0.0]])
    assert traj.states[1, 0] == 0.7


def test_rollout_shift_structure_is_exact(rng):
    m = random_model(rng, scale=0.1)
    traj = rollout(m, rng.normal(size=27), rng.normal(size=(30, 3)))
    Z = traj.states
    assert np.array_equal(Z[1:, 9:27], Z[:-1, 0:18])
    for k in range(30):
        assert np.array_equal(Z[k + 1], step(m, Z[k], traj.controls[k]))


def test_rollout_schedule_uses_one_model_per_step(rng):
    models = [random_model(rng, scale=0.1) for _ in range(5)]
    z0, U = rng.normal(size=27), rng.normal(size=(5, 3))
    traj = rollout(models, z0, U)
    z = z0
    for k in range(5):
        z = step(models[k], z, U[k])
        assert np.array_equal(traj.states[k + 1], z)
    with pytest.raises(InvalidInputError):
        rollout(models[:4], z0, U)


def test_rollout_errors(rng):
    with pytest.raises(InvalidInputError):
        rollout(zero_model(), np.zeros(26), np.zeros((3, 3)))
    with pytest.raises(InvalidInputError):
        rollout(zero_model(), np.zeros(27), np.zeros((0, 3)))


def test_fitted_rollout_tracks_the_plant(corner_fit):
    assert corner_fit.heldout_reports["ES"].divergence_horizon >= 40
    assert min(corner_fit.train_reports["ES"].horizons) >= 40


# --------------------------------------------------------------- jacobians


def test_jacobian_rows_follow_parameters(rng):
    m = random_model(rng)
    z, u = random_point(rng)
    fz, fu = jacobians(m, z, u)
    assert np.array_equal(fz[:8], m.A[:8]) and np.array_equal(fu[:8], m.B[:8])
    flat = DynModel(m.A, m.B, np.zeros(496), ES)
    fz, fu = jacobians(flat, z, u)
    assert np.array_equal(fz, m.A * (np.arange(9)[:, None] != 8))
    assert not np.any(fu[8])
    offset = np.zeros(496)
    offset[0] = 2.5
    fz, fu = jacobians(DynModel(m.A, m.B, offset, ES), z, u)
    assert not np.any(fz[8]) and not np.any(fu[8])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_jacobians_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng)
    z, u = random_point(rng)
    fz, fu = jacobians(m, z, u)
    assert rel_err(fz, central_jacobian(lambda v: predict(m, v, u), z)) < 1e-5
    assert rel_err(fu, central_jacobian(lambda v: predict(m, z, v), u)) < 1e-5


def test_step_jacobians_match_finite_differences(rng):
    m = random_model(rng)
    z, u = random_point(rng)
    Fz, Fu = linearize_step(m, z, u)
    assert rel_err(Fz, central_jacobian(lambda v: step(m, v, u), z)) < 1e-5
    assert rel_err(Fu, central_jacobian(lambda v: step(m, z, v), u)) < 1e-5
    assert np.array_equal(Fz[9:], np.eye(18, 27))
    assert not np.any(Fu[9:])


# ----------------------------------------------------------- interpolation


def test_interp_weight_examples():
    assert interp_weights(VineConfig(0.0, 0.7)) == (1.0, 0.0, 0.0, 0.0)
    assert interp_weights(VineConfig(0.4, 0.7)) == (0.0, 1.0, 0.0, 0.0)
    assert np.allclose(interp_weights(VineConfig(0.2, 0.85)), 0.25, atol=1e-15)


@given(st.floats(0, 0.4), st.floats(0.7, 1.0))
def test_interp_weights_partition_unity(p, l):
    w = np.array(interp_weights(VineConfig(p, l)))
    assert np.all((w >= 0) & (w <= 1))
    assert abs(w.sum() - 1.0) <= 1e-15


def test_no_extrapolation():
    with pytest.raises(OutOfDomainError):
        interp_weights(VineConfig(0.3, 0.8), Bounds(pressure=(0.0, 0.2)))


def test_corner_queries_are_exact():
    cs = random_corners(0)
    for name in CORNER_NAMES:
        m = interpolate(cs, CORNERS[name])
        assert np.array_equal(m.params_vector(), cs[name].params_vector())


def test_edge_midpoint_averages_its_corners():
    cs = random_corners(1)
    m = interpolate(cs, VineConfig(0.2, 0.7))
    avg = 0.5 * (cs["ES"].params_vector() + cs["IS"].params_vector())
    assert np.max(np.abs(m.params_vector() - avg)) < 1e-15


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 0.4), st.floats(0.7, 1.0), st.integers(0, 2**32 - 1))
def test_parameter_blend_equals_prediction_blend(p, l, seed):
    cs = random_corners(7)
    cfg = VineConfig(p, l)
    rng = np.random.default_rng(seed)
    z, u = random_point(rng)
    w = interp_weights(cfg)
    blended = sum(wi * predict(cs[n], z, u) for wi, n in zip(w, CORNER_NAMES))
    assert np.max(np.abs(predict(interpolate(cs, cfg), z, u) - blended)) < 1e-12
    assert interpolate(cs, cfg).cfg == cfg


def test_corner_set_validation(rng):
    models = {n: random_model(rng, CORNERS[n]) for n in CORNER_NAMES}
    with pytest.raises(InvalidInputError):
        CornerSet({k: v for k, v in models.items() if k != "IL"})
    bad = dict(models, IS=random_model(rng, CORNERS["ES"]))
    with pytest.raises(InvalidInputError):
        CornerSet(bad)
    bad = dict(models, IL=dataclasses.replace(models["IL"], dt=0.1))
    with pytest.raises(InvalidInputError):
        CornerSet(bad)
