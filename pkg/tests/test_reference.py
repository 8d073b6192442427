import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vinetraj.core import InvalidInputError, VineConfig
from vinetraj.reference import (
    ALPHA_T,
    ALPHA_X,
    ALPHA_Y_FAST,
    ALPHA_Y_SLOW,
    default_alphas,
    default_ramp,
    growth_reference,
    growth_schedule,
    lemniscate_point,
    lemniscate_reference,
    ramped_time,
    shape_control,
    swing_profile,
    swing_reference,
)


def test_lemniscate_point_examples():
    assert np.allclose(lemniscate_point(0.0, 10.0, 0.8), [0, 0, 0.7])
    assert np.allclose(lemniscate_point(2.5, 10.0, 0.8), [1, 0, 0.7], atol=1e-15)
    assert np.allclose(lemniscate_point(1.25, 10.0, 0.8), [0.70711, 0.5, 0.7], atol=1e-5)
    with pytest.raises(InvalidInputError):
        lemniscate_point(0.0, 0.0, 0.8)


def test_lemniscate_reference_layout():
    ref = lemniscate_reference(10.0, 0.85)
    assert ref.N == round(12.0 / 0.05) + 1
    assert np.allclose(ref.qr[0], [0, 0, 1.5])
    assert np.allclose(ref.ee[0], [0, 0, 0.65])
    assert np.allclose(ref.qr - ref.ee, [0, 0, 0.85])
    assert not np.any(ref.x_bar[:, 3:6])
    # each reference state fills all three history slots
    assert np.array_equal(ref.z_bar[:, 9:18], ref.z_bar[:, :9])
    assert np.array_equal(ref.z_bar[:, 18:], ref.z_bar[:, :9])
    assert ref.u_bar.shape == (ref.N - 1, 3)


def test_ramp_and_alpha_defaults():
    assert default_ramp(10.0) == 2.0 and default_ramp(5.0) == 3.0
    assert default_alphas(10.0) == (ALPHA_X, ALPHA_Y_SLOW, ALPHA_T) == (0.9, 1.0, 10)
    assert default_alphas(5.0) == (0.9, ALPHA_Y_FAST, 10) == (0.9, 0.6, 10)
    assert lemniscate_reference(5.0, 0.7).N == round(8.0 / 0.05) + 1


def test_ramp_reaches_half_speed_halfway():
    ramp, h = 2.0, 1e-6
    rate = (ramped_time(ramp / 2 + h, ramp) - ramped_time(ramp / 2 - h, ramp)) / (2 * h)
    assert rate == pytest.approx(0.5, abs=1e-8)
    full = (ramped_time(5.0 + h, ramp) - ramped_time(5.0 - h, ramp)) / (2 * h)
    assert full == pytest.approx(1.0, abs=1e-8)
    # the path time is continuous at the end of the ramp
    assert ramped_time(ramp - 1e-12, ramp) == pytest.approx(ramped_time(ramp, ramp), abs=1e-9)


def test_reference_speed_at_half_ramp():
    T, ramp, dt = 10.0, 2.0, 0.001
    ref = lemniscate_reference(T, 0.8, N=int(4.0 / dt), dt=dt, ramp=ramp)
    k = int(round(ramp / 2 / dt))
    speed = np.linalg.norm(ref.ee[k + 1] - ref.ee[k - 1]) / (2 * dt)
    tau = ramped_time(ramp / 2, ramp)
    nominal = np.linalg.norm(
        lemniscate_point(tau + 1e-6, T, 0.8) - lemniscate_point(tau - 1e-6, T, 0.8)
    ) / 2e-6
    assert speed == pytest.approx(0.5 * nominal, rel=1e-3)


def test_lemniscate_stays_in_its_box():
    ref = lemniscate_reference(5.0, 0.8, N=400)
    assert np.max(np.abs(ref.ee[:, 0])) <= 1.0 + 1e-12
    assert np.max(np.abs(ref.ee[:, 1])) == pytest.approx(0.5, abs=1e-3)
    assert np.max(np.abs(ref.ee[:, 1])) <= 0.5 + 1e-12


def test_identity_shaping():
    ref = lemniscate_reference(10.0, 0.8, alphas=(1.0, 1.0, 0))
    assert np.array_equal(ref.u_bar, ref.qr[:-1])


def test_shaping_leads_by_alpha_t():
    rng = np.random.default_rng(0)
    qr = rng.normal(size=(50, 3))
    u = shape_control(qr, 0.9, 0.6, 10)
    assert np.allclose(u[:39, 0], 0.9 * qr[10:49, 0])
    assert np.allclose(u[:39, 1], 0.6 * qr[10:49, 1])
    assert np.array_equal(u[:, 2], qr[:-1, 2])
    # indices past the end clamp to the final sample
    assert np.allclose(u[45:, 0], 0.9 * qr[-1, 0])
    with pytest.raises(InvalidInputError):
        shape_control(qr, 1, 1, 2.5)


def test_shaped_control_cross_correlation_peaks_at_lead():
    ref = lemniscate_reference(10.0, 0.8, N=601, alphas=(0.9, 1.0, 10))
    # past the ramp, where the path runs at constant rate
    ux = ref.u_bar[60:560, 0]
    zx = ref.qr[40:, 0]
    lags = np.arange(-20, 21)
    corr = [np.mean(ux * zx[20 + l: 520 + l]) for l in lags]
    # u leads z: u[k] pairs best with z[k + 10]
    assert lags[int(np.argmax(corr))] == 10


def test_swing_reference_shape():
    ref = swing_reference(200, 1.2, l_vine=0.8)
    assert np.all(ref.u_bar[:, 1] == 0.0) and np.all(ref.u_bar[:, 2] == 1.5)
    assert np.max(np.abs(ref.u_bar[:, 0])) <= 2.0
    assert np.max(ref.u_bar[:, 0]) == pytest.approx(1.2)
    assert np.min(ref.u_bar[:, 0]) == pytest.approx(-1.2)
    assert np.allclose(ref.qr[:, 2] - ref.ee[:, 2], 0.8)
    with pytest.raises(InvalidInputError):
        swing_reference(201)


@settings(max_examples=20)
@given(st.integers(40, 150).map(lambda n: 2 * n), st.floats(0.2, 2.0))
def test_swing_profile_is_point_symmetric(N, amp):
    f = swing_profile(N, amp)
    c = N // 2 - 1
    s = np.arange(0, min(c, N - 1 - c) + 1)
    assert np.allclose(f[c + s], -f[c - s], atol=1e-12)
    if c * 0.05 > 0.5 + 0.5 + 1.5:  # half cross, plateau, ramp all fit before the centre
        assert f[0] == 0.0 and f[-1] == 0.0
    # forward first, then the cross-swing
    assert f[c - 5] > 0 > f[c + 5]


def test_growth_schedule_examples():
    sched = growth_schedule(401)
    assert sched[0] == VineConfig(0.0, 0.7)
    assert sched[-1] == VineConfig(0.4, 1.0)
    assert sched[200] == VineConfig(0.2, 0.85)


@given(st.integers(2, 500))
def test_growth_schedule_stays_inside(N):
    for c in growth_schedule(N):
        assert 0.0 <= c.pressure <= 0.4 and 0.7 <= c.length <= 1.0


def test_growth_reference_holds_the_tip_height():
    ref, sched = growth_reference()
    assert ref.N == len(sched) == 400
    assert np.all(ref.ee[:, 2] == ref.ee[0, 2])
    assert ref.qr[-1, 2] - ref.qr[0, 2] == pytest.approx(0.3, abs=1e-12)
    assert np.all(np.diff(ref.qr[:, 2]) > 0)
    assert ref.N * ref.dt == pytest.approx(20.0)
