import math

import numpy as np
import pytest

from spinsync.errors import NonFiniteError
from spinsync.integrator import IntegratorConfig, ShotNoise, TimeTrace, default_dt, integrate, rabi_trace
from spinsync.model import BlochState, DriveParams, Hyperfine


def detuned_rabi_w(rabi, detuning, t):
    """Closed-form w(t) from the pole, no relaxation."""
    og = math.hypot(rabi, detuning)
    return 1 - (rabi / og) ** 2 * (1 - math.cos(2 * math.pi * og * t))


def test_resonant_half_flip():
    s = integrate(DriveParams(5.0, 1.0), IntegratorConfig(dt_max=1e-3), BlochState.ground(), 0.0, 0.1)
    assert s.w == pytest.approx(-1.0, abs=1e-8)


def test_t1_relaxation():
    p = DriveParams(0.0, 1.0, gamma1=1 / 173, w_eq=1.0)
    s = integrate(p, IntegratorConfig(), BlochState(0, 0, -1), 0.0, 173.0)
    assert s.w == pytest.approx(1 - 2 * math.exp(-1), abs=1e-6)


@pytest.mark.parametrize("cfg", [IntegratorConfig(dt_max=5e-4), IntegratorConfig(mode="adaptive", rel_tol=1e-11)])
def test_detuned_rabi_closed_form(cfg):
    s = integrate(DriveParams(5.0, 1.0, mw_detuning=3.0), cfg, BlochState.ground(), 0.0, 2.0)
    assert s.w == pytest.approx(detuned_rabi_w(5.0, 3.0, 2.0), abs=1e-7)


def test_fourth_order_convergence():
    p = DriveParams(5.0, 1.0, mw_detuning=3.0)
    exact = detuned_rabi_w(5.0, 3.0, 2.0)
    errs = [
        abs(integrate(p, IntegratorConfig(dt_max=dt), BlochState.ground(), 0.0, 2.0).w - exact) for dt in (0.005, 0.0025)
    ]
    assert errs[0] / errs[1] >= 14


def test_norm_drift_over_1e5_steps():
    p = DriveParams(1.0, 1.5, mw_detuning=0.2, rf_amplitude=0.5)
    s0 = BlochState(0.6, 0.0, 0.8)
    s1 = integrate(p, IntegratorConfig(dt_max=1e-3), s0, 0.0, 100.0)
    assert abs(s1.norm() - s0.norm()) < 1e-8


def test_adaptive_matches_fixed_with_rf():
    p = DriveParams(3.0, 4.0, mw_detuning=0.5, rf_amplitude=2.0, gamma1=0.01, gamma2=0.2)
    a = integrate(p, IntegratorConfig(dt_max=5e-4), BlochState.ground(), 0.0, 3.0)
    b = integrate(p, IntegratorConfig(mode="adaptive", rel_tol=1e-11), BlochState.ground(), 0.0, 3.0)
    np.testing.assert_allclose(a.as_array(), b.as_array(), atol=1e-8)


def test_deterministic_bits():
    p = DriveParams(6.0, 6.0, rf_amplitude=2.7, gamma1=0.01, gamma2=0.3)
    a = rabi_trace(p, IntegratorConfig(), 2.0, 64, 4)
    b = rabi_trace(p, IntegratorConfig(), 2.0, 64, 4)
    assert a.p0.tobytes() == b.p0.tobytes()


def test_nonfinite_raises():
    p = DriveParams(1.0, 1.0, gamma1=1e6)
    with pytest.raises(NonFiniteError):
        integrate(p, IntegratorConfig(dt_max=1.0), BlochState.ground(), 0.0, 1000.0)


def test_rejects_backwards_time():
    with pytest.raises(ValueError):
        integrate(DriveParams(1.0, 1.0), IntegratorConfig(), BlochState.ground(), 1.0, 0.0)


def test_default_dt_fifty_steps_per_fastest_period():
    assert default_dt(DriveParams(5.0, 6.0, mw_detuning=1.0, rf_amplitude=2.7)) == pytest.approx(1 / 300)
    assert default_dt(DriveParams(0.5, 15.0, mw_detuning=15.0, rf_amplitude=4.5)) == pytest.approx(1 / 975)


def test_rabi_trace_without_rf():
    tr = rabi_trace(DriveParams(5.0, 1.0), IntegratorConfig(dt_max=1e-3), 1.0, 101)
    np.testing.assert_allclose(tr.p0, np.cos(math.pi * 5 * tr.t) ** 2, atol=1e-6)
    assert len(tr) == 101 and tr.dt == pytest.approx(0.01)


def test_rabi_trace_points_equal_direct_integration():
    p = DriveParams(3.0, 4.0, rf_amplitude=1.5, rf_phase=0.3, gamma2=0.1)
    tr = rabi_trace(p, IntegratorConfig(dt_max=1e-3), 1.0, 11, rf_phase_average=1)
    for tau, p0 in zip(tr.t[1:], tr.p0[1:]):
        s = integrate(p, IntegratorConfig(dt_max=1e-3), BlochState.ground(), 0.0, tau)
        assert p0 == pytest.approx(s.p0, abs=1e-10)


def test_phase_average_is_mean_over_phases():
    p = DriveParams(3.0, 4.0, rf_amplitude=1.5)
    cfg = IntegratorConfig(dt_max=2e-3)
    avg = rabi_trace(p, cfg, 1.0, 21, rf_phase_average=4)
    parts = [rabi_trace(p.with_(rf_phase=2 * math.pi * k / 4), cfg, 1.0, 21, 1).p0 for k in range(4)]
    np.testing.assert_allclose(avg.p0, np.mean(parts, axis=0), atol=1e-12)


def test_hyperfine_average():
    hf = Hyperfine(2.16, (0.2, 0.5, 0.3))
    p = DriveParams(2.0, 4.0, mw_detuning=0.4, hyperfine=hf)
    cfg = IntegratorConfig(dt_max=2e-3)
    avg = rabi_trace(p, cfg, 1.0, 21)
    parts = [
        w * rabi_trace(p.with_(hyperfine=None, mw_detuning=0.4 + o), cfg, 1.0, 21).p0
        for o, w in zip(hf.offsets, hf.weights)
    ]
    np.testing.assert_allclose(avg.p0, np.sum(parts, axis=0), atol=1e-12)


def test_shot_noise_seeded():
    p = DriveParams(2.0, 4.0)
    clean = rabi_trace(p, IntegratorConfig(), 1.0, 201)
    a = rabi_trace(p, IntegratorConfig(), 1.0, 201, shot_noise=ShotNoise(10_000, seed=3))
    b = rabi_trace(p, IntegratorConfig(), 1.0, 201, shot_noise=ShotNoise(10_000, seed=3))
    c = rabi_trace(p, IntegratorConfig(), 1.0, 201, shot_noise=ShotNoise(10_000, seed=4))
    assert a.p0.tobytes() == b.p0.tobytes()
    assert a.p0.tobytes() != c.p0.tobytes()
    assert np.max(np.abs(a.p0 - clean.p0)) < 0.03


def test_timetrace_validation():
    with pytest.raises(ValueError):
        TimeTrace(np.array([0.0, 1.0, 1.5]), np.zeros(3))
    with pytest.raises(ValueError):
        TimeTrace(np.array([0.0, 1.0]), np.zeros(3))
    with pytest.raises(ValueError):
        rabi_trace(DriveParams(1.0, 1.0), IntegratorConfig(), 1.0, 1)
