import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinsync.model import (
    BlochState,
    DriveParams,
    Hyperfine,
    bloch_rhs,
    generator,
    instantaneous_detuning,
)

TWO_PI = 2 * math.pi


def test_detuning_without_drives():
    p = DriveParams(0.0, 1.0)
    assert instantaneous_detuning(p, 0.37) == 0.0


def test_detuning_peaks_at_t0():
    p = DriveParams(5.0, 6.0, rf_amplitude=2.7)
    assert instantaneous_detuning(p, 0.0) == pytest.approx(2.7)


def test_detuning_quarter_period():
    p = DriveParams(0.5, 15.0, mw_detuning=1.0, rf_amplitude=4.5)
    assert instantaneous_detuning(p, 1 / (4 * 15)) == pytest.approx(1.0, abs=1e-14)


def test_rhs_stationary_pole():
    assert bloch_rhs(DriveParams(0.0, 1.0), 0.0, BlochState(0, 0, 1)) == BlochState(0, 0, 0)


def test_rhs_pure_mw_torque():
    d = bloch_rhs(DriveParams(5.0, 1.0), 0.0, BlochState(0, 0, 1))
    assert (d.u, d.v, d.w) == pytest.approx((0.0, -TWO_PI * 5, 0.0))


def test_rhs_rf_torque_on_u():
    # by hand: du = -D v = 0, dv = D u - W w = 2 pi 2.7, dw = W v = 0
    p = DriveParams(5.0, 6.0, rf_amplitude=2.7)
    d = bloch_rhs(p, 0.0, BlochState(1, 0, 0))
    assert (d.u, d.v, d.w) == pytest.approx((0.0, TWO_PI * 2.7, 0.0))


def test_relaxation_terms():
    p = DriveParams(0.0, 1.0, gamma1=0.1, gamma2=0.3, w_eq=0.5)
    d = bloch_rhs(p, 0.0, BlochState(0.2, -0.4, 1.0))
    assert (d.u, d.v, d.w) == pytest.approx((-0.06, 0.12, -0.05))


states = st.tuples(*[st.floats(-1, 1)] * 3).filter(lambda s: sum(x * x for x in s) > 1e-6)
# |D| <= 2 pi 8 MHz keeps the rounding of the cancelling torque terms below 1e-14
drives = st.tuples(
    st.floats(0, 4), st.floats(0.1, 20), st.floats(-4, 4), st.floats(0, 4), st.floats(-math.pi, math.pi)
)


@settings(max_examples=200, deadline=None)
@given(drives, states, st.floats(0, 50))
def test_torque_preserves_norm(drive, s, t):
    p = DriveParams(*drive[:2], mw_detuning=drive[2], rf_amplitude=drive[3], rf_phase=drive[4])
    s = BlochState(*s)
    d = bloch_rhs(p, t, s)
    dot = s.u * d.u + s.v * d.v + s.w * d.w
    assert abs(dot) < 1e-14 * s.norm() ** 2


@settings(max_examples=100, deadline=None)
@given(drives, states, st.integers(0, 50))
def test_rhs_periodic_in_rf_period(drive, s, k):
    p = DriveParams(1.0, 4.0, mw_detuning=drive[2], rf_amplitude=drive[3] + 0.5, rf_phase=drive[4])
    s = BlochState(*s)
    t = 0.01 * k
    a = bloch_rhs(p, t, s)
    b = bloch_rhs(p, t + 1 / p.rf_frequency, s)
    # cos(2 pi f t) vs cos(2 pi f t + 2 pi) agree to rounding of the argument
    assert (a.u, a.v, a.w) == pytest.approx((b.u, b.v, b.w), abs=1e-9)


def test_rhs_periodic_exact_for_binary_period():
    p = DriveParams(1.0, 4.0, rf_amplitude=2.0, gamma1=0.1, gamma2=0.2)
    s = BlochState(0.3, -0.2, 0.5)
    for t in (0.0, 0.125, 0.5):
        assert bloch_rhs(p, t, s) == bloch_rhs(p, t + 0.25, s)


@settings(max_examples=100, deadline=None)
@given(states, states, st.floats(-3, 3), st.floats(-3, 3), st.floats(0, 5))
def test_homogeneous_part_is_linear(s1, s2, a, b, t):
    p = DriveParams(3.0, 5.0, mw_detuning=0.7, rf_amplitude=1.5, gamma1=0.2, gamma2=0.4, w_eq=0.8)
    eq = bloch_rhs(p, t, BlochState(0, 0, 0))  # the constant (equilibrium) term

    def hom(s):
        d = bloch_rhs(p, t, BlochState(*s))
        return np.array([d.u - eq.u, d.v - eq.v, d.w - eq.w])

    mix = tuple(a * x + b * y for x, y in zip(s1, s2))
    np.testing.assert_allclose(hom(mix), a * hom(s1) + b * hom(s2), atol=1e-12)


def test_generator_matches_rhs():
    p = DriveParams(3.0, 5.0, mw_detuning=0.7, rf_amplitude=1.5, gamma1=0.2, gamma2=0.4, w_eq=0.8)
    s = BlochState(0.1, 0.5, -0.3)
    t = 0.123
    g = generator(p, instantaneous_detuning(p, t))
    d = bloch_rhs(p, t, s)
    np.testing.assert_allclose(g @ [s.u, s.v, s.w, 1.0], [d.u, d.v, d.w, 0.0], atol=1e-13)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"rabi_frequency": -1, "rf_frequency": 1},
        {"rabi_frequency": 1, "rf_frequency": 0},
        {"rabi_frequency": 1, "rf_frequency": 1, "rf_amplitude": -0.1},
        {"rabi_frequency": 1, "rf_frequency": 1, "gamma2": -1},
        {"rabi_frequency": 1, "rf_frequency": 1, "w_eq": 1.5},
    ],
)
def test_invalid_params(kwargs):
    with pytest.raises(ValueError):
        DriveParams(**kwargs)


def test_hyperfine_weights():
    assert Hyperfine().offsets == (-2.16, 0.0, 2.16)
    assert Hyperfine.polarized().weights == (0.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        Hyperfine(2.16, (0.5, 0.5, 0.5))
    with pytest.raises(ValueError):
        Hyperfine(2.16, (-0.1, 0.6, 0.5))
