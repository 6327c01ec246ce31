#!/usr/bin/env python3

import numpy as np
import pytest

from ltv_observer.exceptions import ImproperFilterError, SingularityError
from ltv_observer.filters import (SisoFilter, make_lambda_filter, filter_step, lambda_polynomial,
                                  SwappingFilter, swapping_regressor, FilterBank)

DT = 1e-3


def _times(t_final, dt=DT):
    return np.arange(0, t_final + dt / 2, dt)


def test_lambda_polynomial():
    np.testing.assert_allclose(lambda_polynomial(2.0, 3), [1, 6, 12, 8])


def test_first_order_step_response():
    t = _times(1.0)
    y = make_lambda_filter(0, 10.0, 1, gain=10.0).filter(np.ones(t.size), DT)
    np.testing.assert_allclose(y, 1 - np.exp(-10 * t), atol=1e-6)


def test_third_order_step_response():
    lam = 10.0
    t = _times(2.0)
    y = make_lambda_filter(0, lam, 3, gain=lam ** 3).filter(np.ones(t.size), DT)
    expected = 1 - np.exp(-lam * t) * (1 + lam * t + (lam * t) ** 2 / 2)
    np.testing.assert_allclose(y, expected, atol=1e-4)


def test_zero_order_hold_steps():
    f = make_lambda_filter(0, 10.0, 1, gain=10.0)
    y = [filter_step(f, 1.0, DT) for _ in range(500)]
    assert y[-1] == pytest.approx(1 - np.exp(-5.0), abs=1e-9)


def test_ramp_response():
    lam = 5.0
    t = _times(3.0)
    y = make_lambda_filter(0, lam, 1, gain=lam).filter(t, DT)
    np.testing.assert_allclose(y, t - (1 - np.exp(-lam * t)) / lam, atol=1e-8)


def test_sinusoid_steady_state_amplitude():
    lam, w = 2.0, 3.0
    t = _times(40.0, 1e-3)
    y = make_lambda_filter(0, lam, 3, gain=lam ** 3).filter(np.sin(w * t), 1e-3)
    expected = abs((lam / (1j * w + lam)) ** 3)
    assert expected == pytest.approx(0.1706, abs=1e-4)
    assert np.abs(y[t > 30.0]).max() == pytest.approx(expected, abs=1e-4)


@pytest.mark.parametrize('k', [0, 1, 2, 3])
def test_sinusoid_amplitude_of_derivative_filters(k):
    lam, w = 2.0, 3.0
    t = _times(40.0)
    y = make_lambda_filter(k, lam, 3, gain=lam).filter(np.sin(w * t), DT)
    expected = lam * w ** k / (w ** 2 + lam ** 2) ** 1.5
    if k == 3:
        assert expected == pytest.approx(1.152, abs=1e-3)
    assert np.abs(y[t > 30.0]).max() == pytest.approx(expected, rel=1e-4)


def test_washout_of_ramp():
    lam = 5.0
    t = _times(3.0)
    y = make_lambda_filter(1, lam, 1, gain=lam).filter(t, DT)
    np.testing.assert_allclose(y, 1 - np.exp(-lam * t), atol=1e-8)


def test_second_derivative_step_response():
    lam = 2.0
    t = _times(5.0)
    y = make_lambda_filter(2, lam, 3, gain=lam).filter(np.ones(t.size), DT)
    np.testing.assert_allclose(y, lam * t * np.exp(-lam * t) * (1 - lam * t / 2), atol=1e-8)


def test_dc_gain():
    assert make_lambda_filter(0, 10.0, 3, gain=1000.0).dc_gain == pytest.approx(1.0)
    assert make_lambda_filter(1, 10.0, 3, gain=10.0).dc_gain == 0.0
    assert make_lambda_filter(3, 10.0, 3, gain=1.0).d == pytest.approx(1.0)


def test_linearity():
    rng = np.random.default_rng(7)
    u1, u2 = rng.normal(size=500), rng.normal(size=500)
    f = make_lambda_filter(1, 4.0, 3, gain=2.0)
    combined = f.filter(2.0 * u1 - 0.5 * u2, DT)
    separate = 2.0 * f.filter(u1, DT) - 0.5 * f.filter(u2, DT)
    np.testing.assert_allclose(combined, separate, atol=1e-12)


def test_shift_invariance():
    t = _times(2.0)
    u = np.sin(3 * t)
    f = make_lambda_filter(2, 10.0, 3, gain=10.0)
    delayed = f.filter(np.concatenate([np.zeros(100), u]), DT)
    np.testing.assert_allclose(delayed[100:], f.filter(u, DT), atol=1e-12)
    np.testing.assert_array_equal(delayed[:100], 0.0)


def test_zero_in_zero_out():
    np.testing.assert_array_equal(make_lambda_filter(3, 10.0, 3).filter(np.zeros(200), DT), 0.0)


def test_improper_operators():
    with pytest.raises(ImproperFilterError):
        make_lambda_filter(4, 10.0, 3)
    with pytest.raises(ImproperFilterError):
        SisoFilter([1, 0, 0], [1, 1])


def test_invalid_operators():
    with pytest.raises(ValueError):
        make_lambda_filter(0, 0.0, 3)
    with pytest.raises(ValueError):
        SisoFilter([1], [1, -1])


def _swap_signals(t_final=3.0):
    t = _times(t_final)
    x_i = 2 + np.sin(t)
    x_s = 2 + np.cos(t)
    return t, x_i, x_s, -np.sin(t)


def test_swapping_identity():
    lam = 10.0
    t, x_i, x_s, xdot_s = _swap_signals()
    swapped = swapping_regressor(x_i, x_s, xdot_s, lam, DT)
    direct = make_lambda_filter(0, lam, 1, gain=lam).filter(np.cos(t) / x_s, DT)
    diff = direct - swapped
    # the identities differ only by a free response started at t = 0
    assert diff[0] == pytest.approx(-lam * x_i[0] / x_s[0])
    np.testing.assert_allclose(diff, diff[0] * np.exp(-lam * t), atol=1e-4)
    assert np.abs(diff[t >= 1.0]).max() < 1e-3


def test_swapping_constant_signals():
    t = _times(2.0)
    out = swapping_regressor(np.full(t.size, 3.0), np.full(t.size, 2.0), np.zeros(t.size), 10.0, DT)
    assert abs(out[-1]) < 1e-6


def test_swapping_scale_invariance():
    lam = 10.0
    _, x_i, x_s, xdot_s = _swap_signals()
    base = swapping_regressor(x_i, x_s, xdot_s, lam, DT)
    scaled = swapping_regressor(5 * x_i, 5 * x_s, 5 * xdot_s, lam, DT)
    np.testing.assert_allclose(scaled, base, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(swapping_regressor(5 * x_i, x_s, xdot_s, lam, DT), 5 * base, atol=1e-10)


def test_swapping_rejects_vanishing_multiplier():
    t, x_i, x_s, xdot_s = _swap_signals()
    x_s = np.cos(t)
    with pytest.raises(SingularityError) as info:
        swapping_regressor(x_i, x_s, xdot_s, 10.0, DT, eps_div=1e-3, t0=0.0)
    assert info.value.t == pytest.approx(np.pi / 2, abs=2 * DT)


def test_swapping_filter_holds_last_multiplier():
    swap = SwappingFilter(10.0, eps_div=1e-3)
    value, gated = swap.feed(1.0, 2.0, 0.0, DT)
    assert not gated
    value, gated = swap.feed(1.0, 0.0, 0.0, DT)
    assert gated
    assert np.isfinite(value)


def test_bank_matches_separate_filters():
    t = _times(2.0)
    u = np.column_stack([np.sin(3 * t), np.cos(t) + t])
    filters = [make_lambda_filter(1, 10.0, 1, gain=10.0), make_lambda_filter(0, 10.0, 3, gain=1000.0),
               make_lambda_filter(3, 2.0, 3)]
    inputs = (0, 1, 0)
    bank = FilterBank(filters, inputs, DT)
    out = np.array([bank.feed(row) for row in u])
    for j, (f, col) in enumerate(zip(filters, inputs)):
        np.testing.assert_allclose(out[:, j], f.filter(u[:, col], DT), rtol=1e-12, atol=1e-12)


def test_bank_needs_an_input_per_filter():
    with pytest.raises(ValueError, match='2 filters but 1 inputs'):
        FilterBank([make_lambda_filter(0, 1.0, 1)] * 2, (0,), DT)
