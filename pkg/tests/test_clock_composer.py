import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nvclock import clock_composer as cc
from nvclock.errors import ConfigError, DomainError
from nvclock.spin_model import SpinConstants, temperature_model

finite = st.floats(-1e-4, 1e-4)


def test_normalized_readout():
    assert cc.normalized_readout(cc.WindowedReadout(1.0, 1.0, 1e-6, 1e-6)) == 0
    assert cc.normalized_readout(cc.WindowedReadout(1.02, 1.00, 1e-6, 1e-6)) == pytest.approx(0.02)
    # offset only in the denominator
    for off in (0.0, 0.5, 2.0):
        assert cc.normalized_readout(cc.WindowedReadout(1.02, 1.0, 1e-6, 1e-6, off)) == pytest.approx(0.02 / (1.0 + off))
    with pytest.raises(DomainError):
        cc.normalized_readout(cc.WindowedReadout(1.0, 1.0, 1e-6, 1e-6, -1.0))
    with pytest.raises(DomainError):
        cc.WindowedReadout(1.0, 1.0, 0.0, 1e-6)


def test_detuning_extraction():
    assert cc.detuning_from_quadratures(cc.QuadratureReadout(1.0, 1.0, 1.0)) == pytest.approx(0.125)
    assert cc.detuning_from_quadratures(cc.QuadratureReadout(2.0, 0.0, 1.0)) == 0.0
    sx, sy = cc.forward_quadratures(37.0, 1e-3, 0.7)
    assert cc.detuning_from_quadratures(cc.QuadratureReadout(float(sx), float(sy), 1e-3)) == pytest.approx(37.0, rel=1e-9)
    with pytest.raises(DomainError):
        cc.detuning_from_quadratures(cc.QuadratureReadout(0.0, 0.0, 1.0))


@settings(max_examples=60, deadline=None)
@given(st.floats(-0.2499, 0.2499), st.floats(1e-6, 1.0))
def test_detuning_roundtrip(x, tau):
    df = x / tau
    sx, sy = cc.forward_quadratures(df, tau, 0.01)
    got = cc.detuning_from_quadratures(cc.QuadratureReadout(float(sx), float(sy), tau))
    assert got == pytest.approx(df, rel=1e-9, abs=1e-9 / tau)


def test_series_branch_flags_and_unwrap():
    tau = 1e-3
    df = np.linspace(0, 900, 50)  # crosses 1/(2 tau) = 500 Hz
    sx, sy = cc.forward_quadratures(df, tau)
    d0, f0 = cc.detunings_from_series(sx, sy, tau)
    assert f0.any()
    d1, f1 = cc.detunings_from_series(sx, sy, tau, unwrap=True)
    assert np.allclose(d1, df, atol=1e-9)
    assert not f1.any()


def test_alpha_values(c):
    assert cc.alpha_from_lambdas(c) == pytest.approx(1.3955, abs=5e-4)
    assert cc.alpha_from_lambdas(c.with_(lambda_Q=-c.lambda_D)) == pytest.approx(0.5)
    assert cc.alpha_from_lambdas(c.with_(lambda_Q=0.0)) == 1.0
    a = cc.alpha_from_lambdas(c)
    assert a + (1 - a) == 1.0


def test_degenerate_lambda_message(c):
    with pytest.raises(ConfigError, match="infinity"):
        cc.alpha_from_lambdas(_degenerate())


def _degenerate():
    # bypasses validation, which would reject equal coefficients earlier
    c = object.__new__(SpinConstants)
    for k, v in SpinConstants().to_dict().items():
        object.__setattr__(c, k, v)
    object.__setattr__(c, "lambda_Q", c.lambda_D)
    return c


def test_composite_pure_temperature_null(c):
    for dT in (1e-3, 0.01, 0.5):
        assert abs(cc.composite_correction(c.lambda_Q * dT, c.lambda_D * dT, c)) < 1e-18
    x = 3.7e-8
    assert cc.composite_correction(x, x, c) == pytest.approx(x, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(finite, finite, st.floats(-1, 1))
def test_composite_invariances(fq, fd, t):
    c = SpinConstants()
    a = cc.composite_correction(fq, fd, c)
    b = cc.composite_correction(fq + c.lambda_Q * t, fd + c.lambda_D * t, c)
    assert abs(a - b) <= 1e-12 * max(abs(a), 1e-6)
    e4 = cc.composite_correction_temperature_units(fq, fd, c)
    assert abs(a - e4) <= 1e-12 * max(abs(a), 1e-12)
    assert abs(cc.temperature_estimate(fd + t * 1e-6, fq + t * 1e-6, c) - cc.temperature_estimate(fd, fq, c)) < 1e-9


def test_normalization_and_annotations(c):
    assert cc.normalization_constant(c) * 1e6 == pytest.approx(-10.0, abs=0.1)
    assert (c.lambda_D - c.lambda_Q) * 1e6 == pytest.approx(-18.13, rel=1e-2)
    assert c.lambda_D * c.lambda_Q / (c.lambda_D - c.lambda_Q) * 1e6 == pytest.approx(-10, rel=0.02)


def test_temperature_estimate_roundtrip(c):
    dT = 0.010
    D, Q = temperature_model(c, c.T0 + dT)
    c1 = c.with_(lambda_D2=0.0)
    D1, Q1 = temperature_model(c1, c.T0 + dT)
    est = cc.temperature_estimate((D1 - c.D0) / c.D0, (Q1 - c.Q0) / c.Q0, c1)
    assert est == pytest.approx(dT, rel=1e-9)
    assert cc.temperature_estimate(1e-7, 1e-7, c) == 0


def test_second_order_null(c):
    res1, res2 = [], []
    dTs = np.array([0.001, 0.003, 0.01, 0.03, 0.1])
    for dT in dTs:
        D, Q = temperature_model(c, c.T0 + dT)
        fd, fq = (D - c.D0) / c.D0, (Q - c.Q0) / c.Q0
        res1.append(abs(cc.composite_correction(fq, fd, c)))
        res2.append(abs(cc.composite_correction_2nd(fq, fd, c)))
        assert res2[-1] < res1[-1]
    slope1 = np.polyfit(np.log(dTs), np.log(res1), 1)[0]
    assert slope1 == pytest.approx(2.0, abs=0.05)
    assert cc.composite_correction_2nd(0.0, 0.0, c) == cc.composite_correction(0.0, 0.0, c)


def test_thermometer_compensation(c):
    assert cc.compensate_with_thermometer(12.0, 0.0, c) == 12.0
    dT = 0.02
    assert abs(cc.compensate_with_thermometer(c.lambda_D * c.D0 * dT, dT, c)) < 1e-9
    eps = 1e-3
    r = cc.compensate_with_thermometer(c.lambda_D * c.D0 * dT, dT + eps, c)
    assert r == pytest.approx(-c.lambda_D * c.D0 * eps, rel=1e-9)


def test_feedback_shift(c):
    tD, tQ, psi = 1.68e-6, 0.881e-3, 10e6
    zero = cc.feedback_shift(cc.QuadratureReadout(1, 0, tQ, "Q"), cc.QuadratureReadout(1, 0, tD, "D"), c, psi)
    assert zero == 0
    x = 2e-8
    sxq, syq = cc.forward_quadratures(x * c.Q0, tQ)
    sxd, syd = cc.forward_quadratures(x * c.D0, tD)
    sh = cc.feedback_shift(cc.QuadratureReadout(float(sxq), float(syq), tQ, "Q"),
                           cc.QuadratureReadout(float(sxd), float(syd), tD, "D"), c, psi)
    assert sh / psi == pytest.approx(x, rel=1e-9)
    dT = 0.01
    sxq, syq = cc.forward_quadratures(c.lambda_Q * dT * c.Q0, tQ)
    sxd, syd = cc.forward_quadratures(c.lambda_D * dT * c.D0, tD)
    sh = cc.feedback_shift(cc.QuadratureReadout(float(sxq), float(syq), tQ, "Q"),
                           cc.QuadratureReadout(float(sxd), float(syd), tD, "D"), c, psi)
    assert abs(sh / psi) < 1e-15


def test_optimal_tau():
    assert cc.optimal_tau(1.68e-6) == pytest.approx(1.68e-6, rel=1e-3)
    assert cc.optimal_tau(1.0, 2.0) == pytest.approx(math.sqrt(0.5), rel=1e-3)


def test_budget_exact():
    e = {(x.parameter, x.target): x for x in cc.budget_table()}
    assert e[("temperature", "D")].contribution == Fraction(250, 10**9)
    assert e[("temperature", "Q")].contribution == Fraction(72, 10**9)
    assert e[("rf_power", "psi")].contribution == Fraction(2, 10**9)
    assert e[("laser_power", "D")].contribution == Fraction(22, 10**10)
    assert all(x.contribution == abs(x.sensitivity * x.instability) for x in e.values())
    with pytest.raises(ConfigError):
        cc.budget_table([])
    with pytest.raises(ConfigError):
        cc.budget_rows_from_records([{"parameter": "x", "instability": "1"}])
