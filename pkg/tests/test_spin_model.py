import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nvclock.errors import ConfigError, DomainError, NearGSLACError
from nvclock.spin_model import (
    SpinConstants,
    approx_frequencies,
    basis_index,
    build_hamiltonian,
    fractional_shifts,
    temperature_model,
    transition_frequencies,
)

from conftest import hamiltonian_oracle, oracle_frequencies


def test_basis_index_ordering():
    assert basis_index(1, 1) == 0
    assert basis_index(0, 0) == 4
    assert basis_index(-1, -1) == 8
    with pytest.raises(ValueError):
        basis_index(2, 0)


def test_hamiltonian_matches_elementwise_oracle(c):
    for B in (0.0, 123.4, 475.0, -300.0):
        H = build_hamiltonian(c, B, 297.0)
        Ho, _ = hamiltonian_oracle(c, B)
        assert np.allclose(H, Ho, rtol=0, atol=1e-6)
        assert np.allclose(H, H.conj().T)


def test_hamiltonian_conserves_total_projection(c):
    H = build_hamiltonian(c, 475.0, 297.0)
    M = np.array([ms + mi for ms in (1, 0, -1) for mi in (1, 0, -1)])
    mask = M[:, None] != M[None, :]
    assert np.all(H[mask] == 0)


def test_frequencies_match_oracle(c):
    for B in (1.0, 50.0, 475.0, 800.0, -475.0):
        fq = transition_frequencies(c, B, 297.0)
        ref = oracle_frequencies(c, B)
        got = (fq.f_plus, fq.f_minus, fq.f1, fq.f2)
        assert np.allclose(got, ref, rtol=1e-12, atol=1e-3)


def test_zero_field_nuclear_lines_degenerate(c):
    fq = transition_frequencies(c, 0.0, 297.0)
    assert fq.f1 == pytest.approx(fq.f2, rel=1e-12)
    assert fq.f_minus > fq.f_plus


def test_f_plus_monotone_in_field(c):
    fp = [transition_frequencies(c, B, 297.0).f_plus for B in np.linspace(0, 900, 19)]
    assert np.all(np.diff(fp) > 0)


def test_near_gslac_rejected(c):
    with pytest.raises(NearGSLACError):
        transition_frequencies(c, 1024.3, 297.0)
    with pytest.raises(NearGSLACError):
        approx_frequencies(c, 1020.0, 297.0)


def test_domain_limits(c):
    with pytest.raises(DomainError):
        build_hamiltonian(c, 2500.0, 297.0)
    with pytest.raises(DomainError):
        transition_frequencies(c, 475.0, 20.0)
    with pytest.raises(DomainError):
        temperature_model(c, np.nan)


def test_temperature_model_linear_and_quadratic(c):
    D, Q = temperature_model(c, 298.0)
    assert (D - c.D0) / c.D0 == pytest.approx(c.lambda_D + 0.5 * c.lambda_D2, rel=1e-9)
    assert (Q - c.Q0) / c.Q0 == pytest.approx(c.lambda_Q, rel=1e-9)
    Ds, Qs = temperature_model(c, np.array([296.0, 297.0, 298.0]))
    assert Ds[1] == c.D0 and Qs[1] == c.Q0


def test_fractional_shifts_consistent(c):
    T = np.array([296.0, 297.0, 297.001, 299.5])
    fD, fQ = fractional_shifts(c, T)
    D, Q = temperature_model(c, T)
    assert np.allclose(fD, (D - c.D0) / c.D0, rtol=0, atol=1e-15)
    assert np.allclose(fQ, (Q - c.Q0) / c.Q0, rtol=0, atol=1e-15)
    assert fD[1] == 0 and fQ[1] == 0
    # no cancellation at tiny offsets
    assert fractional_shifts(c, c.T0 + 1e-6)[0] == pytest.approx(c.lambda_D * 1e-6, rel=1e-9)
    with pytest.raises(DomainError):
        fractional_shifts(c, 1000.0)


def test_approx_against_exact_475(c):
    ex = transition_frequencies(c, 475.0, 297.0)
    ap = approx_frequencies(c, 475.0, 297.0)
    assert abs(ap.f1 / ex.f1 - 1) < 1e-3
    assert abs(ap.f2 / ex.f2 - 1) < 1e-3
    assert abs(ap.d_half_sum_closed / ex.d_half_sum - 1) < 1e-5
    assert abs(ap.q_half_sum_closed / ex.q_half_sum - 1) < 1e-5


def test_constants_validation():
    with pytest.raises(ConfigError):
        SpinConstants(lambda_Q=-25.3e-6)
    with pytest.raises(ConfigError):
        SpinConstants(D0=-1.0)
    with pytest.raises(ConfigError):
        SpinConstants.from_dict({"bogus": 1})
    c = SpinConstants.from_dict({"D0": "2870.0e6"})
    assert c.D0 == 2870.0e6
    assert SpinConstants.from_dict(c.to_dict()) == c


def test_second_order_combination_default(c):
    assert c.second_order_combination == pytest.approx(-800e-6, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(B=st.floats(-900, 900), T=st.floats(100, 400))
def test_labelled_frequencies_positive_and_oracle(B, T):
    c = SpinConstants()
    fq = transition_frequencies(c, B, T)
    assert min(fq.f_plus, fq.f_minus, fq.f1, fq.f2) > 0
    if abs(c.gamma_e * B) > 1e5:
        ref = oracle_frequencies(c, B, T)
        assert np.allclose((fq.f_plus, fq.f_minus, fq.f1, fq.f2), ref, rtol=1e-10)
