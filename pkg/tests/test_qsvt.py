import numpy as np
import pytest
from numpy.polynomial import chebyshev as cheb

from qsketch import qsvt as Q


def test_threshold_poly_grid_and_parity():
    P = Q.build_threshold_poly(0.5, 0.05)
    assert P.check()
    assert abs(cheb.chebval(0.0, P.coeffs) - 1) <= 0.05
    x = np.linspace(0, 1, 101)
    np.testing.assert_allclose(cheb.chebval(x, P.coeffs), cheb.chebval(-x, P.coeffs), atol=1e-13)


def test_linear_s1_is_identity():
    P = Q.build_linear_poly(1, 1e-8)
    x = np.linspace(-0.8, 0.8, 41)
    np.testing.assert_allclose(cheb.chebval(x, P.coeffs), x, atol=1e-8)


@pytest.mark.parametrize("builder, args", [
    (Q.build_arcsin_poly, (0.2, 1e-3)),
    (Q.build_inverse_poly, (10, 1e-2)),
    (Q.build_sign_poly, (0.2, 1e-3)),
    (Q.build_filter_poly, (0.3, 0.6, 1e-4)),
])
def test_builders_meet_grid_accuracy_and_bound(builder, args):
    P = builder(*args)
    assert P.max_error() <= P.eps
    assert P.sup_norm() <= 1 + 1e-9


def test_spectral_threshold_on_diagonal():
    P = Q.build_threshold_poly(0.5, 0.05)
    out = Q.qsvt_apply_spectral(np.diag([0.0, 1.0]), P)
    np.testing.assert_allclose(np.diag(out), [1, -1], atol=0.05)


def test_spectral_commutes_with_input():
    rng = np.random.default_rng(0)
    H = rng.normal(size=(4, 4))
    A = (H + H.T) / (2 * np.linalg.norm(H, 2))
    out = Q.qsvt_apply_spectral(A, Q.build_sign_poly(0.1, 1e-3))
    assert np.max(np.abs(out @ A - A @ out)) < 1e-10


def test_phases_reproduce_chebyshev_t8():
    coeffs = np.zeros(9)
    coeffs[8] = 1.0
    seq = Q.solve_phases(coeffs, parity=0)
    x = np.linspace(-1, 1, 33)
    np.testing.assert_allclose(np.real(Q.qsp_poly_wx(x, seq.phis)), cheb.chebval(x, coeffs), atol=1e-8)


def test_circuit_matches_spectral_for_t8():
    rng = np.random.default_rng(1)
    H = rng.normal(size=(4, 4))
    A = (H + H.T) / (2 * np.linalg.norm(H, 2))
    # one-ancilla dilation of A
    w, V = np.linalg.eigh(A)
    S = (V * np.sqrt(1 - w**2)) @ V.T
    U = np.block([[A, S], [S, -A]])
    mask = np.r_[np.ones(4, bool), np.zeros(4, bool)]
    coeffs = np.zeros(9)
    coeffs[8] = 1.0
    seq = Q.solve_phases(coeffs, parity=0)
    out = Q.qsvt_apply_circuit(U, mask, seq)
    np.testing.assert_allclose(out[:4, :4], Q.qsvt_apply_spectral(A, coeffs), atol=1e-8)


def test_degree_zero_is_identity():
    seq = Q.solve_phases(np.array([1.0]), parity=0)
    np.testing.assert_allclose(np.real(Q.qsp_poly_wx(np.linspace(-1, 1, 5), seq.phis)), 1, atol=1e-12)


def test_phase_json_and_convention_round_trip():
    seq = Q.poly_and_phases("sign", 0.2, 1e-3)[1]
    back = Q.phases_from_json(Q.phases_to_json(seq))
    np.testing.assert_array_equal(back.phis, seq.phis)
    assert back.convention == seq.convention
    again = Q.to_wx_sequence(Q.to_reflection_sequence(seq))
    x = np.linspace(-1, 1, 17)
    np.testing.assert_allclose(Q.qsp_poly_wx(x, again.phis), Q.qsp_poly_wx(x, seq.phis), atol=1e-10)
