import numpy as np
import pytest

from qsketch import simcore as C


def test_state_vector_gates_and_normalization():
    sv = C.StateVector.zero(2).apply(C.GATES["h"], [0])
    assert sv.is_normalized()
    np.testing.assert_allclose(sv.probabilities(), [0.5, 0, 0.5, 0], atol=1e-12)


def test_zero_angle_leaves_accumulator_unchanged():
    acc = C.DiagonalUnitary(2)
    C.apply_multi_controlled_phase(acc, 3, 0.0)
    np.testing.assert_array_equal(acc.phases, np.zeros(4))


def test_multi_controlled_phase_hits_one_entry():
    acc = C.DiagonalUnitary(2)
    C.apply_multi_controlled_phase(acc, 2, 0.3)
    np.testing.assert_allclose(acc.diag(), np.exp(1j * np.array([0, 0, 0.3, 0])))


def test_zstring_rotation_matches_dense():
    acc = C.DiagonalUnitary(3)
    C.apply_zstring_rotation(acc, 0b101, 0.7)
    z = np.diag([1.0, -1.0])
    dense = C.kron_all([z, np.eye(2), z])
    w, V = np.linalg.eigh(dense)
    np.testing.assert_allclose(acc.matrix(), (V * np.exp(0.7j * w)) @ V.T, atol=1e-12)


def test_dense_unitary_rejects_non_unitary():
    with pytest.raises(ValueError):
        C.DenseUnitary(np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_diamond_distance_of_phase_gate():
    # U = I, V = diag(1, e^{i phi}): the diamond distance is 2 sin(phi / 2)
    phi = 0.9
    d = C.diamond_distance_unitaries(np.eye(2), np.diag([1, np.exp(1j * phi)]))
    assert d == pytest.approx(2 * np.sin(phi / 2), abs=1e-10)


def test_diamond_ignores_global_phase():
    rng = np.random.default_rng(0)
    U = C.random_unitary(4, rng)
    assert C.diamond_distance_unitaries(U, np.exp(0.4j) * U) == pytest.approx(0, abs=1e-7)


def test_gap_proxies():
    u = np.exp(1j * np.array([0.1, 0.2]))
    ev = 0.9 * u
    assert C.raw_unitary_gap(u, ev) == pytest.approx(0.1)
    assert C.expected_unitary_gap(u, ev) == pytest.approx(0.4)


def test_hull_distance():
    assert C.hull_distance_to_origin(np.array([1, 1j])) == pytest.approx(np.sqrt(0.5))
    assert C.hull_distance_to_origin(np.array([1, -1])) == pytest.approx(0, abs=1e-12)


def test_schur_bounds_bracket_dense_value():
    rng = np.random.default_rng(3)
    u = np.exp(1j * rng.uniform(0, 2 * np.pi, 3))
    D = np.outer(u, u.conj()) - np.eye(3)
    lo, hi = C.schur_diamond_bounds(D, rng)
    assert 0 <= lo <= hi + 1e-9


def test_controlled_and_embed():
    x = C.GATES["x"]
    cx = C.controlled(x)
    np.testing.assert_array_equal(cx[2:, 2:], x)
    np.testing.assert_array_equal(C.embed_gate(x, [1], 2), np.kron(np.eye(2), x))
