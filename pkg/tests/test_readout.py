import numpy as np
import pytest

from qsketch import readout as R


def test_stabilizer_counts():
    # 6, 60, 1080 stabilizer states on 1, 2, 3 qubits
    assert [R.stabilizer_states(n).shape[0] for n in (1, 2, 3)] == [6, 60, 1080]
    t = R.stabilizer_states(2)
    np.testing.assert_allclose(np.linalg.norm(t, axis=1), 1, atol=1e-12)


def test_zero_state_fidelity():
    rng = np.random.default_rng(0)
    psi = np.zeros(4)
    psi[0] = 1
    sh = R.collect_shadows(psi, 4000, rng)
    assert R.predict_fidelity(sh, psi, k=4) == pytest.approx(1, abs=0.15)
    orth = np.zeros(4)
    orth[3] = 1
    assert R.predict_fidelity(sh, orth, k=4) == pytest.approx(0, abs=0.15)


def test_shadow_mean_reconstructs_density_matrix():
    rng = np.random.default_rng(1)
    psi = rng.normal(size=4) + 1j * rng.normal(size=4)
    psi /= np.linalg.norm(psi)
    sh = R.collect_shadows(psi, 100_000, rng)
    table = R.stabilizer_states(2)
    snaps = table[sh.ids]
    rho_hat = 5 * np.einsum("si,sj->ij", snaps, snaps.conj()) / snaps.shape[0] - np.eye(4)
    assert np.linalg.norm(rho_hat - np.outer(psi, psi.conj()), 2) < 0.05


def test_zero_count_rejected():
    with pytest.raises(ValueError):
        R.collect_shadows(np.array([1.0, 0.0]), 0, np.random.default_rng(0))


def test_median_of_means():
    assert R.median_of_means(np.array([1.0, 1.0, 5.0, 5.0, 100.0, 100.0, 7.0]), 3) == 5.0


def test_parameters():
    # k = ceil(8 ln 800) = 54, L = ceil(12 * 2 / 0.05^2) = 9600
    assert R.shadow_parameters(20, 0.05, 0.05) == (54, 9600)


def test_interferometric_observable_has_expected_value():
    rng = np.random.default_rng(2)
    w, x = rng.normal(size=(2, 4))
    w /= np.linalg.norm(w)
    x /= np.linalg.norm(x)
    st = R.interferometric_state(w)
    O = R.interferometric_observable(x)
    assert np.real(st.conj() @ O @ st) == pytest.approx(x @ w, abs=1e-12)


def test_interferometric_predict_recovers_overlaps():
    rng = np.random.default_rng(3)
    w = rng.normal(size=4)
    w /= np.linalg.norm(w)
    tests = rng.normal(size=(5, 4))
    tests /= np.linalg.norm(tests, axis=1, keepdims=True)
    est = R.interferometric_predict(R.interferometric_state(w), list(tests), 0.1, 0.1, rng)
    np.testing.assert_allclose(est, tests @ w, atol=0.1)


def test_shadow_log_round_trip():
    sh = R.collect_shadows(np.array([1.0, 0, 0, 0]), 300, np.random.default_rng(4))
    back = R.decode_shadows(R.encode_shadows(sh))
    assert back.n == sh.n
    np.testing.assert_array_equal(back.ids, sh.ids)
