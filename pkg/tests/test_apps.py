import math

import numpy as np
import pytest

from qsketch import apps


def test_quadratic_form_constant():
    e = math.exp(-2)
    assert apps.QUADRATIC_FORM_CONSTANT == pytest.approx(e / (1 + e + e**2), abs=1e-15)
    assert apps.QUADRATIC_FORM_CONSTANT > 0.117


def test_single_gate_fixture_sizes():
    gates = apps.random_circuit(1, 1, np.random.default_rng(0))
    lin = apps.embed_circuit_to_linear_system(gates, 1)
    # (b, a, clock, system) registers: 2 * 2 * 3T * 2^n, doubled by realification
    assert lin["A"].shape == (48, 48)
    assert lin["T"] == 1


def test_empty_circuit_rejected():
    with pytest.raises(ValueError):
        apps.embed_circuit_to_linear_system([], 1)


def test_identity_circuit_quadratic_form():
    gates = [np.eye(2)] * 2
    lin = apps.embed_circuit_to_linear_system(gates, 1)
    A = lin["A"].toarray()
    x = np.linalg.solve(A, lin["b"])
    M = lin["M"].toarray()
    q = x @ M @ x / (x @ x) / np.linalg.norm(M, 2)
    assert q == pytest.approx(apps.QUADRATIC_FORM_CONSTANT, abs=1e-10)


def test_linear_system_task_identity():
    t = apps.LinearSystemTask(np.eye(2), np.array([1.0, 0.0]), np.diag([1.0, 0.0]), 1.0)
    assert t.truth() == pytest.approx(1.0)


def test_task_validation():
    with pytest.raises(ValueError):
        apps.LinearSystemTask(np.array([[0.5, 0.1], [0.0, 0.5]]), np.ones(2), np.eye(2), 2.0)


@pytest.mark.parametrize("mode", ["expected", "spectral"])
def test_quadratic_form_pipeline(mode):
    rng = np.random.default_rng(1)
    task = apps.random_linear_system_task(rng=rng)
    res = apps.estimate_quadratic_form(task, 0.1, 0.1, rng, mode=mode)
    assert abs(res.meta["exact_value"] - task.truth()) <= res.meta["bias"]
    # spectral mode bypasses the oracle sketches and consumes nothing
    assert (res.samples > 0) == (mode == "expected")


def test_classify_spectral_matches_ridge_oracle():
    rng = np.random.default_rng(2)
    task = apps.random_classification_task(rng=rng)
    task.lam = 0.05
    res = apps.classify(task, 0.1, rng, mode="spectral")
    assert res.meta["w_error"] < 1e-6
    np.testing.assert_array_equal(res.estimate, res.truth)
    assert res.ok


def test_classify_training_row_keeps_label():
    rng = np.random.default_rng(3)
    task = apps.random_classification_task(rng=rng)
    row = task.X[0] / np.linalg.norm(task.X[0])
    task.tests = row[None, :]
    res = apps.classify(task, 0.1, rng, mode="spectral")
    assert int(np.ravel(res.estimate)[0]) == int(np.sign(task.y[0]))


def test_classify_rejects_zero_margin():
    rng = np.random.default_rng(6)
    task = apps.random_classification_task(rng=rng)
    task.gamma_test = 0.0
    with pytest.raises(ValueError):
        apps.classify(task, 0.1, rng, mode="spectral")


def test_reduce_dimension_spectral():
    rng = np.random.default_rng(4)
    task = apps.random_reduction_task(rng=rng)
    res = apps.reduce_dimension(task, 0.1, 0.1, rng, mode="spectral")
    assert res.meta["w_error"] < 1e-6
    w = task.principal()
    assert task.g @ w >= 0
    np.testing.assert_allclose(task.truth(), task.tests @ w, atol=1e-12)


def test_bad_mode_rejected():
    rng = np.random.default_rng(5)
    task = apps.random_linear_system_task(rng=rng)
    with pytest.raises(ValueError):
        apps.estimate_quadratic_form(task, 0.1, 0.1, rng, mode="nope")
