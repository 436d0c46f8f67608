import itertools

import numpy as np
import pytest

from qsketch import linalg as L
from qsketch.datagen import matrix_stream, vector_stream


def _random_sparse(rng, n, s):
    A = np.zeros((n, n))
    for i in range(n):
        js = rng.choice(n, int(rng.integers(1, s + 1)), replace=False)
        A[i, js] = rng.uniform(0.1, 1.0, js.size)
    return A / max(1.0, np.linalg.norm(A, 2))


def test_irreducible_table_passes_rabin():
    assert sorted(L.IRREDUCIBLE_POLYS) == list(range(1, 33))
    assert all(L.is_irreducible_gf2(p) for p in L.IRREDUCIBLE_POLYS.values())
    assert not L.is_irreducible_gf2(0b101)  # x^2 + 1 = (x + 1)^2


def test_gf_mul_associative():
    rng = np.random.default_rng(0)
    a, b, c = rng.integers(0, 2**8, (3, 50))
    np.testing.assert_array_equal(L.gf_mul(L.gf_mul(a, b, 8), c, 8), L.gf_mul(a, L.gf_mul(b, c, 8), 8))


def test_zero_seed_is_zero_function():
    assert not L.eval_kwise(L.KWiseFunctionSeed.zero(4), np.arange(16)).any()


def test_pairwise_marginals_exactly_uniform():
    # n = 3, k = 2: over every seed, each pair of distinct points sees all four bit pairs equally
    n, k = 3, 2
    xs = np.arange(2**n)
    table = []
    for coeffs in itertools.product(range(2**n), repeat=2 * k):
        table.append(L.eval_kwise(L.KWiseFunctionSeed(n, k, coeffs), xs))
    table = np.array(table)
    for x, y in itertools.combinations(xs, 2):
        counts = np.bincount(2 * table[:, x] + table[:, y], minlength=4)
        assert np.all(counts == counts[0])


def test_flattening_spiky_vector():
    b = np.zeros(64)
    b[0] = 1.0
    seed = L.KWiseFunctionSeed.random(6, 4, seed=1)
    assert L.check_flattening(b, seed, 0.05)
    np.testing.assert_allclose(np.linalg.norm(L.flatten_vector(b, seed)), 1.0)


def test_index_oracle_identity_pattern():
    spec = L.SparseMatrixSpec.from_dense(np.eye(4) * 0.5)
    orc = L.build_sparse_index_oracle(spec)
    pairs = orc.valid_inputs()
    out = orc.apply(orc.input_states(pairs))
    for c, (i, _) in enumerate(pairs):
        assert out[orc._enc(i, 0, i, 0), c] == pytest.approx(1)


def test_index_oracle_corpus_small():
    rng = np.random.default_rng(2)
    for _ in range(10):
        A = _random_sparse(rng, int(rng.integers(2, 17)), 4)
        spec = L.SparseMatrixSpec.from_dense(A)
        orc = L.build_sparse_index_oracle(spec, orientation="col")
        assert orc.unitarity_deviation() == 0


def test_counter_expectation_converges_at_unit_rate():
    spec = L.SparseMatrixSpec.from_dense(_random_sparse(np.random.default_rng(3), 8, 2))
    exact = L.cumulative_counter_unitary(spec).diag()
    gaps = [np.max(np.abs(L.expected_cumulative_counter(spec, M).reshape(-1) - exact))
            for M in (10**4, 10**5)]
    assert gaps[1] == pytest.approx(gaps[0] / 10, rel=0.05)


def test_element_oracle_expected_and_sampled():
    A = np.array([[0.5, 0.25, 0, 0], [0, 0, -0.5, 0], [0, 0, 0, 0.125], [0, 0, 0, 0]])
    spec = L.SparseMatrixSpec.from_dense(A, b=4)
    exact = L.sketch_sparse_element_oracle(spec, "exact")
    assert exact.gap() == pytest.approx(0, abs=1e-12)
    T = exact.truth_table()
    # XOR oracle is involutory
    np.testing.assert_allclose(T @ T, np.broadcast_to(np.eye(T.shape[-1]), T.shape), atol=1e-12)
    exp = L.sketch_sparse_element_oracle(spec, "expected", M=10**6)
    assert exp.gap() < 0.05


def test_block_encoding_identity_and_save_load(tmp_path):
    A = np.eye(4) * 0.5
    be = L.assemble_block_encoding(L.SparseMatrixSpec.from_dense(A), 1e-7)
    assert be.error(A) < 1e-6
    be.save(tmp_path / "be.npz")
    back = L.BlockEncoding.load(tmp_path / "be.npz")
    np.testing.assert_array_equal(back.unitary.entries, be.unitary.entries)
    assert (back.ancilla_count, back.alpha, back.eps_cert) == (be.ancilla_count, be.alpha, be.eps_cert)


def test_block_encoding_rejects_large_norm():
    with pytest.raises(ValueError):
        L.assemble_block_encoding(L.SparseMatrixSpec.from_dense(np.eye(2) * 0.9))


def test_realification_preserves_spectrum():
    rng = np.random.default_rng(4)
    A = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    R = L.realify_matrix(A)
    assert np.isrealobj(R)
    sa = np.linalg.svd(A, compute_uv=False)
    np.testing.assert_allclose(np.sort(np.linalg.svd(R, compute_uv=False)), np.sort(np.r_[sa, sa]), atol=1e-12)
    v = rng.normal(size=3) + 1j * rng.normal(size=3)
    np.testing.assert_allclose(R @ L.realify_vector(v), L.realify_vector(A @ v), atol=1e-12)


def test_norm_estimator_unbiased():
    b = np.random.default_rng(5).normal(size=16)
    vals = [L.estimate_norm(vector_stream(b, seed=k), 16, 200)[0] for k in range(300)]
    assert np.mean(vals) == pytest.approx(b @ b, rel=0.05)


def test_state_sketch_no_amplification_target_norm():
    b = np.random.default_rng(6).normal(size=16)
    b /= np.linalg.norm(b)
    r = L.sketch_state(vector_stream(b, seed=0), 16, mode="no_amplification", M=10**5)
    assert np.linalg.norm(r.target) == pytest.approx(0.127, abs=5e-4)
    assert r.error < 1e-3


def test_matrix_stream_feeds_counter_sketch():
    A = _random_sparse(np.random.default_rng(7), 4, 2)
    spec = L.SparseMatrixSpec.from_dense(A)
    sk = L.sketch_cumulative_counter(matrix_stream(A, seed=1), spec, 20000)
    exact = L.cumulative_counter_unitary(spec).diag()
    assert np.max(np.abs(sk.diag() - exact)) < 0.2
