import numpy as np
import pytest

from qsketch import datagen as D


def test_rng_is_reproducible_and_domain_separated():
    a = D.make_rng(3, 1).random(4)
    np.testing.assert_array_equal(a, D.make_rng(3, 1).random(4))
    assert not np.array_equal(a, D.make_rng(3, 2).random(4))


def test_iid_repetition_number_window_of_one():
    # only the self-count term survives a window of one step
    assert D.repetition_number_exact(D.iid_process(np.full(4, 0.25))) == pytest.approx(0.75)


def test_closed_form_repetition_numbers():
    assert D.repetition_number_exact(D.make_repetitive(16)) == pytest.approx(15)
    assert D.repetition_number_exact(D.make_alternating(16)) == pytest.approx(1.5 - 1 / 16)


def test_repetition_estimate_matches_closed_form():
    proc = D.make_repetitive(10)
    est = D.estimate_repetition_number(proc, 4000, np.random.default_rng(0))
    assert abs(est.R - 9) < 0.5


def test_boolean_stream_is_deterministic_per_seed():
    f = np.array([1, 0, 1, 1])
    a = D.iid_uniform_boolean(f, seed=5).take(50)
    b = D.iid_uniform_boolean(f, seed=5).take(50)
    np.testing.assert_array_equal(a["x"], b["x"])
    np.testing.assert_array_equal(a["y"], f[a["x"]])


def test_finite_stream_exhausts():
    st = D.DataStream(D.iid_process(np.full(2, 0.5)), lambda z: {"x": z}, "boolean", limit=3)
    st.take(3)
    with pytest.raises(D.StreamExhausted):
        st.take(1)


def test_process_spec_round_trip():
    proc = D.make_alternating(8, seed=2)
    back = D.process_from_spec(D.process_to_spec(proc))
    assert back.kind == proc.kind
    np.testing.assert_array_equal(back.sample(20, np.random.default_rng(1)),
                                  proc.sample(20, np.random.default_rng(1)))


def test_matrix_market_round_trip(tmp_path):
    import scipy.sparse as sp

    A = sp.random(6, 6, density=0.3, random_state=0, format="coo")
    D.write_matrix_market(tmp_path / "a.mtx", A)
    np.testing.assert_allclose(D.read_matrix_market(tmp_path / "a.mtx").toarray(), A.toarray())


def test_matrix_stream_samples_nonzeros():
    A = np.array([[0, 2.0], [3.0, 0]])
    batch = D.matrix_stream(A, seed=1).take(20)
    for i, j, v in zip(batch["i"], batch["j"], batch["a"]):
        assert A[i, j] == v != 0
