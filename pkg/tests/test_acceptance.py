"""Acceptance suite: twelve end-to-end checks at their stated tolerances and wall-clock limits.

Each test records a PASS/FAIL line; ``conftest.py`` prints them in the session summary.
Run stand-alone with ``python tests/test_acceptance.py`` to see the lines directly.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from qsketch import apps, bench, linalg, readout, simcore, sketch
from qsketch.cli import _fit_checks, run_e2e
from qsketch.datagen import iid_uniform_boolean, make_rng, vector_stream

RESULTS: dict[str, tuple[bool, str]] = {}


def _record(name: str, ok: bool, detail: str, t0: float, limit: float) -> None:
    dt = time.perf_counter() - t0
    ok = bool(ok) and dt < limit
    line = f"{'PASS' if ok else 'FAIL'} {name}: {detail} [{dt:.1f}s / {limit:.0f}s]"
    RESULTS[name] = (ok, line)
    print(line)
    assert ok, line


# --------------------------------------------------------------------------
# 1. IID sketch law


def test_c01_iid_sketch_law():
    t0 = time.perf_counter()
    rng = make_rng(1, 0)
    violations, worst = 0, 0.0
    for N in (16, 32, 64, 128, 256):
        p = np.full(N, 1.0 / N)
        t = math.pi * N
        fs = [np.ones(N), rng.integers(0, 2, N).astype(float)]
        for M in (10**3, 10**4, 10**5, 10**6):
            bound = math.pi**2 * N / (2 * M)
            for f in fs:
                gap = simcore.raw_unitary_gap(sketch.ideal_phase_oracle(p, f, t),
                                              sketch.expected_phase_oracle_iid(p, f, t, M))
                violations += gap > bound
                worst = max(worst, gap / bound)
    _record("01 iid sketch law", violations == 0,
            f"violations={violations}, max gap/bound={worst:.4f}", t0, 10)


# --------------------------------------------------------------------------
# 2. boolean scaling fit


def test_c02_boolean_scaling_fit():
    t0 = time.perf_counter()
    rows = bench.run_benchmark(bench.BenchmarkGrid.desk("boolean"))
    fit = bench.fit_loglog(rows, "N,M")
    bad = _fit_checks(fit, "boolean")
    _record("02 boolean scaling fit", not bad,
            f"a={fit.exponents['dim']:.4f}, b={-fit.exponents['m_samples']:.4f}, "
            f"rms={fit.rms_rel_err:.4f}", t0, 120)


# --------------------------------------------------------------------------
# 3. Monte-Carlo against closed form


def test_c03_montecarlo_vs_closed_form():
    t0 = time.perf_counter()
    N, M, t = 4, 200, 4 * math.pi
    f = np.array([1, 0, 1, 1])
    closed = sketch.expected_phase_oracle_iid(np.full(N, 0.25), f.astype(float), t, M)
    inside = total = 0
    for rep in range(20):
        mean, se = sketch.expected_oracle_montecarlo(
            lambda k, rep=rep: iid_uniform_boolean(f, seed=rep, stream_id=k), t, M, trials=10_000)
        inside += int(np.sum(np.abs(mean - closed) <= 3 * se))
        total += N
    frac = inside / total
    _record("03 monte-carlo vs closed form", frac >= 0.99, f"within 3 SE: {inside}/{total}", t0, 60)


# --------------------------------------------------------------------------
# 4. error-variance bound


def test_c04_error_variance_bound():
    t0 = time.perf_counter()
    rng = make_rng(4, 0)
    violations = 0
    for _ in range(1000):
        dim = int(rng.integers(1, 5))
        support = int(rng.integers(1, 6))
        q = rng.dirichlet(np.ones(support))
        vals = rng.normal(scale=rng.uniform(0.1, 3.0), size=(support, dim))
        mean = q @ vals
        var = q @ (vals - mean) ** 2
        lhs = np.max(np.abs(np.exp(1j * mean) - q @ np.exp(1j * vals)))
        violations += lhs > 0.5 * var.max() + 1e-12
    _record("04 error-variance bound", violations == 0, f"violations={violations}/1000", t0, 10)


# --------------------------------------------------------------------------
# 5. diamond bounds


def test_c05_diamond_bounds():
    t0 = time.perf_counter()
    rng = make_rng(5, 0)
    bad_pairs = 0
    for _ in range(200):
        d = int(rng.integers(2, 9))
        U = simcore.random_unitary(d, rng)
        # half the pairs are close, where the bound is tightest
        H = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        V = U @ _expm_herm((H + H.conj().T) * rng.uniform(0.01, 1.0)) if rng.random() < 0.5 \
            else simcore.random_unitary(d, rng)
        bad_pairs += simcore.diamond_distance_unitaries(U, V) > 2 * simcore.op_norm_diff(U, V) + 1e-9
    bad_ens, checked = 0, 0
    for _ in range(100):
        d = int(rng.integers(2, 9))
        p = rng.dirichlet(np.ones(d))
        f = rng.integers(0, 2, d).astype(float)
        t = rng.uniform(1.0, 3.0 * d)
        M = int(rng.integers(5, 200))
        u = sketch.ideal_phase_oracle(p, f, t)
        ev = sketch.expected_phase_oracle_iid(p, f, t, M)
        gap = float(np.max(np.abs(u - ev)))
        if gap == 0:
            continue
        D = np.outer(u, u.conj()) - sketch.second_moment_iid(p, f, t, M)
        _, upper = simcore.schur_diamond_bounds(D, rng)
        checked += 1
        bad_ens += 0.5 * upper > 4 * gap + 1e-12
    _record("05 diamond bounds", bad_pairs == 0 and bad_ens == 0 and checked >= 90,
            f"pair violations={bad_pairs}/200, ensemble violations={bad_ens}/{checked}", t0, 30)


def _expm_herm(H):
    w, V = np.linalg.eigh(H / 2)
    return (V * np.exp(1j * w)) @ V.conj().T


# --------------------------------------------------------------------------
# 6. sparse index oracle


def test_c06_sparse_index_oracle():
    t0 = time.perf_counter()
    rng = make_rng(6, 0)
    wrong = 0
    worst_dev = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 33))
        s_r = int(rng.integers(1, 5))
        A = np.zeros((n, n))
        for i in range(n):
            js = rng.choice(n, int(rng.integers(0, min(s_r, n) + 1)), replace=False)
            A[i, js] = rng.uniform(0.1, 1.0, js.size) * rng.choice([-1, 1], js.size)
        A /= max(1.0, np.linalg.norm(A, 2))
        spec = linalg.SparseMatrixSpec.from_dense(A)
        orc = linalg.build_sparse_index_oracle(spec, "exact")
        pairs = orc.valid_inputs()
        out = orc.apply(orc.input_states(pairs))
        for c, (i, k) in enumerate(pairs):
            j = int(np.flatnonzero(A[i])[k])  # brute force j(i, k)
            expect = np.zeros(orc.dim)
            expect[orc._enc(i, 0, j, 0)] = 1.0
            wrong += not np.allclose(out[:, c], expect, atol=1e-12)
        worst_dev = max(worst_dev, orc.unitarity_deviation())
    _record("06 sparse index oracle", wrong == 0 and worst_dev <= 1e-9,
            f"wrong outputs={wrong}, unitarity deviation={worst_dev:.1e}", t0, 60)


# --------------------------------------------------------------------------
# 7. block encoding


def _two_sparse_instance(rng, N=8, norm=0.5):
    perm = rng.permutation(N)
    A = np.zeros((N, N))
    for a in range(0, N, 2):
        i, j = perm[a], perm[a + 1]
        A[i, j] = A[j, i] = rng.uniform(-1, 1)
    A += np.diag(rng.uniform(0.2, 1, N) * rng.choice([-1, 1], N))
    A *= norm / np.linalg.norm(A, 2)
    # dyadic entries so the 16-bit element oracle stores A exactly
    A = np.floor(A * 2**15) / 2**15
    return A


def test_c07_block_encoding():
    t0 = time.perf_counter()
    rng = make_rng(7, 0)
    exact_err = 0.0
    for _ in range(5):
        A = _two_sparse_instance(rng)
        be = linalg.assemble_block_encoding(linalg.SparseMatrixSpec.from_dense(A), 1e-7, "exact")
        exact_err = max(exact_err, be.error(A))
    eps = 0.05
    good = 0
    for _ in range(100):
        A = _two_sparse_instance(rng)
        be = linalg.assemble_block_encoding(linalg.SparseMatrixSpec.from_dense(A), eps, "expected")
        good += be.error(A) <= eps
    _record("07 block encoding", exact_err <= 1e-6 and good >= 95,
            f"exact error={exact_err:.2e}, sketched within eps={good}/100", t0, 120)


# --------------------------------------------------------------------------
# 8. state sketching


def test_c08_state_sketching():
    t0 = time.perf_counter()
    rows = bench.run_benchmark(bench.BenchmarkGrid.desk("vector"))
    fit = bench.fit_loglog(rows, "N,M")
    b_exp = fit.exponents["m_samples"]
    eps = 0.1
    fids = []
    for k in range(20):
        b = make_rng(k, 8).normal(size=16)
        b /= np.linalg.norm(b)
        res = linalg.sketch_state(vector_stream(b, seed=k), 16, eps=eps, delta=0.05, mode="full")
        fids.append(res.fidelity)
    probe = linalg.sketch_state(vector_stream(b, seed=0), 16, mode="no_amplification", M=10**4)
    target_norm = float(np.linalg.norm(probe.target))
    ok = abs(b_exp + 1) <= 0.05 and min(fids) >= 1 - eps and abs(target_norm - 0.127) < 5e-4
    _record("08 state sketching", ok,
            f"M exponent={b_exp:.4f}, min fidelity={min(fids):.4f}, target norm={target_norm:.4f}",
            t0, 180)


# --------------------------------------------------------------------------
# 9. interferometric shadows


def test_c09_interferometric_shadows():
    t0 = time.perf_counter()
    rng = make_rng(9, 0)
    eps = delta = 0.05
    good = sign_bad = sign_total = 0
    for _ in range(100):
        w = rng.normal(size=8)
        w /= np.linalg.norm(w)
        tests = rng.normal(size=(20, 8))
        tests /= np.linalg.norm(tests, axis=1, keepdims=True)
        est = readout.interferometric_predict(readout.interferometric_state(w), list(tests),
                                              eps, delta, rng)
        truth = tests @ w
        good += np.all(np.abs(est - truth) <= eps)
        big = np.abs(truth) >= 0.1
        sign_total += int(big.sum())
        sign_bad += int(np.sum(np.sign(est[big]) != np.sign(truth[big])))
    _record("09 interferometric shadows", good >= 95 and sign_bad == 0,
            f"all-within-eps repetitions={good}/100, sign errors={sign_bad}/{sign_total}", t0, 60)


# --------------------------------------------------------------------------
# 10. embedding fixtures


def test_c10_embedding_fixtures():
    import scipy.sparse.linalg as spla

    t0 = time.perf_counter()
    rng = make_rng(10, 0)
    problems = []
    for c in range(20):
        n = int(rng.integers(1, 4))
        T = int(rng.integers(1, 6))
        gates = apps.random_circuit(n, T, rng)
        psi = apps.circuit_state(gates, n)
        half = 2 ** (n - 1)
        expected_q = apps.QUADRATIC_FORM_CONSTANT * float(np.sum(np.abs(psi[:half]) ** 2))

        lin = apps.embed_circuit_to_linear_system(gates, n)
        A = lin["A"].toarray()
        sv = np.linalg.svd(A, compute_uv=False)
        x = np.linalg.solve(A, lin["b"])
        Mo = lin["M"].toarray()
        q = x @ Mo @ x / (x @ x) / np.linalg.norm(Mo, 2)
        if sv[0] / sv[-1] > 4 * T:
            problems.append(f"c{c}: kappa {sv[0] / sv[-1]:.2f} > {4 * T}")
        if abs(q - expected_q) > 1e-6:
            problems.append(f"c{c}: quadratic form {q:.8f} vs {expected_q:.8f}")

        svm = apps.embed_circuit_to_svm(gates, n)
        wv = spla.spsolve(svm["X"].tocsc(), svm["y"])
        v = svm["x"] @ wv
        z = svm["z_expectation"]
        if abs(z) > 1e-9 and np.sign(v) != np.sign(z):
            problems.append(f"c{c}: svm sign")

        pca = apps.embed_circuit_to_pca(gates, n)
        X = pca["X"]
        _, V = np.linalg.eigh(X.T @ X)
        w = V[:, -1] * np.sign(V[:, -1] @ pca["g"])
        if abs(pca["g"] @ w - 1 / math.sqrt(T + 1)) > 1e-9:
            problems.append(f"c{c}: g.w {pca['g'] @ w:.10f}")
        if abs(pca["x"] @ w - pca["predicted_xi"]) > 1e-6:
            problems.append(f"c{c}: xi {pca['x'] @ w:.8f} vs {pca['predicted_xi']:.8f}")
    const_ok = abs(apps.QUADRATIC_FORM_CONSTANT - 0.11731) < 1e-5
    _record("10 embedding fixtures", not problems and const_ok,
            f"constant={apps.QUADRATIC_FORM_CONSTANT:.6f}, problems={problems[:3]}", t0, 60)


# --------------------------------------------------------------------------
# 11. end-to-end pipelines


def test_c11_end_to_end_pipelines():
    t0 = time.perf_counter()
    outs = [run_e2e(task, {}, 50) for task in ("linsys", "svm", "pca")]
    detail = ", ".join(f"{o['task']} {o['failures']}/50 (limit rate {o['limit']:.3f})" for o in outs)
    _record("11 end-to-end pipelines", all(o["ok"] for o in outs), detail, t0, 600)


# --------------------------------------------------------------------------
# 12. memory calculator


def test_c12_memory_calculator():
    t0 = time.perf_counter()

    def oracle(task, N, D, s):
        # independent re-derivation: register widths by brute-force doubling
        def width(x):
            w = 0
            while (1 << w) < x:
                w += 1
            return w
        if task == "lssvm":
            return 2 * width(N + 2 * D) + width(s + 1) + 4
        return 2 * width(N + D) + width(s) + 4

    spot = bench.memory_calc("lssvm", 1000, 1000, 7)
    grid_ok = all(bench.memory_calc(task, N, D, s) == oracle(task, N, D, s)
                  for task in ("lssvm", "pca") for N in (1, 7, 64, 1000, 4097)
                  for D in (1, 8, 1000) for s in (1, 2, 7, 8, 33))
    _record("12 memory calculator", spot == 31 and grid_ok and
            bench.memory_calc("pca", 1000, 1000, 8) == 29,
            f"lssvm(1000, 1000, 7)={spot}, grid agrees={grid_ok}", t0, 1)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
