"""End-to-end pipelines and circuit-embedding fixtures.

Fixtures turn an ``n``-qubit circuit into a linear system, an SVM training
set or a PCA data matrix whose answer encodes the circuit output; they give
exact dense oracles for testing.  The pipelines chain a sketched block
encoding, a QSVT polynomial (inverse or spectral filter), a sketched input
state and a sampled readout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .datagen import vector_stream
from .linalg import (
    SparseMatrixSpec,
    assemble_block_encoding,
    realify_matrix,
    realify_vector,
    sketch_state,
)
from .qsvt import build_filter_poly, build_inverse_poly, poly_and_phases, qsvt_apply_spectral, qsvt_apply_states
from .readout import interferometric_predict, interferometric_state
from .simcore import GATES, embed_gate, random_unitary

__all__ = [
    "LinearSystemTask",
    "ClassificationTask",
    "ReductionTask",
    "PipelineResult",
    "random_circuit",
    "circuit_state",
    "clock_unitary",
    "embed_circuit_to_linear_system",
    "embed_circuit_to_svm",
    "embed_circuit_to_pca",
    "QUADRATIC_FORM_CONSTANT",
    "MODES",
    "random_linear_system_task",
    "random_classification_task",
    "random_reduction_task",
    "estimate_quadratic_form",
    "classify",
    "reduce_dimension",
]

QUADRATIC_FORM_CONSTANT = math.exp(-2) / (1 + math.exp(-2) + math.exp(-4))


# --------------------------------------------------------------------------
# task containers


@dataclass
class LinearSystemTask:
    """Symmetric ``A`` with ``||A|| <= 1`` and certified condition number, right side ``b``."""

    A: np.ndarray
    b: np.ndarray
    observable: np.ndarray
    kappa: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.A = np.asarray(self.A)
        if not np.allclose(self.A, self.A.T, atol=1e-12):
            raise ValueError("A must be symmetric")
        sv = np.linalg.svd(self.A, compute_uv=False)
        if sv[0] > 1 + 1e-9:
            raise ValueError("||A|| must not exceed 1")
        if sv[0] / sv[-1] > self.kappa * (1 + 1e-9):
            raise ValueError("condition number certificate violated")

    def truth(self) -> float:
        x = np.linalg.solve(self.A, self.b)
        M = self.observable
        return float(x @ M @ x / (x @ x) / np.linalg.norm(M, 2))


@dataclass
class ClassificationTask:
    """Training set ``(X, y)``, ridge strength and unit test vectors with margin ``gamma_test``."""

    X: np.ndarray
    y: np.ndarray
    lam: float
    tests: np.ndarray
    gamma_test: float
    meta: dict = field(default_factory=dict)

    @property
    def kappa_reg(self) -> float:
        sv = np.linalg.svd(self.X, compute_uv=False)
        return float(math.sqrt((sv[0] ** 2 + self.lam) / (sv[-1] ** 2 + self.lam)))

    def weights(self) -> np.ndarray:
        D = self.X.shape[1]
        return np.linalg.solve(self.X.T @ self.X + self.lam * np.eye(D), self.X.T @ self.y)

    def truth(self) -> np.ndarray:
        return np.sign(self.tests @ self.weights())

    def margins(self) -> np.ndarray:
        w = self.weights()
        return np.abs(self.tests @ w) / np.linalg.norm(w)


@dataclass
class ReductionTask:
    """Data matrix with certified gap, unit guiding vector ``g`` and unit test vectors."""

    X: np.ndarray
    g: np.ndarray
    tests: np.ndarray
    lam_max: float
    lam_sec: float
    chi: float
    meta: dict = field(default_factory=dict)

    @property
    def gap(self) -> float:
        return self.lam_max - self.lam_sec

    def principal(self) -> np.ndarray:
        vals, vecs = np.linalg.eigh(self.X.T @ self.X)
        w = vecs[:, -1]
        return w if w @ self.g >= 0 else -w

    def truth(self) -> np.ndarray:
        return self.tests @ self.principal()


@dataclass
class PipelineResult:
    estimate: np.ndarray | float
    truth: np.ndarray | float
    ok: bool
    samples: int
    meta: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# circuit fixtures


def random_circuit(n: int, T: int, rng: np.random.Generator) -> list[np.ndarray]:
    """``T`` random gates on ``n`` qubits: two-qubit Haar gates on random pairs (one-qubit if ``n=1``)."""
    gates = []
    for _ in range(T):
        if n == 1:
            gates.append(random_unitary(2, rng))
        else:
            q = sorted(rng.choice(n, 2, replace=False).tolist())
            gates.append(embed_gate(random_unitary(4, rng), q, n))
    return gates


def circuit_state(gates: list[np.ndarray], n: int) -> np.ndarray:
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = 1.0
    for g in gates:
        psi = g @ psi
    return psi


def clock_unitary(gates: list[np.ndarray], n: int) -> sp.csr_matrix:
    """Cyclic clock walk over ``3T`` steps: circuit, idle, uncompute."""
    T = len(gates)
    if T < 1:
        raise ValueError("the circuit needs at least one gate")
    dim = 2**n
    seq = list(gates) + [np.eye(dim)] * T + [g.conj().T for g in reversed(gates)]
    U = sp.lil_matrix((3 * T * dim, 3 * T * dim), dtype=complex)
    for c, G in enumerate(seq):
        nxt = (c + 1) % (3 * T)
        U[nxt * dim:(nxt + 1) * dim, c * dim:(c + 1) * dim] = G
    return U.tocsr()


def _complex_system(gates, n):
    """``A_c``, ``b_c`` and ``M_c`` with register order ``(b, a, clock, system)``."""
    T = len(gates)
    dim = 2**n
    inner = 3 * T * dim
    U = clock_unitary(gates, n)
    I = sp.identity(inner, dtype=complex, format="csr")
    Bc = sp.block_diag([I, I - math.exp(-1.0 / T) * U], format="csr")
    P = sp.kron(GATES["x"].real, sp.identity(inner), format="csr")
    perm = np.arange(2 * inner)
    for c in range(T, 2 * T):  # clock values T+1..2T in one-based counting
        for chi in range(dim // 2):  # first circuit qubit (most significant) in |0>
            lo = c * dim + chi
            perm[lo], perm[inner + lo] = inner + lo, lo
    R = sp.csr_matrix((np.ones(2 * inner), (perm, np.arange(2 * inner))), shape=(2 * inner, 2 * inner))
    top = P.conj().T @ Bc @ R
    Ac = 0.5 * sp.bmat([[None, top], [top.conj().T, None]], format="csr")
    bc = np.zeros(4 * inner)
    bc[0] = 1.0
    Mc = sp.kron(sp.identity(2), sp.kron(sp.diags([1.0, 0.0]), sp.identity(inner)), format="csr")
    return Ac, bc, Mc


def _realify_sparse(A):
    A = sp.csr_matrix(A)
    return sp.bmat([[A.real, -A.imag], [A.imag, A.real]], format="csr")


def embed_circuit_to_linear_system(gates: list[np.ndarray], n: int) -> dict:
    """Real symmetric system of dimension ``24 T 2^n`` whose normalized quadratic form
    equals ``QUADRATIC_FORM_CONSTANT * ||<0_1|psi>||^2``.

    Returns sparse ``A``, ``b``, ``M`` plus the predicted value.
    """
    Ac, bc, Mc = _complex_system(gates, n)
    psi = circuit_state(gates, n)
    p0 = float(np.sum(np.abs(psi[: 2 ** (n - 1)]) ** 2))
    return {
        "A": _realify_sparse(Ac),
        "b": realify_vector(bc),
        "M": _realify_sparse(Mc),
        "T": len(gates),
        "predicted": QUADRATIC_FORM_CONSTANT * p0,
    }


def _svm_sequence(gates, n):
    H = GATES["h"]
    seq = [embed_gate(H, [q], n) for q in range(n)]
    seq += list(gates)
    seq.append(embed_gate(GATES["z"], [0], n))
    seq += [g.conj().T for g in reversed(gates)]
    return seq


def embed_circuit_to_svm(gates: list[np.ndarray], n: int) -> dict:
    """Square training set ``X`` (block-diagonal copies of the embedded system), labels ``y``
    and a 4-sparse test vector whose prediction sign equals ``sgn <psi|Z_1|psi>``.
    """
    seq = _svm_sequence(gates, n)
    Tp = len(seq)
    Ac, _, _ = _complex_system(seq, n)
    dim = 2**n
    inner = Ac.shape[0]
    Xc = sp.block_diag([Ac, Ac], format="csr")
    y1 = np.ones(inner)
    y2 = -np.ones(inner)
    y2[:dim] = 1.0  # b=0, a=0, clock 1, every system basis state
    yc = np.concatenate([y1, y2])
    x0 = np.zeros(inner)
    x0[(2 * 3 * Tp + Tp) * dim] = 1.0  # |1_b>|0_a>|T'+1>|0^n>
    xc = np.concatenate([x0, x0])
    psi = circuit_state(gates, n)
    z = float(np.sum(np.abs(psi[: dim // 2]) ** 2) - np.sum(np.abs(psi[dim // 2:]) ** 2))
    return {
        "X": _realify_sparse(Xc),
        "y": realify_vector(yc),
        "x": realify_vector(xc),
        "T_prime": Tp,
        "z_expectation": z,
        "C_bounds": (1 / (200 * Tp**1.5), 1 / (10 * math.sqrt(Tp))),
    }


def embed_circuit_to_pca(gates: list[np.ndarray], n: int) -> dict:
    """Data matrix ``X = I - H_circ / ||H_circ||`` with guiding and test vectors.

    The principal component is the history state, so ``g.w = 1/sqrt(T+1)`` and
    ``x.w = Re <0|U_T...U_1|0> / sqrt(T+1)``.
    """
    T = len(gates)
    d = 2 ** (n + 1)
    Rg = [realify_matrix(g) for g in gates]
    H = np.zeros(((T + 1) * d, (T + 1) * d))
    H[:d, :d] += np.eye(d)
    H[0, 0] -= 1.0
    for t in range(1, T + 1):
        a, b = (t - 1) * d, t * d
        H[a:a + d, a:a + d] += 0.5 * np.eye(d)
        H[b:b + d, b:b + d] += 0.5 * np.eye(d)
        H[b:b + d, a:a + d] -= 0.5 * Rg[t - 1]
        H[a:a + d, b:b + d] -= 0.5 * Rg[t - 1].T
    X = np.eye(H.shape[0]) - H / np.linalg.norm(H, 2)
    g = np.zeros(H.shape[0])
    g[0] = 1.0
    x = np.zeros(H.shape[0])
    x[T * d] = 1.0
    amp = circuit_state(gates, n)[0]
    return {
        "X": X,
        "g": g,
        "x": x,
        "T": T,
        "predicted_xi": float(np.real(amp)) / math.sqrt(T + 1),
        "predicted_overlap": 1 / math.sqrt(T + 1),
    }


# --------------------------------------------------------------------------
# random certified instances


def _regular_symmetric_pattern(N: int, s: int, rng) -> list[tuple[int, int]]:
    """Diagonal plus ``s-1`` edge-disjoint perfect matchings from a round-robin factorization."""
    perm = rng.permutation(N)
    rounds = []
    for r in range(N - 1):
        pairs = [(N - 1, r)] + [((r + k) % (N - 1), (r - k) % (N - 1)) for k in range(1, N // 2)]
        rounds.append(pairs)
    chosen = rng.choice(N - 1, s - 1, replace=False)
    coords = [(i, i) for i in range(N)]
    for r in chosen:
        for a, b in rounds[r]:
            coords += [(perm[a], perm[b]), (perm[b], perm[a])]
    return coords


def _quantize(A: np.ndarray, b: int = 16) -> np.ndarray:
    scale = 2 ** (b - 1)
    return np.round(A * scale) / scale


def random_linear_system_task(N: int = 8, s: int = 4, kappa: float = 4.0,
                              rng: np.random.Generator | None = None, norm: float = 0.5) -> LinearSystemTask:
    """Symmetric ``s``-regular instance with ``||A|| = norm`` and condition at most ``kappa``."""
    rng = rng or np.random.default_rng()
    coords = _regular_symmetric_pattern(N, s, rng)
    for _ in range(1000):
        A = np.zeros((N, N))
        for i, j in coords:
            if i <= j:
                A[i, j] = A[j, i] = rng.uniform(0.2, 1.0) * rng.choice([-1, 1])
        for i in range(N):
            A[i, i] = rng.uniform(1.0, 2.0) * rng.choice([-1, 1])
        A = _quantize(A / np.linalg.norm(A, 2) * norm)
        sv = np.linalg.svd(A, compute_uv=False)
        if sv[0] / sv[-1] <= kappa:
            break
    else:
        raise RuntimeError("no instance within the condition bound")
    b = rng.normal(size=N)
    b /= np.linalg.norm(b)
    M = np.diag(rng.choice([-1.0, 1.0], N))
    return LinearSystemTask(A, b, M, kappa, {"s": s})


def random_classification_task(D: int = 8, m_tests: int = 4, gamma_test: float = 0.3,
                               kappa: float = 4.0, rng: np.random.Generator | None = None,
                               norm: float = 0.5) -> ClassificationTask:
    """Square 2-regular ``X`` (diagonal plus a fixed-point-free permutation), ``lam = 0``."""
    rng = rng or np.random.default_rng()
    for _ in range(1000):
        perm = rng.permutation(D)
        while np.any(perm == np.arange(D)):
            perm = rng.permutation(D)
        X = np.diag(rng.uniform(1.0, 2.0, D) * rng.choice([-1, 1], D))
        X[np.arange(D), perm] = rng.uniform(0.2, 1.0, D) * rng.choice([-1, 1], D)
        X = _quantize(X / np.linalg.norm(X, 2) * norm)
        sv = np.linalg.svd(X, compute_uv=False)
        if sv[0] / sv[-1] <= kappa:
            break
    y = rng.choice([-1.0, 1.0], D)
    w = np.linalg.solve(X, y)
    w_hat = w / np.linalg.norm(w)
    tests = []
    while len(tests) < m_tests:
        x = rng.normal(size=D)
        x /= np.linalg.norm(x)
        if abs(x @ w_hat) >= gamma_test:
            tests.append(x)
    return ClassificationTask(X, y, 0.0, np.array(tests), gamma_test, {"kappa": kappa})


def random_reduction_task(N: int = 8, s: int = 4, m_tests: int = 4, rng: np.random.Generator | None = None,
                          norm: float = 0.5, ratio: float = 0.7, chi: float = 0.5) -> ReductionTask:
    """Symmetric ``s``-regular matrix with a dominant direction near a random basis vector.

    Certified: ``sigma_2 <= ratio * sigma_1`` and ``g.w >= chi`` with ``g`` that basis vector.
    """
    rng = rng or np.random.default_rng()
    coords = _regular_symmetric_pattern(N, s, rng)
    for _ in range(1000):
        A = np.zeros((N, N))
        for i, j in coords:
            if i < j:
                A[i, j] = A[j, i] = rng.uniform(0.1, 0.4) * rng.choice([-1, 1])
        A[np.arange(N), np.arange(N)] = rng.uniform(0.2, 1.0, N) * rng.choice([-1, 1], N)
        k = rng.integers(N)
        A[k, k] = 2.0 * rng.choice([-1, 1])
        A = _quantize(A / np.linalg.norm(A, 2) * norm)
        sv = np.sort(np.abs(np.linalg.eigvalsh(A)))[::-1]
        g = np.zeros(N)
        g[k] = 1.0
        task = ReductionTask(A, g, np.zeros((0, N)), sv[0] ** 2, sv[1] ** 2, chi, {"s": s})
        if sv[1] <= ratio * sv[0] and task.principal() @ g >= chi:
            break
    else:
        raise RuntimeError("no gapped instance found")
    tests = rng.normal(size=(m_tests, N))
    task.tests = tests / np.linalg.norm(tests, axis=1, keepdims=True)
    return task


# --------------------------------------------------------------------------
# pipelines


MODES = ("expected", "exact", "spectral")


def _prepare_input(vec: np.ndarray, eps_amp: float, delta: float, mode: str, seed: int) -> tuple[np.ndarray, int]:
    """Sketched state for ``vec / ||vec||`` in expected mode, the exact vector otherwise."""
    target = vec / np.linalg.norm(vec)
    if mode != "expected":
        return target.astype(complex), 0
    fid_eps = min(0.1, eps_amp**2)
    res = sketch_state(vector_stream(target, seed=seed), target.size, eps=fid_eps, delta=delta,
                       mode="full", seed=seed)
    return res.state, res.samples


def _kappa_grid(kappa: float) -> float:
    """Round up to a power of two so polynomial phases can be reused across instances."""
    return float(2 ** math.ceil(math.log2(max(kappa, 1.0))))


def _transform(Hm: np.ndarray, eps_be: float, kind: str, args: tuple, vec: np.ndarray,
               mode: str) -> tuple[np.ndarray, dict]:
    """``P(H) vec`` for symmetric ``H``.

    ``spectral`` evaluates the polynomial on the eigendecomposition;
    ``exact`` and ``expected`` run the QSVT circuit on a block encoding built
    from exact or sketched oracles.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if mode == "spectral":
        poly = _poly(kind, args, mode)
        return qsvt_apply_spectral(Hm, poly) @ vec, {"block_samples": 0, "degree": poly.degree, "poly": poly}
    spec = SparseMatrixSpec.from_dense(Hm)
    be = assemble_block_encoding(spec, eps_be, mode)
    poly, seq = poly_and_phases(kind, *args)
    state = np.zeros(be.unitary.dim, dtype=complex)
    state[: vec.size] = vec
    out = qsvt_apply_states(be.unitary.entries, be.proj_mask, seq, state, real_part=True)
    return out[: vec.size], {"block_samples": be.meta["samples"], "degree": poly.degree, "poly": poly}


def _poly(kind: str, args: tuple, mode: str):
    # spectral mode needs no phases, so skip the phase solve
    if mode == "spectral":
        return {"inverse": build_inverse_poly, "filter": build_filter_poly}[kind](*args)
    return poly_and_phases(kind, *args)[0]


def estimate_quadratic_form(task: LinearSystemTask, eps: float, delta: float, rng: np.random.Generator,
                            mode: str = "expected", seed: int = 0) -> PipelineResult:
    """Estimate ``x^T M x / (||x||^2 ||M||)`` for ``A x = b`` within ``eps`` with probability ``1 - delta``.

    Half of ``eps`` covers bias (polynomial, block encoding, input state);
    the other half is the shot-noise tolerance of the Hoeffding readout of
    the diagonal ``+-1`` observable on the post-selected output.
    ``meta['exact_value']`` is the noiseless readout of the prepared state.
    """
    M = task.observable
    if not np.allclose(M, np.diag(np.diag(M))) or not np.allclose(np.abs(np.diag(M)), 1):
        raise ValueError("readout expects a diagonal +-1 observable")
    sv = np.linalg.svd(task.A, compute_uv=False)
    kappa_eff = _kappa_grid(task.kappa / sv[0])
    bias = eps / 2
    eps_inv = bias / (8 * kappa_eff)
    eps_be = bias / (16 * kappa_eff)
    eps_in = bias / (8 * kappa_eff)
    psi, state_samples = _prepare_input(task.b, eps_in, delta / 2, mode, seed)
    x_tilde, info = _transform(task.A, eps_be, "inverse", (kappa_eff, eps_inv, 800), psi, mode)
    p_succ = float(np.linalg.norm(x_tilde) ** 2)
    xh = x_tilde / np.linalg.norm(x_tilde)
    p_plus = float(np.sum(np.abs(xh[np.diag(M) > 0]) ** 2))
    shots = int(math.ceil(2 * math.log(4 / delta) / (eps / 2) ** 2))
    hits = rng.binomial(shots, p_plus)
    estimate = 2 * hits / shots - 1
    # post-selection on the ancilla: failed attempts are repeated
    attempts = shots + int(rng.negative_binomial(shots, min(1.0, p_succ))) if p_succ > 0 else shots
    truth = task.truth()
    exact_value = float(np.real(np.vdot(xh, M @ xh)))
    meta = {"p_success": p_succ, "shots": shots, "attempts": attempts, "kappa_eff": kappa_eff,
            "exact_value": exact_value, "bias": abs(exact_value - truth), "inverse_degree": info["degree"]}
    samples = attempts * (info["block_samples"] + state_samples)
    return PipelineResult(estimate, truth, abs(estimate - truth) <= eps, samples, meta)


def _augmented(X: np.ndarray, lam: float) -> np.ndarray:
    """``(X; sqrt(lam) I)``, or ``X`` itself when ``lam = 0``."""
    if lam == 0:
        return X
    return np.vstack([X, math.sqrt(lam) * np.eye(X.shape[1])])


def classify(task: ClassificationTask, delta: float, rng: np.random.Generator, mode: str = "expected",
             seed: int = 0) -> PipelineResult:
    """Signs of ``x'_j . w`` by pseudo-inversion of the symmetric embedding ``[[0, Xa], [Xa^T, 0]]``.

    ``Xa`` is the augmented matrix ``(X; sqrt(lam) I)``, so the lower block
    of ``H^+ (y, 0)`` is the ridge solution.  The weight direction is read
    out with interferometric shadows to accuracy ``gamma_test / 3``; the
    remaining margin covers the bias.  Tests whose estimate falls below
    that accuracy are flagged in ``meta['low_confidence']``.
    """
    if task.gamma_test <= 0:
        raise ValueError("gamma_test must be positive")
    Xa = _augmented(np.asarray(task.X, float), task.lam)
    R, D = Xa.shape
    scale = max(1.0, np.linalg.norm(Xa, 2))
    Hm = np.block([[np.zeros((R, R)), Xa], [Xa.T, np.zeros((D, D))]]) / scale
    if mode != "spectral" and Hm.shape[0] & (Hm.shape[0] - 1):
        raise ValueError("block-encoded mode needs a power-of-two embedding; use mode='spectral'")
    sv = np.linalg.svd(Xa / scale, compute_uv=False)
    kappa_eff = _kappa_grid(1.0 / sv[-1])
    bias = task.gamma_test / 3
    eps_inv = bias / (8 * kappa_eff)
    eps_be = bias / (16 * kappa_eff)
    eps_in = bias / (8 * kappa_eff)
    if mode == "spectral":
        eps_inv = min(eps_inv, 1e-9)
    rhs = np.concatenate([task.y, np.zeros(R - task.y.size + D)])
    psi, state_samples = _prepare_input(rhs, eps_in, delta / 4, mode, seed)
    out, info = _transform(Hm, eps_be, "inverse", (kappa_eff, eps_inv, 1200), psi, mode)
    w_part = np.real(out[R:])
    w_hat = w_part / np.linalg.norm(w_part)
    est = interferometric_predict(interferometric_state(w_hat), task.tests, task.gamma_test / 3,
                                  delta / 2, rng)
    labels = np.sign(est)
    truth = task.truth()
    w_true = task.weights() / np.linalg.norm(task.weights())
    meta = {"estimates": est, "low_confidence": np.abs(est) < task.gamma_test / 3, "kappa_eff": kappa_eff,
            "w_hat": w_hat, "w_error": float(np.linalg.norm(w_hat - w_true))}
    return PipelineResult(labels, truth, bool(np.all(labels == truth)),
                          info["block_samples"] + state_samples, meta)


def reduce_dimension(task: ReductionTask, eps: float, delta: float, rng: np.random.Generator,
                     mode: str = "expected") -> PipelineResult:
    """1D representations ``x'_j . w`` via a QSVT spectral filter seeded by the guiding vector.

    The even filter is 0 below the second singular value and 1 above a point
    short of the first, so ``P(X) g`` is proportional to ``(g . w) w``.
    """
    X = np.asarray(task.X, float)
    if not np.allclose(X, X.T):
        raise ValueError("filter pipeline expects a symmetric data matrix")
    s1, s2 = math.sqrt(task.lam_max), math.sqrt(task.lam_sec)
    span = s1 - s2
    lo, hi = round(s2 + 0.2 * span, 3), round(s1 - 0.2 * span, 3)
    bias = eps / 2
    eps_f = task.chi * bias / 4
    if mode == "spectral":
        eps_f = min(eps_f, 1e-9)
    poly = _poly("filter", (lo, hi, eps_f, 800), mode)
    eps_be = task.chi * bias / (4 * max(1, poly.degree))
    out, info = _transform(X, eps_be, "filter", (lo, hi, eps_f, 800), task.g.astype(complex), mode)
    w_hat = np.real(out) / np.linalg.norm(out)
    est = interferometric_predict(interferometric_state(w_hat), task.tests, eps / 2, delta, rng)
    truth = task.truth()
    meta = {"p_success": float(np.linalg.norm(out) ** 2), "filter_degree": poly.degree, "w_hat": w_hat,
            "w_error": float(np.linalg.norm(w_hat - task.principal()))}
    return PipelineResult(est, truth, bool(np.all(np.abs(est - truth) <= eps)), info["block_samples"], meta)
