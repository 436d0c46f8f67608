"""Sketch-built linear algebra: sparse oracles, block encodings, state sketching.

Register layout for the sparse index oracle is ``(i, k, l, o)`` with ``i`` and
``l`` on ``n`` qubits, the rank register ``k`` on ``m = ceil(log2 s_r)`` qubits
and a single work qubit ``o``.  Flattened index
``((i * S + k) * N + l) * 2 + o`` with ``S = 2**m``; ``k`` stores the
zero-based rank of the requested nonzero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import hadamard

from .datagen import DataStream, make_rng
from .qsvt import (
    PhaseSequence,
    build_linear_poly,
    poly_and_phases,
    qsvt_apply_states,
    qsvt_block_2x2,
    qsvt_lcu_unitary,
)
from .simcore import DenseUnitary, DiagonalUnitary, op_norm_diff, unitarity_deviation
from .sketch import OracleSketch, budget_iid, sin_block_2x2

__all__ = [
    "SparseMatrixSpec",
    "BlockEncoding",
    "KWiseFunctionSeed",
    "IRREDUCIBLE_POLYS",
    "gf_mul",
    "is_irreducible_gf2",
    "eval_kwise",
    "check_flattening",
    "flatten_vector",
    "counter_phases",
    "cumulative_counter_unitary",
    "expected_cumulative_counter",
    "sketch_cumulative_counter",
    "ElementOracle",
    "sketch_sparse_element_oracle",
    "IndexOracle",
    "build_sparse_index_oracle",
    "BlockBudget",
    "block_encoding_budget",
    "block_from_oracles",
    "assemble_block_encoding",
    "estimate_norm",
    "StateSketchResult",
    "sketch_state",
    "realify_vector",
    "realify_matrix",
]


# --------------------------------------------------------------------------
# sparse matrix container


def _log2_exact(x: int) -> int:
    n = int(round(math.log2(x))) if x > 0 else -1
    if n < 0 or 2**n != x:
        raise ValueError(f"{x} is not a power of two")
    return n


def _bits_for(count: int) -> int:
    return max(0, int(math.ceil(math.log2(count)))) if count > 1 else 0


@dataclass
class SparseMatrixSpec:
    """Coordinate-list sparse matrix padded to a power-of-two dimension.

    Padding only adds empty rows and columns, so a stream over the nonzero
    entries is unaffected.
    """

    N: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    s_r: int
    s_c: int
    b: int = 16

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.int64)
        self.cols = np.asarray(self.cols, dtype=np.int64)
        self.vals = np.asarray(self.vals, dtype=float)
        _log2_exact(self.N)
        if np.any(np.abs(self.vals) > 1.0 + 1e-12):
            raise ValueError("matrix entries must lie in [-1, 1]")
        if np.any(self.vals == 0):
            raise ValueError("coordinate list must hold nonzero entries only")
        if len(set(zip(self.rows.tolist(), self.cols.tolist()))) != self.rows.size:
            raise ValueError("duplicate coordinates")
        if self.row_counts().max(initial=0) > self.s_r or self.col_counts().max(initial=0) > self.s_c:
            raise ValueError("declared sparsity is smaller than the actual one")
        if np.linalg.norm(self.dense(), 2) > 1.0 + 1e-9:
            raise ValueError("operator norm exceeds 1")

    @classmethod
    def from_dense(cls, A, b: int = 16) -> "SparseMatrixSpec":
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("square matrix expected")
        N = 1 << _bits_for(A.shape[0]) if A.shape[0] > 1 else 2
        rows, cols = np.nonzero(A)
        nnz_r = np.bincount(rows, minlength=A.shape[0])
        nnz_c = np.bincount(cols, minlength=A.shape[0])
        return cls(N, rows, cols, A[rows, cols], max(1, int(nnz_r.max(initial=1))),
                   max(1, int(nnz_c.max(initial=1))), b)

    @property
    def n(self) -> int:
        return _log2_exact(self.N)

    @property
    def K(self) -> int:
        return int(self.rows.size)

    @property
    def s(self) -> int:
        return max(self.s_r, self.s_c)

    def dense(self) -> np.ndarray:
        A = np.zeros((self.N, self.N))
        A[self.rows, self.cols] = self.vals
        return A

    def row_counts(self) -> np.ndarray:
        return np.bincount(self.rows, minlength=self.N)

    def col_counts(self) -> np.ndarray:
        return np.bincount(self.cols, minlength=self.N)

    def transpose(self) -> "SparseMatrixSpec":
        return SparseMatrixSpec(self.N, self.cols, self.rows, self.vals, self.s_c, self.s_r, self.b)

    def row_index_table(self) -> list[list[int]]:
        """Sorted column indices of the nonzeros in every row."""
        table = [[] for _ in range(self.N)]
        for i, j in sorted(zip(self.rows.tolist(), self.cols.tolist())):
            table[i].append(j)
        return table

    def counter_table(self) -> np.ndarray:
        """``C[i, l]`` = number of nonzeros in row ``i`` with column below ``l``."""
        occ = np.zeros((self.N, self.N + 1), dtype=np.int64)
        np.add.at(occ, (self.rows, self.cols + 1), 1)
        return np.cumsum(occ, axis=1)[:, : self.N]

    def codes(self) -> np.ndarray:
        """Two's-complement ``b``-bit codes; ``+1`` saturates to the largest code."""
        scale = 2 ** (self.b - 1)
        c = np.clip(np.round(self.vals * scale), -scale, scale - 1).astype(np.int64)
        return np.mod(c, 2**self.b)

    def quantized(self) -> "SparseMatrixSpec":
        """Copy whose values are exactly representable in ``b`` bits."""
        scale = 2 ** (self.b - 1)
        c = self.codes()
        v = np.where(c >= scale, c - 2**self.b, c) / scale
        keep = v != 0
        return SparseMatrixSpec(self.N, self.rows[keep], self.cols[keep], v[keep], self.s_r, self.s_c, self.b)

    def is_regular(self) -> bool:
        rc, cc = self.row_counts(), self.col_counts()
        return bool(np.all(rc == self.s) and np.all(cc == self.s))


# --------------------------------------------------------------------------
# k-wise independent functions over GF(2^n)

# Low-weight irreducible polynomials, bit l holding the coefficient of x^l.
IRREDUCIBLE_POLYS: dict[int, int] = {
    1: 0b11,
    2: 0b111,
    3: 0b1011,
    4: 0b10011,
    5: 0b100101,
    6: 0b1000011,
    7: 0b10000011,
    8: 0b100011011,
    9: (1 << 9) | (1 << 4) | 1,
    10: (1 << 10) | (1 << 3) | 1,
    11: (1 << 11) | (1 << 2) | 1,
    12: (1 << 12) | (1 << 3) | 1,
    13: (1 << 13) | (1 << 4) | (1 << 3) | (1 << 1) | 1,
    14: (1 << 14) | (1 << 5) | 1,
    15: (1 << 15) | (1 << 1) | 1,
    16: (1 << 16) | (1 << 5) | (1 << 3) | (1 << 1) | 1,
    17: (1 << 17) | (1 << 3) | 1,
    18: (1 << 18) | (1 << 7) | 1,
    19: (1 << 19) | (1 << 5) | (1 << 2) | (1 << 1) | 1,
    20: (1 << 20) | (1 << 3) | 1,
    21: (1 << 21) | (1 << 2) | 1,
    22: (1 << 22) | (1 << 1) | 1,
    23: (1 << 23) | (1 << 5) | 1,
    24: (1 << 24) | (1 << 4) | (1 << 3) | (1 << 1) | 1,
    25: (1 << 25) | (1 << 3) | 1,
    26: (1 << 26) | (1 << 4) | (1 << 3) | (1 << 1) | 1,
    27: (1 << 27) | (1 << 5) | (1 << 2) | (1 << 1) | 1,
    28: (1 << 28) | (1 << 3) | 1,
    29: (1 << 29) | (1 << 2) | 1,
    30: (1 << 30) | (1 << 6) | (1 << 4) | (1 << 1) | 1,
    31: (1 << 31) | (1 << 3) | 1,
    32: (1 << 32) | (1 << 7) | (1 << 3) | (1 << 2) | 1,
}


def _pmod(a: int, m: int) -> int:
    dm = m.bit_length()
    while a.bit_length() >= dm:
        a ^= m << (a.bit_length() - dm)
    return a


def _pmulmod(a: int, b: int, m: int) -> int:
    out = 0
    while b:
        if b & 1:
            out ^= a
        b >>= 1
        a <<= 1
    return _pmod(out, m)


def _pgcd(a: int, b: int) -> int:
    while b:
        a, b = b, _pmod(a, b)
    return a


def is_irreducible_gf2(poly: int) -> bool:
    """Rabin test for a polynomial over GF(2) given as a bit mask."""
    n = poly.bit_length() - 1
    if n < 1:
        return False
    primes = [q for q in range(2, n + 1) if n % q == 0 and all(q % r for r in range(2, q))]

    def x_pow_2k(k):
        r = 0b10
        for _ in range(k):
            r = _pmulmod(r, r, poly)
        return r

    if x_pow_2k(n) != _pmod(0b10, poly):
        return False
    return all(_pgcd(poly, x_pow_2k(n // q) ^ 0b10) == 1 for q in primes)


def gf_mul(a, b, n: int):
    """Vectorized multiplication in GF(2^n)."""
    poly = IRREDUCIBLE_POLYS[n]
    a = np.asarray(a, dtype=np.uint64).copy()
    b = np.asarray(b, dtype=np.uint64).copy()
    a, b = np.broadcast_arrays(a, b)
    a, b = a.copy(), b.copy()
    out = np.zeros(a.shape, dtype=np.uint64)
    top = np.uint64(1 << (n - 1))
    red = np.uint64(poly ^ (1 << n))
    one = np.uint64(1)
    for _ in range(n):
        out ^= np.where(b & one, a, np.uint64(0))
        b >>= one
        carry = (a & top) != 0
        a = (a << one) & np.uint64((1 << n) - 1)
        a ^= np.where(carry, red, np.uint64(0))
    return out


@dataclass(frozen=True)
class KWiseFunctionSeed:
    """Seed of ``h(x)`` = lowest bit of ``sum_l c_l x^l`` over GF(2^n), ``2k`` coefficients."""

    n: int
    k: int
    coeffs: tuple

    def __post_init__(self):
        if self.n not in IRREDUCIBLE_POLYS:
            raise ValueError("field size supported for 1 <= n <= 32")
        if len(self.coeffs) != 2 * self.k:
            raise ValueError("need 2k coefficients")
        if any(not 0 <= int(c) < 2**self.n for c in self.coeffs):
            raise ValueError("coefficient outside GF(2^n)")

    @classmethod
    def random(cls, n: int, k: int, seed: int) -> "KWiseFunctionSeed":
        rng = make_rng(seed, 31)
        return cls(n, k, tuple(int(c) for c in rng.integers(0, 2**n, 2 * k)))

    @classmethod
    def zero(cls, n: int, k: int = 1) -> "KWiseFunctionSeed":
        return cls(n, k, (0,) * (2 * k))


def eval_kwise(seed: KWiseFunctionSeed, x) -> np.ndarray:
    """Bits ``h(x)`` for field elements ``x`` (Horner evaluation)."""
    x = np.asarray(x, dtype=np.uint64)
    acc = np.zeros(x.shape, dtype=np.uint64)
    for c in reversed(seed.coeffs):
        acc = gf_mul(acc, x, seed.n) ^ np.uint64(c)
    return (acc & np.uint64(1)).astype(np.int64)


def _walsh(N: int) -> np.ndarray:
    return hadamard(N).astype(float)


def flatten_vector(b, seed: KWiseFunctionSeed | None, h_override=None) -> np.ndarray:
    """``b' = H^n O_h b`` with ``O_h = diag((-1)^h)``."""
    b = np.asarray(b, dtype=float)
    N = b.size
    n = _log2_exact(N)
    if h_override is not None:
        h = np.asarray(h_override, dtype=np.int64)
    else:
        h = eval_kwise(seed, np.arange(N))
    if seed is not None and seed.n != n:
        raise ValueError("seed field size must match the vector length")
    return _walsh(N) @ (np.where(h == 1, -1.0, 1.0) * b) / math.sqrt(N)


def check_flattening(b, seed: KWiseFunctionSeed, delta: float) -> bool:
    """Does ``||b'||_inf <= ||b||_2 sqrt(2 log2(N/delta) / N)`` hold for this seed."""
    b = np.asarray(b, dtype=float)
    N = b.size
    bp = flatten_vector(b, seed)
    bound = np.linalg.norm(b) * math.sqrt(2 * math.log2(N / delta) / N)
    return bool(np.max(np.abs(bp)) <= bound + 1e-12)


# --------------------------------------------------------------------------
# cumulative counter


def _rank_bits(spec: SparseMatrixSpec) -> int:
    return _bits_for(spec.s_r)


def counter_phases(spec: SparseMatrixSpec) -> np.ndarray:
    """``theta[i, k, l] = pi / (2 s_r + 1) * (C(i, l) - k - 1/2)`` for stored rank ``k``."""
    S = 2 ** _rank_bits(spec)
    C = spec.counter_table().astype(float)
    kappa = np.arange(S, dtype=float)
    return math.pi / (2 * spec.s_r + 1) * (C[:, None, :] - kappa[None, :, None] - 0.5)


def _counter_t(spec: SparseMatrixSpec) -> float:
    return math.pi * spec.K / (2 * spec.s_r + 1)


def _counter_offset(spec: SparseMatrixSpec) -> np.ndarray:
    S = 2 ** _rank_bits(spec)
    off = -math.pi / (2 * spec.s_r + 1) * (np.arange(S) + 0.5)
    return np.broadcast_to(off[None, :, None], (spec.N, S, spec.N))


def cumulative_counter_unitary(spec: SparseMatrixSpec) -> DiagonalUnitary:
    """Exact diagonal counter over ``(i, k, l)``."""
    th = counter_phases(spec)
    return DiagonalUnitary(2 * spec.n + _rank_bits(spec), th.reshape(-1))


def expected_cumulative_counter(spec: SparseMatrixSpec, M: int) -> np.ndarray:
    """Closed-form expectation of the counter sketch with ``M`` IID uniform samples."""
    q = spec.counter_table() / spec.K
    t = _counter_t(spec)
    step = np.exp(1j * t / M) - 1.0
    base = np.exp(M * np.log1p(q * step))
    return np.exp(1j * _counter_offset(spec)) * base[:, None, :]


def sketch_cumulative_counter(stream: DataStream, spec: SparseMatrixSpec, M: int,
                              mode: str = "sampled") -> OracleSketch:
    """Counter sketch: every sample ``(i, j)`` adds ``t/M`` on ``(i, *, l)`` for ``l > j``."""
    t = _counter_t(spec)
    nq = 2 * spec.n + _rank_bits(spec)
    if mode == "expected":
        return OracleSketch(expected_cumulative_counter(spec, M).reshape(-1), 0, t, "expected")
    if mode != "sampled":
        raise ValueError("mode must be 'sampled' or 'expected'")
    batch = stream.take(M)
    occ = np.zeros((spec.N, spec.N + 1))
    np.add.at(occ, (batch["i"], batch["j"] + 1), 1.0)
    cum = np.cumsum(occ, axis=1)[:, : spec.N]
    ph = _counter_offset(spec) + (t / M) * cum[:, None, :]
    return OracleSketch(DiagonalUnitary(nq, ph.reshape(-1)), M, t, "sampled")


# --------------------------------------------------------------------------
# element oracle


@dataclass
class ElementOracle:
    """XOR element oracle, one ``2x2`` operator per value bit and matrix position.

    ``bit_ops[i, j, a]`` acts on bit ``a`` (least significant first) of the
    value register.  Exact mode holds ``X^{bit}``.
    """

    spec: SparseMatrixSpec
    bit_ops: np.ndarray
    mode: str
    samples: int = 0

    def exact_bit_ops(self) -> np.ndarray:
        return _element_bit_ops(self.spec, None)

    def gap(self) -> float:
        """Operator-norm distance to the truth-table oracle (per-bit sum bound is attained on tensor factors)."""
        ref = self.exact_bit_ops()
        diff = np.linalg.norm(self.bit_ops - ref, ord=2, axis=(-2, -1))
        return float(np.max(diff.sum(axis=-1)))

    def truth_table(self) -> np.ndarray:
        """Dense action on ``|i, j, c>``; only for small ``N`` and ``b``."""
        N, b = self.spec.N, self.spec.b
        if N * N * 2**b > 2**14:
            raise ValueError("truth table too large")
        out = np.zeros((N * N, 2**b, 2**b), dtype=complex)
        for i in range(N):
            for j in range(N):
                op = np.ones((1, 1), dtype=complex)
                for a in reversed(range(b)):
                    op = np.kron(op, self.bit_ops[i, j, a])
                out[i * N + j] = op
        return out

    def amplitude_matrix(self) -> np.ndarray:
        """``E[i, j] = <0| O^dag a(c) O |0>`` on the value register, linear in the bits."""
        b = self.spec.b
        f0 = self.bit_ops[..., 0, 0]
        f1 = self.bit_ops[..., 1, 0]
        # the uncompute query is an independent sketch of the adjoint, expectation conj
        p0 = np.conj(f0) * f0
        p1 = np.conj(f1) * f1
        weight = np.array([2.0**a / 2 ** (b - 1) for a in range(b - 1)] + [-1.0])
        tot = p0 + p1
        full = np.prod(tot, axis=-1)
        out = np.zeros(full.shape, dtype=complex)
        for a in range(b):
            others = np.prod(np.delete(tot, a, axis=-1), axis=-1)
            out += weight[a] * p1[..., a] * others
        return out


def _element_bit_ops(spec: SparseMatrixSpec, u_bits: np.ndarray | None) -> np.ndarray:
    N, b = spec.N, spec.b
    codes = spec.codes()
    bits = (codes[:, None] >> np.arange(b)[None, :]) & 1
    if u_bits is None:
        u = np.ones((N, N, b), dtype=complex)
        u[spec.rows, spec.cols] = np.where(bits == 1, -1.0, 1.0)
    else:
        u = u_bits
    ops = np.empty((N, N, b, 2, 2), dtype=complex)
    ops[..., 0, 0] = ops[..., 1, 1] = 0.5 * (1 + u)
    ops[..., 0, 1] = ops[..., 1, 0] = 0.5 * (1 - u)
    return ops


def sketch_sparse_element_oracle(spec: SparseMatrixSpec, mode: str = "exact", M: int | None = None,
                                 stream: DataStream | None = None) -> ElementOracle:
    """Element oracle from ``b`` phase oracles with ``t = pi K``, converted by Hadamards.

    ``mode``: ``exact`` (truth table), ``expected`` (closed form with ``M``
    samples per bit oracle) or ``sampled`` (one sketch per bit from
    ``stream``).
    """
    if not np.allclose(spec.quantized().dense(), spec.dense(), atol=0, rtol=0):
        raise ValueError("values must be exactly representable in b bits")
    if mode == "exact":
        return ElementOracle(spec, _element_bit_ops(spec, None), mode)
    if M is None or M < 1:
        raise ValueError("sample count required")
    N, b, K = spec.N, spec.b, spec.K
    codes = spec.codes()
    bits = (codes[:, None] >> np.arange(b)[None, :]) & 1
    u = np.ones((N, N, b), dtype=complex)
    if mode == "expected":
        one = np.exp(M * np.log1p((np.exp(1j * math.pi * K / M) - 1.0) / K))
        u[spec.rows, spec.cols] = np.where(bits == 1, one, 1.0)
        return ElementOracle(spec, _element_bit_ops(spec, u), mode, b * M)
    if mode != "sampled" or stream is None:
        raise ValueError("sampled mode needs a stream")
    pos = {(int(i), int(j)): z for z, (i, j) in enumerate(zip(spec.rows, spec.cols))}
    for a in range(b):
        batch = stream.take(M)
        hits = np.zeros((N, N))
        for i, j in zip(batch["i"], batch["j"]):
            hits[i, j] += bits[pos[(int(i), int(j))], a]
        u[..., a] = np.exp(1j * math.pi * K / M * hits)
    return ElementOracle(spec, _element_bit_ops(spec, u), mode, b * M)


# --------------------------------------------------------------------------
# index oracle


class IndexOracle:
    """Row index oracle ``|i, k, 0, 0> -> |i, 0, j(i, k), 0>`` built from counter comparisons.

    In ``exact`` mode the comparison is an XOR of the threshold bit and the
    whole circuit is a permutation.  ``spectral`` and ``expected`` modes
    replace the comparison by the projected block ``v`` of the sign QSVT
    on the counter's sin block, mixing ``o`` as
    ``[[1+v, 1-v], [1-v, 1+v]] / 2``.
    """

    def __init__(self, spec: SparseMatrixSpec, v: np.ndarray | None, mode: str, meta=None):
        self.spec = spec
        self.mode = mode
        self.n = spec.n
        self.m = _rank_bits(spec)
        self.S = 2**self.m
        self.N = spec.N
        self.dim = self.N * self.S * self.N * 2
        self.v = v
        self.meta = meta or {}
        idx = np.arange(self.dim)
        self._o = idx & 1
        self._l = (idx >> 1) % self.N
        self._k = (idx >> 1) // self.N % self.S
        self._i = (idx >> 1) // (self.N * self.S)
        self._gates = self._circuit()

    @property
    def n_qubits(self) -> int:
        return 2 * self.n + self.m + 1

    def _enc(self, i, k, l, o):
        return ((i * self.S + k) * self.N + l) * 2 + o

    def _x_l(self, t):
        mask = 1 << (self.n - 1 - t)
        return ("perm", self._enc(self._i, self._k, self._l ^ mask, self._o))

    def _x_k(self, mask):
        return ("perm", self._enc(self._i, self._k ^ mask, self._l, self._o))

    def _x_o(self):
        return ("perm", self._enc(self._i, self._k, self._l, self._o ^ 1))

    def _swap_l(self, t):
        sh = self.n - 1 - t
        bit = (self._l >> sh) & 1
        l2 = (self._l & ~(1 << sh)) | (self._o << sh)
        return ("perm", self._enc(self._i, self._k, l2, bit))

    def _swap_k(self, t):
        sh = self.m - 1 - t
        bit = (self._k >> sh) & 1
        k2 = (self._k & ~(1 << sh)) | (self._o << sh)
        return ("perm", self._enc(self._i, k2, self._l, bit))

    def _compare(self):
        return ("cmp", None)

    def _circuit(self):
        gates = []
        for t in range(self.n):
            gates += [self._x_l(t), self._compare(), self._x_l(t), self._swap_l(t)]
        forward = []
        for t in range(self.m):
            low = (1 << (self.m - 1 - t)) - 1
            seq = [self._compare(), self._x_o(), self._swap_k(t)]
            if low:
                seq = [self._x_k(low), self._compare(), self._x_k(low), self._x_o(), self._swap_k(t)]
            forward += seq
        # erasure: the rank-computing circuit run backwards (all gates self-inverse)
        gates += forward[::-1]
        return gates

    def _v_flat(self):
        return np.repeat(self.v.reshape(-1), 2)

    def apply(self, states: np.ndarray) -> np.ndarray:
        """Apply to columns of ``states`` (shape ``(dim,)`` or ``(dim, batch)``)."""
        st = np.asarray(states, dtype=complex)
        vec = st.ndim == 1
        if vec:
            st = st[:, None]
        if self.mode == "exact":
            st = st[self.permutation()]
        else:
            vf = self._v_flat()[:, None]
            a, b = 0.5 * (1 + vf), 0.5 * (1 - vf)
            partner = self._enc(self._i, self._k, self._l, self._o ^ 1)
            for kind, perm in self._gates:
                if kind == "perm":
                    st = st[perm]
                else:
                    st = a * st + b * st[partner]
        return st[:, 0] if vec else st

    def permutation(self) -> np.ndarray:
        """Exact-mode source map: ``out[x] = in[perm[x]]``."""
        if self.mode != "exact":
            raise ValueError("only exact mode is a permutation")
        g = self._threshold_bits()
        cmp = self._enc(self._i, self._k, self._l, self._o ^ g)
        perm = np.arange(self.dim)
        for kind, p in self._gates:
            perm = perm[p] if kind == "perm" else perm[cmp]
        return perm

    def _threshold_bits(self) -> np.ndarray:
        C = self.spec.counter_table()
        g = (C[:, None, :] <= np.arange(self.S)[None, :, None]).astype(np.int64)
        return np.repeat(g.reshape(-1), 2)

    def valid_inputs(self) -> list[tuple[int, int]]:
        counts = self.spec.row_counts()
        return [(i, k) for i in range(self.N) for k in range(int(counts[i]))]

    def input_states(self, pairs) -> np.ndarray:
        cols = np.zeros((self.dim, len(pairs)), dtype=complex)
        for c, (i, k) in enumerate(pairs):
            cols[self._enc(i, k, 0, 0), c] = 1.0
        return cols

    def unitarity_deviation(self) -> float:
        if self.mode == "exact":
            perm = self.permutation()
            return 0.0 if np.array_equal(np.sort(perm), np.arange(self.dim)) else 1.0
        if self.dim > 4096:
            raise ValueError("dense unitarity check too large")
        return unitarity_deviation(self.apply(np.eye(self.dim, dtype=complex)))


def _sign_sequence(spec: SparseMatrixSpec, eps_sign: float, cap: int):
    lam = math.sin(math.pi / (4 * spec.s_r + 2))
    return poly_and_phases("sign", lam, float(eps_sign), cap)


def build_sparse_index_oracle(spec: SparseMatrixSpec, mode: str = "exact", M: int | None = None,
                              eps_sign: float = 1e-6, cap: int = 800, orientation: str = "row",
                              sign_seq: tuple | None = None) -> IndexOracle:
    """Row (or column) index oracle.

    ``mode``: ``exact`` uses the counter threshold directly, ``spectral``
    applies the sign polynomial to ``sin(theta)`` of the exact counter,
    ``expected`` runs the sign QSVT over the expected counter sketch with
    ``M`` samples per counter query.  The column oracle is the row oracle
    of the transposed matrix.
    """
    if orientation == "col":
        spec = spec.transpose()
    elif orientation != "row":
        raise ValueError("orientation must be 'row' or 'col'")
    if mode == "exact":
        return IndexOracle(spec, None, mode)
    poly, seq = sign_seq if sign_seq is not None else _sign_sequence(spec, eps_sign, cap)
    if mode == "spectral":
        v = np.real(poly(np.sin(counter_phases(spec))))
    elif mode == "expected":
        if M is None:
            raise ValueError("expected mode needs M")
        u = expected_cumulative_counter(spec, M).reshape(-1)
        W = sin_block_2x2(u, np.conj(u))
        v = qsvt_block_2x2(W, seq).reshape(spec.N, -1, spec.N)
    else:
        raise ValueError("mode must be exact, spectral or expected")
    return IndexOracle(spec, v, mode, {"sign_degree": poly.degree, "M": M})


# --------------------------------------------------------------------------
# block encodings


@dataclass
class BlockEncoding:
    """Unitary whose top-left block (ancillas in ``|0>``) times ``alpha`` approximates ``A``.

    Ancillas are the most significant qubits, so the block is
    ``unitary[:N, :N]``.
    """

    unitary: DenseUnitary
    ancilla_count: int
    alpha: float
    eps_cert: float
    meta: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.unitary.dim >> self.ancilla_count

    @property
    def block(self) -> np.ndarray:
        return self.alpha * self.unitary.entries[: self.N, : self.N]

    @property
    def proj_mask(self) -> np.ndarray:
        mask = np.zeros(self.unitary.dim, dtype=bool)
        mask[: self.N] = True
        return mask

    def error(self, A) -> float:
        return op_norm_diff(self.block, np.asarray(A))

    def save(self, path) -> None:
        """Write an ``.npz`` bundle: float64 real/imag parts, ancilla count, alpha, eps_cert."""
        u = self.unitary.entries
        np.savez(path, real=u.real.astype(np.float64), imag=u.imag.astype(np.float64),
                 a=self.ancilla_count, alpha=self.alpha, eps_cert=self.eps_cert)

    @classmethod
    def load(cls, path) -> "BlockEncoding":
        with np.load(path) as z:
            u = z["real"] + 1j * z["imag"]
            return cls(DenseUnitary(u, check=False), int(z["a"]), float(z["alpha"]), float(z["eps_cert"]))


def _dilation(B: np.ndarray) -> np.ndarray:
    """Minimal unitary dilation of a contraction."""
    from scipy.linalg import sqrtm

    I = np.eye(B.shape[0])
    top = sqrtm(I - B @ B.conj().T)
    bot = sqrtm(I - B.conj().T @ B)
    return np.block([[B, top], [bot, -B.conj().T]])


def block_from_oracles(elem: ElementOracle, ind_row: IndexOracle, ind_col: IndexOracle) -> np.ndarray:
    """``<psi_L(i)| E |psi_R(j)>``: one query to each index oracle, the element oracle and its adjoint."""
    spec = elem.spec
    N, s = spec.N, spec.s
    if not spec.is_regular() or 2 ** _bits_for(s) != s:
        raise ValueError("assembly needs exactly s nonzeros per row and column with s a power of two")
    S = 2 ** ind_row.m

    def prepared(oracle):
        pairs = [(x, k) for x in range(N) for k in range(S)]
        out = oracle.apply(oracle.input_states(pairs))
        out = out.reshape(N, S, N, 2, N, S).sum(axis=-1) / math.sqrt(s)
        return out  # (p, k', l, o, input)

    row = prepared(ind_row)
    col = prepared(ind_col)
    psi_l = row  # S register = p = i, R register = l
    psi_r = np.transpose(col, (2, 1, 0, 3, 4))  # swap p and l: S = c(j), R = j
    E = elem.amplitude_matrix()
    return np.einsum("xkyoi,xy,xkyoj->ij", np.conj(psi_l), E, psi_r)


@dataclass(frozen=True)
class BlockBudget:
    """Error split and sample counts for a sketched block encoding."""

    eps: float
    eps_poly: float
    eps_block: float
    eps_sign: float
    counter_M: int
    element_M: int
    counter_queries: int
    element_queries: int
    linear_degree: int
    sign_degree: int

    @property
    def total_samples(self) -> int:
        return self.counter_queries * self.counter_M + self.element_queries * self.element_M


def block_encoding_budget(spec: SparseMatrixSpec, eps: float, x_margin: float = 0.52,
                          cap: int = 800) -> tuple[BlockBudget, object, tuple]:
    """Per-query sample counts so that the expected block ends within ``eps``.

    Half of ``eps`` goes to the amplification polynomial; the rest is spread
    over its queries to the unamplified block, with index, element and sign
    errors sharing each block query.
    """
    s = spec.s
    lin = poly_and_phases("linear", s, eps / 2, x_margin / s, cap)[0] if s > 1 else build_linear_poly(1)
    d_lin = max(1, lin.degree)
    eps_block = eps / (2 * d_lin)
    eps_ind = eps_block / 4
    eps_ele = eps_block / 2
    steps = spec.n + _rank_bits(spec)
    eps_sign = eps_ind / (2 * steps)
    poly, seq = _sign_sequence(spec, eps_sign, cap)
    q_counter = 2 * steps * 2 * poly.degree  # two index oracles, two counter queries per sin block
    eps_c = eps_ind / (2 * steps * 2 * poly.degree)
    counter_M = budget_iid(min(1.0, spec.s_r / spec.K), _counter_t(spec), eps_c)
    element_M = budget_iid(1.0 / spec.K, math.pi * spec.K, eps_ele / (2 * spec.b))
    budget = BlockBudget(eps, eps / 2, eps_block, eps_sign, counter_M, element_M,
                         d_lin * q_counter, d_lin * 2 * spec.b, lin.degree, poly.degree)
    return budget, lin, (poly, seq)


def assemble_block_encoding(spec: SparseMatrixSpec, eps: float = 1e-7, mode: str = "exact",
                            x_margin: float = 0.52, cap: int = 800,
                            counter_M: int | None = None, element_M: int | None = None) -> BlockEncoding:
    """Block encoding of ``A`` with ``alpha = 1`` after linear amplification by ``s``.

    The unamplified block ``A/s`` is embedded in its minimal unitary dilation
    and amplified by QSVT with the odd polynomial ``s x``; the real part is
    taken with one extra LCU qubit.  Requires ``||A|| <= x_margin``.
    """
    spec = spec.quantized()
    if np.linalg.norm(spec.dense(), 2) > x_margin:
        raise ValueError("operator norm must not exceed the amplification window")
    budget, lin, sign = block_encoding_budget(spec, eps, x_margin, cap)
    cM = counter_M or budget.counter_M
    eM = element_M or budget.element_M
    if mode == "exact":
        elem = sketch_sparse_element_oracle(spec, "exact")
        row = build_sparse_index_oracle(spec, "exact")
        col = build_sparse_index_oracle(spec, "exact", orientation="col")
    elif mode == "expected":
        elem = sketch_sparse_element_oracle(spec, "expected", eM)
        row = build_sparse_index_oracle(spec, "expected", cM, sign_seq=sign)
        tsign = sign if spec.s_c == spec.s_r else None
        col = build_sparse_index_oracle(spec, "expected", cM, orientation="col", sign_seq=tsign,
                                        eps_sign=budget.eps_sign, cap=cap)
    else:
        raise ValueError("mode must be 'exact' or 'expected'")
    B = block_from_oracles(elem, row, col)
    D = _dilation(B)
    N = spec.N
    mask = np.zeros(2 * N, dtype=bool)
    mask[:N] = True
    if spec.s == 1:
        full = np.block([[D, np.zeros_like(D)], [np.zeros_like(D), D]])
    else:
        full = qsvt_lcu_unitary(D, mask, poly_and_phases("linear", spec.s, eps / 2, x_margin / spec.s, cap)[1])
    meta = {"budget": budget, "raw_block": B, "mode": mode,
            "samples": budget.total_samples if mode == "expected" else 0}
    return BlockEncoding(DenseUnitary(full, check=False), 2, 1.0, eps, meta)


# --------------------------------------------------------------------------
# realification


def realify_vector(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    return np.concatenate([v.real, v.imag], axis=0)


def realify_matrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    return np.block([[A.real, -A.imag], [A.imag, A.real]])


# --------------------------------------------------------------------------
# state sketching


def estimate_norm(stream: DataStream, N: int, M_prime: int) -> tuple[float, int]:
    """``B = (N / M') sum b_j^2`` over ``M'`` component samples."""
    batch = stream.take(M_prime)
    return float(N / M_prime * np.sum(np.asarray(batch["b"], float) ** 2)), M_prime


@dataclass
class StateSketchResult:
    """Output of :func:`sketch_state`.

    ``state`` is the system part with all ancillas in ``|0>`` (not
    renormalized); ``full_state`` includes the ancilla register (most
    significant) where it was simulated.
    """

    state: np.ndarray
    target: np.ndarray
    mode: str
    samples: int
    per_query_M: int
    queries: int
    B: float
    t: float
    norm_ok: bool
    flatten_ok: bool
    meta: dict = field(default_factory=dict)

    @property
    def error(self) -> float:
        return float(np.linalg.norm(self.state - self.target))

    @property
    def fidelity(self) -> float:
        tgt = self.target / np.linalg.norm(self.target)
        return float(abs(np.vdot(tgt, self.state)) ** 2)


def _zstring_expected(bh: np.ndarray, t: float, M: int) -> np.ndarray:
    """``phi_u(t/M)^M`` with ``phi_u(x) = mean_j exp(i x s_{ju} bh_j)``."""
    N = bh.size
    signs = _walsh(N)
    phi = np.mean(np.exp(1j * (t / M) * signs * bh[:, None]), axis=0)
    return np.exp(M * np.log(phi))


def _zstring_sampled(stream: DataStream, h: np.ndarray, N: int, t: float, M: int) -> np.ndarray:
    batch = stream.take(M)
    w = np.zeros(N)
    np.add.at(w, batch["k"], np.where(h[batch["k"]] == 1, -1.0, 1.0) * np.asarray(batch["b"], float))
    return np.exp(1j * (t / M) * (_walsh(N) @ w))


def _dense_w(u: np.ndarray, u_dag: np.ndarray) -> np.ndarray:
    W = sin_block_2x2(u, u_dag)
    N = u.size
    out = np.zeros((2 * N, 2 * N), dtype=complex)
    r = np.arange(N)
    for a in range(2):
        for b in range(2):
            out[a * N + r, b * N + r] = W[:, a, b]
    return out


def _prep_operator(u: np.ndarray, u_dag: np.ndarray, seq: PhaseSequence) -> np.ndarray:
    """Arcsin-QSVT state preparation on ``(lcu, w, system)`` acting after ``H^n``."""
    N = u.size
    Wd = _dense_w(u, u_dag)
    mask = np.zeros(2 * N, dtype=bool)
    mask[:N] = True
    L = qsvt_lcu_unitary(Wd, mask, seq)
    Hn = np.kron(np.eye(4), _walsh(N) / math.sqrt(N))
    return L @ Hn


def sketch_state(stream: DataStream, N: int, eps: float = 0.1, delta: float = 0.05,
                 mode: str = "full", exec_mode: str = "expected", M: int | None = None,
                 seed: int = 0, h_override=None, amplification: str = "fixed_point",
                 eps_arcsin: float | None = None, cap: int = 800, b_true=None) -> StateSketchResult:
    """Prepare ``|b>`` from component samples.

    Pipeline: norm estimate ``B`` from ``M' = 4N/delta_b`` samples, seeded
    flattening ``b' = H O_h b``, Z-string phase sketches with rotation
    ``t``, sin block, arcsin QSVT, then fixed-point amplitude amplification.
    ``delta`` is split evenly over norm estimation, flattening and the
    amplification step.

    ``mode='no_amplification'`` uses ``t = N/5`` and returns the ancilla-zero
    amplitude vector, whose ideal value is ``b / (5 arcsin 1)``.

    ``exec_mode``: ``expected`` (closed-form expected queries) or
    ``sampled`` (fresh sketches; only practical without amplification).
    ``amplification='projection'`` renormalizes the good branch instead of
    amplifying; it is not a physical operation and only serves oracle tests.
    """
    n = _log2_exact(N)
    if b_true is None:
        b_true = stream.meta.get("vector")
    delta_b = delta / 3
    k = max(1, int(math.floor(math.log2(N / delta_b))))
    hseed = KWiseFunctionSeed.random(n, k, seed)
    h = np.asarray(h_override, dtype=np.int64) if h_override is not None else eval_kwise(hseed, np.arange(N))
    signs_h = np.where(h == 1, -1.0, 1.0)
    back = np.diag(signs_h) @ _walsh(N) / math.sqrt(N)  # O_h H^n
    queries_used = 0

    if mode == "no_amplification":
        t = N / 5
        B = float("nan")
        norm_ok = True
        M_norm = 0
    elif mode == "full":
        M_norm = int(math.ceil(4 * N / delta_b))
        B, _ = estimate_norm(stream, N, M_norm)
        norm_ok = True
        if b_true is not None:
            nb2 = float(np.sum(np.asarray(b_true, float) ** 2))
            norm_ok = 0.5 * nb2 <= B <= 1.5 * nb2
        t = N / math.sqrt(4 * B * math.log2(N / delta_b))
    else:
        raise ValueError("mode must be 'full' or 'no_amplification'")

    flatten_ok = True
    if b_true is not None:
        bp = flatten_vector(np.asarray(b_true, float), None, h)
        flatten_ok = bool(np.max(np.abs(bp)) <= np.linalg.norm(b_true) * math.sqrt(2 * math.log2(N / delta_b) / N) + 1e-12)
        a_max = t * np.max(np.abs(bp)) / math.sqrt(N)
    else:
        a_max = 1.0

    if mode == "no_amplification":
        x_max = min(0.95, math.sin(min(a_max * 1.02 + 1e-3, 1.4)))
        poly, seq = poly_and_phases("arcsin", min(0.95, math.ceil(x_max * 100) / 100), eps_arcsin or 1e-9, cap)
    else:
        a_min = (2 / math.pi) / math.sqrt(6 * math.log2(N / delta_b))
        poly, seq = poly_and_phases("arcsin", math.sin(1.0), eps_arcsin or a_min * eps / 8, cap)
    d_as = poly.degree

    def queries(count):
        if exec_mode == "expected":
            u = _zstring_expected(signs_h * np.asarray(b_true, float), t, M)
            return [(u, np.conj(u))] * count
        return [(_zstring_sampled(stream, h, N, t, M), np.conj(_zstring_sampled(stream, h, N, t, M)))
                for _ in range(count)]

    if exec_mode == "expected" and b_true is None:
        raise ValueError("expected mode needs the vector (stream meta 'vector' or b_true)")

    if mode == "no_amplification":
        if M is None:
            raise ValueError("no-amplification mode needs M")
        if exec_mode == "expected":
            (u, ud), = queries(1)
            W = sin_block_2x2(u, ud)
        else:
            per = queries(d_as)
            W = np.stack([sin_block_2x2(u, ud) for u, ud in per])
        v = qsvt_block_2x2(W, seq)
        good = v / math.sqrt(N)
        state = back @ good
        target = np.asarray(b_true, float) / (5 * math.asin(1.0)) if b_true is not None else None
        queries_used = 2 * d_as
        return StateSketchResult(state, target, mode, queries_used * M, M, queries_used, B, t,
                                 norm_ok, flatten_ok, {"arcsin_degree": d_as, "h": h})

    # full mode: amplitude amplification between |0...0> and the ancilla-zero subspace
    a_min = (2 / math.pi) / math.sqrt(6 * math.log2(N / delta_b))
    aa_poly, aa_seq = poly_and_phases("sign", a_min, eps / 8, cap)
    d_aa = aa_poly.degree
    Q = max(1, d_aa) * 2 * d_as
    eps1 = eps / (8 * Q)
    M0 = M if M is not None else int(math.ceil(4 * t * t * B / (N * eps1)))
    M = M0
    dim = 4 * N
    e0 = np.zeros(dim, dtype=complex)
    e0[0] = 1.0
    if exec_mode != "expected":
        raise ValueError("sampled execution is only offered without amplification")
    (u, ud), = queries(1)
    ops = _prep_operator(u, ud, seq)
    good_mask = np.zeros(dim, dtype=bool)
    good_mask[:N] = True
    if amplification == "projection":
        out = ops @ e0
        g = out[:N]
        state = back @ (g / np.linalg.norm(g))
    elif amplification == "fixed_point":
        in_mask = np.zeros(dim, dtype=bool)
        in_mask[0] = True
        out = qsvt_apply_states(ops, good_mask, aa_seq, e0, real_part=True, proj_in=in_mask)
        state = back @ out[:N]
    else:
        raise ValueError("amplification must be 'fixed_point' or 'projection'")
    target = np.asarray(b_true, float) / np.linalg.norm(b_true)
    return StateSketchResult(state, target, mode, Q * M + M_norm, M, Q, B, t, norm_ok, flatten_ok,
                             {"arcsin_degree": d_as, "aa_degree": d_aa, "h": h, "M_norm": M_norm})
