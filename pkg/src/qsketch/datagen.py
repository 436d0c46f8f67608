"""Seeded hierarchical data-generation processes and the streams built on them.

A process emits integer sample labels ``z`` in ``[0, n_outcomes)``.  Streams
decorate those labels with payloads (Boolean queries, matrix elements, vector
components, rows).  All randomness comes from Philox generators keyed by
``(seed, stream_id)`` so grid points never share state.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.io
import scipy.sparse as sp

__all__ = [
    "make_rng",
    "Level",
    "HierarchicalProcess",
    "RepetitionProfile",
    "BoolQuery",
    "MatrixElem",
    "VecComp",
    "LabeledRow",
    "Row",
    "DataStream",
    "StreamExhausted",
    "iid_process",
    "make_repetitive",
    "make_alternating",
    "repetition_number_exact",
    "estimate_repetition_number",
    "iid_uniform_boolean",
    "boolean_stream",
    "matrix_stream",
    "vector_stream",
    "row_stream",
    "transpose_stream",
    "symmetrize_stream",
    "process_from_spec",
    "process_to_spec",
    "read_matrix_market",
    "write_matrix_market",
]


def make_rng(seed: int, *stream_id: int) -> np.random.Generator:
    """Counter-based generator with domain separation by ``stream_id``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream_id))
    return np.random.Generator(np.random.Philox(ss))


# --------------------------------------------------------------------------
# processes


@dataclass(frozen=True)
class Level:
    """One situation level.

    ``sampler(rng, parent, size)`` draws ``size`` situations given an array
    of parent situations (``parent`` is ``None`` for the top level).  Each
    drawn situation is then held fixed for ``timescale`` child draws.
    """

    sampler: Callable
    timescale: int
    name: str = ""


@dataclass(frozen=True)
class HierarchicalProcess:
    """Tree ``D0 -> D1_{a1} ->^{xT1} ... -> z`` with a leaf sampler.

    ``leaf(rng, situation, size)`` maps the innermost situations to sample
    labels.  ``marginal`` is the exact per-label probability when known.
    """

    levels: tuple
    leaf: Callable
    n_outcomes: int
    seed: int = 0
    kind: str = "custom"
    marginal: np.ndarray | None = None
    params: dict = field(default_factory=dict)

    @property
    def tau(self) -> int:
        """Refreshing time, the product of all timescales."""
        return int(np.prod([lv.timescale for lv in self.levels])) if self.levels else 1

    def blocks(self, n_blocks: int, rng: np.random.Generator, first_top=None) -> np.ndarray:
        """``(n_blocks, tau)`` array of labels, one refreshing window per row.

        ``first_top`` pins the top-level situation of the first block, which
        is how a continuation conditioned on an observed prefix is drawn.
        """
        parent = None
        size = n_blocks
        for depth, lv in enumerate(self.levels):
            sit = np.asarray(lv.sampler(rng, parent, size))
            if depth == 0 and first_top is not None and sit.shape[0] > 0:
                sit = sit.copy()
                sit[0] = first_top
            sit = np.repeat(sit, lv.timescale, axis=0)
            size = sit.shape[0]
            parent = sit
        z = np.asarray(self.leaf(rng, parent, size), dtype=np.int64)
        return z.reshape(n_blocks, self.tau)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        nb = -(-int(n) // self.tau)
        return self.blocks(nb, rng).reshape(-1)[:n]

    def with_seed(self, seed: int) -> "HierarchicalProcess":
        return HierarchicalProcess(
            self.levels, self.leaf, self.n_outcomes, seed, self.kind, self.marginal, self.params
        )


@dataclass(frozen=True)
class RepetitionProfile:
    R: float
    tau: int
    stderr: float = 0.0


def iid_process(probs, seed: int = 0) -> HierarchicalProcess:
    """IID draws from ``probs``; refreshing time 1."""
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or p.size == 0 or np.any(p < 0) or not np.isclose(p.sum(), 1.0):
        raise ValueError("probs must be a non-empty probability vector")
    cdf = np.cumsum(p)
    cdf[-1] = 1.0

    def leaf(rng, _parent, size):
        return np.searchsorted(cdf, rng.random(size), side="right")

    return HierarchicalProcess((), leaf, p.size, seed, "iid", p, {})


def make_repetitive(N: int, seed: int = 0) -> HierarchicalProcess:
    """One uniform ``x`` repeated ``N`` times per block."""
    if N < 2:
        raise ValueError("N must be at least 2")
    top = Level(lambda rng, _p, size: rng.integers(0, N, size), N, "x")
    return HierarchicalProcess(
        (top,), lambda _rng, sit, _size: sit, N, seed, "repetitive", np.full(N, 1.0 / N), {"N": N}
    )


def make_alternating(N: int, seed: int = 0) -> HierarchicalProcess:
    """Situation bit fixed per block of ``N``, ``x`` uniform per step.

    Labels encode ``z = alpha * N + x`` so the situation is part of the sample.
    """
    if N < 2:
        raise ValueError("N must be at least 2")
    top = Level(lambda rng, _p, size: rng.integers(0, 2, size), N, "alpha")

    def leaf(rng, sit, size):
        return sit * N + rng.integers(0, N, size)

    return HierarchicalProcess(
        (top,), leaf, 2 * N, seed, "alternating", np.full(2 * N, 0.5 / N), {"N": N}
    )


def repetition_number_exact(process: HierarchicalProcess) -> float:
    """Closed forms for the built-in processes."""
    if process.kind == "iid":
        # tau = 1 window: only the i=1 term 1 - p(z) survives
        return float(1.0 - np.min(process.marginal))
    N = process.params.get("N")
    if process.kind == "repetitive":
        return float(N - 1)
    if process.kind == "alternating":
        return 1.5 - 1.0 / N
    raise ValueError("no closed form for this process; use estimate_repetition_number")


def estimate_repetition_number(
    process: HierarchicalProcess, n_blocks: int, rng: np.random.Generator | None = None
) -> RepetitionProfile:
    """Monte-Carlo estimate of ``max_z (E[N_z | z_1 = z] - E[N_z])`` over one window."""
    if n_blocks < 100:
        raise ValueError("need at least 100 blocks for a meaningful estimate")
    rng = make_rng(process.seed, 7) if rng is None else rng
    blocks = process.blocks(n_blocks, rng)
    tau = process.tau
    first = blocks[:, 0]
    counts_first = (blocks == first[:, None]).sum(axis=1)
    K = process.n_outcomes
    if process.marginal is not None:
        p = np.asarray(process.marginal)
    else:
        p = np.bincount(blocks.reshape(-1), minlength=K) / blocks.size
    hits = np.bincount(first, minlength=K)
    sums = np.bincount(first, weights=counts_first, minlength=K)
    sq = np.bincount(first, weights=counts_first.astype(float) ** 2, minlength=K)
    seen = hits > 0
    mean = np.where(seen, sums / np.maximum(hits, 1), -np.inf)
    excess = mean - tau * p
    z = int(np.argmax(excess))
    var = sq[z] / hits[z] - mean[z] ** 2
    return RepetitionProfile(float(excess[z]), tau, float(np.sqrt(max(var, 0.0) / hits[z])))


# --------------------------------------------------------------------------
# sample payloads


@dataclass(frozen=True)
class BoolQuery:
    x: int
    y: int
    situation: tuple = ()


@dataclass(frozen=True)
class MatrixElem:
    i: int
    j: int
    a_ij: float


@dataclass(frozen=True)
class VecComp:
    k: int
    b_k: float


@dataclass(frozen=True)
class LabeledRow:
    i: int
    x_i: sp.csr_matrix
    y_i: int


@dataclass(frozen=True)
class Row:
    i: int
    x_i: sp.csr_matrix


class StreamExhausted(ValueError):
    """Raised when a finite stream runs out before the requested sample count."""


class DataStream:
    """Single-consumer stream over a process with a payload decoder.

    ``take(m)`` returns a dict of arrays (the fast path used by sketches);
    iterating yields typed sample records.
    """

    def __init__(self, process: HierarchicalProcess, decode: Callable, kind: str, meta=None,
                 stream_id: int = 0, limit: int | None = None):
        self.limit = limit
        self.process = process
        self.decode = decode
        self.kind = kind
        self.meta = dict(meta or {})
        self._rng = make_rng(process.seed, 1, stream_id)
        self._buffer = np.empty(0, dtype=np.int64)
        self.consumed = 0

    @property
    def tau(self) -> int:
        return self.process.tau

    def _labels(self, m: int) -> np.ndarray:
        if self.limit is not None and self.consumed + m > self.limit:
            raise StreamExhausted(f"stream holds {self.limit - self.consumed} more samples, {m} requested")
        need = m - self._buffer.size
        if need > 0:
            nb = -(-need // self.process.tau)
            fresh = self.process.blocks(nb, self._rng).reshape(-1)
            self._buffer = np.concatenate([self._buffer, fresh])
        out, self._buffer = self._buffer[:m], self._buffer[m:]
        self.consumed += m
        return out

    def take(self, m: int) -> dict:
        if m < 0:
            raise ValueError("m must be non-negative")
        z = self._labels(int(m))
        out = self.decode(z)
        out["z"] = z
        return out

    def records(self, m: int) -> list:
        """``m`` typed sample records."""
        batch = self.take(m)
        return [self._record(batch, k) for k in range(m)]

    def __iter__(self):
        while True:
            yield self.records(1)[0]

    def _record(self, batch: dict, k: int):
        if self.kind == "bool":
            y = batch["y"][k]
            y = int(y) if np.ndim(y) == 0 else tuple(int(v) for v in y)
            situation = ()
            if self.process.kind == "alternating":
                situation = (int(batch["x"][k]) // self.process.params["N"],)
            return BoolQuery(int(batch["x"][k]), y, situation)
        if self.kind == "matrix":
            return MatrixElem(int(batch["i"][k]), int(batch["j"][k]), float(batch["a"][k]))
        if self.kind == "vector":
            return VecComp(int(batch["k"][k]), float(batch["b"][k]))
        rows = self.meta["rows"]
        i = int(batch["i"][k])
        if self.kind == "labeled_row":
            return LabeledRow(i, rows[i], int(self.meta["labels"][i]))
        return Row(i, rows[i])


def iid_uniform_boolean(f, seed: int = 0, stream_id: int = 0) -> DataStream:
    """Stream of ``(x, f(x))`` with ``x`` uniform over the truth table."""
    f = np.asarray(f)
    if f.size == 0:
        raise ValueError("empty truth table")
    return boolean_stream(f, iid_process(np.full(f.size, 1.0 / f.size), seed), stream_id)


def boolean_stream(f, process: HierarchicalProcess, stream_id: int = 0) -> DataStream:
    """Boolean (or multi-bit word) queries over the label domain of ``process``.

    ``f`` has one row per label; a 2-D ``f`` carries ``b``-bit words.
    """
    f = np.asarray(f)
    if f.shape[0] != process.n_outcomes:
        raise ValueError("truth table must cover every process label")

    def decode(z):
        return {"x": z, "y": f[z]}

    return DataStream(process, decode, "bool", {"f": f}, stream_id)


def _coo(A) -> sp.coo_matrix:
    A = sp.coo_matrix(A)
    A.sum_duplicates()
    A.eliminate_zeros()
    return A


def matrix_stream(A, process: HierarchicalProcess | None = None, seed: int = 0,
                  stream_id: int = 0) -> DataStream:
    """Random nonzero elements ``(i, j, A_ij)``; labels index the nonzero list."""
    A = _coo(A)
    K = A.nnz
    if K == 0:
        raise ValueError("matrix has no nonzero entries")
    process = iid_process(np.full(K, 1.0 / K), seed) if process is None else process
    if process.n_outcomes != K:
        raise ValueError("process labels must index the nonzero entries")
    rows, cols, vals = A.row.astype(np.int64), A.col.astype(np.int64), A.data.astype(float)

    def decode(z):
        return {"i": rows[z], "j": cols[z], "a": vals[z]}

    return DataStream(process, decode, "matrix", {"shape": A.shape, "nnz": K}, stream_id)


def transpose_stream(stream: DataStream) -> DataStream:
    """Switch ``i`` and ``j`` in every element sample."""
    inner = stream.decode

    def decode(z):
        d = inner(z)
        return {"i": d["j"], "j": d["i"], "a": d["a"]}

    meta = dict(stream.meta)
    if "shape" in meta:
        meta["shape"] = meta["shape"][::-1]
    s = DataStream(stream.process, decode, "matrix", meta)
    s._rng = stream._rng
    return s


def symmetrize_stream(stream: DataStream, seed: int = 0) -> DataStream:
    """Elements of ``[[0, A], [A^T, 0]]``: each sample lands in one off-diagonal block."""
    inner = stream.decode
    n_rows, n_cols = stream.meta["shape"]
    coin = make_rng(seed, 2)

    def decode(z):
        d = inner(z)
        flip = coin.integers(0, 2, z.size).astype(bool)
        i = np.where(flip, n_rows + d["j"], d["i"])
        j = np.where(flip, d["i"], n_rows + d["j"])
        return {"i": i, "j": j, "a": d["a"]}

    meta = dict(stream.meta)
    meta["shape"] = (n_rows + n_cols, n_rows + n_cols)
    s = DataStream(stream.process, decode, "matrix", meta)
    s._rng = stream._rng
    return s


def vector_stream(b, process: HierarchicalProcess | None = None, seed: int = 0,
                  stream_id: int = 0) -> DataStream:
    """Components ``(k, b_k)`` with ``k`` uniform over all indices."""
    b = np.asarray(b, dtype=float)
    N = b.size
    process = iid_process(np.full(N, 1.0 / N), seed) if process is None else process
    if process.n_outcomes != N:
        raise ValueError("process labels must index the vector components")

    def decode(z):
        return {"k": z, "b": b[z]}

    return DataStream(process, decode, "vector", {"N": N, "vector": b}, stream_id)


def row_stream(X, labels=None, process: HierarchicalProcess | None = None, seed: int = 0,
               stream_id: int = 0) -> DataStream:
    """Rows ``(i, x_i)`` or labeled rows ``(i, x_i, y_i)`` with ``i`` uniform."""
    X = sp.csr_matrix(X)
    N = X.shape[0]
    process = iid_process(np.full(N, 1.0 / N), seed) if process is None else process
    rows = [X.getrow(i) for i in range(N)]
    meta = {"rows": rows, "shape": X.shape}
    kind = "row"
    if labels is not None:
        meta["labels"] = np.asarray(labels, dtype=int)
        kind = "labeled_row"

    def decode(z):
        out = {"i": z}
        if labels is not None:
            out["y"] = meta["labels"][z]
        return out

    return DataStream(process, decode, kind, meta, stream_id)


# --------------------------------------------------------------------------
# serialization


def process_to_spec(process: HierarchicalProcess, dims: Sequence[int] | None = None) -> str:
    spec = {
        "kind": process.kind,
        "dims": list(dims) if dims is not None else [process.params.get("N", process.n_outcomes)],
        "timescales": [lv.timescale for lv in process.levels],
        "seed": int(process.seed),
    }
    return json.dumps(spec, sort_keys=True)


def process_from_spec(text: str) -> HierarchicalProcess:
    """Rebuild a built-in process from its JSON spec."""
    spec = json.loads(text) if isinstance(text, str) else dict(text)
    kind = spec["kind"]
    N = int(spec["dims"][0])
    seed = int(spec.get("seed", 0))
    if kind == "iid":
        return iid_process(np.full(N, 1.0 / N), seed)
    if kind == "repetitive":
        return make_repetitive(N, seed)
    if kind == "alternating":
        return make_alternating(N, seed)
    raise ValueError(f"unknown process kind {kind!r}")


def read_matrix_market(path) -> sp.coo_matrix:
    return sp.coo_matrix(scipy.io.mmread(path))


def write_matrix_market(path, A) -> None:
    scipy.io.mmwrite(path, sp.coo_matrix(A))
