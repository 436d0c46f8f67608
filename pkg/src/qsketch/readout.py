"""Clifford classical shadows and the interferometric variant for signed overlaps.

A uniformly random Clifford ``U`` followed by a computational-basis outcome
``b`` yields the snapshot ``U^dag |b>``, which is a stabilizer state drawn
with probability proportional to ``<sigma|rho|sigma>``.  For the small
registers simulated here every stabilizer state is enumerated once and
snapshots are sampled from that table directly; ``snapshot_id`` indexes it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .simcore import GATES, apply_gate

__all__ = [
    "ShadowRecord",
    "stabilizer_states",
    "collect_shadows",
    "ShadowSet",
    "shadow_estimates",
    "median_of_means",
    "predict_fidelity",
    "predict_observable",
    "interferometric_state",
    "interferometric_observable",
    "interferometric_predict",
    "shadow_parameters",
    "encode_shadows",
    "decode_shadows",
]

MAX_SHADOW_QUBITS = 4


@dataclass(frozen=True)
class ShadowRecord:
    """One snapshot: index into :func:`stabilizer_states` for ``n`` qubits."""

    snapshot_id: int
    n: int


def _canonical_rows(block: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Phase-fixed rows and their hashable integer keys."""
    k = np.argmax(np.abs(block) > 1e-9, axis=1)
    lead = block[np.arange(block.shape[0]), k]
    fixed = block * (np.conj(lead) / np.abs(lead))[:, None]
    # adding zero folds -0.0 into 0.0 so equal states share one key
    ints = np.round(np.concatenate([fixed.real, fixed.imag], axis=1) * 1e6).astype(np.int64) + 0
    keys = np.ascontiguousarray(ints).view(np.dtype((np.void, ints.dtype.itemsize * ints.shape[1])))
    return fixed, keys.ravel()


@lru_cache(maxsize=None)
def stabilizer_states(n: int) -> np.ndarray:
    """All ``n``-qubit stabilizer states, rows normalized, global phase fixed.

    Breadth-first closure of ``|0...0>`` under H, S and CNOT; the count is
    ``2^n prod_{k=1..n} (2^k + 1)``.
    """
    if not 1 <= n <= MAX_SHADOW_QUBITS:
        raise ValueError(f"stabilizer enumeration supported for 1..{MAX_SHADOW_QUBITS} qubits")
    gates = [(GATES["h"], [q]) for q in range(n)] + [(GATES["s"], [q]) for q in range(n)]
    gates += [(GATES["cnot"], [a, b]) for a in range(n) for b in range(n) if a != b]
    start = np.zeros((1, 2**n), dtype=complex)
    start[0, 0] = 1.0
    fixed, keys = _canonical_rows(start)
    seen = {keys[0].tobytes()}
    found = [fixed]
    frontier = fixed
    while frontier.shape[0]:
        cand = np.concatenate([apply_gate(frontier.T, g, tg, n).T for g, tg in gates])
        fixed, keys = _canonical_rows(cand)
        _, first = np.unique(keys, return_index=True)
        fresh = [i for i in first if keys[i].tobytes() not in seen]
        seen.update(keys[i].tobytes() for i in fresh)
        frontier = fixed[np.sort(np.array(fresh, dtype=np.int64))]
        found.append(frontier)
    states = np.concatenate(found)
    expected = 2**n * math.prod(2**k + 1 for k in range(1, n + 1))
    if states.shape[0] != expected:
        raise RuntimeError("stabilizer enumeration incomplete")
    return states


@lru_cache(maxsize=None)
def _table_conj(n: int) -> np.ndarray:
    return stabilizer_states(n).conj()


def _as_density(state) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        return np.outer(state, state.conj())
    return state


def collect_shadows(state, count: int, rng: np.random.Generator) -> "ShadowSet":
    """Draw ``count`` snapshots of a pure state vector or a density matrix."""
    if count < 1:
        raise ValueError("count must be positive")
    probs = _snapshot_probs(state)
    n = int(round(math.log2(np.asarray(state).shape[0])))
    ids = rng.choice(probs.size, size=count, p=probs)
    return ShadowSet(n, ids)


def _snapshot_probs(state) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    n = int(round(math.log2(state.shape[0])))
    tc = _table_conj(n)
    if state.ndim == 1:
        probs = np.abs(tc @ state) ** 2
    else:
        probs = np.real(np.einsum("si,ij,sj->s", tc, state, tc.conj()))
    probs = np.clip(probs, 0, None)
    return probs / probs.sum()


@dataclass
class ShadowSet:
    """Snapshot ids for one register size; predictions are computed lazily."""

    n: int
    ids: np.ndarray

    def __len__(self) -> int:
        return int(self.ids.size)

    def records(self) -> list[ShadowRecord]:
        return [ShadowRecord(int(i), self.n) for i in self.ids]

    def batch_counts(self, k: int) -> np.ndarray:
        """``(k, n_states)`` snapshot histograms of the ``k`` consecutive batches."""
        k = max(1, min(int(k), self.ids.size))
        L = self.ids.size // k
        size = stabilizer_states(self.n).shape[0]
        batch = np.repeat(np.arange(k), L)
        flat = np.bincount(batch * size + self.ids[: k * L], minlength=k * size)
        return flat.reshape(k, size)


def shadow_estimates(shadows: ShadowSet, observable) -> np.ndarray:
    """Single-shot estimates ``(d+1) <sigma|O|sigma> - tr O``.

    ``observable`` is a matrix or a low-rank pair ``(vectors, weights)``
    meaning ``sum_r weights[r] |v_r><v_r|`` (rows of ``vectors``).
    """
    return _table_estimates(shadows.n, observable)[shadows.ids]


def _table_estimates(n: int, observable) -> np.ndarray:
    """Single-shot estimate for every stabilizer state of the table."""
    tc = _table_conj(n)
    d = tc.shape[1]
    if isinstance(observable, tuple):
        vecs, wts = observable
        amp = tc @ np.asarray(vecs, dtype=complex).T
        vals = (np.abs(amp) ** 2) @ np.asarray(wts, dtype=float)
        tr = float(np.sum(np.asarray(wts) * np.sum(np.abs(vecs) ** 2, axis=1)))
    else:
        O = np.asarray(observable, dtype=complex)
        vals = np.real(np.einsum("si,ij,sj->s", tc, O, tc.conj()))
        tr = float(np.real(np.trace(O)))
    return (d + 1) * vals - tr


def median_of_means(values: np.ndarray, k: int) -> float:
    """Median over ``k`` equal batches (trailing remainder dropped)."""
    values = np.asarray(values, dtype=float)
    k = max(1, min(int(k), values.size))
    L = values.size // k
    return float(np.median(values[: k * L].reshape(k, L).mean(axis=1)))


def predict_observable(shadows: ShadowSet, observable, k: int) -> float:
    """Median-of-means over ``k`` consecutive batches, via per-batch histograms."""
    counts = shadows.batch_counts(k).astype(float)
    means = counts @ _table_estimates(shadows.n, observable) / counts[0].sum()
    return float(np.median(means))


def predict_fidelity(shadows: ShadowSet, target_state, k: int = 1) -> float:
    """Median-of-means estimate of ``<x|rho|x>``."""
    x = np.asarray(target_state, dtype=complex)
    return predict_observable(shadows, (x[None, :], np.ones(1)), k)


def shadow_parameters(m: int, eps: float, delta: float, trace_sq: float = 2.0) -> tuple[int, int]:
    """Batch count ``k = ceil(8 log(2m/delta))`` and batch size ``L = ceil(12 tr(O^2) / eps^2)``.

    Single-shot variance is at most ``3 tr(O^2)``, so Chebyshev gives
    failure at most 1/4 per batch mean.
    """
    k = int(math.ceil(8 * math.log(2 * m / delta)))
    L = int(math.ceil(4 * 3 * trace_sq / eps**2))
    return k, L


def interferometric_state(w) -> np.ndarray:
    """``(|0>|0^n> + |1>|w>) / sqrt(2)`` with the control as most significant qubit."""
    w = np.asarray(w, dtype=complex)
    out = np.zeros(2 * w.size, dtype=complex)
    out[0] = 1.0
    out[w.size:] = w
    return out / math.sqrt(2)


def interferometric_observable(x, low_rank: bool = False):
    """``|x+><x+| - |x-><x-|`` with ``|x+-> = (|0>|0^n> +- |1>|x>) / sqrt(2)``.

    ``low_rank=True`` returns ``(vectors, weights)`` for :func:`shadow_estimates`.
    """
    x = np.asarray(x, dtype=complex)
    if abs(np.linalg.norm(x) - 1) > 1e-9:
        raise ValueError("test vectors must be normalized")
    zero = np.zeros_like(x)
    zero[0] = 1.0
    plus = np.concatenate([zero, x]) / math.sqrt(2)
    minus = np.concatenate([zero, -x]) / math.sqrt(2)
    if low_rank:
        return np.stack([plus, minus]), np.array([1.0, -1.0])
    return np.outer(plus, plus.conj()) - np.outer(minus, minus.conj())


def interferometric_predict(controlled_state, tests, eps: float, delta: float,
                            rng: np.random.Generator, shadows: ShadowSet | None = None) -> np.ndarray:
    """Estimates of ``Re <x_i|w>`` for every test vector.

    ``controlled_state`` is the output of the controlled preparation,
    i.e. :func:`interferometric_state` of ``w`` or a density matrix of the
    same register.  Uses ``k * L`` snapshots from :func:`shadow_parameters`.
    """
    tests = [np.asarray(x, dtype=complex) for x in tests]
    obs = [interferometric_observable(x, low_rank=True) for x in tests]
    k, L = shadow_parameters(len(tests), eps, delta)
    if shadows is None:
        # batch histograms drawn directly: same law as k batches of L snapshots
        counts = rng.multinomial(L, _snapshot_probs(controlled_state), size=k)
        n = int(round(math.log2(np.asarray(controlled_state).shape[0])))
    else:
        counts = shadows.batch_counts(k)
        n = shadows.n
    # all rank-2 observables share one overlap pass over the table
    vecs = np.concatenate([v for v, _ in obs])
    amp2 = np.abs(_table_conj(n) @ vecs.T) ** 2
    d = 2**n
    table = (d + 1) * (amp2[:, 0::2] - amp2[:, 1::2])
    counts = np.asarray(counts, dtype=float)
    means = counts @ table / counts[0].sum()
    return np.median(means, axis=0)


def _varint(x: int) -> bytes:
    out = bytearray()
    while True:
        byte = x & 0x7F
        x >>= 7
        if x:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def encode_shadows(shadows: ShadowSet) -> bytes:
    """Compact log: qubit count byte, then one varint snapshot id per record."""
    return bytes([shadows.n]) + b"".join(_varint(int(i)) for i in shadows.ids)


def decode_shadows(blob: bytes) -> ShadowSet:
    n = blob[0]
    ids, cur, shift = [], 0, 0
    for byte in blob[1:]:
        cur |= (byte & 0x7F) << shift
        shift += 7
        if not byte & 0x80:
            ids.append(cur)
            cur, shift = 0, 0
    return ShadowSet(n, np.array(ids, dtype=np.int64))
