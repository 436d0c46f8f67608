"""Quantum oracle sketching: budgets, sampled and expected phase oracles.

A sketch of the phase oracle ``U = sum_x e^{i t p(x) f(x)} |x><x|`` applies one
commuting rotation ``e^{i t y / M |x><x|}`` per streamed sample.  Since every
rotation is diagonal, a sketch is a phase vector.  The expected operator is
available in closed form for IID data (binomial moment generating function)
and for the built-in correlated processes; otherwise it is averaged by
Monte Carlo.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
import numpy as np

from .datagen import DataStream, HierarchicalProcess
from .qsvt import PhaseSequence, build_threshold_poly, qsvt_block_2x2, solve_phases
from .simcore import GATES, DiagonalUnitary, apply_gate, expected_unitary_gap

__all__ = [
    "SketchBudget",
    "OracleSketch",
    "budget_iid",
    "budget_query",
    "budget_correlated",
    "budget_multibit",
    "budget_comparators",
    "ideal_phase_oracle",
    "expected_phase_oracle_iid",
    "second_moment_iid",
    "expected_correlated_closed_form",
    "expected_oracle_montecarlo",
    "sketch_phase_oracle",
    "sketch_multibit_oracle",
    "sin_block_2x2",
    "UnknownDistributionResult",
    "sketch_unknown_distribution",
    "QueryAlgorithm",
    "instantiate_query_algorithm",
]

VARIANTS = ("plain", "adjoint", "controlled", "controlled_adjoint")


def _ceil_pos(x: float) -> int:
    # tiny slack so exact integers are not bumped up by rounding noise
    return max(1, int(math.ceil(x - 1e-9)))


def budget_iid(p_max: float, t: float, eps: float) -> int:
    """``M = ceil(2 p_max t^2 / eps)``."""
    _check_budget_args(p_max, t, eps)
    return _ceil_pos(2.0 * p_max * t * t / eps)


def budget_query(p_max: float, t: float, Q: int, eps: float) -> int:
    """Total samples for ``Q`` queries at per-query error ``eps / Q``."""
    if Q < 1:
        raise ValueError("Q must be at least 1")
    _check_budget_args(p_max, t, eps)
    return int(Q) * _ceil_pos(2.0 * p_max * t * t * Q / eps)


def budget_correlated(p_max: float, t: float, eps: float, R: float, domain_size: int,
                      form: str = "statement") -> int:
    """Samples for a process with repetition number ``R``.

    ``form="statement"`` uses ``(t^2 p + 2 t sqrt(2 p |X|)) R / eps``;
    ``form="proof"`` doubles it, which is what the error bound actually
    needs under the 4x diamond proxy.
    """
    _check_budget_args(p_max, t, eps)
    if R < 0 or domain_size < 1:
        raise ValueError("R must be non-negative and the domain non-empty")
    val = (t * t * p_max + 2.0 * t * math.sqrt(2.0 * p_max * domain_size)) * R / eps
    if form == "proof":
        val *= 2.0
    elif form != "statement":
        raise ValueError("form must be 'statement' or 'proof'")
    return _ceil_pos(val)


def budget_multibit(p_max: float, t: float, eps: float) -> int:
    """``ceil(p_max t^2 / eps)``, half the single-bit budget."""
    _check_budget_args(p_max, t, eps)
    return _ceil_pos(p_max * t * t / eps)


def budget_comparators(p_max: float, t: float, eps: float, delta: float, N: int) -> dict:
    """qDrift and concentration-based budgets for comparison plots."""
    _check_budget_args(p_max, t, eps)
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    return {
        "qdrift": _ceil_pos(8.0 * t * t / eps),
        "concentration": _ceil_pos(p_max * t * t / eps**2 * 12.0 * math.log(2.0 * N / delta)),
        "iid": budget_iid(p_max, t, eps),
    }


def _check_budget_args(p_max, t, eps):
    if not 0 < p_max <= 1:
        raise ValueError("p_max must lie in (0, 1]")
    if t <= 0:
        raise ValueError("t must be positive")
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")


@dataclass(frozen=True)
class SketchBudget:
    """Parameters of one budget calculation; ``samples`` dispatches on ``mode``."""

    p_max: float
    t: float
    eps: float
    Q: int = 1
    R: float = 0.0
    domain_size: int = 1
    mode: str = "iid"
    delta: float = 0.05

    @property
    def samples(self) -> int:
        if self.mode == "iid":
            return budget_query(self.p_max, self.t, self.Q, self.eps)
        if self.mode == "correlated":
            return self.Q * budget_correlated(self.p_max, self.t, self.eps / self.Q, self.R,
                                              self.domain_size)
        if self.mode == "multibit":
            return self.Q * budget_multibit(self.p_max, self.t, self.eps / self.Q)
        comp = budget_comparators(self.p_max, self.t, self.eps / self.Q, self.delta, self.domain_size)
        if self.mode in ("qdrift", "concentration"):
            return self.Q * comp[self.mode]
        raise ValueError(f"unknown budget mode {self.mode!r}")

    @property
    def per_query(self) -> int:
        return self.samples // self.Q


# --------------------------------------------------------------------------
# oracles


@dataclass
class OracleSketch:
    """A sketched oracle.

    ``realized`` is a :class:`DiagonalUnitary` in sampled mode and the
    complex diagonal of the expected operator in expected mode.
    """

    realized: DiagonalUnitary | np.ndarray
    samples_consumed: int
    t: float
    mode: str = "sampled"
    variant: str = "plain"
    meta: dict = field(default_factory=dict)

    def diag(self) -> np.ndarray:
        if isinstance(self.realized, DiagonalUnitary):
            return self.realized.diag()
        return np.asarray(self.realized)

    def matrix(self) -> np.ndarray:
        return np.diag(self.diag())

    def gap(self, target_diag) -> float:
        """4x certified proxy against a diagonal target."""
        return expected_unitary_gap(np.asarray(target_diag), self.diag())


def _n_qubits(N: int) -> int:
    return max(1, int(math.ceil(math.log2(N)))) if N > 1 else 1


def _pad(vec, N):
    vec = np.asarray(vec)
    n = _n_qubits(N)
    out = np.zeros((2**n,) + vec.shape[1:], dtype=vec.dtype)
    out[: vec.shape[0]] = vec
    return out


def _apply_variant(diag: np.ndarray, variant: str) -> np.ndarray:
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    d = np.conj(diag) if variant.endswith("adjoint") else diag
    if variant.startswith("controlled"):
        d = np.concatenate([np.ones_like(d), d])
    return d


def ideal_phase_oracle(p, f, t: float) -> np.ndarray:
    """Diagonal of ``U = e^{i t p(x) f(x)}``."""
    return np.exp(1j * t * np.asarray(p, float) * np.asarray(f, float))


def expected_phase_oracle_iid(p, f, t: float, M: int) -> np.ndarray:
    """``E[V]_xx = (1 - p(x) + p(x) e^{i t f(x) / M})^M`` (counts are binomial)."""
    p = np.asarray(p, float)
    f = np.asarray(f, float)
    base = 1.0 - p + p * np.exp(1j * t * f / M)
    return base**M


def second_moment_iid(p, f, t: float, M: int) -> np.ndarray:
    """``E[v_x conj(v_y)]`` for the IID sketch (multinomial counts)."""
    p = np.asarray(p, float)
    a = p * (np.exp(1j * t * np.asarray(f, float) / M) - 1.0)
    base = 1.0 + a[:, None] + np.conj(a)[None, :]
    out = base**M
    np.fill_diagonal(out, 1.0)
    return out


def expected_correlated_closed_form(process: HierarchicalProcess, f, t: float, M: int,
                                    offset: int = 0, situation: int | None = None) -> np.ndarray:
    """Conditional ``E[V]`` for the built-in one-level correlated processes.

    The sketch starts ``offset`` samples into a block whose top situation is
    ``situation`` (``None``: start on a block boundary, nothing observed).
    """
    f = np.asarray(f, float)
    N = process.params.get("N")
    tau = process.tau
    theta = t * f / M
    if process.kind not in ("repetitive", "alternating"):
        raise ValueError("closed form only for the repetitive and alternating processes")
    r = 0 if situation is None else min(M, (tau - offset) % tau)
    rest = M - r
    B, L = divmod(rest, tau)
    K = f.size
    if process.kind == "repetitive":
        p = 1.0 / N
        out = np.ones(K, dtype=complex)
        if r:
            out[situation] *= np.exp(1j * theta[situation] * r)
        out *= (1 - p + p * np.exp(1j * theta * tau)) ** B
        out *= 1 - p + p * np.exp(1j * theta * L)
        return out
    g = 1 - 1.0 / N + np.exp(1j * theta) / N
    half = np.arange(K) // N
    out = np.ones(K, dtype=complex)
    if r:
        out *= np.where(half == situation, g**r, 1.0)
    out *= (0.5 * (g**tau + 1.0)) ** B
    out *= 0.5 * (g**L + 1.0)
    return out


def expected_oracle_montecarlo(stream_factory, t: float, M: int, trials: int = 10_000,
                               second_moment: bool = False, chunk: int = 256):
    """Average of ``trials`` independent sketches.

    ``stream_factory(k)`` returns a fresh Boolean stream for trial ``k``.
    Returns the mean diagonal, its standard error, and optionally the
    second-moment matrix ``E[v conj(v)^T]``.
    """
    s1 = None
    s2 = None
    sq = None
    for k in range(trials):
        st = stream_factory(k)
        ph = _phases_from_batch(st.take(M), st.meta["f"].shape[0], t, M)
        v = np.exp(1j * ph)
        if s1 is None:
            s1 = np.zeros_like(v)
            sq = np.zeros(v.shape)
            if second_moment:
                s2 = np.zeros((v.size, v.size), dtype=complex)
        s1 += v
        sq += np.abs(v) ** 2
        if second_moment:
            s2 += np.outer(v, np.conj(v))
    mean = s1 / trials
    var = np.maximum(sq / trials - np.abs(mean) ** 2, 0.0)
    se = np.sqrt(var / max(trials - 1, 1))
    if second_moment:
        return mean, se, s2 / trials
    return mean, se


def _phases_from_batch(batch: dict, K: int, t: float, M: int) -> np.ndarray:
    x = np.asarray(batch["x"])
    y = np.asarray(batch["y"], float)
    if y.ndim == 1:
        return t / M * np.bincount(x, weights=y, minlength=K)[:K]
    out = np.zeros((K, y.shape[1]))
    np.add.at(out, x, y)
    return t / M * out


def sketch_phase_oracle(stream: DataStream, N: int, t: float, M: int, variant: str = "plain",
                        mode: str = "sampled") -> OracleSketch:
    """Single-bit sketch over ``[N]`` from ``M`` streamed ``(x, y)`` samples.

    ``mode="expected"`` returns the closed-form expectation for IID streams
    (no samples consumed).
    """
    if M < 1:
        raise ValueError("M must be at least 1")
    n = _n_qubits(N)
    if mode == "expected":
        proc = stream.process
        if proc.kind != "iid":
            raise ValueError("closed-form expectation needs an IID stream; use expected_oracle_montecarlo")
        f = np.asarray(stream.meta["f"], float)
        ev = expected_phase_oracle_iid(_pad(proc.marginal, N), _pad(f, N), t, M)
        return OracleSketch(_apply_variant(ev, variant), 0, t, "expected", variant)
    if mode != "sampled":
        raise ValueError("mode must be 'sampled' or 'expected'")
    batch = stream.take(M)
    ph = _pad(_phases_from_batch(batch, N, t, M), N)
    if variant.endswith("adjoint"):
        ph = -ph
    acc = DiagonalUnitary(n, ph)
    if variant.startswith("controlled"):
        acc = acc.controlled()
    elif variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    return OracleSketch(acc, M, t, "sampled", variant)


def sketch_multibit_oracle(stream: DataStream, N: int, b: int, t: float, M: int,
                           mode: str = "sampled") -> OracleSketch:
    """Multi-bit sketch: diagonal over ``[N] x [b]`` from ``b``-bit words.

    Basis index ``x * b + j`` carries phase ``t/M`` per sample with bit ``j`` set.
    """
    f = np.asarray(stream.meta["f"])
    if f.ndim != 2 or f.shape[1] != b:
        raise ValueError("stream must carry b-bit words")
    if mode == "expected":
        p = np.repeat(np.asarray(stream.process.marginal, float), b)
        ev = np.ones(2**_n_qubits(N * b), dtype=complex)
        ev[: N * b] = expected_phase_oracle_iid(p, f.reshape(-1).astype(float), t, M)
        return OracleSketch(ev, 0, t, "expected", meta={"b": b})
    batch = stream.take(M)
    ph = _phases_from_batch(batch, N, t, M).reshape(-1)
    return OracleSketch(DiagonalUnitary(_n_qubits(N * b), _pad(ph, N * b)), M, t, "sampled",
                        meta={"b": b})


# --------------------------------------------------------------------------
# unknown distributions


def sin_block_2x2(u: np.ndarray, u_dag: np.ndarray) -> np.ndarray:
    """Per-basis 2x2 ancilla operator of the sin-block construction.

    Sequence: H, controlled query, X, controlled adjoint query, H, X, then
    ``diag(-i, 1)`` so that ``<0|W|0> = sin(Lambda)`` for ``u = e^{i Lambda}``.
    Linear in each query, so expectations pass straight through.
    """
    n = u.size
    H = GATES["h"]
    X = GATES["x"]
    fin = np.diag([-1j, 1.0])
    W = np.empty((n, 2, 2), dtype=complex)
    for col in range(2):
        v = np.zeros((n, 2), dtype=complex)
        v[:, col] = 1.0
        v = v @ H.T
        v[:, 1] *= u
        v = v @ X.T
        v[:, 1] *= u_dag
        v = v @ H.T
        v = v @ X.T
        v = v @ fin.T
        W[:, :, col] = v
    return W


@dataclass
class UnknownDistributionResult:
    """Diagonal zero-ancilla block of the thresholded oracle and its bookkeeping."""

    block: np.ndarray
    target: np.ndarray
    degree: int
    queries: int
    samples_per_query: int
    proxy: float
    mode: str


def sketch_unknown_distribution(stream: DataStream, N: int, p_min: float, p_max: float, eps: float,
                                mode: str = "expected", cap: int = 200,
                                samples_per_query: int | None = None,
                                phases: PhaseSequence | None = None) -> UnknownDistributionResult:
    """Phase oracle ``(-1)^f`` from data with unknown marginal in ``[p_min, p_max]``.

    The sketch with ``t = 1/p_max`` has eigenphases ``Lambda = p f / p_max``,
    which vanish where ``f = 0`` and exceed ``p_min/p_max`` where ``f = 1``.
    A sin block plus an even threshold polynomial at ``sin(p_min/p_max)``
    maps these to ``+1`` and ``-1``.

    Modes: ``spectral`` (exact polynomial of the ideal block), ``expected``
    (closed-form expected queries, IID only) and ``sampled`` (one fresh
    sketch per query).
    """
    if p_min <= 0 or p_max < p_min or p_max > 1:
        raise ValueError("need 0 < p_min <= p_max <= 1")
    f = np.asarray(stream.meta["f"], float)
    target = np.where(f > 0, -1.0, 1.0)
    if np.isclose(p_min, p_max):
        # uniform data: a plain sketch with t = pi/p already gives the phase oracle
        t = np.pi / p_max
        M = samples_per_query or budget_iid(p_max, t, eps)
        sk = sketch_phase_oracle(stream, N, t, M, mode="expected" if mode != "sampled" else "sampled")
        blk = sk.diag()[: f.size]
        return UnknownDistributionResult(blk, target, 0, 1, M, expected_unitary_gap(target, blk), mode)
    lam = math.sin(p_min / p_max)
    poly = build_threshold_poly(lam, eps / 8, cap=cap)
    t = 1.0 / p_max
    if mode == "spectral":
        p = np.asarray(stream.process.marginal, float)
        blk = poly(np.sin(p * f * t))
        return UnknownDistributionResult(blk, target, poly.degree, 0, 0,
                                         expected_unitary_gap(target, blk), mode)
    seq = phases if phases is not None else solve_phases(poly)
    d = len(seq.phis) - 1
    Q = 2 * d
    if samples_per_query is None:
        samples_per_query = _ceil_pos(8.0 * d / (p_max * eps))
    M = samples_per_query
    if mode == "expected":
        if stream.process.kind != "iid":
            raise ValueError("expected mode needs an IID stream")
        ev = expected_phase_oracle_iid(stream.process.marginal, f, t, M)
        W = sin_block_2x2(ev, np.conj(ev))
        blk = qsvt_block_2x2(W, seq)
    elif mode == "sampled":
        Ws = []
        for _ in range(d):
            u = np.exp(1j * _phases_from_batch(stream.take(M), f.size, t, M))
            ud = np.exp(-1j * _phases_from_batch(stream.take(M), f.size, t, M))
            Ws.append(sin_block_2x2(u, ud))
        blk = qsvt_block_2x2(np.stack(Ws), seq)
    else:
        raise ValueError("mode must be 'spectral', 'expected' or 'sampled'")
    return UnknownDistributionResult(blk, target, d, Q, M, expected_unitary_gap(target, blk), mode)


# --------------------------------------------------------------------------
# query algorithms


@dataclass
class QueryAlgorithm:
    """Fixed gates interleaved with oracle calls on an ``n_qubits`` register.

    Each op is ``("gate", matrix, targets)`` or ``("oracle", variant, targets)``.
    For controlled variants the first target is the control.
    """

    n_qubits: int
    ops: list

    @property
    def n_queries(self) -> int:
        return sum(1 for op in self.ops if op[0] == "oracle")

    @classmethod
    def from_json(cls, text: str) -> "QueryAlgorithm":
        data = json.loads(text)
        ops = []
        for op in data["ops"]:
            if "oracle" in op:
                ops.append(("oracle", op["oracle"], list(op["targets"])))
            else:
                name = op["gate"].lower()
                if name not in GATES:
                    raise ValueError(f"unknown gate {name!r}")
                ops.append(("gate", GATES[name], list(op["targets"])))
        return cls(int(data["n_qubits"]), ops)

    def to_json(self) -> str:
        inv = {id(v): k for k, v in GATES.items()}
        ops = []
        for kind, obj, targets in self.ops:
            if kind == "oracle":
                ops.append({"oracle": obj, "targets": targets})
            else:
                name = inv.get(id(obj))
                if name is None:
                    raise ValueError("only named gates serialize")
                ops.append({"gate": name, "targets": targets})
        return json.dumps({"n_qubits": self.n_qubits, "ops": ops})


def _oracle_operator(diag: np.ndarray, variant: str, targets, n: int) -> tuple[np.ndarray, list]:
    d = _apply_variant(diag, variant)
    k = int(round(math.log2(d.size)))
    if len(targets) != k:
        raise ValueError("oracle target count does not match its size")
    return np.diag(d), list(targets)


def instantiate_query_algorithm(alg: QueryAlgorithm, oracle_dim: int, mode: str = "ideal",
                                stream: DataStream | None = None, M: int | None = None,
                                t: float | None = None, p=None, f=None,
                                initial_state: np.ndarray | None = None,
                                moments: tuple | None = None):
    """Run an algorithm with every oracle call replaced by a fresh sketch.

    Modes
    -----
    ``ideal``: exact oracle ``e^{i t p f}``; returns the final state.
    ``expected_operator``: each call replaced by ``E[V]`` (independent calls
    make the product of expectations exact); returns the operator.
    ``expected_channel``: exact averaged density matrix using first and
    second moments of the sketch; returns ``rho``.
    ``sampled``: fresh contiguous stream segments per call; returns
    ``(state, samples_consumed)``.
    """
    n = alg.n_qubits
    dim = 2**n
    if p is None and stream is not None:
        p = stream.process.marginal
    if f is None and stream is not None:
        f = stream.meta["f"]
    p = _pad(np.asarray(p, float), oracle_dim) if p is not None else None
    f = _pad(np.asarray(f, float), oracle_dim) if f is not None else None
    psi0 = np.zeros(dim, dtype=complex)
    psi0[0] = 1.0
    if initial_state is not None:
        psi0 = np.asarray(initial_state, dtype=complex)

    def gate_op(op, current):
        _, g, targets = op
        return apply_gate(current, g, targets, n)

    if mode in ("ideal", "expected_operator"):
        if mode == "ideal":
            od = ideal_phase_oracle(p, f, t)
        else:
            od = moments[0] if moments is not None else expected_phase_oracle_iid(p, f, t, M)
        cur = psi0 if mode == "ideal" else np.eye(dim, dtype=complex)
        for op in alg.ops:
            if op[0] == "gate":
                cur = gate_op(op, cur)
            else:
                mat, targets = _oracle_operator(od, op[1], op[2], n)
                cur = apply_gate(cur, mat, targets, n)
        return cur
    if mode == "expected_channel":
        if moments is None:
            m1 = expected_phase_oracle_iid(p, f, t, M)
            m2 = second_moment_iid(p, f, t, M)
        else:
            m1, m2 = moments
        rho = np.outer(psi0, np.conj(psi0))
        for op in alg.ops:
            if op[0] == "gate":
                _, g, targets = op
                rho = apply_gate(rho, g, targets, n)
                rho = apply_gate(rho.conj().T, g, targets, n).conj().T
            else:
                rho = _apply_oracle_channel(rho, m1, m2, op[1], op[2], n)
        return rho
    if mode == "sampled":
        if stream is None or M is None:
            raise ValueError("sampled mode needs a stream and a per-query sample count")
        cur = psi0
        used = 0
        for op in alg.ops:
            if op[0] == "gate":
                cur = gate_op(op, cur)
            else:
                sk = sketch_phase_oracle(stream, oracle_dim, t, M)
                used += sk.samples_consumed
                mat, targets = _oracle_operator(sk.diag(), op[1], op[2], n)
                cur = apply_gate(cur, mat, targets, n)
        return cur, used
    raise ValueError(f"unknown mode {mode!r}")


def _apply_oracle_channel(rho, m1, m2, variant, targets, n):
    """``rho -> E[D rho D^dag]`` for the random diagonal ``D`` of one oracle call."""
    K = m1.size
    ctrl = variant.startswith("controlled")
    adj = variant.endswith("adjoint")
    # moments over the (possibly controlled) local diagonal
    if adj:
        m1 = np.conj(m1)
        m2 = np.conj(m2)
    if ctrl:
        one = np.ones(K)
        mm = np.block([[np.ones((K, K)), np.conj(m1)[None, :] * one[:, None]],
                       [m1[:, None] * one[None, :], m2]])
    else:
        mm = m2
    k = len(targets)
    if mm.shape[0] != 2**k:
        raise ValueError("oracle target count does not match its size")
    # local index of every global basis state
    idx = np.arange(2**n)
    bits = (idx[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1
    loc = np.zeros(2**n, dtype=int)
    for q in targets:
        loc = loc * 2 + bits[:, q]
    return rho * mm[loc[:, None], loc[None, :]]
