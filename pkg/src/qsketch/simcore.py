"""Dense statevector kernel, diagonal phase accumulators and channel metrics.

Every gate used by oracle sketching is diagonal in the computational basis, so
the accumulator :class:`DiagonalUnitary` stores only the phase vector and
composes by addition.  Dense matrices are used for everything else, which is
fine at the qubit counts reached here.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import ConvexHull, QhullError

__all__ = [
    "Tolerances",
    "TOL",
    "StateVector",
    "DenseUnitary",
    "DiagonalUnitary",
    "apply_multi_controlled_phase",
    "apply_zstring_rotation",
    "op_norm_diff",
    "diamond_distance_unitaries",
    "expected_unitary_gap",
    "raw_unitary_gap",
    "schur_diamond_bounds",
    "hull_distance_to_origin",
    "apply_gate",
    "embed_gate",
    "controlled",
    "kron_all",
    "random_unitary",
    "GATES",
]


@dataclass(frozen=True)
class Tolerances:
    """Central tolerance record shared by the whole package."""

    norm: float = 1e-10
    unitarity: float = 1e-10
    hull: float = 1e-12
    max_dense_qubits: int = 14


TOL = Tolerances()

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
GATES = {
    "i": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.diag([1, -1]).astype(complex),
    "h": _H,
    "s": np.diag([1, 1j]),
    "sdg": np.diag([1, -1j]),
    "t": np.diag([1, np.exp(1j * np.pi / 4)]),
    "cnot": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    "cz": np.diag([1, 1, 1, -1]).astype(complex),
    "swap": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
}


def _check_power_of_two(dim: int) -> int:
    n = int(round(np.log2(dim))) if dim > 0 else -1
    if n < 0 or 2**n != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


@dataclass
class StateVector:
    """Pure state on ``n_qubits`` qubits (qubit 0 is the most significant bit)."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if self.amplitudes.size != 2**self.n_qubits:
            raise ValueError("amplitude length must be 2**n_qubits")

    @classmethod
    def zero(cls, n_qubits: int) -> "StateVector":
        amp = np.zeros(2**n_qubits, dtype=complex)
        amp[0] = 1.0
        return cls(n_qubits, amp)

    @classmethod
    def from_vector(cls, vec, normalize: bool = True) -> "StateVector":
        vec = np.asarray(vec, dtype=complex)
        n = _check_power_of_two(vec.size)
        if normalize:
            nrm = np.linalg.norm(vec)
            if nrm == 0:
                raise ValueError("cannot normalize the zero vector")
            vec = vec / nrm
        return cls(n, vec)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def is_normalized(self, tol: float = TOL.norm) -> bool:
        return abs(self.norm() - 1.0) <= tol

    def apply(self, gate: np.ndarray, targets) -> "StateVector":
        return StateVector(self.n_qubits, apply_gate(self.amplitudes, gate, targets, self.n_qubits))

    def apply_diagonal(self, acc: "DiagonalUnitary") -> "StateVector":
        if acc.n_qubits != self.n_qubits:
            raise ValueError("qubit count mismatch")
        return StateVector(self.n_qubits, self.amplitudes * np.exp(1j * acc.phases))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass
class DenseUnitary:
    """Unitary matrix, validated on construction."""

    entries: np.ndarray
    check: bool = True

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=complex)
        if self.entries.ndim != 2 or self.entries.shape[0] != self.entries.shape[1]:
            raise ValueError("unitary must be a square matrix")
        if self.check and unitarity_deviation(self.entries) > TOL.unitarity * max(1, self.dim):
            raise ValueError("matrix is not unitary")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def from_gates(cls, n_qubits: int, gates) -> "DenseUnitary":
        """Compose ``[(matrix, targets), ...]`` applied left to right in time."""
        u = np.eye(2**n_qubits, dtype=complex)
        for g, targets in gates:
            u = apply_gate(u, g, targets, n_qubits)
        return cls(u)

    def adjoint(self) -> "DenseUnitary":
        return DenseUnitary(self.entries.conj().T, check=False)

    def __matmul__(self, other: "DenseUnitary") -> "DenseUnitary":
        return DenseUnitary(self.entries @ other.entries, check=False)


def unitarity_deviation(u: np.ndarray) -> float:
    u = np.asarray(u)
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[1]))))


@dataclass
class DiagonalUnitary:
    """``exp(i diag(phases))`` with phases accumulated in radians.

    Composition adds phases and the adjoint negates them, so a product of
    commuting sketch gates never leaves this representation.
    """

    n_qubits: int
    phases: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.phases is None:
            self.phases = np.zeros(2**self.n_qubits)
        self.phases = np.asarray(self.phases, dtype=float).reshape(-1).copy()
        if self.phases.size != 2**self.n_qubits:
            raise ValueError("phase vector length must be 2**n_qubits")

    @property
    def dim(self) -> int:
        return self.phases.size

    def diag(self) -> np.ndarray:
        return np.exp(1j * self.phases)

    def matrix(self) -> np.ndarray:
        return np.diag(self.diag())

    def compose(self, other: "DiagonalUnitary") -> "DiagonalUnitary":
        if other.n_qubits != self.n_qubits:
            raise ValueError("qubit count mismatch")
        return DiagonalUnitary(self.n_qubits, self.phases + other.phases)

    def adjoint(self) -> "DiagonalUnitary":
        return DiagonalUnitary(self.n_qubits, -self.phases)

    def controlled(self) -> "DiagonalUnitary":
        """Control qubit prepended as the most significant qubit."""
        return DiagonalUnitary(self.n_qubits + 1, np.concatenate([np.zeros(self.dim), self.phases]))


def apply_multi_controlled_phase(target, basis_index: int, angle: float):
    """Add ``angle`` to the phase of a single computational basis state.

    Works in place on a :class:`DiagonalUnitary` (returned) or returns a new
    :class:`StateVector`.
    """
    dim = target.dim if isinstance(target, DiagonalUnitary) else target.amplitudes.size
    if not 0 <= int(basis_index) < dim:
        raise ValueError(f"basis index {basis_index} outside [0, {dim})")
    if isinstance(target, DiagonalUnitary):
        target.phases[int(basis_index)] += angle
        return target
    amp = target.amplitudes.copy()
    amp[int(basis_index)] *= np.exp(1j * angle)
    return StateVector(target.n_qubits, amp)


def _parity(values: np.ndarray) -> np.ndarray:
    v = np.asarray(values, dtype=np.uint64).copy()
    out = np.zeros(v.shape, dtype=np.uint64)
    while np.any(v):
        out ^= v & np.uint64(1)
        v >>= np.uint64(1)
    return out.astype(np.int64)


def zstring_signs(n_qubits: int, support_mask: int) -> np.ndarray:
    """``(-1)^{popcount(u & mask)}`` for every basis index ``u``."""
    if not 0 <= int(support_mask) < 2**n_qubits:
        raise ValueError("support mask outside the register")
    u = np.arange(2**n_qubits, dtype=np.uint64)
    return 1 - 2 * _parity(u & np.uint64(support_mask))


def apply_zstring_rotation(target, support_mask: int, angle: float):
    """Apply ``exp(i angle Z_{w1} ... Z_{wk})`` where the ``w`` are the mask bits."""
    n = target.n_qubits
    signs = zstring_signs(n, support_mask)
    if isinstance(target, DiagonalUnitary):
        target.phases += angle * signs
        return target
    return StateVector(n, target.amplitudes * np.exp(1j * angle * signs))


def op_norm_diff(a, b) -> float:
    """Spectral norm ``||A - B||``."""
    a = a.entries if isinstance(a, DenseUnitary) else np.asarray(a)
    b = b.entries if isinstance(b, DenseUnitary) else np.asarray(b)
    if a.shape != b.shape:
        raise ValueError("shape mismatch")
    d = a - b
    if d.ndim == 1:
        return float(np.max(np.abs(d))) if d.size else 0.0
    return float(np.linalg.norm(d, 2))


def hull_distance_to_origin(points: np.ndarray, tol: float = TOL.hull) -> float:
    """Distance from 0 to the convex hull of complex ``points``."""
    pts = np.asarray(points, dtype=complex).reshape(-1)
    xy = np.column_stack([pts.real, pts.imag])
    if np.min(np.abs(pts)) <= tol:
        return 0.0
    # single point or collinear set: distance to the spanning segment
    centered = xy - xy.mean(axis=0)
    if np.linalg.matrix_rank(centered, tol=1e-9) < 2:
        direction = centered[np.argmax(np.linalg.norm(centered, axis=1))]
        if np.linalg.norm(direction) < tol:
            return float(np.linalg.norm(xy[0]))
        u = direction / np.linalg.norm(direction)
        proj = centered @ u
        a = xy.mean(axis=0) + proj.min() * u
        b = xy.mean(axis=0) + proj.max() * u
        return _segment_distance(a, b)
    try:
        hull = ConvexHull(xy)
    except QhullError:
        return float(np.min(np.linalg.norm(xy, axis=1)))
    # hull.equations rows are (normal, offset) with normal.x + offset <= 0 inside
    if np.all(hull.equations[:, 2] <= tol):
        return 0.0
    verts = xy[hull.vertices]
    return min(
        _segment_distance(verts[k], verts[(k + 1) % len(verts)]) for k in range(len(verts))
    )


def _segment_distance(a: np.ndarray, b: np.ndarray) -> float:
    ab = b - a
    denom = float(ab @ ab)
    s = 0.0 if denom == 0 else float(np.clip(-(a @ ab) / denom, 0.0, 1.0))
    return float(np.linalg.norm(a + s * ab))


def diamond_distance_unitaries(u, v) -> float:
    """Exact diamond distance between the channels ``U(.)U^dag`` and ``V(.)V^dag``.

    Equals ``2 sqrt(1 - d^2)`` with ``d`` the distance from the origin to the
    convex hull of the spectrum of ``U^dag V``.
    """
    u = u.entries if isinstance(u, DenseUnitary) else np.asarray(u, dtype=complex)
    v = v.entries if isinstance(v, DenseUnitary) else np.asarray(v, dtype=complex)
    for m in (u, v):
        if unitarity_deviation(m) > 1e-8:
            raise ValueError("diamond_distance_unitaries needs unitary inputs")
    eig = np.linalg.eigvals(u.conj().T @ v)
    d = min(1.0, hull_distance_to_origin(eig))
    return float(2.0 * np.sqrt(max(0.0, 1.0 - d * d)))


def schur_diamond_bounds(D, rng: np.random.Generator | None = None, restarts: int = 8) -> tuple[float, float]:
    """Bounds on the diamond norm of the Schur-multiplier map ``rho -> D * rho``.

    Differences of diagonal mixed-unitary channels have this form, with
    ``D = u u^dag - E[v v^dag]``.  For Hermitian ``D`` the norm equals
    ``max ||diag(a) D diag(a)||_1`` over unit ``a >= 0``; the lower value is
    that maximum found by multistart local search, the upper value is the
    factorization bound ``max_x sum_k |lambda_k| |V_xk|^2`` from the
    eigendecomposition.
    """
    D = np.asarray(D, dtype=complex)
    if not np.allclose(D, D.conj().T, atol=1e-12):
        raise ValueError("Schur multiplier must be Hermitian")
    lam, V = np.linalg.eigh(D)
    upper = float(np.max((np.abs(V) ** 2) @ np.abs(lam)))
    d = D.shape[0]
    rng = rng or np.random.default_rng(0)

    def neg(z):
        nz = z @ z
        if nz == 0:
            return 0.0
        return -float(np.abs(np.linalg.eigvalsh(z[:, None] * D * z[None, :] / nz)).sum())

    starts = [np.ones(d)] + [rng.random(d) for _ in range(restarts)] + [np.eye(d)[i] + 0.1 for i in range(d)]
    lower = max(-minimize(neg, z0, method="L-BFGS-B").fun for z0 in starts)
    return float(min(lower, upper)), upper


def raw_unitary_gap(u_target, ev) -> float:
    """``||U - E[V]||``, the quantity plotted by the scaling benchmarks."""
    u = u_target.entries if isinstance(u_target, DenseUnitary) else np.asarray(u_target)
    ev = np.asarray(ev)
    if u.ndim == 1 and ev.ndim == 1:
        return op_norm_diff(u, ev)
    if u.ndim == 1:
        u = np.diag(u)
    if ev.ndim == 1:
        ev = np.diag(ev)
    return op_norm_diff(u, ev)


def expected_unitary_gap(u_target, ev) -> float:
    """Certified diamond proxy ``4 ||U - E[V]||``.

    Upper bounds ``1/2 ||U(.)U^dag - E[V(.)V^dag]||_diamond``.  Diagonal
    inputs may be passed as 1-D arrays.
    """
    return 4.0 * raw_unitary_gap(u_target, ev)


def kron_all(mats) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def apply_gate(states: np.ndarray, gate: np.ndarray, targets, n_qubits: int) -> np.ndarray:
    """Apply ``gate`` on qubits ``targets`` to a vector or to every column of a matrix."""
    targets = [int(t) for t in np.atleast_1d(targets)]
    k = len(targets)
    gate = np.asarray(gate)
    if gate.shape != (2**k, 2**k):
        raise ValueError("gate size does not match its targets")
    if len(set(targets)) != k or min(targets) < 0 or max(targets) >= n_qubits:
        raise ValueError("invalid target qubits")
    states = np.asarray(states)
    vec = states.ndim == 1
    cols = 1 if vec else states.shape[1]
    psi = states.reshape([2] * n_qubits + [cols])
    g = gate.reshape([2] * (2 * k))
    out = np.tensordot(g, psi, axes=(list(range(k, 2 * k)), targets))
    # tensordot puts the gate output axes first; move them back
    rest = [q for q in range(n_qubits) if q not in targets]
    order = targets + rest + [n_qubits]
    out = np.moveaxis(out, list(range(n_qubits + 1)), order)
    out = out.reshape(2**n_qubits, cols)
    return out[:, 0] if vec else out


def embed_gate(gate: np.ndarray, targets, n_qubits: int) -> np.ndarray:
    """Full ``2^n x 2^n`` matrix of ``gate`` acting on ``targets``."""
    return apply_gate(np.eye(2**n_qubits, dtype=complex), gate, targets, n_qubits)


def controlled(u: np.ndarray) -> np.ndarray:
    """``|0><0| x I + |1><1| x U`` with the control as most significant qubit."""
    u = np.asarray(u, dtype=complex)
    d = u.shape[0]
    out = np.zeros((2 * d, 2 * d), dtype=complex)
    out[:d, :d] = np.eye(d)
    out[d:, d:] = u
    return out


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Gaussian matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph
