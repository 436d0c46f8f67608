"""Polynomial targets, phase factors and the alternating-phase QSVT circuit.

Phases are solved in the ``Wx`` signal convention with symmetric phase
vectors (Newton iteration on the reduced phases) and converted to the
reflection convention used by the circuit

    U_Phi = e^{i psi_0 Z_Pi} U e^{i psi_1 Z_Pi} U^dag ... (time runs right to left)

where ``Z_Pi = 2 Pi - I`` is the reflection about the ancilla-zero projector.
Symmetric phases give a complex polynomial whose real part is the target;
the real part is taken with one extra qubit by averaging ``Phi`` and
``-Phi`` (a two-term linear combination of unitaries).
"""
from __future__ import annotations

import json
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.special import erf, erfcinv

__all__ = [
    "PolynomialTarget",
    "PhaseSequence",
    "build_threshold_poly",
    "build_sign_poly",
    "build_arcsin_poly",
    "build_inverse_poly",
    "build_linear_poly",
    "build_filter_poly",
    "solve_phases",
    "qsp_poly_wx",
    "qsvt_apply_spectral",
    "qsvt_apply_circuit",
    "qsvt_apply_states",
    "qsvt_block_2x2",
    "qsvt_lcu_unitary",
    "poly_and_phases",
    "wx_to_reflection",
    "to_reflection_sequence",
    "to_wx_sequence",
    "phases_to_json",
    "phases_from_json",
    "DEFAULT_DEGREE_CAP",
]

DEFAULT_DEGREE_CAP = 200
GRID_POINTS = 10_000


@dataclass
class PolynomialTarget:
    """Bounded polynomial in the Chebyshev basis with a declared accuracy domain."""

    kind: str
    coeffs: np.ndarray
    parity: int
    eps: float
    ideal: Callable
    domain: list  # list of (lo, hi) intervals where |P - ideal| <= eps
    meta: dict = field(default_factory=dict)

    @property
    def degree(self) -> int:
        nz = np.nonzero(np.abs(self.coeffs) > 0)[0]
        return int(nz[-1]) if nz.size else 0

    def __call__(self, x):
        return C.chebval(np.asarray(x, dtype=float), self.coeffs)

    def domain_grid(self, n: int = GRID_POINTS) -> np.ndarray:
        pts = [np.linspace(lo, hi, max(2, n // len(self.domain))) for lo, hi in self.domain]
        return np.concatenate(pts)

    def max_error(self, n: int = GRID_POINTS) -> float:
        x = self.domain_grid(n)
        return float(np.max(np.abs(self(x) - self.ideal(x))))

    def sup_norm(self, n: int = GRID_POINTS) -> float:
        return float(np.max(np.abs(self(np.linspace(-1, 1, n)))))

    def check(self, n: int = GRID_POINTS) -> bool:
        return self.max_error(n) <= self.eps and self.sup_norm(n) <= 1.0 + 1e-12


def _fit_with_parity(func: Callable, degree: int, parity: int) -> np.ndarray:
    coeffs = C.chebinterpolate(func, degree)
    coeffs[(np.arange(coeffs.size) % 2) != parity] = 0.0
    return coeffs


def _search_degree(kind, func, ideal, domain, eps, parity, cap, meta) -> PolynomialTarget:
    """Smallest parity-matching degree (doubling, then bisection) passing the grid check."""
    grid_all = np.linspace(-1, 1, GRID_POINTS)

    def attempt(d):
        coeffs = _fit_with_parity(func, d, parity)
        sup = np.max(np.abs(C.chebval(grid_all, coeffs)))
        scale = 1.0
        if sup > 1.0:
            scale = 1.0 / sup
            coeffs = coeffs * scale
        p = PolynomialTarget(kind, coeffs, parity, eps, ideal, domain, dict(meta))
        p.meta["post_scale"] = scale
        return p if p.check() else None

    def fix(d):
        return d + ((d - parity) % 2)

    d = fix(max(parity, 1))
    found = None
    while d <= cap:
        found = attempt(d)
        if found is not None:
            break
        d = fix(2 * d if d > 1 else 2)
    if found is None:
        last = fix(cap) if fix(cap) <= cap else fix(cap) - 2
        found = attempt(last)
        if found is None:
            raise ValueError(f"{kind} polynomial needs degree above the cap {cap}")
        return found
    lo = fix(max(parity, d // 2))
    hi = d
    while hi - lo > 2:
        mid = fix((lo + hi) // 2)
        if mid >= hi:
            break
        cand = attempt(mid)
        if cand is not None:
            hi, found = mid, cand
        else:
            lo = mid
    return found


def build_threshold_poly(lambda_star: float, eps: float, cap: int = DEFAULT_DEGREE_CAP) -> PolynomialTarget:
    """Even ``P`` with ``P ~ 1`` on ``[0, lambda*/2]`` and ``P ~ -1`` on ``[lambda*, 1]``."""
    if not 0 < lambda_star < 1:
        raise ValueError("lambda_star must lie in (0, 1)")
    if not 0 < eps < 2 * np.sqrt(2 / (np.e * np.pi)):
        raise ValueError("eps outside the admissible range")
    c = 0.75 * lambda_star
    k = erfcinv(eps / 4) / (0.25 * lambda_star)

    def smooth(x):
        return erf(k * (c - x)) + erf(k * (c + x)) - 1.0

    def ideal(x):
        return np.where(np.abs(x) <= c, 1.0, -1.0)

    domain = [(-1, -lambda_star), (-lambda_star / 2, lambda_star / 2), (lambda_star, 1)]
    return _search_degree("threshold", smooth, ideal, domain, eps, 0, cap,
                          {"lambda_star": lambda_star, "k": k})


def build_sign_poly(lambda_star: float, eps: float, cap: int = DEFAULT_DEGREE_CAP) -> PolynomialTarget:
    """Odd ``P ~ sign(x)`` for ``|x| >= lambda*``."""
    if not 0 < lambda_star < 1:
        raise ValueError("lambda_star must lie in (0, 1)")
    k = erfcinv(eps / 2) / lambda_star

    def smooth(x):
        return erf(k * x)

    domain = [(-1, -lambda_star), (lambda_star, 1)]
    return _search_degree("sign", smooth, np.sign, domain, eps, 1, cap,
                          {"lambda_star": lambda_star, "k": k})


def _window(x, half_width, k):
    return 0.5 * (erf(k * (x + half_width)) - erf(k * (x - half_width)))


def build_arcsin_poly(x_max: float, eps: float, cap: int = DEFAULT_DEGREE_CAP,
                      clamp: float | None = None) -> PolynomialTarget:
    """Odd ``P ~ arcsin(x) / arcsin(1)`` on ``|x| <= x_max``.

    The argument is smoothly clamped beyond ``x_max`` so the approximated
    function stays analytic on ``[-1, 1]``.
    """
    if not 0 < x_max < 1:
        raise ValueError("x_max must lie in (0, 1)")
    x1 = clamp if clamp is not None else min(0.98, x_max + 0.5 * (1 - x_max))
    k = erfcinv(eps / 4) / (x1 - x_max)
    scale = 1.0 / np.arcsin(1.0)

    def smooth(x):
        return scale * np.arcsin(np.clip(x * _window(x, x1, k), -1, 1))

    def ideal(x):
        return scale * np.arcsin(np.clip(x, -1, 1))

    return _search_degree("arcsin", smooth, ideal, [(-x_max, x_max)], eps, 1, cap,
                          {"x_max": x_max, "clamp": x1, "scale": scale})


def build_inverse_poly(kappa: float, eps: float, cap: int = 400) -> PolynomialTarget:
    """Odd ``P ~ gamma / (kappa x)`` on ``1/kappa <= |x| <= 1``.

    ``gamma <= 1/2`` is recorded in ``meta`` and chosen so ``|P| <= 1``.
    """
    if kappa < 1:
        raise ValueError("kappa must be at least 1")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    c = np.sqrt(np.log(1.0 / eps) + np.log(2.0))
    gamma = min(0.5, 0.95 / (0.6382 * c))

    def smooth(x):
        x = np.asarray(x, dtype=float)
        u = c * kappa * x
        safe = np.where(np.abs(u) < 1e-8, 1.0, u)
        val = np.where(np.abs(u) < 1e-8, u, -np.expm1(-safe**2) / safe)
        return gamma * c * val

    def ideal(x):
        return gamma / (kappa * np.asarray(x, dtype=float))

    domain = [(-1, -1 / kappa), (1 / kappa, 1)]
    return _search_degree("inverse", smooth, ideal, domain, eps, 1, cap,
                          {"kappa": kappa, "gamma": gamma})


def build_linear_poly(s: float, eps: float = 1e-8, x_max: float | None = None,
                      cap: int = 400) -> PolynomialTarget:
    """Odd ``P ~ s x`` on ``|x| <= x_max`` (default ``0.8 / s``), bounded by 1."""
    if s < 1:
        raise ValueError("amplification factor must be at least 1")
    if s == 1:
        coeffs = np.array([0.0, 1.0])
        return PolynomialTarget("linear", coeffs, 1, eps, lambda x: np.asarray(x, float),
                                [(-1, 1)], {"s": 1.0, "post_scale": 1.0})
    x_max = 0.8 / s if x_max is None else x_max
    if x_max >= 1.0 / s:
        raise ValueError("x_max must stay below 1/s")
    # window edge halfway to 1/s keeps the smooth target strictly below 1
    x1 = 0.5 * (x_max + 1.0 / s)
    k = erfcinv(eps / (2 * s)) / (x1 - x_max)

    def smooth(x):
        return s * x * _window(x, x1, k)

    return _search_degree("linear", smooth, lambda x: s * np.asarray(x, float),
                          [(-x_max, x_max)], eps, 1, cap, {"s": s, "x_max": x_max})


def build_filter_poly(lo: float, hi: float, eps: float, cap: int = 400) -> PolynomialTarget:
    """Even projector-like ``P ~ 0`` on ``|x| <= lo`` and ``P ~ 1`` on ``|x| >= hi``."""
    if not 0 <= lo < hi <= 1:
        raise ValueError("need 0 <= lo < hi <= 1")
    c = 0.5 * (lo + hi)
    k = erfcinv(eps / 2) / (0.5 * (hi - lo))

    def smooth(x):
        return 0.5 * (2.0 - erf(k * (c - x)) - erf(k * (c + x)))

    def ideal(x):
        return np.where(np.abs(x) >= c, 1.0, 0.0)

    domain = [(-1, -hi), (-lo, lo), (hi, 1)] if lo > 0 else [(-1, -hi), (0, 0), (hi, 1)]
    return _search_degree("filter", smooth, ideal, domain, eps, 0, cap, {"lo": lo, "hi": hi})


# --------------------------------------------------------------------------
# phase factors


@dataclass
class PhaseSequence:
    """Phase factors with a convention tag.

    ``wx``: ``d + 1`` symmetric phases of ``e^{i phi_0 Z} prod_k W(x) e^{i phi_k Z}``.
    ``reflection``: ``d`` phases ``phi_1..phi_d`` of the alternating
    ``Pi_phi`` / ``U`` / ``U^dag`` product (the first carries the merged end phases).
    """

    phis: np.ndarray
    convention: str = "wx"
    parity: int = 0
    residual: float = 0.0

    @property
    def degree(self) -> int:
        return len(self.phis) - 1 if self.convention == "wx" else len(self.phis)


def _wx_unitaries(x: np.ndarray, phis: np.ndarray) -> np.ndarray:
    """Products ``e^{i phi_0 Z} W e^{i phi_1 Z} ... W e^{i phi_d Z}`` per point."""
    x = np.asarray(x, dtype=float)
    s = np.sqrt(np.clip(1 - x * x, 0, None))
    W = np.empty((x.size, 2, 2), dtype=complex)
    W[:, 0, 0] = x
    W[:, 1, 1] = x
    W[:, 0, 1] = 1j * s
    W[:, 1, 0] = 1j * s
    out = np.zeros((x.size, 2, 2), dtype=complex)
    out[:, 0, 0] = np.exp(1j * phis[0])
    out[:, 1, 1] = np.exp(-1j * phis[0])
    for ph in phis[1:]:
        out = out @ W
        out[:, :, 0] *= np.exp(1j * ph)
        out[:, :, 1] *= np.exp(-1j * ph)
    return out


def qsp_poly_wx(x, phis) -> np.ndarray:
    """Complex ``<0| U_Phi(x) |0>`` in the ``Wx`` convention."""
    return _wx_unitaries(np.atleast_1d(x), np.asarray(phis, float))[:, 0, 0]


def _expand(reduced: np.ndarray, d: int) -> np.ndarray:
    full = np.empty(d + 1)
    for k in range(d + 1):
        full[k] = reduced[min(k, d - k)]
    return full


def _jacobian(x, reduced, d):
    """Re-part values and their derivatives in the reduced phases."""
    phis = _expand(reduced, d)
    n = x.size
    s = np.sqrt(np.clip(1 - x * x, 0, None))
    W = np.empty((n, 2, 2), dtype=complex)
    W[:, 0, 0] = x
    W[:, 1, 1] = x
    W[:, 0, 1] = 1j * s
    W[:, 1, 0] = 1j * s
    A = np.zeros((d + 1, 2, 2), dtype=complex)
    A[:, 0, 0] = np.exp(1j * phis)
    A[:, 1, 1] = np.exp(-1j * phis)
    # prefix L_k = A_0 W A_1 W ... A_{k-1} W ; suffix R_k = W A_{k+1} ... W A_d
    L = np.empty((d + 1, n, 2, 2), dtype=complex)
    cur = np.broadcast_to(np.eye(2, dtype=complex), (n, 2, 2)).copy()
    for k in range(d + 1):
        L[k] = cur
        cur = cur @ A[k]
        if k < d:
            cur = cur @ W
    Rm = np.empty((d + 1, n, 2, 2), dtype=complex)
    cur = np.broadcast_to(np.eye(2, dtype=complex), (n, 2, 2)).copy()
    for k in range(d, -1, -1):
        Rm[k] = cur
        cur = A[k] @ cur
        if k > 0:
            cur = W @ cur
    full_val = cur[:, 0, 0]
    # d/dphi_k <0|L A_k R|0>: A_k' = i Z A_k
    dA = np.zeros((d + 1, 2, 2), dtype=complex)
    dA[:, 0, 0] = 1j * np.exp(1j * phis)
    dA[:, 1, 1] = -1j * np.exp(-1j * phis)
    grads = np.einsum("kni,kij,knj->kn", L[:, :, 0, :], dA, Rm[:, :, :, 0])
    m = reduced.size
    J = np.zeros((n, m))
    for k in range(d + 1):
        J[:, min(k, d - k)] += grads[k].real
    return full_val.real, J


def solve_phases(poly: PolynomialTarget | np.ndarray, parity: int | None = None,
                 tol: float = 1e-12, max_iter: int = 100) -> PhaseSequence:
    """Symmetric ``Wx`` phases whose QSP real part equals the Chebyshev series.

    Newton iteration on the reduced phases, started from ``(pi/4, 0, ..., 0, pi/4)``.
    """
    coeffs = poly.coeffs if isinstance(poly, PolynomialTarget) else np.asarray(poly, float)
    if parity is None:
        parity = poly.parity if isinstance(poly, PolynomialTarget) else int(np.nonzero(coeffs)[0][-1] % 2)
    nz = np.nonzero(np.abs(coeffs) > 0)[0]
    d = int(nz[-1]) if nz.size else parity
    if d % 2 != parity:
        d += 1
    if d == 0:
        # constant target c: only e^{i phi_0 Z}, real part cos(phi_0)
        c0 = float(coeffs[0]) if coeffs.size else 0.0
        return PhaseSequence(np.array([np.arccos(np.clip(c0, -1, 1))]), "wx", 0, 0.0)
    m = (d + 2) // 2
    j = np.arange(1, m + 1)
    x = np.cos((2 * j - 1) * np.pi / (4 * m))
    target = C.chebval(x, coeffs)
    reduced = np.zeros(m)
    reduced[0] = np.pi / 4
    res = np.inf
    for _ in range(max_iter):
        val, J = _jacobian(x, reduced, d)
        r = val - target
        res = float(np.max(np.abs(r)))
        if res < tol:
            break
        step = np.linalg.lstsq(J, r, rcond=None)[0]
        reduced = reduced - step
    phis = _expand(reduced, d)
    check = np.linspace(-1, 1, 257)
    resid = float(np.max(np.abs(qsp_poly_wx(check, phis).real - C.chebval(check, coeffs))))
    return PhaseSequence(phis, "wx", parity, resid)


def wx_to_reflection(seq: PhaseSequence) -> tuple[np.ndarray, complex]:
    """Reflection-convention phases ``psi_0..psi_d`` and the global factor ``i^d``.

    ``<0|U_R(psi)|0> * i^d`` reproduces the ``Wx`` polynomial.
    """
    phis = np.asarray(seq.phis, float)
    d = phis.size - 1
    psi = phis - np.pi / 2
    psi[0] = phis[0] - np.pi / 4
    psi[-1] = phis[-1] - np.pi / 4
    if d == 0:
        psi = phis.copy()
    return psi, 1j**d


def to_reflection_sequence(seq: PhaseSequence) -> PhaseSequence:
    """``d`` circuit phases ``phi_1..phi_d`` (``phi_1`` applied last).

    The two end phases of the ``Wx`` form only multiply the zero block, so
    they merge with the global factor into the last reflection.
    """
    if seq.convention == "reflection":
        return seq
    psi, g = wx_to_reflection(seq)
    if psi.size == 1:
        if abs(np.mod(psi[0] + np.pi, 2 * np.pi) - np.pi) > 1e-12:
            raise ValueError("a non-trivial constant has no reflection-form circuit")
        return PhaseSequence(np.zeros(0), "reflection", seq.parity, seq.residual)
    merged = np.concatenate([[psi[0] + psi[-1] + np.angle(g)], psi[1:-1]])
    return PhaseSequence(np.mod(merged, 2 * np.pi), "reflection", seq.parity, seq.residual)


def to_wx_sequence(seq: PhaseSequence) -> PhaseSequence:
    """Inverse of :func:`to_reflection_sequence` (end phases split evenly)."""
    if seq.convention == "wx":
        return seq
    ref = np.asarray(seq.phis, float)
    d = ref.size
    if d == 0:
        return PhaseSequence(np.zeros(1), "wx", 0, seq.residual)
    arg_g = np.angle(1j**d)
    phis = np.empty(d + 1)
    phis[1:d] = ref[1:] + np.pi / 2
    end = 0.5 * (ref[0] - arg_g + np.pi / 2)
    phis[0] = phis[d] = end
    return PhaseSequence(phis, "wx", d % 2, seq.residual)


def phases_to_json(seq: PhaseSequence) -> str:
    return json.dumps({
        "degree": seq.degree,
        "parity": "even" if seq.parity == 0 else "odd",
        "convention": seq.convention,
        "phases": [float(p) for p in seq.phis],
    })


def phases_from_json(text: str) -> PhaseSequence:
    data = json.loads(text)
    phis = np.array(data["phases"], dtype=float)
    seq = PhaseSequence(phis, data.get("convention", "reflection"),
                        0 if data.get("parity", "even") == "even" else 1)
    if seq.degree != int(data["degree"]):
        raise ValueError("phase count does not match the declared degree")
    return seq


# --------------------------------------------------------------------------
# application


def qsvt_apply_spectral(A: np.ndarray, poly) -> np.ndarray:
    """``P(A)`` for Hermitian ``A`` with ``||A|| <= 1`` via eigendecomposition."""
    A = np.asarray(A)
    if not np.allclose(A, A.conj().T, atol=1e-10):
        raise ValueError("spectral mode needs a Hermitian matrix")
    lam, V = np.linalg.eigh(A)
    if np.max(np.abs(lam)) > 1 + 1e-9:
        raise ValueError("matrix norm exceeds 1")
    f = poly(lam) if callable(poly) else C.chebval(lam, poly)
    return (V * f) @ V.conj().T


def _reflect(states, proj_mask, psi):
    ph = np.where(proj_mask, np.exp(1j * psi), np.exp(-1j * psi))
    return states * ph[:, None]


def qsvt_apply_states(U, proj_mask: np.ndarray, seq: PhaseSequence, states: np.ndarray,
                      real_part: bool = True, U_dag=None, proj_in: np.ndarray | None = None) -> np.ndarray:
    """Apply the QSVT circuit to ``states`` (columns) and return the output columns.

    ``U`` is one matrix, or a length-``d`` sequence holding an independent
    realization per query (query ``k`` uses its entry, adjointed on even
    steps).  ``U_dag`` overrides the adjoint queries, e.g. for averaged
    operators.  With ``real_part`` the two phase signs are averaged; both
    branches share the same queries, as in the one-qubit LCU where only the
    phase rotations are controlled.  ``proj_in`` sets a different input-side
    projector (reflections before ``U`` and after ``U^dag``), as needed for
    amplitude amplification between ``|0>`` and a flagged subspace.
    """
    seq = to_wx_sequence(seq)
    d = len(seq.phis) - 1
    if isinstance(U, (list, tuple)) or np.ndim(U) == 3:
        fwd = [np.asarray(u) for u in U]
        if len(fwd) != d:
            raise ValueError("need one query realization per degree")
    else:
        fwd = [np.asarray(U)] * max(d, 1)
    if U_dag is None:
        bwd = [u.conj().T for u in fwd]
    elif isinstance(U_dag, (list, tuple)) or np.ndim(U_dag) == 3:
        bwd = [np.asarray(u) for u in U_dag]
    else:
        bwd = [np.asarray(U_dag)] * max(d, 1)
    states = np.asarray(states, dtype=complex)
    vec = states.ndim == 1
    states = states[:, None] if vec else states
    proj_mask = np.asarray(proj_mask, bool)
    p_in = proj_mask if proj_in is None else np.asarray(proj_in, bool)
    if proj_mask.size != states.shape[0] or fwd[0].shape[0] != states.shape[0]:
        raise ValueError("dimension mismatch between block encoding, projector and states")

    def run(sign):
        psi, g = wx_to_reflection(PhaseSequence(sign * np.asarray(seq.phis), "wx", seq.parity))
        out = _reflect(states, p_in, psi[-1])
        for k in range(1, d + 1):
            out = (fwd[k - 1] if k % 2 == 1 else bwd[k - 1]) @ out
            out = _reflect(out, proj_mask if k % 2 == 1 else p_in, psi[d - k])
        return g * out

    out = 0.5 * (run(1) + run(-1)) if real_part else run(1)
    return out[:, 0] if vec else out


def qsvt_apply_circuit(U, proj_mask: np.ndarray | None, seq: PhaseSequence,
                       controlled: bool = False, real_part: bool = True) -> np.ndarray:
    """Full circuit operator (projected on the LCU qubit when ``real_part``).

    With ``controlled`` the result acts on one more (most significant) qubit;
    control ``|0>`` runs the same product with all phases removed.
    """
    seq = to_wx_sequence(seq)
    if hasattr(U, "unitary"):
        proj_mask = U.proj_mask if proj_mask is None else proj_mask
        U = U.unitary
    dim = np.asarray(U).shape[0]
    op = qsvt_apply_states(U, proj_mask, seq, np.eye(dim, dtype=complex), real_part)
    if not controlled:
        return op
    idle = np.eye(dim, dtype=complex)
    d = len(seq.phis) - 1
    for k in range(1, d + 1):
        idle = (U if k % 2 == 1 else np.asarray(U).conj().T) @ idle
    out = np.zeros((2 * dim, 2 * dim), dtype=complex)
    out[:dim, :dim] = idle
    out[dim:, dim:] = op
    return out


_BUILDERS = {
    "threshold": lambda a: build_threshold_poly(*a),
    "sign": lambda a: build_sign_poly(*a),
    "arcsin": lambda a: build_arcsin_poly(*a),
    "inverse": lambda a: build_inverse_poly(*a),
    "linear": lambda a: build_linear_poly(*a),
    "filter": lambda a: build_filter_poly(*a),
}


@lru_cache(maxsize=512)
def poly_and_phases(kind: str, *args) -> tuple[PolynomialTarget, PhaseSequence]:
    """Memoized polynomial construction plus phase solve, keyed on the builder arguments."""
    if kind not in _BUILDERS:
        raise ValueError(f"unknown polynomial kind {kind!r}")
    poly = _BUILDERS[kind](args)
    return poly, solve_phases(poly)


def qsvt_lcu_unitary(U: np.ndarray, proj_mask: np.ndarray, seq: PhaseSequence) -> np.ndarray:
    """Full unitary of the real-part circuit, LCU qubit as the most significant qubit.

    ``H (|0><0| U_Phi + |1><1| U_{-Phi}) H``; projecting the LCU qubit on
    ``|0>`` leaves the averaged operator of :func:`qsvt_apply_circuit`.
    """
    dim = np.asarray(U).shape[0]
    eye = np.eye(dim, dtype=complex)
    plus = qsvt_apply_states(U, proj_mask, seq, eye, real_part=False)
    neg = PhaseSequence(-np.asarray(to_wx_sequence(seq).phis), "wx", seq.parity)
    minus = qsvt_apply_states(U, proj_mask, neg, eye, real_part=False)
    avg, dif = 0.5 * (plus + minus), 0.5 * (plus - minus)
    return np.block([[avg, dif], [dif, avg]])


def qsvt_block_2x2(W: np.ndarray, seq: PhaseSequence, W_dag: np.ndarray | None = None,
                   real_part: bool = True) -> np.ndarray:
    """Zero-zero block of the QSVT circuit for a batch of one-ancilla blocks.

    ``W`` has shape ``(n, 2, 2)``: one single-qubit block encoding per basis
    state of a register on which everything acts diagonally.  Shape
    ``(d, n, 2, 2)`` supplies an independent realization per query.
    """
    seq = to_wx_sequence(seq)
    d = len(seq.phis) - 1
    W = np.asarray(W, dtype=complex)
    if W.ndim == 3:
        W = np.broadcast_to(W, (max(d, 1),) + W.shape)
    if W.shape[0] < d:
        raise ValueError("need one query realization per degree")
    W_dag = np.conj(np.swapaxes(W, -1, -2)) if W_dag is None else np.asarray(W_dag, dtype=complex)
    if W_dag.ndim == 3:
        W_dag = np.broadcast_to(W_dag, (max(d, 1),) + W_dag.shape)
    n = W.shape[1]

    def run(sign):
        psi, g = wx_to_reflection(PhaseSequence(sign * np.asarray(seq.phis), "wx", seq.parity))
        vec = np.zeros((n, 2), dtype=complex)
        vec[:, 0] = np.exp(1j * psi[-1])
        for k in range(1, d + 1):
            M = W[k - 1] if k % 2 == 1 else W_dag[k - 1]
            vec = np.einsum("nij,nj->ni", M, vec)
            vec[:, 0] *= np.exp(1j * psi[d - k])
            vec[:, 1] *= np.exp(-1j * psi[d - k])
        return g * vec[:, 0]

    return 0.5 * (run(1) + run(-1)) if real_part else run(1)
