"""Sample-complexity benchmarks, log-log scaling fits and qubit accounting.

Each grid point builds one oracle instance and records the operator-norm
gap between the ideal oracle and the expected sketch (Euclidean error for
state preparation).  Points are independent jobs; rows are sorted before
writing so output is byte-identical for a fixed grid and seed.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .datagen import iid_uniform_boolean, make_rng, vector_stream
from .linalg import (
    SparseMatrixSpec,
    counter_phases,
    expected_cumulative_counter,
    sketch_sparse_element_oracle,
    sketch_state,
)
from .sketch import expected_oracle_montecarlo, expected_phase_oracle_iid

__all__ = [
    "KINDS",
    "CSV_FIELDS",
    "BenchmarkGrid",
    "GridTooExpensive",
    "FitResult",
    "run_benchmark",
    "write_csv",
    "read_csv",
    "fit_loglog",
    "leave_one_out_shift",
    "memory_calc",
    "render_svg",
]

KINDS = ("boolean", "vector", "matrix_element", "matrix_index")
CSV_FIELDS = ("kind", "dim", "nnz", "m_samples", "trial", "seed", "metric", "value")

# rough per-unit costs (seconds) used by the pre-flight estimate
_COST_EXPECTED = 2e-4
_COST_SAMPLED = 5e-8


class GridTooExpensive(ValueError):
    """Raised before running a grid whose estimated wall clock exceeds the budget."""


def _logspace_int(lo: float, hi: float, count: int) -> list[int]:
    return sorted({int(round(v)) for v in np.geomspace(lo, hi, count)})


@dataclass
class BenchmarkGrid:
    """Benchmark grid; :meth:`desk` and :meth:`full_scale` give the default shapes.

    ``nnz`` holds nonzero counts for ``matrix_element`` and the row sparsity
    for ``matrix_index``; it is ignored by the other kinds.
    """

    kind: str
    dims: list[int]
    sample_sizes: list[int]
    trials: int = 20
    seed: int = 0
    mode: str = "expected"
    nnz: list[int] = field(default_factory=list)
    mc_trials: int = 200
    max_seconds: float = 600.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.mode not in ("expected", "sampled"):
            raise ValueError("mode must be 'expected' or 'sampled'")
        if self.mode == "sampled" and self.kind != "boolean":
            raise ValueError("sampled spot checks are implemented for the boolean kind")
        if not self.dims or not self.sample_sizes or self.trials < 1:
            raise ValueError("empty grid")
        if self.kind == "matrix_element" and not self.nnz:
            raise ValueError("matrix_element grids need nnz values")

    @classmethod
    def desk(cls, kind: str, seed: int = 0, mode: str = "expected") -> "BenchmarkGrid":
        if kind == "boolean":
            # M >= 40 N keeps every point in the linear regime of the closed form
            return cls(kind, _logspace_int(16, 256, 12), _logspace_int(1e4, 1e7, 10), 20, seed, mode)
        if kind == "vector":
            return cls(kind, [8, 16, 32, 64], _logspace_int(1e4, 1e6, 8), 10, seed, mode)
        if kind == "matrix_element":
            return cls(kind, [64], _logspace_int(1e4, 1e6, 8), 5, seed, mode, nnz=[64, 128, 256, 512])
        if kind == "matrix_index":
            return cls(kind, [16, 32, 64, 128], _logspace_int(1e5, 1e7, 8), 3, seed, mode, nnz=[8])
        raise ValueError(f"kind must be one of {KINDS}")

    @classmethod
    def full_scale(cls, kind: str, seed: int = 0) -> "BenchmarkGrid":
        """The full protocol shapes; expect long wall-clock times."""
        if kind == "boolean":
            return cls(kind, _logspace_int(100, 1000, 12), _logspace_int(1e5, 1e8, 10), 100, seed,
                       max_seconds=math.inf)
        if kind == "vector":
            return cls(kind, [128, 256, 512, 1024], _logspace_int(1e5, 1e8, 10), 10, seed,
                       max_seconds=math.inf)
        if kind == "matrix_element":
            return cls(kind, [100], _logspace_int(1e5, 1e8, 10), 200, seed,
                       nnz=_logspace_int(250, 2000, 8), max_seconds=math.inf)
        if kind == "matrix_index":
            return cls(kind, [50, 100, 200, 500], _logspace_int(1e5, 1e8, 10), 5, seed, nnz=[8],
                       max_seconds=math.inf)
        raise ValueError(f"kind must be one of {KINDS}")

    @classmethod
    def from_json(cls, text: str) -> "BenchmarkGrid":
        return cls(**json.loads(text))

    def to_json(self) -> str:
        d = asdict(self)
        if math.isinf(d["max_seconds"]):
            d["max_seconds"] = 1e300
        return json.dumps(d, sort_keys=True)

    def estimated_seconds(self) -> float:
        if self.mode == "sampled":
            units = sum(self.sample_sizes) * self.mc_trials * len(self.dims) * self.trials
            return units * _COST_SAMPLED
        points = len(self.dims) * max(1, len(self.nnz)) * len(self.sample_sizes) * self.trials
        weight = max(self.dims) / 64 if self.kind in ("matrix_element", "matrix_index") else 1.0
        return points * _COST_EXPECTED * weight


# --------------------------------------------------------------------------
# per-kind jobs


def _boolean_rows(grid: BenchmarkGrid, dim: int, trial: int) -> list[dict]:
    seed = grid.seed
    rng = make_rng(seed, 1, dim, trial)
    f = rng.integers(0, 2, dim)
    p = np.full(dim, 1.0 / dim)
    t = math.pi * dim
    ideal = np.exp(1j * math.pi * f)
    rows = []
    for M in grid.sample_sizes:
        if grid.mode == "expected":
            ev = expected_phase_oracle_iid(p, f, t, M)
        else:
            ev, _ = expected_oracle_montecarlo(
                lambda k, M=M: iid_uniform_boolean(f, seed=seed, stream_id=hash((dim, trial, M, k)) & 0x7FFFFFFF),
                t, M, trials=grid.mc_trials)
        rows.append(_row(grid, dim, dim, M, trial, "op_norm_gap", float(np.max(np.abs(ideal - ev)))))
    return rows


def _vector_rows(grid: BenchmarkGrid, dim: int, trial: int) -> list[dict]:
    rng = make_rng(grid.seed, 2, dim, trial)
    b = rng.normal(size=dim)
    b /= np.linalg.norm(b)
    stream = vector_stream(b, seed=grid.seed)
    rows = []
    for M in grid.sample_sizes:
        res = sketch_state(stream, dim, mode="no_amplification", M=M, seed=grid.seed + trial)
        rows.append(_row(grid, dim, dim, M, trial, "euclidean_error", res.error))
    return rows


def _random_spec(rng, dim: int, nnz: int, b: int = 8) -> SparseMatrixSpec:
    flat = rng.choice(dim * dim, nnz, replace=False)
    rows, cols = np.divmod(flat, dim)
    s_r = int(np.bincount(rows, minlength=dim).max())
    s_c = int(np.bincount(cols, minlength=dim).max())
    scale = 2 ** (b - 1)
    vals = rng.integers(1, scale, nnz) * rng.choice([-1, 1], nnz) / scale
    vals = vals / max(s_r, s_c)
    vals = np.round(vals * scale) / scale
    vals[vals == 0] = 1 / scale
    return SparseMatrixSpec(1 << max(1, math.ceil(math.log2(dim))), rows, cols, vals, s_r, s_c, b)


def _element_rows(grid: BenchmarkGrid, dim: int, trial: int) -> list[dict]:
    rows = []
    for nnz in grid.nnz:
        spec = _random_spec(make_rng(grid.seed, 3, dim, nnz, trial), dim, nnz)
        for M in grid.sample_sizes:
            gap = sketch_sparse_element_oracle(spec, "expected", M).gap()
            rows.append(_row(grid, dim, nnz, M, trial, "op_norm_gap", gap))
    return rows


def _regular_row_pattern(rng, dim: int, s: int) -> SparseMatrixSpec:
    cols = np.concatenate([np.sort(rng.choice(dim, s, replace=False)) for _ in range(dim)])
    rows = np.repeat(np.arange(dim), s)
    s_c = int(np.bincount(cols, minlength=dim).max())
    vals = np.full(rows.size, 1.0 / max(s, s_c))
    return SparseMatrixSpec(1 << max(1, math.ceil(math.log2(dim))), rows, cols, vals, s, s_c)


def _index_rows(grid: BenchmarkGrid, dim: int, trial: int) -> list[dict]:
    # row access: the counter sketch is the only sampled part of the index oracle
    rows = []
    for s in grid.nnz:
        spec = _regular_row_pattern(make_rng(grid.seed, 4, dim, s, trial), dim, s)
        ideal = np.exp(1j * counter_phases(spec))
        for M in grid.sample_sizes:
            gap = float(np.max(np.abs(ideal - expected_cumulative_counter(spec, M))))
            rows.append(_row(grid, dim, spec.K, M, trial, "op_norm_gap", gap))
    return rows


_JOBS = {"boolean": _boolean_rows, "vector": _vector_rows,
         "matrix_element": _element_rows, "matrix_index": _index_rows}


def _row(grid, dim, nnz, M, trial, metric, value) -> dict:
    return {"kind": grid.kind, "dim": int(dim), "nnz": int(nnz), "m_samples": int(M), "trial": int(trial),
            "seed": int(grid.seed), "metric": metric, "value": float(value)}


def run_benchmark(grid: BenchmarkGrid, workers: int = 1) -> list[dict]:
    """Rows for every ``(instance, dim, M)`` of the grid, canonically ordered.

    Raises :class:`GridTooExpensive` when the pre-flight estimate exceeds
    ``grid.max_seconds``.
    """
    est = grid.estimated_seconds()
    if est > grid.max_seconds:
        raise GridTooExpensive(f"estimated {est:.0f} s exceeds the budget of {grid.max_seconds:.0f} s")
    job = _JOBS[grid.kind]
    tasks = [(d, tr) for d in grid.dims for tr in range(grid.trials)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(lambda a: job(grid, *a), tasks))
    else:
        parts = [job(grid, *a) for a in tasks]
    rows = [r for part in parts for r in part]
    rows.sort(key=lambda r: (r["dim"], r["nnz"], r["m_samples"], r["trial"]))
    return rows


def write_csv(rows: list[dict], out=None) -> str:
    """Serialize rows (``repr`` floats for exact round trips); writes to ``out`` if given."""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({**r, "value": repr(float(r["value"]))})
    text = buf.getvalue()
    if out is not None:
        if hasattr(out, "write"):
            out.write(text)
        else:
            with open(out, "w", newline="") as fh:
                fh.write(text)
    return text


def read_csv(src) -> list[dict]:
    fh = open(src, newline="") if isinstance(src, str) else src
    try:
        rows = []
        for r in csv.DictReader(fh):
            rows.append({k: (r[k] if k in ("kind", "metric") else int(r[k])) for k in CSV_FIELDS if k != "value"}
                        | {"value": float(r["value"])})
        return rows
    finally:
        if isinstance(src, str):
            fh.close()


# --------------------------------------------------------------------------
# fitting


@dataclass
class FitResult:
    """``value ~ constant * prod_r x_r ** exponents[r]`` fitted by OLS on logs."""

    exponents: dict[str, float]
    constant: float
    rms_rel_err: float
    rms_log_residual: float
    n_points: int
    dropped_zero: int = 0

    def exponent(self, name: str) -> float:
        return self.exponents[name]


_ALIASES = {"N": "dim", "M": "m_samples", "nnz": "nnz", "N_nnz": "nnz", "dim": "dim", "m_samples": "m_samples"}


def _parse_model(model) -> list[str]:
    names = model.split(",") if isinstance(model, str) else list(model)
    try:
        return [_ALIASES[n.strip()] for n in names]
    except KeyError as e:
        raise ValueError(f"unknown regressor {e.args[0]!r}") from None


def fit_loglog(rows: list[dict], model="N,M") -> FitResult:
    """Least squares on ``log value = log C + sum_r e_r log x_r``.

    ``model`` names the regressors (``N``, ``M``, ``nnz``).  Rows with zero
    error (e.g. an all-zero truth table) carry no scaling information and
    are dropped.  Grids without variation in a regressor are rejected.
    """
    names = _parse_model(model)
    keep = [r for r in rows if r["value"] > 0]
    y = np.log([r["value"] for r in keep])
    cols = [np.log([float(r[n]) for r in keep]) for n in names]
    for n, c in zip(names, cols):
        if c.size == 0 or np.ptp(c) == 0:
            raise ValueError(f"degenerate grid: no variation in {n}")
    X = np.column_stack([np.ones(len(keep))] + cols)
    if len(keep) <= X.shape[1]:
        raise ValueError("degenerate grid: too few points for the model")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    pred = X @ coef
    rel = np.exp(pred - y) - 1.0  # (fit - value) / value
    return FitResult({n: float(c) for n, c in zip(names, coef[1:])}, float(math.exp(coef[0])),
                     float(np.sqrt(np.mean(rel**2))), float(np.sqrt(np.mean((pred - y) ** 2))),
                     len(keep), len(rows) - len(keep))


def leave_one_out_shift(rows: list[dict], model="N,M") -> float:
    """Largest change of any exponent when a single row is removed."""
    base = fit_loglog(rows, model).exponents
    worst = 0.0
    for i in range(len(rows)):
        sub = fit_loglog(rows[:i] + rows[i + 1:], model).exponents
        worst = max(worst, max(abs(sub[k] - base[k]) for k in base))
    return worst


# --------------------------------------------------------------------------
# memory accounting


def _clog2(x: int) -> int:
    return (int(x) - 1).bit_length()


def memory_calc(task: str, N: int, D: int, s: int) -> int:
    """Qubits used by the sketched pipeline for one prediction.

    lssvm: ``2 ceil(log2(N + 2D)) + ceil(log2(s + 1)) + 4``;
    pca: ``2 ceil(log2(N + D)) + ceil(log2 s) + 4``.
    """
    if min(N, D, s) < 1:
        raise ValueError("N, D and s must be positive")
    if task == "lssvm":
        return 2 * _clog2(N + 2 * D) + _clog2(s + 1) + 4
    if task == "pca":
        return 2 * _clog2(N + D) + _clog2(s) + 4
    raise ValueError("task must be 'lssvm' or 'pca'")


# --------------------------------------------------------------------------
# plotting


def render_svg(rows: list[dict], fit: FitResult | None = None, width: int = 480, height: int = 360) -> str:
    """Self-contained log-log scatter of error against ``M``, one series per dim, fit overlaid."""
    pts = [r for r in rows if r["value"] > 0]
    if not pts:
        raise ValueError("nothing to plot")
    lx = np.log10([r["m_samples"] for r in pts])
    ly = np.log10([r["value"] for r in pts])
    x0, x1 = lx.min(), lx.max() + 1e-9
    y0, y1 = ly.min(), ly.max() + 1e-9
    pad = 40

    def sx(v):
        return pad + (v - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(v):
        return height - pad - (v - y0) / (y1 - y0) * (height - 2 * pad)

    dims = sorted({r["dim"] for r in pts})
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<text x="{width / 2}" y="{height - 8}" text-anchor="middle" font-size="12">log10 M</text>',
             f'<text x="12" y="{height / 2}" font-size="12" transform="rotate(-90 12 {height / 2})">log10 error</text>']
    for k, d in enumerate(dims):
        hue = int(360 * k / max(1, len(dims)))
        for a, b, r in zip(lx, ly, pts):
            if r["dim"] == d:
                parts.append(f'<circle cx="{sx(a):.1f}" cy="{sy(b):.1f}" r="2" fill="hsl({hue},70%,45%)"/>')
        if fit is not None and "m_samples" in fit.exponents:
            sub = [r for r in pts if r["dim"] == d]
            xs = np.array([x0, x1])
            pred = math.log10(fit.constant) + fit.exponents["m_samples"] * xs
            for name, e in fit.exponents.items():
                if name != "m_samples":
                    pred = pred + e * math.log10(float(np.mean([r[name] for r in sub])))
            parts.append(f'<line x1="{sx(xs[0]):.1f}" y1="{sy(pred[0]):.1f}" x2="{sx(xs[1]):.1f}" '
                         f'y2="{sy(pred[1]):.1f}" stroke="hsl({hue},70%,45%)"/>')
    parts.append("</svg>")
    return "\n".join(parts)
