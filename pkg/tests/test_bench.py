import io
import math

import numpy as np
import pytest

from qsketch import bench


def _small(kind="boolean", **kw):
    return bench.BenchmarkGrid(kind, [16, 32, 64], [10**4, 10**5, 10**6], trials=2, **kw)


def test_csv_is_deterministic_and_round_trips():
    a = bench.write_csv(bench.run_benchmark(_small()))
    b = bench.write_csv(bench.run_benchmark(_small()))
    assert a == b
    assert a.splitlines()[0] == ",".join(bench.CSV_FIELDS)
    rows = bench.read_csv(io.StringIO(a))
    assert bench.write_csv(rows) == a


def test_worker_pool_gives_same_rows():
    assert bench.run_benchmark(_small(), workers=2) == bench.run_benchmark(_small())


def test_fit_recovers_synthetic_exponents():
    rows = [{"kind": "boolean", "dim": N, "nnz": 0, "m_samples": M, "trial": 0, "seed": 0,
             "metric": "gap", "value": 3.0 * N / M}
            for N in (16, 32, 64) for M in (1e4, 1e5, 1e6)]
    fit = bench.fit_loglog(rows, "N,M")
    assert fit.exponents["dim"] == pytest.approx(1, abs=1e-10)
    assert fit.exponents["m_samples"] == pytest.approx(-1, abs=1e-10)
    assert fit.constant == pytest.approx(3.0)
    assert fit.rms_rel_err < 1e-10


def test_fit_rejects_degenerate_grid():
    rows = [{"kind": "boolean", "dim": 16, "nnz": 0, "m_samples": 1e4, "trial": t, "seed": 0,
             "metric": "gap", "value": 1e-3} for t in range(3)]
    with pytest.raises(ValueError):
        bench.fit_loglog(rows, "N,M")


def test_leave_one_out_shift_small():
    rows = bench.run_benchmark(_small())
    assert bench.leave_one_out_shift(rows) < 0.02


def test_sampled_boolean_mode_tracks_expected():
    grid = bench.BenchmarkGrid("boolean", [16], [10**3, 10**4], trials=1, mode="sampled", mc_trials=400)
    exp = bench.BenchmarkGrid("boolean", [16], [10**3, 10**4], trials=1)
    for s, e in zip(bench.run_benchmark(grid), bench.run_benchmark(exp)):
        # mean of 400 sketches: per-entry noise ~ pi sqrt(N / M) / 20 ~ 0.02, max over 16 entries
        assert abs(s["value"] - e["value"]) < 0.06


def test_expensive_grid_rejected():
    grid = bench.BenchmarkGrid.full_scale("boolean")
    grid.max_seconds = 1.0
    with pytest.raises(bench.GridTooExpensive):
        bench.run_benchmark(grid)


def test_grid_json_round_trip():
    g = bench.BenchmarkGrid.desk("matrix_element")
    assert bench.BenchmarkGrid.from_json(g.to_json()) == g


def test_memory_spot_values():
    assert bench.memory_calc("lssvm", 1000, 1000, 7) == 31
    assert bench.memory_calc("pca", 1000, 1000, 8) == 29
    assert bench.memory_calc("lssvm", 1, 1, 1) == 2 * math.ceil(math.log2(3)) + 1 + 4
    with pytest.raises(ValueError):
        bench.memory_calc("svm", 1, 1, 1)


def test_svg_render():
    rows = bench.run_benchmark(_small())
    svg = bench.render_svg(rows, bench.fit_loglog(rows))
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")


@pytest.mark.parametrize("kind", ["vector", "matrix_element", "matrix_index"])
def test_other_kinds_produce_positive_rows(kind):
    grid = bench.BenchmarkGrid.desk(kind)
    grid.dims, grid.sample_sizes, grid.trials = grid.dims[:1], grid.sample_sizes[:2], 1
    grid.nnz = grid.nnz[:1]
    rows = bench.run_benchmark(grid)
    assert rows and all(r["value"] > 0 and r["kind"] == kind for r in rows)
    assert rows[0]["value"] > rows[-1]["value"]
