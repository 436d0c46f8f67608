import json

from qsketch import cli


def test_memory_command(capsys):
    assert cli.main(["memory", "--task", "lssvm", "--n", "1000", "--d", "1000", "--s", "7"]) == 0
    assert capsys.readouterr().out.strip() == "31"


def test_bench_then_fit(tmp_path, capsys):
    grid = tmp_path / "grid.json"
    grid.write_text(json.dumps({"kind": "boolean", "dims": [16, 32, 64],
                                "sample_sizes": [10000, 100000, 1000000], "trials": 2}))
    out = tmp_path / "r.csv"
    svg = tmp_path / "r.svg"
    assert cli.main(["bench", "--kind", "boolean", "--grid", str(grid), "--out", str(out),
                     "--svg", str(svg), "--assert"]) == 0
    assert svg.read_text().startswith("<svg")
    capsys.readouterr()
    assert cli.main(["fit", "--in", str(out), "--model", "N,M", "--assert"]) == 0
    assert "m_samples=-" in capsys.readouterr().out


def test_bench_assert_flags_violation(tmp_path):
    # M too small for the linear regime: the fitted exponent drifts and --assert fails
    grid = tmp_path / "grid.json"
    grid.write_text(json.dumps({"kind": "boolean", "dims": [64, 128, 256],
                                "sample_sizes": [100, 300, 1000], "trials": 1}))
    assert cli.main(["bench", "--kind", "boolean", "--grid", str(grid), "--out",
                     str(tmp_path / "r.csv"), "--assert"]) == 1


def test_e2e_small(capsys):
    assert cli.main(["e2e", "pca", "--seeds", "3", "--assert"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["seeds"] == 3 and out["ok"]
