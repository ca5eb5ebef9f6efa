import csv
import io
import json
import math

import pytest

import ofs


@pytest.fixture(scope="module")
def small_lib():
    return ofs.generate_library(seed=3, L=30, Q=64)


def campaign_config(out_dir):
    return {
        "library": {"seed": 3, "L": 30, "Q": 64},
        "simulator": dict(ofs.desk_config(), K=10),
        "solvers": [
            {"name": "ea_plus", "algorithm": "ea_plus", "mu": 5, "lambda": 20, "budget": 100},
            {"name": "pls", "algorithm": "umda_u_pls", "mu": 5, "lambda": 20, "budget": 100},
        ],
        "n_runs": 3,
        "output_dir": str(out_dir),
        "master_seed": 4,
        "baseline_K": 200,
    }


def test_library_shape_and_bounds(small_lib):
    assert len(small_lib) == 30
    assert small_lib.Q == 64
    values = small_lib.filter(0)
    assert len(values) == 64
    assert all(0.01 <= v <= 0.99 for v in values)
    assert len(small_lib.wavelengths) == 64


def test_distances(small_lib):
    assert ofs.d1(small_lib, 2, 2) == 0.0
    assert ofs.d2(small_lib, 1, 4) == ofs.d2(small_lib, 4, 1)
    assert ofs.second_moment([0.25] * 16) == 0.0
    d = ofs.Metric(small_lib, "d1")
    assert d(3, 5) == ofs.d1(small_lib, 3, 5)
    x = [0, 1, 2, 3, 4, 5, 6, 7]
    assert d.lap(x, list(reversed(x))) == 0.0
    assert ofs.hamming(x, [0, 1, 2, 3, 4, 5, 6, 9]) == 1
    with pytest.raises(ValueError):
        ofs.Metric(small_lib, "d3")


def test_simulator(small_lib):
    sim = ofs.Simulator(small_lib)
    assert sim.config["M"] == 8
    r = sim.evaluate([0, 1, 2, 3, 4, 5, 6, 7], K=20, seed=1)
    assert r["K"] == 20 and len(r["deviations"]) == 20
    assert r["estimate"] == pytest.approx(sum(v * v for v in r["deviations"]) / 20, rel=1e-12)
    value, failed = sim.sample_D([4] * 8, 1)
    assert failed and value == 1.0
    quiet = ofs.Simulator(small_lib, dict(ofs.desk_config(), photon_noise_alpha=0.0, read_noise_sigma=0.0))
    assert quiet.evaluate([0, 3, 6, 9, 12, 15, 18, 21], K=5, seed=2)["estimate"] == 0.0


def test_statistics():
    w = ofs.welch_test([1, 2, 3], [2, 3, 4])
    assert w["statistic"] == pytest.approx(-1.2247, abs=1e-4)
    assert w["df"] == pytest.approx(4.0, abs=1e-6)
    u = ofs.mwu_test([1, 2], [3, 4])
    assert u["statistic"] == 0.0
    assert ofs.mwu_test(list(range(10)), list(range(100, 110)), alternative="less")["p_value"] < 0.01
    with pytest.raises(ValueError):
        ofs.mwu_test([1], [2], alternative="greater")


def test_stepsize_and_mutation(small_lib):
    rate = ofs.stepsize_rate(0.1)
    assert abs(1 / rate - 1 / math.expm1(rate) - 0.1) < 1e-10
    assert ofs.stepsize_rate(0.5) == 0.0
    d = ofs.Metric(small_lib, "d1")
    ctx = ofs.explore(d, M=8, R=5, seed=1)
    assert ctx["delta_max_hat"] > 0
    x0 = [0, 1, 2, 3, 4, 5, 6, 7]
    target = 0.5 * ctx["delta_max_hat"]
    genes, value, evals = ofs.dd_mutation(x0, d, target, budget=200, seed=3)
    assert len(genes) == 8
    assert value == pytest.approx(d.lap(x0, genes), rel=1e-12)
    assert evals <= 200


def test_run_solver_log_invariants(small_lib):
    cfg = {"algorithm": "umda_u_pls", "mu": 5, "lambda": 20, "budget": 100}
    log = ofs.run_solver(cfg, small_lib, dict(ofs.desk_config(), K=5), seed=7)
    assert log["t"] == list(range(1, 101))
    assert all(b <= a for a, b in zip(log["g"], log["g"][1:]))
    assert all(ofs.distinct_count(g) == 8 for g in log["genes"])
    assert log["best_value"] == min(log["f"])
    again = ofs.run_solver(cfg, small_lib, dict(ofs.desk_config(), K=5), seed=7)
    assert again["f"] == log["f"]


def test_campaign_files_have_the_documented_formats(tmp_path):
    cfg = campaign_config(tmp_path / "camp")
    manifest = ofs.run_campaign(cfg)
    assert len(manifest["campaign_id"]) == 16
    paths = [a["path"] for a in manifest["artifacts"]]
    assert paths == sorted(paths)
    assert "baseline.json" in paths
    root = tmp_path / "camp"
    for a in manifest["artifacts"]:
        assert ofs.sha256((root / a["path"]).read_bytes()) == a["sha"]
    on_disk = json.loads((root / "manifest.json").read_text())
    assert on_disk == manifest

    text = (root / "logs" / "ea_plus__run000.csv").read_text()
    lines = text.splitlines()
    assert lines[0] == "t,f,g,genes"
    assert lines[-1].startswith("# ")
    footer = json.loads(lines[-1][2:])
    for key in ("best", "best_value", "seed", "config"):
        assert key in footer
    rows = list(csv.DictReader(io.StringIO("\n".join(lines[:-1]))))
    assert len(rows) == 100
    assert [int(r["t"]) for r in rows] == list(range(1, 101))
    assert all(len(r["genes"].split(";")) == 8 for r in rows)
    assert float(rows[-1]["g"]) == footer["best_value"]

    parsed = ofs.read_runlog(str(root / "logs" / "ea_plus__run000.csv"))
    assert parsed["g"] == [float(r["g"]) for r in rows]

    baseline = json.loads((root / "baseline.json").read_text())
    assert baseline["f_max"] == baseline["estimate_big"] / 4
    assert len(baseline["genes"]) == 8

    ranking = list(csv.reader(io.StringIO(ofs.rank(cfg, "ea_plus", 100))))
    assert ranking[0][:4] == ["solver", "runs", "mean_final_g", "p_value"]
    assert {r[0] for r in ranking[1:]} == {"ea_plus", "pls"}
    pls_row = next(r for r in ranking[1:] if r[0] == "pls")
    assert float(pls_row[4]) == 1.0


def test_unwritable_output_raises(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        ofs.run_campaign(campaign_config(blocker / "sub"))


def test_neighborhood_outputs(small_lib):
    table, summary = ofs.neighborhood(small_lib, "hamming", n=3, K=10, seed=1)
    rows = list(csv.DictReader(io.StringIO(table)))
    assert len(rows) == 9
    assert {(int(r["i"]), int(r["j"])) for r in rows} == {(i, j) for i in range(3) for j in range(3)}
    assert all(0.0 <= float(r["p"]) <= 1.0 for r in rows)
    s = json.loads(summary)
    assert s["threshold"] == pytest.approx(0.05 / 9)
    below = sum(float(r["p"]) < s["threshold"] for r in rows) / 9
    assert s["rejection_fraction"] == pytest.approx(below)


def test_diverse_selection(small_lib):
    d = ofs.Metric(small_lib, "d1")
    pool = [([i, i + 1, i + 2, i + 3, i + 4, i + 5, i + 6, i + 7], 0.1 * i) for i in range(20)]
    D_min = ofs.calibrate_d_min(d, M=8, pairs=200, seed=1)
    chosen = ofs.select_diverse(pool, D_min, 1.25, d)
    assert set(chosen) == {"D_min", "f_max", "solutions"}
    sols = chosen["solutions"]
    assert sols[0]["genes"] == pool[0][0]
    assert all(s["estimate"] <= 1.25 for s in sols)
    for i in range(len(sols)):
        for j in range(i):
            assert d.lap(sols[i]["genes"], sols[j]["genes"]) >= D_min
