import csv
import json

import numpy as np
import pytest

from isingtomo import cli, pipeline, reconstruction, tomography, vqe
from isingtomo.errors import NotPSD


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def solved(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert run("gen-data", "--out", out, "--seed", 0) == 0
    assert run("solve", out / "counts.csv", "--oracle", "--out", out) == 0
    return out


def test_gen_data_files(solved, tmp_path):
    m = tomography.load_probabilities(solved / "exact.csv")
    k = tomography.TWO_QUBIT_LABELS.index("z+z+")
    assert m.m[k] == pytest.approx(0.5, abs=1e-15)
    counts = tomography.load_counts(solved / "counts.csv")
    assert counts.counts[k] == 500 and counts.counts.sum() == 9000
    rho, label = reconstruction.load_state(solved / "state.json")
    assert label == "correlated"
    np.testing.assert_array_equal(rho, tomography.bell_state("correlated"))


def test_gen_data_deterministic(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("noise: poisson\nmean_counts: 500\n")
    for d in ("a", "b"):
        assert run("gen-data", "--config", cfg, "--seed", 7, "--out", tmp_path / d) == 0
    for name in ("counts.csv", "exact.csv", "state.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert run("--seed", 8, "gen-data", "--config", cfg, "--out", tmp_path / "c") == 0
    assert (tmp_path / "c" / "counts.csv").read_bytes() != (tmp_path / "a" / "counts.csv").read_bytes()


def test_solve_outputs(solved):
    oracle = json.loads((solved / "oracle.json").read_text())
    assert oracle["bitstring"] == "1001000000001001"
    assert 0 <= oracle["gap"] < 1e-3
    theta = json.loads((solved / "theta.json").read_text())
    assert len(theta["theta"]) == 16
    trace = vqe.ConvergenceTrace.read_csv(solved / "trace.csv")
    assert np.all(np.diff(trace.best_energies) <= 0)
    assert theta["evaluations"] == len(trace)
    dist = vqe.BitstringDistribution.load(solved / "distribution.json")
    assert dist.mode() == oracle["bitstring"] and dist.total_shots == 4096


def test_reconstruct_command(solved, tmp_path):
    assert run("reconstruct", solved / "distribution.json", "--reference", solved / "state.json",
               "--model", solved / "ising.json", "--out", tmp_path) == 0
    rows = list(csv.DictReader(open(tmp_path / "heatmap.csv")))
    assert len(rows) == 16
    rep = reconstruction.ReconstructionReport.load(tmp_path / "report.json")
    assert rep.fidelity_vs_reference >= 0.999


def test_boltzmann_via_cli(solved, tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("aggregation: boltzmann\n")
    args = ("reconstruct", solved / "distribution.json", "--config", cfg, "--out", tmp_path)
    assert run(*args) == 2  # no model file
    assert run(*args, "--model", solved / "ising.json", "--reference", solved / "state.json") == 0
    assert reconstruction.ReconstructionReport.load(tmp_path / "report.json").fidelity_vs_reference >= 0.999


def test_oracle_command(solved, tmp_path):
    assert run("oracle", solved / "ising.json", "--out", tmp_path) == 0
    o = json.loads((tmp_path / "oracle.json").read_text())
    assert o["bitstring"] == "1001000000001001"
    assert abs(o["energy"]) < 1e-9


def test_file_route_matches_in_process(solved):
    data, sol, report = pipeline.run_pipeline(pipeline.RunConfig(seed=0))
    theta = json.loads((solved / "theta.json").read_text())
    assert theta["theta"] == [float(x) for x in sol.theta]
    assert theta["energy"] == sol.final_energy
    assert vqe.BitstringDistribution.load(solved / "distribution.json") == sol.distribution
    assert report.fidelity_vs_reference >= 0.999


def test_benchmark_command(tmp_path):
    cfg = tmp_path / "b.yaml"
    cfg.write_text("states: [anti_correlated]\nseeds: [1]\nnoise_levels: [0, 10000]\n"
                   "budget: 20000\nrestarts: 1\n")
    assert run("benchmark", "--config", cfg, "--out", tmp_path) == 0
    rows = list(csv.DictReader(open(tmp_path / "benchmark.csv")))
    assert list(rows[0]) == list(pipeline.BENCHMARK_COLUMNS)
    assert len(rows) == 2 * 4
    assert all(r["status"] == "ok" for r in rows)
    exact = {r["method"]: float(r["fidelity"]) for r in rows if r["noise"] == "exact"}
    assert min(exact.values()) >= 0.999
    noisy = {r["method"]: float(r["fidelity"]) for r in rows if r["noise"] == "10000"}
    assert noisy["mle"] >= 0.99 and noisy["linear-inversion"] >= 0.98


def test_usage_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        run("frobnicate")
    assert exc.value.code == 1
    bad = tmp_path / "bad.yaml"
    bad.write_text("ansatz: cnot\n")
    assert run("gen-data", "--config", bad, "--out", tmp_path) == 1
    bad.write_text("colour: blue\n")
    assert run("gen-data", "--config", bad, "--out", tmp_path) == 1
    bad.write_text("- a\n- b\n")
    assert run("gen-data", "--config", bad, "--out", tmp_path) == 1
    assert "config error" in capsys.readouterr().err


def test_data_errors(tmp_path, solved, capsys):
    assert run("solve", tmp_path / "missing.csv", "--out", tmp_path) == 2
    lines = (solved / "counts.csv").read_text().splitlines()
    (tmp_path / "short.csv").write_text("\n".join(lines[:-1]) + "\n")
    assert run("solve", tmp_path / "short.csv", "--out", tmp_path) == 2
    assert "missing settings" in capsys.readouterr().err
    (tmp_path / "junk.csv").write_text(lines[0] + "\n" + lines[1] + "\nz+z+,z+,z+,many\n")
    assert run("solve", tmp_path / "junk.csv", "--out", tmp_path) == 2
    assert "line 3" in capsys.readouterr().err


def test_numerical_failure_exit_code(solved, tmp_path, monkeypatch):
    def boom(*a, **k):
        raise NotPSD("negative eigenvalue -0.5")
    monkeypatch.setattr(reconstruction, "physical_projection", boom)
    assert run("reconstruct", solved / "distribution.json", "--out", tmp_path) == 3


def test_config_overrides(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("seed: 3\nout: somewhere\ndepth: 2\n")
    rc = pipeline.RunConfig.load(cfg, seed=9, out=None)
    assert (rc.seed, rc.out, rc.depth) == (9, "somewhere", 2)
    assert rc.optimizer_config().seed == 9
    assert pipeline.RunConfig.from_mapping(None) == pipeline.RunConfig()
