import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from orchardloc.cli import main


@pytest.fixture()
def runner():
    return CliRunner()


def read_jsonl(path):
    return [json.loads(line) for line in Path(path).read_text().splitlines()]


def genmap(runner, out, rows=12, trees=12, seed=3):
    res = runner.invoke(main, ["genmap", "--out", str(out), "--seed", str(seed),
                               "--rows", str(rows), "--trees", str(trees)])
    assert res.exit_code == 0, res.output
    return Path(out) / "maps" / "orchard.json"


def test_genmap_counts_and_layout(runner, tmp_path):
    out = tmp_path / "ws"
    path = genmap(runner, out, rows=5, trees=10)
    doc = json.loads(path.read_text())
    assert len(doc["landmarks"]) == 50
    for sub in ("maps", "logs", "results", "manifests"):
        assert (out / sub).is_dir()
    assert list((out / "manifests").glob("genmap-*.json"))


def test_genmap_default_is_thousand_landmarks(runner, tmp_path):
    path = genmap(runner, tmp_path / "ws", rows=20, trees=50)
    assert len(json.loads(path.read_text())["landmarks"]) == 1000


def test_genmap_deterministic_bytes(runner, tmp_path):
    a = genmap(runner, tmp_path / "a", seed=9)
    b = genmap(runner, tmp_path / "b", seed=9)
    assert a.read_bytes() == b.read_bytes()


def test_simulate_counts(runner, tmp_path):
    out = tmp_path / "ws"
    genmap(runner, out)
    res = runner.invoke(main, ["simulate", "--out", str(out), "--seed", "1"])
    assert res.exit_code == 0, res.output
    logs = list((out / "logs").glob("*.jsonl"))
    assert len(logs) == 55
    assert len(list((out / "logs").glob("rows_*.jsonl"))) == 12
    assert len(list((out / "logs").glob("turns_*.jsonl"))) == 43


def test_simulate_only_filters(runner, tmp_path):
    out = tmp_path / "ws"
    genmap(runner, out)
    res = runner.invoke(main, ["simulate", "--out", str(out), "--only", "straight"])
    assert res.exit_code == 0, res.output
    assert len(list((out / "logs").glob("*.jsonl"))) == 12
    res = runner.invoke(main, ["simulate", "--out", str(out), "--only", "turns"])
    assert res.exit_code == 0, res.output
    assert len(list((out / "logs").glob("turns_*.jsonl"))) == 43


def test_simulate_requires_map(runner, tmp_path):
    res = runner.invoke(main, ["simulate", "--out", str(tmp_path / "empty")])
    assert res.exit_code != 0
    assert "map not found" in res.output


def test_seetree_out_env_default(runner, tmp_path, monkeypatch):
    ws = tmp_path / "envws"
    monkeypatch.setenv("SEETREE_OUT", str(ws))
    res = runner.invoke(main, ["genmap", "--rows", "5", "--trees", "10"])
    assert res.exit_code == 0, res.output
    assert (ws / "maps" / "orchard.json").exists()


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    out = tmp_path_factory.mktemp("ws")
    runner = CliRunner()
    res = runner.invoke(main, ["genmap", "--out", str(out), "--seed", "3",
                               "--rows", "12", "--trees", "12"])
    assert res.exit_code == 0, res.output
    res = runner.invoke(main, ["simulate", "--out", str(out), "--seed", "5"])
    assert res.exit_code == 0, res.output
    return out


def params_file(tmp_path, n=300):
    path = tmp_path / "params.json"
    path.write_text(json.dumps({"particle_count": n}))
    return path


def test_evaluate_writes_results_and_summary(runner, workspace, tmp_path):
    params = params_file(tmp_path)
    args = ["evaluate", "--out", str(workspace), "--params", str(params),
            "--protocol", "rows-large", "--mode", "gnss", "--starts", "2",
            "--trials", "2", "--seed", "8"]
    res = runner.invoke(main, args)
    assert res.exit_code == 0, res.output
    trials = read_jsonl(workspace / "results" / "trials-rows-large-gnss.jsonl")
    assert len(trials) == 4
    assert all("params_fingerprint" in t for t in trials)
    summary = read_jsonl(workspace / "results" / "summary-rows-large.jsonl")
    assert summary[0]["trial_count"] == 4
    assert "Odometry" in res.output


def test_evaluate_deterministic_results_files(runner, workspace, tmp_path):
    params = params_file(tmp_path)
    args = ["evaluate", "--out", str(workspace), "--params", str(params),
            "--protocol", "rows-small", "--mode", "visual", "--starts", "2",
            "--trials", "1", "--seed", "4"]
    assert runner.invoke(main, args).exit_code == 0
    first = (workspace / "results" / "trials-rows-small-visual.jsonl").read_bytes()
    assert runner.invoke(main, args).exit_code == 0
    second = (workspace / "results" / "trials-rows-small-visual.jsonl").read_bytes()
    assert first == second


def test_evaluate_rejects_bad_mode(runner, workspace):
    res = runner.invoke(main, ["evaluate", "--out", str(workspace),
                               "--protocol", "rows-large", "--mode", "sonar"])
    assert res.exit_code != 0


def test_evaluate_requires_campaign(runner, tmp_path):
    out = tmp_path / "bare"
    genmap(CliRunner(), out)
    res = CliRunner().invoke(main, ["evaluate", "--out", str(out),
                                    "--protocol", "turns", "--mode", "gnss"])
    assert res.exit_code != 0


def test_drift_reports_per_run(runner, workspace):
    res = runner.invoke(main, ["drift", "--out", str(workspace)])
    assert res.exit_code == 0, res.output
    recs = read_jsonl(workspace / "results" / "drift.jsonl")
    assert len(recs) == 12
    assert all("quartiles" in r for r in recs)


def test_drift_planted_constant_bias(runner, tmp_path):
    out = tmp_path / "planted"
    genmap(runner, out)
    sensor = tmp_path / "sensor.json"
    sensor.write_text(json.dumps({
        "gnss_bias_init": [0.3, 0.4], "gnss_bias_step_sigma": 0.0,
        "gnss_sigma": 0.0, "gnss_corrected_sigma": 0.0,
        "orientation_sigma": 0.0}))
    res = runner.invoke(main, ["simulate", "--out", str(out), "--only",
                               "straight", "--sensor", str(sensor)])
    assert res.exit_code == 0, res.output
    res = runner.invoke(main, ["drift", "--out", str(out)])
    assert res.exit_code == 0, res.output
    recs = read_jsonl(out / "results" / "drift.jsonl")
    for rec in recs:
        assert rec["quartiles"]["euclidean"]["median"] == pytest.approx(0.5, abs=0.02)
        assert rec["quartiles"]["rate"]["median"] == pytest.approx(0.0, abs=1e-6)


def test_manifest_written_with_seed(runner, workspace):
    manifests = sorted((workspace / "manifests").glob("simulate-*.json"))
    assert manifests
    doc = json.loads(manifests[0].read_text())
    assert doc["seed"] == 5
    assert doc["command"] == "simulate"
    assert "created" in doc and "version" in doc
