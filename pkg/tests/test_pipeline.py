import asyncio
import csv
import io
import json
import time

import pytest

import pipeline
from config import VERSION, Config, parse_experiment_config
from pipeline import (
    EXIT_CONFIG,
    EXIT_OK,
    ExperimentPipeline,
    build_parser,
    main,
    render_report,
    write_report,
)

MODEL = {"beta": 0.1, "spectral": {"type": "rademacher"}, "field": {"type": "point_mass", "h": 0.3}}


@pytest.fixture
def settings(tmp_path):
    return Config(output_dir=str(tmp_path / "outputs"), threads=2)


def run_command(settings, **raw):
    experiment = parse_experiment_config({"model": MODEL, **raw})
    return asyncio.run(ExperimentPipeline(experiment, settings).run())


def test_rs_report(settings):
    report = run_command(settings, command="rs")
    assert report["command"] == "rs"
    assert report["version"] == VERSION
    assert report["passed"], [c for c in report["checks"] if not c["passed"]]
    assert {c["name"] for c in report["checks"]} >= {"kappa_delta_sigma", "lambda_identity", "q_fixed_point"}
    constants = report["results"]["constants"]
    assert 0.0 < constants["q_star"] < 1.0
    assert report["results"]["unstandardized"]["shift"] == pytest.approx(0.0)
    assert report["timing"]["total_seconds"] >= 0.0


def test_se_report_and_csv(settings):
    report = run_command(settings, command="se", t_max=3)
    assert len(report["results"]["delta"]) == 3
    assert len(report["table"]) == 9
    rows = list(csv.reader(io.StringIO(render_report(report, "csv"))))
    assert rows[0] == ["s", "t", "delta"]
    assert len(rows) == 10
    assert float(rows[1][2]) == pytest.approx(report["results"]["delta"][0][0])


def test_json_rendering_is_sorted_and_parseable(settings):
    report = run_command(settings, command="rs")
    text = render_report(report, "json")
    decoded = json.loads(text)
    assert list(decoded) == sorted(decoded)
    assert decoded["config_hash"] == report["config_hash"]


def test_write_report_creates_directories(settings, tmp_path):
    report = run_command(settings, command="rs")
    path = tmp_path / "nested" / "report.json"
    write_report(report, str(path), "json")
    assert json.loads(path.read_text())["command"] == "rs"


def test_results_do_not_depend_on_thread_count(tmp_path):
    raw = {"command": "enumerate", "seed": 3, "n_list": [6, 8], "replicates": 4}
    reports = [
        run_command(Config(output_dir=str(tmp_path), threads=threads), **raw)
        for threads in (1, 4)
    ]
    first, second = (json.dumps(r["results"], sort_keys=True, default=float) for r in reports)
    assert first == second
    assert reports[0]["table"] == reports[1]["table"]


def test_parser_requires_a_config():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])
    args = build_parser().parse_args(["--config", "x.json", "--seed", "5", "--format", "csv"])
    assert args.seed == 5 and args.format == "csv"


def test_main_exit_codes(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("ORTHOGLASS_OUTPUT_DIR", str(tmp_path / "outputs"))
    assert asyncio.run(main(["--config", str(tmp_path / "missing.json")])) == EXIT_CONFIG

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"command": "rs", "model": {**MODEL, "beta": -1.0}}))
    assert asyncio.run(main(["--config", str(bad)])) == EXIT_CONFIG

    good = tmp_path / "rs.json"
    good.write_text(json.dumps({"command": "rs", "model": MODEL}))
    out = tmp_path / "report.csv"
    assert asyncio.run(main(["--config", str(good), "--out", str(out), "--format", "csv"])) == EXIT_OK
    assert "q_star" in out.read_text().splitlines()[0].split(",")


def test_seed_override_changes_the_hash(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("ORTHOGLASS_OUTPUT_DIR", str(tmp_path / "outputs"))
    path = tmp_path / "rs.json"
    path.write_text(json.dumps({"command": "rs", "model": MODEL, "seed": 1}))
    hashes = []
    for seed in ("1", "2"):
        assert asyncio.run(main(["--config", str(path), "--seed", seed])) == EXIT_OK
        hashes.append(json.loads(capsys.readouterr().out)["config_hash"])
    assert hashes[0] != hashes[1]


def test_constants_are_solved_once_under_concurrency(settings, monkeypatch):
    calls = []
    solve = pipeline.rs_constants

    def counting(model, gh_order):
        calls.append(model)
        time.sleep(0.05)
        return solve(model, gh_order)

    monkeypatch.setattr(pipeline, "rs_constants", counting)
    experiment = parse_experiment_config({"command": "rs", "model": MODEL})
    runner = ExperimentPipeline(experiment, Config(output_dir=settings.output_dir, threads=8))
    results = asyncio.run(runner._map(runner.constants, [(experiment.model,)] * 8))
    assert len(calls) == 1
    assert all(result is results[0] for result in results)
