import orjson
import pytest

from src.api.cli import (
    EXIT_FAIL,
    EXIT_OK,
    EXIT_USAGE,
    UsageError,
    exit_status,
    parse_config,
    run,
    ssm_tau_pairs,
)
from src.config.settings import settings
from src.database.report_sink import read_report_bodies
from src.database.snapshot_store import read_snapshot
from src.main import main
from src.models.configuration import ModelParams
from src.models.schemas import Command, Comparison, ExperimentReport, Kernel
from src.utils.geometry import Box


def _lines(path):
    return [orjson.loads(line) for line in path.read_bytes().splitlines() if line.strip()]


# --- Configuration parsing ---


def test_flags_override_the_config_file(tmp_path):
    config_file = tmp_path / "run.json"
    config_file.write_bytes(orjson.dumps({"d": 2, "lambda": 0.2, "kernel": "heat-bath"}))
    config = parse_config(["chain", "--config", str(config_file), "--d", "3", "--lambda", "0.1"])
    assert config.command is Command.CHAIN
    assert config.d == 3
    assert config.lam == 0.1
    assert config.kernel is Kernel.HEAT_BATH


def test_tau_balls_are_parsed_from_flags():
    config = parse_config(["sample", "--lambda", "0.1", "--tau-ball", "1,2,0.5", "--tau-ball", "3,3,1"])
    assert [(b.center, b.radius) for b in config.tau_balls] == [([1.0, 2.0], 0.5), ([3.0, 3.0], 1.0)]
    with pytest.raises(UsageError):
        parse_config(["sample", "--lambda", "0.1", "--tau-ball", "1"])


def test_unknown_config_keys_are_usage_errors(tmp_path):
    config_file = tmp_path / "run.json"
    config_file.write_bytes(orjson.dumps({"bogus": 1}))
    with pytest.raises(UsageError, match="bogus"):
        parse_config(["bounds", "--config", str(config_file)])


@pytest.mark.parametrize(
    "argv",
    [
        ["mixing", "--gamma", "1.5"],
        ["sample"],
        ["free-volume", "--lambda", "0"],
        ["bounds", "--csv", "out.csv"],
        ["stationarity", "--kernel", "heat-bath", "--l-over-r", "1"],
    ],
)
def test_invalid_combinations_are_rejected(argv):
    with pytest.raises(UsageError):
        parse_config(argv)


def test_gamma_error_names_the_interval(capsys):
    assert run(["mixing", "--gamma", "1.5", "--seed", "1"]) == EXIT_USAGE
    assert "gamma must lie in (0,1)" in capsys.readouterr().err


def test_unknown_command_is_a_usage_error():
    assert run(["teleport"]) == EXIT_USAGE


# --- Commands ---


def test_bounds_command(tmp_path):
    out = tmp_path / "bounds.jsonl"
    assert run(["bounds", "--d", "2", "--lambda", "0.5", "--seed", "1", "--output", str(out)]) == EXIT_OK
    rows = {row["formula_id"]: row["value"] for row in _lines(out)}
    assert rows["lambda_c_lower"] == 0.5
    assert rows["density_easy"] == pytest.approx(1.0 / 6.0)


def test_missing_seed_is_drawn_and_printed(tmp_path, capsys, monkeypatch):
    monkeypatch.setattr(settings, "SEED", None)
    assert run(["bounds", "--output", str(tmp_path / "b.jsonl")]) == EXIT_OK
    assert "seed: " in capsys.readouterr().err


def test_seed_from_settings(tmp_path, capsys, monkeypatch):
    monkeypatch.setattr(settings, "SEED", 99)
    run(["bounds", "--output", str(tmp_path / "b.jsonl")])
    assert "seed: 99" in capsys.readouterr().err


def test_same_seed_gives_identical_reports(tmp_path):
    argv = ["chain", "--lambda", "0.3", "--box-side", "4", "--steps", "500", "--burn-in", "100", "--seed", "5"]
    first, second = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    run(argv + ["--output", str(first)])
    run(argv + ["--output", str(second)])
    assert list(read_report_bodies(first)) == list(read_report_bodies(second))


def test_chain_resumes_from_a_snapshot(tmp_path):
    snapshot = tmp_path / "state.json"
    base = ["--lambda", "0.3", "--box-side", "4", "--steps", "200", "--burn-in", "0", "--seed", "6"]
    run(["chain", *base, "--snapshot-out", str(snapshot), "--output", str(tmp_path / "a.jsonl")])
    assert read_snapshot(snapshot).step == 200
    resumed = tmp_path / "resumed.json"
    run(["chain", *base, "--snapshot-in", str(snapshot), "--snapshot-out", str(resumed), "--output", str(tmp_path / "b.jsonl")])
    assert read_snapshot(resumed).step == 400


def test_sample_exit_status_follows_the_verdict(tmp_path):
    out = tmp_path / "sample.jsonl"
    status = run(["sample", "--lambda", "0.05", "--box-side", "4", "--trials", "50", "--seed", "3", "--output", str(out)])
    (report,) = _lines(out)
    assert report["name"] == "sample_density"
    assert status == (EXIT_FAIL if report["verdict"] == "fail" else EXIT_OK)


def test_parallel_set_with_csv_export(tmp_path):
    out, table = tmp_path / "p.jsonl", tmp_path / "p.csv"
    assert run(["parallel-set", "--trials", "10", "--seed", "2", "--output", str(out), "--csv", str(table)]) == EXIT_OK
    assert [r["name"] for r in _lines(out)] == ["parallel_set", "parallel_set_interior"]
    assert "params.boxes" in table.read_text().splitlines()[0]


def test_precondition_failures_exit_with_usage_status(capsys):
    assert run(["disagreement", "--eta", "0.5", "--seed", "1"]) == EXIT_USAGE
    assert "exceeds the admissible maximum" in capsys.readouterr().err


def test_exhausted_sampler_prints_one_error_line(capsys, monkeypatch):
    monkeypatch.setattr(settings, "REJECTION_MAX_ATTEMPTS", 2)
    assert run(["sample", "--lambda", "5", "--box-side", "10", "--trials", "1", "--seed", "4"]) == EXIT_FAIL
    errors = [line for line in capsys.readouterr().err.splitlines() if line.startswith("hslab: error:")]
    assert len(errors) == 1
    assert "(after 2 attempts)" in errors[0]


def test_main_configures_logging_and_runs(tmp_path):
    assert main(["bounds", "--seed", "1", "--log-level", "WARNING", "--output", str(tmp_path / "b.jsonl")]) == EXIT_OK


# --- Helpers ---


def test_exit_status_is_one_when_any_report_fails():
    passing = ExperimentReport.judged("a", 1.0, 0.0, 2.0, Comparison.LE, seed=1)
    failing = ExperimentReport.judged("b", 3.0, 0.0, 2.0, Comparison.LE, seed=1)
    assert exit_status([passing]) == EXIT_OK
    assert exit_status([passing, failing]) == EXIT_FAIL


def test_ssm_pairs_move_away_from_the_subregion():
    params = ModelParams(0.1, 2, Box.cube(10.0, 2))
    subregion = Box((4.0, 4.0), (6.0, 6.0))
    pairs = ssm_tau_pairs(params, subregion)
    centers = [b.forbidden_balls[0].center[0] for _, b in pairs]
    assert len(pairs) == 6
    assert centers == sorted(centers)
    assert all(a.is_free for a, _ in pairs)
