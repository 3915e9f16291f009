import math
import statistics

import numpy as np
import pytest

from dcot import harness
from dcot.cli import main
from dcot.config import DCoTConfig
from dcot.discriminator import load_facts
from dcot.haro import PolicyParams
from dcot.tasks import default_facts_path, default_suite_path, load_suite, parse_suite


@pytest.fixture(scope="module")
def default_tasks():
    return load_suite(default_suite_path())


@pytest.fixture(scope="module")
def default_report(default_tasks):
    return harness.run_suite(default_tasks, DCoTConfig(), store=load_facts(default_facts_path()))


def test_rows_cover_tasks_and_modes(default_report, default_tasks):
    rows = default_report.rows
    assert len(rows) == 2 * len(default_tasks) == 66
    assert [r.task_id for r in rows[::2]] == [t.id for t in default_tasks]
    assert {r.mode for r in rows} == {"dcot", "long_cot_baseline"}
    assert not default_report.any_aborted


def test_baseline_answers_every_task(default_report):
    assert all(r.correct for r in default_report.rows if r.mode == "long_cot_baseline")


def test_csv_round_trip(default_report):
    text = harness.rows_to_csv(default_report.rows)
    assert text.count("\r\n") == 67
    assert text.splitlines()[0] == ",".join(harness.ROW_FIELDS)
    assert harness.rows_from_csv(text) == default_report.rows


def test_aggregates_match_recomputation(default_report):
    agg = default_report.aggregates
    for mode in ("dcot", "long_cot_baseline"):
        for metric in harness.METRICS:
            vals = [getattr(r, metric) for r in default_report.rows if r.mode == mode]
            assert agg[mode][metric]["max"] == max(vals)
            assert agg[mode][metric]["mean"] == pytest.approx(sum(vals) / len(vals), rel=1e-12)
            assert agg[mode][metric]["median"] == statistics.median(vals)


def test_aggregate_ignores_aborted_rows():
    rows = [
        harness.TaskRow("a", "dcot", 1.0, 2, 10, True, 0.9),
        harness.TaskRow("b", "dcot", 5.0, 0, 0, False, 0.0, aborted=True, error="x"),
    ]
    agg = harness.aggregate(rows)
    assert agg["dcot"]["token_count"] == {"max": 10, "mean": 10.0, "median": 10}
    only_bad = harness.aggregate(rows[1:])
    assert math.isnan(only_bad["dcot"]["step_count"]["mean"])


def test_malformed_task_is_flagged_not_fatal():
    tasks = parse_suite(
        "id=ok\tkind=arith_eval\texpr=1+1\n"
        "id=bad\tkind=determinant\tmatrix=1 2;3\n"
    )
    report = harness.run_suite(tasks, DCoTConfig(), modes="dcot")
    bad = [r for r in report.rows if r.aborted]
    assert [r.task_id for r in bad] == ["bad"]
    assert "ShapeError" in bad[0].error
    assert report.rows[0].correct


def test_parallel_run_keeps_order(default_tasks):
    cfg = DCoTConfig()
    serial = harness.run_suite(default_tasks[:8], cfg)
    parallel = harness.run_suite(default_tasks[:8], cfg, jobs=4)
    strip = lambda rows: [(r.task_id, r.mode, r.step_count, r.token_count, r.correct) for r in rows]
    assert strip(parallel.rows) == strip(serial.rows)


def test_emit_and_read_report(default_report, tmp_path):
    harness.emit_report(default_report, tmp_path)
    assert sorted(p.name for p in tmp_path.iterdir()) == ["comparison.txt", "config.txt", "run.csv", "traces.log"]
    back = harness.read_report(tmp_path)
    assert back.rows == default_report.rows and back.config == default_report.config
    assert len((tmp_path / "traces.log").read_text().splitlines()) == 66


# training


def test_train_rejects_zero_episodes(scripted_tasks):
    with pytest.raises(ValueError, match="episodes"):
        harness.train(scripted_tasks, 0, DCoTConfig())


def test_zero_learning_rate_freezes_theta(scripted_tasks):
    start = PolicyParams()
    result = harness.train(scripted_tasks, 30, DCoTConfig(eta_lr=0.0), start)
    assert result.params.theta.tobytes() == start.theta.tobytes()
    assert len(result.curve) == 30 and not result.diverged


def test_training_is_deterministic(scripted_tasks):
    a = harness.train(scripted_tasks, 20, DCoTConfig(seed=5))
    b = harness.train(scripted_tasks, 20, DCoTConfig(seed=5))
    assert a.log == b.log


def test_divergence_stops_with_finite_params(scripted_tasks, monkeypatch):
    calls = []

    def gradient(episode, params):
        calls.append(1)
        return np.array([math.nan, 0.0, 0.0]) if len(calls) == 4 else np.array([0.1, 0.1, 0.0])

    monkeypatch.setattr(harness.haro, "policy_gradient", gradient)
    result = harness.train(scripted_tasks, 10, DCoTConfig(eta_lr=0.5))
    assert result.diverged and "episode 3" in result.error
    assert len(result.curve) == 3
    assert np.all(np.isfinite(result.params.theta))


# command line


def test_cli_run_and_report(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", "--suite", "scripted", "--out", str(out)]) == 0
    assert "step_count" in capsys.readouterr().out
    assert main(["report", "--in", str(out)]) == 0
    assert (out / "comparison.txt").read_text() == capsys.readouterr().out


def test_cli_exit_code_for_aborted_rows(tmp_path):
    suite = tmp_path / "suite.txt"
    suite.write_text("id=bad\tkind=rank\tmatrix=1 2;3\n")
    assert main(["run", "--suite", str(suite), "--out", str(tmp_path / "o")]) == 1


def test_cli_config_errors(tmp_path, capsys):
    cfg = tmp_path / "c.txt"
    cfg.write_text("tau_0 = 2\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "tau_0" in capsys.readouterr().err
    assert main(["run", "--suite", str(tmp_path / "missing.txt"), "--out", str(tmp_path / "o")]) == 2
    with pytest.raises(SystemExit):
        main(["run", "--seed", "-1"])


def test_cli_train(tmp_path):
    out = tmp_path / "t"
    assert main(["train", "--suite", "scripted", "--episodes", "12", "--out", str(out)]) == 0
    lines = (out / "training.log").read_text().splitlines()
    assert lines[0] == harness.TRAIN_LOG_HEADER and len(lines) == 13
    policy = PolicyParams.from_text((out / "policy.txt").read_text())
    assert main(["run", "--suite", "scripted", "--policy", str(out / "policy.txt"), "--out", str(tmp_path / "r")]) == 0
    assert np.all(np.isfinite(policy.theta))
    assert main(["train", "--episodes", "0", "--out", str(out)]) == 2


def test_cli_train_divergence_exit_code(tmp_path, monkeypatch):
    monkeypatch.setattr(harness.haro, "policy_gradient", lambda episode, params: np.array([math.inf, 0.0, 0.0]))
    out = tmp_path / "t"
    assert main(["train", "--suite", "scripted", "--episodes", "5", "--out", str(out)]) == 1
    assert (out / "training.log").read_text().splitlines()[-1].startswith("# stopped: episode 0")
