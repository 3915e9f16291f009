"""Suite runs in both modes, policy training, and report files.

A run writes ``run.csv`` (one row per task and mode), ``comparison.txt``
(per-mode max/mean/median of the three cost metrics), ``traces.log`` (one
JSON trace per line) and ``config.txt``.  Training writes ``training.log`` and
``policy.txt``.
"""

import csv
import io
import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import haro
from .config import DCoTConfig, parse_config_text, validate_config
from .decoder import MoEBackend, ScriptedBackend, run_session, trace_line
from .errors import NumericError
from .moe import TinyMoE
from .rng import SplitMix64, derive_seed
from .tasks import oracle_answer
from .types import Mode, SessionTrace

MODES = {
    "dcot": (Mode.DCOT,),
    "baseline": (Mode.BASELINE,),
    "both": (Mode.DCOT, Mode.BASELINE),
}
METRICS = ("wall_time_ms", "step_count", "token_count")
TIME_COLUMNS = ("wall_time_ms",)


@dataclass(frozen=True)
class TaskRow:
    task_id: str
    mode: str
    wall_time_ms: float
    step_count: int
    token_count: int
    correct: bool
    episode_reward: float
    aborted: bool = False
    error: str = ""


ROW_FIELDS = tuple(f.name for f in fields(TaskRow))


def aggregate(rows):
    """``{mode: {metric: {"max", "mean", "median"}}}`` over non-aborted rows."""
    out = {}
    for mode in sorted({r.mode for r in rows}):
        sel = [r for r in rows if r.mode == mode and not r.aborted]
        stats = {}
        for metric in METRICS:
            vals = [getattr(r, metric) for r in sel]
            if vals:
                stats[metric] = {
                    "max": max(vals),
                    "mean": math.fsum(vals) / len(vals),
                    "median": statistics.median(vals),
                }
            else:
                stats[metric] = {"max": math.nan, "mean": math.nan, "median": math.nan}
        out[mode] = stats
    return out


@dataclass(frozen=True)
class RunReport:
    rows: tuple
    config: DCoTConfig
    traces: tuple = field(default=(), compare=False)

    @property
    def seed(self):
        return self.config.seed

    @property
    def aggregates(self):
        return aggregate(self.rows)

    @property
    def any_aborted(self):
        return any(r.aborted for r in self.rows)


def _make_backend(task, config, backend, seed):
    if backend == "scripted":
        return ScriptedBackend(task.trace(), config.alpha)
    if backend == "moe":
        return MoEBackend(TinyMoE.from_config(config.replace(seed=seed)), config.block_size, config.alpha)
    raise ValueError(f"unknown backend {backend!r}")


def run_task(task, mode, config, backend="scripted", store=None, policy=None):
    """One session for one task; any failure becomes an aborted trace."""
    seed = derive_seed(config.seed, task.index)
    try:
        oracle = oracle_answer(task)
        engine = _make_backend(task, config, backend, seed)
    except Exception as exc:
        trace = SessionTrace(task_id=task.id, mode=Mode(mode), aborted=True, error=f"{type(exc).__name__}: {exc}")
        return trace, None
    trace = run_session(task.id, task.query, oracle, mode, engine, config, store=store, policy=policy)
    return trace, oracle


def _row(trace, oracle):
    correct = oracle is not None and not trace.aborted and haro.semantic_reward(trace.final_answer, oracle) == 1.0
    return TaskRow(
        task_id=trace.task_id,
        mode=trace.mode.value,
        wall_time_ms=float(trace.wall_time_ms),
        step_count=trace.step_count,
        token_count=trace.token_count,
        correct=correct,
        episode_reward=float(trace.episode_reward),
        aborted=trace.aborted,
        error=trace.error,
    )


def run_suite(tasks, config, modes="both", jobs=1, backend="scripted", store=None, policy=None):
    """Run every task in every requested mode; rows keep suite order."""
    modes = MODES[modes] if isinstance(modes, str) else tuple(Mode(m) for m in modes)
    work = [(task, mode) for task in tasks for mode in modes]

    def one(item):
        return run_task(item[0], item[1], config, backend, store, policy)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, work))
    else:
        results = [one(item) for item in work]
    rows = tuple(_row(trace, oracle) for trace, oracle in results)
    return RunReport(rows, config, tuple(trace for trace, _ in results))


# report files


def _cell(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(ROW_FIELDS)
    for r in rows:
        writer.writerow([_cell(getattr(r, name)) for name in ROW_FIELDS])
    return buf.getvalue()


def _parse_cell(name, text):
    kind = {f.name: f.type for f in fields(TaskRow)}[name]
    if kind in (bool, "bool"):
        if text not in ("true", "false"):
            raise ValueError(f"bad boolean {text!r} in column {name}")
        return text == "true"
    if kind in (int, "int"):
        return int(text)
    if kind in (float, "float"):
        return float(text)
    return text


def rows_from_csv(text):
    reader = csv.reader(io.StringIO(text, newline=""))
    header = next(reader)
    if tuple(header) != ROW_FIELDS:
        raise ValueError(f"unexpected header {header}")
    return tuple(TaskRow(**{k: _parse_cell(k, v) for k, v in zip(header, rec)}) for rec in reader)


def _num(v):
    if isinstance(v, float) and math.isnan(v):
        return "-"
    return f"{v:.2f}" if isinstance(v, float) else str(v)


def comparison_table(report):
    """Plain-text table of per-mode max/mean/median for each cost metric."""
    agg = report.aggregates
    head = ["metric", "mode", "max", "mean", "median"]
    body = []
    for metric in METRICS:
        for mode, stats in agg.items():
            s = stats[metric]
            body.append([metric, mode, _num(s["max"]), _num(s["mean"]), _num(s["median"])])
    widths = [max(len(str(x)) for x in col) for col in zip(head, *body)]
    fmt = lambda cells: "  ".join(str(c).ljust(w) for c, w in zip(cells, widths)).rstrip()
    lines = [fmt(head), fmt(["-" * w for w in widths])] + [fmt(r) for r in body]
    n_tasks = len({r.task_id for r in report.rows})
    n_bad = sum(r.aborted for r in report.rows)
    lines.append("")
    lines.append(f"tasks: {n_tasks}  rows: {len(report.rows)}  aborted: {n_bad}  seed: {report.seed}")
    for mode in agg:
        sel = [r for r in report.rows if r.mode == mode and not r.aborted]
        lines.append(f"{mode}: correct {sum(r.correct for r in sel)}/{len(sel)}")
    return "\n".join(lines) + "\n"


def emit_report(report, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "run.csv").write_text(rows_to_csv(report.rows), encoding="utf-8", newline="")
    (out / "comparison.txt").write_text(comparison_table(report), encoding="utf-8")
    (out / "config.txt").write_text(report.config.to_text(), encoding="utf-8")
    # wall time stays in run.csv only so the trace log is reproducible byte for byte
    lines = [trace_line(t, include_time=False) for t in report.traces]
    (out / "traces.log").write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return out


def read_report(in_dir):
    src = Path(in_dir)
    rows = rows_from_csv((src / "run.csv").read_text(encoding="utf-8"))
    raw = parse_config_text((src / "config.txt").read_text(encoding="utf-8"))
    return RunReport(rows, validate_config(raw, allow_threshold_override=True))


# training


@dataclass
class TrainResult:
    params: haro.PolicyParams
    curve: list
    diverged: bool = False
    error: str = ""
    log: list = field(default_factory=list)

    def window_means(self, width=50):
        head, tail = self.curve[:width], self.curve[-width:]
        return float(np.mean(head)), float(np.mean(tail))


def _finite(params):
    return bool(np.all(np.isfinite(params.theta))) and math.isfinite(params.baseline)


def train(tasks, episodes, config, params=None, backend="scripted", on_episode=None):
    """Episodes cycle through ``tasks``; one clipped update per episode.

    Each episode samples its choices from a stream seeded with the task's
    derived seed, so repeated visits to a task see the same random draws and
    reward changes between visits come from the parameters alone.

    Stops early (``diverged``) on a non-finite gradient or parameter and
    keeps the last finite parameters.
    """
    if episodes < 1:
        raise ValueError(f"episodes must be ≥ 1 (got {episodes})")
    if not tasks:
        raise ValueError("training needs at least one task")

    params = params or haro.PolicyParams()
    result = TrainResult(params, [])
    for e in range(episodes):
        task = tasks[e % len(tasks)]
        seed = derive_seed(config.seed, task.index)
        oracle = oracle_answer(task)
        engine = _make_backend(task, config, backend, seed)
        trace = run_session(task.id, task.query, oracle, Mode.DCOT, engine, config, policy=params, rng=SplitMix64(seed))
        if trace.aborted:
            result.diverged, result.error = True, f"episode {e}: {trace.error}"
            break
        episode = haro.EpisodeRecord(
            choices=list(trace.choices),
            r_sem=haro.semantic_reward(trace.final_answer, oracle),
            r_struct=haro.structural_reward(trace.token_count, config.token_budget),
            r_episode=trace.episode_reward,
            lambda_struct=config.lambda_struct,
        )
        try:
            episode.gradient = haro.policy_gradient(episode, params)
            updated = haro.clipped_update(
                params, episode.gradient, params, episode.choices, config.eta_lr, config.ppo_clip
            ).observe_return(episode.r_total)
        except NumericError as exc:
            result.diverged, result.error = True, f"episode {e}: {exc}"
            break
        if not _finite(updated):
            result.diverged, result.error = True, f"episode {e}: non-finite parameters"
            break
        params = updated
        result.params = params
        result.curve.append(trace.episode_reward)
        line = (
            f"{e}\t{task.id}\t{trace.episode_reward!r}\t{episode.r_total!r}\t"
            f"{params.w_adv!r}\t{params.w_gate!r}\t{params.bias!r}\t{params.baseline!r}"
        )
        result.log.append(line)
        if on_episode is not None:
            on_episode(e, trace, params)
    return result


TRAIN_LOG_HEADER = "episode\ttask_id\tr_episode\tr_total\tw_adv\tw_gate\tbias\tbaseline"


def emit_training(result, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    text = TRAIN_LOG_HEADER + "\n" + "".join(line + "\n" for line in result.log)
    if result.diverged:
        text += f"# stopped: {result.error}\n"
    (out / "training.log").write_text(text, encoding="utf-8")
    (out / "policy.txt").write_text(result.params.to_text(), encoding="utf-8")
    return out
