"""Command line: ``run``, ``train`` and ``report``.

Every setting comes from flags or a config file; environment variables are
never read.
"""

import argparse
import sys
from pathlib import Path

from . import harness
from .config import load_config
from .discriminator import load_facts
from .errors import ConfigError, SuiteError
from .haro import PolicyParams
from .tasks import default_facts_path, default_suite_path, load_suite, scripted_suite_path

_SUITES = {"default": default_suite_path, "scripted": scripted_suite_path}


def _suite(value):
    return _SUITES[value]() if value in _SUITES else Path(value)


def _u64(text):
    value = int(text, 0)
    if not 0 <= value < 1 << 64:
        raise argparse.ArgumentTypeError(f"seed must be a 64-bit unsigned integer (got {text})")
    return value


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected an integer ≥ 1 (got {text})")
    return value


def _common(p):
    p.add_argument("--suite", default="default", help="suite file, or 'default' / 'scripted' for the shipped ones")
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--seed", type=_u64, help="64-bit seed (overrides the config file)")
    p.add_argument("--eta-lr", type=float, help="learning rate override")
    p.add_argument("--backend", choices=("scripted", "moe"), default="scripted")
    p.add_argument("--out", default="out", help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(prog="dcot", description="Dynamic chain-of-thought benchmark harness")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a suite and write run.csv, comparison.txt, traces.log")
    _common(run)
    run.add_argument("--mode", choices=tuple(harness.MODES), default="both")
    run.add_argument("--jobs", type=_positive, default=1)
    run.add_argument("--facts", help="fact table (TSV) for the discriminator; 'none' disables it")
    run.add_argument("--policy", help="policy.txt written by train")

    train = sub.add_parser("train", help="train the selection policy and write training.log, policy.txt")
    _common(train)
    train.add_argument("--episodes", type=int, required=True)
    train.add_argument("--policy", help="start from this policy.txt")

    report = sub.add_parser("report", help="print the comparison table of an earlier run")
    report.add_argument("--in", dest="in_dir", required=True)
    return parser


def _config(args):
    return load_config(args.config, {"seed": args.seed, "eta_lr": args.eta_lr})


def _cmd_run(args):
    config = _config(args)
    tasks = load_suite(_suite(args.suite))
    store = None
    if args.facts != "none":
        store = load_facts(args.facts or default_facts_path())
    policy = PolicyParams.from_text(Path(args.policy).read_text(encoding="utf-8")) if args.policy else None
    report = harness.run_suite(tasks, config, args.mode, args.jobs, args.backend, store, policy)
    out = harness.emit_report(report, args.out)
    sys.stdout.write(harness.comparison_table(report))
    sys.stdout.write(f"wrote {out}\n")
    for row in report.rows:
        if row.aborted:
            sys.stderr.write(f"aborted: {row.task_id} ({row.mode}): {row.error}\n")
    return 1 if report.any_aborted else 0


def _cmd_train(args):
    if args.episodes < 1:
        raise ValueError(f"--episodes must be ≥ 1 (got {args.episodes})")
    config = _config(args)
    tasks = load_suite(_suite(args.suite))
    start = PolicyParams.from_text(Path(args.policy).read_text(encoding="utf-8")) if args.policy else None
    result = harness.train(tasks, args.episodes, config, start, args.backend)
    out = harness.emit_training(result, args.out)
    if result.curve:
        width = min(50, len(result.curve))
        first, last = result.window_means(width)
        sys.stdout.write(f"episodes {len(result.curve)}  mean R_episode first {width}: {first:.4f}  last {width}: {last:.4f}\n")
    sys.stdout.write(f"wrote {out}\n")
    if result.diverged:
        sys.stderr.write(f"training stopped: {result.error}\n")
        return 1
    return 0


def _cmd_report(args):
    report = harness.read_report(args.in_dir)
    sys.stdout.write(harness.comparison_table(report))
    return 1 if report.any_aborted else 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "train": _cmd_train, "report": _cmd_report}[args.command]
    try:
        return handler(args)
    except (ConfigError, SuiteError, ValueError, OSError) as exc:
        sys.stderr.write(f"dcot {args.command}: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
