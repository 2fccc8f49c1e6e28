"""Command-line entry point: run, resume, analyze, and simulate subcommands."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from dataclasses import replace

from archloop.analytics import build_trajectories, format_summary_table, summarize, summary_to_dict, write_trajectory_csvs
from archloop.config import CliConfig, ConfigError, load_cli_config
from archloop.experiment import make_sim_backends, run_ablation_experiment
from archloop.gateway import SubprocessEvaluator
from archloop.llm import LlmClient
from archloop.loop import LogExistsError, SearchBackends, SearchResult, resume, run, stderr_progress
from archloop.prompts import PromptEngine
from archloop.runlog import CorruptLogError, read_records
from archloop.sim import SimLandscape

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def _build_backends(cfg: CliConfig, progress=stderr_progress) -> SearchBackends:
    if cfg.backend == "sim":
        landscape = SimLandscape.from_seed(
            dimension=cfg.sim.dimension,
            noise_amplitude=cfg.sim.noise_amplitude,
            failure_rate=cfg.sim.failure_rate,
            seed=cfg.run.seed,
        )
        sim = make_sim_backends(landscape, progress=progress)
        return sim
    generator = LlmClient(cfg.generator_endpoint)
    improver = LlmClient(cfg.improver_endpoint or cfg.generator_endpoint)
    evaluator = SubprocessEvaluator(cfg.worker_argv, train_seed=cfg.train_seed)
    return SearchBackends(generator=generator, improver=improver, evaluator=evaluator, progress=progress)


def _load_config(args: argparse.Namespace) -> CliConfig:
    cfg = load_cli_config(args.config)
    if getattr(args, "backend", None):
        cfg = replace(cfg, backend=args.backend)
        if cfg.backend == "llm" and cfg.generator_endpoint is None:
            raise ConfigError("llm.generator: required when backend is 'llm'")
    return cfg


def _resolve_log_path(args: argparse.Namespace, cfg: CliConfig) -> Path:
    log_path = getattr(args, "log", None) or cfg.log_path
    if not log_path:
        raise ConfigError("log_path: set it in the config or pass --log")
    return Path(log_path)


def _print_result(result: SearchResult) -> None:
    best = f"{result.best_accuracy:.4f}" if result.best_candidate is not None else "none"
    print(
        f"finished {result.total_iterations} iterations: "
        f"{result.successful_evaluations} successful evaluations, best accuracy {best}; "
        f"log at {result.log_path}"
    )


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    log_path = _resolve_log_path(args, cfg)
    engine = PromptEngine(cfg.template_dir)
    backends = _build_backends(cfg)
    try:
        result = run(cfg.run, backends, log_path, force=args.force, engine=engine)
    except LogExistsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    _print_result(result)
    return EXIT_OK


def cmd_resume(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    log_path = _resolve_log_path(args, cfg)
    if not log_path.exists():
        print(f"error: log file {log_path} does not exist", file=sys.stderr)
        return EXIT_USAGE
    engine = PromptEngine(cfg.template_dir)
    backends = _build_backends(cfg)
    result = resume(log_path, cfg.run, backends, engine=engine)
    _print_result(result)
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace) -> int:
    log_path = Path(args.log)
    if not log_path.exists():
        print(f"error: log file {log_path} does not exist", file=sys.stderr)
        return EXIT_USAGE
    try:
        records, _ = read_records(log_path)
    except CorruptLogError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if not records:
        print(f"error: log file {log_path} contains no records", file=sys.stderr)
        return EXIT_USAGE
    report = summarize(
        records,
        correlation_basis=args.correlation_basis,
        permutations=args.permutations,
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary_path = out_dir / "summary.json"
    summary_path.write_text(json.dumps(summary_to_dict(report), indent=2) + "\n", encoding="utf-8")
    series = build_trajectories(records, smoothing_window=args.smoothing_window)
    written = write_trajectory_csvs(series, out_dir)
    print(format_summary_table(report))
    print(f"\nwrote {summary_path}")
    for path in written.values():
        print(f"wrote {path}")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    seeds = list(range(args.seeds))
    report = run_ablation_experiment(
        seeds,
        iterations=cfg.run.max_iterations,
        dimension=cfg.sim.dimension,
        noise_amplitude=cfg.sim.noise_amplitude,
        failure_rate=cfg.sim.failure_rate,
        window_size=cfg.run.window_size,
        log_dir=args.out,
    )
    rows = [
        ("full loop", "full", report.full),
        ("no feedback", "no_feedback", report.no_feedback),
        ("no reference", "no_reference", report.no_reference),
    ]
    print(f"{'variant':<14} {'median best':>12} {'median improve':>15} {'mean successes':>15}")
    for label, variant, runs in rows:
        mean_successes = sum(stats.successes for stats in runs) / len(runs)
        print(
            f"{label:<14} {report.median_best(variant):>12.4f} "
            f"{report.median_improvement(variant):>15.4f} {mean_successes:>15.1f}"
        )
    wins = report.full_wins_vs_no_feedback()
    print(f"\nfull loop beats no-feedback on {wins}/{len(report.full)} seeds")
    if args.out:
        payload = {
            variant: [
                {
                    "seed": stats.seed,
                    "best_accuracy": stats.best_accuracy,
                    "first_accuracy": stats.first_accuracy,
                    "improvement": stats.improvement,
                    "successes": stats.successes,
                    "iterations": stats.iterations,
                }
                for stats in runs
            ]
            for _, variant, runs in rows
        }
        out_path = Path(args.out) / "ablation.json"
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        print(f"wrote {out_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="archloop",
        description="Iterative LLM-driven architecture search with bounded feedback memory.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a search from scratch")
    p_run.add_argument("--config", required=True, help="JSON config file")
    p_run.add_argument("--log", help="run log path (overrides config log_path)")
    p_run.add_argument("--force", action="store_true", help="overwrite an existing log")
    p_run.add_argument("--backend", choices=["llm", "sim"], help="override the configured backend")
    p_run.set_defaults(func=cmd_run)

    p_resume = sub.add_parser("resume", help="continue an interrupted run from its log")
    p_resume.add_argument("--config", required=True)
    p_resume.add_argument("--log", help="run log path (overrides config log_path)")
    p_resume.add_argument("--backend", choices=["llm", "sim"])
    p_resume.set_defaults(func=cmd_resume)

    p_analyze = sub.add_parser("analyze", help="summarize a run log and emit trajectory CSVs")
    p_analyze.add_argument("--log", required=True)
    p_analyze.add_argument("--out", required=True, help="output directory for summary.json and CSVs")
    p_analyze.add_argument(
        "--correlation-basis",
        choices=["success_index", "iteration_fallback"],
        default="success_index",
    )
    p_analyze.add_argument("--permutations", type=int, default=10_000, help="0 disables p-value estimation")
    p_analyze.add_argument("--smoothing-window", type=int, default=15)
    p_analyze.set_defaults(func=cmd_analyze)

    p_sim = sub.add_parser("simulate", help="run the multi-seed ablation comparison on the simulator")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--seeds", type=int, default=20, help="number of seeds (0..N-1)")
    p_sim.add_argument("--out", help="directory for per-run logs and ablation.json")
    p_sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CorruptLogError as exc:
        print(f"corrupt log: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
