"""Multi-seed simulated experiments: the full loop versus its ablated variants."""

from __future__ import annotations

import statistics
import tempfile
from dataclasses import dataclass
from pathlib import Path

from archloop.analytics import summarize
from archloop.datasets import get_dataset
from archloop.loop import SearchBackends, run
from archloop.model import Ablation, RunConfig
from archloop.runlog import read_records
from archloop.sim import SimEvaluator, SimGeneratorClient, SimImproverClient, SimLandscape, sim_clock


def make_sim_backends(landscape: SimLandscape, progress=None) -> SearchBackends:
    return SearchBackends(
        generator=SimGeneratorClient(landscape),
        improver=SimImproverClient(landscape),
        evaluator=SimEvaluator(landscape),
        clock=sim_clock,
        progress=progress,
    )


def make_sim_config(
    seed: int,
    iterations: int,
    ablation: Ablation = Ablation.NONE,
    window_size: int = 5,
) -> RunConfig:
    return RunConfig(
        max_iterations=iterations,
        dataset=get_dataset("CIFAR-10"),
        seed=seed,
        window_size=window_size,
        evaluation_timeout=60.0,
        ablation=ablation,
    )


@dataclass(frozen=True)
class SimRunStats:
    """Outcome of one simulated run, condensed for cross-variant comparison."""

    seed: int
    ablation: Ablation
    iterations: int
    successes: int
    first_accuracy: float | None
    best_accuracy: float
    improvement: float | None
    log_path: str


def run_sim_search(
    seed: int,
    iterations: int,
    dimension: int = 8,
    noise_amplitude: float = 0.02,
    failure_rate: float = 0.2,
    ablation: Ablation = Ablation.NONE,
    window_size: int = 5,
    log_path: str | Path | None = None,
    progress=None,
) -> SimRunStats:
    landscape = SimLandscape.from_seed(
        dimension=dimension,
        noise_amplitude=noise_amplitude,
        failure_rate=failure_rate,
        seed=seed,
    )
    if log_path is None:
        log_path = Path(tempfile.mkdtemp(prefix="archloop-sim-")) / "run.jsonl"
    config = make_sim_config(seed, iterations, ablation=ablation, window_size=window_size)
    result = run(config, make_sim_backends(landscape, progress=progress), log_path, force=True)
    records, _ = read_records(log_path)
    report = summarize(records, permutations=0)
    return SimRunStats(
        seed=seed,
        ablation=ablation,
        iterations=result.total_iterations,
        successes=result.successful_evaluations,
        first_accuracy=report.first_accuracy,
        best_accuracy=result.best_accuracy,
        improvement=report.improvement,
        log_path=str(log_path),
    )


@dataclass(frozen=True)
class AblationReport:
    """Per-variant results over a fixed seed list, plus the headline medians."""

    full: tuple[SimRunStats, ...]
    no_feedback: tuple[SimRunStats, ...]
    no_reference: tuple[SimRunStats, ...]

    def median_best(self, variant: str) -> float:
        runs: tuple[SimRunStats, ...] = getattr(self, variant)
        return statistics.median(stats.best_accuracy for stats in runs)

    def median_improvement(self, variant: str) -> float:
        runs: tuple[SimRunStats, ...] = getattr(self, variant)
        return statistics.median(
            stats.improvement if stats.improvement is not None else 0.0 for stats in runs
        )

    def full_wins_vs_no_feedback(self) -> int:
        return sum(
            1
            for full_stats, ablated_stats in zip(self.full, self.no_feedback)
            if full_stats.best_accuracy > ablated_stats.best_accuracy
        )


def run_ablation_experiment(
    seeds: list[int],
    iterations: int = 150,
    dimension: int = 8,
    noise_amplitude: float = 0.02,
    failure_rate: float = 0.2,
    window_size: int = 5,
    log_dir: str | Path | None = None,
) -> AblationReport:
    """Run every seed under the full loop and both ablations."""
    by_variant: dict[Ablation, list[SimRunStats]] = {ablation: [] for ablation in Ablation}
    base = Path(log_dir) if log_dir is not None else Path(tempfile.mkdtemp(prefix="archloop-ablation-"))
    base.mkdir(parents=True, exist_ok=True)
    for seed in seeds:
        for ablation in Ablation:
            log_path = base / f"seed{seed}_{ablation.value}.jsonl"
            by_variant[ablation].append(
                run_sim_search(
                    seed,
                    iterations,
                    dimension=dimension,
                    noise_amplitude=noise_amplitude,
                    failure_rate=failure_rate,
                    ablation=ablation,
                    window_size=window_size,
                    log_path=log_path,
                )
            )
    return AblationReport(
        full=tuple(by_variant[Ablation.NONE]),
        no_feedback=tuple(by_variant[Ablation.NO_FEEDBACK]),
        no_reference=tuple(by_variant[Ablation.NO_REFERENCE]),
    )
