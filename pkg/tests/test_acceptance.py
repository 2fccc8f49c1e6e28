"""Acceptance suite: every exit criterion at its stated tolerance.

Each test prints one `[ACCEPTANCE] <criterion>: PASS|FAIL` line; run with
``pytest tests/test_acceptance.py -v -s`` to see them live.  Everything here
uses the simulated backend and scripted fixtures only.
"""

from __future__ import annotations

import math
import random
import sys
import time
from contextlib import contextmanager
from itertools import permutations as iter_permutations
from pathlib import Path

import pytest

from archloop.analytics import build_trajectories, kendall, spearman, summarize, summary_to_dict
from archloop.experiment import make_sim_backends, make_sim_config, run_ablation_experiment
from archloop.gateway import SubprocessEvaluator
from archloop.loop import SearchBackends, replay_state, resume, run
from archloop.memory import HistoryWindow, append, render_history
from archloop.model import DiagnosticTriple, OutcomeKind, RunLogRecord, digest
from archloop.prompts import PromptEngine
from archloop.runlog import read_records
from archloop.sim import SimLandscape, sim_clock
from tests.conftest import (
    ScriptedClient,
    ScriptedEvaluator,
    failure,
    generator_reply,
    improver_reply,
    make_config,
    net_source,
    success,
    triple,
)
from tests.test_analytics import (
    failure_record,
    oracle_kendall,
    oracle_smoothed,
    oracle_spearman,
    random_log,
    success_record,
)

FIXTURES = Path(__file__).parent / "fixtures"
ENGINE = PromptEngine()


@contextmanager
def criterion(name: str):
    try:
        yield
    except BaseException:
        print(f"[ACCEPTANCE] {name}: FAIL")
        raise
    print(f"[ACCEPTANCE] {name}: PASS")


def random_triple(rng: random.Random) -> DiagnosticTriple:
    if rng.random() < 0.5:
        outcome = success(rng.randrange(1000) / 1000)
    else:
        kind = rng.choice([k for k in OutcomeKind if k is not OutcomeKind.SUCCESS])
        outcome = failure(kind, f"err-{rng.randrange(10_000)}")
    return triple(problem=f"p{rng.randrange(10_000)}", suggestion=f"s{rng.randrange(10_000)}", outcome=outcome)


def test_memory_boundedness_and_markov_property():
    with criterion("memory boundedness & Markov property"):
        rng = random.Random(424_242)
        start = time.monotonic()
        for _ in range(1000):
            capacity = rng.choice([1, 3, 5, 8])
            length = rng.randrange(0, 51)
            triples = [random_triple(rng) for _ in range(length)]

            window = HistoryWindow(capacity=capacity)
            for t in triples:
                window = append(window, t)
            assert len(window) == min(length, capacity)
            assert window.entries == tuple(triples[-capacity:] if length else ())

            # K-order Markov property: prepending older history must not
            # change the rendering once the window is full.
            prefix = [random_triple(rng) for _ in range(rng.randrange(0, 25))]
            prefixed = HistoryWindow(capacity=capacity)
            for t in prefix + triples:
                prefixed = append(prefixed, t)
            if length >= capacity:
                assert render_history(prefixed) == render_history(window)
        elapsed = time.monotonic() - start
        assert elapsed < 5.0, f"took {elapsed:.2f}s, budget 5s"


SEVEN_STEP = [
    success(0.1),
    success(0.3),
    success(0.2),
    failure(OutcomeKind.RUNTIME_ERROR, "crash"),
    success(0.3),
    success(0.35),
    failure(OutcomeKind.TIMEOUT, "hang"),
]


def scripted_backends(outcomes, iterations):
    return SearchBackends(
        generator=ScriptedClient([generator_reply(i) for i in range(1, iterations + 1)]),
        improver=ScriptedClient([improver_reply(i) for i in range(1, iterations + 1)]),
        evaluator=ScriptedEvaluator(outcomes),
        clock=sim_clock,
    )


def test_algorithm_conformance(tmp_path):
    with criterion("algorithm conformance (7-step trace + strict best update)"):
        config = make_config(iterations=7)
        log_path = tmp_path / "trace.jsonl"
        result = run(config, scripted_backends(list(SEVEN_STEP), 7), log_path, engine=ENGINE)
        records, _ = read_records(log_path)
        assert [r.best_accuracy_after for r in records] == [0.1, 0.3, 0.3, 0.3, 0.3, 0.35, 0.35]
        assert result.best_accuracy == 0.35
        assert result.best_candidate.iteration == 6
        state, _ = replay_state(records, config)
        assert [t.outcome for t in state.window.entries] == SEVEN_STEP[2:]
        assert [t.suggestion for t in state.window.entries] == [f"change-{i}" for i in range(2, 7)]

        # Exact tie: the earlier candidate keeps the best slot.
        tie_path = tmp_path / "tie.jsonl"
        tie_config = make_config(iterations=2)
        tie_result = run(tie_config, scripted_backends([success(0.3), success(0.3)], 2), tie_path, engine=ENGINE)
        assert tie_result.best_accuracy == 0.3
        assert tie_result.best_candidate.iteration == 1
        tie_records, _ = read_records(tie_path)
        assert tie_records[1].best_accuracy_after == 0.3


def test_rank_statistics_oracle():
    with criterion("rank-statistics oracle (720 permutations + 200 tied sequences)"):
        start = time.monotonic()
        xs6 = [1, 2, 3, 4, 5, 6]
        for perm in iter_permutations(xs6):
            ys = list(perm)
            assert abs(spearman(xs6, ys) - oracle_spearman(xs6, ys)) <= 1e-12
            assert abs(kendall(xs6, ys) - oracle_kendall(xs6, ys)) <= 1e-12
        rng = random.Random(31_337)
        checked = 0
        while checked < 200:
            n = rng.randrange(2, 13)
            xs = [rng.randrange(0, 5) for _ in range(n)]
            ys = [rng.randrange(0, 5) for _ in range(n)]
            if len(set(xs)) < 2 or len(set(ys)) < 2:
                continue
            assert abs(spearman(xs, ys) - oracle_spearman(xs, ys)) <= 1e-12
            assert abs(kendall(xs, ys) - oracle_kendall(xs, ys)) <= 1e-12
            checked += 1
        elapsed = time.monotonic() - start
        assert elapsed < 10.0, f"took {elapsed:.2f}s, budget 10s"


def test_trajectory_construction():
    with criterion("trajectory construction (fallback fill, best-so-far, w=15 smoothing)"):
        rng = random.Random(2024)
        for case in range(100):
            length = rng.randrange(1, 80)
            records = random_log(rng, length, all_failures=(case % 10 == 0))
            series = build_trajectories(records, smoothing_window=15)

            filled = []
            last = 0.0
            best_values = []
            best = 0.0
            for record in records:
                if record.outcome.is_success:
                    last = record.outcome.accuracy
                    best = max(best, record.outcome.accuracy)
                filled.append(last)
                best_values.append(best)
            assert series.per_iteration == tuple(filled)       # exact
            assert series.best_so_far == tuple(best_values)    # exact
            for got, want in zip(series.smoothed, oracle_smoothed(filled, 15)):
                assert abs(got - want) <= 1e-12


def test_ablation_reproduction(tmp_path):
    with criterion("ablation reproduction (memory and reference both matter)"):
        start = time.monotonic()
        seeds = list(range(20))
        report = run_ablation_experiment(
            seeds,
            iterations=150,
            dimension=8,
            noise_amplitude=0.02,
            failure_rate=0.2,
            log_dir=tmp_path,
        )
        elapsed = time.monotonic() - start
        full_median = report.median_best("full")
        no_feedback_median = report.median_best("no_feedback")
        no_reference_median = report.median_best("no_reference")
        assert full_median > no_feedback_median
        wins = report.full_wins_vs_no_feedback()
        assert wins >= math.ceil(0.7 * len(seeds)), f"full loop won only {wins}/{len(seeds)} seeds"
        assert no_reference_median < full_median
        # The ablated loop not only ends lower: it barely improves on its own
        # first success compared to the full loop.
        assert report.median_improvement("no_feedback") < 0.5 * report.median_improvement("full")
        assert elapsed < 60.0, f"took {elapsed:.2f}s, budget 60s"


def test_determinism_and_resume(tmp_path):
    with criterion("determinism & resume (byte-identical logs, all boundaries)"):
        config = make_sim_config(seed=11, iterations=50)
        landscape = SimLandscape.from_seed(seed=11)

        first = tmp_path / "first.jsonl"
        second = tmp_path / "second.jsonl"
        run(config, make_sim_backends(landscape), first)
        run(config, make_sim_backends(landscape), second)
        reference = first.read_bytes()
        assert reference == second.read_bytes()

        lines = reference.split(b"\n")[:-1]
        assert len(lines) == 50
        for boundary in range(0, 50):
            partial = tmp_path / f"boundary_{boundary}.jsonl"
            partial.write_bytes(b"".join(line + b"\n" for line in lines[:boundary]))
            resume(partial, config, make_sim_backends(landscape))
            assert partial.read_bytes() == reference, f"divergence after resume at record {boundary}"


def test_robustness(tmp_path):
    with criterion("robustness (crash/hang/empty/malformed absorbed; 100% failure run)"):
        replies = [
            generator_reply(1).replace("TAG = 1", "MODE=crash"),
            generator_reply(2).replace("TAG = 2", "MODE=hang"),
            generator_reply(3).replace("TAG = 3", "MODE=garbage"),
            "",                      # empty generator reply
            "no code in this reply"  # malformed generator reply
            ,
            generator_reply(6),
        ]
        backends = SearchBackends(
            generator=ScriptedClient(replies),
            improver=ScriptedClient([improver_reply(i) for i in range(1, 7)]),
            evaluator=SubprocessEvaluator([sys.executable, str(FIXTURES / "worker_dispatch.py")]),
            clock=sim_clock,
        )
        config = make_config(iterations=6, evaluation_timeout=5.0)
        log_path = tmp_path / "robust.jsonl"
        result = run(config, backends, log_path, engine=ENGINE)
        records, _ = read_records(log_path)
        kinds = [r.outcome.kind for r in records]
        assert kinds == [
            OutcomeKind.RUNTIME_ERROR,
            OutcomeKind.TIMEOUT,
            OutcomeKind.RUNTIME_ERROR,
            OutcomeKind.EXTRACTION_ERROR,
            OutcomeKind.EXTRACTION_ERROR,
            OutcomeKind.SUCCESS,
        ]
        assert result.total_iterations == 6
        assert result.successful_evaluations == 1

        # A 100%-failure simulated run completes and reports cleanly.
        all_fail_config = make_sim_config(seed=2, iterations=30)
        landscape = SimLandscape.from_seed(seed=2, failure_rate=1.0)
        all_fail_log = tmp_path / "allfail.jsonl"
        all_fail_result = run(all_fail_config, make_sim_backends(landscape), all_fail_log)
        assert all_fail_result.successful_evaluations == 0
        assert all_fail_result.best_candidate is None
        all_fail_records, _ = read_records(all_fail_log)
        report = summarize(all_fail_records)
        assert report.best_accuracy is None
        assert "no successful evaluations" in report.p_value_note


def _synthetic_table_log() -> list[RunLogRecord]:
    """2000 iterations, 1519 successes, first success 0.282, maximum 0.692."""
    rng = random.Random(1519)
    failure_slots = set(rng.sample(range(2, 2001), 2000 - 1519))
    records = []
    best = 0.0
    success_index = 0
    for iteration in range(1, 2001):
        if iteration in failure_slots:
            records.append(failure_record(iteration, best))
            continue
        success_index += 1
        if success_index == 1:
            accuracy = 0.282
        elif success_index == 1519:
            accuracy = 0.692
        else:
            accuracy = 0.282 + 0.40 * rng.random()
        best = max(best, accuracy)
        records.append(success_record(iteration, accuracy, best))
    return records


def test_summary_arithmetic():
    with criterion("summary arithmetic (improvement +41.0 pp, success rate 76.0%)"):
        records = _synthetic_table_log()
        assert len(records) == 2000
        report = summarize(records, permutations=0)
        assert report.total_iterations == 2000
        assert report.successful_evaluations == 1519
        assert report.first_accuracy == 0.282
        assert report.best_accuracy == 0.692
        assert abs(report.improvement - 0.410) <= 1e-12
        rendered = summary_to_dict(report)
        assert rendered["improvement_display"] == "+41.0"
        assert rendered["success_rate_display"] == "76.0%"
