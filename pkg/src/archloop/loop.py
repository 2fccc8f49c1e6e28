"""The iterative search loop: generate, evaluate, diagnose, remember, repeat.

Each iteration runs, in order:

1. build the generator prompt and call the generator LLM, extract the code;
2. validate then proxy-train the candidate;
3. update the best candidate on strict improvement;
4. append (previous suggestion, current outcome) to the history window;
5. call the improver LLM on the fresh outcome (unless feedback is ablated);
6. append one record to the run log.

Every candidate- or LLM-level failure is absorbed as a classified failed
iteration; the loop must survive arbitrarily long failure streaks.  Only
orchestrator faults (an unwritable log) abort a run.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Mapping, Protocol, Sequence

from archloop.gateway import EvaluationBackend
from archloop.llm import EmptyResponseError, TransportError
from archloop.memory import HistoryWindow, append
from archloop.model import (
    Ablation,
    Candidate,
    DiagnosticTriple,
    EvaluationOutcome,
    ImproverOutput,
    OutcomeKind,
    RunConfig,
    RunLogRecord,
    SamplingParams,
    digest,
)
from archloop.prompts import CodeExtractionError, GeneratorPromptInputs, PromptEngine, extract_code, parse_improver_response
from archloop.runlog import append_record, read_records, truncate_to


class CompletionClient(Protocol):
    def complete(self, system_prompt: str, user_prompt: str, params: SamplingParams) -> str: ...


ProgressCallback = Callable[[Mapping[str, Any]], None]


class LogExistsError(Exception):
    """Refusing to overwrite an existing, non-empty run log without force."""


def wall_clock(iteration: int) -> str:
    return datetime.now(timezone.utc).isoformat()


def stderr_progress(event: Mapping[str, Any]) -> None:
    best = event["best_accuracy"]
    print(
        f"[iter {event['iteration']}/{event['total']}] {event['kind']}"
        + (f" accuracy={event['accuracy']:.4f}" if event.get("accuracy") is not None else "")
        + f" best={best:.4f}",
        file=sys.stderr,
        flush=True,
    )


@dataclass(frozen=True)
class SearchBackends:
    """Everything the loop calls out to; swap these to run simulated or real."""

    generator: CompletionClient
    improver: CompletionClient
    evaluator: EvaluationBackend
    clock: Callable[[int], str] = wall_clock
    progress: ProgressCallback | None = None


@dataclass(frozen=True)
class SearchState:
    """Loop-carried state after ``iteration`` completed iterations."""

    iteration: int
    window: HistoryWindow
    best_candidate: Candidate | None = None
    best_accuracy: float = 0.0
    pending_suggestions: ImproverOutput | None = None
    llm_calls: int = 0
    # (source_text, accuracy) of successful candidates, best-first; feeds the
    # extended prompt's exemplar blocks.
    top_candidates: tuple[tuple[str, float], ...] = ()
    # Last window-size (source_text, outcome) pairs for iterations that
    # produced code; feeds the extended prompt's recent-attempt blocks.
    recent_attempts: tuple[tuple[str, EvaluationOutcome], ...] = ()

    @classmethod
    def initial(cls, config: RunConfig) -> "SearchState":
        return cls(iteration=0, window=HistoryWindow(capacity=config.window_size))


@dataclass(frozen=True)
class SearchResult:
    best_candidate: Candidate | None
    best_accuracy: float
    total_iterations: int
    successful_evaluations: int
    log_path: str

    def __post_init__(self) -> None:
        if self.successful_evaluations > self.total_iterations:
            raise ValueError("successful_evaluations cannot exceed total_iterations")


def _insert_top_candidate(
    top: tuple[tuple[str, float], ...], source: str, accuracy: float, keep: int
) -> tuple[tuple[str, float], ...]:
    ranked = sorted(top + ((source, accuracy),), key=lambda item: -item[1])
    return tuple(ranked[:keep])


def run_iteration(
    state: SearchState,
    config: RunConfig,
    backends: SearchBackends,
    engine: PromptEngine,
) -> tuple[SearchState, RunLogRecord]:
    if state.iteration >= config.max_iterations:
        raise ValueError("run already reached max_iterations")
    t = state.iteration + 1
    sampling = config.effective_sampling()

    extended = config.extended_prompt and bool(state.top_candidates)
    inputs = GeneratorPromptInputs(
        dataset=config.dataset,
        best_source=(
            state.best_candidate.source_text
            if state.best_candidate is not None and config.ablation is not Ablation.NO_REFERENCE
            else None
        ),
        previous_suggestions=(
            state.pending_suggestions if config.ablation is not Ablation.NO_FEEDBACK else None
        ),
        extended=extended,
        exemplars=state.top_candidates[: config.top_k_exemplars] if extended else (),
        recent_attempts=state.recent_attempts if extended else (),
    )
    generator_prompt = engine.build_generator_prompt(inputs)
    prompt_digest = digest(generator_prompt)

    llm_calls = state.llm_calls
    source: str | None = None
    outcome: EvaluationOutcome
    try:
        reply = backends.generator.complete("", generator_prompt, sampling.with_counter(llm_calls))
        llm_calls += 1
        source = extract_code(reply)
    except TransportError as exc:
        llm_calls += 1
        outcome = EvaluationOutcome.failure(OutcomeKind.RUNTIME_ERROR, f"llm transport: {exc}")
    except EmptyResponseError:
        llm_calls += 1
        outcome = EvaluationOutcome.failure(OutcomeKind.EXTRACTION_ERROR, "empty completion from generator")
    except CodeExtractionError as exc:
        outcome = EvaluationOutcome.failure(OutcomeKind.EXTRACTION_ERROR, str(exc))

    candidate: Candidate | None = None
    if source is not None:
        candidate = Candidate.create(id=t, iteration=t, source_text=source)
        outcome = backends.evaluator.assess(source, config.dataset, config.train, config.evaluation_timeout)

    best_candidate = state.best_candidate
    best_accuracy = state.best_accuracy
    if outcome.is_success and outcome.accuracy > state.best_accuracy:
        best_candidate = candidate
        best_accuracy = outcome.accuracy

    previous = state.pending_suggestions
    triple = DiagnosticTriple(
        problem=previous.reason if previous is not None else "",
        suggestion=previous.suggestions if previous is not None else "",
        outcome=outcome,
    )
    window = append(state.window, triple)

    improver_output: ImproverOutput | None = None
    if config.ablation is not Ablation.NO_FEEDBACK:
        improver_prompt = engine.build_improver_prompt(
            best_source=best_candidate.source_text if best_candidate is not None else "",
            best_accuracy=best_accuracy,
            current_source=source if source is not None else "",
            outcome=outcome,
            window=window,
        )
        try:
            improver_reply = backends.improver.complete("", improver_prompt, sampling.with_counter(llm_calls))
            improver_output = parse_improver_response(improver_reply)
        except (TransportError, EmptyResponseError):
            improver_output = None  # next iteration simply runs without suggestions
        llm_calls += 1

    record = RunLogRecord(
        iteration=t,
        timestamp=backends.clock(t),
        source_hash=candidate.source_hash if candidate is not None else None,
        source_text=candidate.source_text if candidate is not None else None,
        outcome=outcome,
        triple_appended=triple,
        best_accuracy_after=best_accuracy,
        prompt_digest=prompt_digest,
        improver_output=improver_output,
    )

    top_candidates = state.top_candidates
    if outcome.is_success and candidate is not None:
        top_candidates = _insert_top_candidate(
            top_candidates, candidate.source_text, outcome.accuracy, config.top_k_exemplars
        )
    recent_attempts = state.recent_attempts
    if candidate is not None:
        recent_attempts = (recent_attempts + ((candidate.source_text, outcome),))[-config.window_size :]

    new_state = SearchState(
        iteration=t,
        window=window,
        best_candidate=best_candidate,
        best_accuracy=best_accuracy,
        pending_suggestions=improver_output,
        llm_calls=llm_calls,
        top_candidates=top_candidates,
        recent_attempts=recent_attempts,
    )
    return new_state, record


def _emit(backends: SearchBackends, record: RunLogRecord, total: int) -> None:
    if backends.progress is None:
        return
    backends.progress(
        {
            "iteration": record.iteration,
            "total": total,
            "kind": record.outcome.kind.value,
            "accuracy": record.outcome.accuracy,
            "best_accuracy": record.best_accuracy_after,
        }
    )


def _drive(
    state: SearchState,
    successes: int,
    config: RunConfig,
    backends: SearchBackends,
    log_path: str | Path,
    engine: PromptEngine | None,
) -> SearchResult:
    engine = engine or PromptEngine()
    while state.iteration < config.max_iterations:
        state, record = run_iteration(state, config, backends, engine)
        append_record(log_path, record)
        if record.outcome.is_success:
            successes += 1
        _emit(backends, record, config.max_iterations)
    return SearchResult(
        best_candidate=state.best_candidate,
        best_accuracy=state.best_accuracy,
        total_iterations=state.iteration,
        successful_evaluations=successes,
        log_path=str(log_path),
    )


def run(
    config: RunConfig,
    backends: SearchBackends,
    log_path: str | Path,
    force: bool = False,
    engine: PromptEngine | None = None,
) -> SearchResult:
    """Run the full search from scratch, appending one record per iteration."""
    path = Path(log_path)
    if path.exists() and path.stat().st_size > 0:
        if not force:
            raise LogExistsError(f"{path} already exists; pass force to overwrite")
        path.unlink()
    path.parent.mkdir(parents=True, exist_ok=True)
    path.touch()
    return _drive(SearchState.initial(config), 0, config, backends, path, engine)


def replay_state(records: Sequence[RunLogRecord], config: RunConfig) -> tuple[SearchState, int]:
    """Reconstruct loop state (and the success count) from a log prefix."""
    state = SearchState.initial(config)
    successes = 0
    expected = 1
    for record in records:
        if record.iteration != expected:
            raise ValueError(f"log is not a contiguous prefix: expected iteration {expected}, got {record.iteration}")
        expected += 1
        outcome = record.outcome
        best_candidate = state.best_candidate
        best_accuracy = state.best_accuracy
        if outcome.is_success:
            successes += 1
            if outcome.accuracy > best_accuracy:
                best_candidate = Candidate(
                    id=record.iteration,
                    iteration=record.iteration,
                    source_text=record.source_text,
                    source_hash=record.source_hash,
                )
                best_accuracy = outcome.accuracy
        top_candidates = state.top_candidates
        if outcome.is_success and record.source_text is not None:
            top_candidates = _insert_top_candidate(
                top_candidates, record.source_text, outcome.accuracy, config.top_k_exemplars
            )
        recent_attempts = state.recent_attempts
        if record.source_text is not None:
            recent_attempts = (recent_attempts + ((record.source_text, outcome),))[-config.window_size :]
        calls_this_iteration = 1 if config.ablation is Ablation.NO_FEEDBACK else 2
        state = SearchState(
            iteration=record.iteration,
            window=append(state.window, record.triple_appended),
            best_candidate=best_candidate,
            best_accuracy=best_accuracy,
            pending_suggestions=record.improver_output,
            llm_calls=state.llm_calls + calls_this_iteration,
            top_candidates=top_candidates,
            recent_attempts=recent_attempts,
        )
    return state, successes


def resume(
    log_path: str | Path,
    config: RunConfig,
    backends: SearchBackends,
    engine: PromptEngine | None = None,
) -> SearchResult:
    """Continue an interrupted run from its log; a no-op on a completed log.

    With deterministic backends the concatenation of the old and new records
    is byte-identical to an uninterrupted run.
    """
    path = Path(log_path)
    records, clean_length = read_records(path)
    if clean_length < path.stat().st_size:
        truncate_to(path, clean_length)
    state, successes = replay_state(records, config)
    if state.iteration >= config.max_iterations:
        return SearchResult(
            best_candidate=state.best_candidate,
            best_accuracy=state.best_accuracy,
            total_iterations=state.iteration,
            successful_evaluations=successes,
            log_path=str(path),
        )
    return _drive(state, successes, config, backends, path, engine)
