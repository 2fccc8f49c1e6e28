from __future__ import annotations

import pytest

from archloop.datasets import get_dataset
from archloop.gateway import EvaluationBackend
from archloop.model import (
    DatasetSpec,
    DiagnosticTriple,
    EvaluationOutcome,
    OutcomeKind,
    RunConfig,
    SamplingParams,
    TrainConfig,
)


def success(accuracy: float) -> EvaluationOutcome:
    return EvaluationOutcome.success(accuracy)


def failure(kind: OutcomeKind = OutcomeKind.RUNTIME_ERROR, message: str = "boom") -> EvaluationOutcome:
    return EvaluationOutcome.failure(kind, message)


def triple(problem: str = "p", suggestion: str = "s", outcome: EvaluationOutcome | None = None) -> DiagnosticTriple:
    return DiagnosticTriple(problem=problem, suggestion=suggestion, outcome=outcome or success(0.5))


@pytest.fixture
def cifar10() -> DatasetSpec:
    return get_dataset("CIFAR-10")


def make_config(iterations: int = 5, **overrides) -> RunConfig:
    defaults = dict(
        max_iterations=iterations,
        dataset=get_dataset("CIFAR-10"),
        seed=0,
        sampling=SamplingParams(),
        train=TrainConfig(),
        window_size=5,
        evaluation_timeout=30.0,
    )
    defaults.update(overrides)
    return RunConfig(**defaults)


class ScriptedClient:
    """Completion client that replays canned replies (or raises canned errors)."""

    def __init__(self, replies):
        self.replies = list(replies)
        self.calls: list[tuple[str, str, SamplingParams]] = []

    def complete(self, system_prompt, user_prompt, params):
        self.calls.append((system_prompt, user_prompt, params))
        if not self.replies:
            raise AssertionError("scripted client ran out of replies")
        reply = self.replies.pop(0)
        if isinstance(reply, Exception):
            raise reply
        return reply


class ScriptedEvaluator(EvaluationBackend):
    """Evaluation backend that replays canned outcomes, bypassing the two stages."""

    def __init__(self, outcomes):
        self.outcomes = list(outcomes)
        self.assessed: list[str] = []

    def validate(self, source_text, dataset, timeout):
        return None

    def evaluate(self, source_text, dataset, train, timeout):
        raise AssertionError("scripted evaluator serves assess() directly")

    def assess(self, source_text, dataset, train, timeout):
        self.assessed.append(source_text)
        if not self.outcomes:
            raise AssertionError("scripted evaluator ran out of outcomes")
        return self.outcomes.pop(0)


def net_source(tag: int) -> str:
    return f"class Net:\n    TAG = {tag}"


def generator_reply(tag: int) -> str:
    return f"Candidate below.\n\n```python\n{net_source(tag)}\n```\n"


def improver_reply(tag: int) -> str:
    return f"REASON: reason-{tag}\nINSPIRATION: idea-{tag}\nSUGGESTIONS: change-{tag}\n"
