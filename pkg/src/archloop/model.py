"""Shared domain types and the run-log record schema.

Every value object here is immutable and safe to share across threads.
The JSON field names used by ``to_dict``/``from_dict`` are frozen; they are
documented in ``docs/run_log_schema.json`` and must not drift.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Mapping

# Failure messages stored in diagnostic triples are capped so prompt size
# stays bounded while keeping enough traceback to be diagnosable.
MESSAGE_LIMIT = 2000


def digest(source_text: str) -> str:
    """Hex SHA-256 of the text; deterministic across runs and platforms."""
    return hashlib.sha256(source_text.encode("utf-8")).hexdigest()


def format_percent(fraction: float) -> str:
    """Render a [0,1] fraction as a percent with one decimal, e.g. '28.2%'."""
    return f"{fraction * 100:.1f}%"


class OutcomeKind(str, Enum):
    SUCCESS = "Success"
    VALIDATION_ERROR = "ValidationError"
    RUNTIME_ERROR = "RuntimeError"
    TIMEOUT = "Timeout"
    EXTRACTION_ERROR = "ExtractionError"


class Ablation(str, Enum):
    NONE = "None"
    NO_FEEDBACK = "NoFeedback"
    NO_REFERENCE = "NoReference"


@dataclass(frozen=True)
class EvaluationOutcome:
    """Result of evaluating one candidate: a proxy accuracy or a classified failure.

    Exactly one of ``accuracy``/``message`` is present, depending on ``kind``.
    """

    kind: OutcomeKind
    accuracy: float | None = None
    message: str | None = None

    def __post_init__(self) -> None:
        if self.kind is OutcomeKind.SUCCESS:
            if self.accuracy is None or self.message is not None:
                raise ValueError("success outcome requires accuracy and no message")
            if not 0.0 <= self.accuracy <= 1.0:
                raise ValueError(f"accuracy {self.accuracy} outside [0, 1]")
        else:
            if self.accuracy is not None or self.message is None:
                raise ValueError("failure outcome requires message and no accuracy")

    @property
    def is_success(self) -> bool:
        return self.kind is OutcomeKind.SUCCESS

    @classmethod
    def success(cls, accuracy: float) -> "EvaluationOutcome":
        return cls(kind=OutcomeKind.SUCCESS, accuracy=accuracy)

    @classmethod
    def failure(cls, kind: OutcomeKind, message: str) -> "EvaluationOutcome":
        if kind is OutcomeKind.SUCCESS:
            raise ValueError("failure() cannot build a Success outcome")
        return cls(kind=kind, message=message[:MESSAGE_LIMIT])

    def describe(self) -> str:
        """Human/prompt rendering: 'accuracy: 28.2%' or 'error (Timeout): ...'."""
        if self.is_success:
            return f"accuracy: {format_percent(self.accuracy)}"
        return f"error ({self.kind.value}): {self.message}"

    def to_dict(self) -> dict[str, Any]:
        if self.is_success:
            return {"kind": self.kind.value, "accuracy": self.accuracy}
        return {"kind": self.kind.value, "message": self.message}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "EvaluationOutcome":
        kind = OutcomeKind(data["kind"])
        if kind is OutcomeKind.SUCCESS:
            return cls.success(float(data["accuracy"]))
        return cls.failure(kind, str(data["message"]))


@dataclass(frozen=True)
class Candidate:
    """One generated architecture: source text plus identity metadata."""

    id: int
    iteration: int
    source_text: str
    source_hash: str

    def __post_init__(self) -> None:
        if self.iteration < 1:
            raise ValueError("iteration must be >= 1")
        if not self.source_text:
            raise ValueError("candidate source_text must be non-empty")
        if self.source_hash != digest(self.source_text):
            raise ValueError("source_hash does not match source_text")

    @classmethod
    def create(cls, id: int, iteration: int, source_text: str) -> "Candidate":
        return cls(id=id, iteration=iteration, source_text=source_text, source_hash=digest(source_text))

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "iteration": self.iteration,
            "source_text": self.source_text,
            "source_hash": self.source_hash,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Candidate":
        return cls(
            id=int(data["id"]),
            iteration=int(data["iteration"]),
            source_text=str(data["source_text"]),
            source_hash=str(data["source_hash"]),
        )


@dataclass(frozen=True)
class DiagnosticTriple:
    """(problem, suggestion, outcome) record of one improvement attempt.

    ``problem`` and ``suggestion`` come from the analysis that produced the
    attempt; they are empty only for the bootstrap entry of iteration 1 (or
    when the feedback channel is ablated).
    """

    problem: str
    suggestion: str
    outcome: EvaluationOutcome

    def to_dict(self) -> dict[str, Any]:
        return {
            "problem": self.problem,
            "suggestion": self.suggestion,
            "outcome": self.outcome.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "DiagnosticTriple":
        return cls(
            problem=str(data["problem"]),
            suggestion=str(data["suggestion"]),
            outcome=EvaluationOutcome.from_dict(data["outcome"]),
        )


@dataclass(frozen=True)
class ImproverOutput:
    """Structured analysis reply: diagnosis, cross-domain idea, concrete changes."""

    reason: str
    inspiration: str
    suggestions: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "reason": self.reason,
            "inspiration": self.inspiration,
            "suggestions": self.suggestions,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ImproverOutput":
        return cls(
            reason=str(data["reason"]),
            inspiration=str(data["inspiration"]),
            suggestions=str(data["suggestions"]),
        )


@dataclass(frozen=True)
class DatasetSpec:
    """Target dataset description used for prompts and output-shape checks."""

    name: str
    input_channels: int
    input_height: int
    input_width: int
    num_classes: int
    task_description: str

    def __post_init__(self) -> None:
        for dim_name in ("input_channels", "input_height", "input_width"):
            if getattr(self, dim_name) < 1:
                raise ValueError(f"{dim_name} must be positive")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "input_channels": self.input_channels,
            "input_height": self.input_height,
            "input_width": self.input_width,
            "num_classes": self.num_classes,
            "task_description": self.task_description,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "DatasetSpec":
        return cls(
            name=str(data["name"]),
            input_channels=int(data["input_channels"]),
            input_height=int(data["input_height"]),
            input_width=int(data["input_width"]),
            num_classes=int(data["num_classes"]),
            task_description=str(data["task_description"]),
        )


@dataclass(frozen=True)
class TrainConfig:
    """One-epoch proxy training protocol: SGD with momentum, cosine annealing.

    ``subset_fraction`` < 1.0 trains/evaluates on a seeded stratified subset;
    the full protocol always uses 1.0 (subsetting exists for smoke tests).
    """

    epochs: int = 1
    momentum: float = 0.9
    weight_decay: float = 5e-4
    learning_rate: float = 0.01
    cosine_annealing: bool = True
    batch_size: int = 128
    random_crop_pad: bool = True
    horizontal_flip: bool = True
    normalize: bool = True
    crop_padding: int = 4
    subset_fraction: float = 1.0

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 < self.subset_fraction <= 1.0:
            raise ValueError("subset_fraction must be in (0, 1]")

    def to_dict(self) -> dict[str, Any]:
        return {
            "epochs": self.epochs,
            "momentum": self.momentum,
            "weight_decay": self.weight_decay,
            "learning_rate": self.learning_rate,
            "cosine_annealing": self.cosine_annealing,
            "batch_size": self.batch_size,
            "random_crop_pad": self.random_crop_pad,
            "horizontal_flip": self.horizontal_flip,
            "normalize": self.normalize,
            "crop_padding": self.crop_padding,
            "subset_fraction": self.subset_fraction,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TrainConfig":
        return cls(**dict(data))


@dataclass(frozen=True)
class SamplingParams:
    """LLM sampling regime plus the reproducible-seed scheme.

    The effective per-call seed is ``base_seed + call_counter``; the caller
    advances the counter after every call so a run's full call sequence is
    replayable while successive calls still differ.
    """

    temperature: float = 0.7
    top_p: float = 0.9
    max_new_tokens: int = 2048
    base_seed: int = 0
    call_counter: int = 0

    def __post_init__(self) -> None:
        if self.temperature < 0.0:
            raise ValueError("temperature must be >= 0")
        if not 0.0 <= self.top_p <= 1.0:
            raise ValueError("top_p must be in [0, 1]")
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be >= 1")
        if self.call_counter < 0:
            raise ValueError("call_counter must be >= 0")

    @property
    def effective_seed(self) -> int:
        return self.base_seed + self.call_counter

    def with_counter(self, call_counter: int) -> "SamplingParams":
        return replace(self, call_counter=call_counter)

    def to_dict(self) -> dict[str, Any]:
        return {
            "temperature": self.temperature,
            "top_p": self.top_p,
            "max_new_tokens": self.max_new_tokens,
            "base_seed": self.base_seed,
            "call_counter": self.call_counter,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SamplingParams":
        return cls(**dict(data))


@dataclass(frozen=True)
class RunConfig:
    """Everything that defines one search run.

    ``seed`` is the run's base seed: it is copied into the sampling parameters
    at run start and also seeds the simulated backends.
    """

    max_iterations: int
    dataset: DatasetSpec
    seed: int
    sampling: SamplingParams = field(default_factory=SamplingParams)
    train: TrainConfig = field(default_factory=TrainConfig)
    window_size: int = 5
    evaluation_timeout: float = 1800.0
    extended_prompt: bool = False
    top_k_exemplars: int = 5
    ablation: Ablation = Ablation.NONE

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.window_size < 1:
            raise ValueError("window_size must be >= 1")
        if self.top_k_exemplars < 1:
            raise ValueError("top_k_exemplars must be >= 1")
        if self.evaluation_timeout <= 0:
            raise ValueError("evaluation_timeout must be positive")

    def effective_sampling(self) -> SamplingParams:
        return replace(self.sampling, base_seed=self.seed, call_counter=0)


@dataclass(frozen=True)
class RunLogRecord:
    """One appended line of the run log.

    ``source_hash``/``source_text`` are None when no code could be extracted
    for the iteration.  ``improver_output`` is None when the analysis step was
    skipped (feedback ablated) or its call failed.
    """

    iteration: int
    timestamp: str
    source_hash: str | None
    source_text: str | None
    outcome: EvaluationOutcome
    triple_appended: DiagnosticTriple
    best_accuracy_after: float
    prompt_digest: str
    improver_output: ImproverOutput | None = None

    def __post_init__(self) -> None:
        if self.iteration < 1:
            raise ValueError("iteration must be >= 1")
        if (self.source_hash is None) != (self.source_text is None):
            raise ValueError("source_hash and source_text must be absent together")

    def to_dict(self) -> dict[str, Any]:
        return {
            "iteration": self.iteration,
            "timestamp": self.timestamp,
            "source_hash": self.source_hash,
            "source_text": self.source_text,
            "outcome": self.outcome.to_dict(),
            "triple_appended": self.triple_appended.to_dict(),
            "best_accuracy_after": self.best_accuracy_after,
            "prompt_digest": self.prompt_digest,
            "improver_output": None if self.improver_output is None else self.improver_output.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunLogRecord":
        improver = data.get("improver_output")
        return cls(
            iteration=int(data["iteration"]),
            timestamp=str(data["timestamp"]),
            source_hash=None if data.get("source_hash") is None else str(data["source_hash"]),
            source_text=None if data.get("source_text") is None else str(data["source_text"]),
            outcome=EvaluationOutcome.from_dict(data["outcome"]),
            triple_appended=DiagnosticTriple.from_dict(data["triple_appended"]),
            best_accuracy_after=float(data["best_accuracy_after"]),
            prompt_digest=str(data["prompt_digest"]),
            improver_output=None if improver is None else ImproverOutput.from_dict(improver),
        )
