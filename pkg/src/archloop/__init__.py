"""Iterative LLM-driven architecture search with bounded feedback memory."""

from archloop.memory import HistoryWindow, append, render_history
from archloop.model import (
    Ablation,
    Candidate,
    DatasetSpec,
    DiagnosticTriple,
    EvaluationOutcome,
    ImproverOutput,
    OutcomeKind,
    RunConfig,
    RunLogRecord,
    SamplingParams,
    TrainConfig,
    digest,
)

__version__ = "0.1.0"

__all__ = [
    "Ablation",
    "Candidate",
    "DatasetSpec",
    "DiagnosticTriple",
    "EvaluationOutcome",
    "HistoryWindow",
    "ImproverOutput",
    "OutcomeKind",
    "RunConfig",
    "RunLogRecord",
    "SamplingParams",
    "TrainConfig",
    "append",
    "digest",
    "render_history",
    "__version__",
]
