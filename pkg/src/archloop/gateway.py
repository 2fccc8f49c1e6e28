"""Candidate evaluation backends and the worker wire protocol.

Evaluation is a two-stage gate: quick validation (instantiate, one forward
pass on a dummy batch, check the output shape) followed by one-epoch proxy
training.  No candidate reaches training without passing validation.

The production backend runs each stage in a fresh isolated subprocess: the
request is a single JSON document on the worker's stdin, the reply a single
JSON document on its stdout.  A hanging or crashing candidate can never take
the orchestrator down — the supervisor kills the process group on timeout and
classifies whatever came back.
"""

from __future__ import annotations

import json
import os
import shutil
import signal
import subprocess
import tempfile
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

from archloop.model import DatasetSpec, EvaluationOutcome, OutcomeKind, TrainConfig

PROTOCOL_VERSION = "1"

DEFAULT_TRAIN_SEED = 43

SCRATCH_ENV_VAR = "ARCHLOOP_SCRATCH_DIR"

# Worker error_kind values on the wire.
_ERROR_KIND_MAP = {
    "validation": OutcomeKind.VALIDATION_ERROR,
    "runtime": OutcomeKind.RUNTIME_ERROR,
}


@dataclass(frozen=True)
class TrainProtocolRequest:
    """One request document sent to the evaluation worker."""

    request_kind: str  # "validate" | "train_eval"
    source_text: str
    dataset: DatasetSpec
    train: TrainConfig
    seed: int = DEFAULT_TRAIN_SEED

    def __post_init__(self) -> None:
        if self.request_kind not in ("validate", "train_eval"):
            raise ValueError(f"unknown request_kind {self.request_kind!r}")
        if not self.source_text:
            raise ValueError("source_text must be non-empty")

    def to_dict(self) -> dict[str, Any]:
        return {
            "protocol_version": PROTOCOL_VERSION,
            "request_kind": self.request_kind,
            "source_text": self.source_text,
            "dataset": self.dataset.to_dict(),
            "train": self.train.to_dict(),
            "seed": self.seed,
        }


@dataclass(frozen=True)
class WorkerRunResult:
    """Raw material from one worker invocation, before classification."""

    timed_out: bool
    exit_code: int | None
    stdout: str
    stderr: str
    timeout: float


def _stderr_tail(stderr: str, max_lines: int = 5) -> str:
    lines = [line for line in stderr.strip().splitlines() if line.strip()]
    return "\n".join(lines[-max_lines:])


def parse_worker_reply(stdout: str) -> Mapping[str, Any] | None:
    """Parse the worker's single JSON reply document; None when malformed."""
    try:
        reply = json.loads(stdout)
    except (ValueError, TypeError):
        return None
    if not isinstance(reply, dict) or "status" not in reply:
        return None
    return reply


def classify_failure(result: WorkerRunResult) -> EvaluationOutcome:
    """Deterministically map a non-success worker run to a failure outcome."""
    if result.timed_out:
        return EvaluationOutcome.failure(
            OutcomeKind.TIMEOUT,
            f"evaluation exceeded {result.timeout:g}s and was killed",
        )
    reply = parse_worker_reply(result.stdout)
    if result.exit_code != 0:
        tail = _stderr_tail(result.stderr)
        detail = tail if tail else "no diagnostics on stderr"
        return EvaluationOutcome.failure(
            OutcomeKind.RUNTIME_ERROR,
            f"worker exited with code {result.exit_code}: {detail}",
        )
    if reply is None:
        return EvaluationOutcome.failure(
            OutcomeKind.RUNTIME_ERROR,
            f"malformed worker reply: {result.stdout[:200]!r}",
        )
    if reply.get("status") == "error":
        kind = _ERROR_KIND_MAP.get(str(reply.get("error_kind")), OutcomeKind.RUNTIME_ERROR)
        return EvaluationOutcome.failure(kind, str(reply.get("message", "worker reported an error")))
    return EvaluationOutcome.failure(
        OutcomeKind.RUNTIME_ERROR,
        f"worker reply had unexpected status {reply.get('status')!r}",
    )


class EvaluationBackend(ABC):
    """Interface the search loop talks to; real and simulated backends share it."""

    @abstractmethod
    def validate(self, source_text: str, dataset: DatasetSpec, timeout: float) -> EvaluationOutcome | None:
        """None when the candidate passes the shape check, else a failure outcome."""

    @abstractmethod
    def evaluate(
        self, source_text: str, dataset: DatasetSpec, train: TrainConfig, timeout: float
    ) -> EvaluationOutcome:
        """Proxy-train a validated candidate and return its outcome."""

    def assess(
        self, source_text: str, dataset: DatasetSpec, train: TrainConfig, timeout: float
    ) -> EvaluationOutcome:
        """Full two-stage evaluation: validation gates training."""
        failure = self.validate(source_text, dataset, timeout)
        if failure is not None:
            return failure
        return self.evaluate(source_text, dataset, train, timeout)


class SubprocessEvaluator(EvaluationBackend):
    """Runs the training worker, one fresh subprocess per protocol request.

    Each invocation gets its own scratch directory (also set as cwd and
    TMPDIR) that is removed afterwards, so candidates cannot leak state
    between evaluations.
    """

    def __init__(
        self,
        worker_argv: Sequence[str],
        train_seed: int = DEFAULT_TRAIN_SEED,
        env: Mapping[str, str] | None = None,
    ):
        if not worker_argv:
            raise ValueError("worker_argv must name the worker executable")
        self.worker_argv = tuple(worker_argv)
        self.train_seed = train_seed
        self.extra_env = dict(env or {})

    def _invoke(self, request: TrainProtocolRequest, timeout: float) -> WorkerRunResult:
        scratch = tempfile.mkdtemp(prefix="archloop-eval-")
        env = dict(os.environ)
        env.update(self.extra_env)
        env[SCRATCH_ENV_VAR] = scratch
        env["TMPDIR"] = scratch
        proc = subprocess.Popen(
            self.worker_argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
            cwd=scratch,
            env=env,
            start_new_session=True,
        )
        timed_out = False
        try:
            stdout, stderr = proc.communicate(json.dumps(request.to_dict()), timeout=timeout)
        except subprocess.TimeoutExpired:
            timed_out = True
            _kill_process_group(proc)
            stdout, stderr = proc.communicate()
        finally:
            shutil.rmtree(scratch, ignore_errors=True)
        return WorkerRunResult(
            timed_out=timed_out,
            exit_code=proc.returncode,
            stdout=stdout or "",
            stderr=stderr or "",
            timeout=timeout,
        )

    def validate(self, source_text: str, dataset: DatasetSpec, timeout: float) -> EvaluationOutcome | None:
        request = TrainProtocolRequest(
            request_kind="validate",
            source_text=source_text,
            dataset=dataset,
            train=TrainConfig(),
            seed=self.train_seed,
        )
        result = self._invoke(request, timeout)
        reply = parse_worker_reply(result.stdout)
        if not result.timed_out and result.exit_code == 0 and reply is not None and reply.get("status") == "ok":
            return None
        return classify_failure(result)

    def evaluate(
        self, source_text: str, dataset: DatasetSpec, train: TrainConfig, timeout: float
    ) -> EvaluationOutcome:
        request = TrainProtocolRequest(
            request_kind="train_eval",
            source_text=source_text,
            dataset=dataset,
            train=train,
            seed=self.train_seed,
        )
        result = self._invoke(request, timeout)
        reply = parse_worker_reply(result.stdout)
        if not result.timed_out and result.exit_code == 0 and reply is not None and reply.get("status") == "ok":
            accuracy = reply.get("accuracy")
            if isinstance(accuracy, (int, float)) and 0.0 <= float(accuracy) <= 1.0:
                return EvaluationOutcome.success(float(accuracy))
            return EvaluationOutcome.failure(
                OutcomeKind.RUNTIME_ERROR,
                f"worker reported ok without a usable accuracy: {accuracy!r}",
            )
        return classify_failure(result)


def _kill_process_group(proc: subprocess.Popen) -> None:
    # The worker runs in its own session; kill the whole group so stray
    # children of a hung candidate die with it.
    try:
        os.killpg(os.getpgid(proc.pid), signal.SIGKILL)
    except (ProcessLookupError, PermissionError, OSError):
        proc.kill()
