from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import pytest

from archloop.gateway import (
    PROTOCOL_VERSION,
    SubprocessEvaluator,
    TrainProtocolRequest,
    WorkerRunResult,
    classify_failure,
    parse_worker_reply,
)
from archloop.model import OutcomeKind, TrainConfig

FIXTURES = Path(__file__).parent / "fixtures"


def worker(name: str) -> list[str]:
    return [sys.executable, str(FIXTURES / f"worker_{name}.py")]


SOURCE = "class Net:\n    pass\n"


def evaluator(name: str) -> SubprocessEvaluator:
    return SubprocessEvaluator(worker(name))


class TestProtocolRequest:
    def test_wire_shape(self, cifar10):
        request = TrainProtocolRequest("validate", SOURCE, cifar10, TrainConfig())
        wire = request.to_dict()
        assert wire["protocol_version"] == PROTOCOL_VERSION
        assert wire["request_kind"] == "validate"
        assert wire["seed"] == 43
        assert wire["dataset"]["num_classes"] == 10
        assert wire["train"]["batch_size"] == 128

    def test_rejects_empty_source(self, cifar10):
        with pytest.raises(ValueError):
            TrainProtocolRequest("validate", "", cifar10, TrainConfig())

    def test_rejects_unknown_kind(self, cifar10):
        with pytest.raises(ValueError):
            TrainProtocolRequest("fit", SOURCE, cifar10, TrainConfig())


class TestClassifyFailure:
    def test_timeout(self):
        result = WorkerRunResult(timed_out=True, exit_code=None, stdout="", stderr="", timeout=5.0)
        outcome = classify_failure(result)
        assert outcome.kind is OutcomeKind.TIMEOUT
        assert "5s" in outcome.message

    def test_validation_report(self):
        reply = json.dumps({"status": "error", "error_kind": "validation", "message": "bad shape"})
        result = WorkerRunResult(False, 0, reply, "", 5.0)
        outcome = classify_failure(result)
        assert outcome.kind is OutcomeKind.VALIDATION_ERROR
        assert outcome.message == "bad shape"

    def test_runtime_report(self):
        reply = json.dumps({"status": "error", "error_kind": "runtime", "message": "NaN loss"})
        outcome = classify_failure(WorkerRunResult(False, 0, reply, "", 5.0))
        assert outcome.kind is OutcomeKind.RUNTIME_ERROR

    def test_nonzero_exit_includes_last_traceback_line(self):
        stderr = 'Traceback (most recent call last):\n  File "w.py", line 5\nRuntimeError: tensor dimensions exploded\n'
        outcome = classify_failure(WorkerRunResult(False, 1, "", stderr, 5.0))
        assert outcome.kind is OutcomeKind.RUNTIME_ERROR
        assert "RuntimeError: tensor dimensions exploded" in outcome.message

    def test_malformed_reply(self):
        outcome = classify_failure(WorkerRunResult(False, 0, "not json", "", 5.0))
        assert outcome.kind is OutcomeKind.RUNTIME_ERROR
        assert "malformed worker reply" in outcome.message

    def test_parse_worker_reply(self):
        assert parse_worker_reply('{"status": "ok"}') == {"status": "ok"}
        assert parse_worker_reply("[]") is None
        assert parse_worker_reply("{}") is None
        assert parse_worker_reply("nope") is None


class TestSubprocessEvaluator:
    def test_validate_ok(self, cifar10):
        assert evaluator("ok").validate(SOURCE, cifar10, timeout=30.0) is None

    def test_evaluate_success(self, cifar10):
        outcome = evaluator("ok").evaluate(SOURCE, cifar10, TrainConfig(), timeout=30.0)
        assert outcome.is_success and outcome.accuracy == 0.42

    def test_assess_runs_both_stages(self, cifar10):
        outcome = evaluator("ok").assess(SOURCE, cifar10, TrainConfig(), timeout=30.0)
        assert outcome.is_success

    def test_validation_error_named_shapes(self, cifar10):
        outcome = evaluator("validation_error").assess(SOURCE, cifar10, TrainConfig(), timeout=30.0)
        assert outcome.kind is OutcomeKind.VALIDATION_ERROR
        assert "(2, 1)" in outcome.message and "(2, 10)" in outcome.message

    def test_validation_failure_blocks_training(self, cifar10):
        # The error worker would also "train"; a validation failure must win.
        backend = evaluator("validation_error")
        outcome = backend.assess(SOURCE, cifar10, TrainConfig(), timeout=30.0)
        assert outcome.kind is OutcomeKind.VALIDATION_ERROR

    def test_crash_classified_with_traceback(self, cifar10):
        outcome = evaluator("crash").assess(SOURCE, cifar10, TrainConfig(), timeout=30.0)
        assert outcome.kind is OutcomeKind.RUNTIME_ERROR
        assert "tensor dimensions exploded" in outcome.message

    def test_hang_killed_and_classified(self, cifar10):
        start = time.monotonic()
        outcome = evaluator("hang").assess(SOURCE, cifar10, TrainConfig(), timeout=2.0)
        elapsed = time.monotonic() - start
        assert outcome.kind is OutcomeKind.TIMEOUT
        assert elapsed < 30.0

    def test_garbage_reply(self, cifar10):
        outcome = evaluator("garbage").assess(SOURCE, cifar10, TrainConfig(), timeout=30.0)
        assert outcome.kind is OutcomeKind.RUNTIME_ERROR

    def test_runtime_error_reply(self, cifar10):
        outcome = evaluator("runtime_error").assess(SOURCE, cifar10, TrainConfig(), timeout=30.0)
        assert outcome.kind is OutcomeKind.RUNTIME_ERROR
        assert "NaN" in outcome.message

    def test_isolation_crash_then_next_evaluation_proceeds(self, cifar10):
        # A crashing candidate never takes the orchestrator down.
        crash = evaluator("crash")
        assert crash.assess(SOURCE, cifar10, TrainConfig(), timeout=30.0).kind is OutcomeKind.RUNTIME_ERROR
        ok = evaluator("ok")
        assert ok.assess(SOURCE, cifar10, TrainConfig(), timeout=30.0).is_success

    def test_request_seed_and_train_config_on_wire(self, cifar10):
        backend = SubprocessEvaluator(worker("echo_request"), train_seed=43)
        outcome = backend.evaluate(SOURCE, cifar10, TrainConfig(subset_fraction=0.01), timeout=30.0)
        echoed = json.loads(outcome.message)
        assert echoed["seed"] == 43
        assert echoed["request_kind"] == "train_eval"
        assert echoed["train"]["subset_fraction"] == 0.01
        assert echoed["train"]["momentum"] == 0.9
        assert echoed["train"]["weight_decay"] == 5e-4
        assert echoed["train"]["learning_rate"] == 0.01
        assert echoed["train"]["batch_size"] == 128

    def test_rejects_empty_argv(self):
        with pytest.raises(ValueError):
            SubprocessEvaluator([])
