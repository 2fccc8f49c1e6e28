from __future__ import annotations

import hashlib
import random

import pytest
from hypothesis import given, strategies as st

from archloop.model import (
    Candidate,
    DiagnosticTriple,
    EvaluationOutcome,
    ImproverOutput,
    MESSAGE_LIMIT,
    OutcomeKind,
    RunConfig,
    RunLogRecord,
    SamplingParams,
    digest,
    format_percent,
)
from tests.conftest import make_config, success, failure, triple


class TestDigest:
    def test_empty_string_fixed_digest(self):
        assert digest("") == hashlib.sha256(b"").hexdigest()
        assert digest("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"

    def test_deterministic(self):
        text = "class Net:\n    pass\n"
        assert digest(text) == digest(text)

    def test_single_byte_mutations_differ(self):
        rng = random.Random(1234)
        base = "class Net:\n" + "".join(rng.choice("abcdefgh \n") for _ in range(400))
        base_digest = digest(base)
        for _ in range(1000):
            position = rng.randrange(len(base))
            replacement = rng.choice("ABCDEFGH")
            mutated = base[:position] + replacement + base[position + 1 :]
            assert mutated != base
            assert digest(mutated) != base_digest


class TestEvaluationOutcome:
    def test_success_requires_accuracy_only(self):
        outcome = EvaluationOutcome.success(0.5)
        assert outcome.accuracy == 0.5 and outcome.message is None
        with pytest.raises(ValueError):
            EvaluationOutcome(kind=OutcomeKind.SUCCESS, accuracy=None, message=None)
        with pytest.raises(ValueError):
            EvaluationOutcome(kind=OutcomeKind.SUCCESS, accuracy=0.5, message="no")

    def test_failure_requires_message_only(self):
        outcome = failure(OutcomeKind.TIMEOUT, "slow")
        assert outcome.message == "slow" and outcome.accuracy is None
        with pytest.raises(ValueError):
            EvaluationOutcome(kind=OutcomeKind.TIMEOUT, accuracy=0.2, message="slow")
        with pytest.raises(ValueError):
            EvaluationOutcome(kind=OutcomeKind.TIMEOUT)

    def test_accuracy_bounds(self):
        with pytest.raises(ValueError):
            EvaluationOutcome.success(1.5)
        with pytest.raises(ValueError):
            EvaluationOutcome.success(-0.1)
        EvaluationOutcome.success(0.0)
        EvaluationOutcome.success(1.0)

    def test_message_truncated(self):
        outcome = EvaluationOutcome.failure(OutcomeKind.RUNTIME_ERROR, "x" * (MESSAGE_LIMIT + 500))
        assert len(outcome.message) == MESSAGE_LIMIT

    def test_describe(self):
        assert success(0.282).describe() == "accuracy: 28.2%"
        assert failure(OutcomeKind.TIMEOUT, "killed").describe() == "error (Timeout): killed"

    def test_format_percent(self):
        assert format_percent(0.5) == "50.0%"
        assert format_percent(0.282) == "28.2%"
        assert format_percent(1.0) == "100.0%"


class TestCandidate:
    def test_create_computes_digest(self):
        candidate = Candidate.create(id=1, iteration=1, source_text="class Net: pass")
        assert candidate.source_hash == digest("class Net: pass")

    def test_rejects_empty_source(self):
        with pytest.raises(ValueError):
            Candidate.create(id=1, iteration=1, source_text="")

    def test_rejects_mismatched_hash(self):
        with pytest.raises(ValueError):
            Candidate(id=1, iteration=1, source_text="a", source_hash="bogus")


class TestRunConfig:
    def test_rejects_zero_iterations(self):
        with pytest.raises(ValueError, match="max_iterations"):
            make_config(iterations=0)

    def test_rejects_zero_window(self):
        with pytest.raises(ValueError, match="window_size"):
            make_config(window_size=0)

    def test_effective_sampling_copies_seed(self):
        config = make_config(seed=99)
        assert config.effective_sampling().base_seed == 99
        assert config.effective_sampling().call_counter == 0


class TestSamplingParams:
    def test_effective_seed(self):
        params = SamplingParams(base_seed=100, call_counter=7)
        assert params.effective_seed == 107
        assert params.with_counter(9).effective_seed == 109


# Serialization round-trips over arbitrary valid instances.

outcome_strategy = st.one_of(
    st.builds(EvaluationOutcome.success, st.floats(min_value=0.0, max_value=1.0, allow_nan=False)),
    st.builds(
        EvaluationOutcome.failure,
        st.sampled_from([k for k in OutcomeKind if k is not OutcomeKind.SUCCESS]),
        st.text(max_size=300),
    ),
)

text_strategy = st.text(max_size=200)

triple_strategy = st.builds(DiagnosticTriple, problem=text_strategy, suggestion=text_strategy, outcome=outcome_strategy)

improver_strategy = st.builds(
    ImproverOutput, reason=text_strategy, inspiration=text_strategy, suggestions=text_strategy
)

record_strategy = st.builds(
    lambda iteration, source, outcome, trip, best, improver: RunLogRecord(
        iteration=iteration,
        timestamp="2000-01-01T00:00:01+00:00",
        source_hash=None if source is None else digest(source),
        source_text=source,
        outcome=outcome,
        triple_appended=trip,
        best_accuracy_after=best,
        prompt_digest=digest("prompt"),
        improver_output=improver,
    ),
    iteration=st.integers(min_value=1, max_value=10_000),
    source=st.one_of(st.none(), st.text(min_size=1, max_size=300)),
    outcome=outcome_strategy,
    trip=triple_strategy,
    best=st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
    improver=st.one_of(st.none(), improver_strategy),
)


@given(outcome_strategy)
def test_outcome_round_trip(outcome):
    assert EvaluationOutcome.from_dict(outcome.to_dict()) == outcome


@given(outcome_strategy)
def test_outcome_exclusivity(outcome):
    assert (outcome.accuracy is None) != (outcome.message is None)
    assert outcome.is_success == (outcome.accuracy is not None)


@given(triple_strategy)
def test_triple_round_trip(trip):
    assert DiagnosticTriple.from_dict(trip.to_dict()) == trip


@given(improver_strategy)
def test_improver_round_trip(out):
    assert ImproverOutput.from_dict(out.to_dict()) == out


@given(record_strategy)
def test_record_round_trip(record):
    assert RunLogRecord.from_dict(record.to_dict()) == record


@given(st.text(min_size=1, max_size=300))
def test_candidate_round_trip(source):
    candidate = Candidate.create(id=3, iteration=2, source_text=source)
    assert Candidate.from_dict(candidate.to_dict()) == candidate
