"""Deterministic simulated generator/evaluator/improver backends.

The simulated "search space" is a quadratic bowl: a candidate is a text
encoding of a weight vector, and its score is ``clamp(1 - mean squared
distance to a hidden optimum, 0, 1)`` plus bounded seeded noise.  A failure
channel marks a configurable fraction of generated candidates malformed.
This is the smallest landscape that exhibits the three phenomena the real
loop shows — improvement trends, failure streaks, and memory-dependent
progress — which makes the full orchestration testable in seconds.

The sim components implement the same backend interfaces as the HTTP client
and the subprocess gateway, and they communicate the same way a model would:
by reading the rendered prompt text.  The generator parses the reference
weights and the suggestion hint out of the prompt; the improver parses the
rendered history window.  The search-loop code they exercise is therefore
byte-identical to production.

All randomness is derived per call from the effective sampling seed (base
seed + call counter), never from shared mutable streams, so a resumed run
replays exactly.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

import numpy as np

from archloop.gateway import EvaluationBackend
from archloop.model import (
    DatasetSpec,
    EvaluationOutcome,
    OutcomeKind,
    SamplingParams,
    TrainConfig,
)

# Generation geometry.  Fresh draws start away from the optimum band so a
# memoryless restart strategy cannot stumble onto near-optimal vectors, while
# hint-guided steps can walk all the way in.
OPTIMUM_RANGE = 0.3
INITIAL_MAG_LOW = 0.4
INITIAL_MAG_HIGH = 1.0
HINT_STEP = 0.25
HINT_JITTER = 0.01
# Scale of the undirected perturbation used when no suggestion is available
# (bootstrap aside, that is exactly the no-feedback variant).  Kept coarse:
# without a remembered direction the regeneration scatters widely, which is
# what makes memory measurably matter.
RANDOM_STEP_SCALE = 1.6

_GENERATOR_TAG = "generator"
_NOISE_TAG = "noise"
_OPTIMUM_TAG = "optimum"


class SimDecodeError(ValueError):
    """Candidate text does not encode a usable weight vector."""


def _rng(*parts: object) -> np.random.Generator:
    """Generator seeded from a stable hash of the parts (order-sensitive)."""
    key = "\x1f".join(str(part) for part in parts).encode("utf-8")
    seed = int.from_bytes(hashlib.sha256(key).digest()[:16], "little")
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class SimLandscape:
    """Hidden quadratic-bowl scoring surface with a failure channel."""

    dimension: int
    optimum: tuple[float, ...]
    noise_amplitude: float = 0.02
    failure_rate: float = 0.2
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if len(self.optimum) != self.dimension:
            raise ValueError("optimum length must equal dimension")
        if not 0.0 <= self.failure_rate <= 1.0:
            raise ValueError("failure_rate must be in [0, 1]")
        if self.noise_amplitude < 0.0:
            raise ValueError("noise_amplitude must be >= 0")

    @classmethod
    def from_seed(
        cls,
        dimension: int = 8,
        noise_amplitude: float = 0.02,
        failure_rate: float = 0.2,
        seed: int = 0,
    ) -> "SimLandscape":
        rng = _rng(seed, _OPTIMUM_TAG)
        optimum = tuple(float(v) for v in rng.uniform(-OPTIMUM_RANGE, OPTIMUM_RANGE, dimension))
        return cls(
            dimension=dimension,
            optimum=optimum,
            noise_amplitude=noise_amplitude,
            failure_rate=failure_rate,
            seed=seed,
        )

    def score(self, vector: np.ndarray) -> float:
        """Accuracy surrogate in [0, 1]; deterministic per (landscape, vector)."""
        msd = float(np.mean((np.asarray(vector, dtype=float) - np.asarray(self.optimum)) ** 2))
        base = min(max(1.0 - msd, 0.0), 1.0)
        noise_rng = _rng(self.seed, _NOISE_TAG, _canonical_weights(vector))
        noisy = base + float(noise_rng.uniform(-self.noise_amplitude, self.noise_amplitude))
        return min(max(noisy, 0.0), 1.0)


def _canonical_weights(vector: np.ndarray) -> str:
    return ",".join(repr(float(v)) for v in vector)


def encode_candidate(vector: np.ndarray) -> str:
    """Render a weight vector as candidate source text (defines ``class Net``)."""
    return (
        "class Net:\n"
        "    # Synthetic candidate: WEIGHTS locates it on the benchmark landscape.\n"
        f"    WEIGHTS = [{', '.join(repr(float(v)) for v in vector)}]\n"
        "\n"
        "    def forward(self, batch):\n"
        "        return batch\n"
    )


_WEIGHTS_RE = re.compile(r"WEIGHTS\s*=\s*\[([^\]]*)\]")


def decode_candidate(source_text: str) -> np.ndarray:
    match = _WEIGHTS_RE.search(source_text)
    if match is None:
        raise SimDecodeError("no WEIGHTS vector found in candidate source")
    body = match.group(1).strip()
    if not body:
        raise SimDecodeError("WEIGHTS vector is empty")
    try:
        values = [float(token) for token in body.split(",")]
    except ValueError as exc:
        raise SimDecodeError(f"unparseable weight value: {exc}") from exc
    return np.asarray(values, dtype=float)


class SimEvaluator(EvaluationBackend):
    """Scores encoded vectors on the landscape; malformed encodings fail validation."""

    def __init__(self, landscape: SimLandscape):
        self.landscape = landscape

    def validate(self, source_text: str, dataset: DatasetSpec, timeout: float) -> EvaluationOutcome | None:
        try:
            vector = decode_candidate(source_text)
        except SimDecodeError as exc:
            return EvaluationOutcome.failure(OutcomeKind.VALIDATION_ERROR, str(exc))
        if len(vector) != self.landscape.dimension:
            return EvaluationOutcome.failure(
                OutcomeKind.VALIDATION_ERROR,
                f"expected {self.landscape.dimension} weights, got {len(vector)}",
            )
        return None

    def evaluate(
        self, source_text: str, dataset: DatasetSpec, train: TrainConfig, timeout: float
    ) -> EvaluationOutcome:
        vector = decode_candidate(source_text)
        return EvaluationOutcome.success(self.landscape.score(vector))


_HINT_RE = re.compile(r"[Aa]djust weight (\d+) in the (positive|negative) direction")


def format_hint(coordinate: int, sign: int) -> str:
    direction = "positive" if sign > 0 else "negative"
    return f"Adjust weight {coordinate} in the {direction} direction; keep the remaining weights unchanged."


def parse_hint(text: str) -> tuple[int, int] | None:
    match = _HINT_RE.search(text)
    if match is None:
        return None
    return int(match.group(1)), 1 if match.group(2) == "positive" else -1


def sim_generate(
    best_vector: np.ndarray | None,
    hint: tuple[int, int] | None,
    rng: np.random.Generator,
    landscape: SimLandscape,
) -> str:
    """Produce candidate source: hint-directed step, random step, or fresh draw.

    With probability ``failure_rate`` the encoding is deliberately malformed
    (one weight dropped), which downstream validation rejects.
    """
    malformed = bool(rng.random() < landscape.failure_rate)
    d = landscape.dimension
    if best_vector is None:
        vector = rng.uniform(INITIAL_MAG_LOW, INITIAL_MAG_HIGH, d) * rng.choice((-1.0, 1.0), d)
    elif hint is not None:
        coordinate, sign = hint
        vector = np.array(best_vector, dtype=float)
        vector[coordinate % d] += sign * HINT_STEP
        vector += rng.normal(0.0, HINT_JITTER, d)
    else:
        vector = np.asarray(best_vector, dtype=float) + rng.normal(0.0, RANDOM_STEP_SCALE, d)
    if malformed:
        vector = vector[:-1]
        if len(vector) == 0:
            return "class Net:\n    WEIGHTS = []\n"
    return encode_candidate(vector)


class SimGeneratorClient:
    """Stands in for the generator LLM; reads the prompt like a model would."""

    def __init__(self, landscape: SimLandscape):
        self.landscape = landscape

    def complete(self, system_prompt: str, user_prompt: str, params: SamplingParams) -> str:
        rng = _rng(self.landscape.seed, _GENERATOR_TAG, params.effective_seed)
        best_vector: np.ndarray | None = None
        weights_match = _WEIGHTS_RE.search(user_prompt)
        if weights_match is not None:
            try:
                best_vector = decode_candidate(user_prompt)
            except SimDecodeError:
                best_vector = None
        hint = parse_hint(user_prompt)
        source = sim_generate(best_vector, hint, rng, self.landscape)
        return f"Here is the next architecture to try.\n\n```python\n{source}```\n"


@dataclass(frozen=True)
class _HistoryEntry:
    hint: tuple[int, int] | None
    success: bool
    accuracy: float | None


_ATTEMPT_RE = re.compile(
    r"Attempt \d+:\nProblem: [^\n]*\nSuggestion: ([^\n]*)\nOutcome: ([^\n]*)",
)
_ACCURACY_LINE_RE = re.compile(r"accuracy: ([\d.]+)%")


def _parse_history_entries(prompt: str) -> list[_HistoryEntry]:
    entries = []
    for suggestion, outcome_text in _ATTEMPT_RE.findall(prompt):
        accuracy_match = _ACCURACY_LINE_RE.match(outcome_text)
        if accuracy_match is not None:
            entries.append(
                _HistoryEntry(
                    hint=parse_hint(suggestion),
                    success=True,
                    accuracy=float(accuracy_match.group(1)) / 100.0,
                )
            )
        else:
            entries.append(_HistoryEntry(hint=parse_hint(suggestion), success=False, accuracy=None))
    return entries


def choose_hint(entries: list[_HistoryEntry], dimension: int) -> tuple[int, int]:
    """Pick a (coordinate, sign) move not recently penalized in the window.

    A windowed attempt is an improvement when it raised the best accuracy seen
    within the window; its move is then worth repeating.  Penalized moves
    (failures or non-improving steps) are skipped; when everything in sight is
    penalized, fall back to the least recently tried move.
    """
    verdicts: dict[tuple[int, int], bool] = {}
    last_tried: dict[tuple[int, int], int] = {}
    prior_best = 0.0
    last_entry: _HistoryEntry | None = entries[-1] if entries else None
    for index, entry in enumerate(entries):
        improved = entry.success and entry.accuracy > prior_best + 1e-12
        if entry.success:
            prior_best = max(prior_best, entry.accuracy)
        if entry.hint is not None:
            move = (entry.hint[0] % dimension, entry.hint[1])
            verdicts[move] = improved
            last_tried[move] = index

    if last_entry is not None and last_entry.hint is not None:
        last_move = (last_entry.hint[0] % dimension, last_entry.hint[1])
        if verdicts.get(last_move):
            return last_move  # keep exploiting a working direction
        start_coordinate = last_move[0]
        candidates = [(start_coordinate, -last_move[1])]
    else:
        start_coordinate = dimension - 1
        candidates = []
    for offset in range(1, dimension + 1):
        coordinate = (start_coordinate + offset) % dimension
        candidates.extend([(coordinate, 1), (coordinate, -1)])
    for move in candidates:
        if move not in verdicts:
            return move  # untried moves first
    for move in candidates:
        if verdicts.get(move):
            return move  # else a move that improved at some point
    return min(candidates, key=lambda move: last_tried.get(move, -1))


class SimImproverClient:
    """Stands in for the improver LLM; emits hint suggestions from the window."""

    def __init__(self, landscape: SimLandscape):
        self.landscape = landscape

    def complete(self, system_prompt: str, user_prompt: str, params: SamplingParams) -> str:
        entries = _parse_history_entries(user_prompt)
        coordinate, sign = choose_hint(entries, self.landscape.dimension)
        if entries and entries[-1].success:
            reason = f"The last attempt scored {entries[-1].accuracy:.4f}; the search direction needs review."
        elif entries:
            reason = "The last attempt failed outright; its modification should not be repeated."
        else:
            reason = "No attempts have been made yet; start with a minimal directed change."
        return (
            f"REASON: {reason}\n"
            "INSPIRATION: Pattern search from derivative-free optimization.\n"
            f"SUGGESTIONS: {format_hint(coordinate, sign)}\n"
        )


def sim_clock(iteration: int) -> str:
    """Logical timestamp derived from the iteration, for replayable logs."""
    return (datetime(2000, 1, 1, tzinfo=timezone.utc) + timedelta(seconds=iteration)).isoformat()
