"""Report statistics and trajectory series computed from run logs.

All functions here are pure and read-only over parsed log records, so
re-running them on the same file is bit-identical.  Correlations are rank
statistics (Spearman rho with average-rank ties, Kendall tau-b), computed by
default over the success-only sequence — evaluation index vs. accuracy —
because fallback-filled series would inflate the correlation through repeated
values.  The fallback-filled variant stays available behind a flag.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Any, Literal, Sequence

import numpy as np
from scipy import stats as scipy_stats

from archloop.model import RunLogRecord

DEFAULT_SMOOTHING_WINDOW = 15
DEFAULT_PERMUTATIONS = 10_000
DEFAULT_PERMUTATION_SEED = 0

NO_SUCCESSES_NOTE = "no successful evaluations; accuracy statistics are undefined"


class DegenerateInputError(ValueError):
    """A correlation is undefined (constant sequence or fewer than two points)."""


def _as_array(values: Sequence[float], name: str) -> np.ndarray:
    array = np.asarray(values, dtype=float)
    if array.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    return array


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks with ties assigned the average of their positions."""
    array = _as_array(values, "values")
    order = np.argsort(array, kind="mergesort")
    provisional = np.empty(len(array))
    provisional[order] = np.arange(1, len(array) + 1)
    _, inverse, counts = np.unique(array, return_inverse=True, return_counts=True)
    sums = np.bincount(inverse, weights=provisional)
    return sums[inverse] / counts[inverse]


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Spearman rank correlation with average-rank tie handling."""
    x = _as_array(xs, "xs")
    y = _as_array(ys, "ys")
    if len(x) != len(y):
        raise ValueError("sequences must have equal length")
    if len(x) < 2:
        raise DegenerateInputError("need at least two points")
    rx = average_ranks(x)
    ry = average_ranks(y)
    rx_c = rx - rx.mean()
    ry_c = ry - ry.mean()
    denom = float(np.sqrt(np.sum(rx_c**2) * np.sum(ry_c**2)))
    if denom == 0.0:
        raise DegenerateInputError("constant input sequence; correlation undefined")
    return float(np.dot(rx_c, ry_c) / denom)


def kendall(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Kendall tau-b (tie-corrected), by explicit pair counting."""
    x = _as_array(xs, "xs")
    y = _as_array(ys, "ys")
    if len(x) != len(y):
        raise ValueError("sequences must have equal length")
    n = len(x)
    if n < 2:
        raise DegenerateInputError("need at least two points")
    dx = np.sign(x[:, None] - x[None, :])
    dy = np.sign(y[:, None] - y[None, :])
    upper = np.triu_indices(n, k=1)
    concordance = float(np.sum(dx[upper] * dy[upper]))
    pairs = n * (n - 1) / 2.0
    tied_x = float(np.sum(dx[upper] == 0))
    tied_y = float(np.sum(dy[upper] == 0))
    denom = float(np.sqrt((pairs - tied_x) * (pairs - tied_y)))
    if denom == 0.0:
        raise DegenerateInputError("constant input sequence; correlation undefined")
    return concordance / denom


def permutation_p_values(
    xs: Sequence[float],
    ys: Sequence[float],
    permutations: int = DEFAULT_PERMUTATIONS,
    seed: int = DEFAULT_PERMUTATION_SEED,
) -> tuple[float, float]:
    """Two-sided permutation p-values for (rho, tau), shuffling ys.

    Spearman is fully vectorised (permuting values permutes their ranks);
    Kendall falls back to one compiled statistic call per shuffle.
    """
    x = _as_array(xs, "xs")
    y = _as_array(ys, "ys")
    rng = np.random.default_rng(seed)
    rho_observed = abs(spearman(x, y))
    tau_observed = abs(kendall(x, y))

    rx_c = average_ranks(x) - (len(x) + 1) / 2.0
    ry = average_ranks(y)
    ry_c = ry - ry.mean()
    norm = float(np.sqrt(np.sum(rx_c**2) * np.sum(ry_c**2)))
    rho_hits = 0
    chunk = 1000
    done = 0
    while done < permutations:
        batch = min(chunk, permutations - done)
        permuted = rng.permuted(np.tile(ry_c, (batch, 1)), axis=1)
        rhos = np.abs(permuted @ rx_c) / norm
        rho_hits += int(np.sum(rhos >= rho_observed - 1e-12))
        done += batch

    tau_hits = 0
    for _ in range(permutations):
        tau = scipy_stats.kendalltau(x, rng.permutation(y)).statistic
        if abs(tau) >= tau_observed - 1e-12:
            tau_hits += 1

    p_rho = (1 + rho_hits) / (permutations + 1)
    p_tau = (1 + tau_hits) / (permutations + 1)
    return p_rho, p_tau


@dataclass(frozen=True)
class TrajectorySeries:
    """Per-iteration accuracy curves in plot-ready form.

    ``per_iteration`` fills failed iterations with the previous value (0 until
    the first success); ``smoothed`` is a centred moving average truncated at
    the edges; ``best_so_far`` is the running maximum over successes.
    """

    per_iteration: tuple[float, ...]
    smoothed: tuple[float, ...]
    best_so_far: tuple[float, ...]
    smoothing_window: int

    def __post_init__(self) -> None:
        if not len(self.per_iteration) == len(self.smoothed) == len(self.best_so_far):
            raise ValueError("all three series must have equal length")


def build_trajectories(
    records: Sequence[RunLogRecord], smoothing_window: int = DEFAULT_SMOOTHING_WINDOW
) -> TrajectorySeries:
    if not records:
        raise ValueError("cannot build trajectories from an empty log")
    if smoothing_window < 1:
        raise ValueError("smoothing_window must be >= 1")
    filled: list[float] = []
    best: list[float] = []
    last = 0.0
    running_best = 0.0
    for record in records:
        if record.outcome.is_success:
            last = record.outcome.accuracy
            running_best = max(running_best, record.outcome.accuracy)
        filled.append(last)
        best.append(running_best)
    half_left = (smoothing_window - 1) // 2
    half_right = smoothing_window // 2
    smoothed = []
    for i in range(len(filled)):
        lo = max(0, i - half_left)
        hi = min(len(filled), i + half_right + 1)
        smoothed.append(sum(filled[lo:hi]) / (hi - lo))
    return TrajectorySeries(
        per_iteration=tuple(filled),
        smoothed=tuple(smoothed),
        best_so_far=tuple(best),
        smoothing_window=smoothing_window,
    )


@dataclass(frozen=True)
class SummaryReport:
    """Headline statistics of one run log.

    Accuracy-derived fields are None when the log holds no successes; the
    report is still emitted (a failed search is a reportable result, not an
    error).
    """

    total_iterations: int
    successful_evaluations: int
    success_rate: float
    first_accuracy: float | None
    best_accuracy: float | None
    improvement: float | None
    spearman_rho: float | None
    kendall_tau: float | None
    p_value_note: str

    def __post_init__(self) -> None:
        if self.successful_evaluations > self.total_iterations:
            raise ValueError("successful_evaluations cannot exceed total_iterations")


CorrelationBasis = Literal["success_index", "iteration_fallback"]


def summarize(
    records: Sequence[RunLogRecord],
    correlation_basis: CorrelationBasis = "success_index",
    permutations: int = DEFAULT_PERMUTATIONS,
    permutation_seed: int = DEFAULT_PERMUTATION_SEED,
) -> SummaryReport:
    """Compute the summary row for one run log.

    ``first_accuracy`` is the accuracy of the first successful evaluation (the
    single-shot baseline).  Set ``permutations=0`` to skip p-value estimation.
    """
    if not records:
        raise ValueError("cannot summarize an empty log")
    successes = [r.outcome.accuracy for r in records if r.outcome.is_success]
    total = len(records)
    if not successes:
        return SummaryReport(
            total_iterations=total,
            successful_evaluations=0,
            success_rate=0.0,
            first_accuracy=None,
            best_accuracy=None,
            improvement=None,
            spearman_rho=None,
            kendall_tau=None,
            p_value_note=NO_SUCCESSES_NOTE,
        )
    first = successes[0]
    best = max(successes)
    if correlation_basis == "success_index":
        ys = successes
        basis_note = f"over {len(successes)} successful evaluations"
    elif correlation_basis == "iteration_fallback":
        ys = list(build_trajectories(records).per_iteration)
        basis_note = f"over all {total} iterations with failure fallback"
    else:
        raise ValueError(f"unknown correlation_basis {correlation_basis!r}")
    xs = list(range(1, len(ys) + 1))

    rho: float | None
    tau: float | None
    try:
        rho = spearman(xs, ys)
        tau = kendall(xs, ys)
        if permutations > 0:
            p_rho, p_tau = permutation_p_values(xs, ys, permutations=permutations, seed=permutation_seed)
            note = (
                f"permutation test ({permutations} shuffles, seed {permutation_seed}) "
                f"{basis_note}: p[rho]={p_rho:.4f}, p[tau]={p_tau:.4f}"
            )
        else:
            note = f"p-values not computed; correlations {basis_note}"
    except DegenerateInputError as exc:
        rho = None
        tau = None
        note = f"correlations undefined {basis_note}: {exc}"

    return SummaryReport(
        total_iterations=total,
        successful_evaluations=len(successes),
        success_rate=len(successes) / total,
        first_accuracy=first,
        best_accuracy=best,
        improvement=best - first,
        spearman_rho=rho,
        kendall_tau=tau,
        p_value_note=note,
    )


def percent_display(numerator: int, denominator: int) -> str:
    """Exact decimal percent with half-up rounding, e.g. 1519/2000 -> '76.0%'."""
    value = Decimal(numerator) * 100 / Decimal(denominator)
    return f"{value.quantize(Decimal('0.1'), rounding=ROUND_HALF_UP)}%"


def _fraction_percent(fraction: float | None) -> str | None:
    if fraction is None:
        return None
    return f"{fraction * 100:.1f}%"


def summary_to_dict(report: SummaryReport) -> dict[str, Any]:
    """Machine-readable summary; raw fractions plus rendered percent strings."""
    improvement_pp = None
    if report.improvement is not None:
        improvement_pp = f"{report.improvement * 100:+.1f}"
    return {
        "total_iterations": report.total_iterations,
        "successful_evaluations": report.successful_evaluations,
        "success_rate": report.success_rate,
        "success_rate_display": percent_display(report.successful_evaluations, report.total_iterations),
        "first_accuracy": report.first_accuracy,
        "first_accuracy_display": _fraction_percent(report.first_accuracy),
        "best_accuracy": report.best_accuracy,
        "best_accuracy_display": _fraction_percent(report.best_accuracy),
        "improvement": report.improvement,
        "improvement_display": improvement_pp,
        "spearman_rho": report.spearman_rho,
        "kendall_tau": report.kendall_tau,
        "p_value_note": report.p_value_note,
    }


def format_summary_table(report: SummaryReport) -> str:
    """Human-readable two-column table of the summary."""
    data = summary_to_dict(report)
    rows = [
        ("Total iterations", str(report.total_iterations)),
        ("Successful evals", str(report.successful_evaluations)),
        ("Success rate", data["success_rate_display"]),
        ("First accuracy", data["first_accuracy_display"] or "n/a"),
        ("Best accuracy", data["best_accuracy_display"] or "n/a"),
        ("Improvement", (data["improvement_display"] + " pp") if data["improvement_display"] else "n/a"),
        ("Spearman rho", f"{report.spearman_rho:.3f}" if report.spearman_rho is not None else "undefined"),
        ("Kendall tau", f"{report.kendall_tau:.3f}" if report.kendall_tau is not None else "undefined"),
        ("Note", report.p_value_note),
    ]
    width = max(len(label) for label, _ in rows)
    return "\n".join(f"{label:<{width}}  {value}" for label, value in rows)


_SERIES_FILES = {
    "per_iteration": "trajectory_per_iteration.csv",
    "smoothed": "trajectory_smoothed.csv",
    "best_so_far": "trajectory_best_so_far.csv",
}


def write_trajectory_csvs(series: TrajectorySeries, out_dir: str | Path) -> dict[str, Path]:
    """Emit one two-column CSV (iteration, value) per series; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}
    for name, filename in _SERIES_FILES.items():
        path = out / filename
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", name])
            for index, value in enumerate(getattr(series, name), start=1):
                writer.writerow([index, repr(value)])
        written[name] = path
    return written
