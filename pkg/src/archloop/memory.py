"""Bounded sliding-window history of diagnostic triples.

The window keeps exactly the most recent ``capacity`` improvement attempts,
evicting strict-FIFO.  Failed attempts are appended exactly like successes;
the window never filters by outcome.  Everything downstream (prompt text,
analysis) may depend only on these entries, which is what keeps the loop's
context size constant regardless of run length.
"""

from __future__ import annotations

from dataclasses import dataclass

from archloop.model import DiagnosticTriple

HISTORY_HEADER = "Previous improvement attempts (oldest first):"
EMPTY_HISTORY_MARKER = "(no prior attempts)"


@dataclass(frozen=True)
class HistoryWindow:
    """Ordered window of the last ``capacity`` diagnostic triples, oldest first."""

    capacity: int
    entries: tuple[DiagnosticTriple, ...] = ()

    def __post_init__(self) -> None:
        if self.capacity < 1:
            raise ValueError("window capacity must be >= 1")
        if len(self.entries) > self.capacity:
            raise ValueError("window holds more entries than its capacity")

    def __len__(self) -> int:
        return len(self.entries)

    def to_dict(self) -> dict:
        return {"capacity": self.capacity, "entries": [t.to_dict() for t in self.entries]}

    @classmethod
    def from_dict(cls, data: dict) -> "HistoryWindow":
        return cls(
            capacity=int(data["capacity"]),
            entries=tuple(DiagnosticTriple.from_dict(e) for e in data["entries"]),
        )


def append(window: HistoryWindow, triple: DiagnosticTriple) -> HistoryWindow:
    """Return a new window with ``triple`` as newest entry, evicting the oldest if full."""
    entries = (window.entries + (triple,))[-window.capacity :]
    return HistoryWindow(capacity=window.capacity, entries=entries)


def _text_or_none_marker(text: str) -> str:
    return text if text else "(none)"


def render_history(window: HistoryWindow) -> str:
    """Deterministic textual block listing each triple, oldest first."""
    if not window.entries:
        return f"{HISTORY_HEADER}\n{EMPTY_HISTORY_MARKER}"
    lines = [HISTORY_HEADER]
    for index, triple in enumerate(window.entries, start=1):
        lines.append("")
        lines.append(f"Attempt {index}:")
        lines.append(f"Problem: {_text_or_none_marker(triple.problem)}")
        lines.append(f"Suggestion: {_text_or_none_marker(triple.suggestion)}")
        lines.append(f"Outcome: {triple.outcome.describe()}")
    return "\n".join(lines)
