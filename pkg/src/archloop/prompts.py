"""Prompt construction and LLM-reply parsing.

Template text lives in plain-text files under ``templates/`` (overridable per
run via a template directory) so prompt experiments never require a code
change.  Placeholders use ``${name}`` syntax; the full placeholder list is
documented in the README.  Prompt building is pure and deterministic:
identical inputs yield byte-identical prompts.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from string import Template

from archloop.memory import HistoryWindow, render_history
from archloop.model import DatasetSpec, EvaluationOutcome, ImproverOutput, format_percent

_TEMPLATE_NAMES = (
    "generator_role",
    "generator_task",
    "generator_reference",
    "generator_scratch",
    "generator_suggestions",
    "generator_exemplar",
    "generator_attempt",
    "generator_contract",
    "improver_role",
    "improver_best",
    "improver_no_best",
    "improver_current",
    "improver_history",
    "improver_contract",
)

_SECTION_SEPARATOR = "\n\n"

NO_CODE_PLACEHOLDER = "(no code was extracted this iteration)"


class CodeExtractionError(Exception):
    """No code defining 'class Net' could be found in an LLM reply."""


@dataclass(frozen=True)
class GeneratorPromptInputs:
    """Inputs for one generator prompt.

    ``exemplars`` and ``recent_attempts`` are only rendered when ``extended``
    is set (the long-context prompt variant with top-K exemplar blocks).
    """

    dataset: DatasetSpec
    best_source: str | None = None
    previous_suggestions: ImproverOutput | None = None
    extended: bool = False
    exemplars: tuple[tuple[str, float], ...] = ()
    recent_attempts: tuple[tuple[str, EvaluationOutcome], ...] = ()

    def __post_init__(self) -> None:
        if self.extended and not self.exemplars:
            raise ValueError("extended prompt requires at least one exemplar")


class PromptEngine:
    """Loads the template set once and renders prompts from it."""

    def __init__(self, template_dir: str | Path | None = None):
        self._templates: dict[str, Template] = {}
        for name in _TEMPLATE_NAMES:
            if template_dir is not None:
                text = (Path(template_dir) / f"{name}.txt").read_text(encoding="utf-8")
            else:
                text = (resources.files("archloop") / "templates" / f"{name}.txt").read_text(encoding="utf-8")
            self._templates[name] = Template(text.rstrip("\n"))

    def _render(self, name: str, **values: str) -> str:
        return self._templates[name].substitute(**values)

    def build_generator_prompt(self, inputs: GeneratorPromptInputs) -> str:
        sections = [
            self._render("generator_role"),
            self._render(
                "generator_task",
                task_description=inputs.dataset.task_description,
                input_channels=str(inputs.dataset.input_channels),
                input_height=str(inputs.dataset.input_height),
                input_width=str(inputs.dataset.input_width),
                num_classes=str(inputs.dataset.num_classes),
            ),
        ]
        if inputs.best_source:
            sections.append(self._render("generator_reference", best_source=inputs.best_source))
        else:
            sections.append(self._render("generator_scratch"))
        if inputs.previous_suggestions is not None:
            sections.append(
                self._render("generator_suggestions", suggestions=inputs.previous_suggestions.suggestions)
            )
        if inputs.extended:
            for rank, (source, accuracy) in enumerate(inputs.exemplars, start=1):
                sections.append(
                    self._render(
                        "generator_exemplar",
                        rank=str(rank),
                        accuracy=format_percent(accuracy),
                        source=source,
                    )
                )
            for source, outcome in inputs.recent_attempts:
                sections.append(self._render("generator_attempt", outcome=outcome.describe(), source=source))
        sections.append(self._render("generator_contract"))
        return _SECTION_SEPARATOR.join(sections)

    def build_improver_prompt(
        self,
        best_source: str,
        best_accuracy: float,
        current_source: str,
        outcome: EvaluationOutcome,
        window: HistoryWindow,
    ) -> str:
        sections = [self._render("improver_role")]
        if best_source:
            sections.append(
                self._render(
                    "improver_best",
                    best_accuracy=format_percent(best_accuracy),
                    best_source=best_source,
                )
            )
        else:
            sections.append(self._render("improver_no_best"))
        sections.append(
            self._render(
                "improver_current",
                outcome=outcome.describe(),
                current_source=current_source if current_source else NO_CODE_PLACEHOLDER,
            )
        )
        sections.append(self._render("improver_history", history=render_history(window)))
        sections.append(self._render("improver_contract"))
        return _SECTION_SEPARATOR.join(sections)


_FENCED_BLOCK_RE = re.compile(r"```[ \t]*[^\n`]*\n(.*?)```", re.DOTALL)

_NET_CLASS_TOKEN = "class Net"


def extract_code(llm_response: str) -> str:
    """Pull candidate source out of an LLM reply.

    Takes the last fenced code block that defines ``class Net`` (models often
    restate reference code first and emit the improved version last).  Falls
    back to the raw reply when it defines ``class Net`` outside any fence.
    """
    qualifying = [m.group(1) for m in _FENCED_BLOCK_RE.finditer(llm_response) if _NET_CLASS_TOKEN in m.group(1)]
    if qualifying:
        body = qualifying[-1]
        # The closing fence sits on its own line; drop the newline that precedes it.
        return body[:-1] if body.endswith("\n") else body
    if _NET_CLASS_TOKEN in llm_response:
        return llm_response
    raise CodeExtractionError("reply contains no code defining 'class Net'")


_LABEL_RE = re.compile(
    r"^[ \t>#*-]*(REASON|INSPIRATION|SUGGESTIONS?)(?:\*\*)?\s*:?(?:\*\*)?[ \t]*",
    re.IGNORECASE | re.MULTILINE,
)


def parse_improver_response(text: str) -> ImproverOutput:
    """Split an analysis reply into its three labeled sections.

    Total by design: missing REASON/INSPIRATION become empty strings, and when
    no SUGGESTIONS label exists the whole reply is treated as the suggestion
    text, so a sloppy reply never stalls the loop.
    """
    matches = list(_LABEL_RE.finditer(text))
    sections: dict[str, str] = {}
    for index, match in enumerate(matches):
        label = match.group(1).upper()
        if label.startswith("SUGGESTION"):
            label = "SUGGESTIONS"
        end = matches[index + 1].start() if index + 1 < len(matches) else len(text)
        if label not in sections:
            sections[label] = text[match.end() : end].strip()
    suggestions = sections.get("SUGGESTIONS", "")
    if not suggestions:
        suggestions = text.strip()
    return ImproverOutput(
        reason=sections.get("REASON", ""),
        inspiration=sections.get("INSPIRATION", ""),
        suggestions=suggestions,
    )
