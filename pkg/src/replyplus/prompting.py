"""Prompt assembly: eight instruction sections plus labeled dialogue.

A template file supplies the instruction blocks; the conversation history
and the counselor's draft are rendered underneath with fixed Client/
Counselor labels. Both halves are fit into a token budget by dropping the
oldest whole turns, never the final client turn or the draft.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources

from .redaction import RedactedText
from .report import SECTION_MARKERS

SECTION_NAMES = (
    "ROLE_DEFINITION",
    "TASK_DEFINITION",
    "ROLE_BOUNDARIES",
    "CONTEXT_REQUIREMENTS",
    "ERROR_IDENTIFICATION",
    "RESOURCES",
    "DISTORTION_CLASSIFICATION",
    "IO_FORMAT",
)

CLIENT_LABEL = "Client"
COUNSELOR_LABEL = "Counselor"

DEFAULT_TOKEN_BUDGET = 12000

RETRY_CAUTION_SECTION = "RETRY_CAUTION"

_SECTION_DELIM_RE = re.compile(r"^==\s*([A-Z][A-Z0-9_]*)\s*==\s*$")
_META_RE = re.compile(r"^#\s*(locale|version)\s*:\s*(\S+)\s*$")

# Rough CJK coverage for the estimator: unified ideographs, extensions,
# kana, hangul, fullwidth forms.
_CJK_RE = re.compile(r"[⺀-鿿豈-﫿＀-￯　-〿]")
_ASCII_POOL_RE = re.compile(r"[A-Za-z0-9 \t\n\r]")


class TemplateError(Exception):
    """Template file missing a required section or otherwise malformed."""


class EmptyHistory(Exception):
    """compose_prompt called with no dialogue turns."""


class BudgetTooSmall(Exception):
    """Even the minimal prompt (template + final turn + draft) exceeds budget."""


class Role(Enum):
    CLIENT = "client"
    COUNSELOR = "counselor"


@dataclass(frozen=True)
class DialogueTurn:
    """One conversation turn; text is always redacted."""

    role: Role
    text: RedactedText
    index: int


@dataclass(frozen=True)
class PromptTemplate:
    """Eight instruction sections plus optional extra blocks."""

    sections: dict[str, str]
    locale: str
    version: str
    extras: dict[str, str]

    def retry_caution(self, default: str) -> str:
        """Caution line appended to regeneration attempts."""
        return self.extras.get(RETRY_CAUTION_SECTION, default).strip() or default


@dataclass(frozen=True)
class ComposedPrompt:
    """Rendered instruction + dialogue, ready for the model gateway."""

    system_text: str
    dialogue_text: str
    token_estimate: int
    truncated: bool


def estimate_tokens(text: str) -> int:
    """Deterministic, provider-agnostic token estimate.

    Approximation: each CJK character counts as one token; ASCII letters,
    digits and whitespace count 1/4 token each (one token per ~4 chars);
    any other character counts as one token. Monotone under appending.
    """
    if not text:
        return 0
    cjk = len(_CJK_RE.findall(text))
    ascii_pool = len(_ASCII_POOL_RE.findall(text))
    other = len(text) - cjk - ascii_pool
    return cjk + other + math.ceil(ascii_pool / 4)


def load_template(source: str) -> PromptTemplate:
    """Parse a sectioned template file.

    Sections are delimited by ``== SECTION_NAME ==`` lines; ``# locale:``
    and ``# version:`` comment headers before the first section set the
    metadata. All eight instruction sections must be present and non-empty;
    unknown sections are kept as extras.
    """
    meta = {"locale": "und", "version": "unversioned"}
    sections: dict[str, str] = {}
    current: str | None = None
    body: list[str] = []

    def flush() -> None:
        if current is not None:
            sections[current] = "\n".join(body).strip()

    for line in source.splitlines():
        delim = _SECTION_DELIM_RE.match(line)
        if delim:
            flush()
            current = delim.group(1)
            if current in sections:
                raise TemplateError(f"duplicate section {current}")
            body = []
            continue
        if current is None:
            m = _META_RE.match(line.strip())
            if m:
                meta[m.group(1)] = m.group(2)
            continue
        body.append(line)
    flush()

    missing = [name for name in SECTION_NAMES if not sections.get(name)]
    if missing:
        raise TemplateError(f"missing or empty sections: {', '.join(missing)}")
    io_format = sections["IO_FORMAT"]
    absent = [marker for marker in SECTION_MARKERS if marker not in io_format]
    if absent:
        raise TemplateError(f"IO_FORMAT does not declare output markers: {', '.join(absent)}")

    core = {name: text for name, text in sections.items() if name in SECTION_NAMES}
    extras = {name: text for name, text in sections.items() if name not in SECTION_NAMES}
    return PromptTemplate(sections=core, locale=meta["locale"], version=meta["version"], extras=extras)


def load_bundled_template(name: str = "reply_plus.zh-CN.v1.txt") -> PromptTemplate:
    """Load one of the templates shipped with the package."""
    source = (resources.files("replyplus") / "data" / "templates" / name).read_text("utf-8")
    return load_template(source)


def _render_system(template: PromptTemplate) -> str:
    # Canonical section order, independent of the order in the template file.
    return "\n\n".join(f"== {name} ==\n{template.sections[name]}" for name in SECTION_NAMES)


def _render_turn(label: str, text: RedactedText) -> str:
    # Continuation lines are indented so a line can begin with a role label
    # only when the renderer put it there.
    return f"{label}: " + text.masked.replace("\n", "\n  ")


def _render_dialogue(turns: list[DialogueTurn], draft: RedactedText) -> str:
    lines = []
    for turn in turns:
        label = CLIENT_LABEL if turn.role is Role.CLIENT else COUNSELOR_LABEL
        lines.append(_render_turn(label, turn.text))
    lines.append(_render_turn(COUNSELOR_LABEL, draft))
    return "\n".join(lines)


def compose_prompt(
    template: PromptTemplate,
    history: list[DialogueTurn],
    draft: RedactedText,
    budget: int = DEFAULT_TOKEN_BUDGET,
) -> ComposedPrompt:
    """Render the full prompt, truncating oldest turns to fit ``budget``.

    The history must end with a client turn; that turn and the draft always
    survive truncation. Turns are dropped whole, oldest first.

    Raises:
        EmptyHistory: no turns given.
        BudgetTooSmall: the minimal prompt alone exceeds the budget.
    """
    if not history:
        raise EmptyHistory("at least one client turn is required")
    if history[-1].role is not Role.CLIENT:
        raise ValueError("history must end with a client turn")
    for expected, turn in enumerate(history):
        if turn.index != expected:
            raise ValueError(f"turn indices must be contiguous from 0, got {turn.index} at {expected}")

    system_text = _render_system(template)
    kept = list(history)
    truncated = False
    while True:
        dialogue_text = _render_dialogue(kept, draft)
        estimate = estimate_tokens(system_text) + estimate_tokens(dialogue_text)
        if estimate <= budget:
            break
        if len(kept) <= 1:
            raise BudgetTooSmall(
                f"minimal prompt needs ~{estimate} tokens but budget is {budget}"
            )
        kept.pop(0)
        truncated = True

    return ComposedPrompt(
        system_text=system_text,
        dialogue_text=dialogue_text,
        token_estimate=estimate,
        truncated=truncated,
    )
