"""Toxicity screening and the bounded regeneration loop.

A candidate text is embedded and compared against the offensive-corpus
index; it is blocked when the nearest entry lies strictly closer than the
threshold (distance < alpha blocks, distance == alpha passes). Blocked
candidates are regenerated with a caution appended to the prompt and a
higher sampling temperature, up to a fixed attempt budget.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from .gateway import GenerationParams, EmbeddingVector  # noqa: F401 (re-export convenience)
from .prompting import ComposedPrompt, RETRY_CAUTION_SECTION, estimate_tokens
from .report import split_sections
from .safety_index import NeighborHit, VectorIndex, nearest

DEFAULT_ALPHA = 0.2
DEFAULT_MAX_ATTEMPTS = 3

DEFAULT_RETRY_CAUTION = (
    "The previous draft was rejected by a safety screen. Rewrite the full "
    "report in calm, supportive, non-judgmental language and avoid hostile, "
    "sarcastic, or demeaning phrasing."
)


class GateScope(Enum):
    WHOLE_REPORT = "whole_report"
    PER_SECTION = "per_section"


class RetriesExhausted(Exception):
    """Every regeneration attempt was blocked; carries the full trail."""

    def __init__(self, attempts: tuple["AttemptRecord", ...]):
        self.attempts = attempts
        super().__init__(f"all {len(attempts)} generation attempts were blocked")


@dataclass(frozen=True)
class DetoxConfig:
    alpha: float = DEFAULT_ALPHA
    k: int = 1
    max_attempts: int = DEFAULT_MAX_ATTEMPTS
    scope: GateScope = GateScope.WHOLE_REPORT

    def __post_init__(self) -> None:
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")


@dataclass(frozen=True)
class SectionCheck:
    """Gate result for one checked segment (section=None means whole text)."""

    section: str | None
    hits: tuple[NeighborHit, ...]
    blocked: bool

    @property
    def min_distance(self) -> float | None:
        return self.hits[0].distance if self.hits else None


@dataclass(frozen=True)
class ToxicityVerdict:
    blocked: bool
    checks: tuple[SectionCheck, ...]
    alpha: float
    empty_index: bool = False

    @property
    def min_distance(self) -> float | None:
        candidates = [c.min_distance for c in self.checks if c.min_distance is not None]
        return min(candidates) if candidates else None

    def to_dict(self) -> dict:
        return {
            "blocked": self.blocked,
            "alpha": self.alpha,
            "empty_index": self.empty_index,
            "min_distance": self.min_distance,
            "checks": [
                {
                    "section": c.section,
                    "blocked": c.blocked,
                    "hits": [{"entry_id": h.entry_id, "distance": h.distance} for h in c.hits],
                }
                for c in self.checks
            ],
        }


def verdict_from_dict(data: dict) -> ToxicityVerdict:
    """Rebuild a verdict from its to_dict form (audit replay)."""
    checks = tuple(
        SectionCheck(
            section=c["section"],
            hits=tuple(NeighborHit(h["entry_id"], h["distance"]) for h in c["hits"]),
            blocked=c["blocked"],
        )
        for c in data["checks"]
    )
    return ToxicityVerdict(
        blocked=data["blocked"],
        checks=checks,
        alpha=data["alpha"],
        empty_index=data["empty_index"],
    )


@dataclass(frozen=True)
class AttemptRecord:
    attempt: int
    text: str
    verdict: ToxicityVerdict


@dataclass(frozen=True)
class DetoxOutcome:
    """Successful screening result with the full attempt trail."""

    text: str
    attempts: tuple[AttemptRecord, ...]


def gate(
    text: str,
    index: VectorIndex,
    gateway,
    config: DetoxConfig = DetoxConfig(),
) -> ToxicityVerdict:
    """Screen one candidate text against the offensive index.

    An empty index cannot block anything; the verdict passes but is
    flagged so operators can tell "screened clean" from "nothing to
    screen against".
    """
    if not text.strip():
        raise ValueError("candidate text is empty")
    if len(index) == 0:
        return ToxicityVerdict(blocked=False, checks=(), alpha=config.alpha, empty_index=True)

    if config.scope is GateScope.PER_SECTION:
        segments = [(name, body) for name, body in split_sections(text) if body.strip()]
    else:
        segments = [(None, text)]

    checks: list[SectionCheck] = []
    for name, body in segments:
        hits = tuple(nearest(index, gateway.embed(body), k=config.k))
        # Strict inequality: a hit exactly at alpha does not block.
        blocked = bool(hits) and hits[0].distance < config.alpha
        checks.append(SectionCheck(section=name, hits=hits, blocked=blocked))
    return ToxicityVerdict(
        blocked=any(c.blocked for c in checks),
        checks=tuple(checks),
        alpha=config.alpha,
    )


def _with_caution(prompt: ComposedPrompt, caution: str) -> ComposedPrompt:
    system_text = f"{prompt.system_text}\n\n== {RETRY_CAUTION_SECTION} ==\n{caution.strip()}"
    return ComposedPrompt(
        system_text=system_text,
        dialogue_text=prompt.dialogue_text,
        token_estimate=estimate_tokens(system_text) + estimate_tokens(prompt.dialogue_text),
        truncated=prompt.truncated,
    )


def generate_safe(
    gateway,
    prompt: ComposedPrompt,
    index: VectorIndex,
    params: GenerationParams,
    config: DetoxConfig = DetoxConfig(),
    retry_caution: str = DEFAULT_RETRY_CAUTION,
) -> DetoxOutcome:
    """Generate until the gate passes or the attempt budget is spent.

    The first attempt sends the prompt and params unchanged, so a clean
    first draft is indistinguishable from a bare completion call. Retries
    append the caution section and bump the attempt hint, which raises the
    effective temperature.

    Raises:
        RetriesExhausted: all attempts blocked; the exception carries the
            per-attempt verdict trail.
    """
    records: list[AttemptRecord] = []
    for attempt in range(1, config.max_attempts + 1):
        if attempt == 1:
            current_prompt, current_params = prompt, params
        else:
            current_prompt = _with_caution(prompt, retry_caution)
            current_params = replace(params, attempt_hint=attempt - 1)
        text = gateway.complete(current_prompt, current_params)
        verdict = gate(text, index, gateway, config)
        records.append(AttemptRecord(attempt=attempt, text=text, verdict=verdict))
        if not verdict.blocked:
            return DetoxOutcome(text=text, attempts=tuple(records))
    raise RetriesExhausted(tuple(records))
