"""Regex-based PII masking applied before any text leaves the process.

Client comments and counselor drafts are scrubbed with an ordered rule set
(phone numbers, emails, names, birthdates, addresses by default) and the
masked form is the only one stored in prompts or sent to a provider.
Matched originals are kept only as one-way digests for auditing.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from importlib import resources

KNOWN_CATEGORIES = frozenset({"PHONE", "EMAIL", "NAME", "BIRTHDATE", "ADDRESS"})

_CATEGORY_RE = re.compile(r"^[A-Z][A-Z0-9_]*$")

DEFAULT_RULES_RESOURCE = "rules_default.tsv"


class RedactionError(Exception):
    """Base class for rule loading and validation failures."""


class MalformedRuleFile(RedactionError):
    """Rule file line does not have the category/replacement/pattern shape."""


class InvalidPattern(RedactionError):
    """A rule pattern failed to compile."""


class SelfMatchingReplacement(RedactionError):
    """A replacement token is itself matchable by a rule in the set."""


@dataclass(frozen=True)
class RedactionRule:
    """One masking rule: a compiled pattern and its replacement token."""

    id: str
    category: str
    pattern: str
    replacement: str
    compiled: re.Pattern[str] = field(repr=False, compare=False, default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.compiled is None:
            object.__setattr__(self, "compiled", re.compile(self.pattern))


@dataclass(frozen=True)
class RedactionSpan:
    """Location of one masked region, offsets into the original text."""

    start: int
    end: int
    category: str
    original_hash: str


@dataclass(frozen=True)
class RedactedText:
    """Masked text plus the spans that were replaced to produce it."""

    masked: str
    spans: tuple[RedactionSpan, ...]
    rule_set_version: str


def rule_set_version(rules: list[RedactionRule]) -> str:
    """Deterministic identifier for a rule set (content hash)."""
    digest = hashlib.sha256()
    for rule in rules:
        digest.update(f"{rule.category}\t{rule.replacement}\t{rule.pattern}\n".encode("utf-8"))
    return digest.hexdigest()[:12]


def load_rules(source: str) -> list[RedactionRule]:
    """Parse and validate a rule file.

    The format is line oriented: ``category <TAB> replacement <TAB> pattern``,
    with ``#`` comment lines and blank lines ignored. Rules apply in file
    order; earlier rules win ties during overlap resolution.

    Raises:
        MalformedRuleFile: a non-comment line does not have three fields
            or the category/replacement fields are ill-formed.
        InvalidPattern: a pattern does not compile.
        SelfMatchingReplacement: some rule matches inside a replacement
            token, which would make masking non-idempotent.
    """
    rules: list[RedactionRule] = []
    counts: dict[str, int] = {}
    for lineno, raw_line in enumerate(source.splitlines(), start=1):
        line = raw_line.strip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise MalformedRuleFile(f"line {lineno}: expected 3 tab-separated fields, got {len(parts)}")
        category, replacement, pattern = (p.strip() for p in parts)
        if not _CATEGORY_RE.match(category):
            raise MalformedRuleFile(f"line {lineno}: bad category {category!r}")
        if not replacement:
            raise MalformedRuleFile(f"line {lineno}: empty replacement")
        if not pattern:
            raise MalformedRuleFile(f"line {lineno}: empty pattern")
        try:
            compiled = re.compile(pattern)
        except re.error as exc:
            raise InvalidPattern(f"line {lineno}: {exc}") from exc
        counts[category] = counts.get(category, 0) + 1
        rules.append(
            RedactionRule(
                id=f"{category.lower()}-{counts[category]}",
                category=category,
                pattern=pattern,
                replacement=replacement,
                compiled=compiled,
            )
        )
    for rule in rules:
        for other in rules:
            if rule.compiled.search(other.replacement):
                raise SelfMatchingReplacement(
                    f"replacement {other.replacement!r} is matched by rule {rule.id}"
                )
    return rules


def default_rules() -> list[RedactionRule]:
    """Load the shipped default rule set."""
    source = (resources.files("replyplus") / "data" / DEFAULT_RULES_RESOURCE).read_text("utf-8")
    return load_rules(source)


def _hash_original(fragment: str) -> str:
    return hashlib.sha256(fragment.encode("utf-8")).hexdigest()


def redact(text: str, rules: list[RedactionRule]) -> RedactedText:
    """Mask every rule match in ``text``.

    Overlaps resolve leftmost-longest, ties broken by rule order, so output
    is deterministic. Replacing each recorded span in the original text with
    its rule's token reproduces ``masked`` exactly, and re-running redact on
    ``masked`` finds nothing new.
    """
    matches: list[tuple[int, int, RedactionRule]] = []
    # Lexer-style scan: repeatedly take the leftmost-longest match among all
    # rules, then continue after it. Cached per-rule matches avoid rescans.
    cached: list[re.Match[str] | None] = [None] * len(rules)
    exhausted = [False] * len(rules)
    pos = 0
    n = len(text)
    while pos < n:
        best_key: tuple[int, int, int] | None = None
        best_end = -1
        best_rule: RedactionRule | None = None
        for i, rule in enumerate(rules):
            if exhausted[i]:
                continue
            m = cached[i]
            if m is None or m.start() < pos:
                m = rule.compiled.search(text, pos)
                cached[i] = m
                if m is None:
                    exhausted[i] = True
                    continue
            if m.start() == m.end():
                exhausted[i] = True  # zero-width patterns cannot mask anything
                continue
            key = (m.start(), -(m.end() - m.start()), i)
            if best_key is None or key < best_key:
                best_key = key
                best_end = m.end()
                best_rule = rule
        if best_rule is None:
            break
        start = best_key[0]
        matches.append((start, best_end, best_rule))
        pos = best_end

    if not matches:
        return RedactedText(masked=text, spans=(), rule_set_version=rule_set_version(rules))

    pieces: list[str] = []
    spans: list[RedactionSpan] = []
    cursor = 0
    for start, end, rule in matches:
        pieces.append(text[cursor:start])
        pieces.append(rule.replacement)
        spans.append(
            RedactionSpan(
                start=start,
                end=end,
                category=rule.category,
                original_hash=_hash_original(text[start:end]),
            )
        )
        cursor = end
    pieces.append(text[cursor:])
    return RedactedText(
        masked="".join(pieces),
        spans=tuple(spans),
        rule_set_version=rule_set_version(rules),
    )


def scan_for_matches(text: str, rules: list[RedactionRule]) -> list[tuple[int, int, str]]:
    """Report every rule match in ``text`` without masking (audit helper)."""
    hits: list[tuple[int, int, str]] = []
    for rule in rules:
        for m in rule.compiled.finditer(text):
            if m.start() < m.end():
                hits.append((m.start(), m.end(), rule.id))
    hits.sort()
    return hits
