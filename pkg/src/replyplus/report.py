"""Parsing and serialization of the structured Reply+ report.

The model is instructed (via the template's IO_FORMAT section) to emit its
analysis under fixed bracketed headers. This module turns that raw text
into a structured report and back; the two directions round-trip on all
structured fields. Only the improved reply is mandatory; everything else
degrades to a parse warning so counselors still see partial output.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

SECTION_MARKERS = (
    "[PROBLEM_ANALYSIS]",
    "[COGNITIVE_DISTORTIONS]",
    "[COUNSELOR_CRITIQUE]",
    "[IMPROVED_REPLY]",
    "[NEXT_STEPS]",
    "[RESOURCES]",
)

_HEADER_RE = re.compile(r"^\[([A-Z][A-Z0-9_]*)\]\s*$")
_ENTRY_RE = re.compile(r"^-\s*category\s*:\s*(.+?)\s*$")
_FIELD_RE = re.compile(r"^\s+(evidence|explanation)\s*:\s*(.*)$")

_KNOWN = {marker.strip("[]"): marker for marker in SECTION_MARKERS}


class Unparseable(Exception):
    """Raw model output contains no recognizable section header at all."""

    def __init__(self, raw: str):
        super().__init__("no report section headers found")
        self.raw = raw


class MissingImprovedReply(Exception):
    """The one mandatory section is absent or empty."""


class DistortionCategory(Enum):
    """The classical ten-category distortion taxonomy, plus OTHER."""

    ALL_OR_NOTHING = "ALL_OR_NOTHING"
    OVERGENERALIZATION = "OVERGENERALIZATION"
    MENTAL_FILTER = "MENTAL_FILTER"
    DISQUALIFYING_THE_POSITIVE = "DISQUALIFYING_THE_POSITIVE"
    JUMPING_TO_CONCLUSIONS = "JUMPING_TO_CONCLUSIONS"
    MAGNIFICATION_MINIMIZATION = "MAGNIFICATION_MINIMIZATION"
    EMOTIONAL_REASONING = "EMOTIONAL_REASONING"
    SHOULD_STATEMENTS = "SHOULD_STATEMENTS"
    LABELING = "LABELING"
    PERSONALIZATION = "PERSONALIZATION"
    OTHER = "OTHER"


@dataclass(frozen=True)
class CognitiveDistortion:
    """One identified distortion with the client quote that evidences it."""

    category: DistortionCategory
    evidence: str
    explanation: str = ""
    other_label: str = ""

    def __post_init__(self) -> None:
        if self.category is not DistortionCategory.OTHER and not self.evidence.strip():
            raise ValueError("evidence is required unless the category is OTHER")

    def tag(self) -> str:
        if self.category is DistortionCategory.OTHER and self.other_label:
            return f"OTHER: {self.other_label}"
        return self.category.value


@dataclass(frozen=True)
class ReplyPlusReport:
    """Structured report: five analysis sections plus the improved reply."""

    improved_reply: str
    problem_analysis: str = ""
    distortions: tuple[CognitiveDistortion, ...] = ()
    counselor_critique: str = ""
    next_steps: str = ""
    resources: tuple[str, ...] = ()
    raw: str = ""
    template_version: str = "unversioned"
    parse_warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        """Field-per-key export for the console and evaluation tooling."""
        return {
            "problem_analysis": self.problem_analysis,
            "distortions": [
                {
                    "category": d.category.value,
                    "other_label": d.other_label,
                    "evidence": d.evidence,
                    "explanation": d.explanation,
                }
                for d in self.distortions
            ],
            "counselor_critique": self.counselor_critique,
            "improved_reply": self.improved_reply,
            "next_steps": self.next_steps,
            "resources": list(self.resources),
            "template_version": self.template_version,
            "parse_warnings": list(self.parse_warnings),
        }


def split_sections(raw: str) -> list[tuple[str | None, str]]:
    """Split raw text at header lines; (None, raw) when no header exists."""
    segments: list[tuple[str | None, str]] = []
    current: str | None = None
    body: list[str] = []
    seen_header = False
    for line in raw.splitlines():
        m = _HEADER_RE.match(line.strip())
        if m:
            if seen_header or body:
                segments.append((current, "\n".join(body)))
            current = m.group(1)
            body = []
            seen_header = True
            continue
        body.append(line)
    if seen_header or body:
        segments.append((current, "\n".join(body)))
    if not seen_header:
        return [(None, raw)]
    return segments


def _parse_category(tag: str, warnings: list[str]) -> tuple[DistortionCategory, str]:
    cleaned = tag.strip()
    upper = cleaned.upper()
    if upper == "OTHER" or upper.startswith(("OTHER:", "OTHER ")):
        return DistortionCategory.OTHER, cleaned[5:].lstrip(" :")
    name = tag.strip().upper().replace(" ", "_").replace("-", "_")
    try:
        return DistortionCategory(name), ""
    except ValueError:
        warnings.append(f"distortion category {tag!r} mapped to OTHER")
        return DistortionCategory.OTHER, tag.strip()


def _parse_distortions(body: str, warnings: list[str]) -> tuple[CognitiveDistortion, ...]:
    entries: list[dict] = []
    last_field: str | None = None
    for line in body.splitlines():
        if not line.strip():
            last_field = None
            continue
        entry_m = _ENTRY_RE.match(line.strip()) if line.startswith("-") else None
        if entry_m:
            category, other_label = _parse_category(entry_m.group(1), warnings)
            entries.append(
                {"category": category, "other_label": other_label, "evidence": "", "explanation": ""}
            )
            last_field = None
            continue
        field_m = _FIELD_RE.match(line)
        if field_m and entries:
            last_field = field_m.group(1)
            entries[-1][last_field] = field_m.group(2).strip()
            continue
        if entries and last_field:
            # Tolerate wrapped continuation lines from the model.
            entries[-1][last_field] = (entries[-1][last_field] + " " + line.strip()).strip()
    out = []
    for e in entries:
        if e["category"] is not DistortionCategory.OTHER and not e["evidence"]:
            warnings.append(f"distortion {e['category'].value} lacked evidence; kept as OTHER")
            e["other_label"] = e["other_label"] or e["category"].value
            e["category"] = DistortionCategory.OTHER
        out.append(
            CognitiveDistortion(
                category=e["category"],
                evidence=e["evidence"],
                explanation=e["explanation"],
                other_label=e["other_label"],
            )
        )
    return tuple(out)


def _parse_resources(body: str) -> tuple[str, ...]:
    items = []
    for line in body.splitlines():
        text = line.strip()
        if not text:
            continue
        if text.startswith("- "):
            text = text[2:].strip()
        items.append(text)
    return tuple(items)


def parse_report(raw: str, template_version: str = "unversioned") -> ReplyPlusReport:
    """Extract the structured report from raw model output.

    Missing optional sections become warnings; a missing improved reply is
    an error because it is the output the counselor is there to review.

    Raises:
        Unparseable: no recognizable header line anywhere in the text.
        MissingImprovedReply: headers found, but no non-empty improved reply.
    """
    if not raw.strip():
        raise Unparseable(raw)
    segments = split_sections(raw)
    if len(segments) == 1 and segments[0][0] is None:
        raise Unparseable(raw)

    warnings: list[str] = []
    found: dict[str, str] = {}
    for name, body in segments:
        if name is None:
            continue
        if name not in _KNOWN:
            warnings.append(f"unrecognized section {name}")
            continue
        found[name] = body.strip()

    improved = found.get("IMPROVED_REPLY", "")
    if not improved:
        raise MissingImprovedReply("report has no non-empty [IMPROVED_REPLY] section")

    for name in _KNOWN:
        if name not in found and name != "IMPROVED_REPLY":
            warnings.append(f"{name.lower()} absent")

    distortions = _parse_distortions(found.get("COGNITIVE_DISTORTIONS", ""), warnings)
    return ReplyPlusReport(
        improved_reply=improved,
        problem_analysis=found.get("PROBLEM_ANALYSIS", ""),
        distortions=distortions,
        counselor_critique=found.get("COUNSELOR_CRITIQUE", ""),
        next_steps=found.get("NEXT_STEPS", ""),
        resources=_parse_resources(found.get("RESOURCES", "")),
        raw=raw,
        template_version=template_version,
        parse_warnings=tuple(warnings),
    )


def report_from_dict(data: dict, raw: str = "") -> ReplyPlusReport:
    """Rebuild a report from its to_dict form (audit replay)."""
    distortions = tuple(
        CognitiveDistortion(
            category=DistortionCategory(d["category"]),
            evidence=d["evidence"],
            explanation=d["explanation"],
            other_label=d["other_label"],
        )
        for d in data["distortions"]
    )
    return ReplyPlusReport(
        improved_reply=data["improved_reply"],
        problem_analysis=data["problem_analysis"],
        distortions=distortions,
        counselor_critique=data["counselor_critique"],
        next_steps=data["next_steps"],
        resources=tuple(data["resources"]),
        raw=raw,
        template_version=data.get("template_version", "unversioned"),
        parse_warnings=tuple(data.get("parse_warnings", ())),
    )


def serialize_report(report: ReplyPlusReport) -> str:
    """Render a report back into the delimiter format.

    Empty optional sections are omitted; ``parse_report`` of the result
    equals the input on every structured field.
    """
    if not report.improved_reply.strip():
        raise ValueError("a report must carry a non-empty improved reply")
    parts: list[str] = []
    if report.problem_analysis:
        parts.append(f"[PROBLEM_ANALYSIS]\n{report.problem_analysis}")
    if report.distortions:
        lines = ["[COGNITIVE_DISTORTIONS]"]
        for d in report.distortions:
            lines.append(f"- category: {d.tag()}")
            if d.evidence:
                lines.append(f"  evidence: {d.evidence}")
            if d.explanation:
                lines.append(f"  explanation: {d.explanation}")
        parts.append("\n".join(lines))
    if report.counselor_critique:
        parts.append(f"[COUNSELOR_CRITIQUE]\n{report.counselor_critique}")
    parts.append(f"[IMPROVED_REPLY]\n{report.improved_reply}")
    if report.next_steps:
        parts.append(f"[NEXT_STEPS]\n{report.next_steps}")
    if report.resources:
        parts.append("[RESOURCES]\n" + "\n".join(f"- {r}" for r in report.resources))
    return "\n\n".join(parts) + "\n"
