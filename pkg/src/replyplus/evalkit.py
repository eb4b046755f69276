"""Offline evaluation tooling.

Three concerns live here: batch-replaying a conversation corpus through the
full pipeline with a scripted or live provider, collecting expert ratings
(Yes / No / Not sure on five report dimensions), and computing agreement
statistics (Krippendorff's alpha, nominal metric) plus per-dimension
percentage tables.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum

from .detox import DetoxConfig, DetoxOutcome, RetriesExhausted, generate_safe
from .gateway import GenerationParams
from .prompting import (
    DEFAULT_TOKEN_BUDGET,
    DialogueTurn,
    PromptTemplate,
    Role,
    compose_prompt,
)
from .redaction import RedactionRule, redact
from .report import ReplyPlusReport, Unparseable, parse_report
from .safety_index import VectorIndex

logger = logging.getLogger(__name__)


class InsufficientData(Exception):
    """Not enough raters, items, or pairable values for the statistic."""


class MalformedRatings(Exception):
    """Ratings file failed to parse."""


class MalformedCorpus(Exception):
    """Conversation corpus failed to parse."""


class Rating(Enum):
    YES = "Yes"
    NO = "No"
    NOT_SURE = "Not sure"


class ConversationKind(Enum):
    SINGLE_ROUND = "single_round"
    MULTI_ROUND = "multi_round"


# The five report dimensions experts rate, in table row order.
DIMENSIONS: tuple[tuple[str, str], ...] = (
    ("problem_analysis", "Accurate analysis of the client's problem?"),
    ("cognitive_distortion", "Accurate analysis of cognitive distortions?"),
    ("counselor_behavior", "Accurate analysis of the counselor's behavior?"),
    ("verbal_strategies", "Are the provided verbal strategies appropriate?"),
    ("next_steps", "Can it provide effective suggestions for the next step?"),
)
DIMENSION_IDS = tuple(d for d, _ in DIMENSIONS)

Item = tuple[str, str]  # (report id, dimension id)


@dataclass
class RatingMatrix:
    """Sparse raters-by-items rating table; missing cells are allowed."""

    items: list[Item] = field(default_factory=list)
    raters: list[str] = field(default_factory=list)
    cells: dict[tuple[str, Item], Rating] = field(default_factory=dict)

    def add(self, rater: str, item: Item, rating: Rating) -> None:
        if rater not in self.raters:
            self.raters.append(rater)
        if item not in self.items:
            self.items.append(item)
        self.cells[(rater, item)] = rating

    def ratings_for_item(self, item: Item) -> list[Rating]:
        return [
            self.cells[(rater, item)]
            for rater in self.raters
            if (rater, item) in self.cells
        ]

    def restricted_to_dimension(self, dimension: str) -> "RatingMatrix":
        sub = RatingMatrix(raters=list(self.raters))
        sub.items = [item for item in self.items if item[1] == dimension]
        sub.cells = {
            (rater, item): rating
            for (rater, item), rating in self.cells.items()
            if item[1] == dimension
        }
        return sub


@dataclass(frozen=True)
class DimensionRow:
    dimension: str
    yes_pct: float
    no_pct: float
    not_sure_pct: float
    ratings: int


@dataclass(frozen=True)
class AggregateTable:
    rows: tuple[DimensionRow, ...]
    alpha: float
    conversation_kind: ConversationKind


def krippendorff_alpha(matrix: RatingMatrix) -> float:
    """Nominal-metric alpha via the coincidence-matrix formulation.

    Only items rated by at least two raters contribute (the canonical
    pairable-values treatment of missing cells). Zero expected
    disagreement means every pairable value is identical, which is
    perfect agreement by definition.

    Raises:
        InsufficientData: fewer than 2 raters or 2 items, or no item has
            2 or more ratings.
    """
    if len(matrix.raters) < 2 or len(matrix.items) < 2:
        raise InsufficientData(
            f"need >=2 raters and >=2 items, got {len(matrix.raters)} and {len(matrix.items)}"
        )
    coincidence: Counter[tuple[Rating, Rating]] = Counter()
    n_total = 0.0
    for item in matrix.items:
        values = matrix.ratings_for_item(item)
        m = len(values)
        if m < 2:
            continue
        n_total += m
        weight = 1.0 / (m - 1)
        for i, a in enumerate(values):
            for j, b in enumerate(values):
                if i != j:
                    coincidence[(a, b)] += weight
    if n_total == 0:
        raise InsufficientData("no item has two or more ratings")

    marginals: Counter[Rating] = Counter()
    for (a, _), count in coincidence.items():
        marginals[a] += count
    observed_disagreement = sum(c for (a, b), c in coincidence.items() if a != b) / n_total
    expected_disagreement = sum(
        marginals[a] * marginals[b] for a in marginals for b in marginals if a != b
    ) / (n_total * (n_total - 1.0))
    if expected_disagreement == 0.0:
        return 1.0
    return 1.0 - observed_disagreement / expected_disagreement


def alpha_by_dimension(matrix: RatingMatrix) -> dict[str, float | None]:
    """Per-dimension alpha; None where a dimension lacks pairable data."""
    out: dict[str, float | None] = {}
    for dimension in DIMENSION_IDS:
        sub = matrix.restricted_to_dimension(dimension)
        if not sub.items:
            continue
        try:
            out[dimension] = krippendorff_alpha(sub)
        except InsufficientData:
            out[dimension] = None
    return out


def aggregate(ratings: RatingMatrix, kind: ConversationKind) -> AggregateTable:
    """Per-dimension Yes/No/Not-sure percentages with the joint alpha.

    Percentages are computed over non-missing cells and rounded to two
    decimals, so each row sums to 100 within rounding.
    """
    rows: list[DimensionRow] = []
    for dimension in DIMENSION_IDS:
        values = [
            rating
            for (_, item), rating in ratings.cells.items()
            if item[1] == dimension
        ]
        if not values:
            continue
        counts = Counter(values)
        total = len(values)
        rows.append(
            DimensionRow(
                dimension=dimension,
                yes_pct=round(100.0 * counts[Rating.YES] / total, 2),
                no_pct=round(100.0 * counts[Rating.NO] / total, 2),
                not_sure_pct=round(100.0 * counts[Rating.NOT_SURE] / total, 2),
                ratings=total,
            )
        )
    if not rows:
        raise InsufficientData("no ratings to aggregate")
    return AggregateTable(rows=tuple(rows), alpha=krippendorff_alpha(ratings), conversation_kind=kind)


def _pct(value: float) -> str:
    return "-" if value == 0 else f"{value:.2f}%"


def format_table(table: AggregateTable) -> str:
    """Human-readable table; zero cells render as a dash."""
    labels = dict(DIMENSIONS)
    header = f"{'Item':<55} {'Yes':>8} {'No':>8} {'Not sure':>9}"
    lines = [f"[{table.conversation_kind.value}]", header, "-" * len(header)]
    for row in table.rows:
        lines.append(
            f"{labels.get(row.dimension, row.dimension):<55} "
            f"{_pct(row.yes_pct):>8} {_pct(row.no_pct):>8} {_pct(row.not_sure_pct):>9}"
        )
    lines.append(f"Krippendorff's alpha: {table.alpha:.2f}")
    return "\n".join(lines)


def table_to_delimited(table: AggregateTable) -> str:
    """Machine-readable CSV mirror of the formatted table."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["kind", "dimension", "yes_pct", "no_pct", "not_sure_pct", "ratings"])
    for row in table.rows:
        writer.writerow(
            [
                table.conversation_kind.value,
                row.dimension,
                f"{row.yes_pct:.2f}",
                f"{row.no_pct:.2f}",
                f"{row.not_sure_pct:.2f}",
                row.ratings,
            ]
        )
    writer.writerow(["kind", "alpha", f"{table.alpha:.6f}", "", "", ""])
    return out.getvalue()


_RATING_ALIASES = {
    "yes": Rating.YES,
    "no": Rating.NO,
    "not sure": Rating.NOT_SURE,
    "not_sure": Rating.NOT_SURE,
    "notsure": Rating.NOT_SURE,
}


def parse_rating(text: str) -> Rating:
    rating = _RATING_ALIASES.get(text.strip().lower())
    if rating is None:
        raise MalformedRatings(f"unknown rating {text!r}")
    return rating


def load_ratings(source: str) -> RatingMatrix:
    """Parse (rater, report, dimension, rating) CSV rows with a header."""
    try:
        rows = list(csv.reader(io.StringIO(source)))
    except csv.Error as exc:
        raise MalformedRatings(str(exc)) from exc
    if not rows:
        raise MalformedRatings("ratings file is empty")
    header = [h.strip().lower() for h in rows[0]]
    expected = ["rater", "report", "dimension", "rating"]
    if header != expected:
        raise MalformedRatings(f"expected header {expected}, got {header}")
    matrix = RatingMatrix()
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 4:
            raise MalformedRatings(f"row {lineno} has {len(row)} fields, expected 4")
        rater, report_id, dimension, rating = (cell.strip() for cell in row)
        if dimension not in DIMENSION_IDS:
            raise MalformedRatings(f"row {lineno}: unknown dimension {dimension!r}")
        matrix.add(rater, (report_id, dimension), parse_rating(rating))
    return matrix


def ratings_to_csv(matrix: RatingMatrix) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["rater", "report", "dimension", "rating"])
    for rater in matrix.raters:
        for item in matrix.items:
            rating = matrix.cells.get((rater, item))
            if rating is not None:
                writer.writerow([rater, item[0], item[1], rating.value])
    return out.getvalue()


@dataclass(frozen=True)
class ReplayConfig:
    rules: tuple[RedactionRule, ...]
    template: PromptTemplate
    detox: DetoxConfig = DetoxConfig()
    params: GenerationParams = GenerationParams(model_name="gpt-3.5-turbo-16k")
    token_budget: int = DEFAULT_TOKEN_BUDGET


@dataclass
class ReplayResult:
    conversation_id: str
    kind: ConversationKind
    report: ReplyPlusReport | None = None
    outcome: DetoxOutcome | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.conversation_id,
            "kind": self.kind.value,
            "report": self.report.to_dict() if self.report else None,
            "attempts": len(self.outcome.attempts) if self.outcome else 0,
            "trail": [
                {"attempt": a.attempt, "verdict": a.verdict.to_dict()}
                for a in (self.outcome.attempts if self.outcome else ())
            ],
            "error": self.error,
        }


_ROLE_NAMES = {"client": Role.CLIENT, "counselor": Role.COUNSELOR}


def _parse_conversation(lineno: int, record: dict) -> tuple[str, ConversationKind, list[tuple[Role, str]], str]:
    try:
        conv_id = str(record["id"])
        kind = ConversationKind(record["kind"])
        draft = record["draft"]
        raw_turns = record["turns"]
    except (KeyError, ValueError) as exc:
        raise MalformedCorpus(f"line {lineno}: {exc}") from exc
    if not isinstance(raw_turns, list) or not isinstance(draft, str):
        raise MalformedCorpus(f"line {lineno}: turns must be a list and draft a string")
    turns: list[tuple[Role, str]] = []
    for turn in raw_turns:
        role = _ROLE_NAMES.get(str(turn.get("role", "")).lower())
        text = turn.get("text")
        if role is None or not isinstance(text, str):
            raise MalformedCorpus(f"line {lineno}: each turn needs role client/counselor and text")
        turns.append((role, text))
    return conv_id, kind, turns, draft


def replay_corpus(
    corpus: str,
    gateway,
    index: VectorIndex,
    config: ReplayConfig,
) -> list[ReplayResult]:
    """Run every line-JSON conversation through the full pipeline.

    Per-conversation pipeline failures (blocked retries, unparseable
    output, bad histories) are recorded on the result instead of aborting
    the batch. Structural corpus errors abort with MalformedCorpus.
    """
    parsed: list[tuple[str, ConversationKind, list[tuple[Role, str]], str]] = []
    for lineno, line in enumerate(corpus.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedCorpus(f"line {lineno}: {exc}") from exc
        if not isinstance(record, dict):
            raise MalformedCorpus(f"line {lineno}: expected a JSON object")
        parsed.append(_parse_conversation(lineno, record))

    results: list[ReplayResult] = []
    for conv_id, kind, turns, draft in parsed:
        result = ReplayResult(conversation_id=conv_id, kind=kind)
        try:
            history = [
                DialogueTurn(role=role, text=redact(text, config.rules), index=i)
                for i, (role, text) in enumerate(turns)
            ]
            masked_draft = redact(draft, config.rules)
            prompt = compose_prompt(config.template, history, masked_draft, budget=config.token_budget)
            outcome = generate_safe(
                gateway, prompt, index, params=config.params, config=config.detox
            )
            result.outcome = outcome
            result.report = parse_report(outcome.text)
        except RetriesExhausted as exc:
            result.error = f"retries_exhausted: all {len(exc.attempts)} attempts blocked"
        except Unparseable:
            result.error = "unparseable: no recognizable section headers"
        except Exception as exc:  # noqa: BLE001 - batch must survive any one conversation
            result.error = f"{type(exc).__name__}: {exc}"
        results.append(result)
        if result.error:
            logger.warning("conversation %s failed: %s", conv_id, result.error)
    return results


def replay_results_to_jsonl(results: list[ReplayResult]) -> str:
    """Stable JSONL rendering; identical inputs give identical bytes."""
    return "".join(
        json.dumps(r.to_dict(), ensure_ascii=False, sort_keys=True) + "\n" for r in results
    )
