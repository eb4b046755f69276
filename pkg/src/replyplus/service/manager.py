"""Session lifecycle and pipeline orchestration.

One submission runs redact → compose → screened generation → redact the
output → parse, then parks the result for counselor review. Every state
transition is appended to the audit log with PII-free payloads (masked
texts and hashes only); replaying a session's log over its creation
snapshot reconstructs the state exactly.
"""

from __future__ import annotations

import logging
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Callable

from ..detox import (
    DEFAULT_RETRY_CAUTION,
    AttemptRecord,
    DetoxConfig,
    DetoxOutcome,
    RetriesExhausted,
    ToxicityVerdict,
    gate,
    generate_safe,
    verdict_from_dict,
)
from ..gateway import GenerationParams
from ..prompting import (
    DEFAULT_TOKEN_BUDGET,
    DialogueTurn,
    PromptTemplate,
    Role,
    compose_prompt,
)
from ..redaction import RedactedText, RedactionRule, RedactionSpan, redact
from ..report import (
    MissingImprovedReply,
    ReplyPlusReport,
    Unparseable,
    parse_report,
    report_from_dict,
)
from ..safety_index import VectorIndex
from .store import StoredEvent

logger = logging.getLogger(__name__)


class SessionNotFound(Exception):
    pass


class ReviewAlreadyPending(Exception):
    pass


class NoPendingReview(Exception):
    pass


class InvalidInput(Exception):
    pass


class EditBlocked(Exception):
    """Edited reply failed the gate; carries the verdict for display."""

    def __init__(self, verdict: ToxicityVerdict):
        self.verdict = verdict
        hit = None
        for check in verdict.checks:
            if check.blocked and check.hits:
                hit = check.hits[0]
                break
        self.distance = hit.distance if hit else None
        self.entry_id = hit.entry_id if hit else None
        super().__init__(
            f"edited reply blocked (distance {self.distance}, entry {self.entry_id})"
        )


class UnparseableOutput(Exception):
    """Model output had no usable structure even after one regeneration."""


class SessionStatus(Enum):
    OPEN = "open"
    CLOSED = "closed"


class ReviewState(Enum):
    AWAITING_REVIEW = "awaiting_review"
    EDITED = "edited"
    APPROVED = "approved"
    REJECTED = "rejected"


class ReviewAction(Enum):
    APPROVE = "approve"
    EDIT = "edit"
    REJECT = "reject"


class EventKind(Enum):
    TURN_ADDED = "TURN_ADDED"
    REPORT_GENERATED = "REPORT_GENERATED"
    GATE_BLOCKED = "GATE_BLOCKED"
    RETRIES_EXHAUSTED = "RETRIES_EXHAUSTED"
    REVIEW_EDIT = "REVIEW_EDIT"
    REVIEW_APPROVE = "REVIEW_APPROVE"
    REVIEW_REJECT = "REVIEW_REJECT"


def _redacted_to_dict(text: RedactedText) -> dict:
    return {
        "masked": text.masked,
        "spans": [
            {"start": s.start, "end": s.end, "category": s.category, "hash": s.original_hash}
            for s in text.spans
        ],
        "rule_set_version": text.rule_set_version,
    }


def _redacted_from_dict(data: dict) -> RedactedText:
    return RedactedText(
        masked=data["masked"],
        spans=tuple(
            RedactionSpan(
                start=s["start"], end=s["end"], category=s["category"], original_hash=s["hash"]
            )
            for s in data["spans"]
        ),
        rule_set_version=data["rule_set_version"],
    )


@dataclass
class PendingReview:
    draft: RedactedText
    report: ReplyPlusReport
    detox: DetoxOutcome
    state: ReviewState = ReviewState.AWAITING_REVIEW
    edited_reply: RedactedText | None = None
    edit_gate: ToxicityVerdict | None = None

    def released_text(self) -> str:
        if self.state is ReviewState.EDITED and self.edited_reply is not None:
            return self.edited_reply.masked
        return self.report.improved_reply

    def to_view(self) -> dict:
        return {
            "state": self.state.value,
            "draft": _redacted_to_dict(self.draft),
            "report": self.report.to_dict(),
            "attempts": len(self.detox.attempts),
            "trail": [
                {"attempt": a.attempt, "verdict": a.verdict.to_dict()} for a in self.detox.attempts
            ],
            "edited_reply": _redacted_to_dict(self.edited_reply) if self.edited_reply else None,
            "edit_gate": self.edit_gate.to_dict() if self.edit_gate else None,
        }


@dataclass
class Session:
    id: str
    created_at: str
    turns: list[DialogueTurn] = field(default_factory=list)
    pending: PendingReview | None = None
    status: SessionStatus = SessionStatus.OPEN

    def to_view(self) -> dict:
        return {
            "id": self.id,
            "created_at": self.created_at,
            "status": self.status.value,
            "turns": [
                {
                    "index": t.index,
                    "role": t.role.value,
                    "text": _redacted_to_dict(t.text),
                }
                for t in self.turns
            ],
            "pending": self.pending.to_view() if self.pending else None,
        }

    def to_summary(self) -> dict:
        return {
            "id": self.id,
            "created_at": self.created_at,
            "status": self.status.value,
            "turn_count": len(self.turns),
            "pending_state": self.pending.state.value if self.pending else None,
        }


def _default_clock() -> str:
    return datetime.now(timezone.utc).isoformat()


def _default_id_factory() -> str:
    return uuid.uuid4().hex


class SessionManager:
    """Owns all sessions; serializes operations per session with a lock.

    The clock and id factory are injectable so offline runs can be made
    deterministic end to end.
    """

    def __init__(
        self,
        *,
        gateway,
        index: VectorIndex,
        template: PromptTemplate,
        rules: list[RedactionRule],
        store,
        detox_config: DetoxConfig = DetoxConfig(),
        params: GenerationParams | None = None,
        token_budget: int = DEFAULT_TOKEN_BUDGET,
        clock: Callable[[], str] | None = None,
        id_factory: Callable[[], str] | None = None,
    ) -> None:
        self.gateway = gateway
        self.index = index
        self.template = template
        self.rules = rules
        self.store = store
        self.detox_config = detox_config
        self.params = params or GenerationParams(model_name="gpt-3.5-turbo-16k")
        self.token_budget = token_budget
        self.clock = clock or _default_clock
        self.id_factory = id_factory or _default_id_factory
        self._sessions: dict[str, Session] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()
        self._seq: dict[str, int] = {}
        self._load_existing()

    # -- persistence ------------------------------------------------------

    def _load_existing(self) -> None:
        for session_id in self.store.session_ids():
            snapshot = self.store.read_snapshot(session_id)
            if snapshot is None:
                continue
            events = self.store.scan(session_id)
            self._sessions[session_id] = self.replay(snapshot, events)
            self._seq[session_id] = events[-1].seq + 1 if events else 0
            self._locks[session_id] = threading.Lock()

    @staticmethod
    def replay(snapshot: dict, events: list[StoredEvent]) -> Session:
        """Rebuild a session from its creation snapshot plus event log."""
        session = Session(id=snapshot["id"], created_at=snapshot["created_at"])
        for event in events:
            kind = EventKind(event.kind)
            payload = event.payload
            if kind is EventKind.TURN_ADDED:
                session.turns.append(
                    DialogueTurn(
                        role=Role(payload["role"]),
                        text=_redacted_from_dict(payload["text"]),
                        index=payload["index"],
                    )
                )
            elif kind is EventKind.REPORT_GENERATED:
                attempts = tuple(
                    AttemptRecord(
                        attempt=t["attempt"], text="", verdict=verdict_from_dict(t["verdict"])
                    )
                    for t in payload["trail"]
                )
                session.pending = PendingReview(
                    draft=_redacted_from_dict(payload["draft"]),
                    report=report_from_dict(payload["report"]),
                    detox=DetoxOutcome(
                        text=payload["report"]["improved_reply"], attempts=attempts
                    ),
                )
            elif kind is EventKind.REVIEW_EDIT:
                assert session.pending is not None
                session.pending.edited_reply = _redacted_from_dict(payload["edited_reply"])
                session.pending.edit_gate = verdict_from_dict(payload["verdict"])
                session.pending.state = ReviewState.EDITED
            elif kind is EventKind.REVIEW_APPROVE:
                session.turns.append(
                    DialogueTurn(
                        role=Role.COUNSELOR,
                        text=_redacted_from_dict(payload["released"]),
                        index=payload["index"],
                    )
                )
                session.pending = None
            elif kind is EventKind.REVIEW_REJECT:
                session.pending = None
            # GATE_BLOCKED and RETRIES_EXHAUSTED are audit-only records.
        return session

    def _append_event(self, session_id: str, kind: EventKind, payload: dict) -> None:
        seq = self._seq.get(session_id, 0)
        self._seq[session_id] = seq + 1
        self.store.append(
            StoredEvent(
                session_id=session_id,
                seq=seq,
                timestamp=self.clock(),
                kind=kind.value,
                payload=payload,
            )
        )

    # -- session access ---------------------------------------------------

    def _lock_for(self, session_id: str) -> threading.Lock:
        with self._registry_lock:
            if session_id not in self._sessions:
                raise SessionNotFound(session_id)
            return self._locks[session_id]

    def create_session(self) -> Session:
        with self._registry_lock:
            session_id = self.id_factory()
            session = Session(id=session_id, created_at=self.clock())
            self._sessions[session_id] = session
            self._locks[session_id] = threading.Lock()
            self._seq[session_id] = 0
            self.store.write_snapshot(
                session_id,
                {"id": session_id, "created_at": session.created_at, "status": session.status.value},
            )
            return session

    def get_session(self, session_id: str) -> Session:
        with self._registry_lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise SessionNotFound(session_id)
        return session

    def list_sessions(self) -> list[Session]:
        with self._registry_lock:
            return sorted(self._sessions.values(), key=lambda s: (s.created_at, s.id))

    def audit_trail(self, session_id: str) -> list[StoredEvent]:
        self.get_session(session_id)
        return self.store.scan(session_id)

    # -- pipeline ---------------------------------------------------------

    def _generate_report(self, prompt) -> tuple[DetoxOutcome, ReplyPlusReport]:
        outcome = generate_safe(
            self.gateway,
            prompt,
            self.index,
            params=self.params,
            config=self.detox_config,
            retry_caution=self.template.retry_caution(DEFAULT_RETRY_CAUTION),
        )
        # Model output is redacted too: the store must never hold a
        # rule-matching substring, even one the model invented.
        masked_output = redact(outcome.text, self.rules)
        report = parse_report(masked_output.masked, template_version=self.template.version)
        return outcome, report

    def _run_pipeline(self, session: Session, draft: RedactedText) -> PendingReview:
        prompt = compose_prompt(self.template, session.turns, draft, budget=self.token_budget)
        try:
            outcome, report = self._generate_report(prompt)
        except (Unparseable, MissingImprovedReply):
            # One silent regeneration before surfacing structural failures.
            try:
                outcome, report = self._generate_report(prompt)
            except (Unparseable, MissingImprovedReply) as exc:
                raise UnparseableOutput("model output lacked the required report structure") from exc

        for record in outcome.attempts:
            if record.verdict.blocked:
                self._append_event(
                    session.id,
                    EventKind.GATE_BLOCKED,
                    {"stage": "generation", "attempt": record.attempt, "verdict": record.verdict.to_dict()},
                )
        pending = PendingReview(draft=draft, report=report, detox=outcome)
        self._append_event(
            session.id,
            EventKind.REPORT_GENERATED,
            {
                "draft": _redacted_to_dict(draft),
                "report": report.to_dict(),
                "attempts": len(outcome.attempts),
                "trail": [
                    {"attempt": a.attempt, "verdict": a.verdict.to_dict()}
                    for a in outcome.attempts
                ],
            },
        )
        return pending

    def submit_turn(self, session_id: str, client_comment: str, counselor_draft: str) -> PendingReview:
        if not client_comment.strip():
            raise InvalidInput("client_comment must be non-empty")
        if not counselor_draft.strip():
            raise InvalidInput("counselor_draft must be non-empty")
        with self._lock_for(session_id):
            session = self.get_session(session_id)
            if session.pending is not None:
                raise ReviewAlreadyPending(session_id)

            masked_comment = redact(client_comment, self.rules)
            masked_draft = redact(counselor_draft, self.rules)
            turn = DialogueTurn(role=Role.CLIENT, text=masked_comment, index=len(session.turns))
            session.turns.append(turn)
            self._append_event(
                session_id,
                EventKind.TURN_ADDED,
                {"index": turn.index, "role": turn.role.value, "text": _redacted_to_dict(masked_comment)},
            )

            try:
                session.pending = self._run_pipeline(session, masked_draft)
            except RetriesExhausted as exc:
                for record in exc.attempts:
                    self._append_event(
                        session_id,
                        EventKind.GATE_BLOCKED,
                        {
                            "stage": "generation",
                            "attempt": record.attempt,
                            "verdict": record.verdict.to_dict(),
                        },
                    )
                self._append_event(
                    session_id,
                    EventKind.RETRIES_EXHAUSTED,
                    {
                        "attempts": len(exc.attempts),
                        "trail": [
                            {"attempt": a.attempt, "verdict": a.verdict.to_dict()}
                            for a in exc.attempts
                        ],
                    },
                )
                raise
            return session.pending

    def review(
        self, session_id: str, action: ReviewAction, edited_reply: str | None = None
    ) -> Session:
        with self._lock_for(session_id):
            session = self.get_session(session_id)
            pending = session.pending
            if pending is None or pending.state not in (
                ReviewState.AWAITING_REVIEW,
                ReviewState.EDITED,
            ):
                raise NoPendingReview(session_id)

            if action is ReviewAction.EDIT:
                if not edited_reply or not edited_reply.strip():
                    raise InvalidInput("edited_reply must be non-empty for edit")
                masked = redact(edited_reply, self.rules)
                verdict = gate(masked.masked, self.index, self.gateway, self.detox_config)
                if verdict.blocked:
                    self._append_event(
                        session_id,
                        EventKind.GATE_BLOCKED,
                        {"stage": "review_edit", "verdict": verdict.to_dict()},
                    )
                    raise EditBlocked(verdict)
                pending.edited_reply = masked
                pending.edit_gate = verdict
                pending.state = ReviewState.EDITED
                self._append_event(
                    session_id,
                    EventKind.REVIEW_EDIT,
                    {"edited_reply": _redacted_to_dict(masked), "verdict": verdict.to_dict()},
                )
                return session

            if action is ReviewAction.APPROVE:
                # The original report passed the gate by construction and an
                # edit is only stored when its own gate passed; re-check so a
                # release can never bypass the screen.
                if pending.state is ReviewState.EDITED:
                    if pending.edit_gate is None or pending.edit_gate.blocked:
                        raise EditBlocked(pending.edit_gate)  # pragma: no cover - unreachable
                released = redact(pending.released_text(), self.rules)
                turn = DialogueTurn(role=Role.COUNSELOR, text=released, index=len(session.turns))
                session.turns.append(turn)
                pending.state = ReviewState.APPROVED
                session.pending = None
                self._append_event(
                    session_id,
                    EventKind.REVIEW_APPROVE,
                    {"released": _redacted_to_dict(released), "index": turn.index},
                )
                return session

            pending.state = ReviewState.REJECTED
            session.pending = None
            self._append_event(session_id, EventKind.REVIEW_REJECT, {})
            return session
