"""HTTP+JSON API over the session manager.

Every error is a structured problem document: {"code", "message",
"detail"}. The API only ever emits redacted text; unmasked input never
survives past the manager boundary.
"""

from __future__ import annotations

from fastapi import Depends, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel
from starlette.exceptions import HTTPException as StarletteHTTPException

from ..detox import RetriesExhausted
from ..gateway import ProviderRejected, ProviderUnavailable, ScriptExhausted
from .manager import (
    EditBlocked,
    InvalidInput,
    NoPendingReview,
    ReviewAction,
    ReviewAlreadyPending,
    SessionManager,
    SessionNotFound,
    UnparseableOutput,
)


class Unauthorized(Exception):
    pass


class TurnRequest(BaseModel):
    client_comment: str
    counselor_draft: str


class ReviewRequest(BaseModel):
    action: str
    edited_reply: str | None = None


def _problem(status: int, code: str, message: str, detail: dict | list | None = None) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"code": code, "message": message, "detail": detail},
    )


def _trail_detail(attempts) -> dict:
    return {
        "attempts": len(attempts),
        "trail": [{"attempt": a.attempt, "verdict": a.verdict.to_dict()} for a in attempts],
    }


def create_app(manager: SessionManager, auth_token: str = "") -> FastAPI:
    def check_auth(request: Request) -> None:
        if not auth_token:
            return
        header = request.headers.get("Authorization", "")
        if header != f"Bearer {auth_token}":
            raise Unauthorized("missing or invalid bearer token")

    app = FastAPI(title="replyplus session service", dependencies=[Depends(check_auth)])
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(Unauthorized)
    async def _unauthorized(_: Request, exc: Unauthorized) -> JSONResponse:
        return _problem(401, "unauthorized", str(exc))

    @app.exception_handler(SessionNotFound)
    async def _not_found(_: Request, exc: SessionNotFound) -> JSONResponse:
        return _problem(404, "session_not_found", f"no session {exc}")

    @app.exception_handler(ReviewAlreadyPending)
    async def _already_pending(_: Request, exc: ReviewAlreadyPending) -> JSONResponse:
        return _problem(409, "review_already_pending", f"session {exc} already has a pending review")

    @app.exception_handler(NoPendingReview)
    async def _no_pending(_: Request, exc: NoPendingReview) -> JSONResponse:
        return _problem(409, "no_pending_review", f"session {exc} has no review awaiting action")

    @app.exception_handler(InvalidInput)
    async def _invalid_input(_: Request, exc: InvalidInput) -> JSONResponse:
        return _problem(422, "invalid_input", str(exc))

    @app.exception_handler(EditBlocked)
    async def _edit_blocked(_: Request, exc: EditBlocked) -> JSONResponse:
        return _problem(
            409,
            "edit_blocked",
            "edited reply failed the safety screen",
            {
                "distance": exc.distance,
                "entry_id": exc.entry_id,
                "verdict": exc.verdict.to_dict() if exc.verdict else None,
            },
        )

    @app.exception_handler(RetriesExhausted)
    async def _retries(_: Request, exc: RetriesExhausted) -> JSONResponse:
        return _problem(
            502,
            "retries_exhausted",
            f"all {len(exc.attempts)} generation attempts were blocked",
            _trail_detail(exc.attempts),
        )

    @app.exception_handler(UnparseableOutput)
    async def _unparseable(_: Request, exc: UnparseableOutput) -> JSONResponse:
        return _problem(502, "unparseable_output", str(exc))

    @app.exception_handler(ProviderUnavailable)
    async def _provider_down(_: Request, exc: ProviderUnavailable) -> JSONResponse:
        return _problem(503, "provider_unavailable", str(exc))

    @app.exception_handler(ProviderRejected)
    async def _provider_rejected(_: Request, exc: ProviderRejected) -> JSONResponse:
        return _problem(502, "provider_rejected", str(exc))

    @app.exception_handler(ScriptExhausted)
    async def _script_exhausted(_: Request, exc: ScriptExhausted) -> JSONResponse:
        return _problem(503, "provider_unavailable", str(exc))

    @app.exception_handler(RequestValidationError)
    async def _validation(_: Request, exc: RequestValidationError) -> JSONResponse:
        return _problem(422, "invalid_input", "request body failed validation", exc.errors())

    @app.exception_handler(StarletteHTTPException)
    async def _http_error(_: Request, exc: StarletteHTTPException) -> JSONResponse:
        return _problem(exc.status_code, "http_error", str(exc.detail))

    @app.get("/health")
    async def health() -> dict:
        return {"status": "ok", "sessions": len(manager.list_sessions())}

    @app.post("/sessions", status_code=201)
    async def create_session() -> dict:
        return manager.create_session().to_view()

    @app.get("/sessions")
    async def list_sessions() -> dict:
        return {"sessions": [s.to_summary() for s in manager.list_sessions()]}

    @app.get("/sessions/{session_id}")
    async def get_session(session_id: str) -> dict:
        return manager.get_session(session_id).to_view()

    @app.post("/sessions/{session_id}/turns")
    async def submit_turn(session_id: str, body: TurnRequest) -> dict:
        pending = manager.submit_turn(session_id, body.client_comment, body.counselor_draft)
        return {"session_id": session_id, "pending": pending.to_view()}

    @app.get("/sessions/{session_id}/report")
    async def get_report(session_id: str):
        session = manager.get_session(session_id)
        if session.pending is None:
            return _problem(404, "no_report", f"session {session_id} has no report awaiting review")
        return {"session_id": session_id, "pending": session.pending.to_view()}

    @app.post("/sessions/{session_id}/review")
    async def review(session_id: str, body: ReviewRequest) -> dict:
        try:
            action = ReviewAction(body.action.lower())
        except ValueError as exc:
            raise InvalidInput(f"unknown review action {body.action!r}") from exc
        session = manager.review(session_id, action, edited_reply=body.edited_reply)
        return session.to_view()

    @app.get("/sessions/{session_id}/audit")
    async def audit(session_id: str) -> dict:
        events = manager.audit_trail(session_id)
        return {"session_id": session_id, "events": [e.to_dict() for e in events]}

    return app
