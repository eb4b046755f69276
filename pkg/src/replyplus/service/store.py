"""Append-only per-session event log with creation snapshots.

The event log is the source of truth: session state is reconstructed by
replaying events over the creation snapshot. Two implementations share the
interface, an in-memory store for tests and a JSONL-file store for
deployments.
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass
from pathlib import Path

_SESSION_ID_RE = re.compile(r"[A-Za-z0-9_-]+\Z")


class StoreError(Exception):
    """Corrupt store content or an invalid session id."""


@dataclass(frozen=True)
class StoredEvent:
    session_id: str
    seq: int
    timestamp: str
    kind: str
    payload: dict

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "seq": self.seq,
            "timestamp": self.timestamp,
            "kind": self.kind,
            "payload": self.payload,
        }


def _check_session_id(session_id: str) -> str:
    if not _SESSION_ID_RE.fullmatch(session_id):
        raise StoreError(f"invalid session id {session_id!r}")
    return session_id


class MemoryEventStore:
    """Dict-backed store; state lives only as long as the process."""

    def __init__(self) -> None:
        self._events: dict[str, list[StoredEvent]] = {}
        self._snapshots: dict[str, dict] = {}
        self._lock = threading.Lock()

    def append(self, event: StoredEvent) -> None:
        with self._lock:
            self._events.setdefault(event.session_id, []).append(event)

    def scan(self, session_id: str) -> list[StoredEvent]:
        with self._lock:
            return list(self._events.get(session_id, []))

    def write_snapshot(self, session_id: str, snapshot: dict) -> None:
        with self._lock:
            self._snapshots[session_id] = dict(snapshot)

    def read_snapshot(self, session_id: str) -> dict | None:
        with self._lock:
            snapshot = self._snapshots.get(session_id)
            return dict(snapshot) if snapshot is not None else None

    def session_ids(self) -> list[str]:
        with self._lock:
            return sorted(self._snapshots)


class FileEventStore:
    """One JSONL event file and one snapshot file per session.

    Events are written with append-mode opens and never rewritten, so the
    log stays append-only at the filesystem level as well.
    """

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)
        (self.root / "events").mkdir(parents=True, exist_ok=True)
        (self.root / "snapshots").mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _event_path(self, session_id: str) -> Path:
        return self.root / "events" / f"{_check_session_id(session_id)}.jsonl"

    def _snapshot_path(self, session_id: str) -> Path:
        return self.root / "snapshots" / f"{_check_session_id(session_id)}.json"

    def append(self, event: StoredEvent) -> None:
        line = json.dumps(event.to_dict(), ensure_ascii=False, sort_keys=True)
        with self._lock:
            with self._event_path(event.session_id).open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")

    def scan(self, session_id: str) -> list[StoredEvent]:
        path = self._event_path(session_id)
        if not path.exists():
            return []
        events: list[StoredEvent] = []
        for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
                events.append(
                    StoredEvent(
                        session_id=data["session_id"],
                        seq=data["seq"],
                        timestamp=data["timestamp"],
                        kind=data["kind"],
                        payload=data["payload"],
                    )
                )
            except (json.JSONDecodeError, KeyError) as exc:
                raise StoreError(f"{path}:{lineno}: {exc}") from exc
        return events

    def write_snapshot(self, session_id: str, snapshot: dict) -> None:
        path = self._snapshot_path(session_id)
        with self._lock:
            path.write_text(
                json.dumps(snapshot, ensure_ascii=False, sort_keys=True) + "\n", encoding="utf-8"
            )

    def read_snapshot(self, session_id: str) -> dict | None:
        path = self._snapshot_path(session_id)
        if not path.exists():
            return None
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise StoreError(f"{path}: {exc}") from exc

    def session_ids(self) -> list[str]:
        return sorted(p.stem for p in (self.root / "snapshots").glob("*.json"))
