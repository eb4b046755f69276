"""Session service: manager, stores, HTTP API, and configuration."""

from .api import create_app
from .config import ServiceConfig, build_gateway, build_manager, load_config, parse_config
from .manager import (
    EditBlocked,
    InvalidInput,
    NoPendingReview,
    PendingReview,
    ReviewAction,
    ReviewAlreadyPending,
    ReviewState,
    Session,
    SessionManager,
    SessionNotFound,
    SessionStatus,
    UnparseableOutput,
)
from .store import FileEventStore, MemoryEventStore, StoredEvent, StoreError

__all__ = [
    "EditBlocked",
    "FileEventStore",
    "InvalidInput",
    "MemoryEventStore",
    "NoPendingReview",
    "PendingReview",
    "ReviewAction",
    "ReviewAlreadyPending",
    "ReviewState",
    "ServiceConfig",
    "Session",
    "SessionManager",
    "SessionNotFound",
    "SessionStatus",
    "StoreError",
    "StoredEvent",
    "UnparseableOutput",
    "build_gateway",
    "build_manager",
    "create_app",
    "load_config",
    "parse_config",
]
