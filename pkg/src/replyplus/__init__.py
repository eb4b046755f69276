"""Counselor-support pipeline: redact, prompt, generate, screen, review.

The package turns a client comment plus a counselor's draft reply into a
structured, safety-screened report (an improved reply with analysis) that
a human counselor reviews before anything is released.
"""

__version__ = "0.1.0"

from .detox import DetoxConfig, DetoxOutcome, GateScope, RetriesExhausted, ToxicityVerdict, gate, generate_safe
from .gateway import (
    EmbeddingVector,
    GenerationParams,
    MockGateway,
    ProviderScript,
    RemoteConfig,
    RemoteGateway,
)
from .prompting import ComposedPrompt, DialogueTurn, PromptTemplate, Role, compose_prompt, estimate_tokens
from .redaction import RedactedText, RedactionRule, default_rules, load_rules, redact
from .report import (
    CognitiveDistortion,
    DistortionCategory,
    ReplyPlusReport,
    parse_report,
    serialize_report,
)
from .safety_index import (
    CorpusColumns,
    NeighborHit,
    OffensiveEntry,
    VectorIndex,
    build_index,
    ingest_corpus,
    load_index,
    nearest,
    save_index,
)

__all__ = [
    "CognitiveDistortion",
    "ComposedPrompt",
    "CorpusColumns",
    "DetoxConfig",
    "DetoxOutcome",
    "DialogueTurn",
    "DistortionCategory",
    "EmbeddingVector",
    "GateScope",
    "GenerationParams",
    "MockGateway",
    "NeighborHit",
    "OffensiveEntry",
    "PromptTemplate",
    "ProviderScript",
    "RedactedText",
    "RedactionRule",
    "RemoteConfig",
    "RemoteGateway",
    "ReplyPlusReport",
    "RetriesExhausted",
    "Role",
    "ToxicityVerdict",
    "VectorIndex",
    "compose_prompt",
    "default_rules",
    "estimate_tokens",
    "gate",
    "generate_safe",
    "ingest_corpus",
    "load_index",
    "load_rules",
    "nearest",
    "parse_report",
    "redact",
    "save_index",
    "serialize_report",
    "build_index",
    "__version__",
]
