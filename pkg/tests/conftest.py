"""Shared fixtures: scripted gateways, tiny indexes, canonical report text."""

from __future__ import annotations

import pytest

from replyplus.gateway import EmbeddingMode, MockGateway, ProviderScript
from replyplus.prompting import load_bundled_template
from replyplus.redaction import default_rules
from replyplus.safety_index import OffensiveEntry, VectorIndex, build_index

DIM = 4

# Filled by tests/test_acceptance.py; printed once at the end of the run so
# every criterion gets exactly one visible pass/fail line.
ACCEPTANCE_RESULTS: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, status in ACCEPTANCE_RESULTS.items():
        terminalreporter.write_line(f"{status}: {name}")

# Well-formed model output used wherever a clean completion is needed.
SAMPLE_REPORT = """[PROBLEM_ANALYSIS]
The client feels worthless after losing a job and is withdrawing from friends.

[COGNITIVE_DISTORTIONS]
- category: OVERGENERALIZATION
  evidence: I always ruin everything
  explanation: A single setback is treated as a universal law.
- category: LABELING
  evidence: I am a complete failure
  explanation: The client defines themself by one event.

[COUNSELOR_CRITIQUE]
The draft says "it is not a big deal", which minimizes the client's pain.

[IMPROVED_REPLY]
That sounds incredibly heavy, and it makes sense that you feel drained.
I am here with you. Could you tell me a little more about what the days
have looked like since it happened?

[NEXT_STEPS]
Ask about sleep and appetite next; invite the client to name one small
activity that used to bring relief.

[RESOURCES]
- 24-hour psychological support hotline
- Outpatient service at a local mental health center
"""


def make_gateway(
    completions: list[str] | None = None,
    table: dict[str, tuple[float, ...]] | None = None,
    dim: int = DIM,
) -> MockGateway:
    """Scripted gateway; TABLE embeddings when a table is given."""
    mode = EmbeddingMode.TABLE if table is not None else EmbeddingMode.HASH_DETERMINISTIC
    script = ProviderScript(
        completions=list(completions or []), embedding_mode=mode, table=dict(table or {})
    )
    return MockGateway(script=script, dim=dim)


def origin_index(gateway: MockGateway, text: str = "offensive fixture sentence") -> VectorIndex:
    """One-entry index whose vector is the origin; distances are then
    just the query vector's norm, hand-computable."""
    entries = [
        OffensiveEntry(
            id=0,
            text=text,
            label="1",
            vector=None,
        )
    ]
    gateway.script.table.setdefault(text, tuple(0.0 for _ in range(gateway.dim)))
    return build_index(entries, gateway)


@pytest.fixture(scope="session")
def en_template():
    return load_bundled_template("reply_plus.en.v1.txt")


@pytest.fixture(scope="session")
def zh_template():
    return load_bundled_template()


@pytest.fixture(scope="session")
def rules():
    return default_rules()
