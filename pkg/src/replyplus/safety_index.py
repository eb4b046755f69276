"""Offensive-corpus vector index with exact L2 nearest-neighbor queries.

The corpus scale (tens of thousands of sentences) makes an exact linear
scan both fast enough and the only structure whose correctness argument is
trivial, which matters because the toxicity gate's blocking predicate is a
strict distance comparison. Vectors are stored un-normalized as 32-bit
floats; the on-disk format round-trips bit-exactly.
"""

from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .gateway import EmbeddingVector

MAGIC = b"RPVI"
FORMAT_VERSION = 1


class MalformedCorpus(Exception):
    """Corpus file failed to parse as delimited text."""


class MissingColumn(Exception):
    """Configured text or label column is absent from the header."""


class DimensionMismatch(Exception):
    """Vector dimension disagrees with the index dimension."""


class MalformedIndexFile(Exception):
    """Index file has a bad magic, version, or is truncated."""


@dataclass(frozen=True)
class CorpusColumns:
    """Column configuration; defaults match the public COLD release."""

    text_column: str = "TEXT"
    label_column: str = "label"
    offensive_values: tuple[str, ...] = ("1",)
    delimiter: str = ","
    index_all: bool = False


@dataclass
class OffensiveEntry:
    """One corpus sentence; the vector is attached at index build time."""

    id: int
    text: str
    label: str
    vector: EmbeddingVector | None = None


@dataclass(frozen=True)
class NeighborHit:
    entry_id: int
    distance: float


@dataclass
class VectorIndex:
    """Immutable-after-build exact L2 index over offensive entries."""

    dim: int
    entries: list[OffensiveEntry]
    embedding_model: str = ""
    _matrix: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]
    _ids: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self._matrix is None:
            rows = []
            ids = []
            for entry in self.entries:
                if entry.vector is None:
                    raise ValueError(f"entry {entry.id} has no vector")
                if entry.vector.dim != self.dim:
                    raise DimensionMismatch(
                        f"entry {entry.id} has dim {entry.vector.dim}, index dim is {self.dim}"
                    )
                rows.append(np.asarray(entry.vector.values, dtype=np.float32))
                ids.append(entry.id)
            if len({e.id for e in self.entries}) != len(self.entries):
                raise ValueError("entry ids must be unique")
            self._matrix = (
                np.vstack(rows) if rows else np.empty((0, self.dim), dtype=np.float32)
            )
            self._ids = np.asarray(ids, dtype=np.int64)
            # Entries reflect the float32 storage so persistence and queries
            # agree on the exact values.
            for entry, row in zip(self.entries, self._matrix):
                entry.vector = EmbeddingVector(
                    tuple(float(v) for v in row), self.dim, entry.vector.model_name
                )

    def __len__(self) -> int:
        return len(self.entries)


def ingest_corpus(source: str, column_map: CorpusColumns = CorpusColumns()) -> list[OffensiveEntry]:
    """Parse corpus text into entries, keeping offensive-labeled rows.

    Rows are deduplicated by exact text; ids follow file order. With
    ``index_all`` every row is retained regardless of label.

    Raises:
        MalformedCorpus: unparseable file, empty file, or ragged row.
        MissingColumn: configured columns absent from the header.
    """
    try:
        reader = csv.reader(io.StringIO(source), delimiter=column_map.delimiter)
        rows = list(reader)
    except csv.Error as exc:
        raise MalformedCorpus(str(exc)) from exc
    if not rows:
        raise MalformedCorpus("corpus is empty (no header row)")
    header = [h.strip() for h in rows[0]]
    try:
        text_idx = header.index(column_map.text_column)
        label_idx = header.index(column_map.label_column)
    except ValueError as exc:
        raise MissingColumn(
            f"need columns {column_map.text_column!r} and {column_map.label_column!r}, header is {header}"
        ) from exc

    entries: list[OffensiveEntry] = []
    seen: set[str] = set()
    next_id = 0
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) <= max(text_idx, label_idx):
            raise MalformedCorpus(f"row {lineno} has {len(row)} fields, expected {len(header)}")
        text = row[text_idx].strip()
        label = row[label_idx].strip()
        if not text:
            continue
        if not column_map.index_all and label not in column_map.offensive_values:
            continue
        if text in seen:
            continue
        seen.add(text)
        entries.append(OffensiveEntry(id=next_id, text=text, label=label))
        next_id += 1
    return entries


def build_index(entries: list[OffensiveEntry], gateway) -> VectorIndex:
    """Embed entries lacking vectors and assemble the index.

    An empty entry list yields an empty index (the gate treats that as
    pass-with-flag). Pre-set vectors must match the gateway dimension.
    """
    dim = gateway.dim
    embedded: list[OffensiveEntry] = []
    model_name = ""
    for entry in entries:
        vector = entry.vector
        if vector is None:
            vector = gateway.embed(entry.text)
        if vector.dim != dim:
            raise DimensionMismatch(f"entry {entry.id} has dim {vector.dim}, expected {dim}")
        model_name = vector.model_name
        embedded.append(OffensiveEntry(id=entry.id, text=entry.text, label=entry.label, vector=vector))
    return VectorIndex(dim=dim, entries=embedded, embedding_model=model_name)


def nearest(index: VectorIndex, query: EmbeddingVector, k: int = 1) -> list[NeighborHit]:
    """Exact k nearest entries by L2 distance, ties broken by ascending id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if query.dim != index.dim:
        raise DimensionMismatch(f"query dim {query.dim} != index dim {index.dim}")
    if len(index.entries) == 0:
        return []
    q = np.asarray(query.values, dtype=np.float64)
    diffs = index._matrix.astype(np.float64) - q
    distances = np.sqrt(np.einsum("ij,ij->i", diffs, diffs))
    order = np.lexsort((index._ids, distances))[:k]
    return [NeighborHit(entry_id=int(index._ids[i]), distance=float(distances[i])) for i in order]


def _write_str(out: io.BytesIO, text: str) -> None:
    raw = text.encode("utf-8")
    out.write(struct.pack("<I", len(raw)))
    out.write(raw)


def _read_exact(buf: io.BytesIO, n: int) -> bytes:
    data = buf.read(n)
    if len(data) != n:
        raise MalformedIndexFile("unexpected end of file")
    return data


def _read_str(buf: io.BytesIO) -> str:
    (length,) = struct.unpack("<I", _read_exact(buf, 4))
    return _read_exact(buf, length).decode("utf-8")


def save_index(index: VectorIndex, path: str | Path) -> None:
    """Write the index: header, embedding model, then per-entry records."""
    out = io.BytesIO()
    out.write(MAGIC)
    out.write(struct.pack("<III", FORMAT_VERSION, index.dim, len(index.entries)))
    _write_str(out, index.embedding_model)
    for entry, row in zip(index.entries, index._matrix):
        out.write(struct.pack("<q", entry.id))
        _write_str(out, entry.label)
        _write_str(out, entry.text)
        out.write(row.astype("<f4").tobytes())
    Path(path).write_bytes(out.getvalue())


def load_index(path: str | Path) -> VectorIndex:
    """Read an index written by :func:`save_index`, bit-exactly."""
    buf = io.BytesIO(Path(path).read_bytes())
    if _read_exact(buf, 4) != MAGIC:
        raise MalformedIndexFile("bad magic")
    version, dim, count = struct.unpack("<III", _read_exact(buf, 12))
    if version != FORMAT_VERSION:
        raise MalformedIndexFile(f"unsupported format version {version}")
    embedding_model = _read_str(buf)
    entries: list[OffensiveEntry] = []
    for _ in range(count):
        (entry_id,) = struct.unpack("<q", _read_exact(buf, 8))
        label = _read_str(buf)
        text = _read_str(buf)
        values = np.frombuffer(_read_exact(buf, 4 * dim), dtype="<f4")
        vector = EmbeddingVector(tuple(float(v) for v in values), dim, embedding_model)
        entries.append(OffensiveEntry(id=entry_id, text=text, label=label, vector=vector))
    return VectorIndex(dim=dim, entries=entries, embedding_model=embedding_model)
