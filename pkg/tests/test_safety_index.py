"""Corpus ingestion, exact nearest-neighbor search, binary persistence."""

import math
import random

import numpy as np
import pytest

from replyplus.gateway import EmbeddingVector, MockGateway, hash_embedding
from replyplus.safety_index import (
    CorpusColumns,
    DimensionMismatch,
    MalformedCorpus,
    MalformedIndexFile,
    MissingColumn,
    OffensiveEntry,
    VectorIndex,
    build_index,
    ingest_corpus,
    load_index,
    nearest,
    save_index,
)

from conftest import make_gateway


def vec(*values, model="m"):
    return EmbeddingVector(tuple(float(v) for v in values), len(values), model)


def entry(entry_id, values, text=None, label="1"):
    return OffensiveEntry(
        id=entry_id,
        text=text if text is not None else f"entry {entry_id}",
        label=label,
        vector=vec(*values),
    )


# --- ingestion ---

BASIC_CORPUS = """TEXT,label
你这个废物,1
今天天气不错,0
你这个废物,1
滚出去,1
,1
没有冒犯内容,0
"""


def test_ingest_keeps_offensive_rows_dedups_and_numbers_in_file_order():
    entries = ingest_corpus(BASIC_CORPUS)
    assert [(e.id, e.text, e.label) for e in entries] == [
        (0, "你这个废物", "1"),
        (1, "滚出去", "1"),
    ]


def test_ingest_index_all_keeps_every_labeled_row():
    entries = ingest_corpus(BASIC_CORPUS, CorpusColumns(index_all=True))
    assert [e.text for e in entries] == ["你这个废物", "今天天气不错", "滚出去", "没有冒犯内容"]
    assert [e.id for e in entries] == [0, 1, 2, 3]


def test_ingest_custom_columns_delimiter_and_offensive_values():
    source = "sentence\ttoxicity\nfoo\thigh\nbar\tnone\nbaz\tmedium\n"
    columns = CorpusColumns(
        text_column="sentence",
        label_column="toxicity",
        offensive_values=("high", "medium"),
        delimiter="\t",
    )
    entries = ingest_corpus(source, columns)
    assert [(e.text, e.label) for e in entries] == [("foo", "high"), ("baz", "medium")]


def test_ingest_missing_column_rejected():
    with pytest.raises(MissingColumn):
        ingest_corpus("TEXT,grade\nx,1\n")
    with pytest.raises(MissingColumn):
        ingest_corpus("content,label\nx,1\n")


def test_ingest_empty_file_rejected():
    with pytest.raises(MalformedCorpus):
        ingest_corpus("")


def test_ingest_header_only_yields_no_entries():
    assert ingest_corpus("TEXT,label\n") == []


def test_ingest_ragged_row_rejected():
    with pytest.raises(MalformedCorpus, match="row 3"):
        ingest_corpus("TEXT,label\nfine,1\nshort\n")


def test_ingest_quoted_fields_with_embedded_delimiters():
    source = 'TEXT,label\n"you, specifically, are awful",1\n'
    entries = ingest_corpus(source)
    assert entries[0].text == "you, specifically, are awful"


# --- index construction ---


def test_build_index_embeds_entries_without_vectors():
    gw = make_gateway(dim=6)
    entries = [OffensiveEntry(id=0, text="hostile sentence", label="1")]
    index = build_index(entries, gw)
    assert len(index) == 1
    assert index.dim == 6
    assert index.embedding_model == "mock-embed"
    expected = tuple(float(np.float32(v)) for v in hash_embedding("hostile sentence", 6))
    assert index.entries[0].vector.values == expected


def test_build_index_keeps_preset_vectors():
    gw = make_gateway(dim=3)
    index = build_index([entry(0, (1.0, 2.0, 3.0))], gw)
    assert index.entries[0].vector.values == (1.0, 2.0, 3.0)


def test_build_index_rejects_dimension_mismatch():
    gw = make_gateway(dim=3)
    with pytest.raises(DimensionMismatch):
        build_index([entry(0, (1.0, 2.0))], gw)


def test_build_index_empty_is_allowed():
    index = build_index([], make_gateway(dim=4))
    assert len(index) == 0
    assert nearest(index, vec(0, 0, 0, 0)) == []


def test_index_rejects_duplicate_ids():
    with pytest.raises(ValueError, match="unique"):
        VectorIndex(dim=2, entries=[entry(5, (0, 0)), entry(5, (1, 1))])


def test_index_rejects_missing_vector():
    with pytest.raises(ValueError, match="no vector"):
        VectorIndex(dim=2, entries=[OffensiveEntry(id=0, text="t", label="1")])


# --- queries ---


def test_nearest_distance_is_exact_for_hand_picked_values():
    index = VectorIndex(dim=4, entries=[entry(0, (0, 0, 0, 0))])
    hits = nearest(index, vec(3.0, 4.0, 0.0, 0.0))
    assert hits == [type(hits[0])(entry_id=0, distance=5.0)]
    assert hits[0].distance == 5.0


def test_nearest_of_stored_vector_is_zero():
    index = VectorIndex(dim=3, entries=[entry(0, (0.5, -1.25, 2.0))])
    hits = nearest(index, vec(0.5, -1.25, 2.0))
    assert hits[0].distance == 0.0


def test_nearest_orders_by_distance_then_id():
    index = VectorIndex(
        dim=2,
        entries=[entry(7, (1.0, 0.0)), entry(3, (1.0, 0.0)), entry(1, (5.0, 0.0))],
    )
    hits = nearest(index, vec(0.0, 0.0), k=3)
    assert [h.entry_id for h in hits] == [3, 7, 1]
    assert hits[0].distance == hits[1].distance == 1.0
    assert hits[2].distance == 5.0


def test_nearest_k_larger_than_index_returns_all():
    index = VectorIndex(dim=2, entries=[entry(0, (0, 0)), entry(1, (1, 0))])
    assert len(nearest(index, vec(0, 0), k=10)) == 2


def test_nearest_validates_k_and_dimension():
    index = VectorIndex(dim=2, entries=[entry(0, (0, 0))])
    with pytest.raises(ValueError):
        nearest(index, vec(0, 0), k=0)
    with pytest.raises(DimensionMismatch):
        nearest(index, vec(0, 0, 0))


def test_nearest_agrees_with_pure_python_brute_force():
    rng = random.Random(20260814)
    dim = 8
    entries = [
        entry(i, tuple(rng.uniform(-2, 2) for _ in range(dim))) for i in range(50)
    ]
    index = VectorIndex(dim=dim, entries=entries)

    for _ in range(20):
        query = tuple(rng.uniform(-2, 2) for _ in range(dim))
        k = rng.randrange(1, 6)
        hits = nearest(index, vec(*query), k=k)

        # storage is float32; entries were rewrapped to those exact values
        def dist(e):
            return math.sqrt(sum((a - b) ** 2 for a, b in zip(e.vector.values, query)))

        expected = sorted(((dist(e), e.id) for e in index.entries))[:k]
        assert [h.entry_id for h in hits] == [i for _, i in expected]
        for hit, (d, _) in zip(hits, expected):
            assert hit.distance == pytest.approx(d, rel=1e-12, abs=1e-12)


# --- persistence ---


def test_save_load_round_trip_is_bit_exact(tmp_path):
    gw = make_gateway(dim=8)
    entries = [
        OffensiveEntry(id=i * 3, text=f"冒犯句子 {i} with ascii", label=str(i % 2))
        for i in range(100)
    ]
    index = build_index(entries, gw)
    path = tmp_path / "corpus.rpvi"
    save_index(index, path)
    loaded = load_index(path)

    assert loaded.dim == index.dim
    assert loaded.embedding_model == index.embedding_model
    assert len(loaded) == len(index)
    for original, restored in zip(index.entries, loaded.entries):
        assert restored.id == original.id
        assert restored.text == original.text
        assert restored.label == original.label
        assert restored.vector.values == original.vector.values

    query = vec(*[0.5] * 8)
    assert nearest(loaded, query, k=5) == nearest(index, query, k=5)


def test_save_load_empty_index(tmp_path):
    index = VectorIndex(dim=4, entries=[], embedding_model="mock-embed")
    path = tmp_path / "empty.rpvi"
    save_index(index, path)
    loaded = load_index(path)
    assert len(loaded) == 0
    assert loaded.dim == 4
    assert loaded.embedding_model == "mock-embed"


def test_load_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.rpvi"
    path.write_bytes(b"NOPE" + b"\x00" * 20)
    with pytest.raises(MalformedIndexFile, match="magic"):
        load_index(path)


def test_load_rejects_unknown_version(tmp_path):
    index = VectorIndex(dim=2, entries=[entry(0, (0, 0))])
    path = tmp_path / "v.rpvi"
    save_index(index, path)
    data = bytearray(path.read_bytes())
    data[4] = 99  # format version byte (little-endian u32)
    path.write_bytes(bytes(data))
    with pytest.raises(MalformedIndexFile, match="version"):
        load_index(path)


def test_load_rejects_truncated_file(tmp_path):
    index = VectorIndex(dim=4, entries=[entry(0, (1, 2, 3, 4))])
    path = tmp_path / "t.rpvi"
    save_index(index, path)
    data = path.read_bytes()
    path.write_bytes(data[: len(data) - 5])
    with pytest.raises(MalformedIndexFile, match="end of file"):
        load_index(path)
