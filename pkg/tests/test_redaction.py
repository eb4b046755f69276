"""Masking rules: loading, overlap resolution, and the core invariants."""

from __future__ import annotations

import hashlib
import random

import pytest

from replyplus.redaction import (
    InvalidPattern,
    MalformedRuleFile,
    SelfMatchingReplacement,
    default_rules,
    load_rules,
    redact,
    rule_set_version,
    scan_for_matches,
)

from pii_corpus import generate_corpus


def _rules(text: str):
    return load_rules(text)


def test_load_rules_parses_order_ids_and_fields():
    rules = _rules(
        "# comment\n"
        "PHONE\t[PHONE]\t[0-9]{11}\n"
        "\n"
        "PHONE\t[PHONE]\t0[0-9]{2}-[0-9]{8}\n"
        "EMAIL\t[EMAIL]\t\\S+@\\S+\\.com\n"
    )
    assert [r.id for r in rules] == ["phone-1", "phone-2", "email-1"]
    assert rules[0].category == "PHONE"
    assert rules[0].replacement == "[PHONE]"


@pytest.mark.parametrize(
    "line",
    [
        "PHONE\t[PHONE]",  # two fields
        "PHONE\t[PHONE]\t[0-9]+\textra",  # four fields
        "phone\t[PHONE]\t[0-9]+",  # lowercase category
        "PHONE\t\t[0-9]+",  # empty replacement
        "PHONE\t[PHONE]\t",  # empty pattern
    ],
)
def test_load_rules_rejects_malformed_lines(line):
    with pytest.raises(MalformedRuleFile):
        _rules(line)


def test_load_rules_rejects_bad_regex():
    with pytest.raises(InvalidPattern):
        _rules("PHONE\t[PHONE]\t([0-9]+")


def test_load_rules_rejects_replacement_matched_by_any_rule():
    with pytest.raises(SelfMatchingReplacement):
        _rules("PHONE\tNUMBER\t[0-9]+\nNAME\t007\t[A-Z]+")


def test_redact_no_match_returns_text_unchanged(rules):
    out = redact("平静的一句话 without any private data", rules)
    assert out.masked == "平静的一句话 without any private data"
    assert out.spans == ()


def test_redact_leftmost_match_wins():
    rules = _rules("A\t[A]\tbc\nB\t[B]\tabc")
    out = redact("xxabc", rules)
    # B starts earlier (leftmost) even though A is listed first.
    assert out.masked == "xx[B]"
    assert out.spans[0].category == "B"


def test_redact_longest_match_wins_on_same_start():
    rules = _rules("A\t[A]\tab\nB\t[B]\tabcd")
    out = redact("abcd!", rules)
    assert out.masked == "[B]!"


def test_redact_rule_order_breaks_exact_ties():
    rules = _rules("A\t[A]\tabc\nB\t[B]\tabc")
    out = redact("abc", rules)
    assert out.masked == "[A]"
    assert out.spans[0].category == "A"


def test_redact_continues_after_each_match():
    rules = _rules("D\t[D]\t[0-9]+")
    out = redact("a1b22c333", rules)
    assert out.masked == "a[D]b[D]c[D]"
    assert [(s.start, s.end) for s in out.spans] == [(1, 2), (3, 5), (6, 9)]


def test_span_hash_is_sha256_of_original_fragment():
    rules = _rules("D\t[D]\t[0-9]+")
    out = redact("call 12345 now", rules)
    assert out.spans[0].original_hash == hashlib.sha256(b"12345").hexdigest()


def test_rule_set_version_tracks_content():
    a = _rules("D\t[D]\t[0-9]+")
    b = _rules("D\t[D]\t[0-9]+")
    c = _rules("D\t[D]\t[0-9]{2,}")
    assert rule_set_version(a) == rule_set_version(b)
    assert rule_set_version(a) != rule_set_version(c)
    assert redact("x", a).rule_set_version == rule_set_version(a)


@pytest.mark.parametrize(
    "text,category",
    [
        ("打我电话13912345678就行", "PHONE"),
        ("+8613912345678", "PHONE"),
        ("座机是010-88776655", "PHONE"),
        ("写信到 someone.else+tag@mail-example.co.uk 吧", "EMAIL"),
        ("我同事小王总是帮我", "NAME"),
        ("张医生让我多休息", "NAME"),
        ("I spoke to Dr. Smith yesterday", "NAME"),
        ("我生日是1996-07-23", "BIRTHDATE"),
        ("生于1996/7/3", "BIRTHDATE"),
        ("1996年7月23日出生", "BIRTHDATE"),
        ("住在北京市朝阳区幸福路12号", "ADDRESS"),
        ("家在幸福路12号3室", "ADDRESS"),
        ("my place is 221 Baker Street", "ADDRESS"),
    ],
)
def test_default_rules_cover_the_shipped_categories(rules, text, category):
    out = redact(text, rules)
    assert any(s.category == category for s in out.spans), out.masked


def test_default_rules_leave_plain_numbers_alone(rules):
    # Short counts and years alone are not phone numbers or dates.
    out = redact("我失眠了3天，考了90分，2024年很难熬", rules)
    assert out.masked == "我失眠了3天，考了90分，2024年很难熬"


def _replacement_by_category(rules):
    mapping = {}
    for rule in rules:
        mapping.setdefault(rule.category, rule.replacement)
        assert mapping[rule.category] == rule.replacement
    return mapping


def test_corpus_invariants_idempotence_completeness_fidelity(rules):
    rng = random.Random(20240817)
    replacement = _replacement_by_category(rules)
    samples = generate_corpus(rules, rng, 60)
    for text, categories, _snippets in samples:
        out = redact(text, rules)
        # Completeness: nothing left for any rule to match.
        assert scan_for_matches(out.masked, rules) == []
        # Idempotence: a second pass changes nothing.
        again = redact(out.masked, rules)
        assert again.masked == out.masked
        assert again.spans == ()
        # Span fidelity: splicing replacements into the original at the
        # recorded spans reproduces the masked text.
        rebuilt = []
        cursor = 0
        for span in out.spans:
            rebuilt.append(text[cursor : span.start])
            rebuilt.append(replacement[span.category])
            cursor = span.end
        rebuilt.append(text[cursor:])
        assert "".join(rebuilt) == out.masked
        # Every injected category produced at least one span.
        assert categories <= {s.category for s in out.spans}


def test_default_rules_load_and_cover_five_categories():
    rules = default_rules()
    assert {r.category for r in rules} == {"PHONE", "EMAIL", "NAME", "BIRTHDATE", "ADDRESS"}
