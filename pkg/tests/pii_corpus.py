"""Synthetic PII corpus generator for masking tests.

Produces messages mixing Chinese/English filler with injected personal
information covering all five shipped categories. The filler is chosen so
it cannot itself trigger the default rules, which the generator asserts.
"""

from __future__ import annotations

import random

from replyplus.redaction import RedactionRule, scan_for_matches

SURNAMES = "王李张刘陈杨黄赵周吴徐孙马朱胡郭何林高罗"

# No digits, no 小/老, no honorifics, no administrative-unit or street
# characters: the filler must be inert under the default rule set.
FILLERS_ZH = (
    "我最近心情很压抑总觉得撑不下去了",
    "每天晚上都睡不着白天也提不起精神",
    "感觉自己做什么都不对好像被全世界抛弃了",
    "谢谢你愿意听我说这些我真的很需要有人理解",
    "我不敢告诉家里人他们只会觉得我矫情",
)
FILLERS_EN = (
    "i feel like nothing i do matters anymore",
    "lately the nights are the hardest part",
    "please do not tell anyone about this",
)


def _phone(rng: random.Random) -> str:
    mobile = "1" + rng.choice("3456789") + "".join(rng.choice("0123456789") for _ in range(9))
    forms = [
        mobile,
        "+86" + mobile,
        "86-" + mobile,
        "0" + rng.choice(["10", "21", "571", "755"]) + "-" + "".join(rng.choice("0123456789") for _ in range(8)),
    ]
    return rng.choice(forms)


def _email(rng: random.Random) -> str:
    local = "".join(rng.choice("abcdefghijklmnopqrstuvwxyz0123456789._") for _ in range(rng.randint(3, 10))).strip("._") or "user"
    domain = rng.choice(["example.com", "mail.test.org", "qq.com", "web-mail.net"])
    return f"{local}@{domain}"


def _name(rng: random.Random) -> str:
    surname = rng.choice(SURNAMES)
    forms = [
        rng.choice("小老") + surname,
        surname + rng.choice(["先生", "女士", "老师", "医生"]),
        rng.choice(["Mr", "Mrs", "Ms", "Dr"]) + ". " + rng.choice(["Smith", "Jones", "Brown", "Lee"]),
    ]
    return rng.choice(forms)


def _birthdate(rng: random.Random) -> str:
    year = rng.randint(1950, 2020)
    month = rng.randint(1, 12)
    day = rng.randint(1, 28)
    forms = [
        f"{year}-{month:02d}-{day:02d}",
        f"{year}/{month}/{day}",
        f"{year}年{month}月{day}日",
    ]
    return rng.choice(forms)


def _address(rng: random.Random) -> str:
    city = rng.choice(["北京市", "上海市", "杭州市", "成都市"])
    district = rng.choice(["朝阳区", "浦东新区", "西湖区", "武侯区"])
    street = rng.choice(["幸福路", "建设街", "人民大道", "梧桐巷"])
    forms = [
        f"{city}{district}{street}{rng.randint(1, 999)}号",
        f"{city}{district}",
        f"{street}{rng.randint(1, 99)}号{rng.randint(1, 50)}室",
        f"{rng.randint(1, 9999)} {rng.choice(['Baker', 'Garden', 'Hill'])} {rng.choice(['Street', 'Road', 'Avenue'])}",
    ]
    return rng.choice(forms)


MAKERS = {
    "PHONE": _phone,
    "EMAIL": _email,
    "NAME": _name,
    "BIRTHDATE": _birthdate,
    "ADDRESS": _address,
}


def generate_corpus(
    rules: list[RedactionRule], rng: random.Random, size: int
) -> list[tuple[str, set[str], list[str]]]:
    """Return (text, injected categories, injected snippets) samples.

    Every sample carries at least one PII snippet; across the whole corpus
    all five categories appear.
    """
    for filler in FILLERS_ZH + FILLERS_EN:
        assert scan_for_matches(filler, rules) == [], f"filler {filler!r} trips a rule"

    categories = list(MAKERS)
    samples: list[tuple[str, set[str], list[str]]] = []
    for i in range(size):
        # Round-robin guarantees coverage; extras are random.
        chosen = [categories[i % len(categories)]]
        chosen += rng.sample(categories, rng.randint(0, 2))
        snippets = [MAKERS[c](rng) for c in chosen]
        parts: list[str] = []
        for snippet in snippets:
            parts.append(rng.choice(FILLERS_ZH + FILLERS_EN))
            parts.append(snippet)
        parts.append(rng.choice(FILLERS_ZH))
        text = "，".join(parts)
        samples.append((text, set(chosen), snippets))
    return samples
