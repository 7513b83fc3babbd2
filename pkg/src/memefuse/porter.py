"""Porter suffix-stripping, the original 1980 algorithm.

Five steps of longest-suffix-match rules gated by the measure m of the
remaining stem (number of vowel-consonant spans).  Once a step's longest
suffix has matched, that step is decided: a failed condition does not
fall through to shorter suffixes.  Words of length <= 2 pass unchanged.
"""

from __future__ import annotations

import re

_WORD = re.compile(r"[a-z]+\Z")


def _is_consonant(word: str, i: int) -> bool:
    ch = word[i]
    if ch in "aeiou":
        return False
    if ch == "y":
        # y after a consonant acts as a vowel ("syzygy"), else consonant
        return i == 0 or not _is_consonant(word, i - 1)
    return True


def _measure(stem: str) -> int:
    forms = []
    for i in range(len(stem)):
        form = "c" if _is_consonant(stem, i) else "v"
        if not forms or forms[-1] != form:
            forms.append(form)
    return "".join(forms).count("vc")


def _contains_vowel(stem: str) -> bool:
    return any(not _is_consonant(stem, i) for i in range(len(stem)))


def _ends_double_consonant(word: str) -> bool:
    return len(word) >= 2 and word[-1] == word[-2] and _is_consonant(word, len(word) - 1)


def _ends_cvc(word: str) -> bool:
    if len(word) < 3:
        return False
    return (
        _is_consonant(word, len(word) - 3)
        and not _is_consonant(word, len(word) - 2)
        and _is_consonant(word, len(word) - 1)
        and word[-1] not in "wxy"
    )


def _apply(word: str, rules) -> str:
    """First rule whose suffix matches decides the step."""
    for suffix, repl, cond in rules:
        if word.endswith(suffix):
            stem = word[: len(word) - len(suffix)]
            if cond is None or cond(stem):
                return stem + repl
            return word
    return word


def _m_gt(n: int):
    return lambda stem: _measure(stem) > n


_STEP1A = [
    ("sses", "ss", None),
    ("ies", "i", None),
    ("ss", "ss", None),
    ("s", "", None),
]

_STEP2 = sorted(
    [
        (s, r, _m_gt(0))
        for s, r in [
            ("ational", "ate"), ("tional", "tion"), ("enci", "ence"), ("anci", "ance"),
            ("izer", "ize"), ("abli", "able"), ("alli", "al"), ("entli", "ent"),
            ("eli", "e"), ("ousli", "ous"), ("ization", "ize"), ("ation", "ate"),
            ("ator", "ate"), ("alism", "al"), ("iveness", "ive"), ("fulness", "ful"),
            ("ousness", "ous"), ("aliti", "al"), ("iviti", "ive"), ("biliti", "ble"),
        ]
    ],
    key=lambda rule: len(rule[0]),
    reverse=True,
)

_STEP3 = sorted(
    [
        (s, r, _m_gt(0))
        for s, r in [
            ("icate", "ic"), ("ative", ""), ("alize", "al"), ("iciti", "ic"),
            ("ical", "ic"), ("ful", ""), ("ness", ""),
        ]
    ],
    key=lambda rule: len(rule[0]),
    reverse=True,
)

_STEP4 = sorted(
    [(s, "", _m_gt(1)) for s in (
        "ement", "ance", "ence", "able", "ible", "ment", "ant", "ent", "ism",
        "ate", "iti", "ous", "ive", "ize", "al", "er", "ic", "ou",
    )]
    + [("ion", "", lambda stem: _measure(stem) > 1 and stem.endswith(("s", "t")))],
    key=lambda rule: len(rule[0]),
    reverse=True,
)


def _step1b(word: str) -> str:
    if word.endswith("eed"):
        stem = word[:-3]
        return stem + "ee" if _measure(stem) > 0 else word
    for suffix in ("ed", "ing"):
        if word.endswith(suffix):
            stem = word[: len(word) - len(suffix)]
            if not _contains_vowel(stem):
                return word
            if stem.endswith(("at", "bl", "iz")):
                return stem + "e"
            if _ends_double_consonant(stem) and stem[-1] not in "lsz":
                return stem[:-1]
            if _measure(stem) == 1 and _ends_cvc(stem):
                return stem + "e"
            return stem
    return word


def _step1c(word: str) -> str:
    if word.endswith("y") and _contains_vowel(word[:-1]):
        return word[:-1] + "i"
    return word


def _step5a(word: str) -> str:
    if word.endswith("e"):
        stem = word[:-1]
        m = _measure(stem)
        if m > 1 or (m == 1 and not _ends_cvc(stem)):
            return stem
    return word


def _step5b(word: str) -> str:
    if word.endswith("ll") and _measure(word) > 1:
        return word[:-1]
    return word


def porter_stem(word: str) -> str:
    """Stem one lowercase word."""
    if not _WORD.match(word):
        raise ValueError(f"stemmer input must match [a-z]+, got {word!r}")
    if len(word) <= 2:
        return word
    word = _apply(word, _STEP1A)
    word = _step1b(word)
    word = _step1c(word)
    word = _apply(word, _STEP2)
    word = _apply(word, _STEP3)
    word = _apply(word, _STEP4)
    word = _step5a(word)
    word = _step5b(word)
    return word
