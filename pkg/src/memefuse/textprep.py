"""Deterministic cleaning pipeline for meme inscriptions.

Fixed stage order: lowercase -> emoji-to-words -> strip handles and
hashtag marks -> tokenize on non-letters -> stem -> vocabulary filter.
Lowercasing first means the emoji lexicon and vocabulary only ever need
lowercase forms.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

from .porter import porter_stem

# Pictographic codepoint ranges; anything here without a lexicon entry
# is deleted like other non-letter content.
_EMOJI_RANGES = (
    (0x1F000, 0x1FAFF),
    (0x2600, 0x27BF),
    (0x2B00, 0x2BFF),
    (0x2300, 0x23FF),
    (0x25A0, 0x25FF),
    (0xFE00, 0xFE0F),
    (0x200D, 0x200D),
    (0x1F1E6, 0x1F1FF),
)

_TOKEN = re.compile(r"[a-zA-Z]+")
_LEXICON_VALUE = re.compile(r"[a-z ]+\Z")


def _is_emoji_char(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in _EMOJI_RANGES)


@dataclass
class PreprocessConfig:
    emoji_lexicon: dict[str, str]
    vocabulary: set[str]
    stemmer: str = "porter"
    lowercase: bool = True
    demojize: bool = True
    strip_marks: bool = True
    stem: bool = True
    vocab_filter: bool = True

    def __post_init__(self):
        if self.stemmer not in ("porter", "none"):
            raise ValueError(f"unknown stemmer {self.stemmer!r}")
        for key, value in self.emoji_lexicon.items():
            if not _LEXICON_VALUE.match(value):
                raise ValueError(f"lexicon value for {key!r} must be lowercase words, got {value!r}")
        if self.vocab_filter and not self.vocabulary:
            raise ValueError("vocabulary must be non-empty when the filter stage is enabled")

    @cached_property
    def _filter_set(self) -> frozenset[str]:
        # Porter output is often not a dictionary word ("funni"), so the
        # filter accepts the vocabulary and its stemmed image.
        stemmed = {porter_stem(w) for w in self.vocabulary if _TOKEN.fullmatch(w)}
        return frozenset(self.vocabulary | stemmed)

    @cached_property
    def _lexicon_by_head(self) -> dict[str, list[str]]:
        return _index_keys(self.emoji_lexicon)


@dataclass
class CleanText:
    tokens: list[str]
    original: str


def _index_keys(lexicon: dict[str, str]) -> dict[str, list[str]]:
    """Lexicon keys grouped by first char, longest first (greedy match)."""
    by_head: dict[str, list[str]] = {}
    for key in lexicon:
        by_head.setdefault(key[0], []).append(key)
    for keys in by_head.values():
        keys.sort(key=len, reverse=True)
    return by_head


def _demojize_indexed(text: str, lexicon: dict[str, str], by_head: dict[str, list[str]]) -> str:
    parts: list[str] = []
    changed = False
    i = 0
    while i < len(text):
        matched = None
        for key in by_head.get(text[i], ()):
            if text.startswith(key, i):
                matched = key
                break
        if matched is not None:
            parts.append(f" {lexicon[matched]} ")
            i += len(matched)
            changed = True
        elif _is_emoji_char(text[i]):
            i += 1
            changed = True
        else:
            parts.append(text[i])
            i += 1
    if not changed:
        return text
    return " ".join("".join(parts).split())


def demojize(text: str, lexicon: dict[str, str]) -> str:
    """Replace known emoji with their name words; delete unknown emoji.

    Replacement names are set off by single spaces.  Whitespace is left
    untouched when the input contains no emoji at all.
    """
    return _demojize_indexed(text, lexicon, _index_keys(lexicon))


def strip_handles_and_hashtags(text: str) -> str:
    """Drop @-handles entirely; strip the leading '#' off hashtags.

    Only a token-initial '#' is stripped, so inner marks survive.
    Returns the input unchanged when no token carries either mark.
    """
    tokens = text.split()
    if not any(t.startswith(("@", "#")) for t in tokens):
        return text
    kept = []
    for token in tokens:
        if token.startswith("@"):
            continue
        if token.startswith("#"):
            token = token[1:]
            if not token:
                continue
        kept.append(token)
    return " ".join(kept)


def stem(token: str, stemmer: str) -> str:
    if stemmer == "none":
        return token
    if stemmer == "porter":
        return porter_stem(token)
    raise ValueError(f"unknown stemmer {stemmer!r}")


def preprocess(raw: str, config: PreprocessConfig) -> CleanText:
    """Run the full pipeline on one raw inscription."""
    text = raw
    if config.lowercase:
        text = text.lower()
    if config.demojize:
        text = _demojize_indexed(text, config.emoji_lexicon, config._lexicon_by_head)
    if config.strip_marks:
        text = strip_handles_and_hashtags(text)
    tokens = _TOKEN.findall(text)
    if config.stem:
        tokens = [stem(t, config.stemmer) for t in tokens]
    if config.vocab_filter:
        tokens = [t for t in tokens if t in config._filter_set]
    return CleanText(tokens=tokens, original=raw)


def load_lexicon(path: str | Path) -> dict[str, str]:
    """Read the two-column (emoji TAB name words) lexicon file."""
    lexicon: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            try:
                key, value = line.split("\t", 1)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: expected two tab-separated columns") from exc
            lexicon[key] = value
    return lexicon


def load_vocabulary(path: str | Path) -> set[str]:
    """Read the one-word-per-line vocabulary file."""
    with open(path, encoding="utf-8") as fh:
        return {line.strip() for line in fh if line.strip()}
