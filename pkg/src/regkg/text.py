"""Tokenisation, rule-table lemmatisation and coarse part-of-speech tags.

Everything here is deterministic and dictionary driven; no statistical
model is involved. The word lists live in ``regkg/data`` so they can be
edited without touching code.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Iterable


def _read_data_lines(name: str) -> list[str]:
    text = resources.files("regkg").joinpath("data", name).read_text(encoding="utf-8")
    return read_list(text.splitlines())


def read_list(lines: Iterable[str]) -> list[str]:
    """Strip comments and blank lines from a one-entry-per-line word list."""
    out = []
    for line in lines:
        line = line.strip()
        if line and not line.startswith("#"):
            out.append(line)
    return out


@lru_cache(maxsize=None)
def stopwords() -> frozenset[str]:
    return frozenset(w.lower() for w in _read_data_lines("stopwords.txt"))


@lru_cache(maxsize=None)
def known_verbs() -> frozenset[str]:
    return frozenset(w.lower() for w in _read_data_lines("verbs.txt"))


@lru_cache(maxsize=None)
def default_abbreviations() -> tuple[str, ...]:
    return tuple(_read_data_lines("abbreviations.txt"))


# --------------------------------------------------------------------------
# tokenisation

@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int

    @property
    def lower(self) -> str:
        return self.text.lower()

    @property
    def is_punct(self) -> bool:
        return is_list_marker(self.text) or not any(ch.isalnum() for ch in self.text)


_TOKEN_RE = re.compile(
    r"""
    \(?(?:[a-z]{1,2}|[ivx]{1,4}|\d{1,3})\)(?!\w)   # list markers: (a)  c)  (iv)  2)
    | (?:[A-Za-z]\.){2,}                          # initialisms: U.A.E.  e.g.
    | \w+(?:[-'’&/]\w+)*(?:\.\w+)*            # words, hyphenated words, 1.2.3
    | [^\w\s]                                      # any other single symbol
    """,
    re.VERBOSE,
)
_MARKER_RE = re.compile(r"^\(?(?:[a-z]{1,2}|[ivx]{1,4}|\d{1,3})\)$")


def is_list_marker(text: str) -> bool:
    return bool(_MARKER_RE.match(text))


def tokenize(text: str) -> list[Token]:
    return [Token(m.group(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


# --------------------------------------------------------------------------
# lemmatisation

# Each value must itself be a fixed point of the suffix rules (checked in tests).
IRREGULAR: dict[str, str] = {
    "am": "be", "is": "be", "are": "be", "was": "be", "were": "be", "been": "be", "being": "be",
    "has": "have", "had": "have", "having": "have",
    "does": "do", "did": "do", "done": "do", "doing": "do",
    "made": "make", "making": "make",
    "sold": "sell", "bought": "buy", "held": "hold", "kept": "keep",
    "gave": "give", "given": "give", "giving": "give",
    "took": "take", "taken": "take", "taking": "take",
    "led": "lead", "paid": "pay", "sent": "send", "lent": "lend", "brought": "bring",
    "ran": "run", "began": "begin", "begun": "begin",
    "children": "child", "people": "person", "men": "man", "women": "woman",
    "criteria": "criterion", "analyses": "analysis",
    "created": "create", "creating": "create",
    "used": "use", "using": "use",
    "controlled": "control", "controlling": "control",
    "agreed": "agree", "agreeing": "agree",
    "focused": "focus", "focusing": "focus",
    # words that merely look inflected
    "news": "news", "series": "series", "species": "species", "always": "always",
    "whereas": "whereas", "perhaps": "perhaps", "unless": "unless", "during": "during",
    "thing": "thing", "nothing": "nothing", "something": "something",
    "anything": "anything", "everything": "everything", "bring": "bring",
    "string": "string", "morning": "morning", "evening": "evening", "ceiling": "ceiling",
    "hundred": "hundred", "embed": "embed", "need": "need", "proceed": "proceed",
    "indeed": "indeed", "exceed": "exceed", "succeed": "succeed",
}

_VOWELS = set("aeiouy")

# Stem endings (after stripping -ing/-ed) that take back a silent "e".
_E_RESTORE = re.compile(
    r"""(?x)(
        [^aeiou]at | iz | is | ys | yz | ur | uir | c | v | u | as
      | ag | [rdl]g | [^aeiou]ad | [^aeo]id | ud | [^aeiou]in | [^aeiou]ar
      | rs | ns | ps | ls | [^aeiou]ut | [^aeiou]ot | [bcdfgkptz]l | ib | os
      | [^o]us | [^o]ok
    )$"""
)


def _restore(stem: str) -> str:
    if len(stem) >= 2 and stem[-1] == stem[-2] and stem[-1] not in _VOWELS and stem[-1] not in "lsz":
        return stem[:-1]
    if len(stem) >= 5 and stem.endswith("hang"):
        return stem + "e"
    if len(stem) >= 6 and stem.endswith("rang"):
        return stem + "e"
    if len(stem) >= 5 and stem.endswith("let"):
        return stem + "e"
    if _E_RESTORE.search(stem):
        return stem + "e"
    if (
        len(stem) == 3
        and stem[0] not in _VOWELS
        and stem[1] in "aeiou"
        and stem[2] not in _VOWELS
        and stem[2] not in "wx"
    ):
        return stem + "e"
    return stem


def _has_vowel(s: str) -> bool:
    return any(ch in _VOWELS for ch in s)


def _step(word: str) -> str:
    if word in IRREGULAR:
        return IRREGULAR[word]
    if len(word) <= 3 or not word.isalpha():
        return word
    if word.endswith("ies") and len(word) > 4:
        return word[:-3] + "y"
    if word.endswith("ied") and len(word) > 4:
        return word[:-3] + "y"
    if word.endswith("ing"):
        stem = word[:-3]
        if len(stem) >= 3 and _has_vowel(stem):
            return _restore(stem)
        return word
    if word.endswith("ed") and not word.endswith("eed"):
        stem = word[:-2]
        if len(stem) >= 3 and _has_vowel(stem):
            return _restore(stem)
        return word
    if word.endswith(("sses", "xes", "ches", "shes", "zzes")):
        return word[:-2]
    if word.endswith("s") and not word.endswith(("ss", "us", "is")):
        return word[:-1]
    return word


_ACRONYM_PLURAL = re.compile(r"^[A-Z]{2,}s$")


@lru_cache(maxsize=65536)
def lemmatize(token: str) -> str:
    """Lowercase ``token`` and strip inflection to a fixed point.

    >>> lemmatize("Activities"), lemmatize("Operating"), lemmatize("risk")
    ('activity', 'operate', 'risk')
    """
    word = token[:-1].lower() if _ACRONYM_PLURAL.match(token) else token.lower()
    # every rule strictly shortens the word or lands on a fixed point
    for _ in range(len(word) + 2):
        nxt = _step(word)
        if nxt == word:
            return word
        word = nxt
    return word


# --------------------------------------------------------------------------
# coarse part of speech

NOUN, ADJ, VERB, ADV, AUX, DET, ADP, PRON, CCONJ, SCONJ, PART, NUM, PUNCT = (
    "NOUN", "ADJ", "VERB", "ADV", "AUX", "DET", "ADP", "PRON", "CCONJ", "SCONJ", "PART",
    "NUM", "PUNCT",
)

MODALS = frozenset(
    {"must", "shall", "should", "may", "might", "can", "cannot", "could", "will", "would"}
)
_AUX = MODALS | {"am", "is", "are", "was", "were", "be", "been", "being", "has", "have", "had",
                 "do", "does", "did"}

_CLOSED: dict[str, str] = {}
for _w in ("a an the this that these those such any each every some no all both either neither "
           "its their his her our your my").split():
    _CLOSED[_w] = DET
for _w in ("of in on at by for with from to into onto upon about under over within without "
           "between among through during against across before after per via than").split():
    _CLOSED[_w] = ADP
for _w in "it they them he she him we us you i who whom which what itself themselves".split():
    _CLOSED[_w] = PRON
for _w in "and or nor but".split():
    _CLOSED[_w] = CCONJ
for _w in "if unless whether because although while where when whereas so".split():
    _CLOSED[_w] = SCONJ
for _w in "also only not never always already further otherwise then there here thus however".split():
    _CLOSED[_w] = ADV
for _w in _AUX:
    _CLOSED[_w] = AUX
_CLOSED["to"] = PART
_CLOSED["not"] = PART

_ADJ_WORDS = frozenset(
    "adequate appropriate relevant significant reasonable material sufficient proper prudent "
    "new same other specific certain particular digital legal regulatory financial".split()
)
_ADJ_SUFFIXES = ("ive", "ous", "able", "ible", "ful", "less", "ical", "ial")


def _base_pos(tok: Token) -> str:
    low = tok.lower
    if tok.is_punct:
        return PUNCT
    if low in _CLOSED:
        return _CLOSED[low]
    if low.replace(".", "").isdigit():
        return NUM
    if low in _ADJ_WORDS or (len(low) > 5 and low.endswith(_ADJ_SUFFIXES)):
        return ADJ
    if len(low) > 4 and low.endswith("ly"):
        return ADV
    return NOUN


def pos_tags(tokens: list[Token]) -> list[str]:
    """Assign one coarse tag per token using word lists and local context."""
    tags = [_base_pos(t) for t in tokens]
    verbs = known_verbs()
    for i, tok in enumerate(tokens):
        if tags[i] != NOUN:
            continue
        low = tok.lower
        prev = _prev_significant(tags, i)
        nxt = tags[i + 1] if i + 1 < len(tokens) else None
        lemma = lemmatize(low)
        if _after_modal(tokens, tags, i):
            # "may inspect it": the word after a modal is its verb
            tags[i] = VERB
        elif low.endswith("ed") and len(low) > 4:
            tags[i] = ADJ if nxt in (NOUN, ADJ) and prev not in (AUX, PART, PRON) else VERB
        elif low.endswith("ing") and len(low) > 5 and prev not in (DET, ADJ):
            tags[i] = VERB
        elif lemma in verbs and prev in (AUX, PART, PRON, None) and nxt != NOUN:
            tags[i] = VERB
        elif lemma in verbs and prev in (AUX, PART, PRON):
            tags[i] = VERB
        elif lemma in verbs and prev == NOUN and (low != lemma or nxt in (DET, PUNCT, None)):
            # "the permission allows", "the client agree."
            tags[i] = VERB
    return tags


def _after_modal(tokens: list[Token], tags: list[str], i: int) -> bool:
    j = i - 1
    while j >= 0 and (tags[j] == ADV or tokens[j].lower == "not"):
        j -= 1
    return j >= 0 and tokens[j].lower in MODALS


def _prev_significant(tags: list[str], i: int) -> str | None:
    j = i - 1
    while j >= 0 and tags[j] == ADV:
        j -= 1
    return tags[j] if j >= 0 else None
