"""Rule-based coreference enrichment.

Pronouns and short definite references are replaced by the most recent
agreeing noun phrase, looking first backwards through the paragraph and
then through a window of preceding paragraphs of the same document.
Antecedents are always taken from original (not enriched) text, so every
paragraph can be resolved independently.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import Paragraph
from .errors import FormatError, IntegrityError
from .taxonomy import TagType
from .text import ADJ, CCONJ, NOUN, NUM, lemmatize, pos_tags, tokenize

DEFAULT_WINDOW = 3

PLURAL_ANAPHORS = frozenset({"they", "them", "these", "those"})
_ARTICLES = frozenset({"a", "an", "the"})
_TERMINATORS = frozenset(".;?!")
_NP_DETERMINERS = frozenset({"a", "an", "the", "this", "that", "these", "those", "such", "any", "each"})


@dataclass(frozen=True)
class CorefRule:
    anaphor: str
    antecedent_filter: frozenset[TagType] = frozenset()
    search_window: int = DEFAULT_WINDOW

    def __post_init__(self) -> None:
        if self.search_window < 0:
            raise FormatError(f"coref rule {self.anaphor!r}: search window must be >= 0")
        object.__setattr__(self, "anaphor", " ".join(self.anaphor.lower().split()))
        if not self.anaphor:
            raise FormatError("coref rule with empty anaphor")

    @property
    def plural(self) -> bool:
        return self.anaphor in PLURAL_ANAPHORS


def parse_rules(lines: Iterable[str]) -> list[CorefRule]:
    """Parse ``anaphor => filter, window`` lines; filter is ``np`` or ``ENT|PROD``."""
    rules = []
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        anaphor, sep, rest = line.partition("=>")
        if not sep:
            raise FormatError("coref rule needs 'anaphor => filter, window'", lineno)
        filt, _, window = rest.partition(",")
        types: set[TagType] = set()
        for code in filt.strip().split("|"):
            code = code.strip()
            if code and code.lower() != "np":
                types.add(TagType.parse(code))
        try:
            win = int(window) if window.strip() else DEFAULT_WINDOW
        except ValueError:
            raise FormatError(f"bad search window {window.strip()!r}", lineno) from None
        rules.append(CorefRule(anaphor.strip(), frozenset(types), win))
    return rules


def load_rules(path: str | Path | None = None) -> list[CorefRule]:
    if path is None:
        text = resources.files("regkg").joinpath("data", "coref_rules.txt").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return parse_rules(text.splitlines())


Replacement = tuple[int, int, str, str]


@dataclass(frozen=True)
class Enrichment:
    para_id: str
    replacements: tuple[Replacement, ...] = ()

    def to_dict(self) -> dict:
        return {"para_id": self.para_id, "replacements": [list(r) for r in self.replacements]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Enrichment":
        return cls(d["para_id"], tuple((int(a), int(b), c, e) for a, b, c, e in d["replacements"]))


# --------------------------------------------------------------------------
# splicing and offset mapping

def _check(replacements: Sequence[Replacement], text: str) -> None:
    prev_end = 0
    for start, end, original, _ in replacements:
        if not (0 <= start < end <= len(text)):
            raise IntegrityError(f"replacement ({start}, {end}) out of bounds for text of length {len(text)}")
        if start < prev_end:
            raise IntegrityError(f"replacement at {start} overlaps or precedes the previous one")
        if text[start:end] != original:
            raise IntegrityError(
                f"replacement ({start}, {end}) expects {original!r}, found {text[start:end]!r}"
            )
        prev_end = end


def apply(enrichment: Enrichment, text: str) -> str:
    _check(enrichment.replacements, text)
    parts = []
    pos = 0
    for start, end, _, substituted in enrichment.replacements:
        parts.append(text[pos:start])
        parts.append(substituted)
        pos = end
    parts.append(text[pos:])
    return "".join(parts)


def enriched_regions(enrichment: Enrichment) -> list[tuple[int, int]]:
    """Where each substitution landed in the enriched text."""
    out = []
    shift = 0
    for start, end, original, substituted in enrichment.replacements:
        out.append((start + shift, start + shift + len(substituted)))
        shift += len(substituted) - (end - start)
    return out


def to_original(enrichment: Enrichment, start: int, end: int) -> tuple[int, int] | None:
    """Map an enriched-text span back to original offsets.

    Returns None when the span touches a substituted region, since those
    characters have no counterpart in the original text.
    """
    shift = 0
    for (ostart, oend, original, substituted), (es, ee) in zip(
        enrichment.replacements, enriched_regions(enrichment)
    ):
        if end <= es:
            break
        if start < ee:
            return None
        shift = ee - oend
    return start - shift, end - shift


def to_enriched(enrichment: Enrichment, start: int, end: int) -> tuple[int, int] | None:
    shift = 0
    for ostart, oend, original, substituted in enrichment.replacements:
        if end <= ostart:
            break
        if start < oend:
            return None
        shift += len(substituted) - (oend - ostart)
    return start + shift, end + shift


# --------------------------------------------------------------------------
# antecedent detection

@dataclass(frozen=True)
class _Phrase:
    start: int
    end: int
    text: str
    plural: bool
    types: frozenset[TagType] = field(default=frozenset())


def _noun_phrases(text: str, vocabulary: Mapping[str, frozenset[TagType]]) -> list[_Phrase]:
    toks = tokenize(text)
    tags = pos_tags(toks)
    simple: list[tuple[int, int]] = []  # token index ranges [i, j)
    i, n = 0, len(toks)
    while i < n:
        j = i
        if toks[j].lower in _NP_DETERMINERS:
            j += 1
        k = j
        while k < n and tags[k] in (NOUN, ADJ, NUM) and not toks[k].is_punct:
            k += 1
        # a phrase must end in a nominal
        while k > j and tags[k - 1] != NOUN:
            k -= 1
        if k > j:
            simple.append((i, k))
            i = k
        else:
            i += 1

    phrases = []
    for a, b in simple:
        phrases.append(_make_phrase(text, toks, a, b, plural=_is_plural(toks[b - 1].text), vocab=vocabulary))
    # "X and Y" coordinations are plural antecedents in their own right
    for (a1, b1), (a2, b2) in zip(simple, simple[1:]):
        if b1 + 1 == a2 and tags[b1] == CCONJ and toks[b1].lower == "and":
            phrases.append(_make_phrase(text, toks, a1, b2, plural=True, vocab=vocabulary))
    return phrases


def _is_plural(word: str) -> bool:
    low = word.lower()
    return low.endswith("s") and lemmatize(low) != low


def _make_phrase(text, toks, a, b, plural, vocab) -> _Phrase:
    s, e = toks[a].start, toks[b - 1].end
    content = " " + " ".join(lemmatize(t.text) for t in toks[a:b] if t.lower not in _ARTICLES) + " "
    types: frozenset[TagType] = frozenset()
    for phrase, ttypes in vocab.items():
        if f" {phrase} " in content:
            types |= ttypes
    return _Phrase(s, e, text[s:e], plural, types)


def _anaphor_hits(text: str, anaphor: str) -> list[tuple[int, int]]:
    words = anaphor.split()
    pattern = r"(?<![\w-])" + r"\s+".join(re.escape(w) for w in words) + r"(?![\w-])"
    return [(m.start(), m.end()) for m in re.finditer(pattern, text, re.IGNORECASE)]


def _rank(phrase: _Phrase, rule: CorefRule) -> tuple:
    return (phrase.end, bool(phrase.types & rule.antecedent_filter), phrase.end - phrase.start)


_PRONOUNS = frozenset({"it", "they", "them", "these", "those", "its", "their"})


def _pick(phrases: Iterable[_Phrase], rule: CorefRule) -> _Phrase | None:
    agreeing = [p for p in phrases if p.plural == rule.plural]
    if rule.antecedent_filter and rule.anaphor not in _PRONOUNS:
        # a typed reference such as "such person" needs an antecedent of that type
        agreeing = [p for p in agreeing if p.types & rule.antecedent_filter]
    return max(agreeing, key=lambda p: _rank(p, rule), default=None)


def _surface_for(antecedent: str, anaphor_surface: str) -> str:
    first, _, rest = antecedent.partition(" ")
    if anaphor_surface[:1].isupper():
        return antecedent[:1].upper() + antecedent[1:]
    if first.lower() in _NP_DETERMINERS and rest:
        return first.lower() + " " + rest
    return antecedent


def resolve(
    paragraph: Paragraph,
    context: Sequence[Paragraph],
    rules: Sequence[CorefRule],
    vocabulary: Mapping[str, frozenset[TagType]] | None = None,
) -> Enrichment:
    """Compute replacements for every anaphor occurrence in ``paragraph``.

    ``context`` holds the preceding paragraphs of the same document in
    document order; only the last ``rule.search_window`` of them are used.
    ``vocabulary`` maps lemma phrases to the concepts they belong to and
    decides ties between equally recent antecedents.
    """
    vocab = vocabulary or {}
    text = paragraph.text
    context = [p for p in context if p.doc_id == paragraph.doc_id and p.ordinal < paragraph.ordinal]
    own = _noun_phrases(text, vocab)
    ctx_phrases: dict[str, list[_Phrase]] = {}

    hits: list[tuple[int, int, CorefRule]] = []
    # longer anaphors first so "such person" beats a shorter rule on the same words
    for rule in sorted(rules, key=lambda r: (-len(r.anaphor), r.anaphor)):
        for s, e in _anaphor_hits(text, rule.anaphor):
            if all(e <= hs or s >= he for hs, he, _ in hits):
                hits.append((s, e, rule))
    hits.sort(key=lambda h: h[0])

    replacements: list[Replacement] = []
    for s, e, rule in hits:
        # antecedents inside the paragraph must precede the anaphor
        local = [p for p in own if p.end <= s and not (p.start <= s < p.end)]
        choice = _pick(local, rule)
        if choice is None:
            window = context[-rule.search_window:] if rule.search_window else []
            for prev in reversed(window):
                if prev.para_id not in ctx_phrases:
                    ctx_phrases[prev.para_id] = _noun_phrases(prev.text, vocab)
                choice = _pick(ctx_phrases[prev.para_id], rule)
                if choice is not None:
                    break
        if choice is None:
            continue
        original = text[s:e]
        substituted = _surface_for(choice.text, original)
        if substituted.lower() == original.lower() or _TERMINATORS & set(substituted):
            # never let a substitution add a sentence boundary
            continue
        replacements.append((s, e, original, substituted))
    return Enrichment(paragraph.para_id, tuple(replacements))


def build_vocabulary(
    lexicons: Mapping[TagType, Sequence[str]], glossary_terms: Sequence[str] = ()
) -> dict[str, frozenset[TagType]]:
    """Lemma phrase -> concept set, from lexicons and glossary terms."""
    vocab: dict[str, set[TagType]] = {}
    for ttype, phrases in lexicons.items():
        for phrase in phrases:
            key = " ".join(lemmatize(t.text) for t in tokenize(phrase) if not t.is_punct)
            if key:
                vocab.setdefault(key, set()).add(ttype)
    for term in glossary_terms:
        key = " ".join(lemmatize(t.text) for t in tokenize(term) if not t.is_punct)
        if key:
            vocab.setdefault(key, set()).add(TagType.DEF)
    return {k: frozenset(v) for k, v in vocab.items()}
