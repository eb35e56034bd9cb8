"""Span taggers for the taxonomy concepts.

Any object with a ``tag_paragraph(paragraph) -> list[SpanTag]`` method can
be used by the pipeline. :class:`ReferenceTagger` is the shipped one: a
lemma-mask glossary matcher for DEF and lexicon plus pattern rules for the
other eight concepts, run group by group.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources as importlib_resources
from pathlib import Path
from typing import Iterable, Protocol, Sequence

from .corpus import Paragraph, sentence_of, sentence_split
from .errors import ConfigError, DomainError, FormatError
from .taxonomy import ALL_TAG_TYPES, DEFAULT_GROUPS, TaggerGroup, TagType, validate_groups
from .text import ADJ, NOUN, NUM, Token, lemmatize, pos_tags, read_list, stopwords, tokenize


@dataclass(frozen=True)
class SpanTag:
    para_id: str
    start: int
    end: int
    ttype: TagType
    surface: str
    tagger_id: str = ""

    def key(self) -> tuple[str, int, int, str]:
        return (self.para_id, self.start, self.end, self.ttype.value)

    def to_dict(self) -> dict:
        return {
            "para_id": self.para_id,
            "start": self.start,
            "end": self.end,
            "ttype": self.ttype.value,
            "surface": self.surface,
            "tagger_id": self.tagger_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SpanTag":
        return cls(d["para_id"], int(d["start"]), int(d["end"]), TagType.parse(d["ttype"]),
                   d["surface"], d.get("tagger_id", ""))


@dataclass(frozen=True)
class GlossaryEntry:
    term: str
    lemma_mask: tuple[tuple[str, str], ...]

    def __post_init__(self) -> None:
        if not self.lemma_mask:
            raise FormatError(f"glossary entry {self.term!r} has an empty lemma mask")
        object.__setattr__(
            self, "lemma_mask", tuple((lem.lower(), pos.upper()) for lem, pos in self.lemma_mask)
        )


def parse_mask(mask: str) -> tuple[tuple[str, str], ...]:
    """``"authorised/ADJ person/NOUN"`` -> ``(("authorised", "ADJ"), ("person", "NOUN"))``."""
    out = []
    for item in mask.split():
        lemma, sep, pos = item.rpartition("/")
        if not sep or not lemma or not pos:
            raise FormatError(f"bad lemma mask item {item!r}; expected lemma/POS")
        out.append((lemma.lower(), pos.upper()))
    return tuple(out)


def mask_from_term(term: str) -> tuple[tuple[str, str], ...]:
    toks = [t for t in tokenize(term)]
    tags = pos_tags(toks)
    return tuple((lemmatize(t.text), tag) for t, tag in zip(toks, tags) if not t.is_punct)


def load_glossary(path: str | Path) -> list[GlossaryEntry]:
    """Read a ``term,lemma_mask`` CSV; an empty mask is derived from the term."""
    entries = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "term" not in reader.fieldnames:
            raise FormatError(f"{path}: glossary needs a 'term' column")
        for row in reader:
            term = (row.get("term") or "").strip()
            if not term:
                continue
            mask = (row.get("lemma_mask") or "").strip()
            entries.append(GlossaryEntry(term, parse_mask(mask) if mask else mask_from_term(term)))
    return entries


# --------------------------------------------------------------------------
# pattern rules

EXTENSIONS = ("trigger", "to_sentence_end", "to_clause_end", "noun_phrase")


@dataclass(frozen=True)
class PatternRule:
    ttype: TagType
    trigger: str
    extension: str

    def __post_init__(self) -> None:
        if self.extension not in EXTENSIONS:
            raise FormatError(f"unknown span extension {self.extension!r}; expected {EXTENSIONS}")
        try:
            re.compile(self.trigger)
        except re.error as exc:
            raise FormatError(f"bad trigger regex {self.trigger!r}: {exc}") from None

    @property
    def regex(self) -> re.Pattern:
        return _compile(self.trigger)


@lru_cache(maxsize=None)
def _compile(pattern: str) -> re.Pattern:
    return re.compile(pattern, re.IGNORECASE)


def parse_patterns(lines: Iterable[str]) -> list[PatternRule]:
    rules = []
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split("|")]
        if len(parts) < 3:
            raise FormatError("pattern rule needs 'TTYPE | regex | extension'", lineno)
        ttype = TagType.parse(parts[0])
        # the regex itself may contain '|'
        rules.append(PatternRule(ttype, "|".join(parts[1:-1]), parts[-1]))
    return rules


def load_patterns(path: str | Path | None = None) -> list[PatternRule]:
    if path is None:
        text = importlib_resources.files("regkg").joinpath("data", "patterns.txt").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return parse_patterns(text.splitlines())


def load_lexicons(directory: str | Path) -> dict[TagType, list[str]]:
    """Read ``<TTYPE>.lex`` files (one phrase per line) from ``directory``."""
    directory = Path(directory)
    if not directory.is_dir():
        raise ConfigError(f"lexicon directory {directory} does not exist")
    out: dict[TagType, list[str]] = {}
    for ttype in ALL_TAG_TYPES:
        if ttype is TagType.DEF:
            continue
        path = directory / f"{ttype.value}.lex"
        if path.exists():
            out[ttype] = read_list(path.read_text(encoding="utf-8").splitlines())
    return out


# --------------------------------------------------------------------------
# matching primitives

@dataclass(frozen=True)
class _Analysed:
    tokens: tuple[Token, ...]
    lemmas: tuple[str, ...]
    tags: tuple[str, ...]


@lru_cache(maxsize=4096)
def analyse(text: str) -> _Analysed:
    toks = tokenize(text)
    return _Analysed(tuple(toks), tuple(lemmatize(t.text) for t in toks), tuple(pos_tags(toks)))


@lru_cache(maxsize=4096)
def _phrase_table(phrases: tuple[str, ...]) -> dict[str, list[tuple[str, ...]]]:
    table: dict[str, list[tuple[str, ...]]] = {}
    for phrase in phrases:
        seq = tuple(lemmatize(t.text) for t in tokenize(phrase) if not t.is_punct)
        if seq:
            table.setdefault(seq[0], []).append(seq)
    for seqs in table.values():
        seqs.sort(key=len, reverse=True)
    return table


def _span(text: str, a: _Analysed, i: int, j: int) -> tuple[int, int]:
    return a.tokens[i].start, a.tokens[j - 1].end


def _pos_ok(wanted: str, got: str) -> bool:
    return wanted in ("*", "X", got) or (wanted == "PROPN" and got == NOUN)


def tag_glossary(
    text: str, glossary: Sequence[GlossaryEntry], para_id: str = ""
) -> list[SpanTag]:
    """DEF spans wherever a glossary entry's (lemma, POS) mask matches.

    Scanning is left to right; at each position the longest matching
    entry wins and the scan resumes after it.
    """
    if not glossary:
        return []
    a = analyse(text)
    index: dict[str, list[tuple[tuple[str, str], ...]]] = {}
    for entry in glossary:
        first = lemmatize(entry.lemma_mask[0][0])
        index.setdefault(first, []).append(entry.lemma_mask)
    spans = []
    i, n = 0, len(a.tokens)
    while i < n:
        best = 0
        for mask in index.get(a.lemmas[i], ()):
            k = len(mask)
            if k <= best or i + k > n:
                continue
            if all(
                a.lemmas[i + m] == lemmatize(lem) and _pos_ok(pos, a.tags[i + m])
                for m, (lem, pos) in enumerate(mask)
            ):
                best = k
        if best:
            s, e = _span(text, a, i, i + best)
            spans.append(SpanTag(para_id, s, e, TagType.DEF, text[s:e], "glossary:DEF"))
            i += best
        else:
            i += 1
    return spans


def _lexicon_candidates(text: str, a: _Analysed, phrases: tuple[str, ...]) -> list[tuple[int, int]]:
    table = _phrase_table(phrases)
    found = []
    n = len(a.tokens)
    for i in range(n):
        for seq in table.get(a.lemmas[i], ()):
            k = len(seq)
            if i + k <= n and a.lemmas[i:i + k] == seq:
                found.append(_span(text, a, i, i + k))
                break  # sequences are sorted longest first
    return found


_TRAILING = ".;:,?!"


def _trim(text: str, start: int, end: int) -> tuple[int, int]:
    while end > start and (text[end - 1].isspace() or text[end - 1] in _TRAILING):
        end -= 1
    while start < end and text[start].isspace():
        start += 1
    return start, end


def _noun_phrase_end(a: _Analysed, from_offset: int, limit: int) -> int:
    stop = stopwords()
    idx = [k for k, t in enumerate(a.tokens) if t.start >= from_offset and t.end <= limit]
    end = from_offset
    k = 0
    while k < len(idx):
        t = idx[k]
        tok, tag = a.tokens[t], a.tags[t]
        if tag in (NOUN, ADJ, NUM) and tok.lower not in stop:
            end = tok.end
            k += 1
            continue
        if tok.lower == "of" and k + 1 < len(idx):
            nxt = idx[k + 1]
            if a.tags[nxt] in (NOUN, ADJ, NUM) and a.tokens[nxt].lower not in stop:
                end = a.tokens[nxt].end
                k += 2
                continue
        break
    return end


def _pattern_candidates(
    text: str, a: _Analysed, rules: Sequence[PatternRule], sentences: list[tuple[int, int]]
) -> list[tuple[int, int]]:
    found = []
    for rule in rules:
        for m in rule.regex.finditer(text):
            if m.end() <= m.start():
                continue
            sent = sentence_of(sentences, m.start(), m.end()) or (0, len(text))
            if rule.extension == "trigger":
                end = m.end()
            elif rule.extension == "to_sentence_end":
                end = sent[1]
            elif rule.extension == "to_clause_end":
                cut = re.search(r"[,;:]", text[m.end():sent[1]])
                end = m.end() + cut.start() if cut else sent[1]
            else:
                end = _noun_phrase_end(a, m.end(), sent[1])
            s, e = _trim(text, m.start(), max(end, m.end()))
            if s < e:
                found.append((s, e))
    return found


def _longest_first(cands: Iterable[tuple[int, int]]) -> list[tuple[int, int]]:
    """Drop overlaps, keeping longer spans first and earlier ones on ties."""
    chosen: list[tuple[int, int]] = []
    for s, e in sorted(set(cands), key=lambda c: (-(c[1] - c[0]), c[0])):
        if all(e <= cs or s >= ce for cs, ce in chosen):
            chosen.append((s, e))
    return sorted(chosen)


def tag_lexicon(
    text: str,
    ttype: TagType,
    lexicon: Sequence[str],
    patterns: Sequence[PatternRule] = (),
    para_id: str = "",
) -> list[SpanTag]:
    """Lemma-level phrase matches plus pattern-rule spans for one concept."""
    if not isinstance(ttype, TagType):
        ttype = TagType.parse(str(ttype))
    if ttype is TagType.DEF:
        raise DomainError("DEF spans come from the glossary matcher, not a lexicon")
    a = analyse(text)
    cands = _lexicon_candidates(text, a, tuple(lexicon))
    rules = [r for r in patterns if r.ttype is ttype]
    if rules:
        cands += _pattern_candidates(text, a, rules, sentence_split(text))
    tagger_id = f"lexicon:{ttype.value}"
    return [SpanTag(para_id, s, e, ttype, text[s:e], tagger_id) for s, e in _longest_first(cands)]


# --------------------------------------------------------------------------
# groups

@dataclass
class TaggerResources:
    glossary: list[GlossaryEntry] | None = None
    lexicons: dict[TagType, list[str]] = field(default_factory=dict)
    patterns: list[PatternRule] = field(default_factory=list)


def run_group(
    paragraph: Paragraph, group: TaggerGroup, resources: TaggerResources
) -> list[SpanTag]:
    spans: list[SpanTag] = []
    text = paragraph.enriched_text
    for ttype in ALL_TAG_TYPES:
        if ttype not in group.covers:
            continue
        if ttype is TagType.DEF:
            if resources.glossary is None:
                raise ConfigError(f"group {group.group_id}: no glossary loaded for DEF")
            spans += tag_glossary(text, resources.glossary, paragraph.para_id)
        else:
            if ttype not in resources.lexicons:
                raise ConfigError(f"group {group.group_id}: no lexicon loaded for {ttype.value}")
            spans += tag_lexicon(text, ttype, resources.lexicons[ttype], resources.patterns,
                                 paragraph.para_id)
    return sorted(spans, key=lambda s: (s.start, s.end, s.ttype.value))


class Tagger(Protocol):
    def tag_paragraph(self, paragraph: Paragraph) -> list[SpanTag]: ...


class ReferenceTagger:
    """Runs every configured group over a paragraph's enriched text."""

    def __init__(self, resources: TaggerResources, groups: Sequence[TaggerGroup] = DEFAULT_GROUPS):
        validate_groups(tuple(groups))
        self.resources = resources
        self.groups = tuple(groups)

    def tag_paragraph(self, paragraph: Paragraph) -> list[SpanTag]:
        spans: list[SpanTag] = []
        for group in self.groups:
            spans += run_group(paragraph, group, self.resources)
        return sorted(spans, key=lambda s: (s.start, s.end, s.ttype.value))
