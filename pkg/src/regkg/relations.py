"""Labelled relations between co-occurring tag occurrences.

The trigger for a pair is the first verb group in the text between the two
spans, lemmatised. Labels come from a trigger lexicon and are only kept when
the expert pair table allows them for the two concepts involved.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

from .corpus import Paragraph, sentence_split
from .errors import ConfigError, FormatError
from .taxonomy import ALL_TAG_TYPES, TagType
from .text import ADP, ADV, AUX, MODALS, NOUN, VERB, known_verbs, lemmatize, pos_tags, tokenize


class RelationLabel(str, Enum):
    ALLOW = "ALLOW"
    AUTHORISE = "AUTHORISE"
    CANNOT = "CANNOT"
    INVOLVING = "INVOLVING"
    RELATING = "RELATING"
    USES = "USES"
    CREATE = "CREATE"
    INCREASE = "INCREASE"
    DECREASES = "DECREASES"
    MUST_ENSURE = "MUST_ENSURE"
    IMPACT = "IMPACT"
    MANAGE = "MANAGE"
    CONTROLLED = "CONTROLLED"
    OWNED = "OWNED"
    SELL = "SELL"
    BUYS = "BUYS"
    IS_A = "IS_A"
    PRECEDENCE = "PRECEDENCE"
    UNCLASSIFIED = "UNCLASSIFIED"

    @classmethod
    def parse(cls, value: str) -> "RelationLabel":
        try:
            return cls(value.strip().upper())
        except ValueError:
            raise ConfigError(
                f"unknown relation label {value!r}; expected one of {', '.join(m.value for m in cls)}"
            ) from None


RELATION_KINDS: tuple[str, ...] = tuple(label.value for label in RelationLabel)

Pair = tuple[TagType, TagType]


@dataclass(frozen=True)
class RelationLexicon:
    entries: Mapping[str, RelationLabel]
    pair_constraints: Mapping[Pair, frozenset[RelationLabel]]

    def __post_init__(self) -> None:
        expected = {(a, b) for a in ALL_TAG_TYPES for b in ALL_TAG_TYPES if a != b}
        got = set(self.pair_constraints)
        if got != expected:
            diag = sorted(f"{a.value}->{b.value}" for a, b in got if a == b)
            missing = sorted(f"{a.value}->{b.value}" for a, b in expected - got)
            raise ConfigError(
                "pair table must cover every ordered pair of distinct concepts"
                + (f"; missing {', '.join(missing)}" if missing else "")
                + (f"; diagonal entries not allowed: {', '.join(diag)}" if diag else "")
            )

    def allowed(self, src: TagType, dst: TagType) -> frozenset[RelationLabel]:
        return self.pair_constraints.get((src, dst), frozenset())

    def candidates(self, trigger: str) -> list[RelationLabel]:
        """Labels for a trigger, most specific reading first.

        Tries the whole group, then its auxiliary part ("must not" in
        "must not sell"), then the main verb with and without particle.
        Negated groups stop at the auxiliary part.
        """
        words = trigger.split()
        keys = [trigger]
        aux = []
        for w in words:
            if w in MODALS or w == "not" or w in ("be", "have", "do"):
                aux.append(w)
            else:
                break
        if "not" in aux:
            # a negated group never falls back to its bare verb
            keys.append(" ".join(aux))
        elif aux and len(aux) < len(words):
            keys.append(" ".join(aux))
            keys.append(" ".join(words[len(aux):]))
            keys.append(words[len(aux)])
        elif len(words) > 1:
            keys.append(words[0])
        out: list[RelationLabel] = []
        for k in keys:
            label = self.entries.get(k)
            if label is not None and label not in out:
                out.append(label)
        return out


def parse_lexicon(lines: Iterable[str]) -> dict[str, RelationLabel]:
    entries: dict[str, RelationLabel] = {}
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        trigger, sep, label = line.partition("=>")
        if not sep or not trigger.strip():
            raise FormatError("relation lexicon lines read 'trigger => LABEL'", lineno)
        key = " ".join(lemmatize(w) for w in trigger.lower().split())
        try:
            entries[key] = RelationLabel.parse(label)
        except ConfigError as exc:
            raise FormatError(str(exc), lineno) from None
    return entries


def parse_constraints(lines: Iterable[str]) -> dict[Pair, frozenset[RelationLabel]]:
    table: dict[Pair, frozenset[RelationLabel]] = {}
    for lineno, line in enumerate(lines, start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        cols = line.rstrip("\n").split("\t")
        if len(cols) != 3:
            raise FormatError("constraint rows read 'SRC<TAB>DST<TAB>LABEL,LABEL'", lineno)
        try:
            src, dst = TagType.parse(cols[0]), TagType.parse(cols[1])
            labels = frozenset(RelationLabel.parse(x) for x in cols[2].split(",") if x.strip())
        except Exception as exc:
            raise FormatError(str(exc), lineno) from None
        if (src, dst) in table:
            raise FormatError(f"duplicate row for {src.value}->{dst.value}", lineno)
        table[(src, dst)] = labels
    return table


def _data_lines(path: str | Path | None, name: str) -> list[str]:
    if path is None:
        return resources.files("regkg").joinpath("data", name).read_text("utf-8").splitlines()
    return Path(path).read_text(encoding="utf-8").splitlines()


def load_lexicon(lexicon_path: str | Path | None = None,
                 constraints_path: str | Path | None = None) -> RelationLexicon:
    return RelationLexicon(
        parse_lexicon(_data_lines(lexicon_path, "relation_lexicon.txt")),
        parse_constraints(_data_lines(constraints_path, "relation_constraints.tsv")),
    )


# --------------------------------------------------------------------------
# pairing and triggers

class Occurrence(Protocol):
    occur_id: str
    ttype: TagType
    start: int
    end: int


def _nested(a: Occurrence, b: Occurrence) -> bool:
    return (a.start <= b.start and b.end <= a.end) or (b.start <= a.start and a.end <= b.end)


def candidate_pairs(sentence: tuple[int, int], occurrences: Sequence[Occurrence]) -> list[tuple]:
    """Left-to-right ordered pairs of non-nested occurrences in one sentence."""
    occs = sorted(
        (o for o in occurrences if sentence[0] <= o.start and o.end <= sentence[1]),
        key=lambda o: (o.start, o.end, o.occur_id),
    )
    pairs = []
    for i, a in enumerate(occs):
        for b in occs[i + 1:]:
            if a.occur_id != b.occur_id and a.start < b.start and not _nested(a, b):
                pairs.append((a, b))
    return pairs


_PARTICLES = frozenset({"up", "out", "off", "down", "on", "over", "back", "away"})
_LIGHT_AUX = frozenset({"be", "have", "do"})


@dataclass(frozen=True)
class Trigger:
    lemma: str
    start: int
    end: int


def _multiword_heads(phrases: Iterable[str]) -> dict[str, set[str]]:
    heads: dict[str, set[str]] = {}
    for p in phrases:
        words = p.split()
        if len(words) == 2 and words[0] not in MODALS and words[0] not in _LIGHT_AUX:
            heads.setdefault(words[0], set()).add(words[1])
    return heads


def _verb_group(toks, tags, lemmas, i: int, heads) -> tuple[int, int] | None:
    """Token range of the verb group starting at ``i``, if one starts there."""
    n = len(toks)
    verbs = known_verbs()

    def is_verb(k: int) -> bool:
        return tags[k] == VERB or (tags[k] == NOUN and lemmas[k] in verbs and k > i)

    def tail(k: int) -> int:
        # k is a verb; absorb one particle or a lexicalised object ("give rise")
        if k + 1 < n and toks[k + 1].lower in _PARTICLES and tags[k + 1] in (ADP, ADV):
            return k + 2
        if k + 1 < n and lemmas[k + 1] in heads.get(lemmas[k], ()):
            return k + 2
        return k + 1

    if tags[i] == AUX:
        k = i + 1
        while k < n and (tags[k] == ADV or toks[k].lower == "not"):
            k += 1
        if k < n and is_verb(k):
            return i, tail(k)
        j = i + 1
        if j < n and toks[j].lower == "not":
            j += 1
        return i, j
    if tags[i] == VERB:
        return i, tail(i)
    return None


def _group_lemma(toks, tags, lemmas, a: int, b: int) -> str:
    words = []
    for k in range(a, b):
        if tags[k] == ADV and toks[k].lower not in _PARTICLES:
            continue
        words.append(toks[k].lower if toks[k].lower in MODALS or toks[k].lower == "not" else lemmas[k])
    return " ".join(words)


def find_trigger(text: str, left: Occurrence, right: Occurrence,
                 phrases: Iterable[str] = ()) -> Trigger | None:
    """Locate the trigger for a pair in ``text`` (offsets as in the occurrences).

    Looks between the spans first. When nothing verbal lies in the gap, a
    verb group opening the right-hand span counts as adjacent material.
    """
    heads = _multiword_heads(phrases)
    gap_start, gap_end = left.end, right.start
    if gap_start < gap_end:
        found = _scan(text, gap_start, gap_end, heads, anchored=False)
        if found is not None:
            return found
    found = _scan(text, right.start, right.end, heads, anchored=True)
    return found


def _scan(text: str, start: int, end: int, heads, anchored: bool) -> Trigger | None:
    window = text[start:end]
    toks = tokenize(window)
    if not toks:
        return None
    tags = pos_tags(toks)
    lemmas = [lemmatize(t.text) for t in toks]
    positions = [0] if anchored else range(len(toks))
    for i in positions:
        group = _verb_group(toks, tags, lemmas, i, heads)
        if group is None:
            continue
        a, b = group
        return Trigger(_group_lemma(toks, tags, lemmas, a, b), start + toks[a].start, start + toks[b - 1].end)
    return None


def extract_trigger(sentence_text: str, pair: tuple[Occurrence, Occurrence],
                    offset: int = 0, phrases: Iterable[str] = ()) -> str | None:
    """Lemmatised trigger for ``pair``; ``offset`` is where the sentence starts
    in the coordinate system of the occurrences."""
    left, right = pair
    shifted = [_Shifted(o, offset) for o in (left, right)]
    found = find_trigger(sentence_text, shifted[0], shifted[1], phrases)
    return found.lemma if found else None


@dataclass(frozen=True)
class _Shifted:
    occ: Occurrence
    offset: int

    @property
    def start(self) -> int:
        return self.occ.start - self.offset

    @property
    def end(self) -> int:
        return self.occ.end - self.offset


def classify(trigger: str | None, src_type: TagType, dst_type: TagType,
             lexicon: RelationLexicon) -> RelationLabel:
    if trigger is None or src_type == dst_type:
        return RelationLabel.UNCLASSIFIED
    allowed = lexicon.allowed(src_type, dst_type)
    for label in lexicon.candidates(trigger):
        if label in allowed:
            return label
    return RelationLabel.UNCLASSIFIED


# --------------------------------------------------------------------------
# extraction

@dataclass(frozen=True)
class RelationEdge:
    src: str
    dst: str
    label: RelationLabel
    trigger: str | None
    sentence_span: tuple[int, int]
    trigger_span: tuple[int, int] | None = None

    def to_dict(self) -> dict:
        return {
            "src": self.src, "dst": self.dst, "label": self.label.value, "trigger": self.trigger,
            "sentence_span": list(self.sentence_span),
            "trigger_span": list(self.trigger_span) if self.trigger_span else None,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "RelationEdge":
        return cls(d["src"], d["dst"], RelationLabel(d["label"]), d.get("trigger"),
                   tuple(d["sentence_span"]),
                   tuple(d["trigger_span"]) if d.get("trigger_span") else None)


def extract_relations(
    paragraph: Paragraph,
    occurrences: Sequence[Occurrence],
    lexicon: RelationLexicon,
    abbreviations: frozenset[str] | None = None,
) -> list[RelationEdge]:
    """One edge per candidate pair in each sentence of the enriched text.

    When only the reversed concept pair admits the trigger's label, the edge
    is turned round so that it follows the table's direction.
    """
    text = paragraph.enriched_text
    occs = sorted(occurrences, key=lambda o: (o.start, o.end, o.occur_id))
    if len(occs) < 2:
        return []
    edges: list[RelationEdge] = []
    seen: set[tuple[str, str, RelationLabel]] = set()
    for sentence in sentence_split(text, abbreviations):
        for a, b in candidate_pairs(sentence, occs):
            trig = find_trigger(text, a, b, lexicon.entries)
            lemma = trig.lemma if trig else None
            label = classify(lemma, a.ttype, b.ttype, lexicon)
            src, dst = a, b
            if label is RelationLabel.UNCLASSIFIED:
                reverse = classify(lemma, b.ttype, a.ttype, lexicon)
                if reverse is not RelationLabel.UNCLASSIFIED:
                    src, dst, label = b, a, reverse
            key = (src.occur_id, dst.occur_id, label)
            if key in seen:
                continue
            seen.add(key)
            edges.append(RelationEdge(src.occur_id, dst.occur_id, label, lemma, sentence,
                                      (trig.start, trig.end) if trig else None))
    return edges
