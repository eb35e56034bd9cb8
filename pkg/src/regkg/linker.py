"""Entity linking: canonical Tags keyed by (concept, normalised lemma)."""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping

from .graph import OCCUR, TAG, PropertyGraph
from .taxonomy import TagType
from .text import lemmatize, stopwords, tokenize

_ARTICLES = frozenset({"a", "an", "the"})


def normalize_lemma(surface: str) -> str:
    """Lemma phrase used to merge occurrences of the same tag.

    Function words and punctuation are stripped from both edges, articles
    and punctuation are dropped inside, and every remaining token is
    lemmatised. Case is folded before anything else so the result does not
    depend on capitalisation. May return the empty string.
    """
    stop = stopwords()
    folded = surface.upper().lower()
    words = [(t.lower, lemmatize(t.lower)) for t in tokenize(folded) if not t.is_punct]

    def droppable(word: tuple[str, str]) -> bool:
        return word[0] in stop or word[1] in stop

    lo, hi = 0, len(words)
    while lo < hi and droppable(words[lo]):
        lo += 1
    while hi > lo and droppable(words[hi - 1]):
        hi -= 1
    return " ".join(lem for low, lem in words[lo:hi] if low not in _ARTICLES and lem not in _ARTICLES)


def _digest(*parts: str) -> str:
    h = hashlib.sha1()
    for part in parts:
        h.update(part.encode("utf-8"))
        h.update(b"\x00")
    return h.hexdigest()[:16]


def tag_id(ttype: TagType, lemma: str) -> str:
    return "tag:" + _digest(ttype.value, lemma)


def occur_id(para_id: str, ttype: TagType, start: int, end: int) -> str:
    return "occ:" + _digest(para_id, ttype.value, str(start), str(end))


@dataclass(frozen=True)
class Tag:
    tag_id: str
    ttype: TagType
    lemma: str

    def to_dict(self) -> dict:
        return {"tag_id": self.tag_id, "ttype": self.ttype.value, "lemma": self.lemma}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Tag":
        return cls(d["tag_id"], TagType.parse(d["ttype"]), d["lemma"])


@dataclass(frozen=True)
class TagOccur:
    occur_id: str
    para_id: str
    ttype: TagType
    start: int
    end: int
    text: str
    linked_tag: str

    @property
    def surface(self) -> str:
        return self.text

    def to_dict(self) -> dict:
        return {
            "occur_id": self.occur_id, "para_id": self.para_id, "ttype": self.ttype.value,
            "start": self.start, "end": self.end, "text": self.text, "linked_tag": self.linked_tag,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "TagOccur":
        return cls(d["occur_id"], d["para_id"], TagType.parse(d["ttype"]), int(d["start"]),
                   int(d["end"]), d["text"], d["linked_tag"])


def link(occurrences: Iterable) -> tuple[list[Tag], list[TagOccur]]:
    """Collapse span tags into Tags and linked occurrences.

    Accepts SpanTag records or TagOccur records (so linking is re-runnable
    on its own output). Identical spans of the same concept are merged.
    Output order follows first appearance in the input.
    """
    tags: dict[tuple[TagType, str], Tag] = {}
    occs: dict[str, TagOccur] = {}
    for o in occurrences:
        surface = getattr(o, "surface", None)
        if surface is None:
            surface = o.text
        oid = occur_id(o.para_id, o.ttype, o.start, o.end)
        if oid in occs:
            continue
        key = (o.ttype, normalize_lemma(surface))
        tag = tags.get(key)
        if tag is None:
            tag = tags[key] = Tag(tag_id(*key), *key)
        occs[oid] = TagOccur(oid, o.para_id, o.ttype, o.start, o.end, surface, tag.tag_id)
    return list(tags.values()), list(occs.values())


# --------------------------------------------------------------------------
# degenerate-tag cleanup

def _short_tags(graph: PropertyGraph, max_lemma_len: int) -> list[str]:
    return [n.id for n in graph.nodes.values()
            if n.kind == TAG and len(n.props.get("lemma", "")) <= max_lemma_len]


def find_degenerate(graph: PropertyGraph, max_lemma_len: int = 1) -> list[tuple[str, int]]:
    """Surface texts of occurrences whose Tag lemma is at most ``max_lemma_len``
    characters, with counts, most frequent first."""
    counts: Counter[str] = Counter()
    for tid in _short_tags(graph, max_lemma_len):
        for oid in graph.neighbors(tid, OCCUR, "out"):
            counts[graph.nodes[oid].props.get("text", "")] += 1
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))


def clean_degenerate(graph: PropertyGraph, max_lemma_len: int) -> tuple[int, int]:
    """Detach-delete short-lemma Tags and their occurrences.

    Returns (nodes_deleted, edges_deleted).
    """
    doomed: list[str] = []
    for tid in _short_tags(graph, max_lemma_len):
        doomed.append(tid)
        doomed.extend(graph.neighbors(tid, OCCUR, "out"))
    edge_ids: set[int] = set()
    for nid in doomed:
        edge_ids.update(graph.incident_edge_ids(nid))
    for eid in sorted(edge_ids):
        graph.remove_edge(eid)
    for nid in doomed:
        graph.remove_node(nid)
    return len(doomed), len(edge_ids)


def format_degenerate(rows: Iterable[tuple[str, int]]) -> str:
    """Two-column text/count table."""
    rows = list(rows)
    width = max([len("to.text")] + [len(json.dumps(t, ensure_ascii=False)) for t, _ in rows])
    lines = [f"{'to.text'.ljust(width)}  cnt"]
    lines += [f"{json.dumps(t, ensure_ascii=False).ljust(width)}  {c}" for t, c in rows]
    return "\n".join(lines)
