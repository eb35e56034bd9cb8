"""Named analytical queries over a built graph."""

from __future__ import annotations

import csv
import io
import json
from collections import Counter, deque
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

from .errors import AmbiguityError, DomainError, NotFoundError
from .graph import DOCUMENT, NEXT, OCCUR, PARAGRAPH, SOURCE, TAG, TAG_OCCUR, PropertyGraph
from .taxonomy import ALL_TAG_TYPES, TagType


class _DocIndex:
    """Paragraph -> document lookup through the NEXT chain, memoised."""

    def __init__(self, graph: PropertyGraph) -> None:
        self.graph = graph
        self._doc: dict[str, str] = {}

    def document_of(self, para_id: str) -> str:
        chain = []
        cur = para_id
        while cur not in self._doc:
            node = self.graph.node(cur)
            if node.kind == DOCUMENT:
                self._doc[cur] = cur
                break
            chain.append(cur)
            parents = self.graph.neighbors(cur, NEXT, "out")
            if len(parents) != 1:
                raise NotFoundError(f"paragraph {cur} has no NEXT parent")
            cur = parents[0]
        doc = self._doc[cur]
        for c in chain:
            self._doc[c] = doc
        return doc

    def source_of(self, occur_id: str) -> str:
        return self.graph.neighbors(occur_id, SOURCE, "out")[0]


def _documents_matching(graph: PropertyGraph, substr: str) -> list[str]:
    return [n.id for n in graph.nodes.values()
            if n.kind == DOCUMENT and substr in n.props.get("title", "")]


def _as_ttype(value) -> TagType:
    return value if isinstance(value, TagType) else TagType.parse(value)


# --------------------------------------------------------------------------
# document intersection

@dataclass(frozen=True)
class IntersectionResult:
    tag_id: str
    lemma: str
    left_occurrences: tuple[tuple[str, str], ...]
    right_occurrences: tuple[tuple[str, str], ...]

    def to_dict(self) -> dict:
        return {
            "tag_id": self.tag_id,
            "lemma": self.lemma,
            "left_occurrences": [list(o) for o in self.left_occurrences],
            "right_occurrences": [list(o) for o in self.right_occurrences],
        }


def intersect_documents(
    graph: PropertyGraph,
    ttype: TagType | str,
    left_title_substr: str,
    right_title_substr: str,
    limit: int | None = None,
) -> list[IntersectionResult]:
    """Tags of ``ttype`` with occurrences on both sides, ordered by lemma."""
    ttype = _as_ttype(ttype)
    if limit is not None and limit < 0:
        raise DomainError("limit must be >= 0")
    sides = {}
    for side, substr in (("left", left_title_substr), ("right", right_title_substr)):
        docs = _documents_matching(graph, substr)
        if not docs:
            raise NotFoundError(f"no document title contains {substr!r} ({side} side)")
        sides[side] = set(docs)
    idx = _DocIndex(graph)
    results = []
    for tag in graph.nodes.values():
        if tag.kind != TAG or tag.props.get("ttype") != ttype.value:
            continue
        left, right = [], []
        for oid in graph.neighbors(tag.id, OCCUR, "out"):
            pid = idx.source_of(oid)
            doc = idx.document_of(pid)
            if doc in sides["left"]:
                left.append((oid, pid))
            if doc in sides["right"]:
                right.append((oid, pid))
        if left and right:
            results.append(IntersectionResult(tag.id, tag.props["lemma"], tuple(left), tuple(right)))
    results.sort(key=lambda r: (r.lemma, r.tag_id))
    return results if limit is None else results[:limit]


# --------------------------------------------------------------------------
# table of contents

@dataclass
class TocEntry:
    para_id: str
    ordinal: int
    plevel: int
    text: str
    children: list["TocEntry"] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"para_id": self.para_id, "ordinal": self.ordinal, "plevel": self.plevel,
                "text": self.text, "children": [c.to_dict() for c in self.children]}


def flatten_toc(entries: Sequence[TocEntry]) -> list[TocEntry]:
    out = []
    for e in entries:
        out.append(e)
        out.extend(flatten_toc(e.children))
    return out


def table_of_contents(graph: PropertyGraph, title_substr: str, max_plevel: int = 0) -> list[TocEntry]:
    docs = _documents_matching(graph, title_substr)
    if len(docs) != 1:
        titles = sorted(graph.nodes[d].props.get("title", "") for d in docs)
        what = "no document" if not docs else f"{len(docs)} documents"
        raise AmbiguityError(f"{what} match {title_substr!r}; need exactly one", titles)
    doc_id = docs[0]
    roots: list[TocEntry] = []
    entries: dict[str, TocEntry] = {}
    # walk down from the document: children are the NEXT sources of a node
    stack = [doc_id]
    paras = []
    while stack:
        cur = stack.pop()
        for child in graph.neighbors(cur, NEXT, "in"):
            if graph.nodes[child].kind == PARAGRAPH:
                paras.append(child)
                stack.append(child)
    paras.sort(key=lambda p: graph.nodes[p].props.get("ordinal", 0))
    for pid in paras:
        props = graph.nodes[pid].props
        if props.get("plevel", 0) > max_plevel:
            continue
        entry = TocEntry(pid, props.get("ordinal", 0), props.get("plevel", 0), props.get("text", ""))
        entries[pid] = entry
        parent = graph.neighbors(pid, NEXT, "out")[0]
        if parent in entries:
            entries[parent].children.append(entry)
        else:
            roots.append(entry)
    return roots


# --------------------------------------------------------------------------
# tag usage

@dataclass(frozen=True)
class UsageRow:
    tag_id: str
    ttype: str
    lemma: str
    occur_id: str
    text: str
    para_id: str
    ordinal: int
    doc_id: str
    title: str

    def to_dict(self) -> dict:
        return asdict(self)


def _lemma_matches(lemma: str, predicate: str | Sequence[str]) -> bool:
    if isinstance(predicate, str):
        return lemma == predicate
    return all(term in lemma for term in predicate)


def tag_usage(
    graph: PropertyGraph,
    ttype: TagType | str | Iterable[TagType | str] | None,
    lemma_predicate: str | Sequence[str],
) -> list[UsageRow]:
    """Occurrences of matching Tags joined to paragraph and document.

    A string predicate is an exact lemma; a list means the lemma must
    contain every term.
    """
    if ttype is None:
        wanted = {t.value for t in ALL_TAG_TYPES}
    elif isinstance(ttype, (TagType, str)):
        wanted = {_as_ttype(ttype).value}
    else:
        wanted = {_as_ttype(t).value for t in ttype}
    idx = _DocIndex(graph)
    rows = []
    for tag in graph.nodes.values():
        if tag.kind != TAG or tag.props.get("ttype") not in wanted:
            continue
        if not _lemma_matches(tag.props.get("lemma", ""), lemma_predicate):
            continue
        for oid in graph.neighbors(tag.id, OCCUR, "out"):
            pid = idx.source_of(oid)
            doc = idx.document_of(pid)
            rows.append(UsageRow(
                tag.id, tag.props["ttype"], tag.props["lemma"], oid,
                graph.nodes[oid].props.get("text", ""), pid,
                graph.nodes[pid].props.get("ordinal", 0), doc,
                graph.nodes[doc].props.get("title", ""),
            ))
    rows.sort(key=lambda r: (r.title, r.ordinal, graph.nodes[r.occur_id].props.get("start", 0), r.occur_id))
    return rows


# --------------------------------------------------------------------------
# shortest paths

@dataclass(frozen=True)
class PathResult:
    nodes: tuple[str, ...]
    edge_kinds: tuple[str, ...]

    @property
    def length(self) -> int:
        return len(self.nodes) - 1

    def to_dict(self) -> dict:
        return {"nodes": list(self.nodes), "edge_kinds": list(self.edge_kinds), "length": self.length}


def _edge_kind_index(graph: PropertyGraph) -> dict[frozenset, str]:
    kinds: dict[frozenset, str] = {}
    for e in graph.edges:
        key = frozenset((e.src, e.dst))
        if key not in kinds or e.kind < kinds[key]:
            kinds[key] = e.kind
    return kinds


def _bfs(adj: dict[str, list[str]], origin: str, max_len: int) -> dict[str, int]:
    dist = {origin: 0}
    queue = deque([origin])
    while queue:
        cur = queue.popleft()
        if dist[cur] == max_len:
            continue
        for nxt in adj[cur]:
            if nxt not in dist:
                dist[nxt] = dist[cur] + 1
                queue.append(nxt)
    return dist


def shortest_paths(
    graph: PropertyGraph,
    src_contains: str,
    dst_contains: str,
    max_len: int = 4,
    limit: int | None = None,
) -> list[PathResult]:
    """Shortest undirected path for every matching (src, dst) occurrence pair.

    Among equally short paths the one whose node ids are smallest, step by
    step from the source, is returned. Pairs come out sorted by ids.
    """
    if max_len < 1:
        raise DomainError("max_len must be >= 1")
    if limit is not None and limit < 0:
        raise DomainError("limit must be >= 0")
    occs = [n for n in graph.nodes.values() if n.kind == TAG_OCCUR]
    sources = sorted(n.id for n in occs if src_contains in n.props.get("text", ""))
    targets = sorted(n.id for n in occs if dst_contains in n.props.get("text", ""))
    if not sources or not targets:
        return []
    adj = {nid: sorted(nbrs) for nid, nbrs in graph.undirected_adjacency().items()}
    kinds = _edge_kind_index(graph)
    found: dict[tuple[str, str], PathResult] = {}
    for dst in targets:
        dist = _bfs(adj, dst, max_len)
        for src in sources:
            if src == dst or src not in dist:
                continue
            path = [src]
            cur = src
            while cur != dst:
                want = dist[cur] - 1
                cur = next(w for w in adj[cur] if dist.get(w) == want)
                path.append(cur)
            edge_kinds = tuple(kinds[frozenset((a, b))] for a, b in zip(path, path[1:]))
            found[(src, dst)] = PathResult(tuple(path), edge_kinds)
    results = [found[k] for k in sorted(found)]
    return results if limit is None else results[:limit]


# --------------------------------------------------------------------------
# statistics

@dataclass
class TagStats:
    occurrences_by_ttype: dict[str, int]
    tags_by_ttype: dict[str, int]
    per_document: dict[str, dict[str, int]]
    proportions_ttype: str
    proportions: dict[str, dict[str, float]]
    cooccurrence: dict[str, dict[str, int]]

    def to_dict(self) -> dict:
        return asdict(self)


def compute_stats(graph: PropertyGraph, ttype: TagType | str = TagType.PROD) -> TagStats:
    """Counts by concept, per-document breakdowns and paragraph co-occurrence.

    The co-occurrence diagonal holds the number of paragraphs mentioning a
    concept at all.
    """
    ttype = _as_ttype(ttype)
    codes = [t.value for t in ALL_TAG_TYPES]
    occ_counts = {c: 0 for c in codes}
    tag_counts = {c: 0 for c in codes}
    per_doc: dict[str, dict[str, int]] = {}
    lemma_counts: dict[str, Counter[str]] = {}
    para_types: dict[str, set[str]] = {}
    idx = _DocIndex(graph)

    for node in graph.nodes.values():
        if node.kind == DOCUMENT:
            per_doc[node.props.get("title", node.id)] = {c: 0 for c in codes}
        elif node.kind == TAG:
            tag_counts[node.props["ttype"]] += 1
    for node in graph.nodes.values():
        if node.kind != TAG_OCCUR:
            continue
        code = node.props["ttype"]
        occ_counts[code] += 1
        pid = idx.source_of(node.id)
        title = graph.nodes[idx.document_of(pid)].props.get("title", "")
        per_doc[title][code] += 1
        para_types.setdefault(pid, set()).add(code)
        if code == ttype.value:
            tag = graph.neighbors(node.id, OCCUR, "in")[0]
            lemma_counts.setdefault(title, Counter())[graph.nodes[tag].props.get("lemma", "")] += 1

    proportions = {}
    for title in sorted(lemma_counts):
        counts = lemma_counts[title]
        total = sum(counts.values())
        ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        proportions[title] = {lemma: n / total for lemma, n in ordered}

    matrix = {a: {b: 0 for b in codes} for a in codes}
    for types in para_types.values():
        for a in types:
            for b in types:
                matrix[a][b] += 1
    return TagStats(occ_counts, tag_counts, per_doc, ttype.value, proportions, matrix)


def stats_to_csv(stats: TagStats) -> str:
    """Long-format CSV: section, row key, column key, value."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["section", "key", "column", "value"])
    for k, v in stats.occurrences_by_ttype.items():
        w.writerow(["occurrences_by_ttype", k, "", v])
    for k, v in stats.tags_by_ttype.items():
        w.writerow(["tags_by_ttype", k, "", v])
    for title, row in stats.per_document.items():
        for k, v in row.items():
            w.writerow(["per_document", title, k, v])
    for title, row in stats.proportions.items():
        for lemma, v in row.items():
            w.writerow([f"proportions:{stats.proportions_ttype}", title, lemma, repr(v)])
    for a, row in stats.cooccurrence.items():
        for b, v in row.items():
            w.writerow(["cooccurrence", a, b, v])
    return buf.getvalue()


def serialize(payload) -> bytes:
    """Canonical JSON bytes shared by the CLI and the HTTP facade."""
    return json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":")).encode("utf-8")
