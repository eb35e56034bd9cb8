"""In-memory property graph: schema, build, census, dump format, Cypher export."""

from __future__ import annotations

import hashlib
import io
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Any, Iterable, Iterator, Sequence

from .corpus import IngestedDocument, parent_ids
from .errors import IntegrityError, LoadError, NotFoundError
from .relations import RELATION_KINDS
from .taxonomy import ALL_TAG_TYPES

DOCUMENT, PARAGRAPH, TAG, TAG_OCCUR = "Document", "Paragraph", "Tag", "TagOccur"
NODE_KINDS = (DOCUMENT, PARAGRAPH, TAG, TAG_OCCUR)
NEXT, SOURCE, OCCUR = "NEXT", "SOURCE", "OCCUR"
STRUCTURAL_KINDS = (NEXT, SOURCE, OCCUR)
EDGE_KINDS = STRUCTURAL_KINDS + RELATION_KINDS

DUMP_FORMAT_VERSION = 1


@dataclass
class Node:
    id: str
    kind: str
    props: dict[str, Any] = field(default_factory=dict)


@dataclass
class Edge:
    src: str
    dst: str
    kind: str
    props: dict[str, Any] = field(default_factory=dict)


class PropertyGraph:
    """Nodes keyed by id plus an insertion-ordered edge table.

    Adjacency is indexed per node and per edge kind in both directions, so
    neighbour lookups never scan the edge table.
    """

    def __init__(self) -> None:
        self.nodes: dict[str, Node] = {}
        self._edges: dict[int, Edge] = {}
        self._next_eid = 0
        self._out: dict[str, dict[str, list[int]]] = {}
        self._in: dict[str, dict[str, list[int]]] = {}

    # ---- mutation -------------------------------------------------------
    def add_node(self, node_id: str, kind: str, props: dict | None = None) -> Node:
        if kind not in NODE_KINDS:
            raise IntegrityError(f"unknown node kind {kind!r} for {node_id}")
        if node_id in self.nodes:
            raise IntegrityError(f"duplicate node id {node_id}")
        node = Node(node_id, kind, dict(props or {}))
        self.nodes[node_id] = node
        self._out[node_id] = {}
        self._in[node_id] = {}
        return node

    def add_edge(self, src: str, dst: str, kind: str, props: dict | None = None) -> int:
        if kind not in EDGE_KINDS:
            raise IntegrityError(f"unknown edge kind {kind!r} ({src} -> {dst})")
        for end in (src, dst):
            if end not in self.nodes:
                raise IntegrityError(f"{kind} edge {src} -> {dst} references missing node {end}")
        eid = self._next_eid
        self._next_eid += 1
        self._edges[eid] = Edge(src, dst, kind, dict(props or {}))
        self._out[src].setdefault(kind, []).append(eid)
        self._in[dst].setdefault(kind, []).append(eid)
        return eid

    def remove_edge(self, eid: int) -> None:
        edge = self._edges.pop(eid)
        self._out[edge.src][edge.kind].remove(eid)
        self._in[edge.dst][edge.kind].remove(eid)

    def remove_node(self, node_id: str) -> int:
        """Detach-delete a node; returns the number of edges removed."""
        if node_id not in self.nodes:
            raise NotFoundError(f"node {node_id} not found")
        eids = sorted(set(self.incident_edge_ids(node_id)))
        for eid in eids:
            self.remove_edge(eid)
        del self.nodes[node_id]
        del self._out[node_id]
        del self._in[node_id]
        return len(eids)

    # ---- access ---------------------------------------------------------
    @property
    def edges(self) -> list[Edge]:
        return list(self._edges.values())

    def edge_items(self) -> Iterator[tuple[int, Edge]]:
        return iter(self._edges.items())

    def edge(self, eid: int) -> Edge:
        return self._edges[eid]

    def node(self, node_id: str) -> Node:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise NotFoundError(f"node {node_id} not found") from None

    def nodes_of_kind(self, kind: str) -> list[Node]:
        return [n for n in self.nodes.values() if n.kind == kind]

    def out_edge_ids(self, node_id: str, kind: str | None = None) -> list[int]:
        return self._adjacent_ids(self._out, node_id, kind)

    def in_edge_ids(self, node_id: str, kind: str | None = None) -> list[int]:
        return self._adjacent_ids(self._in, node_id, kind)

    def incident_edge_ids(self, node_id: str) -> list[int]:
        return self.out_edge_ids(node_id) + self.in_edge_ids(node_id)

    def _adjacent_ids(self, index, node_id: str, kind: str | None) -> list[int]:
        if node_id not in index:
            raise NotFoundError(f"node {node_id} not found")
        by_kind = index[node_id]
        if kind is not None:
            return list(by_kind.get(kind, ()))
        return sorted(eid for eids in by_kind.values() for eid in eids)

    def neighbors(self, node_id: str, kind: str | None = None, direction: str = "out") -> list[str]:
        """Adjacent node ids in edge insertion order."""
        if direction == "out":
            return [self._edges[e].dst for e in self.out_edge_ids(node_id, kind)]
        if direction == "in":
            return [self._edges[e].src for e in self.in_edge_ids(node_id, kind)]
        if direction == "both":
            eids = sorted(set(self.out_edge_ids(node_id, kind)) | set(self.in_edge_ids(node_id, kind)))
            out = []
            for e in eids:
                edge = self._edges[e]
                out.append(edge.dst if edge.src == node_id else edge.src)
            return out
        raise ValueError(f"direction must be 'out', 'in' or 'both', not {direction!r}")

    def undirected_adjacency(self) -> dict[str, set[str]]:
        adj: dict[str, set[str]] = {nid: set() for nid in self.nodes}
        for edge in self._edges.values():
            if edge.src != edge.dst:
                adj[edge.src].add(edge.dst)
                adj[edge.dst].add(edge.src)
        return adj

    def __len__(self) -> int:
        return len(self.nodes)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PropertyGraph):
            return NotImplemented
        return list(self.nodes.values()) == list(other.nodes.values()) and self.edges == other.edges

    def copy(self) -> "PropertyGraph":
        g = PropertyGraph()
        for n in self.nodes.values():
            g.add_node(n.id, n.kind, json.loads(json.dumps(n.props)))
        for e in self._edges.values():
            g.add_edge(e.src, e.dst, e.kind, json.loads(json.dumps(e.props)))
        return g


# --------------------------------------------------------------------------
# schema

def schema_violations(graph: PropertyGraph) -> list[str]:
    """Every schema problem in one pass over nodes and edges."""
    problems: list[str] = []
    nodes = graph.nodes
    next_out: Counter[str] = Counter()
    source_out: Counter[str] = Counter()
    occur_in: Counter[str] = Counter()
    parent: dict[str, str] = {}
    for eid, e in graph.edge_items():
        if e.src not in nodes or e.dst not in nodes:
            problems.append(f"edge {eid} {e.kind} {e.src}->{e.dst} has a missing endpoint")
            continue
        sk, dk = nodes[e.src].kind, nodes[e.dst].kind
        if e.kind == NEXT:
            if sk != PARAGRAPH or dk not in (PARAGRAPH, DOCUMENT):
                problems.append(f"NEXT edge {e.src}->{e.dst} joins {sk}->{dk}")
            next_out[e.src] += 1
            parent[e.src] = e.dst
        elif e.kind == SOURCE:
            if sk != TAG_OCCUR or dk != PARAGRAPH:
                problems.append(f"SOURCE edge {e.src}->{e.dst} joins {sk}->{dk}")
            source_out[e.src] += 1
        elif e.kind == OCCUR:
            if sk != TAG or dk != TAG_OCCUR:
                problems.append(f"OCCUR edge {e.src}->{e.dst} joins {sk}->{dk}")
            occur_in[e.dst] += 1
        elif e.kind in RELATION_KINDS:
            if sk != TAG_OCCUR or dk != TAG_OCCUR:
                problems.append(f"{e.kind} edge {e.src}->{e.dst} joins {sk}->{dk}")
            if e.src == e.dst:
                problems.append(f"{e.kind} self-loop on {e.src}")
        else:
            problems.append(f"edge {eid} has unknown kind {e.kind!r}")
    for nid, node in nodes.items():
        if node.kind == PARAGRAPH and next_out[nid] != 1:
            problems.append(f"paragraph {nid} has {next_out[nid]} outgoing NEXT edges")
        elif node.kind == TAG_OCCUR:
            if source_out[nid] != 1:
                problems.append(f"occurrence {nid} has {source_out[nid]} SOURCE edges")
            if occur_in[nid] != 1:
                problems.append(f"occurrence {nid} has {occur_in[nid]} incoming OCCUR edges")
    # NEXT chains must end at a document
    state: dict[str, int] = {}
    for start in parent:
        path = []
        cur = start
        while cur in parent and state.get(cur) is None:
            state[cur] = 1
            path.append(cur)
            cur = parent[cur]
        if state.get(cur) == 1:
            problems.append(f"NEXT cycle through {cur}")
        for p in path:
            state[p] = 2
    return problems


def check_schema(graph: PropertyGraph) -> None:
    problems = schema_violations(graph)
    if problems:
        raise IntegrityError(f"{len(problems)} schema violation(s); first: {problems[0]}")


# --------------------------------------------------------------------------
# build

def build(
    corpus: Sequence[IngestedDocument],
    tags: Sequence = (),
    occurrences: Sequence = (),
    relations: Sequence = (),
) -> PropertyGraph:
    """Assemble the graph from the pipeline outputs.

    ``tags``/``occurrences`` are the linker's Tag and TagOccur records and
    ``relations`` the extractor's RelationEdge records.
    """
    g = PropertyGraph()
    for doc in corpus:
        d = doc.document
        g.add_node(d.doc_id, DOCUMENT, {"title": d.title, "paragraph_count": d.paragraph_count})
        for p in doc.paragraphs:
            props = {"ordinal": p.ordinal, "plevel": p.plevel, "text": p.text}
            if p.enriched_text != p.text:
                props["enriched_text"] = p.enriched_text
            g.add_node(p.para_id, PARAGRAPH, props)
    for tag in tags:
        g.add_node(tag.tag_id, TAG, {"ttype": tag.ttype.value, "lemma": tag.lemma})
    for occ in occurrences:
        for ref, kind in ((occ.para_id, PARAGRAPH), (occ.linked_tag, TAG)):
            if ref not in g.nodes or g.nodes[ref].kind != kind:
                raise IntegrityError(f"occurrence {occ.occur_id} references missing {kind} {ref}")
        g.add_node(occ.occur_id, TAG_OCCUR, {
            "ttype": occ.ttype.value, "text": occ.text, "start": occ.start, "end": occ.end,
        })
    for doc in corpus:
        for p, parent in zip(doc.paragraphs, parent_ids(doc)):
            g.add_edge(p.para_id, parent, NEXT)
    for occ in occurrences:
        g.add_edge(occ.occur_id, occ.para_id, SOURCE)
    for occ in occurrences:
        g.add_edge(occ.linked_tag, occ.occur_id, OCCUR)
    for rel in relations:
        for ref in (rel.src, rel.dst):
            if ref not in g.nodes or g.nodes[ref].kind != TAG_OCCUR:
                raise IntegrityError(f"relation {rel.src}->{rel.dst} references missing occurrence {ref}")
        g.add_edge(rel.src, rel.dst, rel.label.value, {
            "trigger": rel.trigger,
            "sentence_start": rel.sentence_span[0],
            "sentence_end": rel.sentence_span[1],
        })
    check_schema(g)
    return g


# --------------------------------------------------------------------------
# census

@dataclass
class GraphCensus:
    nodes: dict[str, int]
    edges: dict[str, int]
    tags_by_ttype: dict[str, int]

    @property
    def total_nodes(self) -> int:
        return sum(self.nodes.values())

    @property
    def total_edges(self) -> int:
        return sum(self.edges.values())

    def to_dict(self) -> dict:
        return {
            "nodes": dict(self.nodes),
            "edges": dict(self.edges),
            "tags_by_ttype": dict(self.tags_by_ttype),
            "total_nodes": self.total_nodes,
            "total_edges": self.total_edges,
        }


def census(graph: PropertyGraph) -> GraphCensus:
    nodes = {k: 0 for k in NODE_KINDS}
    tags = {t.value: 0 for t in ALL_TAG_TYPES}
    for n in graph.nodes.values():
        nodes[n.kind] += 1
        if n.kind == TAG:
            tags[n.props["ttype"]] += 1
    edges = {k: 0 for k in STRUCTURAL_KINDS}
    for e in graph.edges:
        edges[e.kind] = edges.get(e.kind, 0) + 1
    return GraphCensus(nodes, edges, tags)


def format_tag_counts(c: GraphCensus) -> str:
    """Two-column concept/count table, largest first."""
    rows = sorted(c.tags_by_ttype.items(), key=lambda kv: (-kv[1], kv[0]))
    width = max(len("(Tag concept)"), *(len(k) for k, _ in rows))
    lines = [f"{'(Tag concept)'.ljust(width)}  counts"]
    lines += [f"{k.ljust(width)}  {v}" for k, v in rows]
    return "\n".join(lines)


# --------------------------------------------------------------------------
# dump format

def _line(obj: dict) -> bytes:
    return (json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":")) + "\n").encode("utf-8")


def dump_bytes(graph: PropertyGraph) -> bytes:
    body = io.BytesIO()
    body.write(_line({"format_version": DUMP_FORMAT_VERSION, "nodes": len(graph.nodes),
                      "edges": len(graph._edges)}))
    for n in graph.nodes.values():
        body.write(_line({"id": n.id, "kind": n.kind, "props": n.props}))
    for e in graph.edges:
        body.write(_line({"src": e.src, "dst": e.dst, "kind": e.kind, "props": e.props}))
    payload = body.getvalue()
    return payload + _line({"checksum": hashlib.sha256(payload).hexdigest()})


def save(graph: PropertyGraph, sink: str | Path | IO[bytes]) -> None:
    data = dump_bytes(graph)
    if isinstance(sink, (str, Path)):
        Path(sink).write_bytes(data)
    else:
        sink.write(data)


def load(source: str | Path | IO[bytes] | bytes) -> PropertyGraph:
    """Parse a dump, verifying counts, checksum and schema."""
    if isinstance(source, bytes):
        data = source
    elif isinstance(source, (str, Path)):
        data = Path(source).read_bytes()
    else:
        data = source.read()
    if not data.strip():
        raise LoadError("empty dump", 1)
    lines = data.split(b"\n")
    if lines and lines[-1] == b"":
        lines.pop()
    else:
        raise LoadError("dump does not end with a newline (truncated?)", len(lines))

    def parse(i: int) -> dict:
        try:
            obj = json.loads(lines[i].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise LoadError(f"unparseable record: {exc}", i + 1) from None
        if not isinstance(obj, dict):
            raise LoadError("record is not an object", i + 1)
        return obj

    header = parse(0)
    if header.get("format_version") != DUMP_FORMAT_VERSION:
        raise LoadError(
            f"unsupported format_version {header.get('format_version')!r}; expected {DUMP_FORMAT_VERSION}", 1
        )
    n_nodes, n_edges = header.get("nodes"), header.get("edges")
    if not isinstance(n_nodes, int) or not isinstance(n_edges, int) or n_nodes < 0 or n_edges < 0:
        raise LoadError("header must carry non-negative 'nodes' and 'edges' counts", 1)
    expected = 1 + n_nodes + n_edges + 1
    if len(lines) != expected:
        raise LoadError(f"expected {expected} records, found {len(lines)} (truncated?)",
                        min(len(lines), expected))
    trailer = parse(len(lines) - 1)
    payload_len = sum(len(l) + 1 for l in lines[:-1])
    digest = hashlib.sha256(data[:payload_len]).hexdigest()
    if trailer.get("checksum") != digest:
        raise LoadError("checksum mismatch", len(lines))

    g = PropertyGraph()
    for i in range(1, 1 + n_nodes):
        rec = parse(i)
        try:
            g.add_node(rec["id"], rec["kind"], rec.get("props") or {})
        except KeyError as exc:
            raise LoadError(f"node record missing {exc}", i + 1) from None
        except IntegrityError as exc:
            raise IntegrityError(f"line {i + 1}: {exc}") from None
    for i in range(1 + n_nodes, 1 + n_nodes + n_edges):
        rec = parse(i)
        try:
            g.add_edge(rec["src"], rec["dst"], rec["kind"], rec.get("props") or {})
        except KeyError as exc:
            raise LoadError(f"edge record missing {exc}", i + 1) from None
        except IntegrityError as exc:
            raise IntegrityError(f"line {i + 1}: {exc}") from None
    check_schema(g)
    return g


# --------------------------------------------------------------------------
# Cypher export

_CYPHER_ESCAPES = {"\\": "\\\\", "'": "\\'", '"': '\\"', "\n": "\\n", "\r": "\\r", "\t": "\\t",
                   "\b": "\\b", "\f": "\\f"}


def cypher_string(value: str) -> str:
    out = []
    for ch in value:
        if ch in _CYPHER_ESCAPES:
            out.append(_CYPHER_ESCAPES[ch])
        elif ord(ch) < 0x20 or ch in "\x7f  ":
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    return "'" + "".join(out) + "'"


def cypher_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, str):
        return cypher_string(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(cypher_value(v) for v in value) + "]"
    raise TypeError(f"cannot export property value of type {type(value).__name__}")


def _prop_map(props: dict[str, Any]) -> str:
    items = [f"{k}: {cypher_value(v)}" for k, v in props.items() if v is not None]
    return "{" + ", ".join(items) + "}"


def cypher_statements(graph: PropertyGraph) -> Iterator[str]:
    for n in graph.nodes.values():
        yield f"CREATE (:{n.kind} {_prop_map({'id': n.id, **n.props})});"
    for e in graph.edges:
        props = " " + _prop_map(e.props) if any(v is not None for v in e.props.values()) else ""
        yield (
            f"MATCH (a {{id: {cypher_string(e.src)}}}), (b {{id: {cypher_string(e.dst)}}}) "
            f"CREATE (a)-[:{e.kind}{props}]->(b);"
        )


def export_cypher(graph: PropertyGraph, sink: str | Path | IO[str]) -> int:
    """Write one statement per line; returns the statement count."""
    count = 0
    if isinstance(sink, (str, Path)):
        with open(sink, "w", encoding="utf-8", newline="\n") as fh:
            return export_cypher(graph, fh)
    for stmt in cypher_statements(graph):
        sink.write(stmt + "\n")
        count += 1
    return count


def neighbors(graph: PropertyGraph, node_id: str, kind: str | None = None,
              direction: str = "out") -> list[str]:
    return graph.neighbors(node_id, kind, direction)


def iter_kind(graph: PropertyGraph, kind: str) -> Iterable[Node]:
    return (n for n in graph.nodes.values() if n.kind == kind)
