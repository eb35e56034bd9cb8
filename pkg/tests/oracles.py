"""Slow, obviously-correct reference implementations used by the tests."""

from __future__ import annotations

from collections import defaultdict

from regkg.relations import RelationLabel as L
from regkg.taxonomy import TagType as T

_UNESCAPE = {"\\": "\\", "'": "'", '"': '"', "n": "\n", "r": "\r", "t": "\t", "b": "\b", "f": "\f"}


def cypher_literals(statement: str) -> list[str]:
    """Every single-quoted string literal in a statement, unescaped."""
    out, i = [], 0
    while i < len(statement):
        if statement[i] != "'":
            i += 1
            continue
        i += 1
        buf = []
        while statement[i] != "'":
            ch = statement[i]
            if ch == "\\":
                nxt = statement[i + 1]
                if nxt == "u":
                    buf.append(chr(int(statement[i + 2:i + 6], 16)))
                    i += 6
                    continue
                buf.append(_UNESCAPE[nxt])
                i += 2
                continue
            buf.append(ch)
            i += 1
        out.append("".join(buf))
        i += 1
    return out


def all_shortest(graph, src: str, dst: str, max_len: int):
    """(length, lexicographically smallest node tuple) over every simple
    undirected path of at most max_len edges, or None."""
    adj = defaultdict(set)
    for e in graph.edges:
        adj[e.src].add(e.dst)
        adj[e.dst].add(e.src)
    best = None

    def walk(path):
        nonlocal best
        node = path[-1]
        if node == dst:
            cand = (len(path) - 1, tuple(path))
            if best is None or cand < best:
                best = cand
            return
        if len(path) - 1 == max_len:
            return
        for nxt in adj[node]:
            if nxt not in path:
                path.append(nxt)
                walk(path)
                path.pop()

    walk([src])
    return best


def edge_kind_between(graph, a: str, b: str) -> str:
    return min(e.kind for e in graph.edges if {e.src, e.dst} == {a, b})


def brute_intersection(syn, ttype: str, left: str, right: str) -> dict[str, tuple[set, set]]:
    """lemma -> (left occurrence ids, right occurrence ids), from raw records."""
    doc_of_para = {p.para_id: d.document.doc_id for d in syn.corpus for p in d.paragraphs}
    title = {d.document.doc_id: d.document.title for d in syn.corpus}
    tags = {t.tag_id: t for t in syn.tags}
    found: dict[str, tuple[set, set]] = {}
    for o in syn.occurrences:
        tag = tags[o.linked_tag]
        if tag.ttype.value != ttype:
            continue
        t = title[doc_of_para[o.para_id]]
        sides = found.setdefault(tag.tag_id, (set(), set()))
        if left in t:
            sides[0].add(o.occur_id)
        if right in t:
            sides[1].add(o.occur_id)
    return {tid: s for tid, s in found.items() if s[0] and s[1]}


def half_up(num: int, den: int) -> str:
    """Percentage with two decimals, halves rounded up, by integer arithmetic."""
    scaled = (num * 10000 * 2 + den) // (2 * den)
    return f"{scaled // 100}.{scaled % 100:02d}"


def invariant_breaches(graph) -> list[str]:
    """Schema rules checked straight off the node and edge lists."""
    kind = {n.id: n.kind for n in graph.nodes.values()}
    out = defaultdict(list)
    incoming = defaultdict(list)
    bad = []
    for e in graph.edges:
        if e.src not in kind or e.dst not in kind:
            bad.append(f"dangling {e.kind} {e.src}->{e.dst}")
            continue
        out[(e.src, e.kind)].append(e.dst)
        incoming[(e.dst, e.kind)].append(e.src)
        if e.kind not in ("NEXT", "SOURCE", "OCCUR") and (kind[e.src], kind[e.dst]) != ("TagOccur", "TagOccur"):
            bad.append(f"relation {e.kind} between {kind[e.src]} and {kind[e.dst]}")
    for nid, k in kind.items():
        if k == "TagOccur":
            src = out[(nid, "SOURCE")]
            if len(src) != 1 or kind[src[0]] != "Paragraph":
                bad.append(f"{nid} has SOURCE targets {src}")
            occ = incoming[(nid, "OCCUR")]
            if len(occ) != 1 or kind[occ[0]] != "Tag":
                bad.append(f"{nid} has OCCUR sources {occ}")
        if k == "Paragraph":
            seen, cur = set(), nid
            while kind.get(cur) == "Paragraph":
                nxt = out[(cur, "NEXT")]
                if len(nxt) != 1 or cur in seen:
                    bad.append(f"NEXT chain from {nid} broken at {cur}")
                    break
                seen.add(cur)
                cur = nxt[0]
            else:
                if kind.get(cur) != "Document":
                    bad.append(f"NEXT chain from {nid} ends at {cur}")
    return bad


# expected cell contents, transcribed by hand row by row
IRU = {L.INVOLVING, L.RELATING, L.USES}
AACI = {L.ALLOW, L.AUTHORISE, L.CANNOT, L.INVOLVING}
MCOSB = {L.MANAGE, L.CONTROLLED, L.OWNED, L.SELL, L.BUYS}
ICID = {L.IMPACT, L.CREATE, L.INCREASE, L.DECREASES}
CID = {L.CREATE, L.INCREASE, L.DECREASES}
MED = {L.MUST_ENSURE, L.DECREASES}


def expected_cell(src, dst):
    if dst is T.MIT:
        return MED
    if src is T.MIT:
        return CID if dst is T.RISK else MED
    if src is T.RISK:
        return ICID
    if dst is T.RISK:
        return CID
    if src is T.PERM and dst is T.ACT:
        return {L.ALLOW, L.AUTHORISE, L.INVOLVING}
    if src in (T.PERM, T.ACT, T.DEF):
        return IRU
    if dst in (T.PERM, T.ACT, T.DEF):
        return IRU if src is T.TECH else AACI
    if src is T.FS or (src, dst) == (T.PROD, T.TECH):
        return IRU
    return MCOSB  # ENT, PROD, TECH among ENT/PROD/FS/TECH
