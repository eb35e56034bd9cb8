"""Document and paragraph model, ingestion formats and sentence splitting."""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from .errors import EmptyDocumentError, FormatError, NotFoundError
from .text import default_abbreviations, read_list

FORMAT_VERSION = 1


def _digest(*parts: str) -> str:
    h = hashlib.sha1()
    for part in parts:
        h.update(part.encode("utf-8"))
        h.update(b"\x00")
    return h.hexdigest()[:16]


def document_id(title: str) -> str:
    return "doc:" + _digest(title)


def paragraph_id(title: str, ordinal: int) -> str:
    return "para:" + _digest(title, str(ordinal))


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    paragraph_count: int


@dataclass(frozen=True)
class Paragraph:
    para_id: str
    doc_id: str
    ordinal: int
    plevel: int
    text: str
    enriched_text: str = ""

    def __post_init__(self) -> None:
        if not self.enriched_text:
            object.__setattr__(self, "enriched_text", self.text)

    def with_enriched(self, enriched_text: str) -> "Paragraph":
        return replace(self, enriched_text=enriched_text)


@dataclass(frozen=True)
class IngestedDocument:
    document: Document
    paragraphs: tuple[Paragraph, ...]

    def paragraph(self, para_id: str) -> Paragraph:
        for p in self.paragraphs:
            if p.para_id == para_id:
                return p
        raise NotFoundError(f"paragraph {para_id} not in document {self.document.doc_id}")


@dataclass
class CorpusManifest:
    documents: list[Document] = field(default_factory=list)
    format_version: int = FORMAT_VERSION


# --------------------------------------------------------------------------
# ingestion

_HEADING_RE = re.compile(r"^(#+)(.*)$")


def parse_markdown(lines: Iterable[str]) -> list[tuple[int, str]]:
    """Split heading-marked text into ``(plevel, text)`` units.

    Headings are single-line units. Consecutive body lines form one unit,
    joined by newlines, until a blank line or a heading ends it. Body units
    take the depth of the heading that governs them (0 before any heading).
    """
    units: list[tuple[int, str]] = []
    body: list[str] = []
    level = 0

    def flush() -> None:
        if body:
            units.append((level, "\n".join(body)))
            body.clear()

    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r\n")
        stripped = line.strip()
        if not stripped:
            flush()
            continue
        m = _HEADING_RE.match(stripped)
        if m:
            marks, rest = m.groups()
            if len(marks) > 6:
                raise FormatError(f"heading marker deeper than 6 levels: {marks!r}", lineno)
            if not rest.startswith((" ", "\t")) or not rest.strip():
                raise FormatError(f"malformed heading marker in {stripped!r}", lineno)
            flush()
            level = len(marks) - 1
            units.append((level, rest.strip()))
            continue
        body.append(stripped)
    flush()
    return units


def parse_jsonl(lines: Iterable[str]) -> list[tuple[int, str]]:
    units: list[tuple[int, str]] = []
    for lineno, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON: {exc.msg}", lineno) from None
        if not isinstance(obj, dict) or "text" not in obj or "plevel" not in obj:
            raise FormatError('expected an object with "text" and "plevel"', lineno)
        text, plevel = obj["text"], obj["plevel"]
        if not isinstance(text, str):
            raise FormatError('"text" must be a string', lineno)
        if isinstance(plevel, bool) or not isinstance(plevel, int) or plevel < 0:
            raise FormatError('"plevel" must be a non-negative integer', lineno)
        if text.strip():
            units.append((plevel, text.strip()))
    return units


def ingest_document(
    source: str | Iterable[str], title: str, fmt: str = "md"
) -> IngestedDocument:
    """Build a Document and its ordered paragraphs from ``source``.

    ``source`` is either the whole text or an iterable of lines.
    """
    if not title or not title.strip():
        raise FormatError("document title must be non-empty")
    lines = source.splitlines() if isinstance(source, str) else list(source)
    if fmt == "md":
        units = parse_markdown(lines)
    elif fmt == "jsonl":
        units = parse_jsonl(lines)
    else:
        raise FormatError(f"unknown ingestion format {fmt!r}; expected 'md' or 'jsonl'")
    if not units:
        raise EmptyDocumentError(f"document {title!r} has no content")
    doc = Document(document_id(title), title, len(units))
    paragraphs = tuple(
        Paragraph(paragraph_id(title, i), doc.doc_id, i, plevel, text)
        for i, (plevel, text) in enumerate(units)
    )
    return IngestedDocument(doc, paragraphs)


def ingest_path(path: str | Path, title: str, fmt: str = "md") -> IngestedDocument:
    with open(path, encoding="utf-8") as fh:
        return ingest_document(fh.read(), title, fmt)


# --------------------------------------------------------------------------
# hierarchy

def parent_of(paragraph: Paragraph, corpus: IngestedDocument) -> Paragraph | Document:
    """Nearest preceding paragraph with a strictly smaller plevel, else the document."""
    paras = corpus.paragraphs
    idx = paragraph.ordinal
    if not (0 <= idx < len(paras)) or paras[idx].para_id != paragraph.para_id:
        raise NotFoundError(f"paragraph {paragraph.para_id} not in document {corpus.document.doc_id}")
    for j in range(idx - 1, -1, -1):
        if paras[j].plevel < paragraph.plevel:
            return paras[j]
    return corpus.document


def parent_ids(corpus: IngestedDocument) -> list[str]:
    """parent_of for every paragraph at once, using a monotonic stack."""
    out: list[str] = []
    stack: list[Paragraph] = []
    for p in corpus.paragraphs:
        while stack and stack[-1].plevel >= p.plevel:
            stack.pop()
        out.append(stack[-1].para_id if stack else corpus.document.doc_id)
        stack.append(p)
    return out


# --------------------------------------------------------------------------
# sentence splitting

def load_abbreviations(path: str | Path | None = None) -> frozenset[str]:
    if path is None:
        entries = default_abbreviations()
    else:
        entries = read_list(Path(path).read_text(encoding="utf-8").splitlines())
    return frozenset(e.lower() for e in entries)


_TERMINATOR_RE = re.compile(r"[.;?!]+(?=\s)")
_LIST_MARKER_RE = re.compile(r"^(?:\(?[0-9]{1,3}(?:\.[0-9]+)*\.|\(?[a-z]{1,2}\.|\(?[ivx]{1,4}\.)$",
                             re.IGNORECASE)


def _token_before(text: str, end: int) -> tuple[str, int]:
    start = end
    while start > 0 and not text[start - 1].isspace():
        start -= 1
    return text[start:end], start


def sentence_split(
    text: str, abbreviations: frozenset[str] | None = None
) -> list[tuple[int, int]]:
    """Character spans of the sentences in ``text``.

    Spans carry no leading or trailing whitespace; the gaps between them
    are whitespace only.
    """
    abbrevs = load_abbreviations() if abbreviations is None else abbreviations
    spans: list[tuple[int, int]] = []
    start = 0
    for m in _TERMINATOR_RE.finditer(text):
        end = m.end()
        token, tok_start = _token_before(text, end)
        if m.group().endswith(".") and len(m.group()) == 1:
            if token.lstrip("([\"'").lower() in abbrevs:
                continue
            line_start = text.rfind("\n", 0, tok_start) + 1
            if not text[line_start:tok_start].strip() and _LIST_MARKER_RE.match(token):
                continue
        _append_trimmed(text, start, end, spans)
        start = end
    _append_trimmed(text, start, len(text), spans)
    return spans


def _append_trimmed(text: str, start: int, end: int, spans: list[tuple[int, int]]) -> None:
    while start < end and text[start].isspace():
        start += 1
    while end > start and text[end - 1].isspace():
        end -= 1
    if start < end:
        spans.append((start, end))


def sentence_of(spans: Sequence[tuple[int, int]], start: int, end: int) -> tuple[int, int] | None:
    for s, e in spans:
        if s <= start and end <= e:
            return (s, e)
    return None
