"""Stage orchestration: ingest, enrich + tag, link, relate, build.

Each stage can run on its own, reading and writing line-JSON artifacts, or
the whole chain can run in memory. Both routes produce the same dump.
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import yaml

from . import coref as coref_mod
from .corpus import Document, IngestedDocument, Paragraph, ingest_path
from .errors import ConfigError, FormatError, RegKGError, StageError
from .graph import PropertyGraph, build, census, dump_bytes, format_tag_counts
from .linker import Tag, TagOccur, clean_degenerate, find_degenerate, format_degenerate, link
from .relations import RelationEdge, RelationLexicon, extract_relations, load_lexicon
from .tagger import ReferenceTagger, SpanTag, TaggerResources, load_glossary, load_lexicons, load_patterns

log = logging.getLogger(__name__)

ARTIFACT_VERSION = 1
STAGES = ("ingest", "tag", "link", "relate", "build")
_INPUT_OF = {"tag": "corpus", "link": "tagged", "relate": "linked", "build": "related"}
_OUTPUT_OF = {"ingest": "corpus", "tag": "tagged", "link": "linked", "relate": "related"}


# --------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class CorpusSource:
    path: Path
    title: str
    format: str = "md"


@dataclass
class PipelineConfig:
    corpus: list[CorpusSource]
    glossary: Path
    lexicon_dir: Path
    patterns: Path | None = None
    coref_enabled: bool = True
    coref_rules: Path | None = None
    coref_window: int | None = None
    relation_lexicon: Path | None = None
    relation_constraints: Path | None = None
    clean_threshold: int | None = 0
    output: Path = Path("graph.rkgd")
    jobs: int = 1

    def validate(self) -> None:
        if not self.corpus:
            raise ConfigError("config lists no corpus documents")
        titles = [c.title for c in self.corpus]
        if len(set(titles)) != len(titles):
            raise ConfigError("corpus titles must be unique")
        for src in self.corpus:
            if src.format not in ("md", "jsonl"):
                raise ConfigError(f"corpus entry {src.title!r}: format must be 'md' or 'jsonl'")
        paths = [("corpus", c.path) for c in self.corpus] + [
            ("glossary", self.glossary), ("lexicon_dir", self.lexicon_dir), ("patterns", self.patterns),
            ("coref.rules", self.coref_rules), ("relations.lexicon", self.relation_lexicon),
            ("relations.constraints", self.relation_constraints),
        ]
        for name, path in paths:
            if path is not None and not path.exists():
                raise ConfigError(f"{name} path does not exist: {path}")
        if self.clean_threshold is not None and self.clean_threshold < 0:
            raise ConfigError("clean_threshold must be >= 0")
        if self.coref_window is not None and self.coref_window < 0:
            raise ConfigError("coref.window must be >= 0")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")


def _opt_path(base: Path, value) -> Path | None:
    if value is None:
        return None
    if not isinstance(value, str):
        raise ConfigError(f"expected a path string, got {value!r}")
    p = Path(value)
    return p if p.is_absolute() else base / p


def config_from_mapping(data: dict, base: Path = Path(".")) -> PipelineConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    known = {"corpus", "glossary", "lexicon_dir", "patterns", "coref", "relations",
             "clean_threshold", "output", "jobs"}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    for key in ("corpus", "glossary", "lexicon_dir"):
        if key not in data:
            raise ConfigError(f"config is missing {key!r}")
    corpus = []
    for entry in data["corpus"] or []:
        if not isinstance(entry, dict) or "path" not in entry or "title" not in entry:
            raise ConfigError("each corpus entry needs 'path' and 'title'")
        corpus.append(CorpusSource(_opt_path(base, entry["path"]), str(entry["title"]),
                                   entry.get("format", "md")))
    coref = data.get("coref") or {}
    rel = data.get("relations") or {}
    threshold = data.get("clean_threshold", 0)
    cfg = PipelineConfig(
        corpus=corpus,
        glossary=_opt_path(base, data["glossary"]),
        lexicon_dir=_opt_path(base, data["lexicon_dir"]),
        patterns=_opt_path(base, data.get("patterns")),
        coref_enabled=bool(coref.get("enabled", True)),
        coref_rules=_opt_path(base, coref.get("rules")),
        coref_window=coref.get("window"),
        relation_lexicon=_opt_path(base, rel.get("lexicon")),
        relation_constraints=_opt_path(base, rel.get("constraints")),
        clean_threshold=None if threshold is None else int(threshold),
        output=_opt_path(base, data.get("output", "graph.rkgd")),
        jobs=int(data.get("jobs", 1)),
    )
    return cfg


def load_config(path: str | Path, overrides: dict[str, Any] | None = None) -> PipelineConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from None
    cfg = config_from_mapping(data or {}, path.parent)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if not hasattr(cfg, key):
            raise ConfigError(f"unknown override {key!r}")
        setattr(cfg, key, Path(value) if isinstance(getattr(cfg, key), Path) else value)
    cfg.validate()
    return cfg


# --------------------------------------------------------------------------
# shared resources

@dataclass
class Resources:
    tagger: ReferenceTagger
    coref_rules: list[coref_mod.CorefRule]
    vocabulary: dict
    relation_lexicon: RelationLexicon


def load_resources(cfg: PipelineConfig) -> Resources:
    glossary = load_glossary(cfg.glossary)
    lexicons = load_lexicons(cfg.lexicon_dir)
    patterns = load_patterns(cfg.patterns)
    rules = coref_mod.load_rules(cfg.coref_rules) if cfg.coref_enabled else []
    if cfg.coref_window is not None:
        rules = [coref_mod.CorefRule(r.anaphor, r.antecedent_filter, cfg.coref_window) for r in rules]
    vocab = coref_mod.build_vocabulary(lexicons, [g.term for g in glossary])
    return Resources(
        ReferenceTagger(TaggerResources(glossary, lexicons, patterns)),
        rules, vocab, load_lexicon(cfg.relation_lexicon, cfg.relation_constraints),
    )


# process-pool workers read resources from module state set by the initializer
_WORKER: Resources | None = None


def _init_worker(res: Resources) -> None:
    global _WORKER
    _WORKER = res


def _enrich_one(args: tuple[Paragraph, list[Paragraph]]) -> coref_mod.Enrichment:
    para, context = args
    return coref_mod.resolve(para, context, _WORKER.coref_rules, _WORKER.vocabulary)


def _tag_one(para: Paragraph) -> list[SpanTag]:
    return _WORKER.tagger.tag_paragraph(para)


def _relate_one(args: tuple[Paragraph, list[TagOccur]]) -> list[RelationEdge]:
    para, occs = args
    return extract_relations(para, occs, _WORKER.relation_lexicon)


def _map(fn: Callable, items: Sequence, res: Resources, jobs: int) -> list:
    """Order-preserving map, in-process or over a pool."""
    if jobs <= 1 or len(items) < 2:
        _init_worker(res)
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(res,)) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (jobs * 4))))


# --------------------------------------------------------------------------
# stages

def stage_ingest(cfg: PipelineConfig) -> list[IngestedDocument]:
    return [ingest_path(src.path, src.title, src.format) for src in cfg.corpus]


def stage_tag(corpus: list[IngestedDocument], res: Resources, jobs: int = 1):
    """Coreference enrichment followed by tagging of the enriched text."""
    jobs_in = []
    for doc in corpus:
        for i, p in enumerate(doc.paragraphs):
            jobs_in.append((p, list(doc.paragraphs[:i])))
    enrichments = _map(_enrich_one, jobs_in, res, jobs) if res.coref_rules else [
        coref_mod.Enrichment(p.para_id) for p, _ in jobs_in
    ]
    by_id = {e.para_id: e for e in enrichments}
    enriched = []
    for doc in corpus:
        paras = tuple(p.with_enriched(coref_mod.apply(by_id[p.para_id], p.text)) for p in doc.paragraphs)
        enriched.append(IngestedDocument(doc.document, paras))
    paragraphs = [p for doc in enriched for p in doc.paragraphs]
    spans = [s for group in _map(_tag_one, paragraphs, res, jobs) for s in group]
    return enriched, [e for e in enrichments if e.replacements], spans


def stage_link(spans: Sequence[SpanTag]) -> tuple[list[Tag], list[TagOccur]]:
    return link(spans)


def stage_relate(corpus: list[IngestedDocument], occurrences: Sequence[TagOccur], res: Resources,
                 jobs: int = 1) -> list[RelationEdge]:
    by_para: dict[str, list[TagOccur]] = {}
    for o in occurrences:
        by_para.setdefault(o.para_id, []).append(o)
    items = [(p, by_para[p.para_id]) for doc in corpus for p in doc.paragraphs if p.para_id in by_para]
    return [e for group in _map(_relate_one, items, res, jobs) for e in group]


@dataclass
class BuildOutcome:
    graph: PropertyGraph
    degenerate_preview: list[tuple[str, int]]
    cleaned: tuple[int, int]


def stage_build(corpus, tags, occurrences, relations, clean_threshold: int | None) -> BuildOutcome:
    graph = build(corpus, tags, occurrences, relations)
    preview = find_degenerate(graph, 1)
    cleaned = (0, 0)
    if clean_threshold is not None:
        cleaned = clean_degenerate(graph, clean_threshold)
    return BuildOutcome(graph, preview, cleaned)


# --------------------------------------------------------------------------
# artifacts

def _json_line(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":")) + "\n"


@dataclass
class Artifact:
    kind: str
    corpus: list[IngestedDocument] = field(default_factory=list)
    enrichments: list[coref_mod.Enrichment] = field(default_factory=list)
    spans: list[SpanTag] = field(default_factory=list)
    tags: list[Tag] = field(default_factory=list)
    occurrences: list[TagOccur] = field(default_factory=list)
    relations: list[RelationEdge] = field(default_factory=list)

    def records(self) -> Iterable[dict]:
        for doc in self.corpus:
            d = doc.document
            yield {"type": "document", "doc_id": d.doc_id, "title": d.title, "paragraph_count": d.paragraph_count}
            for p in doc.paragraphs:
                yield {"type": "paragraph", "para_id": p.para_id, "doc_id": p.doc_id, "ordinal": p.ordinal,
                       "plevel": p.plevel, "text": p.text, "enriched_text": p.enriched_text}
        for e in self.enrichments:
            yield {"type": "enrichment", **e.to_dict()}
        for s in self.spans:
            yield {"type": "span", **s.to_dict()}
        for t in self.tags:
            yield {"type": "tag", **t.to_dict()}
        for o in self.occurrences:
            yield {"type": "occurrence", **o.to_dict()}
        for r in self.relations:
            yield {"type": "relation", **r.to_dict()}


def write_artifact(art: Artifact, path: str | Path) -> None:
    lines = [_json_line({"artifact": art.kind, "format_version": ARTIFACT_VERSION})]
    lines += [_json_line(r) for r in art.records()]
    _atomic_write(Path(path), "".join(lines).encode("utf-8"))


def read_artifact(path: str | Path, expect: str | None = None) -> Artifact:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise FormatError(f"cannot read artifact {path}: {exc}") from None
    if not lines:
        raise FormatError(f"artifact {path} is empty", 1)
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise FormatError(f"bad artifact header: {exc.msg}", 1) from None
    if not isinstance(header, dict) or header.get("format_version") != ARTIFACT_VERSION:
        raise FormatError(f"unsupported artifact header {lines[0][:80]!r}", 1)
    kind = header.get("artifact")
    if expect is not None and kind != expect:
        raise FormatError(f"expected a {expect!r} artifact, got {kind!r}", 1)
    art = Artifact(kind)
    docs: list[Document] = []
    paras: dict[str, list[Paragraph]] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            rec = json.loads(line)
            rtype = rec.pop("type")
            if rtype == "document":
                docs.append(Document(rec["doc_id"], rec["title"], rec["paragraph_count"]))
                paras[rec["doc_id"]] = []
            elif rtype == "paragraph":
                paras[rec["doc_id"]].append(Paragraph(rec["para_id"], rec["doc_id"], rec["ordinal"], rec["plevel"],
                                                      rec["text"], rec["enriched_text"]))
            elif rtype == "enrichment":
                art.enrichments.append(coref_mod.Enrichment.from_dict(rec))
            elif rtype == "span":
                art.spans.append(SpanTag.from_dict(rec))
            elif rtype == "tag":
                art.tags.append(Tag.from_dict(rec))
            elif rtype == "occurrence":
                art.occurrences.append(TagOccur.from_dict(rec))
            elif rtype == "relation":
                art.relations.append(RelationEdge.from_dict(rec))
            else:
                raise FormatError(f"unknown record type {rtype!r}", lineno)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError, AttributeError) as exc:
            raise FormatError(f"malformed artifact record: {exc}", lineno) from None
        except RegKGError as exc:
            if isinstance(exc, FormatError) and exc.line is not None:
                raise
            raise FormatError(str(exc), lineno) from None
    art.corpus = [IngestedDocument(d, tuple(paras[d.doc_id])) for d in docs]
    return art


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_dump(graph: PropertyGraph, path: str | Path) -> None:
    _atomic_write(Path(path), dump_bytes(graph))


# --------------------------------------------------------------------------
# stage-wise entry points used by the CLI

def _guard(stage: str, fn: Callable, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(stage, exc) from exc


def run_stage(stage: str, cfg: PipelineConfig, input_path: str | Path | None,
              output_path: str | Path) -> None:
    """Run one stage from its input artifact (none for ingest) to ``output_path``."""
    if stage not in STAGES:
        raise ConfigError(f"unknown stage {stage!r}")
    if stage == "ingest":
        corpus = _guard("ingest", stage_ingest, cfg)
        write_artifact(Artifact("corpus", corpus=corpus), output_path)
        return
    if input_path is None:
        raise ConfigError(f"stage {stage!r} needs an input artifact")
    art = _guard(stage, read_artifact, input_path, _INPUT_OF[stage])
    if stage == "build":
        outcome = _guard("build", stage_build, art.corpus, art.tags, art.occurrences, art.relations,
                         cfg.clean_threshold)
        write_dump(outcome.graph, output_path)
        return
    res = _guard(stage, load_resources, cfg)
    if stage == "tag":
        art.corpus, art.enrichments, art.spans = _guard("tag", stage_tag, art.corpus, res, cfg.jobs)
    elif stage == "link":
        art.tags, art.occurrences = _guard("link", stage_link, art.spans)
    elif stage == "relate":
        art.relations = _guard("relate", stage_relate, art.corpus, art.occurrences, res, cfg.jobs)
    art.kind = _OUTPUT_OF[stage]
    write_artifact(art, output_path)


@dataclass
class RunReport:
    timings: dict[str, float]
    census: dict
    tag_counts_table: str
    degenerate_preview: list[tuple[str, int]]
    cleaned: tuple[int, int]
    output: str

    def to_dict(self) -> dict:
        return {
            "timings_seconds": self.timings,
            "census": self.census,
            "degenerate_preview": [list(r) for r in self.degenerate_preview],
            "cleaned": {"nodes_deleted": self.cleaned[0], "edges_deleted": self.cleaned[1]},
            "output": self.output,
        }

    def to_text(self) -> str:
        c = self.census
        lines = ["run report", ""]
        lines += [f"{stage:<8} {secs:.3f}s" for stage, secs in self.timings.items()]
        lines += ["", f"Nodes: {c['total_nodes']}", f"Relationships: {c['total_edges']}"]
        lines += [f"  {k}: {v}" for k, v in c["nodes"].items()]
        lines += [f"  {k}: {v}" for k, v in c["edges"].items()]
        lines += ["", self.tag_counts_table, "", "degenerate tags (lemma length <= 1), before cleanup:",
                  format_degenerate(self.degenerate_preview[:20]),
                  "", f"cleanup deleted {self.cleaned[0]} nodes, {self.cleaned[1]} relationships",
                  f"dump written to {self.output}"]
        return "\n".join(lines) + "\n"


def run_pipeline(cfg: PipelineConfig, report_path: str | Path | None = None) -> RunReport:
    """All stages in memory; the dump is written only if every stage succeeds."""
    cfg.validate()
    timings: dict[str, float] = {}

    def timed(stage: str, fn: Callable, *args):
        t0 = time.perf_counter()
        out = _guard(stage, fn, *args)
        timings[stage] = time.perf_counter() - t0
        log.info("stage %s done in %.3fs", stage, timings[stage])
        return out

    res = timed("load", load_resources, cfg)
    corpus = timed("ingest", stage_ingest, cfg)
    corpus, _, spans = timed("tag", stage_tag, corpus, res, cfg.jobs)
    tags, occs = timed("link", stage_link, spans)
    relations = timed("relate", stage_relate, corpus, occs, res, cfg.jobs)
    outcome = timed("build", stage_build, corpus, tags, occs, relations, cfg.clean_threshold)
    write_dump(outcome.graph, cfg.output)
    c = census(outcome.graph)
    report = RunReport(timings, c.to_dict(), format_tag_counts(c), outcome.degenerate_preview,
                       outcome.cleaned, str(cfg.output))
    if report_path is not None:
        base = Path(report_path)
        _atomic_write(base.with_suffix(".json"),
                      (json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n").encode("utf-8"))
        _atomic_write(base.with_suffix(".txt"), report.to_text().encode("utf-8"))
    return report
