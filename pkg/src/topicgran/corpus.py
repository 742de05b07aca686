"""Loading, validation and indexing of the publication corpus and its citation edges."""
from __future__ import annotations

import csv
import logging
import re
from collections.abc import Iterable
from dataclasses import dataclass, replace
from pathlib import Path
from types import MappingProxyType
from typing import Mapping, Optional

log = logging.getLogger(__name__)

DOC_TYPES = ("article", "review", "other")
PUBLICATION_COLUMNS = ["pub_id", "year", "doc_type", "raw_ref_count", "journal_id", "keywords"]
CITATION_COLUMNS = ["citing_id", "cited_id"]

_WS = re.compile(r"\s+")


class CorpusError(Exception):
    pass


def normalize_keyword(keyword: str) -> str:
    return _WS.sub(" ", keyword.strip()).upper()


@dataclass(frozen=True)
class Publication:
    pub_id: str
    year: int
    doc_type: str
    raw_ref_count: int = 0
    keywords: tuple[str, ...] = ()
    journal_id: Optional[str] = None

    def __post_init__(self):
        if self.doc_type not in DOC_TYPES:
            raise CorpusError(f"{self.pub_id}: unknown doc_type {self.doc_type!r}")
        if self.raw_ref_count < 0:
            raise CorpusError(f"{self.pub_id}: negative raw_ref_count")


@dataclass
class CorpusConfig:
    strict: bool = True
    year_min: int = 1980
    year_max: int = 2017


@dataclass
class LoadReport:
    publications: int = 0
    edges: int = 0
    malformed_publications: int = 0
    malformed_citations: int = 0
    self_citations: int = 0
    duplicate_edges: int = 0
    unresolved_edges: int = 0
    raw_ref_count_raised: int = 0
    pruned_isolated: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


class CitationGraph:
    """Publications plus directed within-corpus citation edges.

    ``out_refs(p)`` are the active references of ``p`` (cited publications
    present in the corpus), ``in_cites(p)`` the publications citing ``p``.
    The graph is not mutated after construction.
    """

    def __init__(self, publications: Iterable[Publication], edges: Iterable[tuple[str, str]],
                 report: LoadReport | None = None):
        pubs = {}
        for pub in publications:
            if pub.pub_id in pubs:
                raise CorpusError(f"duplicate pub_id {pub.pub_id!r}")
            pubs[pub.pub_id] = pub
        out: dict[str, set[str]] = {pid: set() for pid in pubs}
        inc: dict[str, set[str]] = {pid: set() for pid in pubs}
        n_edges = 0
        for citing, cited in edges:
            if citing == cited:
                raise CorpusError(f"self-citation {citing!r}")
            if citing not in pubs or cited not in pubs:
                raise CorpusError(f"edge ({citing!r}, {cited!r}) has an endpoint outside the corpus")
            if cited in out[citing]:
                raise CorpusError(f"duplicate edge ({citing!r}, {cited!r})")
            out[citing].add(cited)
            inc[cited].add(citing)
            n_edges += 1
        for pid, refs in out.items():
            if len(refs) > pubs[pid].raw_ref_count:
                raise CorpusError(f"{pid}: {len(refs)} active references exceed raw_ref_count {pubs[pid].raw_ref_count}")
        self._pubs = MappingProxyType(dict(sorted(pubs.items())))
        self._out = {pid: frozenset(s) for pid, s in out.items()}
        self._in = {pid: frozenset(s) for pid, s in inc.items()}
        self.n_edges = n_edges
        self.report = report if report is not None else LoadReport(publications=len(pubs), edges=n_edges)

    @property
    def publications(self) -> Mapping[str, Publication]:
        return self._pubs

    def __len__(self) -> int:
        return len(self._pubs)

    def __contains__(self, pub_id: object) -> bool:
        return pub_id in self._pubs

    def __getitem__(self, pub_id: str) -> Publication:
        try:
            return self._pubs[pub_id]
        except KeyError:
            raise KeyError(f"unknown publication {pub_id!r}") from None

    def out_refs(self, pub_id: str) -> frozenset[str]:
        self[pub_id]
        return self._out[pub_id]

    def in_cites(self, pub_id: str) -> frozenset[str]:
        self[pub_id]
        return self._in[pub_id]

    def degree(self, pub_id: str) -> int:
        return len(self._out[pub_id]) + len(self._in[pub_id])

    def edges(self) -> Iterable[tuple[str, str]]:
        """Edges in sorted (citing, cited) order."""
        for citing in self._pubs:
            for cited in sorted(self._out[citing]):
                yield citing, cited

    def edge_set(self) -> set[tuple[str, str]]:
        return set(self.edges())


def _parse_publication(row: list[str], config: CorpusConfig) -> Publication:
    if len(row) != len(PUBLICATION_COLUMNS):
        raise CorpusError(f"expected {len(PUBLICATION_COLUMNS)} columns, got {len(row)}")
    pub_id, year, doc_type, raw_refs, journal_id, keywords = row
    pub_id = pub_id.strip()
    if not pub_id:
        raise CorpusError("empty pub_id")
    try:
        year_i = int(year)
        raw_i = int(raw_refs)
    except ValueError as exc:
        raise CorpusError(f"non-integer field: {exc}") from None
    if not config.year_min <= year_i <= config.year_max:
        raise CorpusError(f"year {year_i} outside [{config.year_min}, {config.year_max}]")
    kws = []
    for kw in keywords.split("|"):
        kw = normalize_keyword(kw)
        if kw and kw not in kws:
            kws.append(kw)
    return Publication(
        pub_id=pub_id,
        year=year_i,
        doc_type=doc_type.strip().lower(),
        raw_ref_count=raw_i,
        keywords=tuple(kws),
        journal_id=journal_id.strip() or None,
    )


def _check_header(header: list[str] | None, expected: list[str], path) -> None:
    if header is None or [h.strip() for h in header] != expected:
        raise CorpusError(f"{path}: header must be {' '.join(expected)!r}, got {header!r}")


def load_corpus(publications_file: str | Path, citations_file: str | Path,
                config: CorpusConfig | None = None) -> CitationGraph:
    """Read and validate the two corpus TSV files.

    In strict mode any malformed row or dangling edge aborts with
    :class:`CorpusError`; in lenient mode such rows are skipped and counted
    in ``graph.report``. Self-citations and duplicate edges are always
    dropped and counted.
    """
    config = config or CorpusConfig()
    report = LoadReport()
    pubs: dict[str, Publication] = {}

    with open(publications_file, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE)
        _check_header(next(reader, None), PUBLICATION_COLUMNS, publications_file)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                pub = _parse_publication(row, config)
                if pub.pub_id in pubs:
                    raise CorpusError(f"duplicate pub_id {pub.pub_id!r}")
            except CorpusError as exc:
                if config.strict:
                    raise CorpusError(f"{publications_file}:{lineno}: {exc}") from None
                report.malformed_publications += 1
                log.warning("%s:%d skipped: %s", publications_file, lineno, exc)
                continue
            pubs[pub.pub_id] = pub

    edges: set[tuple[str, str]] = set()
    with open(citations_file, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE)
        _check_header(next(reader, None), CITATION_COLUMNS, citations_file)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2 or not row[0].strip() or not row[1].strip():
                if config.strict:
                    raise CorpusError(f"{citations_file}:{lineno}: malformed citation row {row!r}")
                report.malformed_citations += 1
                continue
            citing, cited = row[0].strip(), row[1].strip()
            if citing == cited:
                report.self_citations += 1
                continue
            if citing not in pubs or cited not in pubs:
                if config.strict:
                    raise CorpusError(f"{citations_file}:{lineno}: unresolvable endpoint in ({citing}, {cited})")
                report.unresolved_edges += 1
                continue
            if (citing, cited) in edges:
                report.duplicate_edges += 1
                continue
            edges.add((citing, cited))

    active = {}
    for citing, _ in edges:
        active[citing] = active.get(citing, 0) + 1
    for pid, count in sorted(active.items()):
        if count > pubs[pid].raw_ref_count:
            if config.strict:
                raise CorpusError(f"{pid}: {count} active references exceed raw_ref_count {pubs[pid].raw_ref_count}")
            report.raw_ref_count_raised += 1
            pubs[pid] = replace(pubs[pid], raw_ref_count=count)

    report.publications = len(pubs)
    report.edges = len(edges)
    for name in ("self_citations", "duplicate_edges", "unresolved_edges", "raw_ref_count_raised"):
        if getattr(report, name):
            log.info("%s: %d", name, getattr(report, name))
    return CitationGraph(pubs.values(), sorted(edges), report)


def prune_isolated(graph: CitationGraph) -> tuple[CitationGraph, int]:
    """Drop publications with no citation relation to any other publication."""
    keep = [pub for pid, pub in graph.publications.items() if graph.degree(pid) > 0]
    removed = len(graph) - len(keep)
    report = LoadReport(**graph.report.as_dict())
    report.pruned_isolated += removed
    report.publications = len(keep)
    return CitationGraph(keep, graph.edges(), report), removed


def active_reference_ratio(graph: CitationGraph, pub_id: str) -> float:
    pub = graph[pub_id]
    if pub.raw_ref_count == 0:
        return 0.0
    return len(graph.out_refs(pub_id)) / pub.raw_ref_count


def write_corpus(graph: CitationGraph, publications_file: str | Path, citations_file: str | Path) -> None:
    with open(publications_file, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n", quoting=csv.QUOTE_NONE)
        writer.writerow(PUBLICATION_COLUMNS)
        for pub in graph.publications.values():
            writer.writerow([pub.pub_id, pub.year, pub.doc_type, pub.raw_ref_count,
                             pub.journal_id or "", "|".join(pub.keywords)])
    with open(citations_file, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n", quoting=csv.QUOTE_NONE)
        writer.writerow(CITATION_COLUMNS)
        writer.writerows(graph.edges())

