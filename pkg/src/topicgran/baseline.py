"""Baseline classification built from synthesis articles and their active references.

Each surviving synthesis article heads one class holding the publications it
cites inside the corpus. Articles with strongly overlapping reference lists
are grouped and reduced to one random representative per group, and
references still shared by several representatives are kept only with the
representative whose other references they are most coupled to.
"""
from __future__ import annotations

import csv
import json
import logging
import random
from collections import Counter, defaultdict
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .corpus import CitationGraph
from .partition import Partition

log = logging.getLogger(__name__)

SYNTHESIS_DOC_TYPES = ("article", "review")


class BaselineError(Exception):
    pass


@dataclass
class BaselineParams:
    baseline_year: int
    seed: int
    min_refs: int = 100
    min_active_ratio: float = 0.8
    overlap_threshold: float = 0.30


@dataclass(frozen=True)
class SynthesisCandidate:
    pub_id: str
    year: int
    raw_ref_count: int
    active_refs: frozenset[str]


@dataclass
class BaselineReport:
    candidates: int = 0
    groups: int = 0
    excluded_by_grouping: int = 0
    shared_refs_resolved: int = 0
    ties_dropped: int = 0
    classes: int = 0
    members: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class BaselineClassification:
    classes: dict[str, frozenset[str]]
    report: BaselineReport = field(default_factory=BaselineReport)

    def __post_init__(self):
        self.classes = {sid: frozenset(refs) for sid, refs in sorted(self.classes.items())}
        seen: set[str] = set()
        for sid, refs in self.classes.items():
            if not refs:
                raise BaselineError(f"class {sid!r} is empty")
            if seen & refs:
                raise BaselineError(f"class {sid!r} overlaps another class")
            seen |= refs
        self._p_prime = frozenset(seen)

    @property
    def p_prime(self) -> frozenset[str]:
        return self._p_prime

    def as_partition(self) -> Partition:
        return Partition.from_classes(self.classes)


def select_candidates(graph: CitationGraph, params: BaselineParams) -> list[SynthesisCandidate]:
    out = []
    for pid, pub in graph.publications.items():
        if pub.doc_type not in SYNTHESIS_DOC_TYPES or pub.year != params.baseline_year:
            continue
        if pub.raw_ref_count < params.min_refs:
            continue
        refs = graph.out_refs(pid)
        # exact rational comparison so 80/100 passes a 0.8 threshold
        if Fraction(len(refs), pub.raw_ref_count) < Fraction(str(params.min_active_ratio)):
            continue
        out.append(SynthesisCandidate(pid, pub.year, pub.raw_ref_count, refs))
    return out


def overlap(s1: SynthesisCandidate, s2: SynthesisCandidate) -> Fraction:
    """Mean of the shares of each article's active references that the other also cites."""
    a1, a2 = len(s1.active_refs), len(s2.active_refs)
    if a1 == 0 or a2 == 0:
        raise BaselineError("overlap is undefined for an empty active reference set")
    shared = len(s1.active_refs & s2.active_refs)
    return (Fraction(shared, a1) + Fraction(shared, a2)) / 2


def _overlapping_pairs(candidates: Sequence[SynthesisCandidate]) -> Counter:
    """Shared-reference counts for every candidate pair citing at least one common publication."""
    citers: dict[str, list[int]] = defaultdict(list)
    for idx, cand in enumerate(candidates):
        for ref in cand.active_refs:
            citers[ref].append(idx)
    shared: Counter = Counter()
    for idxs in citers.values():
        for x in range(len(idxs)):
            for y in range(x + 1, len(idxs)):
                shared[idxs[x], idxs[y]] += 1
    return shared


def group_overlapping(candidates: Sequence[SynthesisCandidate],
                      overlap_threshold: float = 0.30) -> list[list[SynthesisCandidate]]:
    """Connected components of the graph linking candidates whose overlap reaches the threshold.

    Linking is transitive, so two candidates end up together whenever a chain
    of above-threshold pairs joins them. Groups are returned sorted by their
    smallest member id, members sorted by id.
    """
    candidates = sorted(candidates, key=lambda c: c.pub_id)
    threshold = Fraction(str(overlap_threshold))
    parent = list(range(len(candidates)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for (i, j), m in _overlapping_pairs(candidates).items():
        y = (Fraction(m, len(candidates[i].active_refs)) + Fraction(m, len(candidates[j].active_refs))) / 2
        if y >= threshold:
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)

    groups: dict[int, list[SynthesisCandidate]] = defaultdict(list)
    for idx, cand in enumerate(candidates):
        groups[find(idx)].append(cand)
    return [groups[root] for root in sorted(groups)]


def select_representatives(groups: Sequence[Sequence[SynthesisCandidate]], rng_seed: int) -> list[SynthesisCandidate]:
    rng = random.Random(rng_seed)
    reps = []
    for group in groups:
        if not group:
            raise BaselineError("empty group")
        reps.append(rng.choice(sorted(group, key=lambda c: c.pub_id)))
    return reps


def coupling_strength(graph: CitationGraph, a: str, b: str) -> int:
    return len(graph.out_refs(a) & graph.out_refs(b))


def reference_similarity(graph: CitationGraph, ref: str, reference_list: Iterable[str],
                         coverage: Counter | None = None) -> int:
    """Summed coupling strength between ``ref`` and every other publication of ``reference_list``.

    ``coverage`` may hold, for each publication x, how many members of the
    list cite x; it turns the sum into a single pass over ``ref``'s own
    references.
    """
    if coverage is None:
        return sum(coupling_strength(graph, ref, other) for other in reference_list if other != ref)
    own = graph.out_refs(ref)
    # ref itself is in the list and covers each of its own references once
    return sum(coverage[x] for x in own) - len(own)


def resolve_shared_references(representatives: Sequence[SynthesisCandidate], graph: CitationGraph,
                              report: BaselineReport | None = None) -> BaselineClassification:
    """Make the classes disjoint.

    Similarities are computed against the original reference lists and all
    removals are applied together, so the outcome does not depend on the
    order in which shared references are visited.
    """
    report = report if report is not None else BaselineReport()
    lists = {rep.pub_id: rep.active_refs for rep in representatives}
    owners: dict[str, list[str]] = defaultdict(list)
    for sid in sorted(lists):
        for ref in lists[sid]:
            owners[ref].append(sid)
    shared = {ref: sids for ref, sids in owners.items() if len(sids) > 1}

    coverage: dict[str, Counter] = {}
    for sid in sorted({sid for sids in shared.values() for sid in sids}):
        cov: Counter = Counter()
        for ref in lists[sid]:
            cov.update(graph.out_refs(ref))
        coverage[sid] = cov

    removals: dict[str, set[str]] = defaultdict(set)
    ties = 0
    for ref in sorted(shared):
        sids = shared[ref]
        sims = {sid: reference_similarity(graph, ref, lists[sid], coverage[sid]) for sid in sids}
        best = max(sims.values())
        winners = [sid for sid in sids if sims[sid] == best]
        if len(winners) > 1:
            ties += 1
            for sid in sids:
                removals[sid].add(ref)
        else:
            for sid in sids:
                if sid != winners[0]:
                    removals[sid].add(ref)

    classes = {}
    for sid, refs in lists.items():
        kept = refs - removals.get(sid, set())
        if kept:
            classes[sid] = kept
    report.shared_refs_resolved = len(shared)
    report.ties_dropped = ties
    report.classes = len(classes)
    report.members = sum(len(refs) for refs in classes.values())
    return BaselineClassification(classes, report)


def build_baseline(graph: CitationGraph, params: BaselineParams) -> BaselineClassification:
    candidates = [c for c in select_candidates(graph, params) if c.active_refs]
    if not candidates:
        raise BaselineError(
            f"no synthesis candidates for year {params.baseline_year} "
            f"(min_refs={params.min_refs}, min_active_ratio={params.min_active_ratio})")
    groups = group_overlapping(candidates, params.overlap_threshold)
    reps = select_representatives(groups, params.seed)
    report = BaselineReport(candidates=len(candidates), groups=len(groups),
                            excluded_by_grouping=len(candidates) - len(reps))
    baseline = resolve_shared_references(reps, graph, report)
    log.info("baseline: %s", report.as_dict())
    return baseline


def write_baseline(baseline: BaselineClassification, path: str | Path, report_path: str | Path | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(["synthesis_id", "ref_id"])
        for sid, refs in baseline.classes.items():
            for ref in sorted(refs):
                writer.writerow([sid, ref])
    if report_path is not None:
        with open(report_path, "w", encoding="utf-8") as fh:
            json.dump(baseline.report.as_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def read_baseline(path: str | Path, report_path: str | Path | None = None) -> BaselineClassification:
    classes: dict[str, set[str]] = defaultdict(set)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter="\t")
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["synthesis_id", "ref_id"]:
            raise BaselineError(f"{path}: expected header 'synthesis_id\\tref_id'")
        for row in reader:
            if not row:
                continue
            if len(row) != 2:
                raise BaselineError(f"{path}: malformed row {row!r}")
            classes[row[0]].add(row[1])
    report = BaselineReport()
    if report_path is not None and Path(report_path).exists():
        with open(report_path, encoding="utf-8") as fh:
            report = BaselineReport(**json.load(fh))
    return BaselineClassification(dict(classes), report)
