"""Synthetic corpora with planted topics, for end-to-end checks of the pipeline."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .corpus import CITATION_COLUMNS, PUBLICATION_COLUMNS


class InfeasibleSpecError(ValueError):
    pass


@dataclass
class PlantedCorpusSpec:
    n_topics: int = 10
    pubs_per_topic: int = 200
    p_intra: float = 0.05
    p_inter: float = 0.0005
    n_synthesis_per_topic: int = 3
    refs_per_synthesis: int = 100
    synthesis_focus: float = 0.95
    synthesis_external_refs: int = 10
    keyword_vocab_per_topic: int = 5
    generic_vocab: int = 20
    keywords_per_pub: tuple[int, int] = (1, 3)
    keyword_noise: float = 0.15
    external_refs_mean: float = 3.0
    year_end: int = 2015
    year_span: int = 10
    size_skew: Optional[float] = None
    seed: int = 0

    def validate(self) -> None:
        if min(self.n_topics, self.pubs_per_topic, self.n_synthesis_per_topic, self.refs_per_synthesis,
               self.keyword_vocab_per_topic, self.year_span) < 1:
            raise InfeasibleSpecError("all counts must be positive")
        if not self.p_intra > self.p_inter >= 0 or self.p_intra > 1:
            raise InfeasibleSpecError("need 1 >= p_intra > p_inter >= 0")
        if not 0 < self.synthesis_focus <= 1:
            raise InfeasibleSpecError("synthesis_focus must be in (0, 1]")
        own = math.ceil(self.refs_per_synthesis * self.synthesis_focus)
        if own > min(self.topic_sizes()):
            raise InfeasibleSpecError(
                f"synthesis articles need {own} references inside their topic but the smallest topic "
                f"has {min(self.topic_sizes())} publications")
        if self.refs_per_synthesis - own > sum(self.topic_sizes()) - min(self.topic_sizes()):
            raise InfeasibleSpecError("not enough publications outside a topic for off-topic references")
        raw = self.synthesis_raw_refs()
        if raw < 100 or self.refs_per_synthesis / raw < 0.8:
            raise InfeasibleSpecError(
                f"synthesis articles would carry {raw} raw references with {self.refs_per_synthesis} active; "
                "need at least 100 raw and 80% active")

    def synthesis_raw_refs(self) -> int:
        return self.refs_per_synthesis + self.synthesis_external_refs

    def topic_sizes(self) -> list[int]:
        if self.size_skew is None:
            return [self.pubs_per_topic] * self.n_topics
        # discrete power law over topic rank, rescaled so the mean stays pubs_per_topic
        raw = np.arange(1, self.n_topics + 1, dtype=float) ** -self.size_skew
        sizes = np.maximum(1, np.round(raw / raw.mean() * self.pubs_per_topic)).astype(int)
        return sizes.tolist()


@dataclass
class PlantedCorpus:
    publications: list[list]
    citations: list[tuple[str, str]]
    ground_truth: dict[str, int]
    synthesis_ids: list[str]
    vocab: dict[int, list[str]]


def topic_keyword(topic: int, k: int) -> str:
    return f"TOPIC {topic} TERM {k}"


def build_planted_corpus(spec: PlantedCorpusSpec) -> PlantedCorpus:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    sizes = spec.topic_sizes()
    width = len(str(sum(sizes) + spec.n_topics * spec.n_synthesis_per_topic))

    ids, topics = [], []
    for t, size in enumerate(sizes, start=1):
        for _ in range(size):
            ids.append(f"P{len(ids) + 1:0{width}d}")
            topics.append(t)
    n = len(ids)
    topics_arr = np.array(topics)
    year0 = spec.year_end - spec.year_span + 1
    years = rng.integers(year0, spec.year_end + 1, size=n)

    # one Bernoulli draw per unordered pair; later publication cites the earlier one
    iu, ju = np.triu_indices(n, k=1)
    same = topics_arr[iu] == topics_arr[ju]
    prob = np.where(same, spec.p_intra, spec.p_inter)
    hit = rng.random(len(iu)) < prob
    iu, ju = iu[hit], ju[hit]
    flip = rng.random(len(iu)) < 0.5
    later_i = (years[iu] > years[ju]) | ((years[iu] == years[ju]) & flip)
    citing = np.where(later_i, iu, ju)
    cited = np.where(later_i, ju, iu)
    citations = sorted(zip((ids[c] for c in citing), (ids[c] for c in cited)))
    out_deg = np.bincount(citing, minlength=n)

    vocab = {t: [topic_keyword(t, k) for k in range(1, spec.keyword_vocab_per_topic + 1)] for t in range(1, spec.n_topics + 1)}
    generic = [f"GENERIC TERM {k}" for k in range(1, spec.generic_vocab + 1)]

    def keywords(t: int) -> str:
        lo, hi = spec.keywords_per_pub
        chosen = []
        for _ in range(int(rng.integers(lo, hi + 1))):
            if generic and rng.random() < spec.keyword_noise:
                kw = generic[int(rng.integers(len(generic)))]
            else:
                kw = vocab[t][int(rng.integers(len(vocab[t])))]
            if kw not in chosen:
                chosen.append(kw)
        return "|".join(chosen)

    publications = []
    for k in range(n):
        raw = int(out_deg[k] + rng.poisson(spec.external_refs_mean))
        publications.append([ids[k], int(years[k]), "article", raw, f"J{topics[k]}", keywords(topics[k])])
    ground_truth = dict(zip(ids, topics))

    members = {t: np.flatnonzero(topics_arr == t) for t in range(1, spec.n_topics + 1)}
    own = math.ceil(spec.refs_per_synthesis * spec.synthesis_focus)
    synthesis_ids = []
    next_id = n + 1
    for t in range(1, spec.n_topics + 1):
        others = np.flatnonzero(topics_arr != t)
        for _ in range(spec.n_synthesis_per_topic):
            sid = f"S{next_id:0{width}d}"
            next_id += 1
            refs = rng.choice(members[t], size=own, replace=False).tolist()
            refs += rng.choice(others, size=spec.refs_per_synthesis - own, replace=False).tolist()
            citations.extend((sid, ids[r]) for r in sorted(refs))
            publications.append([sid, spec.year_end, "review", spec.synthesis_raw_refs(), f"J{t}", keywords(t)])
            ground_truth[sid] = t
            synthesis_ids.append(sid)
    citations.sort()
    return PlantedCorpus(publications, citations, ground_truth, synthesis_ids, vocab)


def generate(spec: PlantedCorpusSpec, out_dir: str | Path) -> tuple[Path, Path, Path]:
    """Write publications.tsv, citations.tsv and ground_truth.tsv into ``out_dir``."""
    corpus = build_planted_corpus(spec)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pub_path, cit_path, gt_path = out_dir / "publications.tsv", out_dir / "citations.tsv", out_dir / "ground_truth.tsv"
    with open(pub_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(PUBLICATION_COLUMNS)
        writer.writerows(corpus.publications)
    with open(cit_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(CITATION_COLUMNS)
        writer.writerows(corpus.citations)
    with open(gt_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(["pub_id", "topic_id"])
        writer.writerows(sorted(corpus.ground_truth.items()))
    return pub_path, cit_path, gt_path
