"""Normalized direct-citation relatedness network, plus pair-relation counts."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import CitationGraph


@dataclass(frozen=True)
class RelatednessNetwork:
    """Undirected weighted network over ``nodes``.

    Edges are stored once per unordered pair as index arrays ``source`` <
    ``target`` into ``nodes`` (sorted pub ids), in lexicographic pair order.
    """

    nodes: tuple[str, ...]
    source: np.ndarray
    target: np.ndarray
    weight: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.weight)

    def index(self) -> dict[str, int]:
        return {pid: i for i, pid in enumerate(self.nodes)}

    def weighted_edges(self):
        for i, j, w in zip(self.source.tolist(), self.target.tolist(), self.weight.tolist()):
            yield self.nodes[i], self.nodes[j], w

    def scaled(self, factor: float) -> RelatednessNetwork:
        return RelatednessNetwork(self.nodes, self.source, self.target, self.weight * factor)

    @classmethod
    def from_edges(cls, nodes, edges) -> RelatednessNetwork:
        """Build from ``(a, b, weight)`` triples; parallel entries for one pair are summed."""
        nodes = tuple(sorted(nodes))
        idx = {pid: i for i, pid in enumerate(nodes)}
        acc: dict[tuple[int, int], float] = {}
        for a, b, w in edges:
            i, j = idx[a], idx[b]
            if i == j:
                raise ValueError(f"self-loop on {a!r}")
            key = (i, j) if i < j else (j, i)
            acc[key] = acc.get(key, 0.0) + float(w)
        keys = sorted(acc)
        src = np.array([k[0] for k in keys], dtype=np.int64)
        dst = np.array([k[1] for k in keys], dtype=np.int64)
        wts = np.array([acc[k] for k in keys], dtype=np.float64)
        return cls(nodes, src, dst, wts)


def build_relatedness(graph: CitationGraph) -> RelatednessNetwork:
    """Each citation i -> j carries 1 / (number of active references of i); mutual citations add up."""
    edges = []
    for citing in graph.publications:
        refs = graph.out_refs(citing)
        if not refs:
            continue
        w = 1.0 / len(refs)
        for cited in sorted(refs):
            edges.append((citing, cited, w))
    return RelatednessNetwork.from_edges(graph.publications.keys(), edges)


def count_coupling_relations(graph: CitationGraph) -> int:
    """Number of bibliographic coupling relations: pairs of publications citing a common publication, with multiplicity."""
    return sum(c * (c - 1) // 2 for c in (len(graph.in_cites(p)) for p in graph.publications))


def count_cocitation_relations(graph: CitationGraph) -> int:
    """Number of co-citation relations: pairs of references occurring together in one reference list."""
    return sum(r * (r - 1) // 2 for r in (len(graph.out_refs(p)) for p in graph.publications))


def write_relatedness(network: RelatednessNetwork, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(["pub_id_a", "pub_id_b", "weight"])
        for a, b, w in network.weighted_edges():
            writer.writerow([a, b, f"{w:.6g}"])
