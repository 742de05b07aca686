"""Resolution-parameterized clustering with the smart local moving (SLM) scheme.

The quality of a partition is

    Q = sum over same-class pairs {i, j} of (a_ij - gamma)

with a_ij = 0 for unlinked pairs. Larger ``gamma`` makes every extra pair
inside a class more expensive and therefore yields finer partitions.

Internally nodes carry a size (the number of original nodes they stand for)
and a self weight (the relatedness already inside them), so the same local
moving routine runs unchanged on aggregated networks.
"""
from __future__ import annotations

import heapq
import logging
import random
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .partition import Partition, PartitionError, sort_and_number_classes
from .relatedness import RelatednessNetwork

log = logging.getLogger(__name__)

__all__ = [
    "QualityParams",
    "quality",
    "local_moving",
    "slm_cluster",
    "sort_and_number_classes",
]


@dataclass
class QualityParams:
    gamma: float
    seed: int = 0
    max_iterations: int = 20
    min_improvement: float = 1e-12

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.min_improvement < 0:
            raise ValueError("min_improvement must be non-negative")


class _Graph:
    __slots__ = ("n", "size", "self_weight", "nbrs", "wts")

    def __init__(self, n, size, self_weight, nbrs, wts):
        self.n = n
        self.size = size
        self.self_weight = self_weight
        self.nbrs = nbrs
        self.wts = wts

    @classmethod
    def from_network(cls, network: RelatednessNetwork) -> _Graph:
        n = network.n_nodes
        nbrs = [[] for _ in range(n)]
        wts = [[] for _ in range(n)]
        for i, j, w in zip(network.source.tolist(), network.target.tolist(), network.weight.tolist()):
            nbrs[i].append(j)
            wts[i].append(w)
            nbrs[j].append(i)
            wts[j].append(w)
        return cls(n, [1] * n, [0.0] * n, nbrs, wts)

    def induced(self, members: Sequence[int]) -> _Graph:
        local = {v: k for k, v in enumerate(members)}
        nbrs, wts = [], []
        for v in members:
            nb, wt = [], []
            for u, w in zip(self.nbrs[v], self.wts[v]):
                k = local.get(u)
                if k is not None:
                    nb.append(k)
                    wt.append(w)
            nbrs.append(nb)
            wts.append(wt)
        return _Graph(len(members), [self.size[v] for v in members],
                      [self.self_weight[v] for v in members], nbrs, wts)

    def aggregate(self, labels: Sequence[int], k: int) -> _Graph:
        size = [0] * k
        self_weight = [0.0] * k
        links: list[dict[int, float]] = [{} for _ in range(k)]
        for v in range(self.n):
            c = labels[v]
            size[c] += self.size[v]
            self_weight[c] += self.self_weight[v]
            row = links[c]
            for u, w in zip(self.nbrs[v], self.wts[v]):
                d = labels[u]
                if d == c:
                    if u > v:
                        self_weight[c] += w
                else:
                    row[d] = row.get(d, 0.0) + w
        nbrs = [sorted(row) for row in links]
        wts = [[links[c][d] for d in nbrs[c]] for c in range(k)]
        return _Graph(k, size, self_weight, nbrs, wts)

    def quality(self, labels: Sequence[int], gamma: float) -> float:
        internal = sum(self.self_weight)
        for v in range(self.n):
            c = labels[v]
            for u, w in zip(self.nbrs[v], self.wts[v]):
                if u > v and labels[u] == c:
                    internal += w
        sizes: dict[int, int] = {}
        for v in range(self.n):
            sizes[labels[v]] = sizes.get(labels[v], 0) + self.size[v]
        pairs = sum(s * (s - 1) // 2 for s in sizes.values())
        return internal - gamma * pairs


def _relabel(labels: Sequence[int]) -> tuple[list[int], int]:
    """Consecutive labels in order of first appearance."""
    seen: dict[int, int] = {}
    out = []
    for c in labels:
        if c not in seen:
            seen[c] = len(seen)
        out.append(seen[c])
    return out, len(seen)


def _local_moving(g: _Graph, labels: list[int], gamma: float, rng: random.Random,
                  min_improvement: float) -> tuple[list[int], bool]:
    """Move single nodes to the best class until a full pass changes nothing.

    ``labels`` must use ids in ``range(g.n)``. Moving node v (size s) from
    class A to class B changes quality by

        k(v, B) - k(v, A \\ v) - gamma * s * (n_B - (n_A - s))

    where k(v, S) is the relatedness between v and the members of S.
    """
    n = g.n
    labels = list(labels)
    csize = [0] * n
    for v in range(n):
        csize[labels[v]] += g.size[v]
    empty = [c for c in range(n) if csize[c] == 0]
    heapq.heapify(empty)
    order = list(range(n))
    nbrs, wts, size = g.nbrs, g.wts, g.size
    changed = False
    while True:
        rng.shuffle(order)
        moved = False
        for v in order:
            a = labels[v]
            sv = size[v]
            k: dict[int, float] = {}
            for u, w in zip(nbrs[v], wts[v]):
                c = labels[u]
                k[c] = k.get(c, 0.0) + w
            leave = gamma * sv * (csize[a] - sv) - k.pop(a, 0.0)
            candidates = sorted(k)
            if csize[a] > sv and empty:
                # only an empty class can beat staying put without any links
                candidates.append(empty[0])
                candidates.sort()
            best, best_gain = a, 0.0
            for c in candidates:
                gain = k.get(c, 0.0) - gamma * sv * csize[c] + leave
                if gain > best_gain:
                    best, best_gain = c, gain
            if best != a and best_gain > min_improvement:
                if csize[best] == 0:
                    heapq.heappop(empty)
                labels[v] = best
                csize[a] -= sv
                csize[best] += sv
                if csize[a] == 0:
                    heapq.heappush(empty, a)
                moved = True
        if not moved:
            return labels, changed
        changed = True


def _smart_local_moving(g: _Graph, labels: list[int], gamma: float, rng: random.Random,
                        min_improvement: float, depth: int, max_depth: int) -> list[int]:
    labels, _ = _local_moving(g, labels, gamma, rng, min_improvement)
    if depth >= max_depth:
        return labels
    labels, k = _relabel(labels)
    if k == g.n:
        return labels

    members: list[list[int]] = [[] for _ in range(k)]
    for v in range(g.n):
        members[labels[v]].append(v)
    sub = [0] * g.n
    n_sub = 0
    for group in members:
        if len(group) == 1:
            sub[group[0]] = n_sub
            n_sub += 1
            continue
        sg = g.induced(group)
        sub_labels, _ = _local_moving(sg, list(range(sg.n)), gamma, rng, min_improvement)
        sub_labels, m = _relabel(sub_labels)
        for v, s in zip(group, sub_labels):
            sub[v] = n_sub + s
        n_sub += m
    if n_sub == g.n:
        return labels

    agg = g.aggregate(sub, n_sub)
    agg_labels = [0] * n_sub
    for v in range(g.n):
        agg_labels[sub[v]] = labels[v]
    agg_labels = _smart_local_moving(agg, agg_labels, gamma, rng, min_improvement, depth + 1, max_depth)
    return [agg_labels[sub[v]] for v in range(g.n)]


def _to_labels(network: RelatednessNetwork, partition: Partition | None) -> list[int]:
    if partition is None:
        return list(range(network.n_nodes))
    if partition.nodes != frozenset(network.nodes):
        raise PartitionError("partition does not cover exactly the network's nodes")
    ids: dict = {}
    labels = []
    for node in network.nodes:
        cid = partition[node]
        if cid not in ids:
            ids[cid] = len(ids)
        labels.append(ids[cid])
    return labels


def _to_partition(network: RelatednessNetwork, labels: Sequence[int]) -> Partition:
    return sort_and_number_classes(Partition(dict(zip(network.nodes, labels))))


def quality(network: RelatednessNetwork, partition: Partition, gamma: float) -> float:
    """Sum over classes of (internal relatedness - gamma * number of internal pairs)."""
    labels = np.asarray(_to_labels(network, partition), dtype=np.int64)
    same = labels[network.source] == labels[network.target]
    internal = float(network.weight[same].sum())
    counts = np.bincount(labels)
    pairs = int((counts * (counts - 1) // 2).sum())
    return internal - gamma * pairs


def local_moving(network: RelatednessNetwork, initial: Partition | None = None, gamma: float = 1.0,
                 seed: int = 0, min_improvement: float = 1e-12) -> Partition:
    """Node-level moves only, starting from ``initial`` (singletons by default)."""
    g = _Graph.from_network(network)
    labels, _ = _local_moving(g, _to_labels(network, initial), gamma, random.Random(seed), min_improvement)
    return _to_partition(network, labels)


def slm_cluster(network: RelatednessNetwork, params: QualityParams, initial: Partition | None = None) -> Partition:
    """Run SLM iterations until quality stops improving or ``max_iterations`` is hit.

    The returned partition is node-move optimal on ``network``: no single
    node can change class and raise quality by more than
    ``params.min_improvement``.
    """
    if network.n_nodes == 0:
        raise ValueError("empty network")
    g = _Graph.from_network(network)
    rng = random.Random(params.seed)
    labels = _to_labels(network, initial)
    q = g.quality(labels, params.gamma)
    for it in range(params.max_iterations):
        new = _smart_local_moving(g, labels, params.gamma, rng, params.min_improvement,
                                  depth=0, max_depth=params.max_iterations)
        q_new = g.quality(new, params.gamma)
        log.debug("SLM iteration %d: Q %.12g -> %.12g", it + 1, q, q_new)
        improved = q_new - q > params.min_improvement
        if q_new >= q:
            labels, q = new, q_new
        if not improved:
            break
    labels, _ = _local_moving(g, labels, params.gamma, rng, params.min_improvement)
    return _to_partition(network, labels)
