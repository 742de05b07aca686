"""Descriptive outputs for a classification: size distributions, alluvial data, keyword labels."""
from __future__ import annotations

import math
from collections import Counter
from collections.abc import Hashable, Iterable, Sequence
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction

import numpy as np

from .baseline import BaselineClassification
from .corpus import CitationGraph
from .partition import Partition, PartitionError


@dataclass
class Histogram:
    bin_width: int
    bins: dict[int, int]
    sizes: list[int]


@dataclass(frozen=True)
class WeightedSizeStats:
    mean: float
    median: float
    p10: float
    p90: float

    def as_dict(self) -> dict:
        return {"mean": self.mean, "median": self.median, "p10": self.p10, "p90": self.p90}


@dataclass
class ClassLabel:
    class_id: Hashable
    n_members: int
    top_keywords: list[tuple[str, float]] = field(default_factory=list)
    flagged: bool = False

    @property
    def label(self) -> str:
        return "//".join(kw for kw, _ in self.top_keywords)


@dataclass
class AverageClassDistribution:
    d: int
    mean_count: float
    n_selected: int
    rank_averages: list[float]


def class_size_histogram(partition: Partition, bin_width: int = 1) -> Histogram:
    """Number of classes per size bin; a bin is keyed by the smallest size it holds."""
    if len(partition) == 0:
        raise PartitionError("empty partition")
    if bin_width < 1:
        raise ValueError("bin_width must be >= 1")
    sizes = sorted(partition.sizes())
    bins = Counter((s - 1) // bin_width * bin_width + 1 for s in sizes)
    return Histogram(bin_width, dict(sorted(bins.items())), sizes)


def _weighted_percentile(values: np.ndarray, weights: np.ndarray, q: float) -> float:
    # linear interpolation between order statistics of the expanded multiset
    cum = np.cumsum(weights)
    pos = q / 100.0 * (cum[-1] - 1)
    lo = math.floor(pos)
    frac = pos - lo
    v_lo = values[np.searchsorted(cum, lo, side="right")]
    if frac == 0:
        return float(v_lo)
    v_hi = values[np.searchsorted(cum, lo + 1, side="right")]
    return float(v_lo + (v_hi - v_lo) * frac)


def weighted_size_stats(partition: Partition | Sequence[int]) -> WeightedSizeStats:
    """Class-size statistics where each class counts once per member.

    Equivalent to the distribution, over all classified objects, of the size
    of the class each object sits in. Percentiles interpolate linearly
    between order statistics of that multiset.
    """
    sizes = partition.sizes() if isinstance(partition, Partition) else list(partition)
    if not sizes:
        raise PartitionError("empty partition")
    values = np.array(sorted(sizes), dtype=np.int64)
    total = int(values.sum())
    mean = float(Fraction(int((values * values).sum()), total))
    return WeightedSizeStats(
        mean=mean,
        median=_weighted_percentile(values, values, 50),
        p10=_weighted_percentile(values, values, 10),
        p90=_weighted_percentile(values, values, 90),
    )


def rank_size_table(partitions: Sequence[Partition]) -> list[list[tuple[int, int]]]:
    """Per partition, ``(rank, size)`` with sizes in descending order."""
    if not partitions:
        raise ValueError("need at least one partition")
    out = []
    for k, p in enumerate(partitions):
        if len(p) == 0:
            raise PartitionError(f"partition {k} is empty")
        out.append(list(enumerate(sorted(p.sizes(), reverse=True), start=1)))
    return out


def _round_half_up(x: Fraction) -> int:
    return int((Decimal(x.numerator) / Decimal(x.denominator)).quantize(Decimal(1), rounding=ROUND_HALF_UP))


def average_class_distribution(baseline: BaselineClassification, acplc: Partition) -> AverageClassDistribution:
    """Rank-averaged spread of baseline classes over the clustering's classes.

    d is the mean number of clustering classes a baseline class is spread
    over, rounded half-up. For each baseline class spread over exactly d
    classes, member counts per clustering class are sorted descending and the
    counts are then averaged rank by rank. An empty rank list means no
    baseline class hit exactly d.
    """
    missing = baseline.p_prime - acplc.nodes
    if missing:
        raise PartitionError(f"{len(missing)} baseline members are not classified")
    spreads = {sid: Counter(acplc[m] for m in members) for sid, members in baseline.classes.items()}
    mean_count = Fraction(sum(len(c) for c in spreads.values()), len(spreads))
    d = _round_half_up(mean_count)
    selected = [sorted(c.values(), reverse=True) for c in spreads.values() if len(c) == d]
    if not selected:
        return AverageClassDistribution(d, float(mean_count), 0, [])
    sums = np.sum(np.array(selected, dtype=np.int64), axis=0)
    averages = [float(Fraction(int(s), len(selected))) for s in sums]
    return AverageClassDistribution(d, float(mean_count), len(selected), averages)


def chi_square_2x2(o11: int, o12: int, o21: int, o22: int) -> float:
    """Pearson chi-square of a 2x2 table without continuity correction; 0 when a margin is empty."""
    n = o11 + o12 + o21 + o22
    den = (o11 + o12) * (o21 + o22) * (o11 + o21) * (o12 + o22)
    if den == 0:
        return 0.0
    return n * (o11 * o22 - o12 * o21) ** 2 / den


def chi_square_labels(graph: CitationGraph, partition: Partition, top_k: int = 3,
                      min_class_size: int = 1) -> list[ClassLabel]:
    """Label classes with their ``top_k`` author keywords ranked by chi-square.

    The 2x2 table for class c and keyword w counts publications in or out of
    c against having or lacking w, over every classified publication.
    Keywords absent from c are never used. Classes without any keyword get
    an empty, flagged label.
    """
    nodes = [pid for pid in partition.assignment if pid in graph]
    if len(nodes) != len(partition):
        raise PartitionError("partition contains publications missing from the corpus")
    n = len(nodes)
    kw_total: Counter = Counter()
    for pid in nodes:
        kw_total.update(graph[pid].keywords)

    labels = []
    for cid, members in sorted(partition.classes.items(), key=lambda kv: (-len(kv[1]), str(kv[0]))):
        size = len(members)
        if size < min_class_size:
            continue
        in_class: Counter = Counter()
        for pid in members:
            in_class.update(graph[pid].keywords)
        scored = []
        for kw, o11 in in_class.items():
            o12 = size - o11
            o21 = kw_total[kw] - o11
            o22 = n - size - o21
            scored.append((kw, chi_square_2x2(o11, o12, o21, o22)))
        scored.sort(key=lambda t: (-t[1], t[0]))
        labels.append(ClassLabel(cid, size, scored[:top_k], flagged=not scored))
    return labels


@dataclass(frozen=True)
class DistributionRow:
    class_id: Hashable
    count: int
    share: float


def distribution_into_classes(pub_set: Iterable[str], partition: Partition, top_n: int | None = None) -> list[DistributionRow]:
    """How a set of publications spreads over classes, most frequent class first.

    Shares are relative to the publications of ``pub_set`` that the partition
    classifies; unclassified ones are ignored.
    """
    pubs = set(pub_set)
    if not pubs:
        raise ValueError("empty publication set")
    counts = Counter(partition[p] for p in pubs if p in partition)
    assigned = sum(counts.values())
    if assigned == 0:
        raise PartitionError("none of the publications are classified")
    rows = sorted(counts.items(), key=lambda kv: (-kv[1], str(kv[0])))
    if top_n is not None:
        rows = rows[:top_n]
    return [DistributionRow(cid, c, c / assigned) for cid, c in rows]


def classes_at_least(partition: Partition, min_size: int) -> int:
    return sum(1 for s in partition.sizes() if s >= min_size)

