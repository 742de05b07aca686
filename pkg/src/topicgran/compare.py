"""Baseline-restricted classifications and the Adjusted Rand Index."""
from __future__ import annotations

from collections import Counter
from collections.abc import Hashable, Iterable
from dataclasses import dataclass

from .partition import Partition, PartitionError


class DegenerateComparisonError(ValueError):
    """Both partitions are all-singletons or both are one class, and they differ."""


@dataclass(frozen=True)
class ContingencyTable:
    counts: dict[tuple[Hashable, Hashable], int]
    row_sums: dict[Hashable, int]
    col_sums: dict[Hashable, int]
    n: int


def derive_restricted(acplc: Partition, p_prime: Iterable[str]) -> Partition:
    """Restrict a partition to ``p_prime``.

    Classes without any member in ``p_prime`` disappear and the remaining
    ones lose their members outside it, leaving a classification of exactly
    ``p_prime``. Class ids are kept.
    """
    p_prime = frozenset(p_prime)
    missing = p_prime - acplc.nodes
    if missing:
        raise PartitionError(f"{len(missing)} nodes of the restriction set are not classified, e.g. {min(missing)!r}")
    return Partition({node: acplc[node] for node in p_prime})


def contingency(x: Partition, y: Partition) -> ContingencyTable:
    if x.nodes != y.nodes:
        raise PartitionError("partitions cover different object sets")
    counts = Counter((x[node], y[node]) for node in x.assignment)
    return ContingencyTable(
        counts=dict(counts),
        row_sums={cid: len(m) for cid, m in x.classes.items()},
        col_sums={cid: len(m) for cid, m in y.classes.items()},
        n=len(x),
    )


def _pairs(k: int) -> int:
    return k * (k - 1) // 2


def ari(x: Partition, y: Partition) -> float:
    """Adjusted Rand Index, from exact integer pair counts.

    Can be negative when the partitions agree less than expected by chance.
    """
    table = contingency(x, y)
    if table.n < 2:
        raise ValueError("ARI needs at least two objects")
    s_ij = sum(_pairs(c) for c in table.counts.values())
    s_a = sum(_pairs(c) for c in table.row_sums.values())
    s_b = sum(_pairs(c) for c in table.col_sums.values())
    total = _pairs(table.n)
    # numerator and denominator both scaled by 2 * C(n, 2); Python ints keep this exact
    num = 2 * (s_ij * total - s_a * s_b)
    den = (s_a + s_b) * total - 2 * s_a * s_b
    if den == 0:
        if x.same_grouping(y):
            return 1.0
        raise DegenerateComparisonError("ARI is 0/0 for these partitions")
    return num / den
