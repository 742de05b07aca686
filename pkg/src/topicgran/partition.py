"""Logical classifications: every node belongs to exactly one class."""
from __future__ import annotations

import csv
from collections.abc import Hashable, Iterable, Mapping
from pathlib import Path


class PartitionError(ValueError):
    pass


class Partition:
    """Mapping of node id to class id, with a class index kept in sync.

    Instances are treated as immutable once built.
    """

    __slots__ = ("_assignment", "_classes")

    def __init__(self, assignment: Mapping[str, Hashable]):
        self._assignment = dict(assignment)
        classes: dict[Hashable, set[str]] = {}
        for node, cid in self._assignment.items():
            classes.setdefault(cid, set()).add(node)
        self._classes = {cid: frozenset(members) for cid, members in classes.items()}

    @classmethod
    def from_classes(cls, classes: Mapping[Hashable, Iterable[str]] | Iterable[Iterable[str]]) -> Partition:
        if isinstance(classes, Mapping):
            items = classes.items()
        else:
            items = enumerate(classes, start=1)
        assignment: dict[str, Hashable] = {}
        for cid, members in items:
            members = list(members)
            if not members:
                raise PartitionError(f"class {cid!r} is empty")
            for node in members:
                if node in assignment:
                    raise PartitionError(f"node {node!r} assigned to classes {assignment[node]!r} and {cid!r}")
                assignment[node] = cid
        return cls(assignment)

    @classmethod
    def singletons(cls, nodes: Iterable[str]) -> Partition:
        return cls({node: i for i, node in enumerate(sorted(nodes), start=1)})

    @property
    def assignment(self) -> Mapping[str, Hashable]:
        return self._assignment

    @property
    def classes(self) -> Mapping[Hashable, frozenset[str]]:
        return self._classes

    @property
    def nodes(self) -> frozenset[str]:
        return frozenset(self._assignment)

    @property
    def n_classes(self) -> int:
        return len(self._classes)

    def __len__(self) -> int:
        return len(self._assignment)

    def __getitem__(self, node: str) -> Hashable:
        return self._assignment[node]

    def __contains__(self, node: object) -> bool:
        return node in self._assignment

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Partition):
            return NotImplemented
        return self._assignment == other._assignment

    def __repr__(self) -> str:
        return f"Partition(nodes={len(self)}, classes={self.n_classes})"

    def sizes(self) -> list[int]:
        return [len(members) for members in self._classes.values()]

    def same_grouping(self, other: Partition) -> bool:
        """True if both partitions group the same nodes identically, ignoring class ids."""
        if self.nodes != other.nodes:
            return False
        return set(self._classes.values()) == set(other._classes.values())


def sort_and_number_classes(partition: Partition) -> Partition:
    """Renumber classes 1..k by descending size; ties go to the class with the smallest member id."""
    ordered = sorted(partition.classes.values(), key=lambda members: (-len(members), min(members)))
    assignment = {}
    for new_id, members in enumerate(ordered, start=1):
        for node in members:
            assignment[node] = new_id
    return Partition(assignment)


def write_partition(partition: Partition, path: str | Path, canonical: bool = True) -> None:
    if canonical:
        partition = sort_and_number_classes(partition)
    rows = sorted(partition.assignment.items(), key=lambda kv: (kv[1], kv[0]) if canonical else kv[0])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(["pub_id", "class_id"])
        writer.writerows(rows)


def read_partition(path: str | Path) -> Partition:
    assignment: dict[str, str] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter="\t")
        header = next(reader, None)
        # second column may be named class_id or topic_id (ground truth files)
        if header is None or len(header) != 2 or header[0].strip() != "pub_id":
            raise PartitionError(f"{path}: expected header 'pub_id\\tclass_id'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise PartitionError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            node, cid = row
            if node in assignment:
                raise PartitionError(f"{path}:{lineno}: node {node!r} listed twice")
            assignment[node] = cid
    return Partition(assignment)
