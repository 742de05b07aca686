"""Resolution sweep: cluster at increasing gamma, score each result against the baseline, keep the best."""
from __future__ import annotations

import json
import logging
import math
from collections.abc import Callable
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .analytics import classes_at_least, weighted_size_stats
from .baseline import BaselineClassification
from .cluster import QualityParams, slm_cluster
from .compare import ari, derive_restricted
from .partition import Partition, PartitionError, write_partition
from .relatedness import RelatednessNetwork

log = logging.getLogger(__name__)


class SweepError(Exception):
    pass


@dataclass
class SweepParams:
    seed: int
    gamma0: float = 0.00005
    step: float = 0.00005
    stop_after_decreases: int = 3
    max_runs: int = 20
    report_min_size: int = 50
    max_iterations: int = 20
    min_improvement: float = 1e-12

    def __post_init__(self):
        if not (self.gamma0 > 0 and self.step > 0):
            raise ValueError("gamma0 and step must be positive")
        if self.stop_after_decreases < 1 or self.max_runs < 1:
            raise ValueError("stop_after_decreases and max_runs must be >= 1")

    def gamma(self, index: int) -> float:
        """Resolution of run ``index`` (1-based), computed from the grid rather than accumulated."""
        return float(f"{self.gamma0 + (index - 1) * self.step:.12g}")


@dataclass
class SweepRecord:
    index: int
    gamma: float
    ari: float
    n_classes: int = 0
    n_classes_ge_min: int = 0
    class_size_stats: Optional[dict] = None


@dataclass
class SweepResult:
    records: list[SweepRecord]
    selected_index: int
    selected_gamma: float
    partition_files: dict[int, str] = field(default_factory=dict)

    @property
    def selected(self) -> SweepRecord:
        return self.records[self.selected_index - 1]

    def to_json(self) -> dict:
        return {
            "records": [asdict(r) for r in self.records],
            "selected_index": self.selected_index,
            "selected_gamma": self.selected_gamma,
            "partition_files": {str(k): v for k, v in sorted(self.partition_files.items())},
        }


def select_best(records: list[SweepRecord]) -> int:
    """1-based position of the highest-ARI record; ties go to the smaller gamma."""
    if not records:
        raise SweepError("no records")
    best = min(range(len(records)), key=lambda k: (-records[k].ari, records[k].gamma))
    return best + 1


def run_seed(master_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([master_seed, index]).generate_state(1)[0])


def sweep_controller(scorer: Callable[[int, float], SweepRecord], params: SweepParams) -> SweepResult:
    """Walk the gamma grid, stopping once ``stop_after_decreases`` consecutive runs fall below the best so far.

    ``scorer(index, gamma)`` produces the record of one run; the production
    scorer clusters and compares, tests may inject a fixed ARI sequence.
    """
    records: list[SweepRecord] = []
    best = -math.inf
    below = 0
    for index in range(1, params.max_runs + 1):
        record = scorer(index, params.gamma(index))
        records.append(record)
        log.info("run %d gamma=%.6g ari=%.6g", index, record.gamma, record.ari)
        if record.ari > best:
            best, below = record.ari, 0
        elif record.ari < best:
            below += 1
        else:
            below = 0
        if below >= params.stop_after_decreases:
            break
    selected = select_best(records)
    return SweepResult(records, selected, records[selected - 1].gamma)


def _cluster_run(network: RelatednessNetwork, baseline_partition: Partition, p_prime: frozenset,
                 params: SweepParams, index: int, gamma: float) -> tuple[SweepRecord, Partition]:
    qp = QualityParams(gamma=gamma, seed=run_seed(params.seed, index),
                       max_iterations=params.max_iterations, min_improvement=params.min_improvement)
    partition = slm_cluster(network, qp)
    score = ari(baseline_partition, derive_restricted(partition, p_prime))
    record = SweepRecord(
        index=index,
        gamma=gamma,
        ari=score,
        n_classes=partition.n_classes,
        n_classes_ge_min=classes_at_least(partition, params.report_min_size),
        class_size_stats=weighted_size_stats(partition).as_dict(),
    )
    return record, partition


class ClusterScorer:
    """Production scorer: cluster at gamma, restrict to the baseline's members, compute ARI.

    With ``workers > 1`` upcoming grid points are clustered ahead of time in a
    process pool; results are still consumed strictly in grid order, so the
    outcome does not depend on the number of workers.
    """

    def __init__(self, network: RelatednessNetwork, baseline: BaselineClassification, params: SweepParams,
                 workers: int = 1):
        missing = baseline.p_prime - frozenset(network.nodes)
        if missing:
            raise SweepError(f"{len(missing)} baseline members are not in the network, e.g. {min(missing)!r}")
        self.network = network
        self.baseline_partition = baseline.as_partition()
        self.p_prime = baseline.p_prime
        self.params = params
        self.workers = max(1, workers)
        self.partitions: dict[int, Partition] = {}
        self._records: dict[int, SweepRecord] = {}

    def _run(self, index: int) -> tuple[SweepRecord, Partition]:
        return _cluster_run(self.network, self.baseline_partition, self.p_prime, self.params,
                            index, self.params.gamma(index))

    def __call__(self, index: int, gamma: float) -> SweepRecord:
        if index not in self._records:
            last = min(index + self.workers, self.params.max_runs + 1)
            todo = range(index, last)
            if self.workers == 1:
                results = [self._run(index)]
            else:
                with ProcessPoolExecutor(max_workers=self.workers) as pool:
                    results = list(pool.map(self._run, todo))
            for record, partition in results:
                self._records[record.index] = record
                self.partitions[record.index] = partition
        return self._records[index]


def partition_filename(gamma: float) -> str:
    # fixed-point so names never switch to exponent notation
    text = f"{gamma:.12f}".rstrip("0").rstrip(".")
    return f"partition_gamma_{text}.tsv"


def run_sweep(network: RelatednessNetwork, baseline: BaselineClassification, params: SweepParams,
              out_dir: str | Path | None = None, workers: int = 1,
              scorer: Callable[[int, float], SweepRecord] | None = None) -> tuple[SweepResult, dict[int, Partition]]:
    """Full sweep; returns the result and the partition of every executed run.

    When ``out_dir`` is given each run's partition and ``sweep.json`` are
    written there.
    """
    cluster_scorer = None
    if scorer is None:
        cluster_scorer = ClusterScorer(network, baseline, params, workers)
        scorer = cluster_scorer
    result = sweep_controller(scorer, params)
    partitions = {}
    if cluster_scorer is not None:
        partitions = {r.index: cluster_scorer.partitions[r.index] for r in result.records}
    for index, partition in partitions.items():
        if partition.nodes != frozenset(network.nodes):
            raise PartitionError(f"run {index} does not classify every node")
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for record in result.records:
            if record.index in partitions:
                name = partition_filename(record.gamma)
                write_partition(partitions[record.index], out_dir / name)
                result.partition_files[record.index] = name
        write_sweep(result, out_dir / "sweep.json")
    return result, partitions


def write_sweep(result: SweepResult, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(result.to_json(), fh, indent=2)
        fh.write("\n")


def read_sweep(path: str | Path) -> SweepResult:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    records = [SweepRecord(**r) for r in data["records"]]
    files = {int(k): v for k, v in data.get("partition_files", {}).items()}
    return SweepResult(records, data["selected_index"], data["selected_gamma"], files)
