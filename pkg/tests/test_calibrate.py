from __future__ import annotations

import json

import pytest

from topicgran.baseline import BaselineClassification, BaselineParams, build_baseline
from topicgran.calibrate import (
    SweepError,
    SweepParams,
    SweepRecord,
    partition_filename,
    read_sweep,
    run_seed,
    run_sweep,
    select_best,
    sweep_controller,
)
from topicgran.compare import ari, derive_restricted
from topicgran.partition import read_partition
from topicgran.relatedness import build_relatedness


def injected(aris):
    """Scorer replaying a fixed ARI sequence; records every call."""
    calls = []

    def scorer(index, gamma):
        calls.append((index, gamma))
        return SweepRecord(index=index, gamma=gamma, ari=aris[index - 1])

    scorer.calls = calls
    return scorer


def recs(aris, gammas=None):
    gammas = gammas or [0.1 * (k + 1) for k in range(len(aris))]
    return [SweepRecord(index=k + 1, gamma=g, ari=a) for k, (a, g) in enumerate(zip(aris, gammas))]


def test_gamma_grid_exact():
    p = SweepParams(seed=0)
    assert [p.gamma(i) for i in range(1, 7)] == [0.00005, 0.0001, 0.00015, 0.0002, 0.00025, 0.0003]
    assert SweepParams(seed=0, gamma0=0.1, step=0.1).gamma(3) == 0.3


@pytest.mark.parametrize("aris, expected", [([0.1, 0.3, 0.2], 2), ([0.5], 1), ([0.2, 0.2], 1)])
def test_select_best(aris, expected):
    assert select_best(recs(aris)) == expected


def test_select_best_tie_prefers_smaller_gamma_not_position():
    assert select_best(recs([0.2, 0.2], gammas=[0.5, 0.1])) == 2
    with pytest.raises(SweepError):
        select_best([])


def test_controller_reference_sequence():
    scorer = injected([0.132, 0.147, 0.148, 0.145, 0.139, 0.134, 0.2, 0.2])
    result = sweep_controller(scorer, SweepParams(seed=0))
    assert len(result.records) == 6
    assert result.selected_index == 3
    assert result.selected_gamma == 0.00015


def test_controller_strictly_decreasing():
    scorer = injected([0.9, 0.8, 0.7, 0.6, 0.5, 0.4])
    result = sweep_controller(scorer, SweepParams(seed=0, stop_after_decreases=3))
    assert len(result.records) == 4
    assert result.selected_index == 1


def test_controller_plateau_resets_count():
    # an equal value is not a decrease and resets the run of sub-maximum values
    scorer = injected([0.5, 0.4, 0.4, 0.5, 0.3, 0.3, 0.3, 0.9])
    result = sweep_controller(scorer, SweepParams(seed=0, stop_after_decreases=3))
    assert len(result.records) == 7
    assert result.selected_index == 1


def test_controller_max_runs_and_grid():
    scorer = injected([0.1 * k for k in range(1, 20)])
    result = sweep_controller(scorer, SweepParams(seed=0, max_runs=5, gamma0=0.001, step=0.002))
    assert len(result.records) == 5 and result.selected_index == 5
    gammas = [g for _, g in scorer.calls]
    assert gammas == [0.001, 0.003, 0.005, 0.007, 0.009]
    steps = {round(b - a, 12) for a, b in zip(gammas, gammas[1:])}
    assert steps == {0.002}


def test_params_validated():
    with pytest.raises(ValueError):
        SweepParams(seed=0, gamma0=0)
    with pytest.raises(ValueError):
        SweepParams(seed=0, stop_after_decreases=0)


def test_run_seed_distinct_and_stable():
    seeds = [run_seed(7, i) for i in range(1, 50)]
    assert len(set(seeds)) == len(seeds)
    assert seeds == [run_seed(7, i) for i in range(1, 50)]
    assert run_seed(7, 1) != run_seed(8, 1)


def test_partition_filename():
    assert partition_filename(0.00015) == "partition_gamma_0.00015.tsv"
    assert partition_filename(0.00005) == "partition_gamma_0.00005.tsv"
    assert partition_filename(2.0) == "partition_gamma_2.tsv"


@pytest.fixture(scope="module")
def small_sweep_inputs(small_planted):
    _, _, graph = small_planted
    baseline = build_baseline(graph, BaselineParams(2015, seed=0))
    return graph, build_relatedness(graph), baseline


SMALL_PARAMS = SweepParams(seed=3, gamma0=0.002, step=0.002, stop_after_decreases=2, max_runs=8,
                           report_min_size=50)


def test_sweep_on_planted_corpus(tmp_path, small_sweep_inputs):
    graph, net, baseline = small_sweep_inputs
    result, partitions = run_sweep(net, baseline, SMALL_PARAMS, out_dir=tmp_path)
    assert len(result.records) >= 3
    assert [r.index for r in result.records] == list(range(1, len(result.records) + 1))
    assert all(a.gamma < b.gamma for a, b in zip(result.records, result.records[1:]))

    # re-score every persisted partition independently of the sweep
    baseline_partition = baseline.as_partition()
    rescored = {}
    for r in result.records:
        p = read_partition(tmp_path / result.partition_files[r.index])
        assert p.nodes == frozenset(graph.publications)
        assert p.same_grouping(partitions[r.index])
        rescored[r.index] = ari(baseline_partition, derive_restricted(p, baseline.p_prime))
        assert rescored[r.index] == r.ari
        assert r.n_classes == p.n_classes
        assert r.n_classes_ge_min == sum(1 for m in p.classes.values() if len(m) >= 50)
    assert rescored[result.selected_index] == max(rescored.values())
    assert result.selected.ari >= 0.9

    again = read_sweep(tmp_path / "sweep.json")
    assert again == result
    assert json.loads((tmp_path / "sweep.json").read_text())["selected_index"] == result.selected_index


def test_sweep_reproducible_and_worker_independent(tmp_path, small_sweep_inputs):
    _, net, baseline = small_sweep_inputs
    run_sweep(net, baseline, SMALL_PARAMS, out_dir=tmp_path / "a")
    run_sweep(net, baseline, SMALL_PARAMS, out_dir=tmp_path / "b", workers=2)
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == sorted(p.name for p in (tmp_path / "b").iterdir())
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_sweep_rejects_foreign_baseline(small_sweep_inputs):
    _, net, _ = small_sweep_inputs
    foreign = BaselineClassification({"S_x": {"not-in-corpus"}})
    with pytest.raises(SweepError):
        run_sweep(net, foreign, SMALL_PARAMS)
