from __future__ import annotations

import hashlib
import json
import subprocess
import sys

import pytest

from topicgran.cli import Run, Settings, build_parser, main
from topicgran.partition import read_partition

SWEEP_TOML = """
[baseline]
baseline_year = 2015
seed = 11

[sweep]
seed = 12
gamma0 = 0.002
step = 0.002
stop_after_decreases = 2
max_runs = 8
"""


@pytest.fixture
def corpus_config(tmp_path, small_planted):
    data_dir, _, _ = small_planted
    cfg = tmp_path / "run.toml"
    cfg.write_text(f'[corpus]\npublications = "{data_dir / "publications.tsv"}"\n'
                   f'citations = "{data_dir / "citations.tsv"}"\n' + SWEEP_TOML)
    return cfg, data_dir


def test_ari_identical_files_prints_one(small_planted, capsys):
    data_dir, _, _ = small_planted
    gt = str(data_dir / "ground_truth.tsv")
    assert main(["ari", gt, gt]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["ari"] == 1.0 and out["classes_x"] == 4


def test_error_gives_json_and_nonzero_exit(tmp_path, capsys):
    assert main(["ari", str(tmp_path / "missing.tsv"), str(tmp_path / "missing.tsv")]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["command"] == "ari" and err["error"] == "FileNotFoundError"


def test_missing_seed_is_an_error(tmp_path, small_planted, capsys):
    data_dir, _, _ = small_planted
    code = main(["baseline", "--publications", str(data_dir / "publications.tsv"),
                 "--citations", str(data_dir / "citations.tsv"), "--baseline-year", "2015", "-o", str(tmp_path)])
    assert code == 1
    assert "seed" in json.loads(capsys.readouterr().err)["message"]
    assert not (tmp_path / "baseline.tsv").exists()


def test_flag_overrides_config(tmp_path):
    args = build_parser().parse_args(["baseline", "--seed", "5"])
    s = Settings(args, {"baseline": {"seed": 9, "baseline_year": 2015}})
    assert s.get("baseline", "seed") == 5
    assert s.get("baseline", "baseline_year") == 2015
    assert s.get("baseline", "min_refs", default=100) == 100


def test_threads_env_override(monkeypatch):
    args = build_parser().parse_args(["sweep", "--threads", "2"])
    assert Settings(args, {}).threads == 2
    monkeypatch.setenv("TOPICGRAN_THREADS", "3")
    assert Settings(args, {}).threads == 3


def test_abort_removes_outputs(tmp_path):
    args = build_parser().parse_args(["ingest", "-o", str(tmp_path)])
    run = Run("ingest", Settings(args, {}))
    out = run.output(tmp_path / "partial.tsv")
    out.write_text("x")
    run.abort()
    assert not out.exists()


def test_synthgen_cluster_derive_distribute(tmp_path, capsys):
    data = tmp_path / "data"
    assert main(["synthgen", "--seed", "2", "--n-topics", "3", "--pubs-per-topic", "110", "-o", str(data)]) == 0
    manifest = json.loads((data / "manifest_synthgen.json").read_text())
    for path, digest in manifest["outputs"].items():
        with open(path, "rb") as fh:
            assert hashlib.sha256(fh.read()).hexdigest() == digest

    corpus = ["--publications", str(data / "publications.tsv"), "--citations", str(data / "citations.tsv")]
    assert main(["cluster", *corpus, "--gamma", "0.003", "--seed", "1", "--export-relatedness",
                 "-o", str(tmp_path / "c")]) == 0
    partition = read_partition(tmp_path / "c" / "partition.tsv")
    assert (tmp_path / "c" / "relatedness.tsv").exists()
    assert partition.n_classes >= 3

    assert main(["baseline", *corpus, "--baseline-year", "2015", "--seed", "4", "-o", str(tmp_path / "b")]) == 0
    assert main(["derive", "--partition", str(tmp_path / "c" / "partition.tsv"),
                 "--baseline", str(tmp_path / "b" / "baseline.tsv"), "-o", str(tmp_path / "d")]) == 0
    restricted = read_partition(tmp_path / "d" / "partition_restricted.tsv")
    assert restricted.nodes < partition.nodes

    ids = tmp_path / "ids.txt"
    ids.write_text("".join(f"{p}\n" for p in sorted(partition.nodes)[:40]))
    assert main(["distribute", "--pubs", str(ids), "--partition", str(tmp_path / "c" / "partition.tsv"),
                 "--top-n", "2", "-o", str(tmp_path / "x")]) == 0
    rows = (tmp_path / "x" / "distribution.tsv").read_text().splitlines()
    assert rows[0] == "rank\tclass_id\tcount\tshare" and len(rows) <= 3


def _files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if not p.name.startswith("manifest_")}


def test_pipeline_equals_individual_stages(tmp_path, corpus_config):
    cfg, _ = corpus_config
    piped = tmp_path / "pipe"
    assert main(["pipeline", "--config", str(cfg), "-o", str(piped)]) == 0
    for name in ("sweep.json", "labels.tsv", "baseline.tsv", "stats.json", "histogram.tsv", "alluvial.tsv"):
        assert (piped / name).exists()

    solo = tmp_path / "solo"
    c = ["--config", str(cfg), "-o", str(solo)]
    assert main(["ingest", *c]) == 0
    pruned = ["--publications", str(solo / "corpus_publications.tsv"),
              "--citations", str(solo / "corpus_citations.tsv")]
    assert main(["baseline", *c, *pruned]) == 0
    assert main(["sweep", *c, *pruned, "--baseline", str(solo / "baseline.tsv")]) == 0
    sweep = json.loads((solo / "sweep.json").read_text())
    sel = sweep["selected_index"]
    files = sweep["partition_files"]
    ranked = [files[str(sel)]] + [files[str(k)] for k in (sel - 1, sel + 1) if str(k) in files]
    stats_args = [a for f in ranked for a in ("--partition", str(solo / f))]
    assert main(["stats", *c, *stats_args, "--baseline", str(solo / "baseline.tsv")]) == 0
    assert main(["label", *c, *pruned, "--partition", str(solo / files[str(sel)])]) == 0
    assert _files(piped) == _files(solo)


def test_console_script_help():
    done = subprocess.run([sys.executable, "-m", "topicgran.cli", "--help"], capture_output=True, text=True)
    assert done.returncode == 0
    for name in ("ingest", "baseline", "cluster", "derive", "ari", "sweep", "stats", "label", "distribute",
                 "synthgen", "pipeline"):
        assert name in done.stdout
