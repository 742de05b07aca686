"""Command-line entry point: ``topicgran <subcommand> [flags]``."""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import Any

from . import __version__
from .analytics import (
    average_class_distribution,
    chi_square_labels,
    class_size_histogram,
    classes_at_least,
    distribution_into_classes,
    rank_size_table,
    weighted_size_stats,
)
from .baseline import BaselineParams, build_baseline, read_baseline, write_baseline
from .calibrate import SweepParams, partition_filename, read_sweep, run_sweep
from .cluster import QualityParams, slm_cluster
from .compare import ari, derive_restricted
from .corpus import CorpusConfig, load_corpus, prune_isolated, write_corpus
from .partition import read_partition, write_partition
from .relatedness import build_relatedness, write_relatedness
from .synthgen import PlantedCorpusSpec, generate

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("topicgran")


class ConfigError(Exception):
    pass


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Settings:
    """Flag values layered over a TOML config: flags win, then ``[section] key``, then the default."""

    def __init__(self, args: argparse.Namespace, config: dict):
        self.args = args
        self.config = config

    def get(self, section: str, key: str, default: Any = None, required: bool = False):
        value = getattr(self.args, key, None)
        if value is None:
            value = self.config.get(section, {}).get(key)
        if value is None:
            if required:
                raise ConfigError(f"missing required setting '{key}' (flag --{key.replace('_', '-')} "
                                  f"or [{section}] {key} in the config file)")
            value = default
        return value

    def path(self, section: str, key: str, required: bool = True, must_exist: bool = True) -> Path | None:
        value = self.get(section, key, required=required)
        if value is None:
            return None
        p = Path(value)
        if must_exist and not p.exists():
            raise ConfigError(f"{key}: {p} does not exist")
        return p

    @property
    def out_dir(self) -> Path:
        out = Path(self.get("output", "out_dir", default="."))
        out.mkdir(parents=True, exist_ok=True)
        return out

    @property
    def threads(self) -> int:
        env = os.environ.get("TOPICGRAN_THREADS")
        if env:
            return max(1, int(env))
        return max(1, int(self.get("run", "threads", default=1)))


class Run:
    """Tracks one subcommand's inputs, outputs and timings; writes the manifest or cleans up on failure."""

    def __init__(self, command: str, settings: Settings):
        self.command = command
        self.settings = settings
        self.inputs: list[Path] = []
        self.outputs: list[Path] = []
        self.params: dict = {}
        self.timings: dict[str, float] = {}
        self._t0 = time.perf_counter()

    def input(self, path: Path) -> Path:
        self.inputs.append(Path(path))
        return Path(path)

    def output(self, path: Path) -> Path:
        self.outputs.append(Path(path))
        return Path(path)

    def timed(self, name: str):
        run = self

        class _Timer:
            def __enter__(self):
                self.t = time.perf_counter()

            def __exit__(self, *exc):
                run.timings[name] = time.perf_counter() - self.t

        return _Timer()

    def finish(self) -> Path:
        self.timings["total"] = time.perf_counter() - self._t0
        manifest = {
            "command": self.command,
            "version": __version__,
            "params": self.params,
            "inputs": {str(p): _sha256(p) for p in self.inputs},
            "outputs": {str(p): _sha256(p) for p in self.outputs if p.exists()},
            "timings_seconds": self.timings,
        }
        path = self.settings.out_dir / f"manifest_{self.command}.json"
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path

    def abort(self) -> None:
        for p in self.outputs:
            if p.exists() and p.is_file():
                p.unlink()


# ---------------------------------------------------------------- subcommands

def _corpus_config(s: Settings) -> CorpusConfig:
    strict = s.get("corpus", "strict", default=True)
    return CorpusConfig(strict=bool(strict), year_min=int(s.get("corpus", "year_min", default=1980)),
                        year_max=int(s.get("corpus", "year_max", default=2017)))


def _load_pruned(s: Settings, run: Run):
    pubs = run.input(s.path("corpus", "publications"))
    cits = run.input(s.path("corpus", "citations"))
    graph = load_corpus(pubs, cits, _corpus_config(s))
    graph, _ = prune_isolated(graph)
    return graph


def cmd_ingest(s: Settings, run: Run) -> dict:
    pubs = run.input(s.path("corpus", "publications"))
    cits = run.input(s.path("corpus", "citations"))
    config = _corpus_config(s)
    run.params = {"strict": config.strict, "year_min": config.year_min, "year_max": config.year_max}
    with run.timed("load"):
        graph = load_corpus(pubs, cits, config)
    graph, removed = prune_isolated(graph)
    out = s.out_dir
    pub_out, cit_out = run.output(out / "corpus_publications.tsv"), run.output(out / "corpus_citations.tsv")
    write_corpus(graph, pub_out, cit_out)
    report = run.output(out / "ingest_report.json")
    with open(report, "w", encoding="utf-8") as fh:
        json.dump(graph.report.as_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    log.info("ingested %d publications, %d edges (%d isolated removed)", len(graph), graph.n_edges, removed)
    return {"publications": pub_out, "citations": cit_out}


def _baseline_params(s: Settings) -> BaselineParams:
    return BaselineParams(
        baseline_year=int(s.get("baseline", "baseline_year", required=True)),
        seed=int(s.get("baseline", "seed", required=True)),
        min_refs=int(s.get("baseline", "min_refs", default=100)),
        min_active_ratio=float(s.get("baseline", "min_active_ratio", default=0.8)),
        overlap_threshold=float(s.get("baseline", "overlap_threshold", default=0.30)),
    )


def cmd_baseline(s: Settings, run: Run) -> dict:
    params = _baseline_params(s)
    run.params = vars(params).copy()
    graph = _load_pruned(s, run)
    with run.timed("build"):
        baseline = build_baseline(graph, params)
    out = s.out_dir
    path, report = run.output(out / "baseline.tsv"), run.output(out / "baseline_report.json")
    write_baseline(baseline, path, report)
    return {"baseline": path}


def _quality_params(s: Settings) -> QualityParams:
    return QualityParams(
        gamma=float(s.get("cluster", "gamma", required=True)),
        seed=int(s.get("cluster", "seed", required=True)),
        max_iterations=int(s.get("cluster", "max_iterations", default=20)),
        min_improvement=float(s.get("cluster", "min_improvement", default=1e-12)),
    )


def cmd_cluster(s: Settings, run: Run) -> dict:
    params = _quality_params(s)
    run.params = vars(params).copy()
    graph = _load_pruned(s, run)
    network = build_relatedness(graph)
    out = s.out_dir
    if s.get("cluster", "export_relatedness", default=False):
        write_relatedness(network, run.output(out / "relatedness.tsv"))
    with run.timed("cluster"):
        partition = slm_cluster(network, params)
    path = run.output(out / "partition.tsv")
    write_partition(partition, path)
    return {"partition": path}


def cmd_derive(s: Settings, run: Run) -> dict:
    partition = read_partition(run.input(s.path("derive", "partition")))
    baseline = read_baseline(run.input(s.path("derive", "baseline")))
    derived = derive_restricted(partition, baseline.p_prime)
    path = run.output(s.out_dir / "partition_restricted.tsv")
    write_partition(derived, path)
    return {"partition": path}


def cmd_ari(s: Settings, run: Run) -> dict:
    x = read_partition(run.input(Path(s.args.partition_x)))
    y = read_partition(run.input(Path(s.args.partition_y)))
    result = {"n": len(x), "classes_x": x.n_classes, "classes_y": y.n_classes, "ari": ari(x, y)}
    print(json.dumps(result))
    return result


def _sweep_params(s: Settings) -> SweepParams:
    return SweepParams(
        seed=int(s.get("sweep", "seed", required=True)),
        gamma0=float(s.get("sweep", "gamma0", default=0.00005)),
        step=float(s.get("sweep", "step", default=0.00005)),
        stop_after_decreases=int(s.get("sweep", "stop_after_decreases", default=3)),
        max_runs=int(s.get("sweep", "max_runs", default=20)),
        report_min_size=int(s.get("analytics", "report_min_size", default=50)),
        max_iterations=int(s.get("cluster", "max_iterations", default=20)),
        min_improvement=float(s.get("cluster", "min_improvement", default=1e-12)),
    )


def cmd_sweep(s: Settings, run: Run) -> dict:
    params = _sweep_params(s)
    run.params = vars(params).copy()
    graph = _load_pruned(s, run)
    baseline = read_baseline(run.input(s.path("sweep", "baseline")))
    network = build_relatedness(graph)
    out = s.out_dir
    with run.timed("sweep"):
        result, _ = run_sweep(network, baseline, params, out_dir=out, workers=s.threads)
    run.output(out / "sweep.json")
    for name in result.partition_files.values():
        run.output(out / name)
    log.info("selected run %d, gamma=%s, ARI=%.6g", result.selected_index, _fmt(result.selected_gamma),
             result.selected.ari)
    return {"sweep": out / "sweep.json", "partition": out / result.partition_files[result.selected_index]}


def cmd_stats(s: Settings, run: Run) -> dict:
    paths = [run.input(Path(p)) for p in (s.args.partition or [])]
    if not paths:
        selected = s.path("stats", "partition")
        paths = [run.input(selected)]
    partitions = [read_partition(p) for p in paths]
    main = partitions[0]
    bin_width = int(s.get("analytics", "bin_width", default=1))
    min_size = int(s.get("analytics", "report_min_size", default=50))
    out = s.out_dir

    hist = class_size_histogram(main, bin_width)
    articles_per_bin: dict[int, int] = {}
    for size in hist.sizes:
        key = (size - 1) // bin_width * bin_width + 1
        articles_per_bin[key] = articles_per_bin.get(key, 0) + size
    with open(run.output(out / "histogram.tsv"), "w", encoding="utf-8") as fh:
        fh.write("bin_start\tbin_end\tn_classes\tn_articles\n")
        for start, count in hist.bins.items():
            fh.write(f"{start}\t{start + bin_width - 1}\t{count}\t{articles_per_bin[start]}\n")

    with open(run.output(out / "rank_size.tsv"), "w", encoding="utf-8") as fh:
        fh.write("partition\trank\tsize\n")
        for p, table in zip(paths, rank_size_table(partitions)):
            for rank, size in table:
                fh.write(f"{p.name}\t{rank}\t{size}\n")

    stats = {
        "partition": paths[0].name,
        "n_objects": len(main),
        "n_classes": main.n_classes,
        "min_class_size": min(hist.sizes),
        "max_class_size": max(hist.sizes),
        "report_min_size": min_size,
        "n_classes_ge_min": classes_at_least(main, min_size),
        "weighted": weighted_size_stats(main).as_dict(),
        "percentile_method": "linear",
    }
    baseline_path = s.path("stats", "baseline", required=False)
    if baseline_path is not None:
        baseline = read_baseline(run.input(baseline_path))
        dist = average_class_distribution(baseline, main)
        stats["average_class"] = {"d": dist.d, "mean_count": dist.mean_count, "n_selected": dist.n_selected,
                                  "mean_members": sum(dist.rank_averages)}
        if not dist.n_selected:
            log.warning("no baseline class is spread over exactly %d classes", dist.d)
        with open(run.output(out / "alluvial.tsv"), "w", encoding="utf-8") as fh:
            fh.write("rank\taverage_count\n")
            for rank, avg in enumerate(dist.rank_averages, start=1):
                fh.write(f"{rank}\t{_fmt(avg)}\n")
    with open(run.output(out / "stats.json"), "w", encoding="utf-8") as fh:
        json.dump(stats, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {"stats": out / "stats.json"}


def cmd_label(s: Settings, run: Run) -> dict:
    graph = _load_pruned(s, run)
    partition = read_partition(run.input(s.path("label", "partition")))
    top_k = int(s.get("analytics", "top_k", default=3))
    min_size = int(s.get("analytics", "label_min_size", default=1))
    run.params = {"top_k": top_k, "label_min_size": min_size}
    labels = chi_square_labels(graph, partition, top_k=top_k, min_class_size=min_size)
    flagged = [lab.class_id for lab in labels if lab.flagged]
    if flagged:
        log.warning("%d classes have no keyworded publications", len(flagged))
    path = run.output(s.out_dir / "labels.tsv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("class_id\tn_members\tlabel\n")
        for lab in labels:
            fh.write(f"{lab.class_id}\t{lab.n_members}\t{lab.label}\n")
    return {"labels": path}


def _read_id_list(path: Path) -> list[str]:
    ids = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            token = line.strip().split("\t")[0]
            if token and token != "pub_id":
                ids.append(token)
    return ids


def cmd_distribute(s: Settings, run: Run) -> dict:
    pubs = _read_id_list(run.input(s.path("distribute", "pubs")))
    partition = read_partition(run.input(s.path("distribute", "partition")))
    top_n = s.get("distribute", "top_n")
    rows = distribution_into_classes(pubs, partition, int(top_n) if top_n is not None else None)
    path = run.output(s.out_dir / "distribution.tsv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("rank\tclass_id\tcount\tshare\n")
        for rank, row in enumerate(rows, start=1):
            fh.write(f"{rank}\t{row.class_id}\t{row.count}\t{_fmt(row.share)}\n")
    return {"distribution": path}


def cmd_synthgen(s: Settings, run: Run) -> dict:
    defaults = PlantedCorpusSpec()
    spec = PlantedCorpusSpec(
        n_topics=int(s.get("synthgen", "n_topics", default=defaults.n_topics)),
        pubs_per_topic=int(s.get("synthgen", "pubs_per_topic", default=defaults.pubs_per_topic)),
        p_intra=float(s.get("synthgen", "p_intra", default=defaults.p_intra)),
        p_inter=float(s.get("synthgen", "p_inter", default=defaults.p_inter)),
        n_synthesis_per_topic=int(s.get("synthgen", "n_synthesis_per_topic", default=defaults.n_synthesis_per_topic)),
        refs_per_synthesis=int(s.get("synthgen", "refs_per_synthesis", default=defaults.refs_per_synthesis)),
        keyword_vocab_per_topic=int(s.get("synthgen", "keyword_vocab_per_topic", default=defaults.keyword_vocab_per_topic)),
        size_skew=s.get("synthgen", "size_skew"),
        seed=int(s.get("synthgen", "seed", required=True)),
    )
    run.params = {k: v for k, v in vars(spec).items()}
    paths = generate(spec, s.out_dir)
    for p in paths:
        run.output(p)
    return dict(zip(("publications", "citations", "ground_truth"), paths))


def cmd_pipeline(s: Settings, run: Run) -> dict:
    """ingest -> baseline -> sweep -> stats -> label, each stage reading the previous stage's files."""
    out = s.out_dir
    stages = {}

    def stage(name, fn, **overrides):
        args = argparse.Namespace(**{**vars(s.args), **overrides})
        sub = Settings(args, s.config)
        sub_run = Run(name, sub)
        try:
            result = fn(sub, sub_run)
        except Exception:
            sub_run.abort()
            raise
        sub_run.finish()
        run.outputs.extend(sub_run.outputs)
        stages[name] = result
        return result

    corpus = stage("ingest", cmd_ingest)
    pruned = {"publications": str(corpus["publications"]), "citations": str(corpus["citations"])}
    base = stage("baseline", cmd_baseline, **pruned)
    sweep = stage("sweep", cmd_sweep, baseline=str(base["baseline"]), **pruned)
    selected = read_sweep(sweep["sweep"])
    record = selected.selected
    neighbours = [r for r in selected.records if abs(r.index - record.index) == 1]
    ranked = [out / partition_filename(record.gamma)] + [out / partition_filename(r.gamma) for r in neighbours]
    stage("stats", cmd_stats, partition=[str(p) for p in ranked], baseline=str(base["baseline"]))
    stage("label", cmd_label, partition=str(sweep["partition"]), **pruned)
    return {k: {kk: str(vv) for kk, vv in v.items()} for k, v in stages.items()}


COMMANDS = {
    "ingest": cmd_ingest,
    "baseline": cmd_baseline,
    "cluster": cmd_cluster,
    "derive": cmd_derive,
    "ari": cmd_ari,
    "sweep": cmd_sweep,
    "stats": cmd_stats,
    "label": cmd_label,
    "distribute": cmd_distribute,
    "synthgen": cmd_synthgen,
    "pipeline": cmd_pipeline,
}


def _corpus_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--publications", help="publications TSV")
    p.add_argument("--citations", help="citations TSV")
    strict = p.add_mutually_exclusive_group()
    strict.add_argument("--strict", dest="strict", action="store_true", default=None)
    strict.add_argument("--lenient", dest="strict", action="store_false")
    p.add_argument("--year-min", dest="year_min", type=int)
    p.add_argument("--year-max", dest="year_max", type=int)


def _baseline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--baseline-year", dest="baseline_year", type=int)
    p.add_argument("--min-refs", dest="min_refs", type=int)
    p.add_argument("--min-active-ratio", dest="min_active_ratio", type=float)
    p.add_argument("--overlap-threshold", dest="overlap_threshold", type=float)


def _cluster_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-iterations", dest="max_iterations", type=int)
    p.add_argument("--min-improvement", dest="min_improvement", type=float)


def _sweep_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--gamma0", type=float)
    p.add_argument("--step", type=float)
    p.add_argument("--stop-after-decreases", dest="stop_after_decreases", type=int)
    p.add_argument("--max-runs", dest="max_runs", type=int)
    p.add_argument("--report-min-size", dest="report_min_size", type=int)
    _cluster_flags(p)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file")
    common.add_argument("-o", "--out-dir", dest="out_dir", help="output directory (default: .)")
    common.add_argument("--threads", type=int, help="worker processes (env TOPICGRAN_THREADS overrides)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="topicgran", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="validate a corpus and drop isolated publications")
    _corpus_flags(p)

    p = sub.add_parser("baseline", parents=[common], help="build the synthesis-article baseline")
    _corpus_flags(p)
    _baseline_flags(p)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("cluster", parents=[common], help="cluster the relatedness network at one resolution")
    _corpus_flags(p)
    p.add_argument("--gamma", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--export-relatedness", dest="export_relatedness", action="store_true", default=None)
    _cluster_flags(p)

    p = sub.add_parser("derive", parents=[common], help="restrict a partition to the baseline's members")
    p.add_argument("--partition")
    p.add_argument("--baseline")

    p = sub.add_parser("ari", parents=[common], help="Adjusted Rand Index of two partition files")
    p.add_argument("partition_x")
    p.add_argument("partition_y")

    p = sub.add_parser("sweep", parents=[common], help="resolution sweep against the baseline")
    _corpus_flags(p)
    p.add_argument("--baseline")
    p.add_argument("--seed", type=int)
    _sweep_flags(p)

    p = sub.add_parser("stats", parents=[common], help="class-size statistics and alluvial data")
    p.add_argument("--partition", action="append", help="partition file; repeat for rank-size comparison")
    p.add_argument("--baseline", help="baseline.tsv, enables alluvial.tsv")
    p.add_argument("--bin-width", dest="bin_width", type=int)
    p.add_argument("--report-min-size", dest="report_min_size", type=int)

    p = sub.add_parser("label", parents=[common], help="chi-square keyword labels per class")
    _corpus_flags(p)
    p.add_argument("--partition")
    p.add_argument("--top-k", dest="top_k", type=int)
    p.add_argument("--min-class-size", dest="label_min_size", type=int)

    p = sub.add_parser("distribute", parents=[common], help="spread of a publication set over classes")
    p.add_argument("--pubs", help="file with one pub_id per line")
    p.add_argument("--partition")
    p.add_argument("--top-n", dest="top_n", type=int)

    p = sub.add_parser("synthgen", parents=[common], help="generate a planted-topic corpus")
    p.add_argument("--n-topics", dest="n_topics", type=int)
    p.add_argument("--pubs-per-topic", dest="pubs_per_topic", type=int)
    p.add_argument("--p-intra", dest="p_intra", type=float)
    p.add_argument("--p-inter", dest="p_inter", type=float)
    p.add_argument("--n-synthesis", dest="n_synthesis_per_topic", type=int)
    p.add_argument("--refs-per-synthesis", dest="refs_per_synthesis", type=int)
    p.add_argument("--vocab-per-topic", dest="keyword_vocab_per_topic", type=int)
    p.add_argument("--size-skew", dest="size_skew", type=float)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("pipeline", parents=[common], help="ingest, baseline, sweep, stats and label in one go")
    _corpus_flags(p)
    _baseline_flags(p)
    _sweep_flags(p)
    p.add_argument("--baseline-seed", dest="baseline_seed", type=int)
    p.add_argument("--sweep-seed", dest="sweep_seed", type=int)
    p.add_argument("--top-k", dest="top_k", type=int)
    p.add_argument("--bin-width", dest="bin_width", type=int)
    p.add_argument("--min-class-size", dest="label_min_size", type=int)
    return parser


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    run = None
    try:
        config = _load_config(args.config)
        if args.command == "pipeline":
            # pipeline stages each take a "seed"; route the stage-specific ones
            config = {k: dict(v) if isinstance(v, dict) else v for k, v in config.items()}
            if args.baseline_seed is not None:
                config.setdefault("baseline", {})["seed"] = args.baseline_seed
            if args.sweep_seed is not None:
                config.setdefault("sweep", {})["seed"] = args.sweep_seed
        settings = Settings(args, config)
        run = Run(args.command, settings)
        COMMANDS[args.command](settings, run)
        if args.command != "ari":
            run.finish()
    except Exception as exc:
        if run is not None:
            run.abort()
        error = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        print(json.dumps(error), file=sys.stderr)
        if args.verbose:
            log.exception("failed")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
