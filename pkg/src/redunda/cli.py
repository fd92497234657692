"""Command-line driver: load -> cluster -> select -> analyze -> emit.

Every run computes all artifacts in memory first and writes them through a
single writer at the end; on any failure the partially written files of the
run are removed, so an output directory never holds a half-finished run.
Exit status is 0 iff every artifact was written and the produced manifest
re-validates against the dataset; every failure prints one
``error_code: message`` line on stderr and exits 1.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__, analysis, rng, selection, synth
from .cluster import DEFAULT_MEMORY_CAP, Dendrogram, Partition, format_dendrogram
from .errors import ConfigError, RedundaError
from .selection import SubsetManifest
from .store import EmbeddingDataset, canonical_bytes, dataset_to_csv, load_dataset

MEMORY_CAP_ENV = "REDUNDA_MEMORY_CAP"


@dataclass
class RunConfig:
    """Validated knobs of one subset-building run."""

    input_path: Path
    input_format: str | None
    fraction: float
    method: str
    seed: int | None
    output_dir: Path
    jobs: int = 1
    memory_cap_bytes: int | None = None
    histogram: bool = True
    dissimilarity: bool = True
    nearest_excluded: bool = True
    dump_dendrograms: bool = False
    class_mean: bool = False

    def validate(self) -> None:
        if self.method not in (selection.METHOD_CLUSTER, selection.METHOD_RANDOM):
            raise ConfigError(f"unknown method {self.method!r}")
        if self.method == selection.METHOD_RANDOM and self.seed is None:
            raise ConfigError("method uniform-random requires --seed")
        if self.method == selection.METHOD_CLUSTER and self.seed is not None:
            raise ConfigError("--seed only applies to method uniform-random")
        if not 0.0 < self.fraction <= 1.0:
            raise ConfigError(f"fraction must lie in (0, 1], got {self.fraction}")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems through the error contract."""

    def error(self, message):
        raise ConfigError(message)


def _one_line(exc: BaseException) -> str:
    return " ".join(str(exc).split()) or exc.__class__.__name__


def _memory_cap(args) -> int | None:
    env = os.environ.get(MEMORY_CAP_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{MEMORY_CAP_ENV} must be an integer, got {env!r}") from None
    return args.memory_cap


def _emit(outdir: Path, artifacts: list[tuple[str, str | bytes]]) -> None:
    """Single writer; removes everything it wrote if any write fails."""
    outdir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    try:
        for rel, payload in artifacts:
            target = outdir / rel
            target.parent.mkdir(parents=True, exist_ok=True)
            if isinstance(payload, bytes):
                target.write_bytes(payload)
            else:
                target.write_text(payload, encoding="utf-8")
            written.append(target)
    except BaseException:
        for p in written:
            try:
                p.unlink()
            except OSError:
                pass
        raise


def _metadata(command: str, ds: EmbeddingDataset | None, extra: dict) -> str:
    doc = {
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "command": command,
        "version": __version__,
        "generator": {"name": rng.GENERATOR_NAME, "version": rng.GENERATOR_VERSION},
    }
    if ds is not None:
        doc["source_digest"] = ds.digest()
    doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _recover_reps(manifest: SubsetManifest, partitions: dict[int, Partition]
                  ) -> dict[int, dict[int, int]]:
    """Per class: cluster index -> its retained member (exactly one per cluster)."""
    reps: dict[int, dict[int, int]] = {}
    for cid, part in partitions.items():
        kept = set(manifest.retained[cid])
        by_cluster: dict[int, int] = {}
        for ci, cluster in enumerate(part.clusters):
            inside = kept & cluster
            if len(inside) != 1:
                raise RedundaError(
                    f"class {cid}: cluster {ci} holds {len(inside)} retained samples"
                )
            by_cluster[ci] = next(iter(inside))
        reps[cid] = by_cluster
    return reps


def _report_artifacts(
    config: RunConfig,
    ds: EmbeddingDataset,
    manifest: SubsetManifest,
    partitions: dict[int, Partition],
    dendrograms: dict[int, Dendrogram],
) -> list[tuple[str, str | bytes]]:
    artifacts: list[tuple[str, str | bytes]] = []
    reps = _recover_reps(manifest, partitions)
    classes = sorted(partitions)
    if config.histogram:
        hists = [analysis.size_histogram(partitions[cid]) for cid in classes]
        artifacts.append(("histogram.csv", analysis.histogram_to_csv(hists)))
        artifacts.append(("histogram.json", analysis.histogram_to_json(hists)))
        artifacts.append(("histogram.txt", analysis.histogram_to_table(hists)))
    if config.dissimilarity:
        entries = []
        for cid in classes:
            entry = analysis.avg_dissimilarity(partitions[cid], reps[cid], ds)
            if entry is not None:
                entries.append(entry)
        report = analysis.assemble_dissimilarity_report(
            entries, class_weighted=config.class_mean
        )
        artifacts.append(("dissimilarity.json", analysis.dissimilarity_to_json(report)))
        artifacts.append(("dissimilarity.txt", analysis.dissimilarity_to_table(report)))
    if config.nearest_excluded:
        pairs = {
            cid: analysis.nearest_excluded(partitions[cid], reps[cid], ds.class_view(cid))
            for cid in classes
        }
        artifacts.append(("pairs.json", analysis.pairs_to_json(pairs)))
        artifacts.append(("pairs.txt", analysis.pairs_to_table(pairs)))
    if config.dump_dendrograms:
        for cid in classes:
            artifacts.append(
                (f"dendrograms/class_{cid}.txt", format_dendrogram(dendrograms[cid]))
            )
    return artifacts


def _class_summary(ds: EmbeddingDataset, manifest: SubsetManifest,
                   partitions: dict[int, Partition] | None) -> list[str]:
    lines = []
    sizes = ds.class_sizes()
    for cid in sorted(manifest.retained):
        n = sizes[cid]
        k = len(manifest.retained[cid])
        if partitions is not None:
            largest = max(partitions[cid].sizes())
            lines.append(f"class {cid}: n={n} k={k} largest={largest}")
        else:
            lines.append(f"class {cid}: n={n} k={k}")
    lines.append(
        f"total: classes={len(manifest.retained)} points={len(ds)} "
        f"retained={manifest.total_retained()}"
    )
    return lines


def _run_subset(config: RunConfig, command: str) -> int:
    config.validate()
    ds = load_dataset(config.input_path, config.input_format)
    dendrograms: dict[int, Dendrogram] = {}
    partitions: dict[int, Partition] | None = None
    if config.method == selection.METHOD_CLUSTER:
        sink = dendrograms.__setitem__ if config.dump_dendrograms else None
        manifest, partitions = selection.build_cluster_subset(
            ds,
            config.fraction,
            jobs=config.jobs,
            memory_cap_bytes=config.memory_cap_bytes,
            dendrogram_sink=sink,
        )
    else:
        manifest = selection.build_random_subset(ds, config.fraction, config.seed)
    selection.validate_manifest(manifest, ds)

    artifacts: list[tuple[str, str | bytes]] = [
        ("manifest.json", selection.manifest_to_json(manifest)),
        ("manifest.txt", selection.manifest_to_text(manifest)),
    ]
    if partitions is not None:
        artifacts += _report_artifacts(config, ds, manifest, partitions, dendrograms)
    class_meta = {
        str(cid): {
            "n": ds.class_sizes()[cid],
            "k": len(manifest.retained[cid]),
            "largest": max(partitions[cid].sizes()) if partitions else None,
        }
        for cid in sorted(manifest.retained)
    }
    artifacts.append(
        (
            "run_metadata.json",
            _metadata(
                command,
                ds,
                {
                    "input": str(config.input_path),
                    "fraction": config.fraction,
                    "method": config.method,
                    "seed": config.seed,
                    "jobs": config.jobs,
                    "classes": class_meta,
                },
            ),
        )
    )
    _emit(config.output_dir, artifacts)
    # Exit contract: verify the manifest file on disk re-validates.
    reread = selection.read_manifest_json(config.output_dir / "manifest.json")
    selection.validate_manifest(reread, ds)
    for line in _class_summary(ds, manifest, partitions):
        print(line)
    if config.method == selection.METHOD_RANDOM and command == "select":
        print("note: cluster reports skipped (uniform-random subsets have no clusters)")
    return 0


def _cmd_select(args) -> int:
    config = RunConfig(
        input_path=Path(args.input),
        input_format=args.format,
        fraction=args.fraction,
        method=args.method,
        seed=args.seed,
        output_dir=Path(args.out),
        jobs=args.jobs,
        memory_cap_bytes=_memory_cap(args),
        histogram=args.histogram,
        dissimilarity=args.dissimilarity,
        nearest_excluded=args.nearest_excluded,
        dump_dendrograms=args.dump_dendrograms,
        class_mean=args.class_mean,
    )
    return _run_subset(config, "select")


def _cmd_baseline(args) -> int:
    config = RunConfig(
        input_path=Path(args.input),
        input_format=args.format,
        fraction=args.fraction,
        method=selection.METHOD_RANDOM,
        seed=args.seed,
        output_dir=Path(args.out),
        histogram=False,
        dissimilarity=False,
        nearest_excluded=False,
    )
    return _run_subset(config, "baseline")


def _cmd_stats(args) -> int:
    ds = load_dataset(Path(args.input), args.format)
    manifest = selection.read_manifest_json(Path(args.manifest))
    if manifest.method != selection.METHOD_CLUSTER:
        raise ConfigError("stats requires a cluster-medoid manifest")
    selection.validate_manifest(manifest, ds)
    config = RunConfig(
        input_path=Path(args.input),
        input_format=args.format,
        fraction=manifest.retention_fraction,
        method=selection.METHOD_CLUSTER,
        seed=None,
        output_dir=Path(args.out),
        jobs=args.jobs,
        memory_cap_bytes=_memory_cap(args),
        histogram=args.histogram,
        dissimilarity=args.dissimilarity,
        nearest_excluded=args.nearest_excluded,
        dump_dendrograms=args.dump_dendrograms,
        class_mean=args.class_mean,
    )
    config.validate()
    dendrograms: dict[int, Dendrogram] = {}
    sink = dendrograms.__setitem__ if config.dump_dendrograms else None
    recomputed, partitions = selection.build_cluster_subset(
        ds,
        config.fraction,
        jobs=config.jobs,
        memory_cap_bytes=config.memory_cap_bytes,
        dendrogram_sink=sink,
    )
    if dict(recomputed.retained) != dict(manifest.retained):
        raise ConfigError(
            "manifest does not match recomputed clustering for this dataset"
        )
    artifacts = _report_artifacts(config, ds, manifest, partitions, dendrograms)
    artifacts.append(
        (
            "run_metadata.json",
            _metadata(
                "stats",
                ds,
                {
                    "input": str(config.input_path),
                    "manifest": str(args.manifest),
                    "fraction": config.fraction,
                    "jobs": config.jobs,
                },
            ),
        )
    )
    _emit(config.output_dir, artifacts)
    for line in _class_summary(ds, manifest, partitions):
        print(line)
    return 0


def _cmd_synth(args) -> int:
    sizes = None
    if args.sizes is not None:
        try:
            sizes = tuple(int(p) for p in args.sizes.split(","))
        except ValueError:
            raise ConfigError(f"--sizes must be comma-separated integers, got {args.sizes!r}") from None
    size_range = tuple(args.size_range) if args.size_range is not None else None
    spec = synth.PlantedSpec(
        classes=args.classes,
        groups_per_class=args.groups,
        dim=args.dim,
        within_spread=args.delta,
        between_margin=args.margin,
        seed=args.seed,
        sizes=sizes,
        size_range=size_range,
    )
    ds, truth = synth.generate(spec)
    cert = synth.measure_separation(ds, truth)
    name = "dataset.csv" if args.format == "csv" else "dataset.bin"
    payload: str | bytes = (
        dataset_to_csv(ds) if args.format == "csv" else canonical_bytes(ds)
    )
    artifacts: list[tuple[str, str | bytes]] = [
        (name, payload),
        ("ground_truth.json", synth.ground_truth_to_json(truth)),
        (
            "run_metadata.json",
            _metadata(
                "synth",
                ds,
                {
                    "classes": spec.classes,
                    "groups_per_class": spec.groups_per_class,
                    "dim": spec.dim,
                    "within_spread": spec.within_spread,
                    "between_margin": spec.between_margin,
                    "seed": spec.seed,
                    "max_within": cert.max_within,
                    "min_between": cert.min_between,
                },
            ),
        ),
    ]
    _emit(Path(args.out), artifacts)
    for cid in sorted(truth):
        points = sum(len(g) for g in truth[cid])
        print(f"class {cid}: groups={len(truth[cid])} points={points}")
    print(f"total: classes={spec.classes} points={len(ds)} file={name}")
    return 0


def _cmd_validate(args) -> int:
    ds = load_dataset(Path(args.input), args.format)
    sizes = ds.class_sizes()
    print(
        f"ok: records={len(ds)} dim={ds.dimension} classes={len(sizes)} "
        f"digest={ds.digest()}"
    )
    for cid, n in sizes.items():
        print(f"class {cid}: n={n}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="redunda", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add_io(p, with_fraction=True):
        p.add_argument("--input", required=True, help="dataset file")
        p.add_argument("--format", choices=("binary", "csv"), default=None,
                       help="dataset format (default: infer from suffix)")
        if with_fraction:
            p.add_argument("--fraction", type=float, required=True,
                           help="retention fraction in (0, 1]")
        p.add_argument("--out", required=True, help="output directory")

    def add_cluster_knobs(p):
        p.add_argument("--jobs", type=int, default=1, help="max concurrent class jobs")
        p.add_argument("--memory-cap", type=int, default=None, dest="memory_cap",
                       help=f"bytes of pairwise distances allowed per class job "
                            f"(default {DEFAULT_MEMORY_CAP}; env {MEMORY_CAP_ENV} overrides)")
        p.add_argument("--histogram", action=argparse.BooleanOptionalAction, default=True,
                       help="emit cluster-size histogram")
        p.add_argument("--dissimilarity", action=argparse.BooleanOptionalAction, default=True,
                       help="emit average-dissimilarity report")
        p.add_argument("--nearest-excluded", action=argparse.BooleanOptionalAction,
                       default=True, help="emit nearest-excluded-neighbor report")
        p.add_argument("--dump-dendrograms", action="store_true",
                       help="write per-class merge sequences")
        p.add_argument("--class-mean", action="store_true",
                       help="overall dissimilarity averages class means instead of clusters")

    p = sub.add_parser("select", help="build a subset manifest plus reports")
    add_io(p)
    p.add_argument("--method", choices=(selection.METHOD_CLUSTER, selection.METHOD_RANDOM),
                   default=selection.METHOD_CLUSTER)
    p.add_argument("--seed", type=int, default=None,
                   help="required for (and only for) uniform-random")
    add_cluster_knobs(p)
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("baseline", help="uniform-random subset manifest")
    add_io(p)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=_cmd_baseline)

    p = sub.add_parser("stats", help="reports for an existing manifest")
    add_io(p, with_fraction=False)
    p.add_argument("--manifest", required=True, help="manifest.json of a previous run")
    add_cluster_knobs(p)
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("synth", help="generate a planted-group dataset")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--groups", type=int, required=True, help="groups per class")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--delta", type=float, required=True, help="within-group spread")
    p.add_argument("--margin", type=float, required=True,
                   help="between-group anchor margin (must exceed 4*delta)")
    p.add_argument("--seed", type=int, required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--sizes", default=None, help="comma-separated group sizes")
    group.add_argument("--size-range", type=int, nargs=2, default=None,
                       metavar=("LO", "HI"), help="uniform group-size bounds")
    p.add_argument("--format", choices=("binary", "csv"), default="binary")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("validate", help="check a dataset file and print a summary")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=("binary", "csv"), default=None)
    p.set_defaults(func=_cmd_validate)

    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except RedundaError as exc:
        print(f"{exc.code}: {_one_line(exc)}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io_error: {_one_line(exc)}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
