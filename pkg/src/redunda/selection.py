"""Representative selection and subset manifests, plus the random baseline."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from . import metric, rng
from .cluster import Dendrogram, Partition, agglomerate_fast
from .errors import DegenerateClusterError, InvalidArgumentError, RedundaError, ValidationError
from .store import EmbeddingDataset

METHOD_CLUSTER = "cluster-medoid"
METHOD_RANDOM = "uniform-random"


@dataclass(frozen=True)
class SubsetManifest:
    """Which sample_ids survive, per class, plus provenance of the run."""

    method: str
    retention_fraction: float
    seed: int | None
    source_digest: str
    retained: Mapping[int, tuple[int, ...]]

    def total_retained(self) -> int:
        return sum(len(v) for v in self.retained.values())


def per_class_k(class_size: int, fraction: float) -> int:
    """Per-class budget: round-half-up of fraction * size, clamped to [1, size]."""
    if class_size < 1:
        raise InvalidArgumentError(f"class_size must be positive, got {class_size}")
    if not 0.0 < fraction <= 1.0:
        raise InvalidArgumentError(f"fraction must lie in (0, 1], got {fraction}")
    return max(1, min(class_size, math.floor(fraction * class_size + 0.5)))


def select_representative(cluster) -> int:
    """Medoid under cosine dissimilarity to the arithmetic-mean centroid.

    Ties go to the smallest sample_id.
    """
    members = sorted(cluster, key=lambda sv: int(sv[0]))
    if not members:
        raise InvalidArgumentError("cluster must be non-empty")
    ids = np.array([int(s) for s, _ in members], dtype=np.int64)
    V = np.asarray([np.asarray(v, dtype=np.float64) for _, v in members])
    centroid = V.mean(axis=0)
    norm = math.sqrt(float(centroid @ centroid))
    if norm < metric.MIN_NORM:
        shown = ", ".join(str(i) for i in ids[:8])
        more = ", ..." if len(ids) > 8 else ""
        raise DegenerateClusterError(
            f"cluster {{{shown}{more}}} has centroid norm below {metric.MIN_NORM:g}"
        )
    d = metric.one_to_many(centroid, V)
    return int(ids[np.lexsort((ids, d))[0]])


def _cluster_class_job(
    ds: EmbeddingDataset, class_id: int, fraction: float, memory_cap_bytes: int | None
) -> tuple[tuple[int, ...], Partition, Dendrogram]:
    points = ds.class_view(class_id)
    k = per_class_k(len(points), fraction)
    dendro, part = agglomerate_fast(
        points, k, class_id=class_id, memory_cap_bytes=memory_cap_bytes
    )
    reps = [
        select_representative([(sid, ds.vector_of(sid)) for sid in sorted(cluster)])
        for cluster in part.clusters
    ]
    return tuple(sorted(reps)), part, dendro


def _tagged(class_id: int, exc: Exception) -> RedundaError:
    msg = f"class {class_id}: {exc}"
    return type(exc)(msg) if isinstance(exc, RedundaError) else RedundaError(msg)


def build_cluster_subset(
    ds: EmbeddingDataset,
    fraction: float,
    *,
    jobs: int = 1,
    memory_cap_bytes: int | None = None,
    dendrogram_sink: Callable[[int, Dendrogram], None] | None = None,
) -> tuple[SubsetManifest, dict[int, Partition]]:
    """Cluster every class at its per-class k and keep one medoid per cluster.

    Class jobs may run on up to ``jobs`` threads; results are reduced in
    ascending class_id order, so output is independent of scheduling.
    """
    if not 0.0 < fraction <= 1.0:
        raise InvalidArgumentError(f"fraction must lie in (0, 1], got {fraction}")
    classes = ds.classes()
    if not classes:
        raise InvalidArgumentError("dataset has no records")

    def job(cid: int):
        try:
            return _cluster_class_job(ds, cid, fraction, memory_cap_bytes)
        except Exception as exc:
            raise _tagged(cid, exc) from exc

    if jobs < 1:
        raise InvalidArgumentError(f"jobs must be positive, got {jobs}")
    if jobs == 1 or len(classes) == 1:
        results = [job(cid) for cid in classes]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(job, classes))

    retained: dict[int, tuple[int, ...]] = {}
    partitions: dict[int, Partition] = {}
    for cid, (reps, part, dendro) in zip(classes, results):
        retained[cid] = reps
        partitions[cid] = part
        if dendrogram_sink is not None:
            dendrogram_sink(cid, dendro)
    manifest = SubsetManifest(METHOD_CLUSTER, fraction, None, ds.digest(), retained)
    return manifest, partitions


def build_random_subset(ds: EmbeddingDataset, fraction: float, seed: int) -> SubsetManifest:
    """Stratified uniform baseline: per-class draws without replacement.

    Each class uses its own substream of the counter-based generator, so the
    draw for a class depends only on (seed, class_id) and the class's file
    order -- not on other classes or thread scheduling.
    """
    if not 0.0 < fraction <= 1.0:
        raise InvalidArgumentError(f"fraction must lie in (0, 1], got {fraction}")
    retained: dict[int, tuple[int, ...]] = {}
    for cid in ds.classes():
        points = ds.class_view(cid)
        k = per_class_k(len(points), fraction)
        stream = rng.class_stream(seed, cid, rng.DOMAIN_SAMPLING)
        picks = stream.sample_without_replacement(len(points), k)
        retained[cid] = tuple(sorted(points[i][0] for i in picks))
    return SubsetManifest(METHOD_RANDOM, fraction, seed, ds.digest(), retained)


def validate_manifest(manifest: SubsetManifest, ds: EmbeddingDataset) -> None:
    """Check manifest invariants against its source dataset."""
    if manifest.method not in (METHOD_CLUSTER, METHOD_RANDOM):
        raise ValidationError(f"unknown method {manifest.method!r}")
    if not 0.0 < manifest.retention_fraction <= 1.0:
        raise ValidationError(f"fraction out of range: {manifest.retention_fraction}")
    digest = ds.digest()
    if manifest.source_digest != digest:
        raise ValidationError(
            f"manifest digest {manifest.source_digest[:12]}... does not match dataset {digest[:12]}..."
        )
    sizes = ds.class_sizes()
    if sorted(manifest.retained) != sorted(sizes):
        raise ValidationError("manifest classes do not match dataset classes")
    for cid, ids in manifest.retained.items():
        expect = per_class_k(sizes[cid], manifest.retention_fraction)
        if len(ids) != expect:
            raise ValidationError(
                f"class {cid}: retained {len(ids)} samples, expected {expect}"
            )
        if len(set(ids)) != len(ids):
            raise ValidationError(f"class {cid}: duplicate retained sample_id")
        if list(ids) != sorted(ids):
            raise ValidationError(f"class {cid}: retained ids not ascending")
        class_ids = {sid for sid, _ in ds.class_view(cid)}
        missing = [sid for sid in ids if sid not in class_ids]
        if missing:
            raise ValidationError(
                f"class {cid}: sample {missing[0]} not in that class of the dataset"
            )


def manifest_to_json(manifest: SubsetManifest) -> str:
    doc = {
        "method": manifest.method,
        "fraction": manifest.retention_fraction,
        "seed": manifest.seed,
        "source_digest": manifest.source_digest,
        "retained": {str(cid): list(ids) for cid, ids in sorted(manifest.retained.items())},
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def write_manifest_json(manifest: SubsetManifest, path) -> None:
    Path(path).write_text(manifest_to_json(manifest), encoding="utf-8")


def read_manifest_json(path) -> SubsetManifest:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        retained = {
            int(cid): tuple(int(s) for s in ids) for cid, ids in doc["retained"].items()
        }
        return SubsetManifest(
            method=doc["method"],
            retention_fraction=float(doc["fraction"]),
            seed=None if doc["seed"] is None else int(doc["seed"]),
            source_digest=str(doc["source_digest"]),
            retained=retained,
        )
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise ValidationError(f"bad manifest file {path}: {exc}") from exc


def manifest_to_text(manifest: SubsetManifest) -> str:
    lines = [
        f"{cid} {sid}"
        for cid, ids in sorted(manifest.retained.items())
        for sid in ids
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def write_manifest_text(manifest: SubsetManifest, path) -> None:
    Path(path).write_text(manifest_to_text(manifest), encoding="utf-8")
