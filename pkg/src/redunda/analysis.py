"""Redundancy analytics: size histograms, dissimilarity to the retained
sample, and nearest excluded neighbors."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import metric
from .cluster import Partition
from .errors import InvalidArgumentError
from .store import EmbeddingDataset


@dataclass(frozen=True)
class SizeHistogram:
    """Cluster-size counts for one class."""

    class_id: int
    counts: Mapping[int, int]  # cluster size -> number of clusters


@dataclass(frozen=True)
class ClassDissimilarity:
    """Per-class mean dissimilarity of non-retained members to their medoid.

    ``cluster_means`` holds one entry per qualifying cluster (size >= 2), in
    partition order; ``mean`` is their average.
    """

    class_id: int
    mean: float
    cluster_means: tuple[float, ...]


@dataclass(frozen=True)
class DissimilarityReport:
    per_class: Mapping[int, float]
    overall: float | None
    groups_counted: Mapping[int, int]
    class_weighted: bool  # False: overall averages clusters; True: averages classes


@dataclass(frozen=True)
class NearestExcludedPair:
    retained_id: int
    neighbor_id: int
    dissimilarity: float
    same_class: bool = True


def size_histogram(partition: Partition) -> SizeHistogram:
    counts: dict[int, int] = {}
    for cluster in partition.clusters:
        counts[len(cluster)] = counts.get(len(cluster), 0) + 1
    return SizeHistogram(partition.class_id, dict(sorted(counts.items())))


def _check_reps(partition: Partition, reps: Mapping[int, int]) -> None:
    for ci, cluster in enumerate(partition.clusters):
        if ci not in reps:
            raise InvalidArgumentError(f"no representative for cluster {ci}")
        if reps[ci] not in cluster:
            raise InvalidArgumentError(
                f"representative {reps[ci]} is not a member of cluster {ci}"
            )


def avg_dissimilarity(
    partition: Partition, reps: Mapping[int, int], ds: EmbeddingDataset
) -> ClassDissimilarity | None:
    """Average dissimilarity to the retained sample over clusters of size >= 2.

    Returns None when the class has no qualifying cluster (class omitted from
    the report rather than reported as zero).
    """
    _check_reps(partition, reps)
    cluster_means: list[float] = []
    for ci, cluster in enumerate(partition.clusters):
        if len(cluster) < 2:
            continue
        rep = reps[ci]
        others = sorted(cluster - {rep})
        V = np.asarray([ds.vector_of(sid) for sid in others])
        d = metric.one_to_many(ds.vector_of(rep), V)
        cluster_means.append(float(d.mean()))
    if not cluster_means:
        return None
    return ClassDissimilarity(
        partition.class_id, float(np.mean(cluster_means)), tuple(cluster_means)
    )


def assemble_dissimilarity_report(
    entries: Sequence[ClassDissimilarity], *, class_weighted: bool = False
) -> DissimilarityReport:
    """Combine per-class entries; overall is cluster-weighted by default."""
    per_class = {e.class_id: e.mean for e in entries}
    groups = {e.class_id: len(e.cluster_means) for e in entries}
    if not entries:
        overall = None
    elif class_weighted:
        overall = float(np.mean([e.mean for e in entries]))
    else:
        overall = float(np.mean(np.concatenate([e.cluster_means for e in entries])))
    return DissimilarityReport(
        per_class=per_class,
        overall=overall,
        groups_counted=groups,
        class_weighted=class_weighted,
    )


def nearest_excluded(
    partition: Partition, reps: Mapping[int, int], class_points
) -> list[NearestExcludedPair]:
    """Closest same-class point outside each size->=2 cluster's representative.

    Single-cluster classes have no outside points and yield an empty list.
    Ties break toward the smallest neighbor sample_id.
    """
    _check_reps(partition, reps)
    if len(partition.clusters) < 2:
        return []
    pts = list(class_points)
    ids = np.array([int(s) for s, _ in pts], dtype=np.int64)
    V = np.asarray([np.asarray(v, dtype=np.float64) for _, v in pts])
    row_of = {int(s): i for i, (s, _) in enumerate(pts)}
    out: list[NearestExcludedPair] = []
    for ci, cluster in enumerate(partition.clusters):
        if len(cluster) < 2:
            continue
        rep = reps[ci]
        inside = np.zeros(len(ids), dtype=bool)
        for sid in cluster:
            inside[row_of[sid]] = True
        outside = np.flatnonzero(~inside)
        d = metric.one_to_many(V[row_of[rep]], V[outside])
        pick = int(np.lexsort((ids[outside], d))[0])
        out.append(
            NearestExcludedPair(rep, int(ids[outside][pick]), float(d[pick]))
        )
    return out


# ---------------------------------------------------------------------------
# Report emission.  All writers are deterministic: fixed key order, fixed
# float formatting, trailing newline.

def histogram_rows(histograms: Sequence[SizeHistogram]) -> list[tuple[int, int, int]]:
    return [
        (h.class_id, size, count)
        for h in sorted(histograms, key=lambda h: h.class_id)
        for size, count in sorted(h.counts.items())
    ]


def histogram_to_csv(histograms: Sequence[SizeHistogram]) -> str:
    lines = ["class_id,size,count"]
    lines += [f"{cid},{size},{count}" for cid, size, count in histogram_rows(histograms)]
    return "\n".join(lines) + "\n"


def write_histogram_csv(histograms: Sequence[SizeHistogram], path) -> None:
    Path(path).write_text(histogram_to_csv(histograms), encoding="utf-8")


def histogram_to_table(histograms: Sequence[SizeHistogram]) -> str:
    lines = [f"{'class':>8}  {'size':>8}  {'count':>8}"]
    lines += [
        f"{cid:>8}  {size:>8}  {count:>8}" for cid, size, count in histogram_rows(histograms)
    ]
    return "\n".join(lines) + "\n"


def write_histogram_table(histograms: Sequence[SizeHistogram], path) -> None:
    Path(path).write_text(histogram_to_table(histograms), encoding="utf-8")


def histogram_to_json(histograms: Sequence[SizeHistogram]) -> str:
    doc = {
        str(h.class_id): {str(size): count for size, count in sorted(h.counts.items())}
        for h in sorted(histograms, key=lambda h: h.class_id)
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def dissimilarity_to_json(report: DissimilarityReport) -> str:
    doc = {
        "weighting": "class" if report.class_weighted else "cluster",
        "overall": report.overall,
        "per_class": {str(cid): report.per_class[cid] for cid in sorted(report.per_class)},
        "groups_counted": {
            str(cid): report.groups_counted[cid] for cid in sorted(report.groups_counted)
        },
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def write_dissimilarity_json(report: DissimilarityReport, path) -> None:
    Path(path).write_text(dissimilarity_to_json(report), encoding="utf-8")


def dissimilarity_to_table(report: DissimilarityReport) -> str:
    lines = [f"{'class':>8}  {'groups':>10}  {'avg_dissimilarity':>18}"]
    for cid in sorted(report.per_class):
        lines.append(
            f"{cid:>8}  {report.groups_counted[cid]:>10}  {report.per_class[cid]:>18.6e}"
        )
    label = "mean/class" if report.class_weighted else "mean/group"
    if report.overall is not None:
        lines.append(f"{'all':>8}  {label:>10}  {report.overall:>18.6e}")
    return "\n".join(lines) + "\n"


def write_dissimilarity_table(report: DissimilarityReport, path) -> None:
    Path(path).write_text(dissimilarity_to_table(report), encoding="utf-8")


def pairs_to_json(pairs_by_class: Mapping[int, Sequence[NearestExcludedPair]]) -> str:
    doc = {
        str(cid): [
            {
                "retained_id": p.retained_id,
                "neighbor_id": p.neighbor_id,
                "dissimilarity": p.dissimilarity,
            }
            for p in pairs_by_class[cid]
        ]
        for cid in sorted(pairs_by_class)
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def write_pairs_json(pairs_by_class: Mapping[int, Sequence[NearestExcludedPair]], path) -> None:
    Path(path).write_text(pairs_to_json(pairs_by_class), encoding="utf-8")


def pairs_to_table(pairs_by_class: Mapping[int, Sequence[NearestExcludedPair]]) -> str:
    lines = [f"{'class':>8}  {'retained':>12}  {'neighbor':>12}  {'dissimilarity':>16}"]
    for cid in sorted(pairs_by_class):
        for p in pairs_by_class[cid]:
            lines.append(
                f"{cid:>8}  {p.retained_id:>12}  {p.neighbor_id:>12}  {p.dissimilarity:>16.6e}"
            )
    return "\n".join(lines) + "\n"


def write_pairs_table(pairs_by_class: Mapping[int, Sequence[NearestExcludedPair]], path) -> None:
    Path(path).write_text(pairs_to_table(pairs_by_class), encoding="utf-8")
