"""Synthetic embedding generator with planted redundant groups.

Each class gets ``groups_per_class`` anchor directions kept pairwise more
than ``between_group_margin`` apart; group members are tangent-space
perturbations of their anchor with dissimilarity to the anchor at most
half the within-group spread.  That caps within-group pairwise
dissimilarity strictly below twice the spread and keeps cross-group
dissimilarity above margin - spread, which is exactly the separation a
complete-linkage cut at k = group count needs to recover the planted
partition.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import metric, rng
from .errors import InvalidArgumentError, MarginError, ValidationError
from .store import EmbeddingDataset

_ANCHOR_ATTEMPTS = 200  # retries per anchor before giving up on the margin


@dataclass(frozen=True)
class PlantedSpec:
    """Parameters of a planted-group dataset.

    Exactly one of ``sizes`` (explicit per-group sizes) or ``size_range``
    (inclusive uniform bounds) must be given.  ``within_spread`` (delta)
    bounds how far group members may drift from their anchor; anchors are
    kept pairwise more than ``between_margin`` (Delta) apart, and Delta
    must exceed 4*delta so the separation certificate can hold: generated
    data satisfies max-within < 2*delta and min-between > Delta - 2*delta.
    """

    classes: int
    groups_per_class: int
    dim: int
    within_spread: float
    between_margin: float
    seed: int
    sizes: tuple[int, ...] | None = None
    size_range: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        if self.classes < 1:
            raise InvalidArgumentError(f"classes must be >= 1, got {self.classes}")
        if self.groups_per_class < 1:
            raise InvalidArgumentError(
                f"groups_per_class must be >= 1, got {self.groups_per_class}"
            )
        if self.dim < 2:
            raise InvalidArgumentError(f"dim must be >= 2, got {self.dim}")
        if not 0.0 <= self.within_spread <= 0.5:
            raise InvalidArgumentError(
                f"within_spread must lie in [0, 0.5], got {self.within_spread}"
            )
        if not self.between_margin > 4.0 * self.within_spread:
            raise InvalidArgumentError(
                f"between_margin {self.between_margin} must exceed "
                f"4 * within_spread = {4.0 * self.within_spread}"
            )
        if self.between_margin >= 2.0:
            raise InvalidArgumentError("between_margin must be below 2")
        if (self.sizes is None) == (self.size_range is None):
            raise InvalidArgumentError("give exactly one of sizes or size_range")
        if self.sizes is not None:
            if len(self.sizes) != self.groups_per_class:
                raise InvalidArgumentError(
                    f"sizes lists {len(self.sizes)} groups, expected {self.groups_per_class}"
                )
            if any(s < 1 for s in self.sizes):
                raise InvalidArgumentError("every group size must be >= 1")
        if self.size_range is not None:
            lo, hi = self.size_range
            if not 1 <= lo <= hi:
                raise InvalidArgumentError(f"bad size_range ({lo}, {hi})")


@dataclass(frozen=True)
class SeparationCertificate:
    """Realized extremes over the generated data (None when vacuous)."""

    max_within: float | None
    min_between: float | None


def _draw_anchors(stream: rng.Stream, spec: PlantedSpec) -> list[np.ndarray]:
    anchors: list[np.ndarray] = []
    for g in range(spec.groups_per_class):
        for _ in range(_ANCHOR_ATTEMPTS):
            cand = stream.unit_vector(spec.dim)
            if all(
                metric.cosine_dissimilarity(cand, a) > spec.between_margin
                for a in anchors
            ):
                anchors.append(cand)
                break
        else:
            raise MarginError(
                f"could not place anchor {g + 1}/{spec.groups_per_class} with "
                f"pairwise dissimilarity > {spec.between_margin} in dim {spec.dim} "
                f"after {_ANCHOR_ATTEMPTS} attempts"
            )
    return anchors


def _perturb(stream: rng.Stream, anchor: np.ndarray, target: float) -> np.ndarray:
    """Point at cosine dissimilarity exactly ``target`` from the unit anchor."""
    if target <= 0.0:
        return anchor.copy()
    while True:
        t = stream.gaussians(len(anchor))
        t -= float(t @ anchor) * anchor
        norm = math.sqrt(float(t @ t))
        if norm > 1e-12:
            t /= norm
            break
    theta = math.acos(1.0 - target)
    return math.cos(theta) * anchor + math.sin(theta) * t


def generate(spec: PlantedSpec) -> tuple[EmbeddingDataset, dict[int, list[frozenset[int]]]]:
    """Deterministic dataset + ground-truth groups for a PlantedSpec.

    sample_ids are sequential in generation order (class-major, then group,
    then member), so they are positional and the binary encoding stays
    implicit-id.
    """
    sids: list[int] = []
    cids: list[int] = []
    rows: list[np.ndarray] = []
    truth: dict[int, list[frozenset[int]]] = {}
    next_id = 0
    for cid in range(spec.classes):
        stream = rng.class_stream(spec.seed, cid, rng.DOMAIN_SYNTH)
        if spec.sizes is not None:
            sizes = list(spec.sizes)
        else:
            lo, hi = spec.size_range  # type: ignore[misc]
            sizes = [lo + stream.below(hi - lo + 1) for _ in range(spec.groups_per_class)]
        anchors = _draw_anchors(stream, spec)
        # Member-anchor dissimilarity is capped at 1 - sqrt(1 - delta^2), i.e.
        # member-anchor *angle* below asin(delta).  Dissimilarity is
        # 2*sin^2(angle/2), which is not a metric: two perturbations can move a
        # cross-group pair by up to 2*sin(sum of angles / 2) < 2*delta, so this
        # cap (and not delta/2) is what keeps min-between above margin-2*delta;
        # within-group pairs stay below 2*delta^2 < 2*delta.
        cap = 1.0 - math.sqrt(1.0 - spec.within_spread**2)
        groups: list[frozenset[int]] = []
        for anchor, size in zip(anchors, sizes):
            ids_here = []
            for _ in range(size):
                target = cap * stream.uniform()
                rows.append(_perturb(stream, anchor, target))
                sids.append(next_id)
                cids.append(cid)
                ids_here.append(next_id)
                next_id += 1
            groups.append(frozenset(ids_here))
        truth[cid] = groups
    dataset = EmbeddingDataset.from_arrays(sids, cids, np.asarray(rows))

    cert = measure_separation(dataset, truth)
    if cert.max_within is not None:
        bound = 2.0 * spec.within_spread
        ok = cert.max_within == 0.0 if bound == 0.0 else cert.max_within < bound
        if not ok:
            raise MarginError(
                f"generated data violates within-group bound: {cert.max_within} vs {bound}"
            )
    if cert.min_between is not None and not (
        cert.min_between > spec.between_margin - 2.0 * spec.within_spread
    ):
        raise MarginError(
            f"generated data violates between-group bound: {cert.min_between} vs "
            f"{spec.between_margin - 2.0 * spec.within_spread}"
        )
    return dataset, truth


def measure_separation(
    dataset: EmbeddingDataset, ground_truth: Mapping[int, Sequence[frozenset[int]]]
) -> SeparationCertificate:
    """Realized max within-group and min between-group (same class) dissimilarity."""
    max_within: float | None = None
    min_between: float | None = None
    for cid in sorted(ground_truth):
        groups = [sorted(g) for g in ground_truth[cid]]
        units = [
            metric.unit_rows(np.asarray([dataset.vector_of(sid) for sid in g]))
            for g in groups
        ]
        vectors = [np.asarray([dataset.vector_of(sid) for sid in g]) for g in groups]
        for gi, U in enumerate(units):
            if len(U) > 1:
                d = float(metric.pairwise_condensed(vectors[gi]).max())
                if max_within is None or d > max_within:
                    max_within = d
            for V in units[gi + 1 :]:
                G = 1.0 - U @ V.T
                np.clip(G, 0.0, 2.0, out=G)
                d = float(G.min())
                if min_between is None or d < min_between:
                    min_between = d
    return SeparationCertificate(max_within, min_between)


def ground_truth_to_json(ground_truth: Mapping[int, Sequence[frozenset[int]]]) -> str:
    doc = {
        str(cid): [sorted(group) for group in ground_truth[cid]]
        for cid in sorted(ground_truth)
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def write_ground_truth(ground_truth: Mapping[int, Sequence[frozenset[int]]], path) -> None:
    Path(path).write_text(ground_truth_to_json(ground_truth), encoding="utf-8")


def read_ground_truth(path) -> dict[int, list[frozenset[int]]]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return {
            int(cid): [frozenset(int(s) for s in group) for group in groups]
            for cid, groups in doc.items()
        }
    except (TypeError, ValueError, json.JSONDecodeError) as exc:
        raise ValidationError(f"bad ground-truth file {path}: {exc}") from exc
