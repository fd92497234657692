"""Labeled embedding datasets: in-memory model plus binary and CSV codecs.

Vectors are stored as float32 on disk and widened to float64 the moment they
are loaded; all downstream arithmetic is float64.  A dataset is immutable
after construction (the backing arrays are marked read-only).
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import FormatError, InvalidArgumentError, UnknownClassError, ValidationError
from .metric import MIN_NORM

MAGIC = b"REDE"
FORMAT_VERSION = 1
FLAG_EXPLICIT_IDS = 0x1

_HEADER = struct.Struct("<4sIIQI")
_MAX_CLASS_ID = 0xFFFFFFFF
# sample_ids are u64 on disk but kept as int64 internally; the top half of
# the u64 range is rejected rather than silently wrapped.
_MAX_SAMPLE_ID = (1 << 63) - 1


@dataclass(frozen=True)
class EmbeddingRecord:
    """One labeled embedding."""

    sample_id: int
    class_id: int
    vector: np.ndarray


@dataclass
class EmbeddingDataset:
    """Immutable collection of labeled embeddings with a stable file order."""

    dimension: int
    sample_ids: np.ndarray  # int64, file order
    class_ids: np.ndarray  # int64, file order
    vectors: np.ndarray  # float64, (n, dimension), file order
    source_digest: str | None = None
    _row_of: dict[int, int] = field(repr=False, default_factory=dict)
    _class_rows: dict[int, list[int]] = field(repr=False, default_factory=dict)
    _digest_cache: str | None = field(repr=False, default=None)

    @classmethod
    def from_arrays(cls, sample_ids, class_ids, vectors, source_digest: str | None = None
                    ) -> "EmbeddingDataset":
        """Validate raw arrays and assemble a dataset.

        Raises ValidationError on the first offending record: non-finite
        component, zero-norm vector, duplicate or out-of-range ids.
        """
        vec = np.asarray(vectors, dtype=np.float64)
        if vec.ndim != 2:
            raise ValidationError(f"vectors must form a 2-d array, got ndim={vec.ndim}")
        n, dim = vec.shape
        if n > 0 and dim < 1:
            raise ValidationError("dimension must be at least 1")
        sids = np.asarray(sample_ids, dtype=np.int64).reshape(-1)
        cids = np.asarray(class_ids, dtype=np.int64).reshape(-1)
        if len(sids) != n or len(cids) != n:
            raise ValidationError(
                f"length mismatch: {n} vectors, {len(sids)} ids, {len(cids)} classes"
            )

        finite = np.isfinite(vec).all(axis=1) if n else np.ones(0, dtype=bool)
        bad = np.flatnonzero(~finite)
        if bad.size:
            raise ValidationError(f"record {int(bad[0])}: non-finite vector component")
        norms = np.sqrt(np.einsum("ij,ij->i", vec, vec)) if n else np.ones(0)
        bad = np.flatnonzero(norms < MIN_NORM)
        if bad.size:
            raise ValidationError(
                f"record {int(bad[0])}: vector norm below {MIN_NORM:g}"
            )
        bad = np.flatnonzero(sids < 0)
        if bad.size:
            raise ValidationError(f"record {int(bad[0])}: negative sample_id")
        bad = np.flatnonzero((cids < 0) | (cids > _MAX_CLASS_ID))
        if bad.size:
            raise ValidationError(
                f"record {int(bad[0])}: class_id outside unsigned 32-bit range"
            )

        row_of: dict[int, int] = {}
        class_rows: dict[int, list[int]] = {}
        for row in range(n):
            sid = int(sids[row])
            if sid in row_of:
                raise ValidationError(f"record {row}: duplicate sample_id {sid}")
            row_of[sid] = row
            class_rows.setdefault(int(cids[row]), []).append(row)

        vec = np.ascontiguousarray(vec)
        for arr in (sids, cids, vec):
            arr.flags.writeable = False
        return cls(dim, sids, cids, vec, source_digest, row_of, class_rows)

    def __len__(self) -> int:
        return len(self.sample_ids)

    def classes(self) -> list[int]:
        """Class ids present, ascending."""
        return sorted(self._class_rows)

    def records(self) -> Iterator[EmbeddingRecord]:
        for row in range(len(self)):
            yield EmbeddingRecord(
                int(self.sample_ids[row]), int(self.class_ids[row]), self.vectors[row]
            )

    def class_view(self, class_id: int) -> list[tuple[int, np.ndarray]]:
        """``(sample_id, vector)`` pairs of one class, in file order."""
        rows = self._class_rows.get(class_id)
        if rows is None:
            raise UnknownClassError(f"class {class_id} not present in dataset")
        return [(int(self.sample_ids[r]), self.vectors[r]) for r in rows]

    def class_sizes(self) -> dict[int, int]:
        return {cid: len(rows) for cid, rows in sorted(self._class_rows.items())}

    def vector_of(self, sample_id: int) -> np.ndarray:
        row = self._row_of.get(sample_id)
        if row is None:
            raise InvalidArgumentError(f"unknown sample_id {sample_id}")
        return self.vectors[row]

    def has_positional_ids(self) -> bool:
        n = len(self)
        return bool(np.array_equal(self.sample_ids, np.arange(n, dtype=np.int64)))

    def digest(self) -> str:
        """SHA-256 hex digest of the dataset's source bytes.

        Datasets loaded from a file carry the digest of that file; datasets
        built in memory are digested over their canonical binary encoding.
        """
        if self.source_digest is not None:
            return self.source_digest
        if self._digest_cache is None:
            self._digest_cache = hashlib.sha256(canonical_bytes(self)).hexdigest()
        return self._digest_cache


def _record_dtype(dim: int, explicit_ids: bool) -> np.dtype:
    fields = [("sid", "<u8")] if explicit_ids else []
    fields += [("cid", "<u4"), ("vec", "<f4", (dim,))]
    return np.dtype(fields)


def canonical_bytes(dataset: EmbeddingDataset) -> bytes:
    """Canonical binary encoding: implicit ids iff they are positional."""
    n = len(dataset)
    dim = dataset.dimension
    explicit = not dataset.has_positional_ids()
    flags = FLAG_EXPLICIT_IDS if explicit else 0
    head = _HEADER.pack(MAGIC, FORMAT_VERSION, flags, n, dim)
    body = np.empty(n, dtype=_record_dtype(dim, explicit))
    if explicit:
        body["sid"] = dataset.sample_ids.astype(np.uint64)
    body["cid"] = dataset.class_ids.astype(np.uint32)
    body["vec"] = dataset.vectors.astype(np.float32)
    return head + body.tobytes()


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _load_binary(path: Path) -> EmbeddingDataset:
    with open(path, "rb") as f:
        head = f.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise FormatError(f"{path}: truncated header ({len(head)} bytes)")
        magic, version, flags, count, dim = _HEADER.unpack(head)
        if magic != MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        if version != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported format version {version}")
        if flags & ~FLAG_EXPLICIT_IDS:
            raise FormatError(f"{path}: unknown flag bits 0x{flags:x}")
        if dim < 1:
            raise FormatError(f"{path}: dimension must be positive, got {dim}")
        explicit = bool(flags & FLAG_EXPLICIT_IDS)
        body = np.fromfile(f, dtype=_record_dtype(dim, explicit), count=count)
        if len(body) != count:
            raise FormatError(
                f"{path}: expected {count} records, file holds {len(body)}"
            )
        if f.read(1) != b"":
            raise FormatError(f"{path}: trailing bytes after {count} records")
    if explicit:
        raw_ids = body["sid"]
        if (raw_ids > _MAX_SAMPLE_ID).any():
            bad = int(np.flatnonzero(raw_ids > _MAX_SAMPLE_ID)[0])
            raise ValidationError(f"record {bad}: sample_id exceeds supported range")
        sids = raw_ids.astype(np.int64)
    else:
        sids = np.arange(count, dtype=np.int64)
    return EmbeddingDataset.from_arrays(
        sids, body["cid"].astype(np.int64), body["vec"], source_digest=_sha256_file(path)
    )


def _load_csv(path: Path) -> EmbeddingDataset:
    sids: list[int] = []
    cids: list[int] = []
    rows: list[list[float]] = []
    dim: int | None = None
    first_content = True
    with open(path, "r", encoding="utf-8", newline="") as f:
        for ln, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            fields = [p.strip() for p in line.split(",")]
            if first_content:
                first_content = False
                # Optional header: first field non-numeric.
                try:
                    float(fields[0])
                except ValueError:
                    continue
            if len(fields) < 3:
                raise FormatError(f"{path}:{ln}: expected at least 3 fields")
            try:
                sid = int(fields[0])
                cid = int(fields[1])
                vec = [float(p) for p in fields[2:]]
            except ValueError as exc:
                raise FormatError(f"{path}:{ln}: {exc}") from exc
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise FormatError(
                    f"{path}:{ln}: expected {dim} components, got {len(vec)}"
                )
            sids.append(sid)
            cids.append(cid)
            rows.append(vec)
    vectors = np.asarray(rows, dtype=np.float64) if rows else np.zeros((0, dim or 1))
    return EmbeddingDataset.from_arrays(sids, cids, vectors, source_digest=_sha256_file(path))


def load_dataset(path, fmt: str | None = None) -> EmbeddingDataset:
    """Load a dataset; ``fmt`` is "binary" or "csv", inferred from the suffix
    when omitted (".csv" means CSV, anything else binary)."""
    path = Path(path)
    if fmt is None:
        fmt = "csv" if path.suffix.lower() == ".csv" else "binary"
    if fmt == "binary":
        return _load_binary(path)
    if fmt == "csv":
        return _load_csv(path)
    raise InvalidArgumentError(f"unknown dataset format {fmt!r}")


def dataset_to_csv(dataset: EmbeddingDataset) -> str:
    header = "sample_id,class_id," + ",".join(
        f"v{i + 1}" for i in range(dataset.dimension)
    )
    lines = [header]
    for rec in dataset.records():
        comps = ",".join(repr(float(v)) for v in rec.vector)
        lines.append(f"{rec.sample_id},{rec.class_id},{comps}")
    return "\n".join(lines) + "\n"


def write_dataset(dataset: EmbeddingDataset, path, fmt: str = "binary") -> None:
    """Serialize a dataset; binary writes are canonical."""
    path = Path(path)
    if fmt == "binary":
        path.write_bytes(canonical_bytes(dataset))
    elif fmt == "csv":
        path.write_text(dataset_to_csv(dataset), encoding="utf-8")
    else:
        raise InvalidArgumentError(f"unknown dataset format {fmt!r}")
