from __future__ import annotations

import hashlib
import struct

import numpy as np
import pytest

from redunda.errors import (
    FormatError,
    InvalidArgumentError,
    UnknownClassError,
    ValidationError,
)
from redunda.store import (
    FLAG_EXPLICIT_IDS,
    FORMAT_VERSION,
    MAGIC,
    EmbeddingDataset,
    canonical_bytes,
    dataset_to_csv,
    load_dataset,
    write_dataset,
)


def small_dataset() -> EmbeddingDataset:
    vectors = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    return EmbeddingDataset.from_arrays([0, 1, 2], [0, 0, 1], vectors)


def pack_binary(n, dim, records, flags=0, version=FORMAT_VERSION, magic=MAGIC) -> bytes:
    head = struct.pack("<4sIIQI", magic, version, flags, n, dim)
    body = b""
    for rec in records:
        if flags & FLAG_EXPLICIT_IDS:
            body += struct.pack("<Q", rec[0])
        body += struct.pack("<I", rec[1])
        body += struct.pack(f"<{dim}f", *rec[2])
    return head + body


class TestFromArrays:
    def test_class_index_partitions_ids(self):
        ds = small_dataset()
        assert ds.classes() == [0, 1]
        assert [sid for sid, _ in ds.class_view(0)] == [0, 1]
        assert [sid for sid, _ in ds.class_view(1)] == [2]
        assert ds.class_sizes() == {0: 2, 1: 1}
        assert sum(ds.class_sizes().values()) == len(ds)

    def test_unknown_class_rejected(self):
        with pytest.raises(UnknownClassError):
            small_dataset().class_view(9)

    def test_vectors_widened_to_float64_and_frozen(self):
        ds = small_dataset()
        assert ds.vectors.dtype == np.float64
        with pytest.raises(ValueError):
            ds.vectors[0, 0] = 5.0

    def test_non_finite_reports_record_index(self):
        vectors = np.array([[1.0, 0.0], [np.nan, 1.0]])
        with pytest.raises(ValidationError, match="record 1"):
            EmbeddingDataset.from_arrays([0, 1], [0, 0], vectors)

    def test_zero_vector_rejected(self):
        vectors = np.array([[1.0, 0.0], [0.0, 0.0]])
        with pytest.raises(ValidationError, match="record 1"):
            EmbeddingDataset.from_arrays([0, 1], [0, 0], vectors)

    def test_duplicate_sample_id_rejected(self):
        vectors = np.array([[1.0, 0.0], [0.0, 1.0]])
        with pytest.raises(ValidationError, match="duplicate sample_id 7"):
            EmbeddingDataset.from_arrays([7, 7], [0, 0], vectors)

    def test_negative_id_and_wide_class_rejected(self):
        vectors = np.array([[1.0, 0.0]])
        with pytest.raises(ValidationError):
            EmbeddingDataset.from_arrays([-1], [0], vectors)
        with pytest.raises(ValidationError):
            EmbeddingDataset.from_arrays([0], [1 << 32], vectors)

    def test_records_iterates_in_file_order(self):
        recs = list(small_dataset().records())
        assert [r.sample_id for r in recs] == [0, 1, 2]
        assert [r.class_id for r in recs] == [0, 0, 1]
        assert np.array_equal(recs[2].vector, [1.0, 1.0])


class TestBinaryFormat:
    def test_round_trip_byte_identical(self, tmp_path):
        ds = small_dataset()
        path = tmp_path / "d.bin"
        write_dataset(ds, path, "binary")
        loaded = load_dataset(path, "binary")
        assert np.array_equal(loaded.vectors, ds.vectors)
        assert np.array_equal(loaded.sample_ids, ds.sample_ids)
        assert np.array_equal(loaded.class_ids, ds.class_ids)
        again = tmp_path / "d2.bin"
        write_dataset(loaded, again, "binary")
        assert again.read_bytes() == path.read_bytes()

    def test_positional_ids_written_implicit(self, tmp_path):
        raw = canonical_bytes(small_dataset())
        _, _, flags, count, dim = struct.unpack_from("<4sIIQI", raw)
        assert flags == 0 and count == 3 and dim == 2

    def test_explicit_ids_survive(self, tmp_path):
        vectors = np.array([[1.0, 0.0], [0.0, 1.0]])
        ds = EmbeddingDataset.from_arrays([10, 5], [1, 1], vectors)
        path = tmp_path / "e.bin"
        write_dataset(ds, path, "binary")
        raw = path.read_bytes()
        assert struct.unpack_from("<4sIIQI", raw)[2] == FLAG_EXPLICIT_IDS
        loaded = load_dataset(path)
        assert list(loaded.sample_ids) == [10, 5]

    def test_explicit_positional_file_loads_but_rewrites_canonical(self, tmp_path):
        # ids 0..n-1 spelled out explicitly: legal input, canonicalized on write
        raw = pack_binary(
            2, 2, [(0, 3, (1.0, 0.0)), (1, 3, (0.0, 1.0))], flags=FLAG_EXPLICIT_IDS
        )
        path = tmp_path / "x.bin"
        path.write_bytes(raw)
        ds = load_dataset(path)
        assert list(ds.sample_ids) == [0, 1]
        assert len(canonical_bytes(ds)) < len(raw)

    def test_load_is_deterministic(self, tmp_path):
        path = tmp_path / "d.bin"
        write_dataset(small_dataset(), path, "binary")
        a = load_dataset(path)
        b = load_dataset(path)
        assert np.array_equal(a.vectors, b.vectors)
        assert a.digest() == b.digest()

    def test_digest_is_file_sha256(self, tmp_path):
        path = tmp_path / "d.bin"
        write_dataset(small_dataset(), path, "binary")
        assert load_dataset(path).digest() == hashlib.sha256(path.read_bytes()).hexdigest()

    def test_in_memory_digest_matches_canonical_file(self, tmp_path):
        ds = small_dataset()
        path = tmp_path / "d.bin"
        write_dataset(ds, path, "binary")
        assert ds.digest() == load_dataset(path).digest()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "x.bin"
        path.write_bytes(pack_binary(1, 2, [(0, 0, (1.0, 0.0))], magic=b"NOPE"))
        with pytest.raises(FormatError, match="magic"):
            load_dataset(path)

    def test_bad_version(self, tmp_path):
        path = tmp_path / "x.bin"
        path.write_bytes(pack_binary(1, 2, [(0, 0, (1.0, 0.0))], version=9))
        with pytest.raises(FormatError, match="version"):
            load_dataset(path)

    def test_unknown_flags(self, tmp_path):
        path = tmp_path / "x.bin"
        path.write_bytes(pack_binary(1, 2, [(0, 0, (1.0, 0.0))], flags=0x4))
        with pytest.raises(FormatError, match="flag"):
            load_dataset(path)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "x.bin"
        path.write_bytes(b"REDE\x01")
        with pytest.raises(FormatError, match="truncated"):
            load_dataset(path)

    def test_truncated_records(self, tmp_path):
        raw = pack_binary(2, 2, [(0, 0, (1.0, 0.0))])  # header claims 2, holds 1
        path = tmp_path / "x.bin"
        path.write_bytes(raw)
        with pytest.raises(FormatError, match="expected 2 records"):
            load_dataset(path)

    def test_trailing_bytes(self, tmp_path):
        raw = pack_binary(1, 2, [(0, 0, (1.0, 0.0))]) + b"\x00"
        path = tmp_path / "x.bin"
        path.write_bytes(raw)
        with pytest.raises(FormatError, match="trailing"):
            load_dataset(path)

    def test_empty_dataset_round_trips(self, tmp_path):
        path = tmp_path / "x.bin"
        path.write_bytes(pack_binary(0, 4, []))
        ds = load_dataset(path)
        assert len(ds) == 0 and ds.dimension == 4 and ds.classes() == []
        out = tmp_path / "y.bin"
        write_dataset(ds, out, "binary")
        assert out.read_bytes() == path.read_bytes()

    def test_spec_worked_example(self, tmp_path):
        raw = pack_binary(
            3, 2, [(0, 0, (1.0, 0.0)), (1, 0, (0.0, 1.0)), (2, 1, (1.0, 1.0))]
        )
        path = tmp_path / "x.bin"
        path.write_bytes(raw)
        ds = load_dataset(path)
        assert [sid for sid, _ in ds.class_view(0)] == [0, 1]
        assert [sid for sid, _ in ds.class_view(1)] == [2]


class TestCsvFormat:
    def test_direct_parse(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("7,2,0.5,0.5,0.5\n")
        ds = load_dataset(path)
        assert ds.dimension == 3
        rec = next(ds.records())
        assert rec.sample_id == 7 and rec.class_id == 2
        assert np.array_equal(rec.vector, [0.5, 0.5, 0.5])

    def test_header_detected_by_non_numeric_first_field(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("sample_id,class_id,v1,v2\n0,0,1.0,0.0\n1,1,0.0,1.0\n")
        ds = load_dataset(path)
        assert len(ds) == 2 and ds.dimension == 2

    def test_dimension_mismatch_names_line(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("0,0,1.0,0.0,0.0\n1,0,1.0,0.0,0.0,9.0\n")
        with pytest.raises(FormatError, match=":2"):
            load_dataset(path)

    def test_unparseable_field_names_line(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("0,0,1.0,0.0\n1,zero,1.0,0.0\n")
        with pytest.raises(FormatError, match=":2"):
            load_dataset(path)

    def test_too_few_fields(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("0,0\n")
        with pytest.raises(FormatError):
            load_dataset(path)

    def test_round_trip_values(self, tmp_path):
        ds = small_dataset()
        path = tmp_path / "d.csv"
        write_dataset(ds, path, "csv")
        loaded = load_dataset(path)
        assert np.array_equal(loaded.vectors, ds.vectors)
        assert np.array_equal(loaded.sample_ids, ds.sample_ids)
        # repr round-trips doubles exactly, so a rewrite is byte-stable
        assert dataset_to_csv(loaded) == path.read_text()

    def test_format_inferred_from_suffix(self, tmp_path):
        bin_path = tmp_path / "d.bin"
        csv_path = tmp_path / "d.csv"
        write_dataset(small_dataset(), bin_path, "binary")
        write_dataset(small_dataset(), csv_path, "csv")
        assert len(load_dataset(bin_path)) == 3
        assert len(load_dataset(csv_path)) == 3

    def test_unknown_format_rejected(self, tmp_path):
        with pytest.raises(InvalidArgumentError):
            load_dataset(tmp_path / "d.bin", "parquet")
        with pytest.raises(InvalidArgumentError):
            write_dataset(small_dataset(), tmp_path / "d.x", "parquet")
