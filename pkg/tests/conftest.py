from __future__ import annotations

import numpy as np
import pytest

from redunda.store import EmbeddingDataset


@pytest.fixture
def tiny_dataset() -> EmbeddingDataset:
    """3 records, 2 classes, dim 2 — the smallest interesting dataset."""
    vectors = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    return EmbeddingDataset.from_arrays([0, 1, 2], [0, 0, 1], vectors)


def random_unit_rows(rs: np.random.Generator, n: int, dim: int) -> np.ndarray:
    X = rs.normal(size=(n, dim))
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def with_duplicates(rs: np.random.Generator, X: np.ndarray, copies: int) -> np.ndarray:
    """Overwrite `copies` random rows with copies of other rows (forces ties)."""
    X = X.copy()
    n = len(X)
    for _ in range(copies):
        i, j = rs.integers(0, n, size=2)
        X[i] = X[j]
    return X


def stacked_dataset(class_arrays: dict, start_id: int = 0) -> EmbeddingDataset:
    """Stack per-class arrays into a dataset with sequential sample_ids."""
    sids, cids, rows = [], [], []
    nxt = start_id
    for cid, X in class_arrays.items():
        for row in np.asarray(X, dtype=np.float64):
            sids.append(nxt)
            cids.append(cid)
            rows.append(row)
            nxt += 1
    return EmbeddingDataset.from_arrays(
        np.array(sids, dtype=np.int64),
        np.array(cids, dtype=np.int64),
        np.array(rows, dtype=np.float64),
    )
