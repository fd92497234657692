"""Cosine dissimilarity kernels and the condensed pairwise matrix.

All dissimilarities are clamped to ``[0, 2]``: floating-point rounding can
otherwise push ``1 - cos`` marginally outside the mathematical range for
near-identical or near-opposite directions.
"""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np

from .errors import InvalidArgumentError

MIN_NORM = 1e-30

# Rows per block when building the pairwise matrix; bounds the size of the
# intermediate gram block to roughly block * n doubles.
_BLOCK_ELEMS = 1 << 22


def _clamp(value: float) -> float:
    return 0.0 if value < 0.0 else (2.0 if value > 2.0 else value)


def cosine_dissimilarity(x1, x2) -> float:
    """``1 - <x1,x2> / (|x1| |x2|)``, clamped to ``[0, 2]``.

    Exactly symmetric: both argument orders run the same dot products and the
    norm product commutes bitwise.
    """
    a = np.asarray(x1, dtype=np.float64)
    b = np.asarray(x2, dtype=np.float64)
    if a.ndim != 1 or a.shape != b.shape:
        raise InvalidArgumentError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if a.shape[0] < 1:
        raise InvalidArgumentError("vectors must have at least one component")
    na = math.sqrt(float(np.dot(a, a)))
    nb = math.sqrt(float(np.dot(b, b)))
    if na < MIN_NORM or nb < MIN_NORM:
        raise InvalidArgumentError(
            f"zero-norm vector (norm below {MIN_NORM:g}) has no direction"
        )
    if np.array_equal(a, b):
        return 0.0  # the quotient form can round identical vectors to +-1 ulp
    return _clamp(1.0 - float(np.dot(a, b)) / (na * nb))


def cluster_dissimilarity(c1: Iterable, c2: Iterable) -> float:
    """Complete linkage: maximum pairwise dissimilarity across two point sets."""
    m1 = [np.asarray(v, dtype=np.float64) for v in c1]
    m2 = [np.asarray(v, dtype=np.float64) for v in c2]
    if not m1 or not m2:
        raise InvalidArgumentError("cluster dissimilarity needs non-empty clusters")
    return max(cosine_dissimilarity(a, b) for a in m1 for b in m2)


def unit_rows(X: np.ndarray) -> np.ndarray:
    """Rows of ``X`` scaled to unit norm; rejects rows with no direction."""
    X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
    if X.ndim != 2:
        raise InvalidArgumentError(f"expected a 2-d array of row vectors, got ndim={X.ndim}")
    norms = np.sqrt(np.einsum("ij,ij->i", X, X))
    bad = np.flatnonzero(norms < MIN_NORM)
    if bad.size:
        raise InvalidArgumentError(f"row {int(bad[0])} has norm below {MIN_NORM:g}")
    return X / norms[:, None]


def one_to_many(x: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Dissimilarity of one vector to each row of ``M``."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 1:
        raise InvalidArgumentError("expected a single vector")
    na = math.sqrt(float(np.dot(a, a)))
    if na < MIN_NORM:
        raise InvalidArgumentError(f"zero-norm vector (norm below {MIN_NORM:g}) has no direction")
    M = np.asarray(M, dtype=np.float64)
    U = unit_rows(M)
    if U.shape[1] != a.shape[0]:
        raise InvalidArgumentError(f"dimension mismatch: {a.shape[0]} vs {U.shape[1]}")
    d = 1.0 - (U @ (a / na))
    np.clip(d, 0.0, 2.0, out=d)
    d[(M == a).all(axis=1)] = 0.0  # exact duplicates are exactly zero
    return d


def condensed_offsets(n: int) -> np.ndarray:
    """``offsets[i]`` = condensed index of pair ``(i, i+1)`` for an n-point matrix."""
    i = np.arange(n, dtype=np.int64)
    return i * n - (i * (i + 1)) // 2


def condensed_index(n: int, i: int, j: int) -> int:
    """Condensed position of the (i, j) pair, i != j."""
    if i > j:
        i, j = j, i
    if i < 0 or j >= n or i == j:
        raise InvalidArgumentError(f"bad pair ({i}, {j}) for n={n}")
    return i * n - (i * (i + 1)) // 2 + (j - i - 1)


def pairwise_condensed(X: np.ndarray) -> np.ndarray:
    """Upper-triangular cosine dissimilarities of the rows of ``X``.

    Returns a float64 vector of length ``n*(n-1)//2`` laid out row-major:
    (0,1), (0,2), ..., (0,n-1), (1,2), ...  Built from a blocked gram product
    of the normalized rows, so every value matches ``cosine_dissimilarity``
    of the corresponding pair to within a few ulp.
    """
    X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
    U = unit_rows(X)
    n = U.shape[0]
    out = np.empty(n * (n - 1) // 2, dtype=np.float64)
    offs = condensed_offsets(n)
    block = max(1, _BLOCK_ELEMS // max(n, 1))
    for lo in range(0, n, block):
        hi = min(n, lo + block)
        G = U[lo:hi] @ U.T
        np.subtract(1.0, G, out=G)
        np.clip(G, 0.0, 2.0, out=G)
        for i in range(lo, hi):
            out[offs[i] : offs[i] + n - 1 - i] = G[i - lo, i + 1 :]

    # Bit-identical input rows get dissimilarity exactly 0; the gram product
    # rounds them to ~1e-16 otherwise.
    groups: dict[bytes, list[int]] = {}
    for i in range(n):
        groups.setdefault(X[i].tobytes(), []).append(i)
    for rows in groups.values():
        if len(rows) < 2:
            continue
        r = np.array(rows, dtype=np.int64)
        ii, jj = np.triu_indices(len(r), k=1)
        a, b = r[ii], r[jj]
        out[offs[a] + b - a - 1] = 0.0
    return out
