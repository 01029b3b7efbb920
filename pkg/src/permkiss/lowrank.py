"""Factorized permutation representation and its materializations.

A permutation of n elements is carried by two n x m factor matrices plus a
softmax temperature.  With row-normalized factors built on a spherical code,
thresholding 2 V W^T - 1 at zero reproduces the permutation exactly, and a
row-wise softmax of 2 alpha V W^T approximates it to any accuracy.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import backend

# guard against accidental materialization of billion-entry matrices
DENSE_CAP = 20000

DEGENERATE_ROW_NORM = 1e-300


class DegenerateRowError(ValueError):
    """A factor row has (numerically) zero norm and cannot be normalized."""


@dataclass
class FactorPair:
    """Low-rank permutation representation: factors V, W and temperature alpha."""

    V: np.ndarray
    W: np.ndarray
    alpha: float = 1.0

    def __post_init__(self):
        self.V = np.asarray(self.V, dtype=np.float64)
        self.W = np.asarray(self.W, dtype=np.float64)
        if self.V.shape != self.W.shape:
            raise ValueError(f"V and W shapes differ: {self.V.shape} vs {self.W.shape}")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")

    @property
    def n(self) -> int:
        return self.V.shape[0]

    @property
    def m(self) -> int:
        return self.V.shape[1]


class Assignment:
    """A permutation as an index vector: row i maps to column target[i]."""

    def __init__(self, target):
        target = np.asarray(target, dtype=np.int64)
        n = target.shape[0]
        if target.ndim != 1:
            raise ValueError("assignment target must be one-dimensional")
        counts = np.bincount(target, minlength=n) if n else np.empty(0, dtype=np.int64)
        if target.size and (target.min() < 0 or target.max() >= n or (counts != 1).any()):
            raise ValueError("assignment target is not a bijection on [0, n)")
        self.target = target

    def __len__(self):
        return self.target.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Assignment):
            return NotImplemented
        return np.array_equal(self.target, other.target)

    def __repr__(self):
        return f"Assignment({self.target.tolist()})"

    @classmethod
    def identity(cls, n: int) -> "Assignment":
        return cls(np.arange(n, dtype=np.int64))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "Assignment":
        return cls(rng.permutation(n).astype(np.int64))

    def to_matrix(self) -> np.ndarray:
        n = len(self)
        p = np.zeros((n, n))
        p[np.arange(n), self.target] = 1.0
        return p

    def inverse(self) -> "Assignment":
        inv = np.empty_like(self.target)
        inv[self.target] = np.arange(len(self), dtype=np.int64)
        return Assignment(inv)


class EntrySet:
    """A set of (row, col) index pairs with CSR-style per-row grouping.

    Entries are kept sorted lexicographically by (row, col); rows with no
    entries simply do not appear.
    """

    def __init__(self, rows, cols, n: int):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if rows.shape != cols.shape or rows.ndim != 1:
            raise ValueError("rows and cols must be equal-length 1-d arrays")
        if rows.size:
            if rows.min() < 0 or rows.max() >= n or cols.min() < 0 or cols.max() >= n:
                raise ValueError(f"entry indices out of range for n={n}")
        order = np.lexsort((cols, rows))
        rows, cols = rows[order], cols[order]
        if rows.size > 1:
            dup = (np.diff(rows) == 0) & (np.diff(cols) == 0)
            if dup.any():
                k = int(np.nonzero(dup)[0][0])
                raise ValueError(f"duplicate entry ({rows[k]}, {cols[k]})")
        self.rows = rows
        self.cols = cols
        self.n = int(n)
        self.active_rows, counts = np.unique(rows, return_counts=True)
        self.seg_ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)

    def __len__(self):
        return self.rows.shape[0]

    @property
    def density(self) -> float:
        return len(self) / float(self.n) ** 2

    def covers_all_rows(self) -> bool:
        return self.active_rows.size == self.n

    @classmethod
    def full(cls, n: int) -> "EntrySet":
        rows = np.repeat(np.arange(n, dtype=np.int64), n)
        cols = np.tile(np.arange(n, dtype=np.int64), n)
        return cls(rows, cols, n)

    @classmethod
    def from_pairs(cls, pairs, n: int) -> "EntrySet":
        arr = np.asarray(list(pairs), dtype=np.int64).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1], n)


def exact_factor_pair(assignment: Assignment, code_points: np.ndarray,
                      alpha: float = 1.0) -> FactorPair:
    """Factor pair exactly representing the assignment on a spherical code.

    W scatters the code so that W[p(i)] = V[i]; the thresholded product then
    has its ones exactly at (i, p(i)).
    """
    v = np.asarray(code_points, dtype=np.float64)
    w = np.empty_like(v)
    w[assignment.target] = v
    return FactorPair(v, w, alpha)


def normalize(fp: FactorPair) -> FactorPair:
    """Scale every row of V and W to unit Euclidean norm."""
    out = []
    for name, x in (("V", fp.V), ("W", fp.W)):
        norms = np.linalg.norm(x, axis=1, keepdims=True)
        if (norms < DEGENERATE_ROW_NORM).any():
            i = int(np.argmin(norms))
            raise DegenerateRowError(f"degenerate row {i} in {name}: norm {norms[i, 0]:.3e}")
        out.append(x / norms)
    return replace(fp, V=out[0], W=out[1])


def _check_cap(n: int, cap: int):
    if n > cap:
        raise ValueError(
            f"refusing to materialize a dense {n}x{n} matrix (cap {cap}); "
            "use the sparse entry evaluation instead"
        )


def relu_permutation(fp: FactorPair, cap: int = DENSE_CAP) -> np.ndarray:
    """Dense materialization max(2 V W^T - 1, 0) of the normalized factors."""
    _check_cap(fp.n, cap)
    fp = normalize(fp)
    return np.maximum(2.0 * (fp.V @ fp.W.T) - 1.0, 0.0)


def softmax_permutation(fp: FactorPair, cap: int = DENSE_CAP) -> np.ndarray:
    """Dense row-stochastic materialization: row-wise softmax of 2 alpha V W^T."""
    _check_cap(fp.n, cap)
    fp = normalize(fp)
    logits = 2.0 * fp.alpha * (fp.V @ fp.W.T)
    logits -= logits.max(axis=1, keepdims=True)
    z = np.exp(logits)
    return z / z.sum(axis=1, keepdims=True)


def evaluate_entries(fp: FactorPair, entries: EntrySet) -> np.ndarray:
    """Softmax values at the listed entries only, per-row over listed columns.

    Unlisted entries are implicitly zero.  Returned values align with the
    entry set's (row, col)-sorted order.
    """
    if fp.n != entries.n:
        raise ValueError(f"entry set is for n={entries.n}, factors have n={fp.n}")
    fp = normalize(fp)
    logits = 2.0 * fp.alpha * backend.entry_dots(fp.V, fp.W, entries.rows, entries.cols)
    return backend.segment_softmax(logits, entries.seg_ptr)


def greedy_round(p: np.ndarray) -> Assignment:
    """Round a nonnegative matrix to a permutation by repeated global argmax.

    Each of the n iterations fixes the largest remaining entry and removes
    its row and column.  Ties break to the lowest (row, col) pair.
    """
    p = np.array(p, dtype=np.float64, copy=True)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.isfinite(p).all() or (p < 0).any():
        raise ValueError("expected a finite nonnegative matrix")
    n = p.shape[0]
    target = np.full(n, -1, dtype=np.int64)
    for _ in range(n):
        flat = int(np.argmax(p))
        i, j = divmod(flat, n)
        target[i] = j
        p[i, :] = -1.0
        p[:, j] = -1.0
    return Assignment(target)


def greedy_round_sparse(entries: EntrySet, values: np.ndarray) -> Assignment:
    """greedy_round on the implicit-zero matrix carried by an entry set.

    Produces exactly the assignment greedy_round would return on the dense
    zero-filled matrix, without materializing it.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.shape != entries.rows.shape:
        raise ValueError("values must align with the entry set")
    n = entries.n
    target = np.full(n, -1, dtype=np.int64)
    row_free = np.ones(n, dtype=bool)
    col_free = np.ones(n, dtype=bool)
    pos = values > 0.0  # zero-valued entries tie with the implicit zeros
    order = np.lexsort((entries.cols[pos], entries.rows[pos], -values[pos]))
    rows, cols = entries.rows[pos][order], entries.cols[pos][order]
    for i, j in zip(rows, cols):
        if row_free[i] and col_free[j]:
            target[i] = j
            row_free[i] = False
            col_free[j] = False
    # remaining all-zero rows pair with free columns in lexicographic order
    target[row_free] = np.nonzero(col_free)[0]
    return Assignment(target)


def validity_metrics(p: np.ndarray, threshold: float = 0.5) -> tuple[bool, int]:
    """Binarize by threshold; validity and row/column violation count.

    hamming counts rows whose binarized sum differs from one, plus columns
    whose binarized sum differs from one (a proxy for the edit distance to
    the nearest valid permutation).
    """
    b = np.asarray(p) > threshold
    row_bad = int((b.sum(axis=1) != 1).sum())
    col_bad = int((b.sum(axis=0) != 1).sum())
    return (row_bad + col_bad == 0), row_bad + col_bad


def validity_metrics_sparse(
    entries: EntrySet, values: np.ndarray, threshold: float = 0.5
) -> tuple[bool, int]:
    """validity_metrics on the implicit-zero matrix carried by an entry set."""
    keep = np.asarray(values, dtype=np.float64) > threshold
    n = entries.n
    row_sum = np.bincount(entries.rows[keep], minlength=n)
    col_sum = np.bincount(entries.cols[keep], minlength=n)
    bad = int((row_sum != 1).sum() + (col_sum != 1).sum())
    return bad == 0, bad


def representation_size(n: int, m: int) -> tuple[int, int]:
    """(factorized element count 2 n m, dense element count n^2)."""
    return 2 * n * m, n * n
