"""Bit-packed binary matrices and 3-way tensors.

Rows are stored as little-endian ``uint64`` words: column ``j`` of a row lives
in word ``j // 64`` at bit ``j % 64``. Padding bits past the last column are
always zero, so XOR/AND followed by a popcount never needs masking.

A :class:`BinaryTensor3` is stored as its mode-3 unfolding: one packed row per
frontal slice, each row the column-major vectorization of the ``n x m`` slice
(entry ``(i, j)`` of slice ``k`` sits at flat column ``j * n + i``).

All indices are 0-based here; 1-based coordinates appear only at the file and
CLI boundary (see :func:`from_triples`).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

WORD_BITS = 64


def n_words(bits: int) -> int:
    return (bits + WORD_BITS - 1) // WORD_BITS


def pack_rows(dense: np.ndarray) -> np.ndarray:
    """Pack a 2-D 0/1 array into ``(rows, n_words(cols))`` uint64 words."""
    dense = np.asarray(dense, dtype=bool)
    if dense.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {dense.shape}")
    rows, cols = dense.shape
    width = n_words(cols) * WORD_BITS
    padded = np.zeros((rows, width), dtype=bool)
    padded[:, :cols] = dense
    packed = np.packbits(padded, axis=1, bitorder="little")
    return np.ascontiguousarray(packed).view("<u8").astype(np.uint64, copy=False)


def unpack_rows(words: np.ndarray, cols: int) -> np.ndarray:
    """Inverse of :func:`pack_rows`; returns a bool array ``(rows, cols)``."""
    words = np.ascontiguousarray(words, dtype=np.uint64)
    as_bytes = words.astype("<u8", copy=False).view(np.uint8)
    bits = np.unpackbits(as_bytes, axis=1, bitorder="little", count=cols)
    return bits.astype(bool)


def popcount(words: np.ndarray, axis: int = -1) -> np.ndarray:
    """Number of set bits, summed along ``axis``."""
    return np.bitwise_count(words).sum(axis=axis, dtype=np.int64)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


class BinaryMatrix:
    """Immutable bit-packed ``rows x cols`` binary matrix."""

    __slots__ = ("rows", "cols", "words")

    def __init__(self, rows: int, cols: int, words: np.ndarray):
        words = np.asarray(words, dtype=np.uint64)
        if words.shape != (rows, n_words(cols)):
            raise ValueError(
                f"word array of shape {words.shape} does not fit a {rows}x{cols} matrix"
            )
        tail = cols % WORD_BITS
        if tail and rows and np.any(words[:, -1] >> np.uint64(tail)):
            raise ValueError("padding bits must be zero")
        self.rows = rows
        self.cols = cols
        self.words = _frozen(np.array(words, copy=True))

    @classmethod
    def from_dense(cls, dense) -> BinaryMatrix:
        dense = np.asarray(dense)
        if dense.ndim == 1:
            dense = dense[None, :]
        if dense.ndim != 2:
            raise ValueError(f"expected a 2-D array, got shape {dense.shape}")
        if dense.size and not np.isin(dense, (0, 1)).all():
            raise ValueError("binary matrix entries must be 0 or 1")
        return cls(dense.shape[0], dense.shape[1], pack_rows(dense))

    @classmethod
    def zeros(cls, rows: int, cols: int) -> BinaryMatrix:
        return cls(rows, cols, np.zeros((rows, n_words(cols)), dtype=np.uint64))

    @classmethod
    def identity(cls, size: int) -> BinaryMatrix:
        return cls.from_dense(np.eye(size, dtype=bool))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def to_dense(self) -> np.ndarray:
        return unpack_rows(self.words, self.cols)

    def __getitem__(self, index: tuple[int, int]) -> bool:
        i, j = index
        if not (0 <= i < self.rows and 0 <= j < self.cols):
            raise IndexError(f"cell {index} outside {self.rows}x{self.cols}")
        word = self.words[i, j // WORD_BITS]
        return bool((word >> np.uint64(j % WORD_BITS)) & np.uint64(1))

    def row(self, i: int) -> np.ndarray:
        """Dense bool copy of row ``i``."""
        return unpack_rows(self.words[i : i + 1], self.cols)[0]

    def count(self) -> int:
        return int(popcount(self.words, axis=None)) if self.words.size else 0

    def row_counts(self) -> np.ndarray:
        return popcount(self.words, axis=1)

    @property
    def T(self) -> BinaryMatrix:
        return BinaryMatrix.from_dense(self.to_dense().T)

    def select_rows(self, indices: Sequence[int]) -> BinaryMatrix:
        idx = np.asarray(indices, dtype=np.intp)
        return BinaryMatrix(len(idx), self.cols, self.words[idx])

    def is_cluster_assignment(self) -> bool:
        return bool(np.all(self.row_counts() == 1))

    def nbytes(self) -> int:
        return int(self.words.nbytes)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryMatrix):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.words, other.words)

    def __hash__(self) -> int:
        return hash((self.rows, self.cols, self.words.tobytes()))

    def __repr__(self) -> str:
        return f"BinaryMatrix({self.rows}x{self.cols}, ones={self.count()})"


class BinaryTensor3:
    """Immutable bit-packed ``n x m x l`` binary tensor.

    Storage is the mode-3 unfolding, ``l`` packed rows of ``n*m`` bits, so the
    footprint is ``l * ceil(n*m / 64) * 8`` bytes.
    """

    __slots__ = ("n", "m", "l", "_x3")

    def __init__(self, n: int, m: int, l: int, x3: BinaryMatrix):
        if min(n, m, l) < 1:
            raise ValueError(f"tensor dimensions must be positive, got {(n, m, l)}")
        if x3.shape != (l, n * m):
            raise ValueError(f"mode-3 unfolding {x3.shape} does not match {(n, m, l)}")
        self.n, self.m, self.l = n, m, l
        self._x3 = x3

    @classmethod
    def from_dense(cls, dense) -> BinaryTensor3:
        dense = np.asarray(dense)
        if dense.ndim != 3:
            raise ValueError(f"expected a 3-D array, got shape {dense.shape}")
        n, m, l = dense.shape
        # slice k, column-major: flat (j * n + i)
        x3 = np.transpose(dense, (2, 1, 0)).reshape(l, n * m)
        return cls(n, m, l, BinaryMatrix.from_dense(x3))

    @classmethod
    def zeros(cls, n: int, m: int, l: int) -> BinaryTensor3:
        return cls(n, m, l, BinaryMatrix.zeros(l, n * m))

    @classmethod
    def from_slices(cls, n: int, m: int, x3: BinaryMatrix) -> BinaryTensor3:
        return cls(n, m, x3.rows, x3)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.m, self.l)

    @property
    def x3(self) -> BinaryMatrix:
        """Mode-3 unfolding (shares storage)."""
        return self._x3

    def to_dense(self) -> np.ndarray:
        flat = self._x3.to_dense().reshape(self.l, self.m, self.n)
        return np.transpose(flat, (2, 1, 0))

    def __getitem__(self, index: tuple[int, int, int]) -> bool:
        i, j, k = index
        if not (0 <= i < self.n and 0 <= j < self.m and 0 <= k < self.l):
            raise IndexError(f"cell {index} outside {self.shape}")
        return self._x3[k, j * self.n + i]

    def count(self) -> int:
        return self._x3.count()

    def frontal_slice(self, k: int) -> np.ndarray:
        """Dense ``n x m`` bool copy of slice ``k``."""
        return self._x3.row(k).reshape(self.m, self.n).T

    def select_slices(self, indices: Sequence[int]) -> BinaryTensor3:
        return BinaryTensor3.from_slices(self.n, self.m, self._x3.select_rows(indices))

    def nonzero(self) -> np.ndarray:
        """0-based ``(i, j, k)`` coordinates of the ones, shape ``(|X|, 3)``."""
        k, flat = np.nonzero(self._x3.to_dense())
        return np.column_stack((flat % self.n, flat // self.n, k))

    def permute(self, order: Sequence[int]) -> BinaryTensor3:
        """Reorder modes; ``order[d]`` is the source mode placed at position ``d``."""
        order = tuple(int(o) for o in order)
        if sorted(order) != [0, 1, 2]:
            raise ValueError(f"invalid mode permutation {order}")
        coords = self.nonzero()[:, order]
        shape = tuple(self.shape[o] for o in order)
        return _from_coords(shape, coords)

    def storage_bytes(self) -> int:
        return self._x3.nbytes()

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryTensor3):
            return NotImplemented
        return self.shape == other.shape and self._x3 == other._x3

    def __hash__(self) -> int:
        return hash((self.shape, hash(self._x3)))

    def __repr__(self) -> str:
        return f"BinaryTensor3({self.n}x{self.m}x{self.l}, ones={self.count()})"


def _from_coords(shape, coords: np.ndarray) -> BinaryTensor3:
    n, m, l = shape
    x3 = np.zeros((l, n * m), dtype=bool)
    if len(coords):
        x3[coords[:, 2], coords[:, 1] * n + coords[:, 0]] = True
    return BinaryTensor3(n, m, l, BinaryMatrix.from_dense(x3))


def from_triples(n: int, m: int, l: int, entries: Iterable[tuple[int, int, int]]) -> BinaryTensor3:
    """Build a tensor from 1-based ``(i, j, k)`` coordinates; duplicates collapse."""
    coords = np.array(list(entries), dtype=np.int64).reshape(-1, 3)
    if len(coords):
        dims = np.array([n, m, l])
        bad = np.nonzero(((coords < 1) | (coords > dims)).any(axis=1))[0]
        if len(bad):
            raise ValueError(
                f"coordinate {tuple(int(c) for c in coords[bad[0]])} outside {n}x{m}x{l}"
            )
    return _from_coords((n, m, l), coords - 1)


# -- unfolding ---------------------------------------------------------------


@dataclass(frozen=True)
class _Layout:
    rows: int      # mode index that labels rows
    fast: int      # column index varying fastest
    slow: int


_LAYOUTS = {1: _Layout(0, 1, 2), 2: _Layout(1, 0, 2), 3: _Layout(2, 0, 1)}


def unfold(X: BinaryTensor3, mode: int) -> BinaryMatrix:
    """Mode-``mode`` matricization (``mode`` in 1..3).

    Column ordering matches the Khatri-Rao forms: ``X_(1) = A (C kr B)^T``,
    ``X_(2) = B (C kr A)^T``, ``X_(3) = C (B kr A)^T``.
    """
    if mode == 3:
        return X.x3
    lay = _layout(mode)
    dense = X.to_dense()
    arranged = np.transpose(dense, (lay.rows, lay.slow, lay.fast))
    return BinaryMatrix.from_dense(arranged.reshape(X.shape[lay.rows], -1))


def fold(M: BinaryMatrix, mode: int, shape: tuple[int, int, int]) -> BinaryTensor3:
    n, m, l = shape
    if mode == 3:
        return BinaryTensor3(n, m, l, M)
    lay = _layout(mode)
    expected = (shape[lay.rows], shape[lay.fast] * shape[lay.slow])
    if M.shape != expected:
        raise ValueError(f"matrix {M.shape} cannot fold to {shape} along mode {mode}")
    arranged = M.to_dense().reshape(shape[lay.rows], shape[lay.slow], shape[lay.fast])
    inverse = np.argsort((lay.rows, lay.slow, lay.fast))
    return BinaryTensor3.from_dense(np.transpose(arranged, inverse))


def _layout(mode: int) -> _Layout:
    try:
        return _LAYOUTS[mode]
    except KeyError:
        raise ValueError(f"mode must be 1, 2 or 3, got {mode!r}") from None


def reshape_col_major(x, n: int, m: int) -> np.ndarray:
    """View an ``n*m`` bit row as the ``n x m`` matrix it vectorizes."""
    x = np.asarray(x, dtype=bool)
    if x.shape != (n * m,):
        raise ValueError(f"row of length {x.shape} cannot be reshaped to {n}x{m}")
    return x.reshape(m, n).T


def vec_col_major(Y) -> np.ndarray:
    return np.asarray(Y, dtype=bool).T.reshape(-1)


# -- similarity --------------------------------------------------------------


def similarity(X, Y) -> int:
    """Number of agreeing cells between two equal-shaped binary arrays.

    Accepts pairs of :class:`BinaryTensor3`, pairs of :class:`BinaryMatrix` or
    pairs of dense 0/1 arrays.
    """
    if isinstance(X, BinaryTensor3) and isinstance(Y, BinaryTensor3):
        if X.shape != Y.shape:
            raise ValueError(f"shape mismatch: {X.shape} vs {Y.shape}")
        return X.n * X.m * X.l - _hamming(X.x3.words, Y.x3.words)
    if isinstance(X, BinaryMatrix) and isinstance(Y, BinaryMatrix):
        if X.shape != Y.shape:
            raise ValueError(f"shape mismatch: {X.shape} vs {Y.shape}")
        return X.rows * X.cols - _hamming(X.words, Y.words)
    x = np.asarray(X, dtype=bool)
    y = np.asarray(Y, dtype=bool)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    return int(x.size - np.count_nonzero(x ^ y))


def _hamming(a: np.ndarray, b: np.ndarray) -> int:
    if a.size == 0:
        return 0
    return int(popcount(a ^ b, axis=None))


def weighted_cost(x, y, w=1) -> object:
    """Weighted disagreement: a 1 represented as 0 costs ``w``, a 0 as 1 costs 1.

    The result is exact (``fractions.Fraction`` when ``w`` is not integral).
    """
    w = as_weight(w)
    x = np.asarray(x, dtype=bool)
    y = np.asarray(y, dtype=bool)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    false_neg = int(np.count_nonzero(x & ~y))
    false_pos = int(np.count_nonzero(~x & y))
    cost = w * false_neg + false_pos
    return int(cost) if cost.denominator == 1 else cost


def weighted_similarity(x, y, w=1) -> object:
    """``size - weighted_cost``; identical to :func:`similarity` when ``w == 1``."""
    return np.asarray(x).size - weighted_cost(x, y, w)


def as_weight(w) -> Fraction:
    """Parse a false-negative weight as an exact fraction; must be >= 1."""
    if isinstance(w, float):
        if not np.isfinite(w):
            raise ValueError(f"weight must be finite, got {w}")
        w = Fraction(w).limit_denominator(10**6)
    w = Fraction(w)
    if w < 1:
        raise ValueError(f"weight must be >= 1, got {w}")
    return w


# -- products ----------------------------------------------------------------


def kronecker(x, y) -> np.ndarray:
    """Kronecker product of two bit vectors: position ``i*len(y) + j`` is ``x_i y_j``."""
    x = np.asarray(x, dtype=bool).reshape(-1)
    y = np.asarray(y, dtype=bool).reshape(-1)
    return (x[:, None] & y[None, :]).reshape(-1)


def khatri_rao(Xm: BinaryMatrix, Ym: BinaryMatrix) -> BinaryMatrix:
    """Column-wise Kronecker product; ``(p x r), (q x r) -> (pq x r)``."""
    if Xm.cols != Ym.cols:
        raise ValueError(f"column counts differ: {Xm.cols} vs {Ym.cols}")
    x = Xm.to_dense()
    y = Ym.to_dense()
    out = (x[:, None, :] & y[None, :, :]).reshape(Xm.rows * Ym.rows, Xm.cols)
    return BinaryMatrix.from_dense(out)


def boolean_matrix_product(Xm: BinaryMatrix, Ym: BinaryMatrix) -> BinaryMatrix:
    """OR-AND product ``(Xm o Ym)_ij = OR_t Xm_it AND Ym_tj``.

    Computed row-wise as the OR of the rows of ``Ym`` selected by each row of
    ``Xm``, so it works directly on packed words.
    """
    if Xm.cols != Ym.rows:
        raise ValueError(f"inner dimensions differ: {Xm.shape} o {Ym.shape}")
    out = np.zeros((Xm.rows, Ym.words.shape[1]), dtype=np.uint64)
    sel = Xm.to_dense()
    for t in range(Xm.cols):
        rows = sel[:, t]
        if rows.any():
            out[rows] |= Ym.words[t]
    return BinaryMatrix(Xm.rows, Ym.cols, out)


def integer_matrix_product(Xm: BinaryMatrix, Ym: BinaryMatrix) -> np.ndarray:
    """Ordinary integer product of the 0/1 matrices (not reduced mod anything)."""
    if Xm.cols != Ym.rows:
        raise ValueError(f"inner dimensions differ: {Xm.shape} x {Ym.shape}")
    return Xm.to_dense().astype(np.int64) @ Ym.to_dense().astype(np.int64)


# -- models ------------------------------------------------------------------


@dataclass(frozen=True)
class FactorTriple:
    """Factors ``A (n x k)``, ``B (m x k)``, ``C (l x k)`` of a Boolean CP model."""

    A: BinaryMatrix
    B: BinaryMatrix
    C: BinaryMatrix
    clustering: bool = False

    def __post_init__(self):
        if not (self.A.cols == self.B.cols == self.C.cols):
            raise ValueError(
                f"factor ranks differ: {self.A.cols}, {self.B.cols}, {self.C.cols}"
            )
        if self.clustering and not self.C.is_cluster_assignment():
            raise ValueError("C must have exactly one 1 per row for a clustering model")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.A.rows, self.B.rows, self.C.rows)

    @property
    def rank(self) -> int:
        return self.A.cols


@dataclass(frozen=True)
class TuckerModel:
    G: BinaryTensor3
    A: BinaryMatrix
    B: BinaryMatrix
    C: BinaryMatrix

    def __post_init__(self):
        if (self.A.cols, self.B.cols, self.C.cols) != self.G.shape:
            raise ValueError(
                f"factor ranks {(self.A.cols, self.B.cols, self.C.cols)} "
                f"do not match core {self.G.shape}"
            )


def bcp_reconstruct(F: FactorTriple) -> BinaryTensor3:
    """``OR_t a_t x b_t x c_t`` built from the mode-3 form ``C o (B kr A)^T``."""
    n, m, l = F.shape
    centroids = khatri_rao(F.B, F.A).T
    return BinaryTensor3(n, m, l, boolean_matrix_product(F.C, centroids))


def tucker_reconstruct(T: TuckerModel) -> BinaryTensor3:
    """``OR_{abc} g_abc a_a x b_b x c_c``."""
    n, m, l = T.A.rows, T.B.rows, T.C.rows
    # mode-3 form: X_(3) = C o G_(3) o (B kr A)^T in Boolean algebra
    core = T.G.x3                                         # r3 x (r1 r2)
    kr = kronecker_matrix(T.B, T.A)                        # (n m) x (r1 r2)
    inner = boolean_matrix_product(core, kr.T)            # r3 x (n m)
    return BinaryTensor3(n, m, l, boolean_matrix_product(T.C, inner))


def kronecker_matrix(Xm: BinaryMatrix, Ym: BinaryMatrix) -> BinaryMatrix:
    """Full Kronecker product of two matrices."""
    out = np.kron(Xm.to_dense().astype(np.uint8), Ym.to_dense().astype(np.uint8))
    return BinaryMatrix.from_dense(out)
