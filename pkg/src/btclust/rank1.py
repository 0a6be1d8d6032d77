"""Maximum-similarity binary rank-1 decompositions ``X ~ a b^T``.

Three solvers share one kernel (fix one side, solve the other exactly):

* :func:`rank1_approx` -- deterministic, tries every row (or column) of the
  input as the fixed side; within ``2*sqrt(2) - 2`` of the optimum.
* :func:`rank1_ptas` -- randomized sampling scheme, ``(1 - eps)`` of the
  optimum in expectation, exponential in ``1/eps^2``.
* :func:`rank1_brute` -- exact, enumerates the smaller side.

With a false-negative weight ``w = p/q`` every comparison is carried out on
integers scaled by ``q``, so no ties are decided by floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bintensor import BinaryMatrix, as_weight, pack_rows, popcount

# cap on the (candidates x rows x words) popcount block held in memory
_BLOCK_CELLS = 1 << 22


@dataclass(frozen=True, eq=False)
class Rank1Pair:
    a: np.ndarray
    b: np.ndarray
    sim: int
    candidates: int = field(default=0, compare=False)

    def outer(self) -> np.ndarray:
        return np.outer(self.a, self.b).astype(bool)


def _as_matrix(X) -> BinaryMatrix:
    if isinstance(X, BinaryMatrix):
        return X
    return BinaryMatrix.from_dense(np.asarray(X))


def _ratio(w) -> tuple[int, int]:
    w = as_weight(w)
    return w.numerator, w.denominator


def _overlaps(rows: np.ndarray, probes: np.ndarray) -> np.ndarray:
    """``out[c, i] = popcount(rows[i] & probes[c])`` for packed word arrays."""
    n_probe, n_row = probes.shape[0], rows.shape[0]
    width = max(rows.shape[1], 1)
    out = np.empty((n_probe, n_row), dtype=np.int64)
    step = max(1, _BLOCK_CELLS // max(n_row * width, 1))
    for start in range(0, n_probe, step):
        block = probes[start : start + step]
        out[start : start + step] = popcount(block[:, None, :] & rows[None, :, :], axis=2)
    return out


def _select(overlap, fixed_size, p: int, q: int) -> np.ndarray:
    # a row joins iff sim(row, fixed) beats sim(row, 0) under weight p/q; ties -> 0
    return (p + q) * overlap > q * fixed_size


def _check_vector(v, length: int, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=bool).reshape(-1)
    if v.shape != (length,):
        raise ValueError(f"{name} has length {v.size}, expected {length}")
    return v


def solve_a_given_b(X, b, w=1) -> np.ndarray:
    """Best ``a`` for fixed ``b``: row ``i`` is on iff ``(w+1)|x_i & b| > |b|``."""
    X = _as_matrix(X)
    b = _check_vector(b, X.cols, "b")
    p, q = _ratio(w)
    probe = pack_rows(b[None, :])
    overlap = _overlaps(X.words, probe)[0]
    return _select(overlap, int(b.sum()), p, q)


def solve_b_given_a(X, a, w=1) -> np.ndarray:
    """Column-wise majority of the rows selected by ``a``; exact ties give 0.

    For ``w > 1`` a column is set iff ``w * ones > zeros`` among those rows.
    """
    X = _as_matrix(X)
    a = _check_vector(a, X.rows, "a")
    p, q = _ratio(w)
    if not a.any():
        return np.zeros(X.cols, dtype=bool)
    ones = X.to_dense()[a].sum(axis=0, dtype=np.int64)
    return _select(ones, int(a.sum()), p, q)


def pair_similarity(X, a, b) -> int:
    """``sim(X, a b^T)`` computed from packed popcounts."""
    X = _as_matrix(X)
    a = _check_vector(a, X.rows, "a")
    b = _check_vector(b, X.cols, "b")
    overlap = _overlaps(X.words, pack_rows(b[None, :]))[0]
    kept = int(overlap[a].sum())
    missed = X.count() - kept
    spurious = int(a.sum()) * int(b.sum()) - kept
    return X.rows * X.cols - missed - spurious


def _best_fixed_rows(X: BinaryMatrix, p: int, q: int):
    """Try every row of ``X`` as the fixed side; returns (cost, index, selection).

    ``cost`` is the scaled weighted error ``q * (w*FN + FP)``. Index ``-1`` is
    the all-zero decomposition, which wins every tie.
    """
    sizes = X.row_counts()
    base = p * int(sizes.sum())
    best_cost, best_idx = base, -1
    step = max(1, _BLOCK_CELLS // max(X.rows * max(X.words.shape[1], 1), 1))
    for start in range(0, X.rows, step):
        overlap = _overlaps(X.words, X.words[start : start + step])
        gain = (p + q) * overlap - q * sizes[start : start + step, None]
        cost = base - np.where(gain > 0, gain, 0).sum(axis=1)
        j = int(np.argmin(cost))
        if cost[j] < best_cost:
            best_cost, best_idx = int(cost[j]), start + j
    return best_cost, best_idx


def rank1_approx(X, w=1) -> Rank1Pair:
    """Deterministic rank-1 approximation.

    Every row of ``X`` is tried as ``b`` with the optimal ``a`` for it. When
    ``X`` has fewer columns than rows the transpose is scanned instead (columns
    as ``a``); for square inputs both sides are tried so the result is
    transpose-symmetric. The all-zero pair is always a candidate.
    """
    X = _as_matrix(X)
    if X.rows == 0 or X.cols == 0:
        raise ValueError("rank1_approx needs a non-empty matrix")
    p, q = _ratio(w)
    options = []
    if X.rows <= X.cols:
        cost, idx = _best_fixed_rows(X, p, q)
        options.append((cost, "row", idx))
    if X.cols <= X.rows:
        cost, idx = _best_fixed_rows(X.T, p, q)
        options.append((cost, "col", idx))

    cost, side, idx = options[0]
    for option in options[1:]:
        if option[0] < cost:
            cost, side, idx = option

    if idx < 0:
        a = np.zeros(X.rows, dtype=bool)
        b = np.zeros(X.cols, dtype=bool)
    elif side == "row":
        b = X.row(idx)
        a = solve_a_given_b(X, b, w)
    else:
        a = X.T.row(idx)
        b = solve_b_given_a(X, a, w)
    tried = sum(X.rows if s == "row" else X.cols for _, s, _ in options) + 1
    return Rank1Pair(a, b, pair_similarity(X, a, b), candidates=tried)


def ptas_sample_size(eps: float, c: float = 1.0) -> int:
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if c <= 0:
        raise ValueError(f"sample constant must be positive, got {c}")
    return math.ceil(c / eps**2)


def _bit_table(s: int, start: int, stop: int) -> np.ndarray:
    masks = np.arange(start, stop, dtype=np.int64)
    return ((masks[:, None] >> np.arange(s, dtype=np.int64)) & 1).astype(np.float64)


def rank1_ptas(X, eps: float, rng=None, c: float = 1.0, w=1, max_sample: int = 24) -> Rank1Pair:
    """Randomized sampling scheme for rank-1 decompositions.

    Draws ``s = ceil(c / eps^2)`` rows with replacement (duplicates are kept
    and count in the majority vote). For each of the ``2^s`` subsets of the
    sample, ``b`` is the majority of the chosen sample rows and ``a`` is then
    solved on the whole of ``X``. The empty subset yields the zero pair, so
    the result is never worse than the empty decomposition.
    """
    X = _as_matrix(X)
    s = ptas_sample_size(eps, c)
    if s > max_sample:
        raise ValueError(f"sample size {s} exceeds the enumeration cap {max_sample}")
    p, q = _ratio(w)
    rng = np.random.default_rng(rng)
    dense = X.to_dense().astype(np.float64)
    sample = dense[rng.integers(0, X.rows, size=s)]
    total = int(dense.sum())

    best_cost, best_mask = p * total, 0
    step = max(1, _BLOCK_CELLS // max(X.rows + X.cols, 1))
    for start in range(0, 1 << s, step):
        subsets = _bit_table(s, start, min(start + step, 1 << s))
        ones = subsets @ sample
        b = _select(ones, subsets.sum(axis=1, keepdims=True), p, q)
        overlap = b.astype(np.float64) @ dense.T
        gain = (p + q) * overlap - q * b.sum(axis=1, keepdims=True)
        cost = p * total - np.where(gain > 0, gain, 0).sum(axis=1)
        j = int(np.argmin(cost))
        if cost[j] < best_cost:
            best_cost, best_mask = int(cost[j]), start + j

    chosen = _bit_table(s, best_mask, best_mask + 1)[0].astype(bool)
    if chosen.any():
        b = _select(sample[chosen].sum(axis=0), int(chosen.sum()), p, q)
    else:
        b = np.zeros(X.cols, dtype=bool)
    a = solve_a_given_b(X, b, w)
    return Rank1Pair(a, b, pair_similarity(X, a, b), candidates=1 << s)


def rank1_brute(X, w=1, cap: int = 20) -> Rank1Pair:
    """Exact optimum by enumerating every vector on the smaller side."""
    X = _as_matrix(X)
    transpose = X.cols < X.rows
    M = X.T if transpose else X
    r = M.rows
    if r > cap:
        raise ValueError(f"smaller side {r} exceeds the brute-force cap {cap}")
    p, q = _ratio(w)
    dense = M.to_dense().astype(np.float64)
    total = int(dense.sum())

    best_cost, best_mask = None, 0
    step = max(1, _BLOCK_CELLS // max(M.cols + r, 1))
    for start in range(0, 1 << r, step):
        sel = _bit_table(r, start, min(start + step, 1 << r))
        ones = sel @ dense
        gain = (p + q) * ones - q * sel.sum(axis=1, keepdims=True)
        cost = p * total - np.where(gain > 0, gain, 0).sum(axis=1)
        j = int(np.argmin(cost))
        if best_cost is None or cost[j] < best_cost:
            best_cost, best_mask = int(cost[j]), start + j

    fixed = _bit_table(r, best_mask, best_mask + 1)[0].astype(bool)
    other = solve_b_given_a(M, fixed, w)
    a, b = (other, fixed) if transpose else (fixed, other)
    return Rank1Pair(a, b, pair_similarity(X, a, b), candidates=1 << r)
