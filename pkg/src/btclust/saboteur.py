"""Sampling-based Boolean tensor clustering of the frontal slices.

Every algorithm here works on the mode-3 unfolding ``X_(3)`` (one packed row
per frontal slice). A restricted centroid is the vectorized rank-1 matrix
``kron(b, a)``; an unrestricted centroid is any ``n*m`` bit row.

Objective: maximize similarity, or with a false-negative weight ``w`` minimize
``w * FN + FP``. Reported ``sim`` is always the plain (unweighted) similarity.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import NamedTuple, Union

import numpy as np

from .bintensor import (
    BinaryMatrix,
    BinaryTensor3,
    FactorTriple,
    as_weight,
    bcp_reconstruct,
    kronecker,
    pack_rows,
    popcount,
    reshape_col_major,
    similarity,
    unpack_rows,
)
from .rank1 import _BLOCK_CELLS, rank1_approx

log = logging.getLogger(__name__)


class Assignment(NamedTuple):
    labels: np.ndarray         # 0-based centroid index per row
    sim: int                   # total unweighted similarity
    row_sims: np.ndarray       # per-row unweighted similarity
    cost: Fraction             # total w*FN + FP


@dataclass(frozen=True, eq=False)
class ClusterModel:
    """``k`` rank-1 centroids ``a_j b_j^T`` and a slice-to-cluster assignment."""

    A: np.ndarray              # n x k
    B: np.ndarray              # m x k
    assignment: np.ndarray     # length l, values in 0..k-1
    sim: int
    weight: Fraction = Fraction(1)
    cost: Fraction = Fraction(0)
    resample_sims: tuple = field(default=(), compare=False)
    rounds: int = field(default=0, compare=False)

    @property
    def k(self) -> int:
        return self.A.shape[1]

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.A.shape[0], self.B.shape[0], len(self.assignment))

    def centroid(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        return self.A[:, j].copy(), self.B[:, j].copy()

    def centroid_rows(self) -> BinaryMatrix:
        rows = [kronecker(self.B[:, j], self.A[:, j]) for j in range(self.k)]
        return BinaryMatrix.from_dense(np.array(rows, dtype=bool).reshape(self.k, -1))

    def factors(self) -> FactorTriple:
        C = np.zeros((len(self.assignment), self.k), dtype=bool)
        C[np.arange(len(self.assignment)), self.assignment] = True
        return FactorTriple(
            BinaryMatrix.from_dense(self.A),
            BinaryMatrix.from_dense(self.B),
            BinaryMatrix.from_dense(C),
            clustering=True,
        )

    def reconstruct(self) -> BinaryTensor3:
        return bcp_reconstruct(self.factors())


@dataclass(frozen=True, eq=False)
class UnrestrictedModel:
    """``k`` arbitrary ``n x m`` binary centroids, stored as mode-3 rows."""

    n: int
    m: int
    centroids: BinaryMatrix    # k x (n m)
    assignment: np.ndarray
    sim: int
    weight: Fraction = Fraction(1)
    cost: Fraction = Fraction(0)
    resample_sims: tuple = field(default=(), compare=False)
    rounds: int = field(default=0, compare=False)

    @property
    def k(self) -> int:
        return self.centroids.rows

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.m, len(self.assignment))

    def centroid_rows(self) -> BinaryMatrix:
        return self.centroids

    def reconstruct(self) -> BinaryTensor3:
        rows = self.centroids.words[self.assignment]
        return BinaryTensor3(self.n, self.m, len(self.assignment),
                             BinaryMatrix(len(self.assignment), self.n * self.m, rows))


Model = Union[ClusterModel, UnrestrictedModel]


# -- assignment ---------------------------------------------------------------


def assign_clusters(x3: BinaryMatrix, centroid_rows: BinaryMatrix, w=1) -> Assignment:
    """Send every row to its most similar centroid; ties go to the lowest index."""
    if centroid_rows.rows < 1:
        raise ValueError("need at least one centroid")
    if centroid_rows.cols != x3.cols:
        raise ValueError(f"centroid length {centroid_rows.cols} != row length {x3.cols}")
    w = as_weight(w)
    p, q = w.numerator, w.denominator
    sizes = x3.row_counts()
    csizes = centroid_rows.row_counts()
    labels = np.empty(x3.rows, dtype=np.int64)
    row_sims = np.empty(x3.rows, dtype=np.int64)
    scaled = 0
    width = max(x3.words.shape[1], 1)
    step = max(1, _BLOCK_CELLS // (centroid_rows.rows * width))
    for start in range(0, x3.rows, step):
        block = x3.words[start : start + step]
        overlap = popcount(block[:, None, :] & centroid_rows.words[None, :, :], axis=2)
        fn = sizes[start : start + step, None] - overlap
        fp = csizes[None, :] - overlap
        cost = p * fn + q * fp
        best = np.argmin(cost, axis=1)
        pick = np.arange(len(best))
        labels[start : start + step] = best
        row_sims[start : start + step] = x3.cols - fn[pick, best] - fp[pick, best]
        scaled += int(cost[pick, best].sum())
    return Assignment(labels, int(row_sims.sum()), row_sims, Fraction(scaled, q))


# -- helpers ------------------------------------------------------------------


def _seed_sequence(rng) -> np.random.SeedSequence:
    if isinstance(rng, np.random.SeedSequence):
        return rng
    if isinstance(rng, np.random.Generator):
        return np.random.SeedSequence(int(rng.integers(2**63)))
    return np.random.SeedSequence(rng)


def _check_k(k: int, l: int, r: int) -> None:
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    if k > l:
        raise ValueError(f"k={k} exceeds the number of slices l={l}")
    if r < 1:
        raise ValueError(f"number of resamples must be at least 1, got {r}")


def _sample_rows(seq: np.random.SeedSequence, l: int, k: int) -> np.ndarray:
    return np.random.default_rng(seq).choice(l, size=k, replace=False)


def _restrict(rows: np.ndarray, n: int, m: int, w) -> tuple[np.ndarray, np.ndarray]:
    """Rank-1 restriction of each ``n*m`` row, via its ``n x m`` reshaping."""
    A = np.zeros((n, len(rows)), dtype=bool)
    B = np.zeros((m, len(rows)), dtype=bool)
    for j, row in enumerate(rows):
        pair = rank1_approx(reshape_col_major(row, n, m), w)
        A[:, j], B[:, j] = pair.a, pair.b
    return A, B


def _kr_rows(A: np.ndarray, B: np.ndarray) -> BinaryMatrix:
    k = A.shape[1]
    rows = (B.T[:, :, None] & A.T[:, None, :]).reshape(k, -1)
    return BinaryMatrix(k, rows.shape[1], pack_rows(rows))


def _majority(x3: BinaryMatrix, labels: np.ndarray, k: int, w: Fraction):
    """Weighted-majority row per cluster (``w*ones > zeros``); ``None`` if empty."""
    p, q = w.numerator, w.denominator
    out = []
    for j in range(k):
        members = np.flatnonzero(labels == j)
        if len(members) == 0:
            out.append(None)
            continue
        ones = np.zeros(x3.cols, dtype=np.int64)
        step = max(1, _BLOCK_CELLS // max(x3.cols, 1))
        for start in range(0, len(members), step):
            words = x3.words[members[start : start + step]]
            ones += unpack_rows(words, x3.cols).sum(axis=0, dtype=np.int64)
        out.append(p * ones > q * (len(members) - ones))
    return out


def _map(fn, items, threads: int):
    if threads is None or threads <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# -- SaBoTeur -----------------------------------------------------------------


def saboteur(X: BinaryTensor3, k: int, r: int = 20, rng=None, weight=1,
             iterative: bool = False, threads: int = 1) -> ClusterModel:
    """Cluster the frontal slices of ``X`` into ``k`` rank-1 clusters.

    Each of the ``r`` resamples draws ``k`` distinct slices, replaces each by
    its rank-1 approximation and assigns every slice to the nearest of those
    centroids. The best resample wins (earliest on ties). Resample ``i`` uses
    its own child of the master seed, so the result does not depend on
    ``threads``.
    """
    _check_k(k, X.l, r)
    w = as_weight(weight)
    children = _seed_sequence(rng).spawn(r)
    x3 = X.x3

    def one(seq):
        picked = unpack_rows(x3.words[_sample_rows(seq, X.l, k)], x3.cols)
        A, B = _restrict(picked, X.n, X.m, w)
        return A, B, assign_clusters(x3, _kr_rows(A, B), w)

    results = _map(one, children, threads)
    best = 0
    for i, (_, _, asg) in enumerate(results):
        if asg.cost < results[best][2].cost:
            best = i
    A, B, asg = results[best]
    model = ClusterModel(A, B, asg.labels, asg.sim, w, asg.cost,
                         resample_sims=tuple(res[2].sim for res in results))
    log.debug("saboteur k=%d r=%d best resample %d sim=%d", k, r, best, asg.sim)
    if iterative:
        model = iterative_updates(model, X)
    return model


def iterative_updates(model: ClusterModel, X: BinaryTensor3, weight=None,
                      max_rounds: int | None = None) -> ClusterModel:
    """k-means style refinement: majority centroid, rank-1 restriction, reassign.

    A round is kept only if it strictly lowers the (weighted) error, so the
    returned similarity never drops below the input's. Empty clusters keep
    their previous centroid. ``rounds`` on the result counts every round run,
    including the final non-improving one.
    """
    if model.shape != X.shape:
        raise ValueError(f"model shape {model.shape} does not match tensor {X.shape}")
    w = model.weight if weight is None else as_weight(weight)
    current = rescore(model, X, w)
    rounds = 0
    while max_rounds is None or rounds < max_rounds:
        rounds += 1
        A, B = current.A.copy(), current.B.copy()
        for j, maj in enumerate(_majority(X.x3, current.assignment, current.k, w)):
            if maj is not None:
                pair = rank1_approx(reshape_col_major(maj, X.n, X.m), w)
                A[:, j], B[:, j] = pair.a, pair.b
        asg = assign_clusters(X.x3, _kr_rows(A, B), w)
        if asg.cost < current.cost:
            current = replace(current, A=A, B=B, assignment=asg.labels, sim=asg.sim, cost=asg.cost)
        else:
            break
    return replace(current, rounds=rounds)


def rescore(model: Model, X: BinaryTensor3, weight=None) -> Model:
    """Recompute ``sim`` and ``cost`` of the model's own assignment on ``X``."""
    w = model.weight if weight is None else as_weight(weight)
    p, q = w.numerator, w.denominator
    cents = model.centroid_rows()
    mine = cents.words[model.assignment]
    overlap = popcount(X.x3.words & mine, axis=1)
    fn = X.x3.row_counts() - overlap
    fp = cents.row_counts()[model.assignment] - overlap
    sim = X.x3.rows * X.x3.cols - int(fn.sum()) - int(fp.sum())
    return replace(model, sim=sim, weight=w, cost=Fraction(int((p * fn + q * fp).sum()), q))


# -- unrestricted baseline ----------------------------------------------------


def unrestricted_btc(X: BinaryTensor3, k: int, r: int = 20, rng=None, weight=1,
                     iterative: bool = False, threads: int = 1) -> UnrestrictedModel:
    """Same sampling loop as :func:`saboteur` with the sampled slices used as-is.

    With the same ``rng`` both functions draw identical slice samples.
    """
    _check_k(k, X.l, r)
    w = as_weight(weight)
    children = _seed_sequence(rng).spawn(r)
    x3 = X.x3

    def one(seq):
        cents = x3.select_rows(_sample_rows(seq, X.l, k))
        return cents, assign_clusters(x3, cents, w)

    results = _map(one, children, threads)
    best = 0
    for i, (_, asg) in enumerate(results):
        if asg.cost < results[best][1].cost:
            best = i
    cents, asg = results[best]
    model = UnrestrictedModel(X.n, X.m, cents, asg.labels, asg.sim, w, asg.cost,
                              resample_sims=tuple(res[1].sim for res in results))
    if iterative:
        model = majority_updates(model, X)
    return model


def as_unrestricted(model: ClusterModel) -> UnrestrictedModel:
    """The same clustering with its rank-1 centroids stored as plain rows."""
    n, m, _ = model.shape
    return UnrestrictedModel(n, m, model.centroid_rows(), model.assignment, model.sim,
                             model.weight, model.cost, model.resample_sims, model.rounds)


def majority_updates(model: UnrestrictedModel, X: BinaryTensor3,
                     max_rounds: int | None = None) -> UnrestrictedModel:
    """Majority-centroid refinement without the rank-1 step; accept-if-better."""
    if model.shape != X.shape:
        raise ValueError(f"model shape {model.shape} does not match tensor {X.shape}")
    w = model.weight
    current = rescore(model, X, w)
    rounds = 0
    while max_rounds is None or rounds < max_rounds:
        rounds += 1
        dense = current.centroids.to_dense()
        for j, maj in enumerate(_majority(X.x3, current.assignment, current.k, w)):
            if maj is not None:
                dense[j] = maj
        cents = BinaryMatrix.from_dense(dense)
        asg = assign_clusters(X.x3, cents, w)
        if asg.cost < current.cost:
            current = replace(current, centroids=cents, assignment=asg.labels,
                              sim=asg.sim, cost=asg.cost)
        else:
            break
    return replace(current, rounds=rounds)


# -- prediction ---------------------------------------------------------------


class Prediction(NamedTuple):
    labels: np.ndarray
    sim: int
    slice_sims: np.ndarray


def predict(model: Model, heldout: BinaryTensor3) -> Prediction:
    """Assign unseen slices to their closest centroid."""
    n, m, _ = model.shape
    if (heldout.n, heldout.m) != (n, m):
        raise ValueError(f"slices are {heldout.n}x{heldout.m}, model expects {n}x{m}")
    asg = assign_clusters(heldout.x3, model.centroid_rows(), model.weight)
    return Prediction(asg.labels, asg.sim, asg.row_sims)


def split_slices(X: BinaryTensor3, test_fraction: float, rng=None) -> tuple[np.ndarray, np.ndarray]:
    """Random train/test partition of slice indices (both sorted)."""
    if not 0 < test_fraction < 1:
        raise ValueError(f"test fraction must lie in (0, 1), got {test_fraction}")
    order = np.random.default_rng(rng).permutation(X.l)
    n_test = max(1, min(X.l - 1, int(round(test_fraction * X.l))))
    return np.sort(order[n_test:]), np.sort(order[:n_test])


def model_similarity(X: BinaryTensor3, model: Model) -> int:
    """Similarity recomputed from scratch via the full reconstruction."""
    return similarity(X, model.reconstruct())
