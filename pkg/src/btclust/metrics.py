"""Reconstruction and label-agreement metrics."""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .bintensor import BinaryTensor3, similarity


def _reconstruction(model) -> BinaryTensor3:
    return model if isinstance(model, BinaryTensor3) else model.reconstruct()


def relative_similarity(X: BinaryTensor3, model) -> float:
    """Fraction of cells where the data and the model agree.

    ``model`` is anything with ``reconstruct()`` or a tensor itself.
    """
    n, m, l = X.shape
    return similarity(X, _reconstruction(model)) / (n * m * l)


def reconstruction_error(X: BinaryTensor3, model) -> int:
    n, m, l = X.shape
    return n * m * l - similarity(X, _reconstruction(model))


def hungarian(cost) -> np.ndarray:
    """Minimum-cost perfect matching; ``match[i]`` is the column paired with row ``i``.

    Rectangular inputs are padded with zeros to a square.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError(f"cost must be a matrix, got shape {cost.shape}")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix has non-finite entries")
    size = max(cost.shape)
    square = np.zeros((size, size))
    square[: cost.shape[0], : cost.shape[1]] = cost
    rows, cols = linear_sum_assignment(square)
    match = np.empty(size, dtype=np.int64)
    match[rows] = cols
    return match


def _encode(a, b) -> tuple[np.ndarray, np.ndarray, int]:
    a = np.asarray(a).reshape(-1)
    b = np.asarray(b).reshape(-1)
    if a.shape != b.shape:
        raise ValueError(f"label vectors differ in length: {a.size} vs {b.size}")
    if a.size == 0:
        raise ValueError("empty label vectors")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    return ia, ib, int(max(ia.max(), ib.max()) + 1)


def contingency(a, b) -> np.ndarray:
    ia, ib, k = _encode(a, b)
    table = np.zeros((k, k), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    return table


def match_labels(a, b) -> np.ndarray:
    """Relabel ``b`` onto ``a``'s ids by the agreement-maximizing matching.

    Among matchings with maximal agreement the one with the lowest chance
    agreement is taken, which makes the resulting kappa well defined. Returns
    ``b`` re-expressed in the (dense, 0-based) codes of ``a``.
    """
    ia, ib, k = _encode(a, b)
    table = np.zeros((k, k), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    ca = table.sum(axis=1)
    cb = table.sum(axis=0)
    l = len(ia)
    # lexicographic: agreement first, then chance-agreement products
    big = k * l * l + 1
    if big * l < 2**52:
        cost = -big * table.T + np.outer(cb, ca)
    else:
        cost = -table.T                     # too large to combine exactly in float64
    match = hungarian(cost)                 # b code -> a code
    return match[ib]


def cohens_kappa(a, b) -> float:
    """Cohen's kappa after matching ``b``'s labels to ``a``'s."""
    ia, _, k = _encode(a, b)
    mb = match_labels(a, b)
    l = len(ia)
    p_o = np.count_nonzero(ia == mb) / l
    fa = np.bincount(ia, minlength=k) / l
    fb = np.bincount(mb, minlength=k) / l
    p_e = float(fa @ fb)
    if p_e >= 1.0:
        return 1.0
    return (p_o - p_e) / (1 - p_e)


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def nmi_joint(a, b) -> float:
    """Mutual information divided by the joint entropy, in ``[0, 1]``."""
    table = contingency(a, b)
    h_joint = _entropy(table.reshape(-1))
    if h_joint == 0.0:
        return 1.0
    mi = _entropy(table.sum(axis=1)) + _entropy(table.sum(axis=0)) - h_joint
    return float(min(1.0, max(0.0, mi / h_joint)))
