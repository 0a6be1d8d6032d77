"""Two-part MDL description lengths for clustering models and choice of ``k``.

All lengths are real-valued bit counts. Factor columns use an enumerative code
(popcount header, then the positions); the error tensor is coded separately
over model-1 and model-0 cells.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.special import gammaln

from .bintensor import BinaryTensor3, popcount
from .saboteur import ClusterModel, _seed_sequence, saboteur

_LN2 = math.log(2)


def log2_binom(n, k) -> np.ndarray | float:
    """``log2 C(n, k)`` via log-gamma; works elementwise on arrays."""
    n = np.asarray(n, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    out = (gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)) / _LN2
    return float(out) if out.ndim == 0 else out


def elias_delta_bits(value: int) -> int:
    if value < 1:
        raise ValueError(f"Elias delta codes positive integers, got {value}")
    length = value.bit_length()          # floor(log2 v) + 1
    return (length - 1) + 2 * (length.bit_length() - 1) + 1


def _columns_bits(M: np.ndarray) -> float:
    rows = M.shape[0]
    ones = M.sum(axis=0)
    return float(M.shape[1] * math.log2(rows + 1) + np.sum(log2_binom(rows, ones)))


def typed_xor_bits(model_ones: int, false_pos: int, total: int, false_neg: int) -> float:
    """Cost of the error positions, split by the model value of each cell."""
    model_zeros = total - model_ones
    return (
        math.log2(model_ones + 1) + log2_binom(model_ones, false_pos)
        + math.log2(model_zeros + 1) + log2_binom(model_zeros, false_neg)
    )


@dataclass(frozen=True)
class ErrorCounts:
    model_ones: int
    false_pos: int   # data 0, model 1
    false_neg: int   # data 1, model 0


def error_counts(X: BinaryTensor3, model: ClusterModel) -> ErrorCounts:
    if model.shape != X.shape:
        raise ValueError(f"model shape {model.shape} does not match tensor {X.shape}")
    cents = model.centroid_rows()
    csizes = model.A.sum(axis=0).astype(np.int64) * model.B.sum(axis=0).astype(np.int64)
    labels = model.assignment
    model_ones = int(csizes[labels].sum())
    hits = int(popcount(X.x3.words & cents.words[labels], axis=None)) if X.x3.words.size else 0
    return ErrorCounts(model_ones, model_ones - hits, X.count() - hits)


def assignment_bits(l: int, k: int) -> float:
    """Bits for the slice-to-cluster assignment, ``l * log2(k)``."""
    return l * math.log2(k)


def _header_bits(X: BinaryTensor3, k: int) -> float:
    # k + 1 so the empty model (k = 0) has a code word too
    return float(sum(elias_delta_bits(d) for d in X.shape) + elias_delta_bits(k + 1))


def description_length(X: BinaryTensor3, model: ClusterModel) -> tuple[float, float]:
    """Return ``(L(M), L(D | M))`` in bits."""
    errs = error_counts(X, model)
    n, m, l = X.shape
    model_bits = (_header_bits(X, model.k) + _columns_bits(model.A)
                  + _columns_bits(model.B) + assignment_bits(l, model.k))
    data_bits = typed_xor_bits(errs.model_ones, errs.false_pos, n * m * l, errs.false_neg)
    return model_bits, data_bits


def baseline_length(X: BinaryTensor3) -> tuple[float, float]:
    """Description length with no clusters: every one is an error."""
    n, m, l = X.shape
    return _header_bits(X, 0), typed_xor_bits(0, 0, n * m * l, X.count())


@dataclass(frozen=True)
class MdlRecord:
    k: int
    L_model: float
    L_data: float

    @property
    def L_total(self) -> float:
        return self.L_model + self.L_data


@dataclass(frozen=True)
class MdlReport:
    records: tuple[MdlRecord, ...]

    @property
    def best_k(self) -> int:
        best = min(self.records, key=lambda rec: (rec.L_total, rec.k))
        return best.k

    def record(self, k: int) -> MdlRecord:
        for rec in self.records:
            if rec.k == k:
                return rec
        raise KeyError(k)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "L_model", "L_data", "L_total"])
            for rec in self.records:
                writer.writerow([rec.k, repr(rec.L_model), repr(rec.L_data), repr(rec.L_total)])


def select_k(X: BinaryTensor3, k_range: Iterable[int], r: int = 20, rng=None,
             weight=1, iterative: bool = False, threads: int = 1) -> MdlReport:
    """Run the clustering for every ``k`` and tabulate description lengths.

    The ``k = 0`` baseline is always the first record. Each ``k`` gets its own
    child of the master seed.
    """
    ks = sorted(set(int(k) for k in k_range))
    if not ks:
        raise ValueError("empty k range")
    if ks[0] < 1 or ks[-1] > X.l:
        raise ValueError(f"k range {ks[0]}..{ks[-1]} must lie within 1..{X.l}")
    seeds = dict(zip(ks, _seed_sequence(rng).spawn(len(ks))))
    records = [MdlRecord(0, *baseline_length(X))]
    for k in ks:
        model = saboteur(X, k, r, seeds[k], weight=weight, iterative=iterative, threads=threads)
        records.append(MdlRecord(k, *description_length(X, model)))
    return MdlReport(tuple(records))
