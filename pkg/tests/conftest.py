"""Shared brute-force oracles. Everything here works on dense bool arrays and
deliberately avoids the package's own helpers."""

import itertools

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def dense_sim(x, y) -> int:
    x = np.asarray(x, dtype=bool)
    y = np.asarray(y, dtype=bool)
    return int(np.sum(x == y))


def all_vectors(length: int):
    for bits in itertools.product((0, 1), repeat=length):
        yield np.array(bits, dtype=bool)


def brute_rank1_opt(X) -> int:
    """Best sim(X, a b^T) over every pair (a, b), by full enumeration."""
    X = np.asarray(X, dtype=bool)
    n, m = X.shape
    best = -1
    bs = list(all_vectors(m))
    for a in all_vectors(n):
        for b in bs:
            best = max(best, dense_sim(X, np.outer(a, b)))
    return best


def brute_cp(A, B, C) -> np.ndarray:
    n, k = A.shape
    m, l = B.shape[0], C.shape[0]
    out = np.zeros((n, m, l), dtype=bool)
    for i in range(n):
        for j in range(m):
            for s in range(l):
                out[i, j, s] = any(A[i, t] and B[j, t] and C[s, t] for t in range(k))
    return out


def one_hot(labels, k) -> np.ndarray:
    C = np.zeros((len(labels), k), dtype=bool)
    C[np.arange(len(labels)), labels] = True
    return C


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    module = __import__("sys").modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
