import itertools
import math

import numpy as np
import pytest
from fractions import Fraction
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from btclust.bintensor import (
    BinaryMatrix,
    BinaryTensor3,
    FactorTriple,
    TuckerModel,
    as_weight,
    bcp_reconstruct,
    boolean_matrix_product,
    fold,
    from_triples,
    integer_matrix_product,
    khatri_rao,
    kronecker,
    kronecker_matrix,
    pack_rows,
    reshape_col_major,
    similarity,
    tucker_reconstruct,
    unfold,
    vec_col_major,
    weighted_cost,
    weighted_similarity,
)

from conftest import brute_cp, dense_sim, one_hot

shapes3 = st.tuples(st.integers(1, 6), st.integers(1, 6), st.integers(1, 6))


@st.composite
def dense_tensors(draw, shape=None):
    shape = draw(shapes3) if shape is None else shape
    return draw(arrays(np.bool_, shape))


# -- construction -------------------------------------------------------------


def test_from_triples_empty():
    X = from_triples(2, 2, 2, [])
    assert X.count() == 0
    assert X == BinaryTensor3.zeros(2, 2, 2)


def test_from_triples_duplicates_collapse():
    assert from_triples(2, 2, 2, [(1, 1, 1), (1, 1, 1)]).count() == 1


def test_from_triples_cells():
    X = from_triples(2, 2, 2, [(2, 1, 2), (1, 2, 1)])
    assert X.count() == 2
    assert X[1, 0, 1] and X[0, 1, 0]
    dense = X.to_dense()
    dense[1, 0, 1] = dense[0, 1, 0] = False
    assert not dense.any()


def test_from_triples_out_of_range_names_coordinate():
    with pytest.raises(ValueError, match=r"\(3, 1, 1\)"):
        from_triples(2, 2, 2, [(1, 1, 1), (3, 1, 1)])
    with pytest.raises(ValueError):
        from_triples(2, 2, 2, [(0, 1, 1)])


@given(dense_tensors())
def test_dense_roundtrip(dense):
    X = BinaryTensor3.from_dense(dense)
    assert np.array_equal(X.to_dense(), dense)
    assert X.count() == int(dense.sum())
    # |X| equals the squared Frobenius norm for binary data
    assert X.count() == int((dense.astype(np.int64) ** 2).sum())


def test_padding_bits_must_be_zero():
    words = np.zeros((1, 1), dtype=np.uint64)
    words[0, 0] = np.uint64(1 << 10)
    with pytest.raises(ValueError):
        BinaryMatrix(1, 5, words)


@given(arrays(np.bool_, st.tuples(st.integers(1, 5), st.integers(1, 140))))
def test_packing_lsb_first(dense):
    words = pack_rows(dense)
    for i, j in zip(*np.nonzero(dense)):
        j = int(j)
        assert (int(words[i, j // 64]) >> (j % 64)) & 1
    for i in range(dense.shape[0]):
        total = sum(bin(int(w)).count("1") for w in words[i])
        assert total == dense[i].sum()


def test_storage_is_packed():
    X = BinaryTensor3.zeros(70, 50, 20)
    assert X.storage_bytes() == 20 * math.ceil(70 * 50 / 64) * 8
    assert X.storage_bytes() <= math.ceil(70 * 50 * 20 / 8) + 20 * 8


# -- unfolding ----------------------------------------------------------------


def test_unfold_zero():
    X = BinaryTensor3.zeros(2, 3, 4)
    assert unfold(X, 1).shape == (2, 12)
    assert unfold(X, 2).shape == (3, 8)
    assert unfold(X, 3).shape == (4, 6)
    assert all(unfold(X, d).count() == 0 for d in (1, 2, 3))


def test_unfold_single_cell():
    X = from_triples(2, 2, 2, [(2, 1, 1)])
    X3 = unfold(X, 3).to_dense()
    assert X3.sum() == 1 and X3[0, 1]


@given(dense_tensors())
def test_unfold_matches_index_formula(dense):
    n, m, l = dense.shape
    X = BinaryTensor3.from_dense(dense)
    X1, X2, X3 = (unfold(X, d).to_dense() for d in (1, 2, 3))
    for i, j, k in itertools.product(range(n), range(m), range(l)):
        assert X1[i, j + k * m] == dense[i, j, k]
        assert X2[j, i + k * n] == dense[i, j, k]
        assert X3[k, i + j * n] == dense[i, j, k]


@given(dense_tensors(), st.sampled_from([1, 2, 3]))
def test_fold_inverts_unfold(dense, mode):
    X = BinaryTensor3.from_dense(dense)
    assert fold(unfold(X, mode), mode, X.shape) == X


def test_unfold_bad_mode():
    with pytest.raises(ValueError):
        unfold(BinaryTensor3.zeros(1, 1, 1), 4)


@given(dense_tensors(), st.permutations([0, 1, 2]))
def test_permute(dense, order):
    X = BinaryTensor3.from_dense(dense).permute(order)
    assert np.array_equal(X.to_dense(), np.transpose(dense, order))


# -- similarity ---------------------------------------------------------------


def test_similarity_examples():
    Z = BinaryTensor3.zeros(2, 2, 2)
    assert similarity(Z, Z) == 8
    ones = BinaryTensor3.from_dense(np.ones((2, 2, 2), dtype=bool))
    assert similarity(ones, Z) == 0
    X = from_triples(2, 2, 2, [(1, 1, 1), (2, 2, 2), (1, 2, 1)])
    Y = from_triples(2, 2, 2, [(1, 1, 1), (2, 2, 2), (1, 2, 1), (2, 1, 2)])
    assert similarity(X, Y) == 7


def test_similarity_exhaustive_2x2x1():
    cells = [np.array(b, dtype=bool).reshape(2, 2, 1) for b in itertools.product((0, 1), repeat=4)]
    for x, y in itertools.product(cells, cells):
        got = similarity(BinaryTensor3.from_dense(x), BinaryTensor3.from_dense(y))
        assert got == 4 - int(np.logical_xor(x, y).sum())


@given(st.data())
def test_similarity_is_size_minus_xor(data):
    shape = data.draw(shapes3)
    x = data.draw(dense_tensors(shape))
    y = data.draw(dense_tensors(shape))
    got = similarity(BinaryTensor3.from_dense(x), BinaryTensor3.from_dense(y))
    assert got == x.size - int(np.logical_xor(x, y).sum())


def test_similarity_shape_mismatch():
    with pytest.raises(ValueError):
        similarity(BinaryTensor3.zeros(2, 2, 2), BinaryTensor3.zeros(2, 2, 3))


# -- weighting ----------------------------------------------------------------


def test_weighted_cost_examples():
    x = np.array([1, 1, 0, 0], dtype=bool)
    assert weighted_cost(x, np.zeros(4, dtype=bool), 10) == 20
    assert weighted_cost(x, np.ones(4, dtype=bool), 10) == 2
    assert weighted_similarity(x, np.ones(4, dtype=bool), 10) > weighted_similarity(x, np.zeros(4, dtype=bool), 10)
    for w in (1, 2, Fraction(7, 3), 10):
        assert weighted_cost(x, x, w) == 0


@given(arrays(np.bool_, 6), arrays(np.bool_, 6), arrays(np.bool_, 6))
def test_unit_weight_preserves_preferences(x, y, z):
    plain = dense_sim(x, y) - dense_sim(x, z)
    weighted = weighted_similarity(x, y, 1) - weighted_similarity(x, z, 1)
    assert np.sign(plain) == np.sign(weighted)


def test_as_weight():
    assert as_weight(1.5) == Fraction(3, 2)
    assert as_weight("7/3") == Fraction(7, 3)
    with pytest.raises(ValueError):
        as_weight(Fraction(1, 2))
    with pytest.raises(ValueError):
        as_weight(float("inf"))


# -- products -----------------------------------------------------------------


def test_kronecker_examples():
    assert kronecker([1, 0], [0, 1]).tolist() == [False, True, False, False]
    assert kronecker([1, 1], [1, 0]).tolist() == [True, False, True, False]
    assert not kronecker([1, 1, 0], [0, 0]).any()


@given(arrays(np.bool_, st.integers(1, 5)), arrays(np.bool_, st.integers(1, 5)))
def test_kronecker_definition(x, y):
    out = kronecker(x, y)
    assert out.dtype == bool
    for i, j in itertools.product(range(len(x)), range(len(y))):
        assert out[i * len(y) + j] == (x[i] and y[j])


def test_khatri_rao_examples():
    I2 = BinaryMatrix.identity(2)
    K = khatri_rao(I2, I2).to_dense()
    expected = np.zeros((4, 2), dtype=bool)
    expected[0, 0] = expected[3, 1] = True
    assert np.array_equal(K, expected)
    col = khatri_rao(BinaryMatrix.from_dense([[1], [1]]), BinaryMatrix.from_dense([[1], [0]]))
    assert col.to_dense()[:, 0].tolist() == [True, False, True, False]
    Xm = BinaryMatrix.from_dense(np.ones((3, 2), dtype=bool))
    assert khatri_rao(Xm, BinaryMatrix.zeros(2, 2)).count() == 0


@given(st.data())
def test_khatri_rao_columns_are_kronecker(data):
    r = data.draw(st.integers(1, 4))
    x = data.draw(arrays(np.bool_, (data.draw(st.integers(1, 4)), r)))
    y = data.draw(arrays(np.bool_, (data.draw(st.integers(1, 4)), r)))
    K = khatri_rao(BinaryMatrix.from_dense(x), BinaryMatrix.from_dense(y)).to_dense()
    for t in range(r):
        assert np.array_equal(K[:, t], np.kron(x[:, t], y[:, t]).astype(bool))


def test_boolean_product_examples():
    rng = np.random.default_rng(1)
    Y = BinaryMatrix.from_dense(rng.random((3, 5)) < 0.5)
    assert boolean_matrix_product(BinaryMatrix.identity(3), Y) == Y
    Yd = Y.to_dense()[:2]
    C = BinaryMatrix.from_dense([[0, 1], [1, 0]])
    P = boolean_matrix_product(C, BinaryMatrix.from_dense(Yd))
    assert np.array_equal(P.to_dense(), Yd[[1, 0]])
    assert np.array_equal(integer_matrix_product(C, BinaryMatrix.from_dense(Yd)), Yd[[1, 0]].astype(int))
    J = BinaryMatrix.from_dense(np.ones((3, 3), dtype=bool))
    assert boolean_matrix_product(J, J) == J


@given(st.data())
def test_boolean_product_oracle(data):
    p, r, q = (data.draw(st.integers(1, 6)) for _ in range(3))
    x = data.draw(arrays(np.bool_, (p, r)))
    y = data.draw(arrays(np.bool_, (r, q)))
    got = boolean_matrix_product(BinaryMatrix.from_dense(x), BinaryMatrix.from_dense(y)).to_dense()
    assert np.array_equal(got, (x.astype(int) @ y.astype(int)) > 0)


@given(st.data())
def test_cluster_assignment_products_agree(data):
    l, k, q = data.draw(st.integers(1, 8)), data.draw(st.integers(1, 4)), data.draw(st.integers(1, 8))
    labels = data.draw(arrays(np.int64, l, elements=st.integers(0, k - 1)))
    C = BinaryMatrix.from_dense(one_hot(labels, k))
    Y = BinaryMatrix.from_dense(data.draw(arrays(np.bool_, (k, q))))
    assert C.is_cluster_assignment()
    assert np.array_equal(integer_matrix_product(C, Y), boolean_matrix_product(C, Y).to_dense().astype(np.int64))


# -- reconstruction -----------------------------------------------------------


def _factors(rng, n, m, l, k, clustering=False):
    A = rng.random((n, k)) < 0.5
    B = rng.random((m, k)) < 0.5
    C = one_hot(rng.integers(0, k, l), k) if clustering else rng.random((l, k)) < 0.5
    return A, B, C


def test_bcp_zero_and_unit():
    Z = lambda r: BinaryMatrix.zeros(r, 2)
    assert bcp_reconstruct(FactorTriple(Z(3), Z(4), Z(5))).count() == 0
    e = BinaryMatrix.from_dense([[1], [0]])
    X = bcp_reconstruct(FactorTriple(e, e, e))
    assert X.count() == 1 and X[0, 0, 0]


def test_bcp_matches_brute_force(rng):
    for _ in range(60):
        n, m, l = rng.integers(1, 7, 3)
        k = int(rng.integers(1, 4))
        A, B, C = _factors(rng, n, m, l, k)
        F = FactorTriple(*(BinaryMatrix.from_dense(M) for M in (A, B, C)))
        assert np.array_equal(bcp_reconstruct(F).to_dense(), brute_cp(A, B, C))


def test_cluster_triple_requires_assignment():
    A = BinaryMatrix.zeros(2, 2)
    with pytest.raises(ValueError):
        FactorTriple(A, A, BinaryMatrix.from_dense([[1, 1], [0, 1]]), clustering=True)


def _brute_tucker(G, A, B, C):
    n, m, l = A.shape[0], B.shape[0], C.shape[0]
    r1, r2, r3 = G.shape
    out = np.zeros((n, m, l), dtype=bool)
    for i, j, k in itertools.product(range(n), range(m), range(l)):
        out[i, j, k] = any(G[a, b, c] and A[i, a] and B[j, b] and C[k, c]
                           for a, b, c in itertools.product(range(r1), range(r2), range(r3)))
    return out


def test_tucker_matches_brute_force(rng):
    for _ in range(30):
        n, m, l = rng.integers(1, 5, 3)
        r1, r2, r3 = rng.integers(1, 4, 3)
        G = rng.random((r1, r2, r3)) < 0.4
        A, B, C = (rng.random((d, r)) < 0.5 for d, r in ((n, r1), (m, r2), (l, r3)))
        T = TuckerModel(BinaryTensor3.from_dense(G), *(BinaryMatrix.from_dense(M) for M in (A, B, C)))
        assert np.array_equal(tucker_reconstruct(T).to_dense(), _brute_tucker(G, A, B, C))


def test_tucker_hyperdiagonal_is_cp(rng):
    k = 3
    G = np.zeros((k, k, k), dtype=bool)
    G[range(k), range(k), range(k)] = True
    A, B, C = (BinaryMatrix.from_dense(M) for M in _factors(rng, 5, 4, 6, k))
    T = TuckerModel(BinaryTensor3.from_dense(G), A, B, C)
    assert tucker_reconstruct(T) == bcp_reconstruct(FactorTriple(A, B, C))
    Tz = TuckerModel(BinaryTensor3.zeros(k, k, k), A, B, C)
    assert tucker_reconstruct(Tz).count() == 0


def test_kronecker_matrix(rng):
    x = rng.random((3, 2)) < 0.5
    y = rng.random((2, 3)) < 0.5
    got = kronecker_matrix(BinaryMatrix.from_dense(x), BinaryMatrix.from_dense(y)).to_dense()
    assert np.array_equal(got, np.kron(x, y).astype(bool))


@given(st.data())
def test_reshaping_equivalence(data):
    n, m = data.draw(st.integers(1, 8)), data.draw(st.integers(1, 8))
    x = data.draw(arrays(np.bool_, n * m))
    a = data.draw(arrays(np.bool_, n))
    b = data.draw(arrays(np.bool_, m))
    assert dense_sim(x, kronecker(b, a)) == dense_sim(reshape_col_major(x, n, m), np.outer(a, b))
    assert np.array_equal(vec_col_major(reshape_col_major(x, n, m)), x)
