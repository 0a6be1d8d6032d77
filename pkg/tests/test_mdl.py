import csv
import math

import numpy as np
import pytest
from scipy.special import comb

from btclust.bintensor import BinaryTensor3, similarity
from btclust.mdl import (
    assignment_bits,
    baseline_length,
    description_length,
    elias_delta_bits,
    error_counts,
    log2_binom,
    select_k,
    typed_xor_bits,
)
from btclust.saboteur import ClusterModel, saboteur
from btclust.synthgen import SynthConfig, gen_instance


def _delta_oracle(v: int) -> int:
    # explicit construction: gamma code of the length, then the tail bits
    length = len(bin(v)) - 2
    gamma = 2 * (len(bin(length)) - 2) - 1
    return gamma + length - 1


def _oracle_lengths(X, model):
    n, m, l = X.shape
    k = model.k
    dense = X.to_dense()
    recon = np.zeros_like(dense)
    for s, c in enumerate(model.assignment):
        recon[:, :, s] = np.outer(model.A[:, c], model.B[:, c])
    M1 = int(recon.sum())
    M0 = n * m * l - M1
    e1 = int((recon & ~dense).sum())
    e0 = int((dense & ~recon).sum())
    lg = lambda a, b: math.log2(comb(a, b, exact=True))
    L_model = sum(_delta_oracle(d) for d in (n, m, l)) + _delta_oracle(k + 1)
    for M, rows in ((model.A, n), (model.B, m)):
        for j in range(k):
            L_model += math.log2(rows + 1) + lg(rows, int(M[:, j].sum()))
    L_model += l * math.log2(k)
    L_data = math.log2(M1 + 1) + lg(M1, e1) + math.log2(M0 + 1) + lg(M0, e0)
    return L_model, L_data


def test_assignment_bits_example():
    assert assignment_bits(8, 4) == 16
    assert assignment_bits(10, 1) == 0
    # strictly increasing in l for k >= 2
    assert all(assignment_bits(l + 1, 3) > assignment_bits(l, 3) for l in range(1, 20))


def test_elias_delta():
    for v in range(1, 3000):
        assert elias_delta_bits(v) == _delta_oracle(v)
    assert elias_delta_bits(1) == 1 and elias_delta_bits(2) == 4
    with pytest.raises(ValueError):
        elias_delta_bits(0)


def test_log2_binom_matches_exact():
    for n in range(0, 40, 3):
        for k in range(n + 1):
            assert log2_binom(n, k) == pytest.approx(math.log2(comb(n, k, exact=True)), abs=1e-9)


def test_zero_tensor_zero_model():
    X = BinaryTensor3.zeros(3, 4, 5)
    model = ClusterModel(np.zeros((3, 2), bool), np.zeros((4, 2), bool), np.array([0, 1, 0, 1, 0]), 60)
    _, L_data = description_length(X, model)
    assert L_data == pytest.approx(math.log2(60 + 1) + math.log2(0 + 1))


def test_perfect_model_pays_only_count_headers():
    inst = gen_instance(SynthConfig(n=12, m=10, l=6, k=2, p_add=0, p_del=0, seed=3))
    model = saboteur(inst.clean, 2, r=10, rng=0)
    assert similarity(inst.clean, model.reconstruct()) == 720
    errs = error_counts(inst.clean, model)
    assert errs.false_pos == errs.false_neg == 0
    _, L_data = description_length(inst.clean, model)
    assert L_data == pytest.approx(math.log2(errs.model_ones + 1) + math.log2(720 - errs.model_ones + 1))


@pytest.mark.parametrize("seed", range(5))
def test_lengths_match_oracle(seed):
    inst = gen_instance(SynthConfig(n=14, m=11, l=9, k=3, seed=seed))
    model = saboteur(inst.noisy, 3, r=4, rng=seed)
    got = description_length(inst.noisy, model)
    want = _oracle_lengths(inst.noisy, model)
    assert got == pytest.approx(want, rel=1e-12, abs=1e-9)
    errs = error_counts(inst.noisy, model)
    n, m, l = inst.noisy.shape
    assert errs.false_pos + errs.false_neg == n * m * l - model.sim


def test_baseline():
    X = gen_instance(SynthConfig(n=10, m=10, l=4, k=2, seed=0)).noisy
    L_model, L_data = baseline_length(X)
    assert L_model == sum(_delta_oracle(d) for d in X.shape) + _delta_oracle(1)
    assert L_data == pytest.approx(typed_xor_bits(0, 0, 400, X.count()))
    assert L_data == pytest.approx(math.log2(401) + math.log2(comb(400, X.count(), exact=True)))


def test_select_k_zero_tensor_picks_baseline():
    report = select_k(BinaryTensor3.zeros(5, 5, 6), range(1, 5), r=2, rng=0)
    assert report.best_k == 0
    assert len(report.records) == 5


def test_report_invariants(tmp_path):
    inst = gen_instance(SynthConfig(n=20, m=16, l=12, k=3, p_add=0.05, p_del=0.05, seed=1))
    report = select_k(inst.noisy, range(1, 7), r=5, rng=3)
    assert [rec.k for rec in report.records] == list(range(0, 7))
    for rec in report.records:
        assert rec.L_total == rec.L_model + rec.L_data
    best = min(rec.L_total for rec in report.records)
    assert report.record(report.best_k).L_total == best
    assert report.best_k == min(rec.k for rec in report.records if rec.L_total == best)
    path = tmp_path / "curve.csv"
    report.write_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["k", "L_model", "L_data", "L_total"]
    assert len(rows) == 1 + 7
    assert float(rows[3][3]) == report.record(2).L_total


def test_select_k_deterministic_and_range_checked():
    X = gen_instance(SynthConfig(n=10, m=8, l=6, k=2, seed=2)).noisy
    a = select_k(X, range(1, 4), r=3, rng=5)
    b = select_k(X, range(1, 4), r=3, rng=5, threads=4)
    assert a == b
    with pytest.raises(ValueError):
        select_k(X, range(0, 3))
    with pytest.raises(ValueError):
        select_k(X, range(1, 8))
    with pytest.raises(ValueError):
        select_k(X, [])


def test_incompressible_noise_prefers_small_models():
    picks = []
    for seed in range(3):
        rng = np.random.default_rng(seed)
        X = BinaryTensor3.from_dense(rng.random((12, 10, 8)) < 0.5)
        picks.append(select_k(X, range(1, 6), r=3, rng=seed).best_k)
    assert all(p <= 1 for p in picks)
