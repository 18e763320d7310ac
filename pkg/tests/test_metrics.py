import itertools

import numpy as np
import pytest

from pctf3d.coupling import gen_full
from pctf3d.marginals import BinnedDataset, estimate_marginals, marginalize_model_3d
from pctf3d.metrics import (empirical_1d, err_1d, err_3d, evaluate, fms, fms_score_matrix)
from pctf3d.solver import FactorModel, init_model, objective
from pctf3d.tensor_core import DimensionError, frobenius_sq_diff

from oracles import full_tensor, marginal_of_full


def _cos(a, b):
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    return 0.0 if na == 0 or nb == 0 else float(a @ b / (na * nb))


def brute_fms(t, e):
    best = -np.inf
    for perm in itertools.permutations(range(t.R)):
        s = 0.0
        for r in range(t.R):
            p = 1.0
            for a, b in zip(t.factors, e.factors):
                p *= _cos(a[:, r], b[:, perm[r]])
            s += p
        best = max(best, s)
    return best


def test_err1d_identical_zero():
    m = init_model(5, 4, 3, seed=0)
    assert err_1d(m, m) == 0.0


def test_err1d_locality():
    a = init_model(5, 4, 3, seed=0)
    b = a.copy()
    b.factors[2] = init_model(1, 4, 3, seed=1).factors[0]
    h, hh = a.one_d_marginals(), b.one_d_marginals()
    assert err_1d(a, b) == pytest.approx(np.sum((h[2] - hh[2]) ** 2), rel=1e-14)


def test_err1d_full_tensor_oracle():
    a, b = init_model(4, 3, 2, seed=2), init_model(4, 3, 2, seed=3)
    ta, tb = full_tensor(a.lam, a.factors), full_tensor(b.lam, b.factors)
    expected = 0.0
    for m in range(4):
        drop = tuple(x for x in range(4) if x != m)
        expected += np.sum((ta.sum(axis=drop) - tb.sum(axis=drop)) ** 2)
    assert err_1d(a, b) == pytest.approx(expected, rel=1e-10)


def test_err1d_dataset_and_shape_errors():
    data = BinnedDataset(np.array([[1, 2, 3], [1, 1, 3]]), 3)
    np.testing.assert_allclose(empirical_1d(data)[1], [0.5, 0.5, 0.0])
    with pytest.raises(DimensionError):
        err_1d(init_model(3, 3, 2, seed=0), init_model(3, 4, 2, seed=0))


def test_err3d_examples():
    m = init_model(5, 3, 2, seed=4)
    assert err_3d(m, m) == 0.0
    a, b = init_model(3, 3, 2, seed=5), init_model(3, 3, 2, seed=6)
    assert err_3d(a, b) == pytest.approx(
        frobenius_sq_diff(marginalize_model_3d(a, (1, 2, 3)), marginalize_model_3d(b, (1, 2, 3))))


def test_err3d_matches_full_tensor_marginals():
    a, b = init_model(4, 3, 2, seed=7), init_model(4, 3, 2, seed=8)
    ta, tb = full_tensor(a.lam, a.factors), full_tensor(b.lam, b.factors)
    expected = sum(np.sum((marginal_of_full(ta, t) - marginal_of_full(tb, t)) ** 2)
                   for t in itertools.combinations(range(1, 5), 3))
    assert err_3d(a, b) == pytest.approx(expected, rel=1e-10)


def test_err3d_equals_full_coupling_objective():
    rng = np.random.default_rng(9)
    for _ in range(10):
        M = int(rng.integers(4, 7))
        est = init_model(M, 3, 2, seed=int(rng.integers(1 << 30)))
        data = BinnedDataset(rng.integers(1, 4, size=(200, M)), 3)
        marg = estimate_marginals(data, gen_full(M))
        assert err_3d(data, est) == pytest.approx(objective(est, marg, gen_full(M)), rel=1e-12)
        assert err_3d(marg, est) == pytest.approx(err_3d(data, est), rel=1e-12)


def test_err3d_zero_means_marginals_coincide():
    m = init_model(5, 3, 3, seed=10)
    p = m.permuted([1, 2, 0])
    assert err_3d(m, p) < 1e-24


def test_err3d_bad_reference():
    with pytest.raises(TypeError):
        err_3d(object(), init_model(3, 2, 1, seed=0))
    with pytest.raises(DimensionError):
        err_3d(init_model(4, 2, 1, seed=0), init_model(4, 2, 1, seed=0), M=5)


def test_fms_self_and_permuted():
    m = init_model(4, 5, 3, seed=11)
    score, perm = fms(m, m)
    assert score == pytest.approx(3.0, abs=1e-12)
    assert perm == [0, 1, 2]
    p = [2, 0, 1]
    score, perm = fms(m, m.permuted(p))
    assert score == pytest.approx(3.0, abs=1e-12)
    # estimated column perm[r] is true column r
    assert [p[q] for q in perm] == [0, 1, 2]


def test_fms_brute_force():
    rng = np.random.default_rng(12)
    for _ in range(30):
        t = init_model(4, 4, 3, seed=int(rng.integers(1 << 30)))
        e = init_model(4, 4, 3, seed=int(rng.integers(1 << 30)))
        score, _ = fms(t, e)
        assert score == pytest.approx(brute_fms(t, e), abs=1e-12)
        assert 0 <= score <= 3


def test_fms_ignores_lambda():
    t, e = init_model(4, 4, 3, seed=13), init_model(4, 4, 3, seed=14)
    e2 = FactorModel(np.array([0.98, 0.01, 0.01]), e.factors)
    S1, _ = fms_score_matrix(t, e)
    S2, _ = fms_score_matrix(t, e2)
    np.testing.assert_array_equal(S1, S2)
    assert fms(t, e) == fms(t, e2)


def test_fms_permutation_invariance():
    t, e = init_model(4, 4, 4, seed=15), init_model(4, 4, 4, seed=16)
    s0, _ = fms(t, e)
    for perm in ([1, 0, 3, 2], [3, 2, 1, 0]):
        assert abs(fms(t.permuted(perm), e)[0] - s0) < 1e-12
        assert abs(fms(t, e.permuted(perm))[0] - s0) < 1e-12


def test_fms_zero_column_flagged():
    t = init_model(3, 3, 2, seed=17)
    e = t.copy()
    e.factors[0][:, 1] = 0.0
    S, nz = fms_score_matrix(t, e)
    assert nz == 1
    assert S[1, 1] == 0.0
    with pytest.raises(DimensionError):
        fms(t, init_model(3, 3, 3, seed=0))


def test_evaluate_report():
    t = init_model(5, 3, 2, seed=18)
    rep = evaluate(t, truth=t)
    assert rep.err1d == 0 and rep.err3d == 0
    assert rep.fms == pytest.approx(2.0) and rep.fms_normalized == pytest.approx(1.0)
    d = rep.to_dict()
    assert set(d) >= {"err1d", "err3d", "fms", "permutation"}
    data = BinnedDataset(np.random.default_rng(0).integers(1, 4, size=(50, 5)), 3)
    rep = evaluate(t, reference=data)
    assert np.isnan(rep.fms) and rep.err3d > 0
    with pytest.raises(ValueError):
        evaluate(t)
