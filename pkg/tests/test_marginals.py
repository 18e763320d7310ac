import itertools

import numpy as np
import pytest

from pctf3d.coupling import Coupling, gen_full, gen_plus1
from pctf3d.marginals import (BinnedDataset, DegenerateColumnError, bin_dataset,
                              empirical_marginal, estimate_marginals, marginalize_model_3d,
                              model_marginals, read_csv, write_binned)
from pctf3d.solver import FactorModel, init_model
from pctf3d.tensor_core import cpd3_reconstruct

from oracles import full_tensor, marginal_of_full, pair_counts


def test_binning_boundary_convention():
    raw = np.array([[0.0], [0.5], [1.0]])
    assert bin_dataset(raw, 2).data[:, 0].tolist() == [1, 2, 2]


def test_binning_edges():
    raw = np.array([[0.0, -1.0], [2.0, 3.0]])
    b = bin_dataset(raw, 4)
    np.testing.assert_allclose(b.edges[0], [0, 0.5, 1, 1.5, 2])
    np.testing.assert_allclose(b.edges[1], [-1, 0, 1, 2, 3])
    assert b.data.tolist() == [[1, 1], [4, 4]]


def test_identity_binning():
    raw = np.array([[1, 3, 2], [2, 1, 3]], dtype=float)
    b = bin_dataset(raw, 3, strategy="identity")
    np.testing.assert_array_equal(b.data, raw.astype(int))
    with pytest.raises(ValueError):
        bin_dataset(raw + 0.5, 3, strategy="identity")
    with pytest.raises(ValueError):
        bin_dataset(raw, 2, strategy="identity")


def test_binning_errors():
    with pytest.raises(DegenerateColumnError):
        bin_dataset(np.array([[1.0, 0.0], [1.0, 2.0]]), 3)
    with pytest.raises(ValueError):
        bin_dataset(np.array([[1.0], [2.0]]), 1)
    with pytest.raises(ValueError):
        bin_dataset(np.array([[1.0], [np.nan]]), 3)
    with pytest.raises(ValueError):
        bin_dataset(np.array([[1.0], [2.0]]), 3, strategy="quantile")


def test_uniform_binning_concentration():
    N, I = 200_000, 10
    raw = np.random.default_rng(0).uniform(size=(N, 3))
    b = bin_dataset(raw, I)
    sigma = np.sqrt(N * (1 / I) * (1 - 1 / I))
    for m in range(3):
        counts = np.bincount(b.data[:, m] - 1, minlength=I)
        assert np.all(np.abs(counts - N / I) < 5 * sigma)


def test_single_row_gives_one_hot():
    data = BinnedDataset(np.array([[2, 1, 3, 2]]), 3)
    for t, h in estimate_marginals(data, gen_full(4)).items():
        assert h.sum() == 1.0
        assert np.count_nonzero(h) == 1
        idx = tuple(data.data[0, v - 1] - 1 for v in t)
        assert h[idx] == 1.0


def test_identical_rows():
    data = BinnedDataset(np.tile([1, 2, 2, 3], (4, 1)), 3)
    h = empirical_marginal(data, (1, 2, 4))
    assert h[0, 1, 2] == 1.0
    assert h.sum() == 1.0


def test_pairwise_counts_oracle():
    rng = np.random.default_rng(3)
    I = 4
    data = BinnedDataset(rng.integers(1, I + 1, size=(500, 5)), I)
    c = gen_plus1(5)
    marg = estimate_marginals(data, c)
    for (j, k, l), h in marg.items():
        np.testing.assert_allclose(h.sum(axis=2), pair_counts(data.data, j, k, I), atol=1e-15)
        np.testing.assert_allclose(h.sum(axis=1), pair_counts(data.data, j, l, I), atol=1e-15)
        np.testing.assert_allclose(h.sum(axis=0), pair_counts(data.data, k, l, I), atol=1e-15)


def test_shared_pair_consistency():
    rng = np.random.default_rng(4)
    data = BinnedDataset(rng.integers(1, 4, size=(300, 4)), 3)
    a = empirical_marginal(data, (1, 2, 3)).sum(axis=2)
    b = empirical_marginal(data, (1, 2, 4)).sum(axis=2)
    # the underlying counts agree exactly; normalized sums up to rounding
    np.testing.assert_array_equal(np.rint(a * data.N), np.rint(b * data.N))
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-15)


def test_marginal_is_probability_tensor():
    rng = np.random.default_rng(5)
    data = BinnedDataset(rng.integers(1, 6, size=(777, 6)), 5)
    for h in estimate_marginals(data, gen_full(6)).values():
        assert h.min() >= 0 and h.max() <= 1
        assert abs(h.sum() - 1) < 1e-9


def test_estimate_rejects_wide_coupling():
    data = BinnedDataset(np.ones((3, 4), dtype=int), 2)
    with pytest.raises(ValueError):
        estimate_marginals(data, gen_full(5))


def test_binned_dataset_validation():
    with pytest.raises(ValueError):
        BinnedDataset(np.array([[0, 1]]), 2)
    with pytest.raises(ValueError):
        BinnedDataset(np.array([[3, 1]]), 2)


def test_model_marginal_m3_is_full_reconstruction():
    m = init_model(3, 4, 2, seed=1)
    np.testing.assert_array_equal(marginalize_model_3d(m, (1, 2, 3)),
                                  cpd3_reconstruct(m.lam, *m.factors))


def test_model_marginal_sums_to_one():
    m = init_model(6, 5, 4, seed=2)
    for t in itertools.combinations(range(1, 7), 3):
        assert abs(marginalize_model_3d(m, t).sum() - 1) < 1e-9


def test_model_marginal_matches_full_tensor():
    m = init_model(4, 3, 2, seed=3)
    full = full_tensor(m.lam, m.factors)
    for t in itertools.combinations(range(1, 5), 3):
        np.testing.assert_allclose(marginalize_model_3d(m, t), marginal_of_full(full, t),
                                   atol=1e-14)


def test_model_marginal_out_of_range():
    m = init_model(4, 3, 2, seed=3)
    with pytest.raises(IndexError):
        marginalize_model_3d(m, (1, 2, 5))
    assert set(model_marginals(m, gen_plus1(4))) == set(gen_plus1(4).triplets)


def test_csv_io(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b,c\n0.5,1,2\n1.5,3,4\n")
    raw = read_csv(p, header=True)
    assert raw.shape == (2, 3)
    one = tmp_path / "one.csv"
    one.write_text("1,2,3\n")
    assert read_csv(one).shape == (1, 3)
    with pytest.raises(ValueError):
        read_csv(p)


def test_write_binned(tmp_path):
    raw = np.random.default_rng(6).normal(size=(20, 3))
    b = bin_dataset(raw, 5)
    write_binned(b, tmp_path / "z.csv", tmp_path / "edges.csv")
    back = bin_dataset(read_csv(tmp_path / "z.csv"), 5, strategy="identity")
    np.testing.assert_array_equal(back.data, b.data)
    np.testing.assert_array_equal(read_csv(tmp_path / "edges.csv"), b.edges)


def test_factor_model_shapes():
    with pytest.raises(ValueError):
        FactorModel(np.ones(2) / 2, [np.ones((3, 2)), np.ones((4, 2))])
    with pytest.raises(ValueError):
        FactorModel(np.ones(3) / 3, [np.ones((3, 2))])
    assert Coupling(3, ((1, 2, 3),)).T == 1
