"""Evaluation metrics: 1D and 3D marginal errors and the factor match score."""

import itertools
from collections.abc import Mapping
from dataclasses import dataclass, asdict

import numpy as np
from scipy.optimize import linear_sum_assignment

from .marginals import BinnedDataset, empirical_marginal, marginalize_model_3d
from .solver import FactorModel
from .tensor_core import DimensionError, frobenius_sq_diff


@dataclass
class MetricReport:
    err1d: float
    err3d: float
    fms: float
    fms_normalized: float
    permutation: list
    zero_norm_columns: int = 0

    def to_dict(self):
        return asdict(self)


def empirical_1d(data):
    """Per-variable normalized histograms of a binned dataset, shape (M, I)."""
    z = data.data
    h = np.stack([np.bincount(z[:, m] - 1, minlength=data.I) for m in range(data.M)])
    return h / z.shape[0]


def _one_d(ref):
    if isinstance(ref, FactorModel):
        return ref.one_d_marginals()
    if isinstance(ref, BinnedDataset):
        return empirical_1d(ref)
    return np.asarray(ref, dtype=float)


def err_1d(reference, est):
    """Sum over variables of squared 2-norm errors of the 1D marginals.

    ``reference`` may be a FactorModel, a BinnedDataset, or an (M, I) array.
    """
    h = _one_d(reference)
    hh = _one_d(est)
    if h.shape != hh.shape:
        raise DimensionError(f"1D marginal shapes differ: {h.shape} vs {hh.shape}")
    return float(np.sum((h - hh) ** 2))


def _reference_3d(reference, t):
    if isinstance(reference, FactorModel):
        return marginalize_model_3d(reference, t)
    if isinstance(reference, BinnedDataset):
        return empirical_marginal(reference, t)
    if isinstance(reference, Mapping):
        return reference[t]
    raise TypeError(f"unsupported reference type {type(reference).__name__}")


def err_3d(reference, est, M=None):
    """Squared Frobenius error summed over every triplet ``j < k < l``.

    ``reference`` is a ground-truth FactorModel, a BinnedDataset (empirical
    histograms), or a mapping from triplet to tensor.
    """
    M = est.M if M is None else M
    if est.M != M:
        raise DimensionError(f"estimate has M={est.M}, expected {M}")
    total = 0.0
    for t in itertools.combinations(range(1, M + 1), 3):
        total += frobenius_sq_diff(_reference_3d(reference, t),
                                   marginalize_model_3d(est, t))
    return total


def _unit_columns(a):
    norms = np.linalg.norm(a, axis=0)
    zero = norms == 0
    return a / np.where(zero, 1.0, norms), zero


def fms_score_matrix(model_true, model_est):
    """``S[r, q] = prod_m cos(a_r^(m), ahat_q^(m))`` and the count of zero-norm columns.

    A cosine involving a zero column is taken as 0.
    """
    if (model_true.M, model_true.I, model_true.R) != (model_est.M, model_est.I, model_est.R):
        raise DimensionError("models differ in M, I or R")
    S = np.ones((model_true.R, model_est.R))
    n_zero = 0
    for a, b in zip(model_true.factors, model_est.factors):
        ua, za = _unit_columns(a)
        ub, zb = _unit_columns(b)
        n_zero += int(za.sum() + zb.sum())
        S *= ua.T @ ub
    return S, n_zero


def fms(model_true, model_est):
    """Factor match score: best-permutation sum of products of cosines.

    Returns ``(score, perm)`` where estimated component ``perm[r]`` is matched
    to true component ``r``. The score is in ``[0, R]`` for nonnegative
    factors; ``lam`` plays no part.
    """
    S, _ = fms_score_matrix(model_true, model_est)
    rows, cols = linear_sum_assignment(S, maximize=True)
    return float(S[rows, cols].sum()), [int(c) for c in cols]


def evaluate(est, truth=None, reference=None):
    """Full metric report.

    ``truth`` (a FactorModel) enables FMS; ``reference`` supplies the marginals
    for Err1D/Err3D and defaults to ``truth``.
    """
    ref = truth if reference is None else reference
    if ref is None:
        raise ValueError("need a ground-truth model or a reference dataset")
    e1 = err_1d(ref, est)
    e3 = err_3d(ref, est)
    if truth is not None:
        score, perm = fms(truth, est)
        _, nz = fms_score_matrix(truth, est)
    else:
        score, perm, nz = float("nan"), [], 0
    return MetricReport(e1, e3, score, score / est.R, perm, nz)
