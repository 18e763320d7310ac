"""Dataset binning and empirical 3D marginals."""

from dataclasses import dataclass

import numpy as np

from .tensor_core import cpd3_reconstruct


class DegenerateColumnError(ValueError):
    """A column is constant, so equal-width binning is undefined."""


@dataclass
class BinnedDataset:
    """``N x M`` matrix of 1-based bin indices plus per-column bin edges."""

    data: np.ndarray
    I: int
    edges: np.ndarray = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.int64)
        if self.data.ndim != 2:
            raise ValueError("binned data must be a 2-D matrix")
        if self.data.size and (self.data.min() < 1 or self.data.max() > self.I):
            raise ValueError(f"bin indices must lie in 1..{self.I}")

    @property
    def N(self):
        return self.data.shape[0]

    @property
    def M(self):
        return self.data.shape[1]


def bin_dataset(raw, I, strategy="equal_width"):
    """Discretize each column of ``raw`` into ``I`` bins.

    ``equal_width`` splits ``[min, max]`` into ``I`` equal intervals, each
    closed on the left; the column maximum falls in bin ``I``. ``identity``
    takes values that already are integers in ``1..I``.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 2 or raw.shape[0] < 1:
        raise ValueError("raw data must be a non-empty N x M matrix")
    if I < 2:
        raise ValueError(f"I must be at least 2, got {I}")
    if not np.all(np.isfinite(raw)):
        raise ValueError("raw data contains non-finite values")

    if strategy == "identity":
        idx = np.rint(raw).astype(np.int64)
        if not np.array_equal(idx, raw):
            raise ValueError("identity binning requires integer-valued data")
        edges = np.tile(np.arange(I + 1, dtype=float) + 0.5, (raw.shape[1], 1))
        return BinnedDataset(idx, I, edges)
    if strategy != "equal_width":
        raise ValueError(f"unknown binning strategy {strategy!r}")

    lo = raw.min(axis=0)
    hi = raw.max(axis=0)
    const = np.flatnonzero(hi <= lo)
    if const.size:
        raise DegenerateColumnError(
            f"constant column(s) {(const + 1).tolist()} cannot be binned")
    edges = np.linspace(lo, hi, I + 1, axis=1)
    idx = np.floor((raw - lo) / (hi - lo) * I).astype(np.int64) + 1
    np.clip(idx, 1, I, out=idx)
    return BinnedDataset(idx, I, edges)


def empirical_marginal(data, triplet):
    """Normalized 3-way histogram of the columns in ``triplet`` (1-based)."""
    z = data.data
    I = data.I
    j, k, l = (v - 1 for v in triplet)
    flat = (z[:, j] - 1) + I * (z[:, k] - 1) + I * I * (z[:, l] - 1)
    counts = np.bincount(flat, minlength=I ** 3).astype(float)
    return counts.reshape((I, I, I), order="F") / z.shape[0]


def estimate_marginals(data, coupling):
    """Empirical 3D marginal for every triplet of ``coupling``.

    Returns a dict keyed by sorted triplet; tensor modes follow triplet order.
    """
    if coupling.M > data.M:
        raise ValueError(
            f"coupling has M={coupling.M} but the dataset has {data.M} columns")
    return {t: empirical_marginal(data, t) for t in coupling.triplets}


def marginalize_model_3d(model, triplet):
    """3D marginal of an NBM: the CPD of ``lam`` with the triplet's factors."""
    j, k, l = triplet
    for v in triplet:
        if not 1 <= v <= model.M:
            raise IndexError(f"variable {v} out of range 1..{model.M}")
    f = model.factors
    return cpd3_reconstruct(model.lam, f[j - 1], f[k - 1], f[l - 1])


def model_marginals(model, coupling):
    return {t: marginalize_model_3d(model, t) for t in coupling.triplets}


def read_csv(path, header=False, dtype=float):
    """Load an ``N x M`` matrix from CSV; ``header`` skips the first row."""
    arr = np.loadtxt(path, delimiter=",", skiprows=1 if header else 0,
                     dtype=dtype, ndmin=2)
    return arr


def write_binned(binned, path, edges_path=None):
    """Write bin indices as integer CSV plus an optional edges sidecar."""
    np.savetxt(path, binned.data, fmt="%d", delimiter=",")
    if edges_path is not None and binned.edges is not None:
        np.savetxt(edges_path, binned.edges, fmt="%.17g", delimiter=",")
