"""Dense order-3 tensor kernels.

All tensors are numpy arrays indexed ``t[i, j, k]``; vectorization and
unfoldings use column-major (Fortran) ordering so that

    vec(cpd3(lam, A, B, C)) == khatri_rao(khatri_rao(C, B), A) @ lam
    unfold1(cpd3(lam, A, B, C)) == A @ diag(lam) @ khatri_rao(C, B).T
"""

import numpy as np


class DimensionError(ValueError):
    """Raised when array shapes are incompatible."""


def khatri_rao(a, b):
    """Column-wise Kronecker product.

    Parameters
    ----------
    a : ndarray, shape (I_a, R)
    b : ndarray, shape (I_b, R)

    Returns
    -------
    ndarray, shape (I_a * I_b, R)
        Column ``r`` is ``kron(a[:, r], b[:, r])``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError("khatri_rao expects two matrices")
    if a.shape[1] != b.shape[1]:
        raise DimensionError(
            f"column mismatch: {a.shape[1]} vs {b.shape[1]}")
    ia, r = a.shape
    ib = b.shape[0]
    return (a[:, None, :] * b[None, :, :]).reshape(ia * ib, r)


def cpd3_reconstruct(lam, a, b, c):
    """Assemble ``sum_r lam[r] * a[:, r] o b[:, r] o c[:, r]``."""
    lam = np.asarray(lam, dtype=float)
    a, b, c = (np.asarray(x, dtype=float) for x in (a, b, c))
    r = lam.shape[0]
    for f in (a, b, c):
        if f.ndim != 2 or f.shape[1] != r:
            raise DimensionError(
                f"factor with shape {f.shape} does not match rank {r}")
    return np.einsum("r,ir,jr,kr->ijk", lam, a, b, c, optimize=True)


def vectorize(t):
    """Column-major vectorization."""
    return np.asarray(t).reshape(-1, order="F")


def unvectorize(v, dims):
    v = np.asarray(v)
    if v.size != int(np.prod(dims)):
        raise DimensionError(f"cannot unvectorize {v.size} entries into {tuple(dims)}")
    return v.reshape(dims, order="F")


def matricize_mode1(t):
    """Mode-1 unfolding, shape ``(I_1, I_2 * I_3)``; column index ``j + k * I_2``."""
    t = np.asarray(t)
    if t.ndim != 3:
        raise DimensionError("matricize_mode1 expects an order-3 tensor")
    return t.reshape(t.shape[0], -1, order="F")


def frobenius_sq_diff(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    d = a - b
    return float(np.vdot(d, d))


def check_tensor3(t):
    """Validate an order-3 tensor: three positive dims and finite entries."""
    t = np.asarray(t, dtype=float)
    if t.ndim != 3 or min(t.shape) < 1:
        raise DimensionError(f"expected an order-3 tensor, got shape {t.shape}")
    if not np.all(np.isfinite(t)):
        raise ValueError("tensor contains non-finite entries")
    return t


def is_simplex_matrix(a, tol=1e-9):
    """True when every column is nonnegative and sums to one within ``tol``."""
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    return bool(np.all(a >= -tol) and np.all(np.abs(a.sum(axis=0) - 1.0) <= tol))
