"""Euclidean projection onto the probability simplex."""

import numpy as np


def _project_columns(v):
    n, c = v.shape
    u = np.sort(v, axis=0)[::-1]
    css = np.cumsum(u, axis=0)
    css -= 1.0
    ks = np.arange(1, n + 1, dtype=float)[:, None]
    # the test holds on a prefix of the sorted entries; its length is the support size
    rho = np.count_nonzero(u * ks > css, axis=0)
    theta = css[rho - 1, np.arange(c)] / rho
    return np.maximum(v - theta, 0.0)


def simplex_project(v):
    """Euclidean projection onto the probability simplex ``{x >= 0, sum x = 1}``.

    Sort-and-threshold method. A 2-D input is projected column by column.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim == 1:
        return _project_columns(v[:, None])[:, 0]
    if v.ndim != 2:
        raise ValueError("simplex_project expects a vector or a matrix")
    return _project_columns(v)
