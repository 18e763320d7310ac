"""Compiled inner loop of the simplex-constrained ADMM solves."""

import numpy as np
from numba import njit


@njit(cache=True)
def _simplex_threshold(v, buf):
    """Shift ``theta`` such that ``max(v - theta, 0)`` sums to one."""
    n = v.shape[0]
    # insertion sort, descending; n is the number of bins or the rank
    for i in range(n):
        x = v[i]
        j = i
        while j > 0 and buf[j - 1] < x:
            buf[j] = buf[j - 1]
            j -= 1
        buf[j] = x
    css = 0.0
    theta = 0.0
    for i in range(n):
        css += buf[i]
        t = (css - 1.0) / (i + 1)
        if buf[i] > t:
            theta = t
    return theta


@njit(cache=True)
def _ratio(num, den):
    if num == 0.0:
        return 0.0
    if den < 1e-30:
        return np.inf
    return num / den


@njit(cache=True)
def admm_simplex_loop(P, rhs_t, x, u, rho, max_inner, eps, by_rows):
    """Run ADMM iterations in place on ``x`` (m x R) and the dual ``u``.

    The unconstrained step is ``aux = (rhs_t + rho (x + u)) P`` with
    ``P = (G + rho I)^-1``. Projection is onto the simplex along columns of
    ``x``, or along its rows when ``by_rows`` is set. Returns the number of
    iterations run.
    """
    m, R = x.shape
    aux = np.empty((m, R))
    b = np.empty((m, R))
    v = np.empty(max(m, R))
    buf = np.empty(max(m, R))
    it = 0
    while it < max_inner:
        it += 1
        for i in range(m):
            for r in range(R):
                b[i, r] = rhs_t[i, r] + rho * (x[i, r] + u[i, r])
        for i in range(m):
            for r in range(R):
                acc = 0.0
                for q in range(R):
                    acc += b[i, q] * P[q, r]
                aux[i, r] = acc
        num_s = 0.0
        if by_rows:
            for i in range(m):
                for r in range(R):
                    v[r] = aux[i, r] - u[i, r]
                theta = _simplex_threshold(v[:R], buf)
                for r in range(R):
                    new = max(v[r] - theta, 0.0)
                    d = new - x[i, r]
                    num_s += d * d
                    x[i, r] = new
        else:
            for r in range(R):
                for i in range(m):
                    v[i] = aux[i, r] - u[i, r]
                theta = _simplex_threshold(v[:m], buf)
                for i in range(m):
                    new = max(v[i] - theta, 0.0)
                    d = new - x[i, r]
                    num_s += d * d
                    x[i, r] = new
        num_r = 0.0
        den_r = 0.0
        den_s = 0.0
        for i in range(m):
            for r in range(R):
                d = x[i, r] - aux[i, r]
                u[i, r] += d
                num_r += d * d
                den_r += x[i, r] * x[i, r]
                den_s += u[i, r] * u[i, r]
        if _ratio(num_r, den_r) < eps and _ratio(num_s, den_s) < eps:
            break
    return it


@njit(cache=True)
def spd_inverse(S):
    """Inverse of a symmetric positive-definite matrix through its Cholesky factor."""
    n = S.shape[0]
    L = np.zeros((n, n))
    for j in range(n):
        d = S[j, j]
        for k in range(j):
            d -= L[j, k] * L[j, k]
        if d <= 0.0:
            raise np.linalg.LinAlgError("matrix is not positive definite")
        L[j, j] = np.sqrt(d)
        for i in range(j + 1, n):
            s = S[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            L[i, j] = s / L[j, j]
    # Linv lower triangular, then S^-1 = Linv^T Linv
    Li = np.zeros((n, n))
    for j in range(n):
        Li[j, j] = 1.0 / L[j, j]
        for i in range(j + 1, n):
            s = 0.0
            for k in range(j, i):
                s -= L[i, k] * Li[k, j]
            Li[i, j] = s / L[i, i]
    out = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            s = 0.0
            for k in range(j, n):
                s += Li[k, i] * Li[k, j]
            out[i, j] = s
            out[j, i] = s
    return out
