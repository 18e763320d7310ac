"""Simplex-constrained coupled CPD of 3D marginals, solved by AO-ADMM.

The outer loop sweeps the factor matrices ``A^(1..M)`` in order (each update
sees the freshest values of the others) and then the loading vector ``lam``.
Every block is a constrained least-squares problem solved by a few ADMM
iterations with a Cholesky factor of ``G + rho I`` cached per call.
"""

import json
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from .coupling import Coupling, is_connected
from ._kernels import admm_simplex_loop, spd_inverse
from .simplex import simplex_project
from .tensor_core import is_simplex_matrix, khatri_rao


class InvalidCouplingError(ValueError):
    """The coupling is not valid for the requested fit."""


class MissingMarginalError(KeyError):
    """A coupling triplet has no marginal tensor."""


@dataclass
class FactorModel:
    """Loading vector ``lam`` (length R) and M factor matrices of shape I x R."""

    lam: np.ndarray
    factors: list

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=float)
        self.factors = [np.asarray(a, dtype=float) for a in self.factors]
        R = self.lam.shape[0]
        shapes = {a.shape for a in self.factors}
        if len(shapes) != 1:
            raise ValueError(f"factor shapes differ: {sorted(shapes)}")
        if self.factors[0].shape[1] != R:
            raise ValueError("factor column count does not match len(lam)")

    @property
    def M(self):
        return len(self.factors)

    @property
    def I(self):
        return self.factors[0].shape[0]

    @property
    def R(self):
        return self.lam.shape[0]

    def is_feasible(self, tol=1e-9):
        return is_simplex_matrix(self.lam, tol) and all(
            is_simplex_matrix(a, tol) for a in self.factors)

    def copy(self):
        return FactorModel(self.lam.copy(), [a.copy() for a in self.factors])

    def permuted(self, perm):
        """Reorder the rank-one components by ``perm``."""
        perm = np.asarray(perm)
        return FactorModel(self.lam[perm], [a[:, perm] for a in self.factors])

    def one_d_marginals(self):
        """``h^(m) = A^(m) lam`` for every variable, shape (M, I)."""
        return np.stack([a @ self.lam for a in self.factors])


@dataclass
class SolverConfig:
    R: int
    max_outer: int = 1000
    max_inner: int = 20
    eps: float = 1e-6
    seed: int = 0
    warm_start_duals: bool = False
    restarts: int = 1

    def __post_init__(self):
        if self.R < 1:
            raise ValueError("R must be >= 1")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("iteration caps must be >= 1")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")


@dataclass
class FitReport:
    objective_trace: list = field(default_factory=list)
    initial_objective: float = float("nan")
    iterations_run: int = 0
    converged: bool = False
    wall_time: float = 0.0
    restart: int = 0
    seed: int = 0

    def to_dict(self):
        return asdict(self)


@dataclass
class AdmmWorkspace:
    """Per-block ADMM state. Duals survive between outer iterations only when
    warm starting is enabled."""

    duals: dict = field(default_factory=dict)
    last_rho: dict = field(default_factory=dict)
    inner_iterations: dict = field(default_factory=dict)
    unfoldings: dict = field(default_factory=dict)

    def unfolding(self, marginals, t, m):
        key = (t, m)
        if key not in self.unfoldings:
            self.unfoldings[key] = _unfold_for(marginals, t, m)
        return self.unfoldings[key]


def init_model(M, I, R, seed=None):
    """Random feasible model: i.i.d. uniform entries, columns normalized."""
    if R < 1:
        raise ValueError("R must be >= 1")
    rng = np.random.default_rng(seed)
    lam = rng.uniform(size=R)
    factors = [rng.uniform(size=(I, R)) for _ in range(M)]
    return FactorModel(lam / lam.sum(), [a / a.sum(axis=0) for a in factors])


# --- residuals and stopping ---------------------------------------------------

def _ratio(num, den):
    if num == 0.0:
        return 0.0
    if den < 1e-30:
        return float("inf")
    return num / den


def admm_residuals(current, previous, auxiliary, dual):
    """Relative primal and dual residuals of one ADMM iteration.

    ``r = |x - z|^2 / |x|^2`` and ``s = |x - x_prev|^2 / |u|^2`` where ``x`` is
    the projected iterate, ``z`` the unconstrained auxiliary (already
    transposed to the shape of ``x``) and ``u`` the scaled dual.
    """
    x = np.asarray(current, dtype=float)
    d1 = x - auxiliary
    d2 = x - previous
    u = np.asarray(dual, dtype=float)
    r = _ratio(float(np.vdot(d1, d1)), float(np.vdot(x, x)))
    s = _ratio(float(np.vdot(d2, d2)), float(np.vdot(u, u)))
    return r, s


def admm_converged(current, previous, auxiliary, dual, eps):
    r, s = admm_residuals(current, previous, auxiliary, dual)
    return r < eps and s < eps


def _admm_simplex(G, rhs0, x0, u0, max_inner, eps):
    """Solve ``min_x 0.5 x^T G x - rhs0^T x`` over column-simplices by ADMM.

    ``x`` has shape (n, R) (or (R,) for the loading vector); ``rhs0`` is laid
    out as ``R x n`` (or (R,)). Returns the projected iterate, the dual, rho
    and the number of iterations run.
    """
    R = G.shape[0]
    rho = float(np.trace(G)) / R
    if rho <= 0.0:
        # all-zero Gram: the data term is flat, any feasible point is optimal
        return simplex_project(x0), u0, rho, 0
    # G is fixed for the whole call: factor G + rho I once, reuse its inverse
    S = G + rho * np.eye(R)
    try:
        P = spd_inverse(S)
    except np.linalg.LinAlgError as exc:
        raise FloatingPointError(f"G + rho I is not positive definite: {exc}") from None
    vector = x0.ndim == 1
    # row layout for the kernel: the loading vector is a single 1 x R row,
    # a factor stays I x R with the transposed right-hand side
    x = np.array(x0[None, :] if vector else x0, dtype=float, order="C")
    u = np.array(u0[None, :] if vector else u0, dtype=float, order="C")
    rhs_t = np.ascontiguousarray(rhs0[None, :] if vector else rhs0.T, dtype=float)
    it = admm_simplex_loop(P, rhs_t, x, u, rho, max_inner, eps, vector)
    if vector:
        x, u = x[0], u[0]
    return x, u, rho, it


# --- block updates -------------------------------------------------------------

def _others(t, m):
    """The two variables of triplet ``t`` besides ``m``, in ascending order."""
    j, k, l = t
    if m == j:
        return k, l
    if m == k:
        return j, l
    return j, k


def _unfold_for(marginals, t, m):
    """Mode unfolding of the marginal of ``t`` with ``m``'s mode as rows.

    The remaining two modes keep their relative order, so the column index is
    ``i_k + I * i_l`` for ``(k, l) = _others(t, m)``.
    """
    H = marginals[t]
    axis = t.index(m)
    H = np.moveaxis(H, axis, 0)
    return np.ascontiguousarray(H.reshape(H.shape[0], -1, order="F"))


def factor_normal_equations(m, model, marginals, coupling, ws=None):
    """Gram ``G`` (R x R) and right-hand side ``W`` (R x I) of the A^(m) block.

    ``G = (lam lam^T) * sum Q^T Q`` and ``W = diag(lam) sum Q^T H_(1)^T`` over
    the triplets containing ``m``, with ``Q = A^(l) (kr) A^(k)``.
    """
    R, I = model.R, model.I
    lam = model.lam
    F = model.factors
    QtQ = np.zeros((R, R))
    HQ = np.zeros((I, R))
    trips = coupling.containing(m)
    if not trips:
        raise InvalidCouplingError(f"variable {m} appears in no triplet")
    for t in trips:
        k, l = _others(t, m)
        Ak, Al = F[k - 1], F[l - 1]
        H1 = ws.unfolding(marginals, t, m) if ws is not None else _unfold_for(marginals, t, m)
        QtQ += (Al.T @ Al) * (Ak.T @ Ak)
        HQ += H1 @ khatri_rao(Al, Ak)
    return np.outer(lam, lam) * QtQ, lam[:, None] * HQ.T


def lambda_normal_equations(model, marginals, coupling, ws=None):
    """``G = sum Q^T Q`` and ``w = sum Q^T vec(H)`` with ``Q = A^(l) (kr) A^(k) (kr) A^(j)``."""
    R = model.R
    F = model.factors
    G = np.zeros((R, R))
    w = np.zeros(R)
    for t in coupling.triplets:
        j, k, l = t
        Aj, Ak, Al = F[j - 1], F[k - 1], F[l - 1]
        H1 = ws.unfolding(marginals, t, j) if ws is not None else _unfold_for(marginals, t, j)
        G += (Aj.T @ Aj) * (Ak.T @ Ak) * (Al.T @ Al)
        w += np.sum(Aj * (H1 @ khatri_rao(Al, Ak)), axis=0)
    return G, w


def update_factor(m, model, marginals, coupling, cfg, ws=None):
    """New ``A^(m)`` (1-based ``m``) from the ADMM solve of its block."""
    G, W = factor_normal_equations(m, model, marginals, coupling, ws)
    x0 = model.factors[m - 1]
    key = ("A", m)
    u0 = np.zeros_like(x0)
    if ws is not None and cfg.warm_start_duals and key in ws.duals:
        u0 = ws.duals[key]
    x, u, rho, it = _admm_simplex(G, W, x0, u0, cfg.max_inner, cfg.eps)
    if ws is not None:
        ws.duals[key] = u
        ws.last_rho[key] = rho
        ws.inner_iterations[key] = it
    return x


def update_lambda(model, marginals, coupling, cfg, ws=None):
    if coupling.T == 0:
        raise InvalidCouplingError("empty coupling")
    if model.R == 1:
        return np.ones(1)
    G, w = lambda_normal_equations(model, marginals, coupling, ws)
    u0 = np.zeros(model.R)
    if ws is not None and cfg.warm_start_duals and "lam" in ws.duals:
        u0 = ws.duals["lam"]
    x, u, rho, it = _admm_simplex(G, w, model.lam, u0, cfg.max_inner, cfg.eps)
    if ws is not None:
        ws.duals["lam"] = u
        ws.last_rho["lam"] = rho
        ws.inner_iterations["lam"] = it
    return x


# --- objective and fit -----------------------------------------------------------

def _reconstruct(lam, a, b, c):
    # unfold-1 identity: A diag(lam) (C kr B)^T, reshaped column-major
    kr = (c[:, None, :] * b[None, :, :]).reshape(-1, lam.shape[0])
    return ((a * lam) @ kr.T).reshape(a.shape[0], b.shape[0], c.shape[0], order="F")


def objective(model, marginals, coupling):
    """Sum over the coupling of squared Frobenius residuals."""
    F = model.factors
    total = 0.0
    for t in coupling.triplets:
        j, k, l = t
        d = marginals[t] - _reconstruct(model.lam, F[j - 1], F[k - 1], F[l - 1])
        total += float(np.vdot(d, d))
    return total


def _check_inputs(marginals, coupling, M=None):
    if not is_connected(coupling):
        raise InvalidCouplingError(
            "coupling is not valid: it must cover every variable and be connected")
    missing = [t for t in coupling.triplets if t not in marginals]
    if missing:
        raise MissingMarginalError(f"no marginal for triplet(s) {missing[:5]}")
    dims = {marginals[t].shape for t in coupling.triplets}
    if len(dims) != 1 or len(next(iter(dims))) != 3 or len(set(next(iter(dims)))) != 1:
        raise ValueError(f"marginals must all be I x I x I, got {sorted(dims)}")
    return next(iter(dims))[0]


def fit_single(marginals, coupling, cfg, model0):
    """One AO-ADMM run from ``model0``."""
    model = model0.copy()
    ws = AdmmWorkspace()
    report = FitReport(initial_objective=objective(model, marginals, coupling))
    start = time.perf_counter()
    prev = report.initial_objective
    for it in range(1, cfg.max_outer + 1):
        for m in range(1, model.M + 1):
            model.factors[m - 1] = update_factor(m, model, marginals, coupling, cfg, ws)
        model.lam = update_lambda(model, marginals, coupling, cfg, ws)
        f = objective(model, marginals, coupling)
        report.objective_trace.append(f)
        report.iterations_run = it
        if abs(prev - f) <= cfg.eps * max(prev, 1e-300) or f == 0.0:
            report.converged = True
            break
        prev = f
    report.wall_time = time.perf_counter() - start
    return model, report


def restart_seeds(seed, restarts):
    ss = np.random.SeedSequence(seed)
    return [int(s.generate_state(1)[0]) for s in ss.spawn(restarts)]


def fit(marginals, coupling, cfg, init=None):
    """Estimate an NBM from the coupled marginals.

    Runs ``cfg.restarts`` independent initializations and keeps the run with
    the lowest final objective. ``init`` overrides the random start of the
    first restart.

    Returns
    -------
    model : FactorModel
    report : FitReport
        Report of the winning run.
    """
    I = _check_inputs(marginals, coupling)
    best = None
    for i, s in enumerate(restart_seeds(cfg.seed, cfg.restarts)):
        model0 = init if (init is not None and i == 0) else init_model(coupling.M, I, cfg.R, s)
        model, report = fit_single(marginals, coupling, cfg, model0)
        report.restart, report.seed = i, s
        final = report.objective_trace[-1]
        if best is None or final < best[1].objective_trace[-1]:
            best = (model, report)
    return best


def prune_components(model, threshold=1e-8):
    """Drop components whose loading is at most ``threshold``; renormalize."""
    keep = np.flatnonzero(model.lam > threshold)
    if keep.size == 0:
        raise ValueError("every component would be pruned")
    lam = model.lam[keep]
    return FactorModel(lam / lam.sum(), [a[:, keep] for a in model.factors])


# --- serialization ---------------------------------------------------------------

def model_to_dict(model, coupling=None, config=None):
    doc = {
        "M": model.M,
        "I": model.I,
        "R": model.R,
        "lambda": [float(x) for x in model.lam],
        "factors": [[float(x) for x in a.reshape(-1, order="F")] for a in model.factors],
    }
    prov = {}
    if coupling is not None:
        prov["coupling_hash"] = coupling.digest()
        prov["coupling_T"] = coupling.T
    if config is not None:
        prov["config"] = asdict(config)
        prov["seed"] = config.seed
    if prov:
        doc["provenance"] = prov
    return doc


def model_from_dict(doc):
    M, I, R = int(doc["M"]), int(doc["I"]), int(doc["R"])
    lam = np.array(doc["lambda"], dtype=float)
    factors = [np.array(f, dtype=float).reshape((I, R), order="F") for f in doc["factors"]]
    if lam.shape != (R,) or len(factors) != M:
        raise ValueError("model document is inconsistent with its M, I, R fields")
    return FactorModel(lam, factors)


def save_model(model, path, coupling=None, config=None):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(model_to_dict(model, coupling, config), f, indent=1)
        f.write("\n")


def load_model(path):
    with open(path, encoding="utf-8") as f:
        return model_from_dict(json.load(f))
