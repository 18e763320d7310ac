"""Synthetic ground truths, sampling, and the benchmark harness."""

import csv
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict

import numpy as np
from scipy.special import ndtr
from scipy.stats import truncnorm

from .coupling import generate
from .marginals import BinnedDataset, estimate_marginals
from .metrics import err_1d, err_3d, fms
from .solver import FactorModel, SolverConfig, fit


class GenerationError(ValueError):
    """A mixture component puts no mass on the binned range."""


@dataclass
class MixtureSpec:
    """Mixture of R product densities on ``[0, 1]^M``, discretized on I bins.

    Gaussian components draw means uniformly on ``[0, 1]`` and standard
    deviations uniformly on ``sd_range`` (as fractions of the range). Uniform
    components draw interval widths on ``width_range`` and place the interval
    uniformly inside ``[0, 1]``.
    """

    kind: str = "gaussian"
    M: int = 7
    R: int = 5
    I: int = 10
    seed: int = 0
    sd_range: tuple = (0.05, 0.25)
    width_range: tuple = (0.2, 0.6)

    def __post_init__(self):
        if self.kind not in ("gaussian", "uniform"):
            raise ValueError(f"unknown mixture kind {self.kind!r}")
        if self.R < 1 or self.I < 2 or self.M < 3:
            raise ValueError("need R >= 1, I >= 2 and M >= 3")


def _substream(seed, tag):
    return np.random.default_rng(np.random.SeedSequence([int(seed), tag]))


def _component_params(spec):
    rng = _substream(spec.seed, 0)
    lam = rng.dirichlet(np.ones(spec.R))
    shape = (spec.M, spec.R)
    if spec.kind == "gaussian":
        p1 = rng.uniform(0.0, 1.0, size=shape)            # means
        p2 = rng.uniform(*spec.sd_range, size=shape)       # standard deviations
    else:
        width = rng.uniform(*spec.width_range, size=shape)
        p1 = rng.uniform(0.0, 1.0, size=shape) * (1.0 - width)   # left ends
        p2 = p1 + width                                             # right ends
    return lam, p1, p2


def gen_nbm(spec):
    """Ground-truth FactorModel: each component density integrated over the bins."""
    lam, p1, p2 = _component_params(spec)
    edges = np.linspace(0.0, 1.0, spec.I + 1)
    factors = []
    for m in range(spec.M):
        if spec.kind == "gaussian":
            z = (edges[:, None] - p1[m]) / p2[m]
            mass = np.diff(ndtr(z), axis=0)
        else:
            lo = np.maximum(edges[:-1, None], p1[m])
            hi = np.minimum(edges[1:, None], p2[m])
            mass = np.clip(hi - lo, 0.0, None) / (p2[m] - p1[m])
        tot = mass.sum(axis=0)
        if np.any(tot <= 1e-300):
            raise GenerationError(f"component with no mass on [0, 1] in dimension {m + 1}")
        factors.append(mass / tot)
    return FactorModel(lam, factors)


def sample_nbm(model, N, seed=None):
    """Draw N rows: latent class from ``lam``, then one bin per variable."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    rng = np.random.default_rng(seed)
    latent = rng.choice(model.R, size=N, p=model.lam)
    out = np.empty((N, model.M), dtype=np.int64)
    groups = [np.flatnonzero(latent == r) for r in range(model.R)]
    for m, a in enumerate(model.factors):
        cdf = np.cumsum(a, axis=0)
        u = rng.random(N)
        for r, idx in enumerate(groups):
            if idx.size:
                out[idx, m] = np.searchsorted(cdf[:, r], u[idx], side="right")
    np.clip(out, 0, model.I - 1, out=out)
    return BinnedDataset(out + 1, model.I)


def sample_continuous(spec, N, seed=None):
    """Draw N real-valued rows from the continuous mixture, restricted to ``[0, 1]``."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    lam, p1, p2 = _component_params(spec)
    rng = np.random.default_rng(seed)
    latent = rng.choice(spec.R, size=N, p=lam)
    mu = p1[:, latent].T
    if spec.kind == "gaussian":
        sd = p2[:, latent].T
        return truncnorm.rvs((0.0 - mu) / sd, (1.0 - mu) / sd, loc=mu, scale=sd,
                             random_state=rng)
    return rng.uniform(mu, p2[:, latent].T)


def bin_unit_range(raw, I):
    """Bin values in ``[0, 1]`` on the fixed grid used by :func:`gen_nbm`."""
    idx = np.floor(np.asarray(raw) * I).astype(np.int64) + 1
    np.clip(idx, 1, I, out=idx)
    return BinnedDataset(idx, I, np.tile(np.linspace(0, 1, I + 1), (idx.shape[1], 1)))


# --- benchmark harness -----------------------------------------------------------

CSV_FIELDS = ["strategy", "T", "N", "seed", "err1d", "err3d", "fms",
              "iterations", "wall_ms"]


@dataclass
class BenchGrid:
    """Cells of (strategy, T, N), each run once per seed."""

    cells: list
    seeds: list
    M: int = 10
    I: int = 15
    R: int = 5
    kind: str = "uniform"
    max_outer: int = 1000
    max_inner: int = 20
    eps: float = 1e-6
    restarts: int = 1
    sampling: str = "discretized"

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        cells = [dict(c) for c in doc.pop("cells")]
        for c in cells:
            c.setdefault("T", None)
        return cls(cells=cells, **doc)

    def to_dict(self):
        return asdict(self)


def strategy_cells_m10(N):
    """Strategies of the M=10 comparison: '+2', '+1', random 1/8, 1/4, 1/2, full."""
    return [
        {"strategy": "plus2", "T": 5, "N": N},
        {"strategy": "plus1", "T": 10, "N": N},
        {"strategy": "random", "T": 15, "N": N},
        {"strategy": "random", "T": 30, "N": N},
        {"strategy": "random", "T": 60, "N": N},
        {"strategy": "full", "T": 120, "N": N},
    ]


def run_cell(grid, cell, seed):
    """One benchmark row: truth, sample, marginals, fit, metrics."""
    spec = MixtureSpec(kind=grid.kind, M=grid.M, R=grid.R, I=grid.I, seed=seed)
    truth = gen_nbm(spec)
    N = int(cell["N"])
    if grid.sampling == "continuous":
        data = bin_unit_range(sample_continuous(spec, N, seed=[seed, 1]), grid.I)
    else:
        data = sample_nbm(truth, N, seed=[seed, 1])
    coupling = generate(cell["strategy"], grid.M, cell.get("T"), seed=[seed, 2])
    marg = estimate_marginals(data, coupling)
    cfg = SolverConfig(R=grid.R, max_outer=grid.max_outer, max_inner=grid.max_inner,
                       eps=grid.eps, seed=seed, restarts=grid.restarts)
    t0 = time.perf_counter()
    model, report = fit(marg, coupling, cfg)
    wall = time.perf_counter() - t0
    score, _ = fms(truth, model)
    return {
        "strategy": cell["strategy"],
        "T": coupling.T,
        "N": N,
        "seed": seed,
        "err1d": err_1d(truth, model),
        "err3d": err_3d(truth, model),
        "fms": score,
        "iterations": report.iterations_run,
        "wall_ms": wall * 1e3,
    }


def _run_job(args):
    return run_cell(*args)


def run_benchmark(grid, on_row=None, workers=1):
    """Run every (cell, seed) pair; rows come back in grid order.

    ``on_row`` is called with each row as soon as it and all earlier rows are
    done, so a consumer can flush partial results.
    """
    jobs = [(grid, cell, seed) for cell in grid.cells for seed in grid.seeds]
    rows = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for row in pool.map(_run_job, jobs):
                rows.append(row)
                if on_row:
                    on_row(row)
    else:
        for job in jobs:
            row = _run_job(job)
            rows.append(row)
            if on_row:
                on_row(row)
    return rows


class CsvSink:
    """Append benchmark rows to a CSV file, flushing after each one."""

    def __init__(self, path):
        self._f = open(path, "w", newline="", encoding="utf-8")
        self._w = csv.DictWriter(self._f, fieldnames=CSV_FIELDS)
        self._w.writeheader()
        self._f.flush()

    def __call__(self, row):
        self._w.writerow({k: row[k] for k in CSV_FIELDS})
        self._f.flush()

    def close(self):
        self._f.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
