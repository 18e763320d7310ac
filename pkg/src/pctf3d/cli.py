"""Command-line interface.

Exit codes: 0 success, 2 usage or configuration error, 3 I/O error.
"""

import argparse
import json
import logging
import sys

from . import coupling as cpl
from .marginals import bin_dataset, estimate_marginals, read_csv
from .metrics import evaluate
from .solver import SolverConfig, fit, load_model, model_to_dict, save_model
from .synth import BenchGrid, CsvSink, run_benchmark

log = logging.getLogger("pctf3d")

EXIT_USAGE = 2
EXIT_IO = 3

DEFAULTS = {
    "seed": 0,
    "rank": None,
    "bins": None,
    "max_outer": 1000,
    "max_inner": 20,
    "eps": 1e-6,
    "restarts": 1,
    "binning": "equal_width",
    "header": False,
    "warm_start_duals": False,
    "workers": 1,
}

_INT_KEYS = {"seed", "rank", "bins", "max_outer", "max_inner", "restarts", "M", "T", "workers"}
_FLOAT_KEYS = {"eps"}
_BOOL_KEYS = {"header", "warm_start_duals"}


class UsageError(Exception):
    pass


def read_config(path):
    """Parse a ``key=value`` file; ``#`` starts a comment, dashes in keys map to underscores."""
    out = {}
    try:
        with open(path, encoding="utf-8") as f:
            lines = f.read().splitlines()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{n}: expected key=value")
        key = key.strip().replace("-", "_")
        val = val.strip()
        try:
            if key in _INT_KEYS:
                out[key] = int(val)
            elif key in _FLOAT_KEYS:
                out[key] = float(val)
            elif key in _BOOL_KEYS:
                out[key] = val.lower() in ("1", "true", "yes", "on")
            else:
                out[key] = val
        except ValueError:
            raise UsageError(f"{path}:{n}: bad value for {key}: {val!r}") from None
    return out


def resolve(args):
    """Merge settings: explicit flags win over the config file, which wins over defaults."""
    conf = read_config(args.config) if getattr(args, "config", None) else {}
    merged = dict(DEFAULTS)
    merged.update(conf)
    for k, v in vars(args).items():
        if v is not None or k not in merged:
            merged[k] = v
    return argparse.Namespace(**merged)


def _solver_config(a):
    if a.rank is None:
        raise UsageError("--rank is required")
    try:
        return SolverConfig(R=a.rank, max_outer=a.max_outer, max_inner=a.max_inner,
                            eps=a.eps, seed=a.seed, restarts=a.restarts,
                            warm_start_duals=bool(a.warm_start_duals))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load_dataset(a, M_expected=None):
    if a.bins is None:
        raise UsageError("--bins is required")
    try:
        raw = read_csv(a.data, header=bool(a.header))
    except OSError as exc:
        raise OSError(f"cannot read data {a.data}: {exc}") from exc
    except ValueError as exc:
        raise OSError(f"cannot parse data {a.data}: {exc}") from exc
    if M_expected is not None and raw.shape[1] != M_expected:
        raise UsageError(
            f"coupling has M={M_expected} but {a.data} has {raw.shape[1]} columns")
    try:
        return bin_dataset(raw, a.bins, a.binning)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _read_coupling(path):
    try:
        return cpl.read_coupling(path)
    except OSError as exc:
        raise OSError(f"cannot read coupling {path}: {exc}") from exc


def _write_json(doc, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")


# --- subcommands ----------------------------------------------------------------

def cmd_couple(a):
    if a.M is None:
        raise UsageError("--M is required")
    c = cpl.generate(a.strategy, a.M, a.T, seed=a.seed)
    text = cpl.format_coupling(c)
    if a.out:
        with open(a.out, "w", encoding="utf-8") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    d = cpl.degree_sequence(c)
    print(f"# T={c.T} degrees={' '.join(map(str, d))} step={cpl.step(c)}",
          file=sys.stderr if not a.out else sys.stdout)
    return 0


def cmd_fit(a):
    if not a.data or not a.coupling:
        raise UsageError("--data and --coupling are required")
    c = _read_coupling(a.coupling)
    if not cpl.is_connected(c):
        raise UsageError("coupling is not valid (uncovered variable or disconnected)")
    cfg = _solver_config(a)
    data = _load_dataset(a, M_expected=c.M)
    marg = estimate_marginals(data, c)
    model, report = fit(marg, c, cfg)
    if a.out:
        save_model(model, a.out, c, cfg)
    else:
        print(json.dumps(model_to_dict(model, c, cfg)))
    if a.report:
        _write_json(report.to_dict(), a.report)
    print(f"# objective={report.objective_trace[-1]:.6e} "
          f"iterations={report.iterations_run} converged={report.converged}",
          file=sys.stderr)
    return 0


def _load_model(path):
    try:
        return load_model(path)
    except OSError as exc:
        raise OSError(f"cannot read model {path}: {exc}") from exc
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"malformed model file {path}: {exc}") from None


def cmd_eval(a):
    est = _load_model(a.model)
    truth = _load_model(a.truth) if a.truth else None
    reference = None
    if a.data:
        reference = _load_dataset(a, M_expected=est.M)
        if reference.I != est.I:
            raise UsageError(f"--bins {reference.I} does not match model I={est.I}")
    if truth is None and reference is None:
        raise UsageError("give --truth and/or --data")
    if truth is not None and (truth.M, truth.I, truth.R) != (est.M, est.I, est.R):
        raise UsageError("model and truth differ in M, I or R")
    rep = evaluate(est, truth=truth, reference=reference)
    rows = [("err1d", rep.err1d), ("err3d", rep.err3d), ("fms", rep.fms),
            ("fms_normalized", rep.fms_normalized)]
    for k, v in rows:
        print(f"{k:<16}{v:.10g}")
    if rep.permutation:
        print(f"{'permutation':<16}{' '.join(map(str, rep.permutation))}")
    if a.out:
        _write_json(rep.to_dict(), a.out)
    return 0


def cmd_bench(a):
    if not a.grid or not a.out:
        raise UsageError("--grid and --out are required")
    try:
        with open(a.grid, encoding="utf-8") as f:
            doc = json.load(f)
    except OSError as exc:
        raise OSError(f"cannot read grid {a.grid}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"grid file is not valid JSON: {exc}") from None
    try:
        grid = BenchGrid.from_dict(doc)
    except (TypeError, KeyError) as exc:
        raise UsageError(f"bad grid file: {exc}") from None
    with CsvSink(a.out) as sink:
        rows = run_benchmark(grid, on_row=sink, workers=a.workers)
    print(f"# wrote {len(rows)} rows to {a.out}", file=sys.stderr)
    return 0


def cmd_validate(a):
    ok = True
    if a.coupling:
        c = _read_coupling(a.coupling)
        conn = cpl.is_connected(c)
        print(f"coupling M={c.M} T={c.T} connected={conn} step={cpl.step(c)} "
              f"degrees={' '.join(map(str, cpl.degree_sequence(c)))}")
        ok &= conn
    if a.model:
        m = _load_model(a.model)
        feas = m.is_feasible(1e-9)
        print(f"model M={m.M} I={m.I} R={m.R} simplex_feasible={feas}")
        ok &= feas
    if not (a.coupling or a.model):
        raise UsageError("give --coupling and/or --model")
    return 0 if ok else EXIT_USAGE


# --- parser ---------------------------------------------------------------------

def _solver_flags(p):
    g = p.add_argument_group("solver")
    g.add_argument("--rank", type=int, help="decomposition rank R")
    g.add_argument("--max-outer", dest="max_outer", type=int,
                   help="outer iteration cap (default 1000)")
    g.add_argument("--max-inner", dest="max_inner", type=int,
                   help="ADMM iteration cap per block (default 20)")
    g.add_argument("--eps", type=float,
                   help="relative tolerance for outer and ADMM stopping (default 1e-6)")
    g.add_argument("--restarts", type=int,
                   help="random initializations; the lowest objective wins (default 1)")
    g.add_argument("--warm-start-duals", dest="warm_start_duals", action="store_true",
                   default=None, help="keep ADMM duals across outer iterations")


def _data_flags(p, required=False):
    p.add_argument("--data", required=required, help="CSV file, one observation per row")
    p.add_argument("--bins", type=int, help="number of bins I per variable")
    p.add_argument("--binning", choices=["equal_width", "identity"],
                   help="equal_width on the column range (default) or identity for "
                        "data already in 1..I")
    p.add_argument("--header", action="store_true", default=None,
                   help="skip the first CSV row")


def build_parser():
    p = argparse.ArgumentParser(
        prog="pctf3d",
        description="Estimate a joint PMF as a simplex-constrained CPD from "
                    "partially coupled 3D marginals.")
    p.add_argument("-v", "--verbose", action="store_true")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file; command-line flags override it")
    common.add_argument("--seed", type=int, help="RNG seed (default 0)")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("couple", parents=[common], help="generate a coupling")
    c.add_argument("--M", type=int, help="number of variables")
    c.add_argument("--T", "--triplets", dest="T", type=int,
                   help="number of triplets (random and balanced only)")
    c.add_argument("--strategy", choices=cpl.STRATEGIES, required=True)
    c.add_argument("--out", help="output file (default stdout)")
    c.set_defaults(func=cmd_couple)

    f = sub.add_parser("fit", parents=[common], help="estimate marginals and fit a model")
    _data_flags(f)
    f.add_argument("--coupling", help="coupling file")
    _solver_flags(f)
    f.add_argument("--out", help="model JSON output (default stdout)")
    f.add_argument("--report", help="fit report JSON output")
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("eval", parents=[common], help="score a model against a truth and/or data")
    e.add_argument("--model", required=True)
    e.add_argument("--truth", help="ground-truth model JSON (enables FMS)")
    _data_flags(e)
    e.add_argument("--out", help="metric report JSON output")
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench", parents=[common], help="run a benchmark grid")
    b.add_argument("--grid", help="grid JSON file")
    b.add_argument("--out", help="results CSV")
    b.add_argument("--workers", type=int, help="parallel worker processes (default 1)")
    b.set_defaults(func=cmd_bench)

    v = sub.add_parser("validate", parents=[common], help="check a coupling and/or a model file")
    v.add_argument("--coupling")
    v.add_argument("--model")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    func = args.func
    try:
        a = resolve(args)
        return func(a)
    except (UsageError, cpl.CouplingError, cpl.GenerationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
