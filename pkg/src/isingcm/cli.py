"""Command-line interface: ``isingcm <subcommand> [options]``.

Exit codes: 0 success, 1 usage error, 2 an experiment criterion failed,
3 runtime error (including unwritable output).
"""

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from . import experiments, graphgen, limits, mcmc
from .experiments import SCHEMA_VERSION, ExperimentConfig
from .ising1d import IsingParams
from .observables import (
    OBSERVABLE_COLUMNS,
    ConfigurationSampler,
    observable_row,
    quenched_observables,
)
from .rng import stream

EXIT_OK, EXIT_USAGE, EXIT_FAIL, EXIT_RUNTIME = 0, 1, 2, 3
THREADS_ENV = "ISINGCM_THREADS"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# --- argument types ------------------------------------------------------------------


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text):
    try:
        return [int(float(x)) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _pmf(text):
    """``"1:0.25,3:0.75"`` -> ``{1: 0.25, 3: 0.75}``."""
    try:
        out = {}
        for item in text.split(","):
            k, v = item.split(":")
            out[int(k)] = float(v)
        return out
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected k:p pairs, got {text!r}") from None


def _default_threads():
    env = os.environ.get(THREADS_ENV)
    if env is None:
        return 1
    try:
        return max(1, int(env))
    except ValueError:
        return 1


def build_parser():
    p = _Parser(prog="isingcm", description="Ising models on configuration-model random graphs.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default="-", help="output path ('-' for stdout)")
    common.add_argument("--format", choices=("json", "csv"), default=None,
                        help="json (default) or csv (default for variance-table)")
    common.add_argument("--threads", type=int, default=_default_threads(),
                        help=f"worker threads (default from ${THREADS_ENV}, else 1)")

    model = _Parser(add_help=False)
    model.add_argument("--model", choices=experiments.MODELS, default="cm2")
    model.add_argument("--N", type=int, default=1000)
    model.add_argument("--p", type=float, default=None, help="degree-2 fraction for cm12")
    model.add_argument("--pmf", type=_pmf, default=None, help="custom degree pmf, e.g. 1:0.5,3:0.5")

    ising = _Parser(add_help=False)
    ising.add_argument("--beta", type=float, default=0.5)
    ising.add_argument("--B", type=float, default=0.2)

    g = sub.add_parser("generate", parents=[common, model], help="generate a graph file")
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("exact", parents=[common, model, ising], help="exact quenched observables")
    e.add_argument("--graph", default=None, help="read the graph from a file instead of generating")
    e.add_argument("--R", type=int, default=1, help="number of graph replicas")
    e.set_defaults(func=cmd_exact)

    s = sub.add_parser("sample", parents=[common, model, ising], help="draw spin sums on one graph")
    s.add_argument("--graph", default=None)
    s.add_argument("--M", type=int, default=1000)
    s.set_defaults(func=cmd_sample)

    c = sub.add_parser("clt", parents=[common, model, ising], help="CLT experiments")
    c.add_argument("--mode", choices=("rq", "aq", "xn"), required=True)
    c.add_argument("--R", type=int, default=200)
    c.add_argument("--M", type=int, default=50)
    c.add_argument("--T", type=int, default=None)
    c.add_argument("--level", type=float, default=0.01)
    c.add_argument("--var-tol", type=float, default=0.05)
    c.set_defaults(func=cmd_clt)

    lln = sub.add_parser("lln", parents=[common, model, ising], help="law-of-large-numbers decay")
    lln.add_argument("--epsilon", type=float, default=0.1)
    lln.add_argument("--grid", type=_int_list, default=[100, 1000, 10000])
    lln.add_argument("--R", type=int, default=20)
    lln.add_argument("--M", type=int, default=2000)
    lln.add_argument("--T", type=int, default=None)
    lln.set_defaults(func=cmd_lln)

    v = sub.add_parser("variance-table", parents=[common], help="limit variances for CM(1,2)")
    v.add_argument("--p", type=_float_list, required=True)
    v.add_argument("--beta", type=_float_list, required=True)
    v.add_argument("--B", type=_float_list, required=True)
    v.add_argument("--T", type=int, default=None)
    v.set_defaults(func=cmd_variance_table)

    m = sub.add_parser("mcmc-check", parents=[common, model, ising], help="Glauber vs exact moments")
    m.add_argument("--sweeps", type=int, default=100000)
    m.add_argument("--burn-in", type=int, default=None, help="default 10*N")
    m.add_argument("--trace", default=None, help="write the (sweep, S_N) trace as CSV")
    m.set_defaults(func=cmd_mcmc_check)
    return p


# --- validation ------------------------------------------------------------------------


def _check(cond, msg):
    if not cond:
        raise UsageError(msg)


def _validate(args):
    if hasattr(args, "N"):
        _check(args.N >= 2, "--N must be >= 2")
    if getattr(args, "model", None) == "cm12":
        _check(args.p is not None and 0.0 <= args.p <= 1.0, "--p in [0, 1] is required for cm12")
    if getattr(args, "model", None) == "custom":
        _check(args.pmf is not None, "--pmf is required for the custom model")
        try:
            graphgen.DegreeModel(args.pmf)
        except ValueError as exc:
            raise UsageError(f"invalid --pmf: {exc}") from None
    if hasattr(args, "beta") and not isinstance(args.beta, list):
        _check(math.isfinite(args.beta) and args.beta >= 0, "--beta must be finite and >= 0")
        _check(math.isfinite(args.B), "--B must be finite")
    for name in ("R", "M", "sweeps"):
        if hasattr(args, name):
            _check(getattr(args, name) >= 1, f"--{name} must be >= 1")
    if getattr(args, "T", None) is not None:
        _check(args.T >= 2, "--T must be >= 2")
    if hasattr(args, "level"):
        _check(0 < args.level < 1, "--level must lie in (0, 1)")
    if hasattr(args, "epsilon"):
        _check(args.epsilon > 0, "--epsilon must be > 0")
        _check(all(n >= 100 for n in args.grid), "--grid sizes must be >= 100")
        _check(all(b > a for a, b in zip(args.grid, args.grid[1:])), "--grid must be increasing")
    if args.command == "clt":
        _check(args.N >= 100, "--N must be >= 100 for experiments")
    _check(args.threads >= 1, "--threads must be >= 1")
    if args.command == "variance-table":
        _check(all(0 <= p <= 1 for p in args.p), "--p values must lie in [0, 1]")
        _check(all(b >= 0 for b in args.beta), "--beta values must be >= 0")


def _config_echo(args):
    d = {k: v for k, v in vars(args).items() if k != "func"}
    if d.get("pmf") is not None:
        d["pmf"] = {str(k): v for k, v in d["pmf"].items()}
    return d


# --- output ------------------------------------------------------------------------------


def _emit(args, payload=None, rows=None, columns=None):
    """Write JSON (``payload``) or CSV (``rows``) with the config echoed in the header."""
    if args.format == "json":
        doc = {"schema_version": SCHEMA_VERSION, "command": args.command, "config": _config_echo(args)}
        doc.update(payload or {})
        text = json.dumps(doc, indent=2) + "\n"
    else:
        buf = io.StringIO()
        buf.write(f"# schema_version={SCHEMA_VERSION}\n")
        buf.write(f"# config={json.dumps(_config_echo(args), sort_keys=True)}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([r[c] for c in columns] if isinstance(r, dict) else r)
        text = buf.getvalue()
    _write(args.out, text)


def _write(path, text):
    if path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", newline="") as f:
            f.write(text)
    except OSError as exc:
        raise OSError(f"cannot write output {path!r}: {exc.strerror}") from None


# --- subcommands ------------------------------------------------------------------------------


def _model_config(args, **kw):
    return ExperimentConfig(
        model=args.model, N=args.N, params=IsingParams(getattr(args, "beta", 0.0), getattr(args, "B", 0.0)),
        seed=args.seed, p=args.p, pmf=args.pmf, threads=args.threads, **kw,
    )


def _graph(args, i=0):
    if getattr(args, "graph", None):
        return graphgen.read_graph(args.graph)
    cfg = ExperimentConfig(model=args.model, N=100, params=IsingParams(0.0, 0.0), seed=args.seed, p=args.p, pmf=args.pmf)
    g = experiments.make_graph(cfg, i, N=args.N)
    return graphgen.MultiGraph(g.N, g.edges, g.degrees, args.seed)


def cmd_generate(args):
    g = _graph(args)
    buf = io.StringIO()
    graphgen.write_graph(g, buf)
    _write(args.out, buf.getvalue())
    return EXIT_OK


def cmd_exact(args):
    params = IsingParams(args.beta, args.B)
    n = 1 if args.graph else args.R
    rows = []
    for i in range(n):
        g = _graph(args, i)
        try:
            d = graphgen.decompose(g)
        except ValueError as exc:
            raise UsageError(f"exact solution needs degrees in {{1, 2}}: {exc}") from None
        rows.append((observable_row(i, params, quenched_observables(params, d)), d))
    if args.format == "csv":
        _emit(args, rows=[r for r, _ in rows], columns=OBSERVABLE_COLUMNS)
    else:
        out = []
        for r, d in rows:
            out.append({
                "replica": r["replica"], "N": r["N"], "logZ": float(r["logZ"]), "meanS": float(r["meanS"]),
                "varS": float(r["varS"]), "chiN": float(r["chiN"]), "n_lines": d.n_lines, "n_tori": d.n_tori,
            })
        _emit(args, {"result": out[0] if n == 1 else out})
    return EXIT_OK


def cmd_sample(args):
    params = IsingParams(args.beta, args.B)
    g = _graph(args)
    rng = stream(args.seed, experiments.SPINS, 0)
    if np.all(g.degrees.degrees <= 2):
        S = ConfigurationSampler(params, graphgen.decompose(g)).sample_sums(args.M, rng)
        sampler = "exact"
    else:
        S = mcmc.sample_sums(g, params, args.M, thin=10, burn_in=10 * g.N, rng=rng)
        sampler = "mcmc"
    if args.format == "csv":
        _emit(args, rows=[[i, int(s)] for i, s in enumerate(S)], columns=["sample", "S_N"])
    else:
        _emit(args, {"sampler": sampler, "result": {"S_N": [int(s) for s in S]}})
    return EXIT_OK


def _emit_report(args, rep):
    if args.format == "csv":
        _emit(args, rows=[list(r) for r in rep.csv_rows()], columns=["key", "value"])
    else:
        _emit(args, {"result": rep.to_dict()})
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_clt(args):
    cfg = _model_config(args, R=args.R, M=args.M, T=args.T, level=args.level, var_tol=args.var_tol)
    if args.mode == "rq":
        rep = experiments.rq_clt_experiment(cfg)
    elif args.mode == "aq":
        _check(args.model in ("cm2", "cm12"), "--mode aq needs --model cm2 or cm12")
        rep = experiments.aq_clt_experiment(cfg)
    else:
        _check(args.model == "cm12", "--mode xn needs --model cm12")
        rep = experiments.graph_fluctuation_experiment(cfg)
    return _emit_report(args, rep)


def cmd_lln(args):
    _check(args.model in ("cm2", "cm12"), "lln needs --model cm2 or cm12")
    args.N = args.grid[0]
    cfg = _model_config(args, R=args.R, M=args.M, T=args.T)
    return _emit_report(args, experiments.lln_experiment(cfg, args.epsilon, args.grid))


VARIANCE_COLUMNS = ("beta", "B", "p", "chi", "sigma_G2", "sigma_aq2", "T", "tail_bound")


def cmd_variance_table(args):
    rows = []
    for beta in args.beta:
        for B in args.B:
            for p in args.p:
                lim = limits.cm12_limits(IsingParams(beta, B), p, args.T)
                rows.append({
                    "beta": beta, "B": B, "p": p, "chi": repr(lim.chi), "sigma_G2": repr(lim.sigma_G2),
                    "sigma_aq2": repr(lim.sigma_aq2), "T": lim.T, "tail_bound": repr(lim.tail_bound),
                })
    if args.format == "csv":
        _emit(args, rows=rows, columns=VARIANCE_COLUMNS)
    else:
        _emit(args, {"result": [{k: (float(v) if isinstance(v, str) else v) for k, v in r.items()} for r in rows]})
    return EXIT_OK


def cmd_mcmc_check(args):
    params = IsingParams(args.beta, args.B)
    g = _graph(args)
    burn = 10 * g.N if args.burn_in is None else args.burn_in
    _check(args.sweeps > burn, "--sweeps must exceed --burn-in")
    est = mcmc.estimate_moments(g, params, args.sweeps, burn, stream(args.seed, experiments.SPINS, 0),
                                trace_out=args.trace)
    result = {
        "mean_S": est.mean_S, "mean_S_se": est.mean_S_se, "var_S": est.var_S, "var_S_se": est.var_S_se,
        "sweeps": est.sweeps, "burn_in": est.burn_in, "n_batches": est.n_batches,
    }
    passed = True
    if np.all(g.degrees.degrees <= 2):
        d = graphgen.decompose(g)
        obs = quenched_observables(params, d)
        z_mean = (est.mean_S - obs.mean_S) / est.mean_S_se
        z_var = (est.var_S - obs.var_S) / est.var_S_se
        passed = abs(z_mean) <= 4 and abs(z_var) <= 4
        result.update(exact_mean_S=obs.mean_S, exact_var_S=obs.var_S, z_mean=z_mean, z_var=z_var, passed=passed)
    if args.format == "csv":
        _emit(args, rows=[[k, v] for k, v in result.items()], columns=["key", "value"])
    else:
        _emit(args, {"result": result})
    return EXIT_OK if passed else EXIT_FAIL


# --- entry points -------------------------------------------------------------------------------


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.format is None:
            args.format = "csv" if args.command == "variance-table" else "json"
        _validate(args)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main():
    sys.exit(run())
