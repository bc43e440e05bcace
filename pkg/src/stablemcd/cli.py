"""Command-line front end: ``stablemcd {detect,path,simulate,bench}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Progress and diagnostics go to standard error; standard output carries a
one-line JSON summary of each run.
"""

import argparse
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import simgen
from .csvio import DataFormatError, read_json, read_matrix, write_json, write_matrix, write_table
from .exceptions import DegenerateCorrectionError, PairFailure, RankDeficientScatterError, StableMCDError
from .mcd import subset_estimate
from .metrics import detection_report, estimation_report
from .reweight import fdb
from .spectral import spectral_mcd
from .stability import DEFAULT_H_GRID, grid_search, h_from_fraction

log = logging.getLogger("stablemcd")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

LABEL_COLUMNS = ("row_index", "label", "depth")
PATH_COLUMNS = ("h_frac", "h", "q", "s_hat", "std_err", "B")
ESTIMATE_KEYS = ("mu", "sigma", "V_q", "h", "q", "iterations", "converged")
ARGMIN_KEYS = ("h_frac", "h", "q", "s_hat", "std_err", "B", "n", "seed")
METRIC_NAMES = ("FN", "F1", "e_mu", "e_sigma", "kl", "time")


class UsageError(Exception):
    """Flags are invalid or inconsistent."""


@dataclass
class RunConfig:
    input_path: str = None
    has_header: bool = False
    standardize: bool = False
    h_fractions: list = field(default_factory=lambda: list(DEFAULT_H_GRID))
    q_values: list = field(default_factory=lambda: [2])
    k: object = "auto"
    B: int = 50
    seed: int = 0
    output_path: str = "."
    format: str = "csv"

    def __post_init__(self):
        for f in self.h_fractions:
            if not 0.0 < f < 1.0:
                raise UsageError(f"h fractions must lie in (0, 1), got {f}")
        for q in self.q_values:
            if q != "p" and q < 1:
                raise UsageError(f"q values must be at least 1, got {q}")
        if self.B < 1:
            raise UsageError(f"the number of pairs must be at least 1, got {self.B}")
        if self.k != "auto" and self.k < 1:
            raise UsageError(f"k must be a positive count or 'auto', got {self.k}")
        if self.format not in ("csv", "json"):
            raise UsageError(f"format must be csv or json, got {self.format}")

    @property
    def k_value(self):
        return None if self.k == "auto" else int(self.k)

    def resolve_q(self, p):
        return sorted({p if q == "p" else int(q) for q in self.q_values})


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text):
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _q_list(text):
    out = []
    for t in text.split(","):
        t = t.strip()
        if not t:
            continue
        if t == "p":
            out.append("p")
            continue
        try:
            out.append(int(t))
        except ValueError:
            raise argparse.ArgumentTypeError(f"q values must be integers or 'p', got {t!r}") from None
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _k_arg(text):
    if text == "auto":
        return "auto"
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"k must be an integer or 'auto', got {text!r}") from None


def _h_arg(text):
    """Integer count, or fraction of n in (0, 1]."""
    try:
        if text.strip().lstrip("+").isdigit():
            return int(text)
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"h must be a count or a fraction, got {text!r}") from None


def _add_common(p):
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--k", type=_k_arg, default="auto", help="random directions per depth evaluation, or 'auto'")
    p.add_argument("--out", default=".", help="output directory (created if missing)")
    p.add_argument("--format", choices=("csv", "json"), default="csv", help="format of tabular outputs")
    p.add_argument("--quiet", action="store_true", help="only log warnings and errors")


def _add_input(p):
    p.add_argument("--input", required=True, help="numeric CSV, one observation per row")
    p.add_argument("--header", action="store_true", help="first row holds column names")
    p.add_argument("--standardize", action="store_true",
                   help="center columns by the median and scale by the normalized MAD")


def _add_grid(p):
    p.add_argument("--h-grid", type=_float_list, default=list(DEFAULT_H_GRID),
                   help="comma-separated fractions of n (default 0.50,0.55,...,0.95)")
    p.add_argument("--q-grid", type=_q_list, default=[2], help="comma-separated component counts; 'p' means all")
    p.add_argument("--pairs", type=int, default=50, help="bootstrap pairs B (default 50)")
    p.add_argument("--workers", type=int, default=1, help="worker processes; results do not depend on it")


def _add_protocol(p, required=True):
    p.add_argument("--protocol", choices=("highdim", "overdetermined", "masking"), required=required)
    p.add_argument("--n", type=int, help="observations (default depends on protocol)")
    p.add_argument("--p", type=int, help="dimension (default depends on protocol)")
    p.add_argument("--eps", type=float, default=0.25, help="contamination fraction (default 0.25)")
    p.add_argument("--l", type=int, default=5, help="highdim: number of outlier eigen-directions")
    p.add_argument("--kind", choices=simgen.OUTLIER_KINDS, default="cluster", help="overdetermined: outlier type")
    p.add_argument("--r", type=float, default=5.0, help="overdetermined: separation (default 5)")
    p.add_argument("--setting", type=int, choices=(1, 2, 3, 4), default=1, help="masking: setting number")


def build_parser():
    parser = _Parser(prog="stablemcd", description="Spectral MCD outlier detection with instability-based tuning.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="{detect,path,simulate,bench}")

    p = sub.add_parser("detect", help="best h-subset for one (h, q) and per-row labels")
    _add_input(p)
    p.add_argument("--h", type=_h_arg, help="subset size: count, or fraction of n in (0, 1]")
    p.add_argument("--q", type=int, help="number of principal components")
    p.add_argument("--argmin", help="take h and q from an argmin.json written by 'path'")
    _add_common(p)

    p = sub.add_parser("path", help="instability over an (h, q) grid")
    _add_input(p)
    _add_grid(p)
    p.add_argument("--on-error", choices=("abort", "skip"), default="abort",
                   help="abort on a failed pair, or drop it from the affected cells")
    _add_common(p)

    p = sub.add_parser("simulate", help="write a simulated data set")
    _add_protocol(p)
    _add_common(p)

    p = sub.add_parser("bench", help="FDB versus SpectralMCD over seeded replicates")
    _add_protocol(p)
    _add_grid(p)
    p.add_argument("--replicates", type=int, default=50, help="replicates R (default 50)")
    p.add_argument("--h", type=float, default=0.5, help="FDB subset fraction (default 0.5)")
    _add_common(p)
    return parser


def _config(args):
    return RunConfig(
        input_path=getattr(args, "input", None),
        has_header=getattr(args, "header", False),
        standardize=getattr(args, "standardize", False),
        h_fractions=getattr(args, "h_grid", list(DEFAULT_H_GRID)),
        q_values=getattr(args, "q_grid", [2]),
        k=args.k,
        B=getattr(args, "pairs", 50),
        seed=args.seed,
        output_path=args.out,
        format=args.format,
    )


def standardize_columns(X):
    """Center by column medians and scale by ``1.4826 * MAD``."""
    med = np.median(X, axis=0)
    mad = 1.482602218505602 * np.median(np.abs(X - med), axis=0)
    zero = np.flatnonzero(mad == 0)
    if zero.size:
        raise DataFormatError(f"cannot standardize: column {zero[0] + 1} has zero MAD")
    return (X - med) / mad


def _load(cfg):
    X, _ = read_matrix(cfg.input_path, cfg.has_header)
    if cfg.standardize:
        X = standardize_columns(X)
    log.info("read %d x %d matrix from %s", X.shape[0], X.shape[1], cfg.input_path)
    return X


def _out(cfg, name):
    os.makedirs(cfg.output_path, exist_ok=True)
    return os.path.join(cfg.output_path, name)


def _table_name(cfg, stem):
    return f"{stem}.{cfg.format}"


def _resolve_h(h, n):
    if isinstance(h, int):
        return h
    if not 0.0 < h <= 1.0:
        raise UsageError(f"fractional h must lie in (0, 1], got {h}")
    return n if h == 1.0 else h_from_fraction(h, n)


def cmd_detect(args):
    cfg = _config(args)
    if args.argmin:
        if args.h is not None or args.q is not None:
            raise UsageError("give either --argmin or --h/--q, not both")
        am = read_json(args.argmin)
        try:
            h_raw, q = int(am["h"]), int(am["q"])
        except (KeyError, TypeError, ValueError):
            raise DataFormatError(f"{args.argmin}: expected integer keys 'h' and 'q'") from None
    else:
        if args.h is None or args.q is None:
            raise UsageError("detect needs --h and --q, or --argmin")
        h_raw, q = args.h, args.q
    if q < 1:
        raise UsageError(f"q must be at least 1, got {q}")
    X = _load(cfg)
    n = X.shape[0]
    if args.argmin and am.get("n") not in (None, n):
        raise DataFormatError(f"{args.argmin} was computed for n={am['n']}, input has n={n}")
    h = _resolve_h(h_raw, n)
    res = spectral_mcd(X, h, q, k=cfg.k_value, seed=cfg.seed)
    labels_path = _out(cfg, _table_name(cfg, "labels"))
    write_table(
        labels_path, LABEL_COLUMNS,
        zip(range(n), res.labels.tolist(), res.depths.tolist()), cfg.format,
    )
    est_path = _out(cfg, "estimates.json")
    est = res.estimate
    write_json(est_path, dict(zip(ESTIMATE_KEYS, (
        est.mu, est.sigma, res.model.v_q, h, q, res.iterations, res.converged,
    ))))
    log.info("h=%d q=%d: %d outliers, %d C-steps", h, q, int(res.labels.sum()), res.iterations)
    return {"command": "detect", "h": h, "q": q, "outliers": int(res.labels.sum()),
            "files": [labels_path, est_path]}


def cmd_path(args):
    cfg = _config(args)
    if args.workers < 1:
        raise UsageError("workers must be at least 1")
    X = _load(cfg)
    n, p = X.shape
    path = grid_search(
        X, h_grid=cfg.h_fractions, q_grid=cfg.resolve_q(p), k=cfg.k_value, B=cfg.B,
        master_seed=cfg.seed, on_error=args.on_error, workers=args.workers,
    )
    rows = [(c.h_frac, c.h, c.q, c.s_hat, c.std_err, c.n_pairs) for c in path.cells]
    table_path = _out(cfg, _table_name(cfg, "instability"))
    write_table(table_path, PATH_COLUMNS, rows, cfg.format)
    best = path.argmin_cell
    if best is None:
        raise StableMCDError("every cell of the grid failed; no argmin")
    argmin_path = _out(cfg, "argmin.json")
    write_json(argmin_path, dict(zip(ARGMIN_KEYS, (
        best.h_frac, best.h, best.q, best.s_hat, best.std_err, best.n_pairs, n, cfg.seed,
    ))))
    log.info("argmin h=%d (%.2f n), q=%d, s_hat=%.4f", best.h, best.h_frac, best.q, best.s_hat)
    return {"command": "path", "h": best.h, "q": best.q, "s_hat": best.s_hat,
            "files": [table_path, argmin_path]}


def simulate_dataset(args, seed):
    """Build the data set described by the protocol flags."""
    proto = args.protocol
    try:
        if proto == "highdim":
            return simgen.gen_highdim(args.n or 120, args.p or 200, args.eps, args.l, seed=seed)
        if proto == "overdetermined":
            return simgen.gen_overdetermined(args.n or 400, args.p or 40, args.eps, args.kind, r=args.r, seed=seed)
        if args.p is not None:
            raise UsageError("masking settings fix the dimension; --p is not accepted")
        return simgen.gen_masking_setting(args.setting, seed=seed, n=args.n)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _check_sizes(args):
    for name in ("n", "p"):
        v = getattr(args, name)
        if v is not None and v < 2:
            raise UsageError(f"--{name} must be at least 2, got {v}")


def cmd_simulate(args):
    _check_sizes(args)
    cfg = _config(args)
    data = simulate_dataset(args, cfg.seed)
    x_path = _out(cfg, "X.csv")
    truth_path = _out(cfg, "truth.csv")
    write_matrix(x_path, data.X)
    write_table(truth_path, ("label",), ((int(t),) for t in data.truth))
    log.info("wrote %d x %d data set with %d planted outliers", *data.X.shape, data.n_outliers)
    return {"command": "simulate", "n": data.X.shape[0], "p": data.X.shape[1],
            "outliers": data.n_outliers, "files": [x_path, truth_path]}


def _seed_int(ss):
    return int(ss.generate_state(1)[0])


def _estimation(data, mu, sigma):
    """Estimation errors, back-transformed to y-space for the mixing protocol."""
    mu_true, sigma_true = data.mu_true, data.sigma_true
    if data.protocol.get("protocol") == "overdetermined":
        g_inv = np.linalg.inv(simgen.overdetermined_mixing(mu.size))
        mu, sigma = g_inv @ mu, g_inv @ sigma @ g_inv.T
        mu_true, sigma_true = np.zeros(mu.size), np.eye(mu.size)
    e_mu = float(np.linalg.norm(mu - mu_true))
    try:
        rep = estimation_report(mu, 0.5 * (sigma + sigma.T), mu_true, sigma_true)
    except ValueError:
        return e_mu, math.nan, math.nan
    return e_mu, rep.e_sigma, rep.kl


def _bench_fdb(data, h_frac, k, ss):
    X = data.X
    h = h_from_fraction(h_frac, X.shape[0])
    t0 = time.perf_counter()
    labels, res = fdb(X, h, k=k, seed=ss)
    elapsed = time.perf_counter() - t0
    if res is not None:
        mu, sigma = res.mu_re, res.sigma_re
    else:
        est = subset_estimate(X, np.flatnonzero(labels == 0))
        mu, sigma = est.mu, est.sigma
    return labels, mu, sigma, elapsed, h, None


def _bench_spectral(data, cfg, workers, ss):
    X = data.X
    grid_ss, dir_ss = (np.random.SeedSequence(ss.entropy, spawn_key=ss.spawn_key + (j,)) for j in (0, 1))
    t0 = time.perf_counter()
    path = grid_search(
        X, h_grid=cfg.h_fractions, q_grid=cfg.resolve_q(X.shape[1]), k=cfg.k_value, B=cfg.B,
        master_seed=_seed_int(grid_ss), on_error="skip", workers=workers,
    )
    if path.argmin is None:
        raise StableMCDError("every cell of the grid failed")
    h, q = path.argmin
    res = spectral_mcd(X, h, q, k=cfg.k_value, seed=dir_ss)
    elapsed = time.perf_counter() - t0
    est = subset_estimate(X, res.subset)
    return res.labels, est.mu, est.sigma, elapsed, h, q


def _mean_se(values):
    v = np.asarray([x for x in values if not math.isnan(x)], dtype=np.float64)
    if v.size == 0:
        return math.nan, math.nan
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else math.nan
    return float(v.mean()), se


def cmd_bench(args):
    _check_sizes(args)
    if args.replicates < 1:
        raise UsageError(f"replicates must be at least 1, got {args.replicates}")
    if args.workers < 1:
        raise UsageError("workers must be at least 1")
    if not 0.0 < args.h < 1.0:
        raise UsageError(f"FDB fraction --h must lie in (0, 1), got {args.h}")
    cfg = _config(args)
    methods = ("FDB", "SpectralMCD")
    records = []
    for r in range(args.replicates):
        root = np.random.SeedSequence(cfg.seed, spawn_key=(r,))
        data_ss, fdb_ss, spec_ss = root.spawn(3)
        data = simulate_dataset(args, data_ss)
        if r == 0 and max(cfg.resolve_q(data.X.shape[1])) > min(data.X.shape):
            raise UsageError(f"q grid exceeds min(n, p) = {min(data.X.shape)}")
        for method in methods:
            try:
                if method == "FDB":
                    out = _bench_fdb(data, args.h, cfg.k_value, fdb_ss)
                else:
                    out = _bench_spectral(data, cfg, args.workers, spec_ss)
            except (StableMCDError, ValueError, np.linalg.LinAlgError) as exc:
                log.warning("replicate %d, %s failed: %s", r, method, exc)
                records.append((method, r) + (math.nan,) * 6 + (None, None, str(exc)))
                continue
            labels, mu, sigma, elapsed, h, q = out
            det = detection_report(labels, data.truth, elapsed)
            e_mu, e_sigma, kl = _estimation(data, mu, sigma)
            records.append((method, r, det.fn, det.f1, e_mu, e_sigma, kl, elapsed, h, q, ""))
        log.info("replicate %d/%d done", r + 1, args.replicates)

    rep_path = _out(cfg, _table_name(cfg, "replicates"))
    write_table(rep_path, ("method", "replicate") + METRIC_NAMES + ("h", "q", "error"), records, cfg.format)
    summary = []
    for method in methods:
        rows = [rec for rec in records if rec[0] == method]
        failed = sum(1 for rec in rows if rec[-1])
        line = [method, len(rows) - failed, failed]
        for j in range(len(METRIC_NAMES)):
            line.extend(_mean_se([rec[2 + j] for rec in rows]))
        summary.append(line)
    columns = ["method", "replicates", "failed"]
    for m in METRIC_NAMES:
        columns += [m, f"{m}_se"]
    metrics_path = _out(cfg, _table_name(cfg, "metrics"))
    write_table(metrics_path, columns, summary, cfg.format)
    for line in summary:
        log.info("%s: FN %.2f, F1 %.3f over %d replicates (%d failed)", line[0], line[3], line[5], line[1], line[2])
    return {"command": "bench", "replicates": args.replicates,
            "failed": sum(s[2] for s in summary), "files": [metrics_path, rep_path]}


COMMANDS = {"detect": cmd_detect, "path": cmd_path, "simulate": cmd_simulate, "bench": cmd_bench}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help, or a usage error already reported
        return exc.code
    logging.basicConfig(
        stream=sys.stderr, level=logging.WARNING if args.quiet else logging.INFO,
        format="%(asctime)s %(levelname)s %(message)s", force=True,
    )
    try:
        summary = COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"stablemcd: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataFormatError, OSError) as exc:
        print(f"stablemcd: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (RankDeficientScatterError, DegenerateCorrectionError, PairFailure, np.linalg.LinAlgError) as exc:
        print(f"stablemcd: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"stablemcd: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except StableMCDError as exc:
        print(f"stablemcd: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(json.dumps(summary, default=str))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
