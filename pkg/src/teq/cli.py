"""Command-line front end: ``teq solve|validate|bench|sweep``.

Exit codes: 0 on success, 2 when a tolerance check fails, 3 for an invalid
configuration.
"""

import argparse
import csv
import io
import json
import math
import sys
import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .dnc import SolverConfig, SolveStats, lyapnd_diag, lyapnd_dnc
from .generators import (KINDS, laplace_eigenvectors, make_coefficient, power_for_condition,
                         random_spd_hss, shift_for_condition, sweep_rhs)
from .hmatrix import hmatrix_from_banded, hmatrix_from_dense
from .io import read_tensor, write_tensor
from .tensor import kron_sum_matrix, relative_residual, vec

EXIT_OK = 0
EXIT_TOLERANCE = 2
EXIT_CONFIG = 3


class ConfigError(ValueError):
    pass


@dataclass
class RunReport:
    """One solver run: problem, configuration, timings and accuracy."""

    command: str
    generator: str
    dims: tuple
    n_min: int
    eps: float
    backend: str
    seed: int
    time_total: float
    time_dense: float
    time_lowrank: float
    time_rhs: float
    time_spectra: float
    residual: float
    kappa: float = float("nan")
    depth: int = 0
    bound: float = float("nan")
    max_update_rank: int = 0
    max_solution_rank: int = 0
    shift_counts: str = ""
    gen_scale: str = ""
    extra: dict = field(default_factory=dict)

    def row(self):
        d = asdict(self)
        extra = d.pop("extra")
        d["dims"] = "x".join(str(n) for n in self.dims)
        d.update(extra)
        return d


def _emit(rows, fmt, out):
    if not rows:
        return
    if fmt == "json":
        text = json.dumps(rows, indent=2, default=float) + "\n"
    else:
        keys = list(rows[0].keys())
        for r in rows[1:]:
            keys += [k for k in r if k not in keys]
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r)
        text = buf.getvalue()
    if out:
        with open(out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- problem setup

def _dims(args):
    dims = [args.n]
    if args.dim >= 2:
        dims.append(args.n2 or args.n)
    if args.dim >= 3:
        dims.append(args.n3 or args.n)
    for t in range(3, args.dim):
        dims.append(args.n)
    return dims


def _coefficients(args, dims):
    cache = {}
    coeffs = []
    for t, n in enumerate(dims):
        key = n
        if key not in cache:
            cache[key] = make_coefficient(args.gen, n, n_min=args.nmin, order=args.order,
                                          p=args.power, band=args.band, seed=args.seed + t,
                                          shift=args.shift, scale=_scale(args, n))
        coeffs.append(cache[key])
    return coeffs


def _scale(args, n):
    if args.scale == "grid":
        return float(n + 1) ** args.order
    return 1.0


def _rhs(args, dims):
    if args.rhs:
        B = read_tensor(args.rhs)
        if tuple(B.shape) != tuple(dims):
            raise ConfigError(f"right-hand side has shape {B.shape}, expected {tuple(dims)}")
        return B
    return np.random.default_rng(args.seed).standard_normal(dims)


def _config(args, eps=None):
    try:
        return SolverConfig(eps=args.eps if eps is None else eps, n_min=args.nmin,
                            backend=args.backend, parallel=not args.deterministic)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _kappa_depth(coeffs):
    lo = sum(A.interval()[0] for A in coeffs)
    hi = sum(A.interval()[1] for A in coeffs)
    return hi / lo, max(A.depth for A in coeffs)


def _run(command, args, coeffs, B, cfg, seed, generator=None, extra=None):
    stats = SolveStats()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        X = lyapnd_dnc(coeffs, B, cfg, stats)
    res = relative_residual(coeffs, X, B)
    kappa, depth = _kappa_depth(coeffs)
    report = RunReport(
        command=command, generator=generator or args.gen, dims=tuple(B.shape),
        n_min=cfg.n_min, eps=cfg.eps, backend=cfg.backend, seed=seed,
        time_total=stats.total, time_dense=stats.phases["dense"],
        time_lowrank=stats.phases["lowrank"], time_rhs=stats.phases["rhs"],
        time_spectra=stats.phases["spectra"], residual=res, kappa=kappa, depth=depth,
        bound=(depth + 1) ** 2 * kappa * cfg.eps,
        max_update_rank=stats.max_update_rank, max_solution_rank=stats.max_solution_rank,
        shift_counts=" ".join(str(s) for s in sorted(set(stats.shift_counts))),
        gen_scale=getattr(args, "scale", "") if (generator or args.gen) == "fractional_gl" else "",
        extra=dict(extra or {}))
    return X, report


# ---------------------------------------------------------------- commands

def cmd_solve(args):
    dims = _dims(args)
    coeffs = _coefficients(args, dims)
    B = _rhs(args, dims)
    cfg = _config(args)
    X, report = _run("solve", args, coeffs, B, cfg, args.seed)
    if args.save_solution:
        write_tensor(args.save_solution, X)
    if args.out or args.format == "json":
        _emit([report.row()], args.format, args.out)
    print(f"residual {report.residual:.3e}  time {report.time_total:.3f}s  "
          f"(dense {report.time_dense:.3f}, low-rank {report.time_lowrank:.3f}, "
          f"rhs {report.time_rhs:.3f}, spectra {report.time_spectra:.3f})",
          file=sys.stderr if not args.out and args.format == "json" else sys.stdout)
    return EXIT_OK


def cmd_validate(args):
    dims = _dims(args)
    coeffs = _coefficients(args, dims)
    B = _rhs(args, dims)
    cfg = _config(args)
    X, report = _run("validate", args, coeffs, B, cfg, args.seed)
    dense = [A.dense() for A in coeffs]
    Xd = lyapnd_diag(dense, B)
    err = float(np.linalg.norm(X - Xd) / np.linalg.norm(Xd))
    brute = float("nan")
    if int(np.prod(dims)) <= args.brute_limit:
        xb = np.linalg.solve(kron_sum_matrix(dense), vec(B))
        brute = float(np.linalg.norm(vec(X) - xb) / np.linalg.norm(xb))
    tol = args.tol if args.tol is not None else 100.0 * cfg.eps * report.kappa
    ok = err <= tol and (math.isnan(brute) or brute <= tol) and report.residual <= report.bound
    report.extra.update({"error_diag": err, "error_bruteforce": brute, "tolerance": tol,
                         "passed": ok})
    _emit([report.row()], args.format, args.out)
    return EXIT_OK if ok else EXIT_TOLERANCE


def _sizes(args):
    if args.sizes:
        return [int(s) for s in args.sizes.split(",")]
    return [512, 1024, 2048] if args.dim == 2 else [32, 64, 128]


def cmd_bench(args):
    rows = []
    for n in sorted(_sizes(args)):
        dims = [n] * args.dim
        a = argparse.Namespace(**vars(args))
        a.n, a.n2, a.n3 = n, None, None
        coeffs = _coefficients(a, dims)
        B = np.random.default_rng(args.seed).standard_normal(dims)
        cfg = _config(args)
        best = None
        for _ in range(args.repeat):
            _, report = _run("bench", a, coeffs, B, cfg, args.seed)
            if best is None or report.time_total < best.time_total:
                best = report
        if args.dense:
            t0 = time.perf_counter()
            lyapnd_diag([A.dense() for A in coeffs], B)
            best.extra["time_diag"] = time.perf_counter() - t0
        row = best.row()
        row = {"n": n, **row}
        rows.append(row)
    _emit(rows, args.format, args.out)
    return EXIT_OK


def _sweep_kappas(args):
    if args.kappas:
        return [float(k) for k in args.kappas.split(",")]
    return list(np.logspace(4, 9, 6))


def cmd_sweep(args):
    n = args.n
    cfg = _config(args)
    rows = []
    breach = False
    for kappa in _sweep_kappas(args):
        if args.matrix == "mmatrix":
            sigma = shift_for_condition(n, kappa)
            ab = np.zeros((2, n))
            ab[0] = 2.0 + sigma
            ab[1, :n - 1] = -1.0
            A = hmatrix_from_banded(ab, n_min=args.nmin)
            C = sweep_rhs(laplace_eigenvectors(n))
            # the instance is deterministic: a single run per point
            runs = [(args.seed, A, C)]
        else:
            p = power_for_condition(n, kappa)
            runs = []
            for r in range(args.runs):
                Araw, Q = random_spd_hss(n, p, args.band, args.seed + r)
                runs.append((args.seed + r, hmatrix_from_dense(Araw, n_min=args.nmin, tol=1e-12),
                             sweep_rhs(Q)))
        for seed, A, C in runs:
            _, report = _run("sweep", args, [A, A], C, cfg, seed,
                             generator=args.matrix, extra={"kappa_target": kappa})
            sqrt_bound = (report.depth + 1) ** 2 * math.sqrt(report.kappa) * cfg.eps
            report.extra["sqrt_bound"] = sqrt_bound
            limit = sqrt_bound if args.matrix == "mmatrix" else report.bound
            breach |= report.residual > limit
            rows.append(report.row())
    _emit(rows, args.format, args.out)
    return EXIT_TOLERANCE if breach else EXIT_OK


# ---------------------------------------------------------------- parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


# leaf sizes when --nmin is omitted: sparse generators recurse further
NMIN_DEFAULTS = {"laplace1d": 64, "shifted_laplace": 64, "fractional_gl": 128, "random_spd_hss": 128}


def _resolve_nmin(args):
    if args.nmin is not None:
        return
    if args.command == "validate":
        args.nmin = max(2, args.n // 4)
    elif args.command == "sweep":
        args.nmin = 32
    else:
        args.nmin = NMIN_DEFAULTS[args.gen]


def _common(p, n_default):
    p.add_argument("--dim", type=int, default=2, help="number of modes d (default 2)")
    p.add_argument("--gen", choices=KINDS, default="laplace1d", help="coefficient generator")
    p.add_argument("--n", type=int, default=n_default, help="size of mode 1")
    p.add_argument("--n2", type=int, help="size of mode 2 (default: --n)")
    p.add_argument("--n3", type=int, help="size of mode 3 (default: --n)")
    p.add_argument("--nmin", type=int, help="minimal block size (default: 64 for Laplacians, "
                   "128 for dense generators, n/4 for validate, 32 for sweep)")
    p.add_argument("--eps", type=float, default=1e-6, help="update-equation tolerance")
    p.add_argument("--backend", choices=("fadi", "rk", "ek"), default="fadi")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--order", type=float, default=1.5, help="fractional order (fractional_gl)")
    p.add_argument("--scale", choices=("unit", "grid"), default="unit",
                   help="fractional_gl scaling: 'grid' multiplies by (n+1)**order")
    p.add_argument("--power", type=float, default=1.0, help="spectrum power (random_spd_hss)")
    p.add_argument("--band", type=int, default=8, help="lower bandwidth of Q (random_spd_hss)")
    p.add_argument("--shift", type=float, default=0.0, help="diagonal shift (shifted_laplace)")
    p.add_argument("--out", help="write the report to this file")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--deterministic", action="store_true",
                   help="single-threaded run (TEQ_THREADS caps the thread count otherwise)")


def build_parser():
    parser = _Parser(prog="teq", description="Divide-and-conquer solvers for Kronecker-sum systems.")
    parser.add_argument("--version", action="version", version=f"teq {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="solve one generated problem")
    _common(p, 256)
    p.add_argument("--rhs", help="right-hand side in the binary tensor format")
    p.add_argument("--save-solution", help="write the solution in the binary tensor format")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("validate", help="compare against dense diagonalization")
    _common(p, 64)
    p.add_argument("--rhs", help="right-hand side in the binary tensor format")
    p.add_argument("--tol", type=float, help="relative error tolerance (default 100*eps*kappa)")
    p.add_argument("--brute-limit", type=int, default=4096,
                   help="largest total size for the explicit Kronecker-sum check")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("bench", help="timings over a range of sizes")
    _common(p, 0)
    p.add_argument("--sizes", help="comma-separated sizes (default 512,1024,2048 in 2D, 32,64,128 in 3D)")
    p.add_argument("--repeat", type=int, default=1, help="keep the fastest of this many runs")
    p.add_argument("--dense", action="store_true", help="also time dense diagonalization")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("sweep", help="residual versus condition number")
    _common(p, 256)
    p.add_argument("--matrix", choices=("general", "mmatrix"), default="general",
                   help="random SPD HSS matrices or shifted Laplacians")
    p.add_argument("--kappas", help="comma-separated condition numbers (default 1e4..1e9)")
    p.add_argument("--runs", type=int, default=100, help="random instances per point (general)")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.dim < 1:
            raise ConfigError("--dim must be positive")
        if args.n < 1 and args.command != "bench":
            raise ConfigError("--n must be positive")
        _resolve_nmin(args)
        return args.func(args)
    except ConfigError as exc:
        print(f"teq: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, OSError) as exc:
        print(f"teq: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
