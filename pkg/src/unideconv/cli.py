"""Batch command-line front door.

Subcommands: simulate, fit, metrics, project, benchmark.  Global flags
--config/--seed/--threads/--out are accepted by every subcommand; a
config file is flat `key = value` text whose keys mirror the long
option names, with command-line values taking precedence.  Exit codes:
0 success, 2 usage or input error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import metrics as M
from .bench import BenchmarkConfig, aggregate, fit_cb_handle, run_benchmark
from .exceptions import NumericError
from .kernels import ErrorKernel
from .metrics import DensityHandle, default_grid
from .model import Dataset, DensityEstimate, Hyperparams, PosteriorDraws
from .projection import PosteriorEffectMatrix, expected_discoveries
from .sampler import ChainConfig
from .simulate import SCENARIO_IDS, Scenario, gen, truth_handle

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3


def _config_hash(args):
    payload = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    return hashlib.sha256(json.dumps(payload, default=str).encode()).hexdigest()[:16]


def _sidecar(args, extra=None):
    meta = {
        "version": __version__,
        "seed": args.seed,
        "config_hash": _config_hash(args),
        "command": args.command,
    }
    meta.update(extra or {})
    return meta


def _write(path: Path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _write_json(path: Path, obj):
    _write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _parse_grid(spec):
    if spec == "auto":
        return None
    try:
        lo, hi, npts = spec.split(",")
        grid = np.linspace(float(lo), float(hi), int(npts))
    except Exception as exc:
        raise ValueError(f"--grid expects 'lo,hi,npts' or 'auto', got {spec!r}") from exc
    if len(grid) < 2 or grid[0] >= grid[-1]:
        raise ValueError("--grid range must be increasing with at least 2 points")
    return grid


def _auto_grid(w):
    span = max(1.2 * float(np.max(np.abs(w))), 8.0 * float(np.std(w)), 1e-6)
    return np.linspace(-span, span, M.DEFAULT_GRID_POINTS)


def _read_dataset(path):
    path = Path(path)
    if not path.exists():
        raise ValueError(f"data file not found: {path}")
    rows = path.read_text().strip().splitlines()
    header = [h.strip() for h in rows[0].split(",")]
    if header[:2] != ["w", "sigma"]:
        raise ValueError(f"dataset CSV must start with columns w,sigma (got {header})")
    cells = [line.split(",") for line in rows[1:]]
    w = np.array([float(c[0]) for c in cells])
    sigma = np.array([float(c[1]) for c in cells])
    return Dataset(w=w, sigma=sigma)


def _read_matrix(path):
    path = Path(path)
    if not path.exists():
        raise ValueError(f"matrix file not found: {path}")
    if path.suffix == ".npy":
        return np.load(path)
    rows = path.read_text().strip().splitlines()
    return np.array([[float(v) for v in line.split(",")] for line in rows])


def _read_vector(path):
    return _read_matrix(path).reshape(-1)


# ---------------------------------------------------------------- simulate


def cmd_simulate(args):
    scn = Scenario(args.scenario, args.family, args.n)
    data, _, x = gen(scn, args.seed)
    out = Path(args.out)
    lines = ["w,sigma,x_true"]
    lines += [
        f"{float(w)!r},{float(s)!r},{float(xx)!r}"
        for w, s, xx in zip(data.w, data.sigma, x)
    ]
    _write(out / "dataset.csv", "\n".join(lines) + "\n")
    _write_json(
        out / "scenario.json",
        _sidecar(
            args,
            {
                "scenario": scn.id,
                "family": scn.error_family,
                "n": scn.n,
                "exceedance_threshold": scn.exceedance_threshold,
            },
        ),
    )
    print(f"wrote {out / 'dataset.csv'} ({scn.n} rows)")
    return EXIT_OK


# ---------------------------------------------------------------- fit


def cmd_fit(args):
    data = _read_dataset(args.data)
    hp = Hyperparams(lam=args.lam, t=args.t, xi1=args.xi1, xi2=args.xi2, K=args.k, m=args.m)
    cfg = ChainConfig(
        n_iter=args.iters, burn_in=args.burn_in, thin=args.thin, seed=args.seed
    )
    kernel = ErrorKernel(args.family)
    grid = _parse_grid(args.grid)
    if grid is None:
        grid = _auto_grid(data.w)

    start = time.perf_counter()
    handle, draws = fit_cb_handle(data, kernel, hp, cfg, grid, keep_latent=args.keep_latent)
    runtime = time.perf_counter() - start

    out = Path(args.out)
    _write(out / "draws.csv", draws.to_csv())
    grid_vals = handle.pdf(grid)
    _write(out / "density.csv", DensityEstimate(grid=grid, values=grid_vals).to_csv())
    if args.keep_latent:
        out.mkdir(parents=True, exist_ok=True)
        np.save(out / "latent.npy", np.column_stack(draws.latent_x))
    _write_json(
        out / "summary.json",
        _sidecar(
            args,
            {
                "n": len(data),
                "kept_draws": len(draws),
                "alpha_accept_rate": draws.accept_rate,
                "runtime_s": runtime,
                "density_mass": float(np.trapezoid(grid_vals, grid)),
                "hyperparams": vars(hp) | {},
            },
        ),
    )
    print(
        f"fit: n={len(data)} kept={len(draws)} accept={draws.accept_rate:.3f} "
        f"({runtime:.1f}s) -> {out}"
    )
    return EXIT_OK


# ---------------------------------------------------------------- metrics


def _truth_from_spec(spec):
    if spec in SCENARIO_IDS:
        return truth_handle(Scenario(spec))
    path = Path(spec)
    if not path.exists():
        raise ValueError(
            f"--truth must be a scenario id {SCENARIO_IDS} or a density CSV; got {spec!r}"
        )
    est = DensityEstimate.from_csv(path.read_text())
    return DensityHandle.from_grid(est.grid, est.values)


def cmd_metrics(args):
    truth = _truth_from_spec(args.truth)
    rows = []
    for i, est_path in enumerate(args.estimate):
        path = Path(est_path)
        if not path.exists():
            raise ValueError(f"estimate file not found: {path}")
        est = DensityEstimate.from_csv(path.read_text())
        handle = DensityHandle.from_grid(est.grid, est.values)
        scores = M.score(handle, truth, grid=est.grid, threshold=args.threshold)
        method = args.method[i] if i < len(args.method) else path.stem
        rows.append(
            {"scenario": args.scenario_label, "n": args.n, "rep": args.rep, "method": method}
            | scores
        )
    out = Path(args.out)
    _write(out / "metrics.csv", _metrics_csv(rows))
    _write_json(out / "metrics_meta.json", _sidecar(args))
    print(f"wrote {out / 'metrics.csv'} ({len(rows)} row(s))")
    return EXIT_OK


def _metrics_csv(rows):
    lines = ["scenario,n,rep,method," + ",".join(M.METRIC_COLUMNS)]
    for r in rows:
        vals = ",".join(f"{r[c]!r}" for c in M.METRIC_COLUMNS)
        lines.append(f"{r['scenario']},{r['n']},{r['rep']},{r['method']},{vals}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- project


def cmd_project(args):
    beta = _read_matrix(args.beta_matrix)
    sigma = _read_vector(args.sigma)
    pem = PosteriorEffectMatrix(beta=beta, sigma=sigma)
    results = []
    for n_new in args.n_new:
        point, (lo, hi), _ = expected_discoveries(pem, n_new, args.alpha)
        results.append(
            {"n_new": n_new, "alpha": args.alpha, "point": point, "ci_lo": lo, "ci_hi": hi}
        )
    out = Path(args.out)
    _write_json(
        out / "projection.json",
        _sidecar(args, {"n_effects": pem.n_effects, "n_draws": pem.n_draws})
        | {"projections": results},
    )
    for r in results:
        print(
            f"n_new={r['n_new']}: expected discoveries {r['point']:.2f} "
            f"(95% CI {r['ci_lo']:.2f}, {r['ci_hi']:.2f})"
        )
    return EXIT_OK


# ---------------------------------------------------------------- benchmark


def cmd_benchmark(args):
    cfg = BenchmarkConfig(
        scenario=args.scenario,
        family=args.family,
        n=args.n,
        reps=args.reps,
        seed=args.seed,
        n_iter=args.iters,
        burn_in=args.burn_in,
        thin=args.thin,
        methods=tuple(args.methods.split(",")),
        threads=args.threads,
    )
    rows = run_benchmark(cfg)
    summary = aggregate(rows)

    out = Path(args.out)
    _write(out / "benchmark_metrics.csv", _metrics_csv(rows))
    lines = ["method,reps," + ",".join(
        f"{m}_mean,{m}_sd" for m in M.METRIC_COLUMNS
    )]
    for s in summary:
        cells = [s["method"], str(s["reps"])]
        for m in M.METRIC_COLUMNS:
            cells += [repr(s[f"{m}_mean"]), repr(s[f"{m}_sd"])]
        lines.append(",".join(cells))
    _write(out / "benchmark_summary.csv", "\n".join(lines) + "\n")
    _write_json(out / "benchmark_meta.json", _sidecar(args))

    for s in summary:
        cells = "  ".join(
            f"{m}={s[f'{m}_mean']:.3f}({s[f'{m}_sd']:.3f})" for m in M.METRIC_COLUMNS
        )
        print(f"{s['method']:>6}: {cells}")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _add_common(sub):
    sub.add_argument("--config", default=None, help="flat key=value config file")
    sub.add_argument("--seed", type=int, default=0, help="master RNG seed")
    sub.add_argument("--threads", type=int, default=1, help="worker processes")
    sub.add_argument("--out", default="out", help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="unideconv",
        description="Deconvolution of a symmetric unimodal density from noisy data.",
    )
    parser.add_argument("--version", action="version", version=f"unideconv {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("simulate", help="generate a benchmark scenario dataset")
    _add_common(p)
    p.add_argument("--scenario", choices=SCENARIO_IDS, default="T5_HOMO")
    p.add_argument("--family", choices=("normal", "laplace"), default="normal")
    p.add_argument("--n", type=int, default=1000)
    p.set_defaults(func=cmd_simulate)

    p = subs.add_parser("fit", help="fit the constrained Bayes deconvolution model")
    _add_common(p)
    p.add_argument("--data", required=True, help="CSV with columns w,sigma[,...]")
    p.add_argument("--family", choices=("normal", "laplace"), default="normal")
    p.add_argument("--k", type=int, default=8, help="mixture components K")
    p.add_argument("--lam", type=float, default=2.0, help="shape-prior rate")
    p.add_argument("--t", type=float, default=2.5, help="shape truncation floor")
    p.add_argument("--xi1", type=float, default=1.0, help="rate-prior shape")
    p.add_argument("--xi2", type=float, default=4.0, help="rate-prior rate")
    p.add_argument("--m", type=float, default=20.0, help="Dirichlet concentration")
    p.add_argument("--iters", type=int, default=5000)
    p.add_argument("--burn-in", type=int, default=1000)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--grid", default="auto", help="'lo,hi,npts' or 'auto'")
    p.add_argument(
        "--keep-latent",
        action="store_true",
        help="also save latent-effect draws (latent.npy, effects x draws)",
    )
    p.set_defaults(func=cmd_fit)

    p = subs.add_parser("metrics", help="score density CSVs against a truth")
    _add_common(p)
    p.add_argument("--estimate", action="append", required=True, help="density CSV (repeatable)")
    p.add_argument("--truth", required=True, help="scenario id or density CSV")
    p.add_argument("--threshold", type=float, default=None, help="exceedance threshold")
    p.add_argument("--method", action="append", default=[], help="method label per estimate")
    p.add_argument("--scenario-label", default="custom")
    p.add_argument("--n", type=int, default=0)
    p.add_argument("--rep", type=int, default=0)
    p.set_defaults(func=cmd_metrics)

    p = subs.add_parser("project", help="project expected discoveries at new sample sizes")
    _add_common(p)
    p.add_argument("--beta-matrix", required=True, help="CSV or .npy, effects x draws")
    p.add_argument("--sigma", required=True, help="CSV or .npy vector, one SD per effect")
    p.add_argument("--n-new", type=int, action="append", required=True, help="repeatable")
    p.add_argument("--alpha", type=float, default=5e-8)
    p.set_defaults(func=cmd_project)

    p = subs.add_parser("benchmark", help="simulate, fit all methods, aggregate metrics")
    _add_common(p)
    p.add_argument("--scenario", choices=SCENARIO_IDS, default="T5_HOMO")
    p.add_argument("--family", choices=("normal", "laplace"), default="normal")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--iters", type=int, default=5000)
    p.add_argument("--burn-in", type=int, default=1000)
    p.add_argument("--thin", type=int, default=2)
    p.add_argument("--methods", default="cb,decon,naive")
    p.set_defaults(func=cmd_benchmark)

    return parser


def _apply_config(parser, args, argv):
    """Overlay config-file values under explicit command-line options."""
    if not args.config:
        return args
    path = Path(args.config)
    if not path.exists():
        raise ValueError(f"config file not found: {path}")
    entries = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        entries[key.replace("-", "_")] = value

    sub_actions = next(
        a for a in parser._actions if isinstance(a, argparse._SubParsersAction)
    )
    sub = sub_actions.choices[args.command]
    known = {a.dest: a for a in sub._actions if a.dest != "help"}
    unknown = set(entries) - set(known)
    if unknown:
        raise ValueError(f"unknown config key(s): {sorted(unknown)}")

    # command line wins: re-parse with config values as subparser defaults
    defaults = {}
    for key, value in entries.items():
        action = known[key]
        if isinstance(action, argparse._StoreTrueAction):
            defaults[key] = value.lower() in ("1", "true", "yes", "on")
        elif action.type is not None:
            if isinstance(action, argparse._AppendAction):
                defaults[key] = [action.type(v.strip()) for v in value.split(";")]
            else:
                defaults[key] = action.type(value)
        elif isinstance(action, argparse._AppendAction):
            defaults[key] = [v.strip() for v in value.split(";")]
        else:
            defaults[key] = value
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args = _apply_config(parser, args, argv)
        return args.func(args)
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
