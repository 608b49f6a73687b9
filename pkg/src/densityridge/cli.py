"""Command-line driver: ``densityridge <command> [options]``.

Every command writes its outputs into ``--out`` together with
``config.json`` (the resolved run configuration and library version).
Exit codes: 0 success, 2 usage or input error, 3 numerical or connectivity
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .datasets import DATASETS, generate
from .errors import ConnectivityError, InputError, NumericalError
from .flow import FlowConfig
from .geodesic import GeodesicConfig, geodesic
from .charts import ridge_graph
from .kde import DensityModel
from .ode import SolverOptions
from .pca import pca_reduce
from .pipeline import TABLE_BANDWIDTHS, TABLE_NOISE, mse_table, resolve_bandwidth, run_unwrap
from .ridge import RidgeConfig, project_cloud

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- files


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v)) if np.isfinite(v) else ("nan" if np.isnan(v) else ("inf" if v > 0 else "-inf"))


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_points(path) -> np.ndarray:
    """Numeric CSV with a header row; columns named ``x*`` are used if present."""
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"input file {p} does not exist")
    with open(p, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise InputError(f"{p} has no data rows")
    header = rows[0]
    cols = [i for i, h in enumerate(header) if h.strip().startswith("x")] or list(range(len(header)))
    try:
        data = np.array([[float(r[i]) for i in cols] for r in rows[1:]], dtype=np.float64)
    except (ValueError, IndexError) as exc:
        raise InputError(f"{p}: malformed numeric data ({exc})") from None
    return data


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj) if np.isfinite(obj) else None
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _xcols(dim):
    return [f"x{k}" for k in range(dim)]


# ---------------------------------------------------------------- config


def _resolved(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    cfg["version"] = __version__
    return cfg


def _ridge_config(args) -> RidgeConfig:
    solver = SolverOptions(abs_tol=args.abs_tol, rel_tol=args.rel_tol, max_steps=args.max_steps)
    return RidgeConfig(ridge_tol=args.ridge_tol, mode_tol=args.stationary_tol, solver=solver,
                       threads=max(1, args.threads))


def _flow_config(args) -> FlowConfig:
    solver = SolverOptions(abs_tol=args.abs_tol, rel_tol=args.rel_tol, max_steps=args.max_steps, h_max=10.0)
    return FlowConfig(mode_tol=args.mode_tol, solver=solver)


def _load(args):
    """Input points and, for generated data, the dataset record."""
    if args.input and args.dataset:
        raise UsageError("use either --input or --dataset, not both")
    if args.input:
        return read_points(args.input), None
    if args.dataset:
        kw = {"seed": args.seed}
        if getattr(args, "n", None) is not None:
            kw["n"] = args.n
        if getattr(args, "noise", None) is not None:
            kw["noise_sd"] = args.noise
        ds = generate(args.dataset, **kw)
        return ds.X, ds
    raise UsageError("one of --input or --dataset is required")


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _check_dim(args, data):
    if not 1 <= args.dim < data.shape[1]:
        raise UsageError(f"--dim must satisfy 1 <= dim < {data.shape[1]} for this data, got {args.dim}")


# ---------------------------------------------------------------- commands


def cmd_generate(args) -> int:
    if not args.dataset:
        raise UsageError("generate needs --dataset")
    _, ds = _load(args)
    out = _out(args)
    X = ds.X
    tcols = [f"t{k}" for k in range(ds.truth.shape[1])]
    write_csv(out / "points.csv", _xcols(X.shape[1]) + tcols,
              (list(X[i]) + list(ds.truth[i]) for i in range(len(X))))
    write_csv(out / "clean.csv", _xcols(X.shape[1]), ds.clean_points.tolist())
    write_json(out / "dataset.json", {"name": ds.name, "seed": ds.seed, "params": ds.params, "n": len(X)})
    write_json(out / "config.json", _resolved(args))
    return EXIT_OK


def _ridge_rows(est):
    for i, p in enumerate(est.points):
        yield [i] + list(p.position) + [p.converged, p.residual, p.at_mode]


def cmd_project(args) -> int:
    data, _ = _load(args)
    _check_dim(args, data)
    out = _out(args)
    bw = resolve_bandwidth(data, args.bandwidth, args.bandwidth_k)
    args.resolved_bandwidth = bw
    model = DensityModel(data, bw)
    est = project_cloud(model, model.data, args.dim, _ridge_config(args))
    write_csv(out / "ridge.csv", ["index"] + _xcols(data.shape[1]) + ["converged", "residual", "at_mode"],
              _ridge_rows(est))
    conv = est.converged
    write_json(out / "report.json", {
        "n": len(est), "converged": int(conv.sum()), "converged_fraction": float(conv.mean()),
        "max_residual_converged": float(est.residuals[conv].max()) if conv.any() else None,
        "bandwidth": bw, "d": args.dim,
        "terminations": {t: int(sum(p.termination.value == t for p in est.points))
                         for t in sorted({p.termination.value for p in est.points})},
    })
    write_json(out / "config.json", _resolved(args))
    return EXIT_OK


def _metrics(run, ds):
    from scipy.linalg import orthogonal_procrustes
    from scipy.stats import spearmanr

    z = run.atlas.global_coords
    ok = ~np.isnan(z[:, 0])
    m = {"n": len(z), "placed": int(ok.sum()), "modes": len(run.local.modes)}
    if ds is None or ok.sum() < 3:
        return m
    truth = ds.truth[ok]
    if run.d == 1:
        m["spearman_t0"] = float(abs(spearmanr(z[ok, 0], truth[:, 0]).correlation))
        m["span"] = float(np.ptp(z[ok, 0]))
    elif truth.shape[1] == run.d:
        a = z[ok] - z[ok].mean(axis=0)
        b = truth - truth.mean(axis=0)
        r, _ = orthogonal_procrustes(a, b)
        m["procrustes_rms"] = float(np.sqrt(np.mean(np.sum((a @ r - b) ** 2, axis=1))))
    return m


def cmd_unwrap(args) -> int:
    data, ds = _load(args)
    _check_dim(args, data)
    out = _out(args)
    bw = resolve_bandwidth(data, args.bandwidth, args.bandwidth_k)
    args.resolved_bandwidth = bw
    run = run_unwrap(data, args.dim, bw, args.knn, _ridge_config(args), _flow_config(args),
                     GeodesicConfig(n_waypoints=args.waypoints, max_outer_iters=args.max_outer_iters))
    est = run.estimate
    write_csv(out / "ridge.csv", ["index"] + _xcols(data.shape[1]) + ["converged", "residual", "at_mode"],
              _ridge_rows(est))
    z = run.atlas.global_coords
    labels = run.atlas.labels
    zcols = [f"z{k}" for k in range(run.d)]
    write_csv(out / "coords.csv", ["index", "chart"] + zcols,
              ([i, int(labels[i])] + list(z[i]) for i in range(len(z))))
    write_json(out / "modes.json", {
        "reference": run.atlas.reference_mode_id,
        "modes": [{"id": j, "position": mo.position, "basin_size": mo.size, "density": mo.density,
                   "offset": run.atlas.offsets[j] if j < len(run.atlas.offsets) else None}
                  for j, mo in enumerate(run.local.modes)],
        "excluded": run.local.excluded,
    })
    write_json(out / "metrics.json", _metrics(run, ds))
    write_json(out / "config.json", _resolved(args))
    return EXIT_OK


def cmd_geodesic(args) -> int:
    data, _ = _load(args)
    _check_dim(args, data)
    if args.source is None or args.target is None:
        raise UsageError("geodesic needs --source and --target point indices")
    n = len(data)
    for name, v in (("source", args.source), ("target", args.target)):
        if not 0 <= v < n:
            raise UsageError(f"--{name} must lie in [0, {n}), got {v}")
    out = _out(args)
    bw = resolve_bandwidth(data, args.bandwidth, args.bandwidth_k)
    args.resolved_bandwidth = bw
    model = DensityModel(data, bw)
    est = project_cloud(model, model.data, args.dim, _ridge_config(args))
    graph = ridge_graph(est, [], args.knn)
    cfg = GeodesicConfig(n_waypoints=args.waypoints, max_outer_iters=args.max_outer_iters,
                         ridge=_ridge_config(args))
    path = geodesic(model, est, graph, args.source, args.target, cfg)
    write_csv(out / "waypoints.csv", ["step"] + _xcols(data.shape[1]) + ["residual"],
              ([k] + list(path.waypoints[k]) + [path.residuals[k]] for k in range(len(path.waypoints))))
    write_json(out / "geodesic.json", {
        "source": args.source, "target": args.target, "length": path.length,
        "initial_length": path.initial_length, "iterations": path.iterations_used,
        "converged": path.converged, "node_path": path.node_path,
    })
    from .plotting import overlay_svg

    overlay_svg(out / "geodesic.svg", est.positions, path.waypoints, title="geodesic")
    write_json(out / "config.json", _resolved(args))
    return EXIT_OK


def cmd_eval_mse(args) -> int:
    out = _out(args)
    bws = args.bandwidths or list(TABLE_BANDWIDTHS)
    noises = args.noise_levels or list(TABLE_NOISE)
    cells = mse_table(n=args.n or 1000, seed=args.seed, bandwidths=bws, noises=noises,
                      ridge=_ridge_config(args))
    write_csv(out / "mse.csv", ["bandwidth", "noise", "mse", "converged_fraction", "n_converged"],
              ([c.bandwidth, c.noise, c.mse, c.converged_fraction, c.n_converged] for c in cells))
    table = {f"{c.bandwidth:g}": {} for c in cells}
    for c in cells:
        table[f"{c.bandwidth:g}"][f"{c.noise:g}"] = c.mse
    write_json(out / "mse.json", {"table": table, "argmin": {
        f"{e:g}": min((c for c in cells if c.noise == e), key=lambda c: c.mse).bandwidth for e in noises}})
    write_json(out / "config.json", _resolved(args))
    for c in cells:
        print(f"sigma2={c.bandwidth:g} eps={c.noise:g} mse={c.mse:.4f} converged={c.converged_fraction:.3f}")
    return EXIT_OK


def cmd_plot(args) -> int:
    from .plotting import scatter_svg

    src = Path(args.input) if args.input else None
    if src is None or not src.is_dir():
        raise UsageError("plot needs --input pointing at a result directory")
    made = 0
    out = Path(args.out) if args.out else src
    out.mkdir(parents=True, exist_ok=True)
    if (src / "points.csv").is_file():
        scatter_svg(out / "points.svg", read_points(src / "points.csv"), title="input")
        made += 1
    if (src / "ridge.csv").is_file():
        scatter_svg(out / "ridge.svg", read_points(src / "ridge.csv"), title="ridge")
        made += 1
    if (src / "coords.csv").is_file():
        with open(src / "coords.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        header = rows[0]
        zc = [i for i, h in enumerate(header) if h.startswith("z")]
        vals = np.array([[float(r[i]) for i in zc] for r in rows[1:]])
        lab = np.array([int(r[header.index("chart")]) for r in rows[1:]])
        keep = ~np.isnan(vals[:, 0])
        scatter_svg(out / "unwrapped.svg", vals[keep], labels=lab[keep], title="unwrapped")
        made += 1
        if (src / "ridge.csv").is_file():
            scatter_svg(out / "charts.svg", read_points(src / "ridge.csv"), labels=lab, title="charts")
            made += 1
    if made == 0:
        raise UsageError(f"no plottable results in {src}")
    return EXIT_OK


def cmd_pca(args) -> int:
    if not args.input:
        raise UsageError("pca needs --input")
    data = read_points(args.input)
    out = _out(args)
    res = pca_reduce(data, args.dim)
    write_csv(out / "points.csv", _xcols(args.dim), res.points.points.tolist())
    write_json(out / "pca.json", {"mean": res.mean, "components": res.components,
                                  "explained_variance": res.explained_variance})
    write_json(out / "config.json", _resolved(args))
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _common(p, data=True, model=True):
    if data:
        p.add_argument("--dataset", choices=sorted(DATASETS), help="generate a synthetic dataset")
        p.add_argument("--input", help="CSV file with a header row (or a result directory for plot)")
        p.add_argument("--n", type=int, default=None, help="sample size for --dataset")
        p.add_argument("--noise", type=float, default=None, help="noise standard deviation for --dataset")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="results", help="output directory")
    if model:
        p.add_argument("--dim", type=int, default=1, help="intrinsic ridge dimension d")
        bw = p.add_mutually_exclusive_group()
        bw.add_argument("--bandwidth", type=float, default=None, help="kernel variance sigma^2")
        bw.add_argument("--bandwidth-k", type=int, default=12, help="neighbour rank for the bandwidth heuristic")
        p.add_argument("--knn", type=int, default=12, help="neighbours per node in the ridge graph")
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
        p.add_argument("--ridge-tol", type=float, default=1e-4)
        p.add_argument("--mode-tol", type=float, default=1e-6)
        p.add_argument("--stationary-tol", type=float, default=1e-4,
                       help="mean-shift length (in kernel lengths) at which a projection stops on a mode")
        p.add_argument("--abs-tol", type=float, default=1e-6)
        p.add_argument("--rel-tol", type=float, default=1e-6)
        p.add_argument("--max-steps", type=int, default=10_000)
        p.add_argument("--waypoints", type=int, default=50)
        p.add_argument("--max-outer-iters", type=int, default=200)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="densityridge", description="Density ridge estimation and unwrapping.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic dataset")
    _common(p, model=False)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("project", help="project points onto the density ridge")
    _common(p)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("unwrap", help="global coordinates from ridge charts")
    _common(p)
    p.set_defaults(func=cmd_unwrap)

    p = sub.add_parser("geodesic", help="ridge geodesic between two input points")
    _common(p)
    p.add_argument("--source", type=int, default=None)
    p.add_argument("--target", type=int, default=None)
    p.set_defaults(func=cmd_geodesic)

    p = sub.add_parser("eval-mse", help="sphere MSE over a bandwidth by noise grid")
    _common(p, data=False)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--bandwidths", type=float, nargs="+", default=None)
    p.add_argument("--noise-levels", type=float, nargs="+", default=None)
    p.set_defaults(func=cmd_eval_mse)

    p = sub.add_parser("plot", help="SVG plots of a result directory")
    p.add_argument("--input", help="result directory")
    p.add_argument("--out", default=None, help="output directory (default: the input directory)")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("pca", help="centered PCA reduction of a CSV file")
    p.add_argument("--input")
    p.add_argument("--dim", type=int, default=3, help="number of principal components")
    p.add_argument("--out", default="results")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_pca)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, InputError) as exc:
        print(f"densityridge {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, ConnectivityError) as exc:
        print(f"densityridge {args.command}: failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
