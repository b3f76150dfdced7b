"""Batch command-line front end.

Subcommands: ``gen`` (synthesize raw_f64 datasets), ``build`` (train and
serialize schemes), ``eval`` (measure scheme points), ``frontier`` (sweep a
subset-size/bits grid and emit its lower hull plus the large-file-limit
curve), ``rdl`` (run the optimum solver on a problem/grid), ``audit``
(leakage metrics over a query-sample CSV).

Configuration files are UTF-8 ``key = value`` lines with ``#`` comments;
unknown keys are rejected.  Every directory-producing run writes the fully
resolved configuration next to its outputs as ``resolved.cfg``, and
re-running from that file reproduces the outputs byte for byte.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import io as lpio
from .core import (
    GaussianSourceSpec,
    LeakageKind,
    SchemePoint,
    generate_gaussian_dataset,
)
from .errors import FormatError, InvalidConfigError, LpirError
from .leakage import QuerySampleSet, map_accuracy, mutual_info_discrete, query_variance
from .quantizer import LloydConfig
from .rdl import (
    MAP_METRIC,
    MI_METRIC,
    PrototypePmf,
    RdlConfig,
    InfeasibleProblemError,
    solve_rdl,
)
from .schemes import (
    Frontier,
    build_compression_scheme,
    convexify_shannon,
    eval_scheme,
    lower_hull,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def parse_kv_text(text, origin="<config>"):
    """Parse ``key = value`` lines; '#' starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfigError(
                f"{origin}:{lineno}: expected 'key = value', got {raw!r}"
            )
        key, value = line.split("=", 1)
        key = key.strip()
        if key in out:
            raise InvalidConfigError(f"{origin}:{lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def _parse_value(kind, text, key):
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "bool":
            if text.lower() in ("true", "yes", "1"):
                return True
            if text.lower() in ("false", "no", "0"):
                return False
            raise ValueError(text)
        if kind == "str":
            return text
        if kind == "int_list":
            return [int(v) for v in text.split(",") if v.strip() != ""]
        if kind == "float_list":
            return [float(v) for v in text.split(",") if v.strip() != ""]
        if kind == "matrix":
            rows = [r for r in text.split(";") if r.strip() != ""]
            return [[float(v) for v in r.split(",")] for r in rows]
    except ValueError:
        raise InvalidConfigError(f"config key {key!r}: cannot parse {text!r} as {kind}")
    raise InvalidConfigError(f"unknown schema kind {kind!r}")


def _format_value(kind, value):
    if kind == "matrix":
        return "; ".join(",".join(f"{v:.9g}" for v in row) for row in value)
    if kind in ("int_list", "float_list"):
        return ",".join(f"{v:.9g}" if kind == "float_list" else str(v)
                        for v in value)
    if kind == "bool":
        return "true" if value else "false"
    if kind == "float":
        return f"{value:.9g}"
    return str(value)


def resolve_config(raw, schema, origin="<config>"):
    """Validate raw key/value strings against a schema of
    ``key -> (kind, default)``; ``default=None`` marks a required key."""
    unknown = set(raw) - set(schema)
    if unknown:
        raise InvalidConfigError(
            f"{origin}: unknown config key {sorted(unknown)[0]!r}"
        )
    resolved = {}
    for key, (kind, default) in schema.items():
        if key in raw:
            resolved[key] = _parse_value(kind, raw[key], key)
        elif default is None:
            raise InvalidConfigError(f"{origin}: missing required key {key!r}")
        else:
            resolved[key] = default
    return resolved


def format_config(resolved, schema):
    lines = [
        f"{key} = {_format_value(kind, resolved[key])}"
        for key, (kind, _) in schema.items()
    ]
    return "\n".join(lines) + "\n"


def _read_kv_file(path):
    if not os.path.exists(path):
        raise InvalidConfigError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as f:
        return parse_kv_text(f.read(), origin=path)


SPEC_SCHEMA = {
    "num_files": ("int", None),
    "dim": ("int", None),
    "sigma": ("float", None),
    "means": ("matrix", None),
}


def load_source_spec(path):
    cfg = resolve_config(_read_kv_file(path), SPEC_SCHEMA, origin=path)
    return GaussianSourceSpec(
        num_files=cfg["num_files"], dim=cfg["dim"],
        means=np.array(cfg["means"], dtype=np.float64), sigma=cfg["sigma"],
    )


GEN_SCHEMA = {
    **SPEC_SCHEMA,
    "n": ("int", None),
    "seed": ("int", None),
}


def cmd_gen(args):
    spec = load_source_spec(args.spec)
    ds = generate_gaussian_dataset(spec, args.n, args.seed)
    os.makedirs(args.out, exist_ok=True)
    lpio.save_dataset_raw(os.path.join(args.out, "dataset.f64"), ds)
    resolved = dict(
        num_files=spec.num_files, dim=spec.dim, sigma=spec.sigma,
        means=[list(row) for row in spec.means], n=args.n, seed=args.seed,
    )
    lpio.write_text_atomic(
        os.path.join(args.out, "resolved.cfg"),
        format_config(resolved, GEN_SCHEMA),
    )
    print(os.path.join(args.out, "dataset.f64"))
    return EXIT_OK


BUILD_SCHEMA = {
    "dataset": ("str", None),
    "subset_size": ("int", None),
    "bits": ("int", None),
    "restarts": ("int", 8),
    "rel_threshold": ("float", 1e-6),
    "max_iters": ("int", 500),
    "seed": ("int", 0),
    "per_subset": ("bool", False),
}


def cmd_build(args):
    if not os.path.exists(args.dataset):
        raise InvalidConfigError(f"dataset file not found: {args.dataset}")
    if args.bits < 0:
        raise InvalidConfigError(f"--bits must be nonnegative, got {args.bits}")
    train = lpio.load_dataset(args.dataset)
    cfg = LloydConfig(
        k=2 ** args.bits,
        rel_threshold=args.rel_threshold,
        max_iters=args.max_iters,
        restarts=args.restarts,
        seed=args.seed,
    )
    scheme = build_compression_scheme(
        train, args.subset_size, args.bits, cfg,
        per_subset_encoders=args.per_subset,
    )
    lpio.save_scheme(args.out, scheme)
    resolved = dict(
        dataset=args.dataset, subset_size=args.subset_size, bits=args.bits,
        restarts=args.restarts, rel_threshold=args.rel_threshold,
        max_iters=args.max_iters, seed=args.seed, per_subset=args.per_subset,
    )
    lpio.write_text_atomic(args.out + ".cfg",
                           format_config(resolved, BUILD_SCHEMA))
    print(args.out)
    return EXIT_OK


def cmd_eval(args):
    if not os.path.exists(args.scheme):
        raise InvalidConfigError(f"scheme file not found: {args.scheme}")
    if not os.path.exists(args.test):
        raise InvalidConfigError(f"test dataset not found: {args.test}")
    scheme = lpio.load_scheme(args.scheme)
    test = lpio.load_dataset(args.test)
    point = eval_scheme(scheme, test, args.trials, args.seed)
    frontier = Frontier(points=(point,), kind=point.leakage_kind)
    text = frontier.to_csv()
    if args.out:
        lpio.write_text_atomic(args.out, text)
    sys.stdout.write(text)
    return EXIT_OK


FRONTIER_SCHEMA = {
    "num_files": ("int", None),
    "dim": ("int", None),
    "sigma": ("float", None),
    "means": ("matrix", None),
    "n_train": ("int", None),
    "n_test": ("int", None),
    "seed": ("int", 0),
    "subset_sizes": ("int_list", None),
    "bits": ("int_list", None),
    "trials": ("int", 100000),
    "lloyd_restarts": ("int", 2),
    "lloyd_rel_threshold": ("float", 1e-4),
    "lloyd_max_iters": ("int", 40),
    "shannon": ("bool", True),
    "shannon_steps": ("int", 20),
    "out_dir": ("str", None),
}


def cmd_frontier(args):
    raw = _read_kv_file(args.config)
    cfg = resolve_config(raw, FRONTIER_SCHEMA, origin=args.config)
    spec = GaussianSourceSpec(
        num_files=cfg["num_files"], dim=cfg["dim"],
        means=np.array(cfg["means"], dtype=np.float64), sigma=cfg["sigma"],
    )
    out_dir = cfg["out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    train = generate_gaussian_dataset(spec, cfg["n_train"], cfg["seed"])
    test = generate_gaussian_dataset(spec, cfg["n_test"], cfg["seed"] + 1)
    all_points = []
    for bits in cfg["bits"]:
        rate_points = []
        for n_sub in cfg["subset_sizes"]:
            lloyd = LloydConfig(
                k=2 ** bits,
                rel_threshold=cfg["lloyd_rel_threshold"],
                max_iters=cfg["lloyd_max_iters"],
                restarts=cfg["lloyd_restarts"],
                seed=cfg["seed"] + 1000 * bits + n_sub,
            )
            scheme = build_compression_scheme(train, n_sub, bits, lloyd)
            point = eval_scheme(scheme, test, cfg["trials"],
                                cfg["seed"] + 7000 + n_sub)
            rate_points.append(point)
        all_points.extend(lower_hull(rate_points).points)
        if cfg["shannon"]:
            rate = bits / spec.dim
            for leak in _shannon_leakage_grid(spec.num_files,
                                              cfg["shannon_steps"]):
                all_points.append(SchemePoint(
                    rate=rate,
                    distortion=convexify_shannon(spec.sigma, rate, leak,
                                                 spec.num_files),
                    leakage=leak,
                    leakage_kind=LeakageKind.MAP_ACCURACY,
                    label=f"large-file limit R={rate:g}",
                    scheme="shannon",
                ))
    frontier = Frontier(points=tuple(all_points), kind=LeakageKind.MAP_ACCURACY)
    lpio.write_text_atomic(os.path.join(out_dir, "frontier.csv"),
                           frontier.to_csv())
    lpio.write_text_atomic(os.path.join(out_dir, "resolved.cfg"),
                           format_config(cfg, FRONTIER_SCHEMA))
    print(os.path.join(out_dir, "frontier.csv"))
    return EXIT_OK


def _shannon_leakage_grid(num_files, steps):
    """Reciprocal nodes with ``steps`` uniform points per segment,
    descending from full leakage to 1/num_files."""
    grid = []
    nodes = [1.0 / n for n in range(1, num_files + 1)]
    for hi, lo in zip(nodes, nodes[1:]):
        seg = np.linspace(hi, lo, steps + 1)[:-1]
        grid.extend(seg.tolist())
    grid.append(nodes[-1])
    return grid


PROBLEM_SCHEMA = {
    "num_files": ("int", None),
    "symbol_values": ("float_list", None),
    "joint": ("float_list", None),
    "metric": ("str", MI_METRIC),
}

GRID_SCHEMA = {
    "distortions": ("float_list", None),
    "leakages": ("float_list", None),
}

RDL_RUN_SCHEMA = {
    **PROBLEM_SCHEMA,
    **GRID_SCHEMA,
    "restarts": ("int", 32),
    "seed": ("int", 0),
}


def load_problem(path):
    cfg = resolve_config(_read_kv_file(path), PROBLEM_SCHEMA, origin=path)
    a = len(cfg["symbol_values"])
    m = cfg["num_files"]
    joint = np.array(cfg["joint"], dtype=np.float64)
    if joint.size != a**m:
        raise InvalidConfigError(
            f"{path}: joint needs {a**m} entries, got {joint.size}"
        )
    if cfg["metric"] not in (MI_METRIC, MAP_METRIC):
        raise InvalidConfigError(f"{path}: unknown metric {cfg['metric']!r}")
    pmf = PrototypePmf(
        num_files=m,
        symbol_values=np.array(cfg["symbol_values"], dtype=np.float64),
        joint=joint.reshape((a,) * m),
    )
    return pmf, cfg["metric"], cfg


def solution_text(sol, target_d, target_l):
    """Plain-text serialization of one solver solution."""
    m, n_q = sol.query_dist.shape
    lines = [
        f"num_files = {m}",
        f"query_alphabet = {n_q}",
        f"states = {sol.channel.shape[1]}",
        f"metric = {sol.leakage_metric}",
        f"target_distortion = {target_d:.9g}",
        f"target_leakage = {target_l:.9g}",
        f"rate_bits = {sol.rate:.9g}",
        f"achieved_distortion = {sol.achieved_distortion:.9g}",
        f"achieved_leakage = {sol.achieved_leakage:.9g}",
        "# query rows P(q | m), one line per m",
    ]
    for row in sol.query_dist:
        lines.append(",".join(f"{v:.9g}" for v in row))
    lines.append("# channel rows P(xhat | x, q), one line per (q, x)")
    for q in range(sol.channel.shape[0]):
        for x in range(sol.channel.shape[1]):
            lines.append(",".join(f"{v:.9g}" for v in sol.channel[q, x]))
    return "\n".join(lines) + "\n"


def cmd_rdl(args):
    pmf, metric, problem_cfg = load_problem(args.problem)
    grid = resolve_config(_read_kv_file(args.grid), GRID_SCHEMA,
                          origin=args.grid)
    os.makedirs(args.out, exist_ok=True)
    cfg = RdlConfig(restarts=args.restarts, seed=args.seed)
    rows = ["D,L,rate,feasible"]
    for d in grid["distortions"]:
        for l in grid["leakages"]:
            try:
                sol = solve_rdl(pmf, d, l, metric, cfg)
            except InfeasibleProblemError:
                rows.append(f"{d:.9g},{l:.9g},nan,false")
                continue
            rows.append(f"{d:.9g},{l:.9g},{sol.rate:.9g},true")
            lpio.write_text_atomic(
                os.path.join(args.out, f"solution_D{d:g}_L{l:g}.txt"),
                solution_text(sol, d, l),
            )
    lpio.write_text_atomic(os.path.join(args.out, "rdl_grid.csv"),
                           "\n".join(rows) + "\n")
    resolved = dict(problem_cfg, distortions=grid["distortions"],
                    leakages=grid["leakages"], restarts=args.restarts,
                    seed=args.seed)
    lpio.write_text_atomic(os.path.join(args.out, "resolved.cfg"),
                           format_config(resolved, RDL_RUN_SCHEMA))
    print(os.path.join(args.out, "rdl_grid.csv"))
    return EXIT_OK


def cmd_audit(args):
    if not os.path.exists(args.queries):
        raise InvalidConfigError(f"queries file not found: {args.queries}")
    qs = QuerySampleSet.from_csv(args.queries)
    lines = []
    if args.metric == "map":
        estimator = ("empirical_discrete" if args.estimator == "empirical"
                     else "gaussian_kde")
        value = map_accuracy(qs, estimator=estimator,
                             holdout_fraction=args.holdout, seed=args.seed)
        lines.append(f"map_accuracy,{value:.9g}")
    elif args.metric == "mi":
        value = mutual_info_discrete(qs)
        lines.append(f"mutual_info_bits,{value:.9g}")
    elif args.metric == "variance":
        table = query_variance(qs)
        for m, row in enumerate(table, start=1):
            lines.append(f"variance,{m}," + ",".join(f"{v:.9g}" for v in row))
    text = "\n".join(lines) + "\n"
    if args.out:
        lpio.write_text_atomic(args.out, text)
    sys.stdout.write(text)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lpir",
        description="Lossy private information retrieval toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a raw_f64 Gaussian dataset")
    p.add_argument("--spec", required=True, help="source spec file")
    p.add_argument("--n", type=int, required=True, help="samples to draw")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("build", help="train and serialize a scheme")
    p.add_argument("--dataset", required=True)
    p.add_argument("--subset-size", dest="subset_size", type=int, required=True)
    p.add_argument("--bits", type=int, required=True)
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--rel-threshold", dest="rel_threshold", type=float,
                   default=1e-6)
    p.add_argument("--max-iters", dest="max_iters", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--per-subset", dest="per_subset", action="store_true")
    p.add_argument("--out", required=True, help="output scheme file")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("eval", help="measure a scheme point on a test set")
    p.add_argument("--scheme", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("frontier", help="sweep a scheme grid from a config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_frontier)

    p = sub.add_parser("rdl", help="run the optimum-rate solver on a grid")
    p.add_argument("--problem", required=True)
    p.add_argument("--grid", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--restarts", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_rdl)

    p = sub.add_parser("audit", help="leakage metrics over a query CSV")
    p.add_argument("--queries", required=True)
    p.add_argument("--estimator", choices=("empirical", "kde"),
                   default="empirical")
    p.add_argument("--metric", choices=("map", "mi", "variance"),
                   required=True)
    p.add_argument("--holdout", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_audit)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse already printed the problem; normalize its exit code
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (InvalidConfigError, FormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LpirError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
