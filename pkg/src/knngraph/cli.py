"""Command-line entry point: ``knngraph {train,predict,evaluate,bench,inspect}``.

Exit codes: 0 success, 1 usage or parameter error, 2 data or model-file
error, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numba
import numpy as np

from .classifier import StaticHNSW, index_params, train
from .config import RunConfig, load_config
from .dataset import DataError, load_csv, load_features, make_blobs, read_rows
from .density import ConnectivityError
from .evaluation import (METHODS, bench_inference, bruteforce_predict, cross_validate,
                         format_table, write_bench_csv, write_report_csv, write_report_json)
from .persistence import ModelFormatError, inspect_model, load_model, save_model

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

log = logging.getLogger("knngraph")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _scales(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _auto_float(text: str):
    return text if text == "auto" else float(text)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("configuration (flags override --config)")
    g.add_argument("--config", help="JSON or key = value config file")
    g.add_argument("--seed", type=int)
    g.add_argument("--alpha", type=float)
    g.add_argument("--sigma", type=_auto_float)
    g.add_argument("--gamma", type=float)
    g.add_argument("--kernel-mode", choices=("dense", "local"))
    g.add_argument("--candidate-pool", type=int)
    g.add_argument("--lambda-min", type=_auto_float)
    g.add_argument("--lambda-max", type=_auto_float)
    g.add_argument("--density-scales", type=_scales)
    g.add_argument("--tol", type=float)
    g.add_argument("--max-sweeps", type=int)
    g.add_argument("--self-weight-scale", type=float)
    g.add_argument("--M", dest="M", type=int)
    g.add_argument("--max-degree0", type=int)
    g.add_argument("--ef-construction", type=int)
    g.add_argument("--ef-search", type=int)
    g.add_argument("--normalize", action="store_true", default=None,
                   help="z-score features with training statistics")
    g.add_argument("--threads", type=int, help="worker threads for the learning stage (0 = all)")


_CONFIG_FLAGS = ("seed", "alpha", "sigma", "gamma", "kernel_mode", "candidate_pool", "lambda_min",
                 "lambda_max", "density_scales", "tol", "max_sweeps", "self_weight_scale", "M",
                 "max_degree0", "ef_construction", "ef_search", "normalize", "threads")


def _config(args, **extra) -> RunConfig:
    base = load_config(args.config) if args.config else RunConfig()
    changes = {k: getattr(args, k) for k in _CONFIG_FLAGS}
    changes.update(extra)
    return base.updated(**changes)


def _label_col(text: str):
    return int(text) if text.lstrip("-").isdigit() else text


# ------------------------------------------------------------------ commands


def cmd_train(args) -> int:
    cfg = _config(args)
    ds = load_csv(args.data, _label_col(args.label_col))
    model = train(ds, cfg)
    save_model(model, args.out)
    if args.trace_out:
        with Path(args.trace_out).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["sweep", "objective"])
            for t, obj in enumerate(model.trace.objective_per_sweep, 1):
                w.writerow([t, repr(float(obj))])
    if args.config_out:
        Path(args.config_out).write_text(cfg.dumps() + "\n", encoding="utf-8")
    s = model.stats
    print(f"trained on n={s['n']} d={s['d']} c={s['c']}")
    print(f"mean K_j={s['mean_k']:.3f} (min {s['min_k']}, max {s['max_k']})")
    print(f"avg layer-0 degree={s['avg_degree']:.3f}  top level={s['max_level']}")
    print(f"sweeps={s['sweeps_to_converge']}  consensus changed {s['consensus_changed']} labels")
    print(f"build seconds={model.timings['train_s']:.3f}")
    print(f"model written to {args.out}")
    return EXIT_OK


def cmd_predict(args) -> int:
    model = load_model(args.model)
    if args.label_col is not None:
        if read_rows(args.queries)[1]:
            Q = load_csv(args.queries, _label_col(args.label_col)).features
        else:
            Q = np.empty((0, model.index.d))
    else:
        Q = load_features(args.queries)
    if Q.shape[0] and Q.shape[1] != model.index.d:
        raise DataError(f"query file has d={Q.shape[1]} but the model expects d={model.index.d}")
    if Q.shape[0]:
        model.predict(Q[:1], args.ef_search)  # load compiled code before timing
    t = time.perf_counter()
    labels = model.predict(Q, args.ef_search) if Q.shape[0] else np.zeros(0, dtype=np.int64)
    elapsed = time.perf_counter() - t
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for y in labels:
            out.write(model.class_names[y] + "\n")
    finally:
        if args.out:
            out.close()
    if Q.shape[0]:
        print(f"{Q.shape[0]} queries, mean latency {1e6 * elapsed / Q.shape[0]:.2f} us", file=sys.stderr)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _config(args, folds=args.folds)
    ds = load_csv(args.data, _label_col(args.label_col))
    methods = METHODS if args.with_baselines else ("proposed",)
    reports = cross_validate(ds, cfg, methods=methods)
    print(format_table(reports))
    if args.report_json:
        write_report_json(reports, args.report_json, include_timing=args.include_timing,
                          extra={"config": cfg.to_dict(), "folds": cfg.folds, "n": ds.n})
    if args.report_csv:
        write_report_csv(reports, args.report_csv)
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _config(args)
    if args.kernel_mode is None and not args.config:
        cfg = cfg.updated(kernel_mode="local")
    numba.set_num_threads(1)
    rows = []
    for n in args.sizes:
        ds = make_blobs(n + args.queries, args.dim, args.classes, args.std, seed=cfg.seed)
        train_ds = ds.subset(np.arange(n))
        Q = ds.features[n:]
        model = train(train_ds, cfg)
        static = StaticHNSW.build(train_ds, index_params(cfg))

        def static_fn(Qb, static=static):
            out = [static.predict_counted(q, cfg.static_k) for q in Qb]
            return np.array([o[0] for o in out]), np.array([o[1] for o in out])

        models = [
            ("proposed", lambda Qb, m=model: m.predict_counted(Qb)),
            ("static_hnsw", static_fn),
            ("bruteforce_knn", lambda Qb, d=train_ds: bruteforce_predict(d, Qb, cfg.bruteforce_k)),
        ]
        part = bench_inference(models, Q, args.repeats, n_train=n)
        for r in part:
            print(f"n={n:<7} {r.method:<15} {1e6 * r.per_query_s:>10.2f} us/query "
                  f"{r.distance_evals_per_query:>10.1f} dist/query")
        rows.extend(part)
    if args.out:
        write_bench_csv(rows, args.out)
    return EXIT_OK


def cmd_inspect(args) -> int:
    info = inspect_model(args.model)
    if args.json:
        print(json.dumps(info, sort_keys=True, indent=2))
        return EXIT_OK
    print(f"format   KNNG v{info['version']}")
    print(f"n        {info['n']}")
    print(f"d        {info['d']}")
    print(f"c        {info['c']}  ({', '.join(info['class_names'])})")
    print(f"L        {info['L']}")
    print(f"m_bar    {info['avg_degree']:.4f}")
    print(f"M        {info['M']}  max_degree0 {info['max_degree0'] or 2 * info['M']}  "
          f"ef_construction {info['ef_construction']}  ef_search {info['ef_search']}")
    print(f"entry    {info['entry_point']}")
    print(f"mean K_j {info['stats'].get('mean_k', float('nan')):.4f}")
    return EXIT_OK


# -------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="knngraph", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="learn neighborhoods and build the index")
    p.add_argument("--data", required=True)
    p.add_argument("--label-col", default="last", help="index, header name or 'last'")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--trace-out", help="CSV of (sweep, objective)")
    p.add_argument("--config-out", help="write the resolved config here")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="label query rows with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--queries", required=True, help="CSV of query features")
    p.add_argument("--label-col", help="drop this column from the query file first")
    p.add_argument("--out", help="predictions file (default stdout)")
    p.add_argument("--ef-search", type=int)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="stratified cross-validation")
    p.add_argument("--data", required=True)
    p.add_argument("--label-col", default="last")
    p.add_argument("--folds", type=int)
    p.add_argument("--with-baselines", action="store_true")
    p.add_argument("--report-json")
    p.add_argument("--report-csv")
    p.add_argument("--include-timing", action="store_true",
                   help="add wall-clock timings to the JSON report (makes it non-reproducible)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bench", help="inference latency and distance counts on synthetic blobs")
    p.add_argument("--sizes", type=_scales, default=(2048, 8192, 32768))
    p.add_argument("--dim", type=int, default=10)
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--std", type=float, default=1.4)
    p.add_argument("--queries", type=int, default=500)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--out", help="CSV timing table")
    _add_config_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("inspect", help="print a model file's header and statistics")
    p.add_argument("model")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_inspect)

    # "model inspect" spelling
    p = sub.add_parser("model", help="model file utilities")
    msub = p.add_subparsers(dest="model_command", required=True, parser_class=_Parser)
    q = msub.add_parser("inspect")
    q.add_argument("model")
    q.add_argument("--json", action="store_true")
    q.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConnectivityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ModelFormatError, OSError, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # invariant violation or bug
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
