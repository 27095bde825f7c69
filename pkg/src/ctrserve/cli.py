"""Command-line entry point orchestrating the full pipeline:
simulate -> map-keywords -> train -> evaluate -> predict / serve."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from . import evaluation, keywords, regression, server, simulate
from .catalog import (TRAINING_TABLE_HEADER, Placement, parse_ad_catalog,
                      parse_event_log, parse_training_table, aggregate_events)
from .errors import CtrServeError
from .features import DEFAULT_SIZE_REGISTRY, FeatureSchema, encode_placement, encode_size

ENV_PREFIX = "CTRF_"


def _add_common_io(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", help="input data file (CSV)")
    parser.add_argument("--ads", help="ad catalog JSON file")
    parser.add_argument("--map", dest="map_path", help="keyword map JSON file")
    parser.add_argument("--model", help="model JSON file")
    parser.add_argument("--out", help="output path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ctrserve")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("map-keywords", help="mine a keyword->value map from an event log")
    _add_common_io(p)
    p.add_argument("--category", default="sports")
    p.add_argument("--k", type=int, default=3, help="number of centroids")

    p = sub.add_parser("train", help="fit the CTR model")
    _add_common_io(p)
    p.add_argument("--method", choices=["gd", "normal"], default="gd")
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--iters", type=int, default=400)
    p.add_argument("--no-intercept", action="store_true")
    p.add_argument("--no-scaling", action="store_true")

    p = sub.add_parser("predict", help="predict CTR for one request")
    _add_common_io(p)
    p.add_argument("placement", choices=[pl.value for pl in Placement])
    p.add_argument("size")
    p.add_argument("bid", type=float)
    p.add_argument("keyword", help="numeric keyword value, or a token resolved via --map")

    p = sub.add_parser("evaluate", help="score a model on a validation CSV")
    _add_common_io(p)

    p = sub.add_parser("serve", help="run the ad-selection HTTP service")
    _add_common_io(p)
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--mode", choices=[server.MODE_BID, server.MODE_CTR],
                   default=server.MODE_BID)

    p = sub.add_parser("simulate", help="generate a seeded synthetic event log")
    _add_common_io(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--events", type=int, default=10000)
    p.add_argument("--category", default="sports")

    return parser


def _apply_env_overrides(args: argparse.Namespace) -> None:
    """CTRF_* environment variables override parsed flags (CTRF_ALPHA,
    CTRF_MAP_PATH, ...). Booleans accept 0/1/true/false."""
    for dest, current in vars(args).items():
        raw = os.environ.get(ENV_PREFIX + dest.upper())
        if raw is None:
            continue
        if isinstance(current, bool):
            value = raw.strip().lower() in ("1", "true", "yes")
        elif isinstance(current, int):
            value = int(raw)
        elif isinstance(current, float):
            value = float(raw)
        else:
            value = raw
        setattr(args, dest, value)


def _require(args, *names) -> None:
    for name in names:
        if getattr(args, name, None) in (None, ""):
            flag = "--map" if name == "map_path" else "--" + name.replace("_", "-")
            raise CtrServeError(f"missing required flag {flag}")


def _load_transactions(path: str, category: str) -> list[frozenset[str]]:
    with open(path) as fh:
        events = parse_event_log(fh)
    return [e.context.page_keywords for e in events
            if e.context.category == category and e.context.page_keywords]


def _load_training_rows(args):
    """--data is either a pre-aggregated training CSV or a raw event log
    (detected by header); the latter needs --map and --ads."""
    with open(args.data) as fh:
        header = fh.readline().strip().split(",")
    if header == TRAINING_TABLE_HEADER:
        with open(args.data) as fh:
            return parse_training_table(fh)
    _require(args, "map_path", "ads")
    with open(args.ads) as fh:
        bids = {ad.ad_id: ad.bid for ad in parse_ad_catalog(fh)}
    with open(args.data) as fh:
        events = parse_event_log(fh, bids=bids)
    with open(args.map_path) as fh:
        keyword_map = keywords.load_keyword_map(fh)
    return aggregate_events(events, keyword_map)


def cmd_map_keywords(args) -> int:
    _require(args, "data", "out")
    transactions = _load_transactions(args.data, args.category)
    if not transactions:
        raise CtrServeError(f"no transactions for category {args.category!r} in {args.data}")
    stats = keywords.count_cooccurrences(transactions, args.category)
    keyword_map = keywords.build_keyword_map(stats, args.k)
    Path(args.out).write_text(keywords.save_keyword_map(keyword_map))
    print(f"centroids: {', '.join(keyword_map.centroids)}")
    for c in keyword_map.centroids:
        size = sum(1 for v in keyword_map.cluster_of.values() if v == c)
        print(f"cluster {c}: {size} keywords")
    print(f"wrote {args.out}")
    return 0


def cmd_train(args) -> int:
    _require(args, "data", "out")
    rows = _load_training_rows(args)
    method = regression.GRADIENT_DESCENT if args.method == "gd" else regression.NORMAL_EQUATION
    config = regression.TrainingConfig(
        method=method, alpha=args.alpha, iterations=args.iters,
        include_intercept=not args.no_intercept,
        scale_features=False if args.no_scaling else None,
    )
    keyword_map = None
    if args.map_path:
        with open(args.map_path) as fh:
            keyword_map = keywords.load_keyword_map(fh)
    model = regression.train(rows, keyword_map, config)
    Path(args.out).write_text(regression.save_model(model))
    matrix_cost = model.cost_trace[-1] if model.cost_trace else None
    print(f"theta: {[float(t) for t in model.theta]}")
    if matrix_cost is not None:
        trace_path = args.out + ".trace.csv"
        with open(trace_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "cost"])
            writer.writerows(evaluation.export_cost_trace(model))
        print(f"final cost: {matrix_cost}")
        print(f"trace: {trace_path}")
    print(f"wrote {args.out}")
    return 0


def cmd_predict(args) -> int:
    _require(args, "model")
    with open(args.model) as fh:
        model = regression.load_model(fh)
    try:
        kw_value = float(args.keyword)
    except ValueError:
        _require(args, "map_path")
        with open(args.map_path) as fh:
            keyword_map = keywords.load_keyword_map(fh)
        kw_value = keywords.resolve_page_value(keyword_map, {args.keyword.lower()})
    placement_code = encode_placement(Placement(args.placement))
    size_code = encode_size(args.size, model.schema.size_registry)
    ctr = regression.predict(model, (placement_code, size_code, args.bid, kw_value))
    print(repr(ctr))
    return 0


def cmd_evaluate(args) -> int:
    _require(args, "model", "data")
    with open(args.model) as fh:
        model = regression.load_model(fh)
    with open(args.data) as fh:
        header = fh.readline().strip().split(",")
    if header == ["y", "y_pred"]:
        # replay a stored (observed, predicted) pair table directly
        with open(args.data) as fh:
            pairs = list(csv.DictReader(fh))
        y = [float(r["y"]) for r in pairs]
        y_pred = [float(r["y_pred"]) for r in pairs]
        se = evaluation.standard_error(y, y_pred)
        r2 = evaluation.r_squared(y, y_pred)
        print(f"SE: {se}")
        print(f"R2: {r2}")
        if args.out:
            Path(args.out).write_text(json.dumps({"se": se, "r_squared": r2}, indent=2) + "\n")
        return 0
    with open(args.data) as fh:
        rows = parse_training_table(fh)
    report = evaluation.evaluate(model, rows)
    print(f"SE: {report.se}")
    print(f"R2: {report.r_squared}")
    if args.out:
        Path(args.out).write_text(report.to_json())
        print(f"wrote {args.out}")
    return 0


def cmd_serve(args) -> int:
    _require(args, "ads")
    config = server.ServerConfig(
        catalog_path=args.ads, model_path=args.model, map_path=args.map_path,
        event_log_path=args.out, port=args.port, default_mode=args.mode)
    srv = server.AdServer(config)
    print(f"serving on port {config.port} (mode {config.default_mode})")
    srv.serve_forever()
    return 0


def cmd_simulate(args) -> int:
    _require(args, "out")
    config = simulate.SimulationConfig(seed=args.seed, n_events=args.events,
                                       category=args.category)
    output = simulate.run_simulation(config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {
        "events.csv": output.events_csv,
        "catalog.json": output.catalog_json,
        "keyword_map.json": output.map_json,
        "truth.json": output.truth_json,
    }
    for name, content in files.items():
        (out_dir / name).write_text(content)
    print(f"wrote {', '.join(str(out_dir / n) for n in files)}")
    return 0


_COMMANDS = {
    "map-keywords": cmd_map_keywords,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "serve": cmd_serve,
    "simulate": cmd_simulate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _apply_env_overrides(args)
    try:
        return _COMMANDS[args.command](args)
    except (CtrServeError, OSError) as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
