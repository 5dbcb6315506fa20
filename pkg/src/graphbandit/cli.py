"""Command line entry point: ``graphbandit {run,verify,graph-stats,gen-graph}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .env import generate_graph
from .graph import CapacityError, GraphError, graph_stats, read_graph


def _param(text: str):
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


def cmd_run(args) -> int:
    from .harness import load_spec, run_experiment

    spec = load_spec(args.spec)
    if args.output_dir:
        spec.output_dir = args.output_dir
    if not spec.output_dir:
        spec.output_dir = "results"
    results = run_experiment(spec, workers=args.workers)
    for name, res in results.items():
        print(f"{name}\tT={spec.horizon}\tmean_regret={res.mean_regret[-1]:.4f}\tstderr={res.stderr[-1]:.4f}")
    print(f"wrote {spec.output_dir}")
    return 0


def cmd_verify(args) -> int:
    from .verify import verify

    results = verify(args.level)
    for r in results:
        print(r.line())
    ok = all(r.passed for r in results)
    print("verify:", "PASS" if ok else "FAIL")
    return 0 if ok else 1


def cmd_graph_stats(args) -> int:
    g = read_graph(args.graph, strict=args.strict)
    print(json.dumps(graph_stats(g).to_dict()))
    return 0


def cmd_gen_graph(args) -> int:
    params = dict(args.param or [])
    for key in ("K", "p", "m", "s"):
        value = getattr(args, key)
        if value is not None:
            params[key] = value
    if args.directed is not None:
        params["directed"] = args.directed
    g = generate_graph(args.family, params, args.seed)
    text = json.dumps(g.to_dict()) + "\n" if args.format == "json" else g.to_edge_list()
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graphbandit", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment described by a JSON spec")
    p.add_argument("spec")
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: $GRAPHBANDIT_THREADS or 1)")
    p.add_argument("--output-dir", default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="run the property checks")
    p.add_argument("--level", choices=("fast", "full"), default="fast")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("graph-stats", help="print independence numbers and mas of a graph as JSON")
    p.add_argument("graph", help="edge-list or JSON graph file")
    p.add_argument("--strict", action="store_true", help="reject graphs missing self-loops")
    p.set_defaults(func=cmd_graph_stats)

    p = sub.add_parser("gen-graph", help="generate a graph from a named family")
    p.add_argument("--family", required=True,
                   choices=("bandit", "complete", "erdos_renyi", "star", "cliques", "cycle"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--K", type=int)
    p.add_argument("--p", type=float)
    p.add_argument("--m", type=int)
    p.add_argument("--s", type=int)
    p.add_argument("--directed", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--param", type=_param, action="append", metavar="KEY=VALUE")
    p.add_argument("--format", choices=("edges", "json"), default="edges")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_gen_graph)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (GraphError, CapacityError, ValueError, OSError) as exc:
        print(f"graphbandit: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
