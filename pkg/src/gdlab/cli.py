"""Command-line entry point: ``gdlab <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction
from typing import Any, Sequence

from . import generators as gen
from . import experiments as ex
from .load_balancing import predict_final, square_sum_gap
from .load_balancing import simulate as lb_simulate
from .markov import absorbing_analysis, enumerate_chain, simple_cycle_lengths, walk_hitting_times
from .max_model import (
    async_simulate,
    detect_convergence,
    predict_strongly_connected,
    predict_undirected,
    sync_step,
)
from .graph import is_strongly_connected, repair_outdegree

FAMILIES = {
    "erdos": "erdos_renyi",
    "ba": "barabasi_albert",
    "path": "family",
    "cycle": "family",
    "star": "family",
    "complete": "family",
    "binomial": "binomial",
    "gamblers-ruin": "gamblers_ruin",
    "prime-flower": "prime_flower",
    "bipartite-worst": "bipartite_worst",
    "nonbipartite-worst": "nonbipartite_worst",
    "two-cycle": "two_cycle",
    "four-class": "four_class",
    "motivating": "motivating_lb",
}
VALUE_KINDS = ("instance", "unique-max", "random", "permutation", "gap")


def _jsonable(x: Any) -> Any:
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (set, frozenset)):
        return sorted(_jsonable(v) for v in x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def _add_common(p: argparse.ArgumentParser, *, model: bool = True, trials: bool = False) -> None:
    p.add_argument("--seed", type=int, default=0, help="base seed (default 0)")
    p.add_argument("--max-steps", type=int, default=None, help="step cap before a run is marked capped")
    p.add_argument("--out", default=None, help="write the main output to this path")
    if model:
        p.add_argument("--model", choices=ex.MODELS, default=None, help="process to run")
    if trials:
        p.add_argument("--trials", type=int, default=None, help="number of independent trials")


def _add_direction(p: argparse.ArgumentParser) -> None:
    group = p.add_mutually_exclusive_group()
    group.add_argument("--directed", dest="directed", action="store_true", default=None)
    group.add_argument("--undirected", dest="directed", action="store_false")


def _graph_spec(args: argparse.Namespace) -> dict[str, Any]:
    kind = FAMILIES[args.family]
    spec: dict[str, Any] = {"kind": kind}
    if kind == "family":
        spec.update(family=args.family, n=args.n)
    elif kind == "erdos_renyi":
        spec.update(n=args.n, p=args.p, directed=bool(args.directed))
    elif kind == "barabasi_albert":
        spec.update(n=args.n, m=args.m)
    elif kind == "prime_flower":
        spec.update(k=args.k)
    elif kind in ("binomial", "gamblers_ruin", "bipartite_worst", "nonbipartite_worst"):
        spec.update(n=args.n)
    return spec


def _valuation_spec(args: argparse.Namespace) -> dict[str, Any]:
    kind = args.values.replace("-", "_")
    spec: dict[str, Any] = {"kind": kind}
    if kind == "unique_max":
        spec["node"] = "random" if args.node is None else args.node
    elif kind == "random":
        spec.update(low=args.low, high=args.high)
    elif kind == "gap":
        spec["q"] = args.q
    return spec


def _default_values(args: argparse.Namespace) -> None:
    if args.values is None:
        random_graph = FAMILIES[args.family] in ("erdos_renyi", "barabasi_albert", "family")
        args.values = "random" if random_graph else "instance"


def cmd_generate(args: argparse.Namespace) -> int:
    _default_values(args)
    config = ex.ExperimentConfig(
        model=args.model or "lb", graph=_graph_spec(args), valuation=_valuation_spec(args), trials=1
    )
    _emit(ex.instance_text(ex.build_instance(config, args.seed)), args.out)
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    if args.instance:
        graph = ex.read_instance(args.path).graph
    else:
        path = args.path
        directed = bool(args.directed)
        if args.path in ex.DATASETS:
            found = ex.dataset_path(args.path)
            if found is None:
                print(f"dataset {args.path!r} not found under ${ex.DATA_ENV}", file=sys.stderr)
                return 2
            path, default_directed = str(found), ex.DATASETS[args.path][1]
            directed = default_directed if args.directed is None else args.directed
        graph = ex.load_edge_list(path, directed)
    removed = 0
    if args.repair:
        before = graph.node_count
        graph, _ = repair_outdegree(graph)
        removed = before - graph.node_count
    stats = ex.graph_stats(graph, args.diameter_samples, args.seed).as_dict()
    if args.repair:
        stats["removed_nodes"] = removed
    if args.format == "json":
        text = json.dumps(stats, indent=2) + "\n"
    else:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(stats.keys())
        writer.writerow(stats.values())
        text = buf.getvalue()
    _emit(text, args.out)
    return 0


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _model_for(args: argparse.Namespace, inst: gen.Instance) -> str:
    if args.model:
        return args.model
    return "sync-max" if inst.graph.directed else "lb"


def cmd_simulate(args: argparse.Namespace) -> int:
    inst = ex.read_instance(args.instance)
    model = _model_for(args, inst)
    result: dict[str, Any] = {"model": model, "seed": args.seed}
    if model == "lb":
        stats = lb_simulate(inst.graph, inst.valuation, args.seed, args.max_steps or 10**9, check=args.check)
        result.update(
            conv_time=stats.convergence_time,
            height=stats.height,
            width=stats.width,
            capped=stats.capped,
            final=stats.final,
        )
    elif model == "sync-max":
        traj = detect_convergence(inst.graph, inst.valuation, args.max_steps or 1_000_000)
        result.update(conv_time=traj.convergence_time, period=traj.period, capped=traj.capped)
        result["limit_cycle"] = traj.limit_cycle
        if args.trace:
            f, trace = inst.valuation, [inst.valuation]
            end = (traj.convergence_time or 0) + (traj.period or 0)
            for _ in range(end):
                f = sync_step(inst.graph, f)
                trace.append(f)
            result["trace"] = trace
    else:
        res = async_simulate(inst.graph, inst.valuation, args.seed, args.max_steps or 1_000_000)
        result.update(
            conv_time=res.convergence_time, final_ratio=res.final_value_ratio, capped=res.capped, final=res.final
        )
    _emit(json.dumps(_jsonable(result), indent=2, sort_keys=True) + "\n", args.out)
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    inst = ex.read_instance(args.instance)
    model = _model_for(args, inst)
    g, f0 = inst.graph, inst.valuation
    if model == "lb":
        pred = predict_final(g, f0)
        result = {
            "model": "lb",
            "period": pred.period,
            "square_sum_gap": square_sum_gap(g, f0),
            "components": [
                {"members": c.members, "n": c.size, "sum": c.total, "k": c.k, "r": c.r, "final": c.final_multiset}
                for c in pred.components
            ],
        }
    elif not g.directed:
        pred = predict_undirected(g, f0)
        result = {
            "model": "sync-max",
            "period": pred.period,
            "convergence_bound": pred.bound,
            "components": [
                {
                    "members": c.members,
                    "bipartite": c.bipartite,
                    "side_max": [c.max_a, c.max_b] if c.bipartite else [c.max_a],
                    "period": c.period,
                }
                for c in pred.components
            ],
        }
    elif is_strongly_connected(g):
        pred = predict_strongly_connected(g, f0)
        result = {
            "model": "sync-max",
            "period": pred.period,
            "cycle_gcd": pred.coloring.g,
            "class_of": pred.coloring.class_of,
            "class_max": pred.coloring.class_max,
        }
    else:
        print("no closed-form prediction for directed graphs that are not strongly connected", file=sys.stderr)
        return 2
    _emit(json.dumps(_jsonable(result), indent=2, sort_keys=True) + "\n", args.out)
    return 0


def cmd_oracle(args: argparse.Namespace) -> int:
    inst = ex.read_instance(args.instance)
    result: dict[str, Any] = {}
    if args.cycles:
        result["simple_cycle_lengths"] = sorted(simple_cycle_lengths(inst.graph))
    if args.hitting is not None:
        result["hitting_times"] = walk_hitting_times(inst.graph, args.hitting)
    if not args.cycles and args.hitting is None:
        model = {"lb": "lb", "sync-max": "sync", "async-max": "async"}[_model_for(args, inst)]
        chain = enumerate_chain(inst.graph, inst.valuation, model, args.state_limit)
        report = absorbing_analysis(chain)
        result.update(
            model=model,
            states=len(chain.states),
            absorbing_class_sizes=[len(c) for c in report.absorbing_classes],
            reach_probability=report.reach_probability,
            expected_steps=report.expected_steps,
            period=report.period,
            tail=report.tail,
        )
    _emit(json.dumps(_jsonable(result), indent=2, sort_keys=True) + "\n", args.out)
    return 0


def cmd_experiment(args: argparse.Namespace) -> int:
    if args.config:
        config = ex.ExperimentConfig.load(args.config)
    else:
        if args.family is None:
            print("experiment needs a config file or --family", file=sys.stderr)
            return 2
        _default_values(args)
        config = ex.ExperimentConfig(
            model=args.model or "lb", graph=_graph_spec(args), valuation=_valuation_spec(args)
        )
    if args.model:
        config.model = args.model
    if args.trials is not None:
        config.trials = args.trials
    if args.max_steps is not None:
        config.max_steps = args.max_steps
    if args.seed_given:
        config.base_seed = args.seed
    if args.out:
        config.output_path = args.out
    config.__post_init__()
    try:
        report = ex.run_trials(config, args.workers)
    except ex.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if config.output_path:
        ex.emit_report(report, config.output_path)
    else:
        sys.stdout.write("\n".join(ex.report_lines(report)) + "\n")
    print(json.dumps(report.summary(), sort_keys=True), file=sys.stderr)
    return 0


def _add_instance_flags(p: argparse.ArgumentParser, required: bool) -> None:
    p.add_argument("--family", choices=sorted(FAMILIES), required=required)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--m", type=int, default=9, help="attachments per node for ba")
    p.add_argument("--k", type=int, default=2, help="number of petals for prime-flower")
    p.add_argument("--values", choices=VALUE_KINDS, default=None)
    p.add_argument("--node", default=None, help="unique-max node: id, random or largest_scc")
    p.add_argument("--low", type=int, default=-5)
    p.add_argument("--high", type=int, default=5)
    p.add_argument("--q", type=int, default=0, help="target square-sum gap for --values gap")
    _add_direction(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gdlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write an instance file")
    _add_instance_flags(p, required=True)
    _add_common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("stats", help="graph statistics of an edge list, dataset name or instance file")
    p.add_argument("path")
    p.add_argument("--instance", action="store_true", help="read PATH as an instance file")
    p.add_argument("--repair", action="store_true", help="drop out-degree-0 nodes first")
    p.add_argument("--diameter-samples", type=int, default=None)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    _add_direction(p)
    _add_common(p, model=False)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("simulate", help="run one trial on an instance file")
    p.add_argument("instance")
    p.add_argument("--trace", action="store_true", help="sync-max: list every valuation up to the limit cycle")
    p.add_argument("--check", action="store_true", help="lb: audit conservation laws at every step")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("predict", help="closed-form final state and period")
    p.add_argument("instance")
    _add_common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("oracle", help="exact Markov chain analysis of a small instance")
    p.add_argument("instance")
    p.add_argument("--state-limit", type=int, default=200_000)
    p.add_argument("--cycles", action="store_true", help="list simple cycle lengths instead")
    p.add_argument("--hitting", type=int, default=None, metavar="TARGET", help="random walk hitting times")
    _add_common(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("experiment", help="batch of trials written as CSV")
    p.add_argument("config", nargs="?", help="JSON config file")
    p.add_argument("--workers", type=int, default=1)
    _add_instance_flags(p, required=False)
    _add_common(p, trials=True)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    args.seed_given = any(a == "--seed" or a.startswith("--seed=") for a in argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
