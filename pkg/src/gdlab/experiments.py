"""Dataset ingestion, batch trials and CSV reports.

A run is described by an :class:`ExperimentConfig`: a graph spec, a valuation
spec, a model and a trial count. Trial ``i`` draws everything (graph,
valuation, update order) from one generator seeded with
``trial_seed(base_seed, i)``, so a run is reproducible byte for byte and its
rows do not depend on how trials are spread over worker processes.
"""

from __future__ import annotations

import csv
import json
import math
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import generators as gen
from .graph import Graph, connected_components, diameter, repair_outdegree, scc_decompose
from .load_balancing import predict_final, predict_period
from .load_balancing import simulate as lb_simulate
from .max_model import async_simulate, detect_convergence, require_out_edges

MODELS = ("lb", "sync-max", "async-max")
CSV_HEADER = ("trial", "seed", "conv_time", "height", "width", "period", "final_ratio", "capped")
DATA_ENV = "GDL_DATA_DIR"

# file name and directedness of the four social network datasets
DATASETS = {
    "facebook": ("facebook_combined.txt", False),
    "twitch": ("musae_ENGB_edges.csv", False),
    "wikipedia": ("Wiki-Vote.txt", True),
    "twitter": ("twitter_combined.txt", True),
}


class EdgeListError(ValueError):
    pass


class ConfigError(ValueError):
    pass


# Ingestion ----------------------------------------------------------------------


def load_edge_list_with_ids(path: str | os.PathLike, directed: bool = False) -> tuple[Graph, list[int]]:
    """Parse an edge list and return the graph plus the original id of every node.

    One edge per line as two integers separated by whitespace (commas are
    accepted too). Lines starting with ``#`` are comments and a non-numeric
    first line is taken as a column header. Duplicate edges are merged,
    ids are relabelled densely in order of first appearance, and self-loops
    are dropped from undirected graphs.
    """
    ids: dict[int, int] = {}
    edges: list[tuple[int, int]] = []
    seen_data = False
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.replace(",", " ").split()
            try:
                if len(parts) < 2:
                    raise ValueError
                a, b = int(parts[0]), int(parts[1])
            except ValueError:
                if not seen_data and not any(p.lstrip("-").isdigit() for p in parts):
                    seen_data = True
                    continue
                raise EdgeListError(f"{path}:{lineno}: expected two integer node ids, got {text!r}") from None
            seen_data = True
            u = ids.setdefault(a, len(ids))
            v = ids.setdefault(b, len(ids))
            if u == v and not directed:
                continue
            edges.append((u, v))
    if not ids:
        raise EdgeListError(f"{path}: no edges found")
    graph = Graph.from_edges(len(ids), edges, directed=directed, allow_self_loops=directed)
    original = [0] * len(ids)
    for ext, dense in ids.items():
        original[dense] = ext
    return graph, original


def load_edge_list(path: str | os.PathLike, directed: bool = False) -> Graph:
    return load_edge_list_with_ids(path, directed)[0]


def data_dir() -> Path | None:
    root = os.environ.get(DATA_ENV)
    return Path(root) if root else None


def dataset_path(name: str) -> Path | None:
    """Location of a named dataset under ``$GDL_DATA_DIR``, or None when absent."""
    root = data_dir()
    if root is None or name not in DATASETS:
        return None
    path = root / DATASETS[name][0]
    return path if path.exists() else None


@lru_cache(maxsize=8)
def _cached_graph(path: str, directed: bool, repair: bool) -> Graph:
    graph = load_edge_list(path, directed)
    if repair:
        graph, _ = repair_outdegree(graph)
    return graph


@dataclass(frozen=True)
class GraphStats:
    nodes: int
    edges: int
    directed: bool
    min_out_degree: int
    max_out_degree: int
    avg_out_degree: float
    min_in_degree: int
    max_in_degree: int
    avg_in_degree: float
    diameter: int
    diameter_exact: bool
    scc_count: int
    largest_scc: int
    weakly_connected: bool

    def as_dict(self) -> dict[str, Any]:
        return asdict(self)


def graph_stats(graph: Graph, diameter_samples: int | None = None, seed: int = 0) -> GraphStats:
    """Size, degree and connectivity summary.

    For undirected graphs the degree figures are plain degrees and ``edges``
    counts unordered pairs. ``diameter_samples`` switches to a BFS from that
    many random sources, which only gives a lower bound.
    """
    n = graph.node_count
    out_deg = [len(a) for a in graph.adjacency_out]
    in_deg = [len(a) for a in graph.adjacency_in]
    diam = diameter(graph, diameter_samples, seed)
    scc = scc_decompose(graph)
    return GraphStats(
        nodes=n,
        edges=graph.edge_count,
        directed=graph.directed,
        min_out_degree=min(out_deg),
        max_out_degree=max(out_deg),
        avg_out_degree=round(sum(out_deg) / n, 2),
        min_in_degree=min(in_deg),
        max_in_degree=max(in_deg),
        avg_in_degree=round(sum(in_deg) / n, 2),
        diameter=diam.value,
        diameter_exact=diam.exact,
        scc_count=scc.count,
        largest_scc=len(scc.largest()),
        weakly_connected=len(connected_components(graph)) == 1,
    )


# Instance files -----------------------------------------------------------------


def instance_text(instance: gen.Instance) -> str:
    """Plain text: ``n m directed_flag``, then m edge lines, then n value lines."""
    g = instance.graph
    lines = [f"{g.node_count} {len(g.edge_list)} {int(g.directed)}"]
    lines += [f"{u} {v}" for u, v in g.edge_list]
    lines += [str(x) for x in instance.valuation]
    return "\n".join(lines) + "\n"


def write_instance(instance: gen.Instance, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(instance_text(instance))


def read_instance(path: str | os.PathLike) -> gen.Instance:
    with open(path, encoding="utf-8") as fh:
        tokens = [line.split() for line in fh if line.strip()]
    try:
        n, m, flag = (int(x) for x in tokens[0])
        edges = [(int(a), int(b)) for a, b in tokens[1 : 1 + m]]
        values = tuple(int(x[0]) for x in tokens[1 + m : 1 + m + n])
    except (ValueError, IndexError) as exc:
        raise ValueError(f"{path}: malformed instance file") from exc
    if len(values) != n or len(tokens) != 1 + m + n:
        raise ValueError(f"{path}: expected {m} edges and {n} values")
    graph = Graph(n, edges, directed=bool(flag), allow_self_loops=bool(flag))
    return gen.Instance(graph, values, Path(path).stem)


# Configuration ------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """One batch of trials.

    ``graph`` and ``valuation`` are small dicts with a ``kind`` key; see
    :func:`build_instance` for the accepted kinds.
    """

    model: str = "lb"
    graph: dict[str, Any] = field(default_factory=lambda: {"kind": "gamblers_ruin", "n": 5})
    valuation: dict[str, Any] = field(default_factory=lambda: {"kind": "instance"})
    trials: int = 100
    base_seed: int = 0
    max_steps: int = 10**9
    output_path: str | None = None

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be positive")
        for name in ("graph", "valuation"):
            if "kind" not in getattr(self, name):
                raise ConfigError(f"{name} spec needs a 'kind'")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        data = json.loads(text)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "ExperimentConfig":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


_INSTANCE_KINDS = {
    "binomial": lambda s: gen.binomial_instance(int(s["n"])),
    "gamblers_ruin": lambda s: gen.gamblers_ruin_instance(int(s["n"])),
    "prime_flower": lambda s: gen.prime_flower_instance(int(s["k"])),
    "bipartite_worst": lambda s: gen.bipartite_worst_instance(int(s["n"])),
    "nonbipartite_worst": lambda s: gen.nonbipartite_worst_instance(int(s["n"]), int(s.get("max_at", 1))),
    "two_cycle": lambda s: gen.two_cycle_instance(),
    "four_class": lambda s: gen.four_class_instance(),
    "motivating_lb": lambda s: gen.motivating_lb_instance(int(s.get("offset", 0))),
}


def _build_graph(spec: dict[str, Any], model: str, rng: np.random.Generator) -> tuple[Graph, tuple[int, ...] | None]:
    kind = spec["kind"]
    if kind in _INSTANCE_KINDS:
        inst = _INSTANCE_KINDS[kind](spec)
        return inst.graph, inst.valuation
    need_out = model != "lb"
    if kind == "erdos_renyi":
        n, p, directed = int(spec["n"]), float(spec.get("p", 0.5)), bool(spec.get("directed", False))
        if need_out:
            return gen.erdos_renyi_max_ready(n, p, directed, rng, int(spec.get("max_retries", 1000))), None
        return gen.erdos_renyi(n, p, directed, rng), None
    if kind == "barabasi_albert":
        return gen.barabasi_albert(int(spec["n"]), int(spec.get("m", 9)), rng), None
    if kind == "family":
        return gen.family_graph(spec["family"], int(spec["n"])), None
    if kind in ("edge_list", "dataset"):
        if kind == "dataset":
            name = spec["name"]
            path = dataset_path(name)
            if path is None:
                raise ConfigError(f"dataset {name!r} not found; set {DATA_ENV}")
            directed = DATASETS[name][1]
        else:
            path = spec["path"]
            directed = bool(spec.get("directed", False))
        repair = bool(spec.get("repair", directed and need_out))
        return _cached_graph(str(path), directed, repair), None
    raise ConfigError(f"unknown graph kind {kind!r}")


def _build_valuation(
    spec: dict[str, Any], graph: Graph, own: tuple[int, ...] | None, rng: np.random.Generator
) -> tuple[int, ...]:
    kind = spec["kind"]
    n = graph.node_count
    if kind == "instance":
        if own is None:
            raise ConfigError("graph kind has no built-in valuation; choose a valuation kind")
        return own
    if kind == "unique_max":
        where = spec.get("node", "random")
        if where == "random":
            node = int(rng.integers(n))
        elif where == "largest_scc":
            members = scc_decompose(graph).largest()
            node = members[int(rng.integers(len(members)))]
        else:
            node = int(where)
        return gen.unique_max_valuation(graph, node)
    if kind == "random":
        return gen.random_values(n, int(spec.get("low", -5)), int(spec.get("high", 5)), rng)
    if kind == "permutation":
        return gen.permutation_values(n, rng)
    if kind == "gap":
        return gen.random_gap_valuation(graph, int(spec["q"]), rng)[0]
    raise ConfigError(f"unknown valuation kind {kind!r}")


def build_instance(config: ExperimentConfig, seed: int) -> gen.Instance:
    """Graph and start valuation of one trial.

    Graph kinds: ``erdos_renyi`` (n, p, directed), ``barabasi_albert`` (n, m),
    ``family`` (family, n), ``edge_list`` (path, directed, repair),
    ``dataset`` (name, repair) and the fixed instances ``binomial``,
    ``gamblers_ruin``, ``prime_flower``, ``bipartite_worst``,
    ``nonbipartite_worst``, ``two_cycle``, ``four_class``, ``motivating_lb``.
    Valuation kinds: ``instance``, ``unique_max`` (node: id, ``random`` or
    ``largest_scc``), ``random`` (low, high), ``permutation``, ``gap`` (q).
    """
    rng = gen.make_rng(seed)
    graph, own = _build_graph(config.graph, config.model, rng)
    values = _build_valuation(config.valuation, graph, own, rng)
    return gen.Instance(graph, values, config.graph["kind"], seed)


# Trials and reports -------------------------------------------------------------


@dataclass(frozen=True)
class TrialRow:
    trial: int
    seed: int
    conv_time: int | None
    height: int | None
    width: float | None
    period: int | None
    final_ratio: float | None
    capped: bool


def _run_one(config: ExperimentConfig, index: int) -> TrialRow:
    seed = gen.trial_seed(config.base_seed, index)
    inst = build_instance(config, seed)
    rng = gen.make_rng(gen.trial_seed(seed, 1))
    if config.model == "lb":
        stats = lb_simulate(inst.graph, inst.valuation, rng, config.max_steps)
        width = float(stats.width) if stats.width is not None else None
        period = predict_period(predict_final(inst.graph, inst.valuation))
        return TrialRow(index, seed, stats.convergence_time, stats.height, width, period, None, stats.capped)
    if config.model == "sync-max":
        traj = detect_convergence(inst.graph, inst.valuation, config.max_steps)
        return TrialRow(index, seed, traj.convergence_time, None, None, traj.period, None, traj.capped)
    res = async_simulate(inst.graph, inst.valuation, rng, config.max_steps)
    return TrialRow(index, seed, res.convergence_time, None, None, None, res.final_value_ratio, res.capped)


def _run_chunk(args: tuple[ExperimentConfig, Sequence[int]]) -> list[TrialRow]:
    config, indices = args
    return [_run_one(config, i) for i in indices]


def check_config(config: ExperimentConfig) -> None:
    """Build trial 0 and check the model's structural preconditions up front."""
    inst = build_instance(config, gen.trial_seed(config.base_seed, 0))
    if config.model == "lb" and inst.graph.directed:
        raise ConfigError("load balancing needs an undirected graph")
    if config.model != "lb":
        try:
            require_out_edges(inst.graph)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


METRICS = ("conv_time", "height", "width", "period", "final_ratio", "capped")


@dataclass(frozen=True)
class ExperimentReport:
    config: ExperimentConfig
    rows: tuple[TrialRow, ...]

    def column(self, name: str) -> list[float]:
        return [float(getattr(r, name)) for r in self.rows if getattr(r, name) is not None]

    @property
    def means(self) -> dict[str, float | None]:
        # fsum keeps the mean independent of summation order, so it can be
        # recomputed exactly from the CSV
        return {m: (math.fsum(c) / len(c) if (c := self.column(m)) else None) for m in METRICS}

    @property
    def stdevs(self) -> dict[str, float | None]:
        out: dict[str, float | None] = {}
        for m in METRICS:
            c = self.column(m)
            out[m] = statistics.stdev(c) if len(c) > 1 else (0.0 if c else None)
        return out

    def summary(self) -> dict[str, Any]:
        return {"trials": len(self.rows), "mean": self.means, "stdev": self.stdevs}


def run_trials(config: ExperimentConfig, workers: int = 1) -> ExperimentReport:
    check_config(config)
    indices = list(range(config.trials))
    if workers <= 1:
        rows = _run_chunk((config, indices))
    else:
        chunks = [indices[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, [(config, c) for c in chunks]))
        rows = sorted((r for part in parts for r in part), key=lambda r: r.trial)
    return ExperimentReport(config, tuple(rows))


def _cell(x: Any) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(int(x))
    return repr(float(x)) if isinstance(x, float) else str(x)


def report_lines(report: ExperimentReport) -> list[str]:
    lines = [",".join(CSV_HEADER)]
    for r in report.rows:
        lines.append(",".join(_cell(getattr(r, h)) for h in CSV_HEADER))
    means = report.means
    lines.append(",".join(["aggregate", str(len(report.rows))] + [_cell(means[m]) for m in METRICS]))
    return lines


def emit_report(report: ExperimentReport, path: str | os.PathLike) -> None:
    """Write the per-trial CSV; the last row holds the column means."""
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(report_lines(report)) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc


def read_report(path: str | os.PathLike) -> tuple[list[dict[str, str]], dict[str, str]]:
    """Parse an emitted CSV into trial rows and the aggregate row."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    return rows[:-1], rows[-1]
