"""Random graph models, theory-driven worst cases and initial valuations.

Every random function takes an integer seed and draws from a numpy PCG64
generator, so a fixed seed reproduces the same output on every platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .graph import Graph, Valuation, check_valuation, component_labels

# binomial(n) is a complete graph on 2^n nodes, so its edge count grows as 4^n
BINOMIAL_LIMIT = 12
FLOWER_NODE_LIMIT = 100_000


class ResourceLimitError(ValueError):
    """An instance would exceed a configured size guard."""


class GenerationError(RuntimeError):
    """A rejection-sampling loop ran out of retries."""


@dataclass(frozen=True)
class Instance:
    graph: Graph
    valuation: Valuation
    label: str
    seed: int | None = None

    def __post_init__(self):
        check_valuation(self.graph, self.valuation)


@dataclass(frozen=True)
class GapTarget:
    q: int
    relative_tolerance: float
    chosen_k: int
    chosen_b: int

    @property
    def expected_gap(self) -> float:
        return self.chosen_k * self.chosen_b * (self.chosen_b + 1) / 6


def make_rng(seed: int | np.random.Generator) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(int(seed) & 0xFFFF_FFFF_FFFF_FFFF)


def trial_seed(base_seed: int, index: int) -> int:
    """Independent 64-bit seed for trial ``index`` of a run seeded ``base_seed``."""
    mask = 0xFFFF_FFFF_FFFF_FFFF
    ss = np.random.SeedSequence([int(base_seed) & mask, int(index) & mask])
    return int(ss.generate_state(1, np.uint64)[0])


# Random models ---------------------------------------------------------------


def erdos_renyi(n: int, p: float, directed: bool = False, seed: int | np.random.Generator = 0) -> Graph:
    """G(n, p): every unordered pair (or ordered pair if directed) kept with probability p."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p} is not a probability")
    rng = make_rng(seed)
    if directed:
        rows, cols = np.nonzero(~np.eye(n, dtype=bool))
    else:
        rows, cols = np.triu_indices(n, k=1)
    keep = rng.random(rows.size) < p
    return Graph(n, zip(rows[keep].tolist(), cols[keep].tolist()), directed=directed)


def barabasi_albert(n: int, m: int, seed: int | np.random.Generator = 0) -> Graph:
    """Preferential attachment with ``m(n - m)`` edges.

    Starts from ``m`` isolated nodes; each later node links to ``m`` distinct
    earlier nodes chosen with probability proportional to degree, counting an
    isolated node as degree 1.
    """
    if not 1 <= m < n:
        raise ValueError(f"need 1 <= m < n, got m={m}, n={n}")
    rng = make_rng(seed)
    degree = np.zeros(n, dtype=np.float64)
    edges: list[tuple[int, int]] = []
    for v in range(m, n):
        weights = np.maximum(degree[:v], 1.0)
        targets = rng.choice(v, size=m, replace=False, p=weights / weights.sum())
        for u in targets.tolist():
            edges.append((u, v))
        degree[targets] += 1
        degree[v] += m
    return Graph(n, edges)


def fit_ba_m(n: int, edge_count: int) -> float:
    """Real ``m`` solving ``m(n - m) = edge_count`` (smaller root)."""
    disc = n * n - 4 * edge_count
    if disc < 0:
        raise ValueError("no Barabási–Albert graph has that many edges")
    return (n - math.sqrt(disc)) / 2


def sample_until(
    factory: Callable[[np.random.Generator], Graph],
    accept: Callable[[Graph], bool],
    seed: int | np.random.Generator,
    max_retries: int = 1000,
) -> Graph:
    """Regenerate from one seeded stream until ``accept`` holds."""
    rng = make_rng(seed)
    for _ in range(max_retries):
        graph = factory(rng)
        if accept(graph):
            return graph
    raise GenerationError(f"no acceptable graph after {max_retries} attempts")


def has_min_outdegree(graph: Graph) -> bool:
    """Every node has at least one out-neighbour."""
    return all(graph.adjacency_out)


def is_connected(graph: Graph) -> bool:
    return graph.node_count > 0 and max(component_labels(graph)) == 0


def erdos_renyi_max_ready(
    n: int, p: float, directed: bool = False, seed: int | np.random.Generator = 0, max_retries: int = 1000
) -> Graph:
    """Erdős–Rényi graph regenerated until no node has out-degree 0."""
    return sample_until(lambda rng: erdos_renyi(n, p, directed, rng), has_min_outdegree, seed, max_retries)


def random_periodic_digraph(n: int, g: int, p: float, seed: int | np.random.Generator = 0) -> Graph:
    """Random strongly connected digraph whose cycle lengths are all multiples of g.

    Nodes get residues mod g, each residue used at least once. A closed walk
    that steps through the residues in order and visits every node keeps the
    graph strongly connected; every other edge from residue r to r + 1 is
    added with probability p.
    """
    if not 1 <= g <= n or n < 2:
        raise ValueError(f"need 2 <= n and 1 <= g <= n, got g={g}, n={n}")
    rng = make_rng(seed)
    residue = np.concatenate([np.arange(g), rng.integers(0, g, size=n - g)])
    rng.shuffle(residue)
    classes = [np.flatnonzero(residue == r).tolist() for r in range(g)]
    walk = [classes[r][i % len(classes[r])] for i in range(max(map(len, classes))) for r in range(g)]
    if g == 1:
        walk = classes[0]
    edges = {(walk[i], walk[(i + 1) % len(walk)]) for i in range(len(walk))}
    allowed = (residue[None, :] - residue[:, None]) % g == 1 % g
    np.fill_diagonal(allowed, False)
    rows, cols = np.nonzero(allowed & (rng.random((n, n)) < p))
    edges.update(zip(rows.tolist(), cols.tolist()))
    return Graph(n, sorted(edges), directed=True)


# Deterministic families ------------------------------------------------------

_MIN_SIZE = {
    "path": 2,
    "cycle": 3,
    "star": 3,
    "complete": 1,
    "bipartite_worst": 2,
    "nonbipartite_worst": 3,
}


def family_graph(kind: str, n: int) -> Graph:
    """Named undirected families.

    ``bipartite_worst`` is the path. ``nonbipartite_worst`` is a path
    ``0 - 1 - ... - (n-3)`` with a triangle ``(n-3, n-2, n-1)`` at its far end.
    """
    if kind not in _MIN_SIZE:
        raise ValueError(f"unknown family {kind!r}")
    if n < _MIN_SIZE[kind]:
        raise ValueError(f"{kind} needs n >= {_MIN_SIZE[kind]}, got {n}")
    if kind in ("path", "bipartite_worst"):
        edges = [(i, i + 1) for i in range(n - 1)]
    elif kind == "cycle":
        edges = [(i, (i + 1) % n) for i in range(n)]
    elif kind == "star":
        edges = [(0, i) for i in range(1, n)]
    elif kind == "complete":
        edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
    else:
        hinge = n - 3
        edges = [(i, i + 1) for i in range(hinge)]
        edges += [(hinge, n - 2), (hinge, n - 1), (n - 2, n - 1)]
    return Graph(n, edges)


def directed_cycle(n: int) -> Graph:
    return Graph(n, [(i, (i + 1) % n) for i in range(n)], directed=True)


def bipartite_worst_instance(n: int) -> Instance:
    """Path with a unique maximum at one end; the sync max model needs n - 2 steps."""
    graph = family_graph("bipartite_worst", n)
    return Instance(graph, unique_max_valuation(graph, 0), f"bipartite_worst({n})")


def nonbipartite_worst_instance(n: int, max_at: int = 1) -> Instance:
    """Triangle-tailed path with a unique maximum near the free end.

    With the maximum on node 1 the sync max model needs 2n - 5 steps. Putting
    it on the free end (``max_at=0``) needs 2n - 4.
    """
    graph = family_graph("nonbipartite_worst", n)
    return Instance(graph, unique_max_valuation(graph, max_at), f"nonbipartite_worst({n})")


def binomial_instance(n: int, limit: int = BINOMIAL_LIMIT) -> Instance:
    """Complete graph on 2^n nodes with C(n, k) copies of -n + 2k."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if n > limit:
        raise ResourceLimitError(f"binomial instance with 2^{n} nodes exceeds the limit 2^{limit}")
    values: list[int] = []
    for k in range(n + 1):
        values += [-n + 2 * k] * math.comb(n, k)
    return Instance(family_graph("complete", 2**n), tuple(values), f"binomial({n})")


def gamblers_ruin_instance(n: int) -> Instance:
    """Path of n nodes holding -1 and 1 at the two leaves and 0 inside."""
    if n < 2:
        raise ValueError("gambler's ruin needs n >= 2")
    values = [0] * n
    values[0], values[-1] = -1, 1
    return Instance(family_graph("path", n), tuple(values), f"gamblers_ruin({n})")


def unique_max_valuation(graph: Graph, node: int) -> Valuation:
    if not 0 <= node < graph.node_count:
        raise ValueError(f"node {node} not in graph of {graph.node_count} nodes")
    values = [0] * graph.node_count
    values[node] = 1
    return tuple(values)


def first_primes(k: int) -> list[int]:
    primes: list[int] = []
    candidate = 2
    while len(primes) < k:
        if all(candidate % p for p in primes if p * p <= candidate):
            primes.append(candidate)
        candidate += 1
    return primes


def prime_flower_instance(k: int, node_limit: int = FLOWER_NODE_LIMIT) -> Instance:
    """Hub 0 pointing into k disjoint directed cycles of the first k prime lengths.

    The hub's edge enters each cycle at the node at distance 1; the value p_i
    sits on that node's cycle predecessor, at distance p_i from the hub. The
    hub itself holds p_k so the start state is already on the limit cycle.
    """
    if k < 2:
        raise ValueError("prime flower needs k >= 2")
    primes = first_primes(k)
    total = 1 + sum(primes)
    if total > node_limit:
        raise ResourceLimitError(f"prime flower with {total} nodes exceeds the limit {node_limit}")
    edges: list[tuple[int, int]] = []
    values = [0] * total
    values[0] = primes[-1]
    start = 1
    for p in primes:
        edges.append((0, start))
        edges += [(start + j, start + (j + 1) % p) for j in range(p)]
        values[start + p - 1] = p
        start += p
    return Instance(Graph(total, edges, directed=True), tuple(values), f"prime_flower({k})")


def flower_entry_nodes(k: int) -> list[int]:
    """Node ids where the hub's edges enter each cycle of ``prime_flower_instance(k)``."""
    entries, start = [], 1
    for p in first_primes(k):
        entries.append(start)
        start += p
    return entries


# Square-sum gap targeting ----------------------------------------------------


def choose_gap_parameters(n: int, q: int) -> tuple[int, int]:
    """``(k, b)`` with ``k * b * (b + 1) / 6`` close to ``q`` and k as large as allowed.

    b is the nearest integer (at least 1) to the root of ``n b(b+1)/6 = q`` and
    ``k = min(n, round(6q / (b(b+1))))``.
    """
    if q < 0:
        raise ValueError("q must be non-negative")
    if q == 0 or n == 0:
        return 0, 0
    root = (-1 + math.sqrt(1 + 24 * q / n)) / 2
    b = max(1, round(root))
    k = min(n, round(6 * q / (b * (b + 1))))
    return k, b


def _final_square_sums(sums: np.ndarray, sizes: np.ndarray) -> np.ndarray:
    k = np.floor_divide(sums, sizes)
    r = sums - k * sizes
    return (r * (k + 1) ** 2 + (sizes - r) * k**2).sum(axis=-1)


def random_gap_valuation(
    graph: Graph,
    q: int,
    seed: int | np.random.Generator = 0,
    max_samples: int = 2_000_000,
    batch: int = 4096,
) -> tuple[Valuation, GapTarget]:
    """Random valuation whose square-sum gap hits ``q``.

    ``k`` random nodes get independent uniform values in ``[-b, b]`` and the
    rest get 0. Value draws are repeated until the realised gap equals ``q``
    exactly (q <= 10 000) or within 0.01% (larger q).
    """
    if q < 0:
        raise ValueError("q must be non-negative")
    n = graph.node_count
    k, b = choose_gap_parameters(n, q)
    tol = 0.0 if q <= 10_000 else 1e-4
    target = GapTarget(q, tol, k, b)
    if k == 0:
        return (0,) * n, target
    rng = make_rng(seed)
    chosen = np.sort(rng.choice(n, size=k, replace=False))
    labels = np.asarray(component_labels(graph))
    ncomp = int(labels.max()) + 1
    membership = np.zeros((k, ncomp), dtype=np.int64)
    membership[np.arange(k), labels[chosen]] = 1
    sizes = np.bincount(labels, minlength=ncomp).astype(np.int64)
    allowed = math.floor(q * tol)
    best_gap, drawn = None, 0
    while drawn < max_samples:
        draws = rng.integers(-b, b + 1, size=(batch, k), dtype=np.int64)
        sums = draws @ membership
        gaps = ((draws**2).sum(axis=1) - _final_square_sums(sums, sizes)) // 2
        hits = np.flatnonzero(np.abs(gaps - q) <= allowed)
        if hits.size:
            values = np.zeros(n, dtype=np.int64)
            values[chosen] = draws[hits[0]]
            return tuple(values.tolist()), target
        closest = int(gaps[np.argmin(np.abs(gaps - q))])
        if best_gap is None or abs(closest - q) < abs(best_gap - q):
            best_gap = closest
        drawn += batch
    raise GenerationError(
        f"no valuation with gap {q} (k={k}, b={b}) in {drawn} draws; closest gap was {best_gap}"
    )


# Small fixed instances -------------------------------------------------------


def example_digraph() -> Graph:
    """Seven-node digraph used to illustrate k-step neighbourhoods."""
    edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (5, 6), (6, 4)]
    return Graph(7, edges, directed=True)


def motivating_lb_instance(offset: int = 0) -> Instance:
    """Five-cycle holding 2, 6, 4, 5, 6; it settles on two 4s and three 5s with q = 5."""
    edges = [(0, 1), (1, 3), (0, 2), (3, 4), (2, 4)]
    values = tuple(v + offset for v in (2, 6, 4, 5, 6))
    return Instance(Graph(5, edges), values, "motivating_lb")


def two_cycle_instance() -> Instance:
    """A 6-cycle and a 3-cycle through node 0; sync max converges at t=7 with period 3."""
    edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (0, 6), (6, 7), (7, 0)]
    return Instance(Graph(8, edges, directed=True), (1, 3, 1, 2, 5, 6, 4, 6), "two_cycle")


def four_class_instance() -> Instance:
    """A 4-cycle and an 8-cycle through node 0 (g = 4) with class maxima 5, 6, 5, 3."""
    edges = [(0, 1), (1, 2), (2, 3), (3, 0)]
    ring = [0, 4, 5, 6, 7, 8, 9, 10]
    edges += [(ring[i], ring[(i + 1) % 8]) for i in range(8)]
    values = (5, 6, 5, 3, 2, 1, 2, 1, 0, 4, 1)
    return Instance(Graph(11, edges, directed=True), values, "four_class")


def shortcut_path(n: int = 5, shortcut: tuple[int, int] | None = (0, 3)) -> Graph:
    """Path of n nodes, optionally with one extra chord."""
    edges = [(i, i + 1) for i in range(n - 1)]
    if shortcut is not None:
        edges.append(shortcut)
    return Graph(n, edges)


def random_values(n: int, low: int, high: int, seed: int | np.random.Generator) -> Valuation:
    """n independent uniform integers in ``[low, high]``."""
    return tuple(make_rng(seed).integers(low, high + 1, size=n).tolist())


def permutation_values(n: int, seed: int | np.random.Generator) -> Valuation:
    """The labels 1..n in random order."""
    return tuple((make_rng(seed).permutation(n) + 1).tolist())
