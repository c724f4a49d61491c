"""Maximum model: every node replaces its value with the largest value among its out-neighbours.

The synchronous variant updates all nodes in lockstep and is deterministic,
so each run has a convergence time and a period. Those are measured by cycle
detection and predicted in closed form for undirected and strongly connected
graphs. The asynchronous variant updates one random node per step.
"""

from __future__ import annotations

import hashlib
import math
from collections import Counter
from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from .generators import make_rng
from .graph import (
    Graph,
    Valuation,
    bfs_distances,
    bfs_layering,
    check_valuation,
    connected_components,
    diameter,
    neighborhood,
    scc_decompose,
)

DEFAULT_MAX_STEPS = 1_000_000


class PreconditionError(ValueError):
    """The graph does not meet a model's structural requirement."""


def require_out_edges(graph: Graph) -> None:
    for v, outs in enumerate(graph.adjacency_out):
        if not outs:
            raise PreconditionError(f"node {v} has no out-neighbours")


def _csr_step(indptr: np.ndarray, indices: np.ndarray, f: np.ndarray) -> np.ndarray:
    return np.maximum.reduceat(f[indices], indptr[:-1])


def sync_step(graph: Graph, f: Sequence[int]) -> Valuation:
    """One synchronous round; a node's own value is discarded."""
    require_out_edges(graph)
    f = check_valuation(graph, f)
    indptr, indices = graph.csr
    return tuple(_csr_step(indptr, indices, np.asarray(f, dtype=np.int64)).tolist())


def k_step_max(graph: Graph, f: Sequence[int], v: int, k: int) -> int:
    """Value of ``v`` after k synchronous rounds: the max of f over walks of length k from v."""
    require_out_edges(graph)
    f = check_valuation(graph, f)
    return max(f[w] for w in neighborhood(graph, v, k))


@dataclass(frozen=True)
class MaxTrajectory:
    """Tail length and period of a synchronous run.

    ``limit_cycle[i]`` is the valuation at time ``convergence_time + i``. When
    ``capped`` is set no repeat was seen and the other fields are ``None``.
    """

    convergence_time: int | None
    period: int | None
    limit_cycle: tuple[Valuation, ...]
    capped: bool = False

    def valuation_at(self, t: int) -> Valuation:
        """Valuation at any time at or after convergence."""
        if self.capped or t < self.convergence_time:
            raise ValueError("only times on the limit cycle are stored")
        return self.limit_cycle[(t - self.convergence_time) % self.period]


def _fingerprint(arr: np.ndarray) -> bytes:
    return hashlib.blake2b(arr.tobytes(), digest_size=16).digest()


def detect_convergence(graph: Graph, f0: Sequence[int], max_steps: int = DEFAULT_MAX_STEPS) -> MaxTrajectory:
    """Step synchronously until a valuation repeats.

    States are keyed by a 128-bit hash and confirmed by full comparison, so a
    hash collision can never merge two different states.
    """
    require_out_edges(graph)
    f = np.asarray(check_valuation(graph, f0), dtype=np.int64)
    indptr, indices = graph.csr
    seen: dict[bytes, list[int]] = {}
    history: list[np.ndarray] = []
    for t in range(max_steps + 1):
        key = _fingerprint(f)
        for earlier in seen.get(key, ()):
            if np.array_equal(history[earlier], f):
                cycle = tuple(tuple(h.tolist()) for h in history[earlier:])
                return MaxTrajectory(earlier, t - earlier, cycle)
        seen.setdefault(key, []).append(t)
        history.append(f)
        f = _csr_step(indptr, indices, f)
    return MaxTrajectory(None, None, (), capped=True)


def local_period(trajectory: MaxTrajectory, v: int) -> int:
    """Smallest p with f_{t+p}(v) = f_t(v) along the limit cycle."""
    return rotation_period([state[v] for state in trajectory.limit_cycle])


# Strongly connected digraphs ---------------------------------------------------


def _require_strongly_connected(graph: Graph) -> None:
    if graph.node_count == 0 or scc_decompose(graph).count != 1:
        raise PreconditionError("graph is not strongly connected")
    if not graph.edge_list:
        raise PreconditionError("graph has no cycles")


def cycle_gcd(graph: Graph) -> int:
    """gcd of all cycle lengths, from one BFS.

    With BFS depths d, every edge (u, v) closes cycles whose lengths differ by
    d(u) + 1 - d(v), and those differences generate the same gcd as the cycles.
    """
    _require_strongly_connected(graph)
    dist = bfs_distances(graph, 0)
    return reduce(math.gcd, (abs(dist[u] + 1 - dist[v]) for u, v in graph.arcs), 0)


@dataclass(frozen=True)
class ClassColoring:
    """Residue classes of BFS depth modulo g; every edge goes from class r to r + 1."""

    g: int
    class_of: tuple[int, ...]
    class_members: tuple[frozenset[int], ...]
    class_max: tuple[int, ...]

    def successor_ok(self, graph: Graph) -> bool:
        return all(self.class_of[v] == (self.class_of[u] + 1) % self.g for u, v in graph.arcs)


def class_coloring(graph: Graph, f0: Sequence[int], root: int = 0) -> ClassColoring:
    f0 = check_valuation(graph, f0)
    g = cycle_gcd(graph)
    dist = bfs_distances(graph, root)
    class_of = tuple(d % g for d in dist)
    members = tuple(frozenset(v for v in range(graph.node_count) if class_of[v] == r) for r in range(g))
    class_max = tuple(max(f0[v] for v in m) for m in members)
    return ClassColoring(g, class_of, members, class_max)


def rotation_period(seq: Sequence[int]) -> int:
    """Smallest p dividing len(seq) with seq invariant under rotation by p."""
    n = len(seq)
    return next(p for p in range(1, n + 1) if n % p == 0 and all(seq[i] == seq[(i + p) % n] for i in range(n)))


@dataclass(frozen=True)
class StronglyConnectedPrediction:
    period: int
    coloring: ClassColoring

    def valuation_at(self, t: int) -> Valuation:
        """Stabilised valuation at time t: node u holds the max of class (class(u) + t) mod g."""
        c = self.coloring
        return tuple(c.class_max[(c.class_of[u] + t) % c.g] for u in range(len(c.class_of)))


def predict_strongly_connected(graph: Graph, f0: Sequence[int]) -> StronglyConnectedPrediction:
    """Limit schedule and period of the sync max model on a strongly connected digraph."""
    coloring = class_coloring(graph, f0)
    return StronglyConnectedPrediction(rotation_period(coloring.class_max), coloring)


def construct_period_valuation(graph: Graph, p: int) -> Valuation:
    """Start state that is already periodic with period exactly p (p must divide g)."""
    g = cycle_gcd(graph)
    if p < 1 or g % p:
        raise ValueError(f"p={p} does not divide the cycle gcd {g}")
    dist = bfs_distances(graph, 0)
    return tuple((d % g) % p for d in dist)


# Undirected graphs -------------------------------------------------------------


@dataclass(frozen=True)
class ComponentLimit:
    members: tuple[int, ...]
    bipartite: bool
    side_a: frozenset[int]
    side_b: frozenset[int]
    max_a: int
    max_b: int

    @property
    def period(self) -> int:
        return 2 if self.bipartite and self.max_a != self.max_b else 1


@dataclass(frozen=True)
class UndirectedPrediction:
    """Per-component limits; ``bound`` is twice the largest component diameter."""

    components: tuple[ComponentLimit, ...]
    bound: int

    @property
    def period(self) -> int:
        return max(c.period for c in self.components)

    def valuation_at(self, t: int, n: int) -> Valuation:
        """Stabilised valuation at time t (t past convergence)."""
        out = [0] * n
        for c in self.components:
            for v in c.members:
                if not c.bipartite:
                    out[v] = c.max_a
                else:
                    own, other = (c.max_a, c.max_b) if v in c.side_a else (c.max_b, c.max_a)
                    out[v] = own if t % 2 == 0 else other
        return tuple(out)


def predict_undirected(graph: Graph, f0: Sequence[int]) -> UndirectedPrediction:
    """Period and limit of the sync max model on an undirected graph.

    A non-bipartite component settles on its maximum. A bipartite component
    with sides B and B' settles on period 2 exactly when max(B) != max(B').
    """
    if graph.directed:
        raise PreconditionError("predict_undirected expects an undirected graph")
    require_out_edges(graph)
    f0 = check_valuation(graph, f0)
    parts = []
    for members in connected_components(graph):
        layering = bfs_layering(graph, members[0])
        if layering.bipartite:
            a, b = layering.sides
            parts.append(ComponentLimit(tuple(members), True, a, b, max(f0[v] for v in a), max(f0[v] for v in b)))
        else:
            top = max(f0[v] for v in members)
            parts.append(ComponentLimit(tuple(members), False, frozenset(members), frozenset(), top, top))
    return UndirectedPrediction(tuple(parts), 2 * diameter(graph).value)


# Asynchronous model -------------------------------------------------------------


@dataclass(frozen=True)
class AsyncResult:
    convergence_time: int
    final: Valuation
    final_value_ratio: float | None
    capped: bool


def async_simulate(
    graph: Graph,
    f0: Sequence[int],
    seed: int | np.random.Generator = 0,
    max_steps: int = DEFAULT_MAX_STEPS,
    stop: str = "auto",
    chunk: int = 8192,
) -> AsyncResult:
    """One uniformly random node updates per step until nothing can change.

    ``stop="counter"`` tracks how many nodes differ from their out-neighbour
    maximum. ``stop="equal"`` stops when all values agree, which is the same
    moment on a strongly connected graph. ``"auto"`` picks ``"equal"`` for
    strongly connected graphs. ``final_value_ratio`` is the largest final
    value on the largest SCC divided by the initial maximum.
    """
    require_out_edges(graph)
    values = list(check_valuation(graph, f0))
    n = graph.node_count
    scc = scc_decompose(graph)
    if stop == "auto":
        stop = "equal" if scc.count == 1 else "counter"
    if stop not in ("equal", "counter"):
        raise ValueError(f"unknown stop rule {stop!r}")
    out, inn = graph.adjacency_out, graph.adjacency_in
    rng = make_rng(seed)

    if stop == "equal":
        hist = Counter(values)

        def done() -> bool:
            return len(hist) == 1
    else:
        unstable = [values[v] != max(values[w] for w in out[v]) for v in range(n)]
        count = [sum(unstable)]

        def done() -> bool:
            return count[0] == 0

    t = 0
    finished = done()
    while not finished and t < max_steps:
        for v in rng.integers(0, n, size=min(chunk, max_steps - t)).tolist():
            t += 1
            new = max(values[w] for w in out[v])
            old = values[v]
            if new != old:
                values[v] = new
                if stop == "equal":
                    hist[old] -= 1
                    if not hist[old]:
                        del hist[old]
                    hist[new] += 1
                else:
                    for u in (v, *inn[v]):
                        now = values[u] != max(values[w] for w in out[u])
                        if now != unstable[u]:
                            unstable[u] = now
                            count[0] += 1 if now else -1
                if done():
                    finished = True
                    break
    top = max(f0)
    reached = max(values[v] for v in scc.largest())
    ratio = reached / top if top > 0 else None
    return AsyncResult(t, tuple(values), ratio, not finished)
