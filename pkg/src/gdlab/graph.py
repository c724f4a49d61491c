"""Immutable graphs and the structural analyses the processes rely on.

Nodes are dense integers ``0..n-1``. Undirected graphs are stored as
symmetric directed graphs so the update engines only ever walk out-edges.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np

Valuation = tuple[int, ...]


class Graph:
    """Simple graph with ordered adjacency lists.

    Parameters
    ----------
    node_count : int
        Number of nodes.
    edges : iterable of (int, int)
        For undirected graphs each pair may be given once in either
        orientation; the reverse edge is added automatically.
    directed : bool
    allow_self_loops : bool
        Only honoured for directed graphs.

    Duplicate edges are rejected: the constructor raises ``ValueError`` rather
    than silently merging them. Use :func:`Graph.from_edges` with
    ``dedupe=True`` for raw input.
    """

    __slots__ = ("node_count", "directed", "adjacency_out", "_edge_total", "__dict__")

    def __init__(
        self,
        node_count: int,
        edges: Iterable[tuple[int, int]] = (),
        directed: bool = False,
        allow_self_loops: bool = False,
    ):
        if node_count < 0:
            raise ValueError("node_count must be non-negative")
        if allow_self_loops and not directed:
            raise ValueError("self-loops are not allowed in undirected graphs")
        out: list[list[int]] = [[] for _ in range(node_count)]
        seen: set[tuple[int, int]] = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if not (0 <= u < node_count and 0 <= v < node_count):
                raise ValueError(f"edge ({u}, {v}) has an endpoint outside 0..{node_count - 1}")
            if u == v and not allow_self_loops:
                raise ValueError(f"self-loop at node {u}")
            pairs = [(u, v)] if directed or u == v else [(u, v), (v, u)]
            for a, b in pairs:
                if (a, b) in seen:
                    raise ValueError(f"duplicate edge ({a}, {b})")
                seen.add((a, b))
                out[a].append(b)
        self.node_count = node_count
        self.directed = directed
        self.adjacency_out: tuple[tuple[int, ...], ...] = tuple(tuple(a) for a in out)
        self._edge_total = len(seen)

    @classmethod
    def from_edges(
        cls,
        node_count: int,
        edges: Iterable[tuple[int, int]],
        directed: bool = False,
        allow_self_loops: bool = False,
        dedupe: bool = True,
    ) -> "Graph":
        if not dedupe:
            return cls(node_count, edges, directed, allow_self_loops)
        kept: list[tuple[int, int]] = []
        seen: set[tuple[int, int]] = set()
        for u, v in edges:
            key = (u, v) if directed else (min(u, v), max(u, v))
            if key not in seen:
                seen.add(key)
                kept.append((u, v))
        return cls(node_count, kept, directed, allow_self_loops)

    @property
    def edge_count(self) -> int:
        """Directed edge count, or unordered pair count for undirected graphs."""
        return self._edge_total if self.directed else self._edge_total // 2

    @cached_property
    def adjacency_in(self) -> tuple[tuple[int, ...], ...]:
        inn: list[list[int]] = [[] for _ in range(self.node_count)]
        for u, outs in enumerate(self.adjacency_out):
            for v in outs:
                inn[v].append(u)
        return tuple(tuple(a) for a in inn)

    @cached_property
    def edge_list(self) -> tuple[tuple[int, int], ...]:
        """Directed edges, or ``u < v`` pairs for undirected graphs."""
        if self.directed:
            return tuple((u, v) for u, outs in enumerate(self.adjacency_out) for v in outs)
        return tuple((u, v) for u, outs in enumerate(self.adjacency_out) for v in outs if u < v)

    @cached_property
    def arcs(self) -> tuple[tuple[int, int], ...]:
        """Every directed pair (u, v) with v an out-neighbour of u; both orientations when undirected."""
        return tuple((u, v) for u, outs in enumerate(self.adjacency_out) for v in outs)

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """``(indptr, indices)`` arrays of the out-adjacency."""
        degrees = np.fromiter((len(a) for a in self.adjacency_out), dtype=np.int64, count=self.node_count)
        indptr = np.zeros(self.node_count + 1, dtype=np.int64)
        np.cumsum(degrees, out=indptr[1:])
        indices = np.fromiter(
            (v for outs in self.adjacency_out for v in outs), dtype=np.int64, count=int(indptr[-1])
        )
        return indptr, indices

    @cached_property
    def _edge_set(self) -> frozenset[tuple[int, int]]:
        return frozenset(self.arcs)

    def has_edge(self, u: int, v: int) -> bool:
        return (u, v) in self._edge_set

    def out_degree(self, v: int) -> int:
        return len(self.adjacency_out[v])

    def in_degree(self, v: int) -> int:
        return len(self.adjacency_in[v])

    @property
    def has_self_loops(self) -> bool:
        return any(v in outs for v, outs in enumerate(self.adjacency_out))

    def induced_subgraph(self, keep: Sequence[int]) -> "Graph":
        """Subgraph on ``keep`` relabelled to ``0..len(keep)-1`` in the given order."""
        index = {v: i for i, v in enumerate(keep)}
        edges = [(index[u], index[v]) for u in keep for v in self.adjacency_out[u] if v in index]
        if not self.directed:
            edges = [(a, b) for a, b in edges if a <= b]
        return Graph(len(keep), edges, self.directed, allow_self_loops=self.directed)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.node_count == other.node_count
            and self.directed == other.directed
            and self._edge_set == other._edge_set
        )

    def __hash__(self) -> int:
        return hash((self.node_count, self.directed, self._edge_set))

    def __repr__(self) -> str:
        kind = "directed" if self.directed else "undirected"
        return f"Graph(n={self.node_count}, m={self.edge_count}, {kind})"


def check_valuation(graph: Graph, values: Sequence[int]) -> Valuation:
    if len(values) != graph.node_count:
        raise ValueError(f"valuation has {len(values)} entries, graph has {graph.node_count} nodes")
    return tuple(int(x) for x in values)


def _check_node(graph: Graph, v: int) -> None:
    if not 0 <= v < graph.node_count:
        raise ValueError(f"node {v} not in graph of {graph.node_count} nodes")


def neighborhood(graph: Graph, v: int, k: int) -> set[int]:
    """Nodes reachable from ``v`` by a walk of exactly ``k`` edges."""
    _check_node(graph, v)
    if k < 0:
        raise ValueError("k must be non-negative")
    frontier = {v}
    for _ in range(k):
        frontier = {w for u in frontier for w in graph.adjacency_out[u]}
        if not frontier:
            break
    return frontier


def bfs_distances(graph: Graph, source: int) -> list[int | None]:
    """Out-edge BFS distances; ``None`` marks unreachable nodes."""
    dist: list[int | None] = [None] * graph.node_count
    dist[source] = 0
    queue = deque([source])
    adj = graph.adjacency_out
    while queue:
        u = queue.popleft()
        du = dist[u] + 1
        for w in adj[u]:
            if dist[w] is None:
                dist[w] = du
                queue.append(w)
    return dist


def shortest_distance(graph: Graph, u: int, v: int) -> int | None:
    """Length of a shortest ``u -> v`` path, or ``None`` when unreachable."""
    _check_node(graph, u)
    _check_node(graph, v)
    return bfs_distances(graph, u)[v]


class Diameter(NamedTuple):
    value: int
    exact: bool
    sources: int


def diameter(graph: Graph, samples: int | None = None, seed: int = 0) -> Diameter:
    """Longest finite shortest-path distance.

    With ``samples`` set, BFS runs from that many seeded random sources only
    and the result is a lower bound (``exact=False``).
    """
    if graph.node_count == 0:
        raise ValueError("diameter of an empty graph is undefined")
    if samples is None or samples >= graph.node_count:
        sources: Sequence[int] = range(graph.node_count)
        exact = True
    else:
        sources = random.Random(seed).sample(range(graph.node_count), samples)
        exact = False
    best = 0
    for s in sources:
        best = max(best, max(d for d in bfs_distances(graph, s) if d is not None))
    return Diameter(best, exact, len(sources))


def connected_components(graph: Graph) -> list[list[int]]:
    """Weakly connected components, each sorted, ordered by smallest member."""
    parent = list(range(graph.node_count))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, outs in enumerate(graph.adjacency_out):
        for v in outs:
            ru, rv = find(u), find(v)
            if ru != rv:
                parent[max(ru, rv)] = min(ru, rv)
    groups: dict[int, list[int]] = {}
    for v in range(graph.node_count):
        groups.setdefault(find(v), []).append(v)
    return list(groups.values())


def component_labels(graph: Graph) -> list[int]:
    labels = [0] * graph.node_count
    for i, members in enumerate(connected_components(graph)):
        for v in members:
            labels[v] = i
    return labels


@dataclass(frozen=True)
class SccDecomposition:
    component_id: tuple[int, ...]
    component_members: tuple[tuple[int, ...], ...]
    condensation_edges: frozenset[tuple[int, int]]
    topological_order: tuple[int, ...]

    @property
    def count(self) -> int:
        return len(self.component_members)

    def sinks(self) -> list[int]:
        """Components with no edge leaving them."""
        has_exit = {a for a, _ in self.condensation_edges}
        return [c for c in range(self.count) if c not in has_exit]

    def largest(self) -> tuple[int, ...]:
        return max(self.component_members, key=lambda m: (len(m), -m[0]))


def scc_decompose(graph: Graph) -> SccDecomposition:
    """Tarjan's algorithm, iterative so deep graphs do not hit the recursion limit.

    Components are numbered in the order Tarjan completes them, which is a
    reverse topological order of the condensation; ``topological_order``
    lists them source-side first.
    """
    n = graph.node_count
    adj = graph.adjacency_out
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    comp = [-1] * n
    stack: list[int] = []
    members: list[tuple[int, ...]] = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, i = work[-1]
            outs = adj[v]
            if i < len(outs):
                work[-1] = (v, i + 1)
                w = outs[i]
                if index[w] == -1:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, 0))
                elif on_stack[w]:
                    low[v] = min(low[v], index[w])
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                group = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp[w] = len(members)
                    group.append(w)
                    if w == v:
                        break
                members.append(tuple(sorted(group)))
    cond = frozenset(
        (comp[u], comp[v]) for u in range(n) for v in adj[u] if comp[u] != comp[v]
    )
    order = tuple(range(len(members) - 1, -1, -1))
    return SccDecomposition(tuple(comp), tuple(members), cond, order)


def is_strongly_connected(graph: Graph) -> bool:
    if graph.node_count == 0:
        return False
    return scc_decompose(graph).count == 1


@dataclass(frozen=True)
class BfsLayering:
    source: int
    layer_of: tuple[int | None, ...]
    layers: tuple[frozenset[int], ...]
    intra_layer_edge: tuple[int, int] | None
    bipartite: bool

    @property
    def sides(self) -> tuple[frozenset[int], frozenset[int]]:
        """Even and odd layers; the two colour classes when bipartite."""
        even = frozenset(v for i, layer in enumerate(self.layers) if i % 2 == 0 for v in layer)
        odd = frozenset(v for i, layer in enumerate(self.layers) if i % 2 == 1 for v in layer)
        return even, odd


def bfs_layering(graph: Graph, source: int, strict: bool = False) -> BfsLayering:
    """Distance layers from ``source`` and an odd-cycle witness if one exists.

    Only the source's component is layered; with ``strict`` a disconnected
    graph is an error.
    """
    _check_node(graph, source)
    if graph.directed:
        raise ValueError("bfs_layering expects an undirected graph")
    dist = bfs_distances(graph, source)
    if strict and any(d is None for d in dist):
        raise ValueError("graph is disconnected; layer each component separately")
    depth = max(d for d in dist if d is not None)
    layers: list[set[int]] = [set() for _ in range(depth + 1)]
    for v, d in enumerate(dist):
        if d is not None:
            layers[d].add(v)
    witness = None
    for u, v in graph.edge_list:
        if dist[u] is not None and dist[u] == dist[v]:
            witness = (u, v)
            break
    return BfsLayering(
        source, tuple(dist), tuple(frozenset(l) for l in layers), witness, witness is None
    )


def valuations_isomorphic(graph: Graph, a: Sequence[int], b: Sequence[int]) -> bool:
    """True iff every connected component carries the same value multiset."""
    a = check_valuation(graph, a)
    b = check_valuation(graph, b)
    for members in connected_components(graph):
        if sorted(a[v] for v in members) != sorted(b[v] for v in members):
            return False
    return True


def repair_outdegree(graph: Graph) -> tuple[Graph, list[int]]:
    """Repeatedly delete out-degree-0 nodes.

    Returns the relabelled survivor graph and the removed original ids in
    removal order. Survivors keep their relative order.
    """
    out_deg = [len(a) for a in graph.adjacency_out]
    alive = [True] * graph.node_count
    queue = deque(v for v in range(graph.node_count) if out_deg[v] == 0)
    removed: list[int] = []
    inn = graph.adjacency_in
    while queue:
        v = queue.popleft()
        if not alive[v]:
            continue
        alive[v] = False
        removed.append(v)
        for u in inn[v]:
            if alive[u]:
                out_deg[u] -= 1
                if out_deg[u] == 0:
                    queue.append(u)
    if not removed:
        return graph, []
    keep = [v for v in range(graph.node_count) if alive[v]]
    return graph.induced_subgraph(keep), removed
