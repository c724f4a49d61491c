"""Exact analysis of small instances through their Markov chain of valuations.

Every reachable valuation becomes a state, transitions carry exact rational
probabilities, and absorbing classes are the sink components of the chain.
Absorption probabilities and expected absorption times are solved with
rational Gaussian elimination one condensation block at a time, sinks first.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .generators import ResourceLimitError
from .graph import Graph, check_valuation, scc_decompose

DEFAULT_STATE_LIMIT = 200_000
MODELS = ("lb", "sync", "async")


@dataclass(frozen=True)
class ValuationChain:
    states: tuple[tuple[int, ...], ...]
    index_of: dict[tuple[int, ...], int]
    transitions: tuple[tuple[tuple[int, Fraction], ...], ...]
    start: int
    model: str

    @property
    def deterministic(self) -> bool:
        return self.model == "sync"

    def as_graph(self) -> Graph:
        edges = [(s, t) for s, row in enumerate(self.transitions) for t, _ in row]
        return Graph(len(self.states), edges, directed=True, allow_self_loops=True)


def _lb_successors(graph: Graph, frozen: frozenset[int]):
    edges = graph.edge_list
    p = Fraction(1, len(edges)) if edges else Fraction(1)

    def successors(state: tuple[int, ...]) -> Iterable[tuple[tuple[int, ...], Fraction]]:
        if not edges:
            yield state, p
            return
        for u, v in edges:
            a, b = state[u], state[v]
            if abs(a - b) <= 1:
                if u in frozen or v in frozen:
                    yield state, p
                    continue
                na, nb = b, a
            else:
                step = 1 if a < b else -1
                na, nb = a + step, b - step
            nxt = list(state)
            nxt[u], nxt[v] = na, nb
            yield tuple(nxt), p

    return successors


def _sync_successors(graph: Graph):
    out = graph.adjacency_out

    def successors(state):
        yield tuple(max(state[w] for w in out[v]) for v in range(len(state))), Fraction(1)

    return successors


def _async_successors(graph: Graph):
    out = graph.adjacency_out
    p = Fraction(1, graph.node_count)

    def successors(state):
        for v in range(len(state)):
            nxt = list(state)
            nxt[v] = max(state[w] for w in out[v])
            yield tuple(nxt), p

    return successors


def enumerate_chain(
    graph: Graph,
    f0: Sequence[int],
    model: str = "lb",
    state_limit: int = DEFAULT_STATE_LIMIT,
    frozen: Iterable[int] = (),
) -> ValuationChain:
    """Breadth-first enumeration of every valuation reachable from ``f0``.

    ``model`` is ``"lb"`` (uniform random edge, symmetric load balancing),
    ``"sync"`` (synchronous max) or ``"async"`` (uniform random node, max).
    Nodes in ``frozen`` refuse swap updates but still take part in shrinks;
    freezing one leaf of a path turns the two-sided gambler's ruin into the
    one-sided walk.
    """
    start = check_valuation(graph, f0)
    if model == "lb":
        if graph.directed:
            raise ValueError("load balancing needs an undirected graph")
        successors = _lb_successors(graph, frozenset(frozen))
    elif model in ("sync", "async"):
        if frozen:
            raise ValueError("frozen nodes only apply to load balancing")
        for v, outs in enumerate(graph.adjacency_out):
            if not outs:
                raise ValueError(f"node {v} has no out-neighbours")
        successors = _sync_successors(graph) if model == "sync" else _async_successors(graph)
    else:
        raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")
    states = [start]
    index_of = {start: 0}
    transitions: list[tuple[tuple[int, Fraction], ...]] = []
    queue = deque([0])
    while queue:
        s = queue.popleft()
        row: dict[int, Fraction] = {}
        for nxt, p in successors(states[s]):
            t = index_of.get(nxt)
            if t is None:
                if len(states) >= state_limit:
                    raise ResourceLimitError(f"chain exceeds {state_limit} states ({len(states)} found so far)")
                t = index_of[nxt] = len(states)
                states.append(nxt)
                queue.append(t)
            row[t] = row.get(t, 0) + p
        while len(transitions) <= s:
            transitions.append(())
        transitions[s] = tuple(sorted(row.items()))
    return ValuationChain(tuple(states), index_of, tuple(transitions), 0, model)


# Exact linear algebra -----------------------------------------------------------


def solve_exact(a: list[list[Fraction]], b: list[list[Fraction]]) -> list[list[Fraction]]:
    """Solve ``a x = b`` over the rationals (``b`` may have several columns)."""
    n = len(a)
    cols = len(b[0]) if b else 0
    rows = [list(map(Fraction, a[i])) + list(map(Fraction, b[i])) for i in range(n)]
    for c in range(n):
        pivot = next((r for r in range(c, n) if rows[r][c] != 0), None)
        if pivot is None:
            raise ZeroDivisionError("singular system")
        rows[c], rows[pivot] = rows[pivot], rows[c]
        inv = 1 / rows[c][c]
        pr = rows[c] = [x * inv for x in rows[c]]
        for r in range(n):
            if r != c and rows[r][c] != 0:
                factor = rows[r][c]
                rr = rows[r]
                for j in range(c, n + cols):
                    if pr[j]:
                        rr[j] -= factor * pr[j]
    return [row[n:] for row in rows]


@dataclass(frozen=True)
class AbsorptionReport:
    """Sink classes of a chain and how the start state reaches them.

    ``reach_probability[i]`` is the exact probability of ending in
    ``absorbing_classes[i]``. ``period`` and ``tail`` are only set for the
    deterministic sync chain, where ``tail`` is the convergence time.
    """

    absorbing_classes: tuple[frozenset[int], ...]
    reach_probability: tuple[Fraction, ...]
    period: int | None
    tail: int | None
    expected_steps: Fraction | None

    def reachable_classes(self) -> list[tuple[frozenset[int], Fraction]]:
        return [(c, p) for c, p in zip(self.absorbing_classes, self.reach_probability) if p]


def _blocks(chain: ValuationChain):
    # Tarjan emits a component only after everything it reaches, so solving
    # blocks in ascending id order always finds successor values ready.
    scc = scc_decompose(chain.as_graph())
    return scc, scc.sinks()


def _solve_blocks(chain: ValuationChain, scc, sinks, known, rhs_width, constant, exact=True):
    """Fill ``known[state]`` (a list of rhs_width values) for every transient state.

    Each transient state s satisfies x_s = constant + sum_t P(s, t) x_t.
    With ``exact`` off each block is solved in floating point instead.
    """
    sink_set = set(sinks)
    for c in range(scc.count):
        if c in sink_set:
            continue
        members = scc.component_members[c]
        pos = {s: i for i, s in enumerate(members)}
        size = len(members)
        if exact:
            a = [[Fraction(0)] * size for _ in range(size)]
            b = [[Fraction(constant)] * rhs_width for _ in range(size)]
        else:
            a = np.zeros((size, size))
            b = np.full((size, rhs_width), float(constant))
        for s in members:
            i = pos[s]
            a[i][i] += 1
            for t, p in chain.transitions[s]:
                p = p if exact else float(p)
                if t in pos:
                    a[i][pos[t]] -= p
                else:
                    for j, x in enumerate(known[t]):
                        b[i][j] += p * x
        solution = solve_exact(a, b) if exact else np.linalg.solve(a, b).tolist()
        for s in members:
            known[s] = solution[pos[s]]


def absorbing_analysis(chain: ValuationChain) -> AbsorptionReport:
    scc, sinks = _blocks(chain)
    classes = tuple(frozenset(scc.component_members[c]) for c in sinks)
    known: dict[int, list[Fraction]] = {}
    for j, c in enumerate(sinks):
        for s in scc.component_members[c]:
            known[s] = [Fraction(int(i == j)) for i in range(len(sinks))]
    _solve_blocks(chain, scc, sinks, known, len(sinks), 0)
    reach = tuple(known[chain.start])
    period = tail = None
    if chain.deterministic:
        sink_of = {s: i for i, cls in enumerate(classes) for s in cls}
        s, tail = chain.start, 0
        while s not in sink_of:
            s = chain.transitions[s][0][0]
            tail += 1
        period = len(classes[sink_of[s]])
    expected = expected_absorption_time(chain, _precomputed=(scc, sinks))
    return AbsorptionReport(classes, reach, period, tail, expected)


def expected_absorption_time(chain: ValuationChain, exact: bool = True, _precomputed=None) -> Fraction | float:
    """Expected number of steps from the start state until it enters a sink class.

    Exact rational by default; ``exact=False`` solves in floating point,
    which is much faster for chains with blocks of hundreds of states.
    """
    scc, sinks = _precomputed or _blocks(chain)
    known: dict[int, list] = {}
    for c in sinks:
        for s in scc.component_members[c]:
            known[s] = [Fraction(0) if exact else 0.0]
    _solve_blocks(chain, scc, sinks, known, 1, 1, exact)
    return known[chain.start][0]


def one_sided_gambler_chain(n: int) -> ValuationChain:
    """Path of n nodes with a frozen -1 on node 0 and a 1 on the far end.

    The 1 performs a lazy walk and is absorbed when it meets the -1, which
    makes the expected absorption time n(n - 1)^2 / 2.
    """
    if n < 3:
        raise ValueError("the one-sided walk needs n >= 3")
    graph = Graph(n, [(i, i + 1) for i in range(n - 1)])
    values = [0] * n
    values[0], values[-1] = -1, 1
    return enumerate_chain(graph, values, "lb", frozen=[0])


# Graph-level oracles -------------------------------------------------------------

CYCLE_NODE_LIMIT = 12


def simple_cycle_lengths(graph: Graph, node_limit: int = CYCLE_NODE_LIMIT) -> set[int]:
    """Lengths of all simple directed cycles, by exhaustive search.

    Each cycle is found once, from its smallest node, by a DFS that only visits
    larger nodes and never revisits a node on the current path. Undirected
    graphs are read as symmetric digraphs, so every edge is a 2-cycle.
    """
    n = graph.node_count
    if n > node_limit:
        raise ResourceLimitError(f"cycle enumeration limited to {node_limit} nodes, graph has {n}")
    out = graph.adjacency_out
    lengths: set[int] = set()
    for s in range(n):
        on_path = [False] * n
        on_path[s] = True
        stack = [(s, iter(out[s]), 1)]
        while stack:
            v, it, depth = stack[-1]
            w = next(it, None)
            if w is None:
                stack.pop()
                on_path[v] = False
                continue
            if w == s:
                lengths.add(depth)
            elif w > s and not on_path[w]:
                on_path[w] = True
                stack.append((w, iter(out[w]), depth + 1))
        if len(lengths) == n:
            break
    return lengths


def walk_hitting_times(graph: Graph, target: int) -> list[Fraction | None]:
    """Expected steps for a simple random walk to first reach ``target``.

    The walk moves to a uniform out-neighbour. ``None`` marks nodes whose
    expectation is infinite, either because they cannot reach the target or
    because they can wander somewhere that cannot.
    """
    n = graph.node_count
    if not 0 <= target < n:
        raise ValueError(f"node {target} not in graph")
    out, inn = graph.adjacency_out, graph.adjacency_in
    can_reach = {target}
    queue = deque([target])
    while queue:
        v = queue.popleft()
        for u in inn[v]:
            if u not in can_reach:
                can_reach.add(u)
                queue.append(u)
    doomed = {v for v in range(n) if v not in can_reach or not out[v]} - {target}
    queue = deque(doomed)
    while queue:
        v = queue.popleft()
        for u in inn[v]:
            if u != target and u not in doomed:
                doomed.add(u)
                queue.append(u)
    live = [v for v in range(n) if v != target and v not in doomed]
    pos = {v: i for i, v in enumerate(live)}
    a = [[Fraction(0)] * len(live) for _ in live]
    b = [[Fraction(1)] for _ in live]
    for v in live:
        i = pos[v]
        a[i][i] += 1
        p = Fraction(1, len(out[v]))
        for w in out[v]:
            if w in pos:
                a[i][pos[w]] -= p
    result: list[Fraction | None] = [None] * n
    result[target] = Fraction(0)
    if live:
        for v, row in zip(live, solve_exact(a, b)):
            result[v] = row[0]
    return result
