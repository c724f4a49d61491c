"""Symmetric load balancing: pick a random edge and move both ends one step together.

A *shrink* update brings two values at distance two or more closer; a *swap*
update acts on values at distance at most one and just exchanges them. Only
shrinks change the multiset of values, which is what makes absorption cheap to
track and the final state predictable.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .generators import BINOMIAL_LIMIT, ResourceLimitError, make_rng
from .graph import Graph, Valuation, check_valuation, connected_components

SWAP = "swap"
SHRINK = "shrink"
DEFAULT_MAX_STEPS = 10**9


def _require_undirected(graph: Graph) -> None:
    if graph.directed:
        raise ValueError("load balancing is defined on undirected graphs")


class LbState:
    """Mutable load-balancing state with O(1) absorption checks.

    Each component keeps a value histogram; a component is settled once its
    histogram spans at most two adjacent values. Swap updates leave the
    histogram alone, so only shrinks touch it.
    """

    def __init__(self, graph: Graph, values: Sequence[int]):
        _require_undirected(graph)
        self.graph = graph
        self.values = list(check_valuation(graph, values))
        self.step = 0
        self.shrink_count = 0
        self.components = connected_components(graph)
        self.component_of = [0] * graph.node_count
        self.histograms: list[Counter] = []
        self.unsettled: set[int] = set()
        for c, members in enumerate(self.components):
            for v in members:
                self.component_of[v] = c
            hist = Counter(self.values[v] for v in members)
            self.histograms.append(hist)
            if not _settled(hist):
                self.unsettled.add(c)

    @property
    def valuation(self) -> Valuation:
        return tuple(self.values)

    def is_absorbed(self) -> bool:
        return not self.unsettled

    def apply(self, u: int, v: int) -> str:
        """Update edge (u, v) without checking that it exists."""
        values = self.values
        a, b = values[u], values[v]
        self.step += 1
        if a - b in (-1, 0, 1):
            values[u], values[v] = b, a
            return SWAP
        if a < b:
            na, nb = a + 1, b - 1
        else:
            na, nb = a - 1, b + 1
        values[u], values[v] = na, nb
        self.shrink_count += 1
        c = self.component_of[u]
        hist = self.histograms[c]
        for old in (a, b):
            hist[old] -= 1
            if not hist[old]:
                del hist[old]
        hist[na] += 1
        hist[nb] += 1
        if _settled(hist):
            self.unsettled.discard(c)
        return SHRINK


def _settled(hist: Counter) -> bool:
    return len(hist) <= 1 or (len(hist) == 2 and max(hist) - min(hist) == 1)


def apply_edge_update(state: LbState, edge: tuple[int, int]) -> str:
    """Apply one update on an existing edge; returns ``"swap"`` or ``"shrink"``."""
    u, v = edge
    if not state.graph.has_edge(u, v):
        raise ValueError(f"({u}, {v}) is not an edge")
    return state.apply(u, v)


def is_absorbed(state: LbState) -> bool:
    """True when every component's values lie within 1 of each other."""
    return state.is_absorbed()


def valuation_absorbed(graph: Graph, values: Sequence[int]) -> bool:
    """Stateless version of :func:`is_absorbed`."""
    for members in connected_components(graph):
        vals = [values[v] for v in members]
        if max(vals) - min(vals) > 1:
            return False
    return True


@dataclass(frozen=True)
class ComponentPrediction:
    members: tuple[int, ...]
    size: int
    total: int
    k: int
    r: int

    @property
    def final_multiset(self) -> list[int]:
        """Sorted final values: ``size - r`` copies of k then r copies of k + 1."""
        return [self.k] * (self.size - self.r) + [self.k + 1] * self.r


@dataclass(frozen=True)
class FinalPrediction:
    components: tuple[ComponentPrediction, ...]

    @property
    def period(self) -> int:
        return predict_period(self)

    @property
    def final_square_sum(self) -> int:
        return sum(c.r * (c.k + 1) ** 2 + (c.size - c.r) * c.k**2 for c in self.components)

    def matches(self, values: Sequence[int]) -> bool:
        """Whether ``values`` carries the predicted multiset on every component."""
        return all(sorted(values[v] for v in c.members) == c.final_multiset for c in self.components)


def predict_final(graph: Graph, f0: Sequence[int]) -> FinalPrediction:
    """Absorbing multiset of every component.

    A component of n nodes with sum S ends with r copies of k + 1 and n - r
    copies of k, where ``k = S // n`` and ``r = S - k n`` (floored, so
    0 <= r < n even for negative sums).
    """
    _require_undirected(graph)
    f0 = check_valuation(graph, f0)
    parts = []
    for members in connected_components(graph):
        total = sum(f0[v] for v in members)
        k, r = divmod(total, len(members))
        parts.append(ComponentPrediction(tuple(members), len(members), total, k, r))
    return FinalPrediction(tuple(parts))


def predict_period(prediction: FinalPrediction) -> int:
    """Size of the absorbing class: the product of C(n_i, r_i)."""
    return math.prod(math.comb(c.size, c.r) for c in prediction.components)


def square_sum(values: Sequence[int]) -> int:
    return sum(v * v for v in values)


def square_sum_gap(graph: Graph, f0: Sequence[int]) -> int:
    """Half the drop in square sum from ``f0`` to the absorbing state.

    Each shrink lowers the square sum by at least 2, so this bounds the
    number of shrinks.
    """
    diff = square_sum(f0) - predict_final(graph, f0).final_square_sum
    assert diff >= 0 and diff % 2 == 0, diff
    return diff // 2


@dataclass(frozen=True)
class TrialStats:
    """Outcome of one run.

    ``width`` is convergence time over height, or ``None`` when no shrink
    happened.
    """

    convergence_time: int
    height: int
    capped: bool
    final: Valuation

    @property
    def width(self) -> Fraction | None:
        if self.height == 0:
            return None
        return Fraction(self.convergence_time, self.height)


class InvariantViolation(AssertionError):
    pass


def simulate(
    graph: Graph,
    f0: Sequence[int],
    seed: int | np.random.Generator = 0,
    max_steps: int = DEFAULT_MAX_STEPS,
    check: bool = False,
    chunk: int = 8192,
) -> TrialStats:
    """Run random edge updates until absorption or ``max_steps``.

    Edges are drawn uniformly with replacement, one per step. With ``check``
    set every step is audited against the conservation laws and the final
    state against :func:`predict_final`.
    """
    state = LbState(graph, f0)
    if state.is_absorbed():
        return TrialStats(0, 0, False, state.valuation)
    edges = graph.edge_list
    rng = make_rng(seed)
    us = np.fromiter((e[0] for e in edges), dtype=np.int64, count=len(edges))
    vs = np.fromiter((e[1] for e in edges), dtype=np.int64, count=len(edges))
    audit = UpdateAuditor(state) if check else None
    apply = state.apply
    unsettled = state.unsettled
    while state.step < max_steps:
        picks = rng.integers(0, len(edges), size=min(chunk, max_steps - state.step))
        for u, v in zip(us[picks].tolist(), vs[picks].tolist()):
            if audit is None:
                apply(u, v)
            else:
                audit.step(u, v)
            if not unsettled:
                break
        if not unsettled:
            break
    capped = bool(unsettled)
    if audit is not None and audit.violations:
        raise InvariantViolation(f"conservation laws broken: {dict(audit.violations)}")
    if check and not capped and not predict_final(graph, f0).matches(state.values):
        raise InvariantViolation("absorbed state differs from the predicted multiset")
    if check and state.shrink_count > square_sum_gap(graph, f0):
        raise InvariantViolation("more shrinks than the square-sum gap allows")
    return TrialStats(state.step, state.shrink_count, capped, state.valuation)


class UpdateAuditor:
    """Steps a state while counting breaches of the per-update conservation laws.

    Tracked laws: the sum never changes, a shrink on (a, b) lowers the square
    sum by exactly 2(|a - b| - 1) and a swap leaves it alone, and the largest
    absolute value never grows.
    """

    def __init__(self, state: LbState):
        self.state = state
        self.total = sum(state.values)
        self.squares = square_sum(state.values)
        self.max_abs = max(abs(v) for v in state.values)
        self.violations: Counter = Counter()

    def step(self, u: int, v: int) -> str:
        values = self.state.values
        a, b = values[u], values[v]
        kind = self.state.apply(u, v)
        self.squares -= 2 * (abs(a - b) - 1) if kind == SHRINK else 0
        if sum(values) != self.total:
            self.violations["sum"] += 1
            self.total = sum(values)
        if square_sum(values) != self.squares:
            self.violations["square_sum"] += 1
            self.squares = square_sum(values)
        max_abs = max(abs(x) for x in values)
        if max_abs > self.max_abs:
            self.violations["max_abs"] += 1
        self.max_abs = max_abs
        return kind


def binomial_worst_schedule(n: int, limit: int = BINOMIAL_LIMIT) -> list[tuple[int, int]]:
    """Edge sequence that takes ``binomial_instance(n)`` to all zeros in n 2^(n-1) shrinks.

    Node ids follow ``binomial_instance``: the C(n, k) copies of -n + 2k are
    consecutive and ordered by k. At each level C(n-1, k) copies of a value are
    paired with C(n-1, k) copies of the value two above, which turns the
    multiset into two binomial (n-1)-valuations that are solved recursively.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if n > limit:
        raise ResourceLimitError(f"binomial schedule for n={n} exceeds the limit {limit}")
    groups, start = [], 0
    for k in range(n + 1):
        size = math.comb(n, k)
        groups.append(list(range(start, start + size)))
        start += size
    schedule: list[tuple[int, int]] = []
    _pair_level(groups, n, schedule)
    return schedule


def _pair_level(groups: list[list[int]], n: int, out: list[tuple[int, int]]) -> None:
    if n == 0:
        return
    low_half: list[list[int]] = []
    high_half: list[list[int]] = []
    for k in range(n):
        count = math.comb(n - 1, k)
        lows = groups[k][:count]
        highs = groups[k + 1][len(groups[k + 1]) - count :]
        out.extend(zip(lows, highs))
        low_half.append(lows)
        high_half.append(highs)
    _pair_level(low_half, n - 1, out)
    _pair_level(high_half, n - 1, out)
