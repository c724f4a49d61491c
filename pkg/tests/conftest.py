import numpy as np
import pytest

from gdlab.generators import erdos_renyi, is_connected, make_rng, sample_until
from gdlab.graph import Graph

_ACCEPTANCE: list[tuple[str, str, str]] = []


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(number, title, passed, detail)``."""

    def record(number: int, title: str, passed: bool | None, detail: str = "") -> None:
        status = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
        _ACCEPTANCE.append((f"{number:>2}", status, f"{title}: {detail}" if detail else title))

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, text in sorted(_ACCEPTANCE, key=lambda r: int(r[0])):
        terminalreporter.write_line(f"[{status}] criterion {number} - {text}")


def random_connected(n: int, p: float, rng: np.random.Generator) -> Graph:
    return sample_until(lambda r: erdos_renyi(n, p, False, r), is_connected, rng, 10_000)


def random_tree(n: int, rng: np.random.Generator) -> Graph:
    return Graph(n, [(int(rng.integers(v)), v) for v in range(1, n)])


def random_bipartite_connected(n: int, p: float, rng: np.random.Generator) -> Graph:
    """Random tree plus random edges that respect the tree's 2-colouring."""
    parent = [0] + [int(rng.integers(v)) for v in range(1, n)]
    side = [0] * n
    for v in range(1, n):
        side[v] = 1 - side[parent[v]]
    edges = {(parent[v], v) for v in range(1, n)}
    for u in range(n):
        for v in range(u + 1, n):
            if side[u] != side[v] and rng.random() < p:
                edges.add((u, v))
    return Graph.from_edges(n, edges)


@pytest.fixture
def rng():
    return make_rng(20240601)
