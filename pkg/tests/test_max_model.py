import pytest

from conftest import random_bipartite_connected, random_connected
from gdlab import generators as gen
from gdlab.graph import Graph, diameter
from gdlab.markov import enumerate_chain, absorbing_analysis
from gdlab.max_model import (
    PreconditionError,
    async_simulate,
    class_coloring,
    construct_period_valuation,
    cycle_gcd,
    detect_convergence,
    k_step_max,
    local_period,
    predict_strongly_connected,
    predict_undirected,
    rotation_period,
    sync_step,
)


def iterate(graph, f, k):
    for _ in range(k):
        f = sync_step(graph, f)
    return f


class TestSyncStep:
    def test_constant_is_fixed(self):
        g = gen.family_graph("cycle", 5)
        assert sync_step(g, (3,) * 5) == (3,) * 5

    def test_own_value_discarded(self):
        # the node holding 6 sees 4, 1 and 2
        g = Graph(4, [(0, 1), (0, 2), (0, 3)])
        assert sync_step(g, (6, 4, 1, 2))[0] == 4

    def test_directed_cycle_rotates(self):
        g = gen.directed_cycle(4)
        assert sync_step(g, (0, 1, 2, 3)) == (1, 2, 3, 0)

    def test_sink_rejected(self):
        with pytest.raises(PreconditionError, match="node 1"):
            sync_step(Graph(2, [(0, 1)], directed=True), (0, 0))

    def test_k_step_matches_iteration(self, rng):
        for _ in range(40):
            n = int(rng.integers(2, 21))
            g = gen.erdos_renyi_max_ready(n, 0.25, True, rng)
            f = gen.random_values(n, 0, 9, rng)
            k = int(rng.integers(0, 11))
            v = int(rng.integers(n))
            assert k_step_max(g, f, v, k) == iterate(g, f, k)[v]
        assert k_step_max(gen.directed_cycle(3), (5, 1, 2), 0, 0) == 5


class TestDetectConvergence:
    def test_constant(self):
        traj = detect_convergence(gen.family_graph("path", 4), (2, 2, 2, 2))
        assert (traj.convergence_time, traj.period) == (0, 1)

    def test_two_cycle_swaps(self):
        traj = detect_convergence(gen.directed_cycle(2), (0, 1))
        assert (traj.convergence_time, traj.period) == (0, 2)

    def test_two_cycle_instance(self):
        inst = gen.two_cycle_instance()
        traj = detect_convergence(inst.graph, inst.valuation)
        assert (traj.convergence_time, traj.period) == (7, 3)
        assert traj.valuation_at(10) == iterate(inst.graph, inst.valuation, 10)

    def test_capped(self):
        traj = detect_convergence(gen.directed_cycle(5), (0, 1, 2, 3, 4), max_steps=3)
        assert traj.capped and traj.period is None
        with pytest.raises(ValueError):
            traj.valuation_at(0)

    def test_local_period(self):
        traj = detect_convergence(gen.family_graph("path", 3), (1, 0, 0))
        assert traj.period == 2
        assert local_period(traj, 0) == 2
        const = detect_convergence(gen.family_graph("path", 3), (1, 1, 1))
        assert local_period(const, 1) == 1

    def test_matches_deterministic_chain(self, rng):
        for _ in range(50):
            n = int(rng.integers(2, 9))
            g = gen.erdos_renyi_max_ready(n, 0.3, True, rng)
            f = gen.random_values(n, 0, 4, rng)
            traj = detect_convergence(g, f)
            report = absorbing_analysis(enumerate_chain(g, f, "sync"))
            assert (traj.convergence_time, traj.period) == (report.tail, report.period)


class TestCycleGcd:
    def test_examples(self):
        assert cycle_gcd(gen.two_cycle_instance().graph) == 3
        assert cycle_gcd(gen.directed_cycle(7)) == 7
        three_four = Graph(4, [(0, 1), (1, 2), (2, 0), (2, 3), (3, 0)], directed=True)
        assert cycle_gcd(three_four) == 1

    def test_not_strongly_connected(self):
        with pytest.raises(PreconditionError):
            cycle_gcd(Graph(2, [(0, 1)], directed=True))

    def test_undirected_edge_is_a_two_cycle(self):
        assert cycle_gcd(gen.family_graph("path", 4)) == 2
        assert cycle_gcd(gen.family_graph("cycle", 5)) == 1


class TestClasses:
    def test_two_cycle_instance(self):
        inst = gen.two_cycle_instance()
        col = class_coloring(inst.graph, inst.valuation)
        assert col.g == 3 and col.successor_ok(inst.graph)
        assert sum(map(len, col.class_members)) == 8

    def test_four_class_instance(self):
        inst = gen.four_class_instance()
        col = class_coloring(inst.graph, inst.valuation)
        assert col.class_max == (5, 6, 5, 3)
        assert predict_strongly_connected(inst.graph, inst.valuation).period == 4

    @pytest.mark.parametrize("maxima, period", [((5, 6, 5, 3), 4), ((5, 6, 5, 6), 2), ((5, 5, 5, 5), 1), ((1,), 1)])
    def test_rotation_period(self, maxima, period):
        assert rotation_period(maxima) == period

    def test_aperiodic_single_class(self):
        g = gen.family_graph("complete", 4)
        assert class_coloring(g, (1, 2, 3, 4)).class_max == (4,)

    def test_schedule_matches_simulation(self, rng):
        for _ in range(100):
            n = int(rng.integers(2, 13))
            g = gen.random_periodic_digraph(n, int(rng.integers(1, min(n, 4) + 1)), 0.3, rng)
            f = gen.random_values(n, 0, 9, rng)
            pred = predict_strongly_connected(g, f)
            traj = detect_convergence(g, f)
            assert traj.period == pred.period
            for t in range(traj.convergence_time, traj.convergence_time + traj.period):
                assert traj.valuation_at(t) == pred.valuation_at(t)


class TestConstructPeriod:
    def test_every_divisor(self, rng):
        for _ in range(30):
            n = int(rng.integers(4, 13))
            g = gen.random_periodic_digraph(n, 4, 0.2, rng)
            g_val = cycle_gcd(g)
            for p in (d for d in range(1, g_val + 1) if g_val % d == 0):
                traj = detect_convergence(g, construct_period_valuation(g, p))
                assert (traj.convergence_time, traj.period) == (0, p)

    def test_p_one_is_constant(self):
        assert set(construct_period_valuation(gen.directed_cycle(6), 1)) == {0}

    def test_bad_divisor(self):
        with pytest.raises(ValueError):
            construct_period_valuation(gen.directed_cycle(6), 4)


class TestUndirected:
    def test_triangle(self):
        assert predict_undirected(gen.family_graph("complete", 3), (0, 5, 2)).period == 1

    def test_path(self):
        pred = predict_undirected(gen.family_graph("path", 3), (1, 0, 0))
        (comp,) = pred.components
        assert comp.bipartite and pred.period == 2
        assert {comp.max_a, comp.max_b} == {0, 1}

    def test_balanced_bipartite(self):
        assert predict_undirected(gen.family_graph("path", 4), (1, 1, 0, 0)).period == 1

    def test_isolated_node(self):
        with pytest.raises(PreconditionError):
            predict_undirected(Graph(3, [(0, 1)]), (0, 0, 0))

    def test_random_graphs(self, rng):
        for i in range(150):
            n = int(rng.integers(2, 30))
            g = random_bipartite_connected(n, 0.2, rng) if i % 2 else random_connected(n, 0.2, rng)
            f = gen.random_values(n, 0, 20, rng)
            pred = predict_undirected(g, f)
            traj = detect_convergence(g, f)
            assert traj.period == pred.period
            assert traj.convergence_time <= pred.bound == 2 * diameter(g).value
            t = traj.convergence_time + 1
            assert traj.valuation_at(t) == pred.valuation_at(t, n)

    def test_worst_cases(self):
        for n in range(5, 12):
            bip = gen.bipartite_worst_instance(n)
            assert detect_convergence(bip.graph, bip.valuation).convergence_time == n - 2
            non = gen.nonbipartite_worst_instance(n)
            assert detect_convergence(non.graph, non.valuation).convergence_time == 2 * n - 5

    def test_maximum_at_free_end_needs_one_more_step(self):
        # with the maximum on the free end itself convergence takes 2n - 4 steps, which equals 2D
        for n in range(5, 12):
            inst = gen.nonbipartite_worst_instance(n, max_at=0)
            assert detect_convergence(inst.graph, inst.valuation).convergence_time == 2 * n - 4


class TestPrimeFlower:
    @pytest.mark.parametrize("k, period", [(2, 6), (3, 30), (4, 210)])
    def test_period_is_primorial(self, k, period):
        inst = gen.prime_flower_instance(k)
        traj = detect_convergence(inst.graph, inst.valuation)
        assert (traj.convergence_time, traj.period) == (0, period)
        for p in gen.first_primes(k):
            assert k_step_max(inst.graph, inst.valuation, 0, p) == p


class TestAsync:
    def test_reaches_consensus_on_strongly_connected(self, rng):
        for _ in range(20):
            g = random_connected(15, 0.3, rng)
            res = async_simulate(g, gen.permutation_values(15, rng), rng)
            assert not res.capped and len(set(res.final)) == 1
            assert 0 < res.final_value_ratio <= 1

    def test_counter_rule_on_non_strongly_connected(self):
        # 2 -> 0 <-> 1: node 2 copies the 0/1 consensus, which is stable
        g = Graph(3, [(0, 1), (1, 0), (2, 0)], directed=True)
        res = async_simulate(g, (4, 4, 1), seed=0)
        assert res.final == (4, 4, 4) and not res.capped
        with pytest.raises(ValueError):
            async_simulate(g, (4, 4, 1), stop="never")

    def test_stop_rules_agree_when_strongly_connected(self, rng):
        g = random_connected(12, 0.3, rng)
        f = gen.permutation_values(12, rng)
        a = async_simulate(g, f, 7, stop="equal")
        b = async_simulate(g, f, 7, stop="counter")
        assert a == b

    def test_cap_and_reproducibility(self):
        g = gen.family_graph("path", 40)
        f = tuple(range(40))
        res = async_simulate(g, f, 3, max_steps=10)
        assert res.capped and res.convergence_time == 10
        assert async_simulate(g, f, 11) == async_simulate(g, f, 11)

    def test_ratio_undefined_for_nonpositive_max(self):
        assert async_simulate(gen.directed_cycle(3), (0, 0, 0)).final_value_ratio is None
