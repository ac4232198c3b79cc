import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coppar_check.errors import PreconditionError
from coppar_check.generate import random_history
from coppar_check.history import History, HistoryBuilder, inv_read, inv_write, operations_of, res_read, res_write
from coppar_check.orders import (
    DependencyGraph,
    Edge,
    EdgeLabel,
    build_union_graph,
    find_cycle,
    graph_from_edges,
    process_order_edges,
    real_time_precedes,
    to_dot,
    topological_extension,
)


def closure(nodes, pairs):
    """Reachability by Warshall's algorithm, used as an independent cycle oracle."""
    reach = {(a, b) for a, b in pairs}
    for k in nodes:
        for i in nodes:
            if (i, k) in reach:
                for j in nodes:
                    if (k, j) in reach:
                        reach.add((i, j))
    return reach


def has_cycle_oracle(nodes, pairs):
    reach = closure(nodes, pairs)
    return any((n, n) in reach for n in nodes)


SB_ORDERS = {"x": [3, 0], "y": [2, 1]}


class TestRealTime:
    def test_sequential_pair(self):
        b = HistoryBuilder()
        b.write(0, "x", 1)
        b.read(1, "x", 1)
        h = b.build()
        a, c = operations_of(h)
        assert real_time_precedes(h, a, c)
        assert not real_time_precedes(h, c, a)

    def test_overlap_is_concurrent(self):
        h = History((inv_write(0, 0, "x", 1), inv_read(1, 1, "x"), res_write(0, 0, "x"), res_read(1, 1, "x", 1)))
        a, c = operations_of(h)
        assert not real_time_precedes(h, a, c)
        assert not real_time_precedes(h, c, a)

    def test_pending(self):
        h = History((inv_write(0, 0, "x", 1), inv_read(1, 1, "x"), res_read(1, 1, "x", 0)))
        a, c = operations_of(h)
        assert not real_time_precedes(h, a, c)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=100)
    def test_strict_partial_order(self, seed):
        h = random_history(random.Random(seed), max_ops=8)
        ops = operations_of(h)
        for a in ops:
            assert not real_time_precedes(h, a, a)
            for b in ops:
                if real_time_precedes(h, a, b):
                    assert not real_time_precedes(h, b, a)
                    for c in ops:
                        if real_time_precedes(h, b, c):
                            assert real_time_precedes(h, a, c)


class TestProcessOrder:
    def test_one_process(self):
        b = HistoryBuilder()
        for v in range(3):
            b.write(0, "x", v)
        assert len(process_order_edges(b.build())) == 2

    def test_two_processes(self):
        b = HistoryBuilder()
        b.write(0, "x", 1)
        b.write(1, "x", 2)
        b.read(0, "x", 2)
        b.read(1, "x", 2)
        edges = process_order_edges(b.build())
        assert len(edges) == 2
        assert all(e.label.kind == "process" for e in edges)
        assert {(e.src, e.dst) for e in edges} == {(0, 2), (1, 3)}

    def test_store_buffer(self, sb):
        edges = process_order_edges(sb)
        assert {(e.src, e.dst) for e in edges} == {(0, 2), (1, 3)}


class TestUnionGraph:
    def test_chain(self):
        b = HistoryBuilder()
        b.write(0, "x", 1)
        b.read(0, "x", 1)
        g = build_union_graph(b.build(), {"x": [0, 1]})
        assert {(e.src, e.dst) for e in g.edges} == {(0, 1)}
        assert topological_extension(g) == [0, 1]

    def test_store_buffer(self, sb):
        g = build_union_graph(sb, SB_ORDERS)
        pairs = {(e.src, e.dst) for e in g.edges}
        assert pairs == {(0, 2), (1, 3), (2, 1), (3, 0)}
        assert len(g.edges) == 4

    def test_empty(self):
        g = build_union_graph(History(), {})
        assert g.nodes == () and g.edges == ()

    def test_missing_object(self, sb):
        with pytest.raises(PreconditionError):
            build_union_graph(sb, {"x": [3, 0]})

    def test_order_must_cover_object(self, sb):
        with pytest.raises(PreconditionError):
            build_union_graph(sb, {"x": [3], "y": [2, 1]})

    def test_edges_are_justified(self):
        for seed in range(100):
            h = random_history(random.Random(seed), max_ops=8, pending_probability=0)
            ops = {op.op_id: op for op in operations_of(h)}
            orders = {}
            for op in sorted(ops.values(), key=lambda o: o.op_id):
                orders.setdefault(op.object, []).append(op.op_id)
            g = build_union_graph(h, orders)
            for e in g.edges:
                a, b = ops[e.src], ops[e.dst]
                if e.label.kind == "process":
                    assert a.process == b.process == e.label.process
                    between = [o for o in ops.values() if o.process == a.process
                               and a.inv_index < o.inv_index < b.inv_index]
                    assert not between
                else:
                    order = orders[e.label.object]
                    assert order.index(b.op_id) == order.index(a.op_id) + 1


class TestCycles:
    def test_chain_acyclic(self):
        assert find_cycle(graph_from_edges([1, 2, 3], [(1, 2), (2, 3)])) is None

    def test_store_buffer_cycle(self, sb):
        g = build_union_graph(sb, SB_ORDERS)
        assert has_cycle_oracle(g.nodes, [(e.src, e.dst) for e in g.edges])
        w = find_cycle(g)
        assert w.ops == (0, 2, 1, 3)
        assert [str(lab) for lab in w.labels] == ["<_H|P0", "<_y", "<_H|P1", "<_x"]
        for src, dst, label in w.steps():
            assert any(e.src == src and e.dst == dst and e.label == label for e in g.edges)

    def test_two_cycle(self):
        w = find_cycle(graph_from_edges([1, 2], [(1, 2), (2, 1)]))
        assert len(w) == 2

    def test_self_edge_rejected(self):
        with pytest.raises(PreconditionError):
            DependencyGraph((1,), (Edge(1, 1, EdgeLabel.real_time()),))


class TestTopologicalExtension:
    def test_no_edges(self):
        assert topological_extension(graph_from_edges([2, 0, 1], [])) == [0, 1, 2]

    def test_chain(self):
        assert topological_extension(graph_from_edges([5, 3, 9], [(5, 3), (3, 9)])) == [5, 3, 9]

    def test_cyclic(self):
        assert topological_extension(graph_from_edges([1, 2], [(1, 2), (2, 1)])) is None


def _check_graph(nodes, pairs):
    g = graph_from_edges(nodes, pairs)
    cyc = find_cycle(g)
    topo = topological_extension(g)
    assert (cyc is None) == (topo is not None)
    assert (cyc is None) == (not has_cycle_oracle(nodes, pairs))
    if topo is not None:
        pos = {n: k for k, n in enumerate(topo)}
        assert all(pos[a] < pos[b] for a, b in pairs)
        # The order's own chain added to the graph keeps it acyclic.
        chained = graph_from_edges(nodes, list(pairs) + list(zip(topo, topo[1:])))
        assert find_cycle(chained) is None
    else:
        for a, b, _ in cyc.steps():
            assert (a, b) in pairs


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_cycle_iff_no_extension_exhaustive(n):
    nodes = list(range(n))
    possible = [(a, b) for a in nodes for b in nodes if a != b]
    for mask in range(1 << len(possible)):
        _check_graph(nodes, [possible[i] for i in range(len(possible)) if mask >> i & 1])


def test_cycle_iff_no_extension_randomized():
    rng = random.Random(7)
    for _ in range(3000):
        n = rng.randint(5, 9)
        nodes = list(range(n))
        possible = [(a, b) for a in nodes for b in nodes if a != b]
        density = rng.random() * 0.3
        _check_graph(nodes, [p for p in possible if rng.random() < density])


def test_dot_output(sb):
    text = to_dot(build_union_graph(sb, SB_ORDERS))
    assert text.startswith("digraph")
    assert '0 -> 2 [label="<_H|P0"]' in text
    assert text.count("->") == 4
