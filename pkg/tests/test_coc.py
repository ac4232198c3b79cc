import random

import pytest

from coppar_check.coc import (
    CocOutcome,
    detect_coc,
    detect_coc_with_fixed_orders,
    render_witness,
    verify_lemma2_instance,
)
from coppar_check.errors import PreconditionError
from coppar_check.generate import random_history
from coppar_check.history import History, HistoryBuilder, operations_of, project_object
from coppar_check.orders import build_union_graph, find_cycle
from coppar_check.osc import check_sequentially_consistent
from coppar_check.sim import SimConfig, extract_object_orders, run_simulation


class TestDetectCoc:
    def test_store_buffer(self, sb):
        r = detect_coc(sb)
        assert r.outcome is CocOutcome.CONTAINS_COC
        assert r.witness.ops == (0, 2, 1, 3)
        assert dict(r.orders) == {"x": (3, 0), "y": (2, 1)}
        g = build_union_graph(sb, r.orders)
        assert find_cycle(g) is not None

    def test_single_process(self):
        b = HistoryBuilder()
        b.write(0, "x", 1)
        b.read(0, "x", 1)
        r = detect_coc(b.build())
        assert r.outcome is CocOutcome.NO_COC
        assert dict(r.orders) == {"x": (0, 1)}

    def test_unreadable_value(self):
        b = HistoryBuilder()
        b.read(0, "x", 5)
        r = detect_coc(b.build())
        assert r.outcome is CocOutcome.L4_UNSATISFIABLE
        assert r.unsatisfiable_object == "x"

    def test_pending_write_supplies_read(self):
        b = HistoryBuilder()
        b.invoke_write(0, "x", 5)
        b.read(1, "x", 5)
        r = detect_coc(b.build())
        assert r.no_coc
        assert len(r.extension) == 4

    def test_budget(self, sb):
        assert detect_coc(sb, budget=1).outcome is CocOutcome.INCONCLUSIVE

    def test_universal_reading(self):
        # Two reads of an unwritten object may be ordered either way; one order closes
        # a cycle with program order, the other does not, so there is no COC.
        b = HistoryBuilder()
        b.read(0, "x", 0)
        b.read(1, "y", 0)
        b.read(1, "x", 0)
        b.read(0, "y", 0)
        h = b.build()
        cyclic = build_union_graph(h, {"x": [2, 0], "y": [1, 3]})
        assert find_cycle(cyclic) is None
        cyclic = build_union_graph(h, {"x": [2, 0], "y": [3, 1]})
        assert find_cycle(cyclic) is not None
        assert detect_coc(h).no_coc

    def test_read_only_never_coc(self):
        rng = random.Random(4)
        for _ in range(300):
            b = HistoryBuilder()
            for _ in range(rng.randint(0, 7)):
                b.read(rng.randrange(3), rng.choice("xy"), 0)
            assert detect_coc(b.build()).no_coc

    def test_witness_rendering(self, sb):
        r = detect_coc(sb)
        text = render_witness(r.witness, operations_of(sb))
        lines = text.splitlines()
        assert len(lines) == 4
        assert "program order of P0" in lines[0]
        assert "serialization order of object y" in lines[1]


class TestFixedOrders:
    def test_simulated_run(self):
        run = run_simulation(SimConfig(op_count=20, seed=3, max_staleness=3))
        assert detect_coc_with_fixed_orders(run.history, extract_object_orders(run)).no_coc

    def test_store_buffer_forced_orders(self, sb):
        r = detect_coc_with_fixed_orders(sb, {"x": [3, 0], "y": [2, 1]})
        assert r.contains_coc and len(r.witness) == 4

    def test_empty(self):
        assert detect_coc_with_fixed_orders(History(), {}).no_coc

    def test_illegal_order(self, sb):
        with pytest.raises(PreconditionError):
            detect_coc_with_fixed_orders(sb, {"x": [0, 3], "y": [2, 1]})

    def test_program_order_reversal(self):
        b = HistoryBuilder()
        b.read(0, "x", 0)
        b.read(0, "x", 0)
        with pytest.raises(PreconditionError):
            detect_coc_with_fixed_orders(b.build(), {"x": [1, 0]})


class TestSequencedWrites:
    def test_simulated(self):
        for seed in range(20):
            run = run_simulation(SimConfig(op_count=15, seed=seed, max_staleness=2))
            assert verify_lemma2_instance(run.history, run.cast_order)

    def test_single_write(self):
        b = HistoryBuilder()
        b.write(0, "x", 1)
        assert verify_lemma2_instance(b.build(), [0])

    def test_store_buffer_still_cyclic(self, sb):
        # Its writes are trivially totally ordered, but its reads are not served
        # from any prefix of that order, so the cycle remains.
        assert not verify_lemma2_instance(sb, [0, 1])

    def test_missing_write(self, sb):
        with pytest.raises(PreconditionError):
            verify_lemma2_instance(sb, [0])


def test_store_buffer_projections_are_sc(sb):
    """Each object on its own is sequentially consistent; composed, they are not."""
    for x in ("x", "y"):
        assert check_sequentially_consistent(project_object(sb, x)).consistent
    assert check_sequentially_consistent(sb).violation


def test_coc_witnesses_have_two_writes_random():
    rng = random.Random(21)
    seen = 0
    for _ in range(1500):
        h = random_history(rng, max_ops=8, processes=2)
        r = detect_coc(h)
        if r.contains_coc:
            seen += 1
            ops = {op.op_id: op for op in operations_of(r.extension)}
            assert sum(ops[i].is_write for i in r.witness.ops) >= 2
    assert seen > 0
