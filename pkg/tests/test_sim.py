import pytest

from coppar_check.broadcast import ChangeNodePayload, check_integrity, check_total_order
from coppar_check.errors import PreconditionError, SimulatorBug
from coppar_check.history import is_well_formed, operations_of
from coppar_check.osc import SubsetPolicy, check_exhaustive, check_linearizable
from coppar_check.register import is_legal_order
from coppar_check.sim import (
    ObjectMapping,
    ReplicaState,
    SimConfig,
    SimRun,
    TreeTopology,
    apply_change_node,
    build_topology,
    cast_order_respects_processes,
    extract_object_orders,
    run_simulation,
    transfer_precedes_remap,
)


class TestConfig:
    @pytest.mark.parametrize("patch", [
        {"process_count": 0},
        {"op_count": -1},
        {"read_probability": 1.5},
        {"change_node_rate": -0.1},
        {"max_staleness": -1},
        {"seed": 2**64},
    ])
    def test_invalid(self, patch):
        with pytest.raises(PreconditionError):
            SimConfig(**patch).validate()

    def test_unknown_key(self):
        with pytest.raises(PreconditionError):
            SimConfig.from_dict({"bogus": 1})


class TestTopology:
    def test_heap_shape(self):
        topo = build_topology(4)
        assert topo.parent == (None, 0, 0, 1, 1)
        assert topo.attachment == (1, 2, 3, 4)
        assert topo.children(0) == [1, 2]

    def test_two_roots(self):
        with pytest.raises(PreconditionError):
            TreeTopology((None, None), (0,)).validate()

    def test_cycle(self):
        with pytest.raises(PreconditionError):
            TreeTopology((None, 2, 1), (0,)).validate()


class TestRun:
    def test_deterministic(self):
        cfg = SimConfig(op_count=25, seed=42, change_node_rate=0.2)
        assert run_simulation(cfg) == run_simulation(cfg)

    def test_seeds_differ(self):
        a = run_simulation(SimConfig(op_count=25, seed=1))
        b = run_simulation(SimConfig(op_count=25, seed=2))
        assert a.history != b.history

    def test_shape(self):
        run = run_simulation(SimConfig(op_count=30, seed=5, change_node_rate=0.2))
        assert is_well_formed(run.history)
        assert len(operations_of(run.history)) == 30
        assert all(not op.pending for op in operations_of(run.history))
        assert check_integrity(run.broadcast_log) and check_total_order(run.broadcast_log)
        writes = [m for m in run.broadcast_log.sequence if run.broadcast_log.messages[m].is_write]
        assert list(run.cast_order) == writes
        assert cast_order_respects_processes(run)

    def test_zero_staleness_is_linearizable(self):
        for seed in range(60):
            run = run_simulation(SimConfig(op_count=8, seed=seed, max_staleness=0))
            assert check_exhaustive(run.history, SubsetPolicy.all()).consistent
            assert check_linearizable(run.history).consistent

    def test_stale_reads_happen(self):
        """With lag allowed, some run is not linearizable."""
        found = False
        for seed in range(200):
            run = run_simulation(SimConfig(op_count=10, seed=seed, max_staleness=3, read_probability=0.6))
            if not check_linearizable(run.history).consistent:
                found = True
                break
        assert found

    def test_fixed_mapping(self):
        run = run_simulation(SimConfig(op_count=30, seed=8, change_node_rate=0.0))
        assert len(run.mapping_trace) == 1
        assert run.transfers == ()

    def test_change_nodes_bump_versions(self):
        run = run_simulation(SimConfig(op_count=40, seed=8, change_node_rate=0.3))
        assert run.transfers
        assert len(run.mapping_trace) >= 2
        assert [m.version for m in run.mapping_trace] == list(range(len(run.mapping_trace)))
        assert transfer_precedes_remap(run)


def _state(owner):
    return ReplicaState({"x": 0}, ObjectMapping({"x": owner}))


class TestChangeNode:
    def test_move_up_after_transfer(self):
        run = run_simulation(SimConfig(process_count=2, op_count=30, seed=3, change_node_rate=0.5))
        log = run.broadcast_log
        for transfer, change in run.transfers:
            assert log.position(transfer) < log.position(change)
            assert log.messages[transfer].payload.transfer_for == change

    def test_stale_move_is_noop(self):
        s = _state(3)
        first = apply_change_node(s, ChangeNodePayload("x", 3, 1))
        second = apply_change_node(first, ChangeNodePayload("x", 3, 4))
        assert first.mapping.owner["x"] == 1 and first.mapping.version == 1
        assert second == first

    def test_replay_of_concurrent_moves_is_deterministic(self):
        s = _state(3)
        moves = [ChangeNodePayload("x", 3, 1), ChangeNodePayload("x", 3, 4)]
        outcomes = set()
        for _ in range(3):
            st = s
            for m in moves:
                st = apply_change_node(st, m)
            outcomes.add((st.mapping.owner["x"], st.mapping.version))
        assert outcomes == {(1, 1)}

    def test_same_node(self):
        s = _state(2)
        moved = apply_change_node(s, ChangeNodePayload("x", 2, 2))
        assert moved.mapping.version == 1
        assert moved.mapping.owner == s.mapping.owner
        assert moved.values == s.values


class TestObjectOrders:
    def test_lagging_read_sits_between_writes(self):
        from coppar_check.broadcast import BroadcastLog, Message, WritePayload, broadcast, deliver_step
        from coppar_check.history import HistoryBuilder

        b = HistoryBuilder()
        w1 = b.write(0, "x", 1)
        w2 = b.write(0, "x", 2)
        r = b.read(1, "x", 1)
        log = BroadcastLog.empty(2)
        log = broadcast(log, Message(w1, 0, WritePayload("x", 1)))
        log = broadcast(log, Message(w2, 0, WritePayload("x", 2)))
        log = deliver_step(deliver_step(log, 0, 2), 1, 1)
        run = SimRun(SimConfig(), build_topology(2), _state(0), b.build(), log, (w1, w2), (), {r: 1})
        assert extract_object_orders(run) == {"x": (w1, r, w2)}

        bad = SimRun(SimConfig(), build_topology(2), _state(0), b.build(), log, (w1, w2), (), {r: 2})
        with pytest.raises(SimulatorBug):
            extract_object_orders(bad)

    def test_unread_object(self):
        run = run_simulation(SimConfig(op_count=12, seed=2, read_probability=0.0))
        orders = extract_object_orders(run)
        for obj, order in orders.items():
            assert list(order) == [w for w in run.cast_order if w in set(order)]

    def test_never_written(self):
        run = run_simulation(SimConfig(process_count=1, object_count=1, op_count=1, seed=0, read_probability=1.0))
        (op,) = operations_of(run.history)
        assert op.read_value == 0
        assert extract_object_orders(run) == {"x": (op.op_id,)}

    def test_orders_are_legal(self):
        for seed in range(50):
            run = run_simulation(SimConfig(op_count=30, seed=seed, change_node_rate=0.1, max_staleness=4))
            ops = {op.op_id: op for op in operations_of(run.history)}
            for obj, order in extract_object_orders(run).items():
                assert is_legal_order([ops[i] for i in order])
