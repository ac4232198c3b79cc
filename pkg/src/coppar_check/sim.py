"""Deterministic simulator of a CoPPar-style tree with write-order broadcast.

Processes sit on nodes of a rooted tree and read from their node's replica,
which may lag behind the broadcast sequence by up to ``max_staleness``
messages.  Writes go through the sequencer in ``broadcast``.  A change-node
operation moves an object one level up (or, at the root, one level down); it
is issued as a state-transfer write carrying the object's value followed by
the remap message, both sequenced by the same broadcast.

Upgrade and downgrade internals of a real tree are not modelled beyond that.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from .broadcast import (
    BroadcastLog,
    ChangeNodePayload,
    Message,
    WritePayload,
    broadcast,
    deliver_step,
    deliver_through,
    dumps_log,
)
from .errors import PreconditionError, SimulatorBug
from .files import dumps_history
from .history import INITIAL_VALUE, History, HistoryBuilder, operations_of

SKIP_PROBABILITY = 0.25
MAX_LAG_PER_TURN = 1


@dataclass(frozen=True)
class SimConfig:
    process_count: int = 3
    object_count: int = 2
    op_count: int = 10
    seed: int = 0
    read_probability: float = 0.5
    change_node_rate: float = 0.0
    max_staleness: int = 2

    def validate(self) -> None:
        for name in ("process_count", "object_count", "op_count"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v <= 0:
                raise PreconditionError(f"{name} must be a positive integer, got {v!r}")
        for name in ("read_probability", "change_node_rate"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not 0.0 <= v <= 1.0:
                raise PreconditionError(f"{name} must lie in [0, 1], got {v!r}")
        if not isinstance(self.max_staleness, int) or self.max_staleness < 0:
            raise PreconditionError(f"max_staleness must be a non-negative integer, got {self.max_staleness!r}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise PreconditionError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise PreconditionError(f"unknown config keys {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class TreeTopology:
    parent: tuple  # parent[node], None for the root
    attachment: tuple  # attachment[process] = node

    def validate(self) -> None:
        roots = [n for n, p in enumerate(self.parent) if p is None]
        if len(roots) != 1:
            raise PreconditionError(f"tree needs exactly one root, found {roots}")
        for n in range(len(self.parent)):
            seen = set()
            while n is not None:
                if n in seen:
                    raise PreconditionError("parent mapping has a cycle")
                seen.add(n)
                n = self.parent[n]
        for p, node in enumerate(self.attachment):
            if not 0 <= node < len(self.parent):
                raise PreconditionError(f"process P{p} attached to unknown node {node}")

    @property
    def node_count(self) -> int:
        return len(self.parent)

    def children(self, node: int) -> list[int]:
        return [n for n, p in enumerate(self.parent) if p == node]


def build_topology(process_count: int) -> TreeTopology:
    """A heap-shaped tree with one node per process plus a root."""
    nodes = process_count + 1
    parent = (None,) + tuple((i - 1) // 2 for i in range(1, nodes))
    topo = TreeTopology(parent, tuple(p + 1 for p in range(process_count)))
    topo.validate()
    return topo


def object_names(count: int) -> list[str]:
    base = ["x", "y", "z"]
    return base[:count] if count <= len(base) else [f"x{i}" for i in range(count)]


@dataclass(frozen=True)
class ObjectMapping:
    owner: dict  # object -> node
    version: int = 0


@dataclass(frozen=True)
class ReplicaState:
    values: dict  # object -> value
    mapping: ObjectMapping


def apply_change_node(state: ReplicaState, msg: ChangeNodePayload) -> ReplicaState:
    """Remap an object if it still lives on the message's source node.

    A move whose source is stale (an earlier move in the broadcast order got
    there first) changes nothing.  Moving to the node it is already on only
    bumps the mapping version.
    """
    if state.mapping.owner.get(msg.object) != msg.source:
        return state
    owner = dict(state.mapping.owner)
    owner[msg.object] = msg.destination
    return ReplicaState(state.values, ObjectMapping(owner, state.mapping.version + 1))


def apply_message(state: ReplicaState, m: Message) -> ReplicaState:
    if isinstance(m.payload, WritePayload):
        values = dict(state.values)
        values[m.payload.object] = m.payload.value
        return ReplicaState(values, state.mapping)
    return apply_change_node(state, m.payload)


def replay(initial: ReplicaState, messages) -> list[ReplicaState]:
    """States after each prefix of ``messages``; element k is the state after k messages."""
    states = [initial]
    for m in messages:
        states.append(apply_message(states[-1], m))
    return states


@dataclass(frozen=True)
class SimRun:
    config: SimConfig
    topology: TreeTopology
    initial_state: ReplicaState
    history: History
    broadcast_log: BroadcastLog
    cast_order: tuple  # op ids of every write-class message, in broadcast order
    mapping_trace: tuple  # ObjectMapping per version
    read_points: dict = field(default_factory=dict)  # read op id -> replica cursor when it returned
    transfers: tuple = ()  # (transfer write msg id, change-node msg id)


@dataclass
class _InFlight:
    op_id: int
    kind: str  # "read" | "write"
    object: str
    wait_for: Optional[int] = None


def run_simulation(cfg: SimConfig) -> SimRun:
    """Run one seeded simulation; identical configs give identical runs."""
    cfg.validate()
    rng = random.Random(cfg.seed)
    topo = build_topology(cfg.process_count)
    objects = object_names(cfg.object_count)
    initial = ReplicaState(
        {x: INITIAL_VALUE for x in objects},
        ObjectMapping({x: rng.randrange(topo.node_count) for x in objects}),
    )
    states = [initial]  # states[k]: replica state after the first k sequenced messages
    log = BroadcastLog.empty(cfg.process_count)
    builder = HistoryBuilder()
    next_id = 0
    next_value = 1
    in_flight: dict[int, _InFlight] = {}
    read_points: dict[int, int] = {}
    transfers = []
    issued = 0

    def cast(log, m):
        log = broadcast(log, m)
        states.append(apply_message(states[-1], m))
        return log

    while issued < cfg.op_count or in_flight:
        for p in range(cfg.process_count):
            if rng.random() < SKIP_PROBABILITY:
                continue
            job = in_flight.pop(p, None)
            if job is not None:
                if job.kind == "read":
                    k = log.cursor(p)
                    builder.respond(job.op_id, states[k].values[job.object])
                    read_points[job.op_id] = k
                else:
                    log = deliver_through(log, p, job.wait_for)
                    builder.respond(job.op_id)
            elif issued < cfg.op_count:
                issued += 1
                obj = objects[rng.randrange(len(objects))]
                roll = rng.random()
                if roll < cfg.change_node_rate:
                    source = states[log.cursor(p)].mapping.owner[obj]
                    up = topo.parent[source]
                    destination = up if up is not None else rng.choice(topo.children(source))
                    transfer_id, change_id = next_id, next_id + 1
                    next_id += 2
                    value = states[-1].values[obj]
                    builder.invoke_write(p, obj, value, op_id=transfer_id)
                    log = cast(log, Message(transfer_id, p, WritePayload(obj, value, transfer_for=change_id)))
                    log = cast(log, Message(change_id, p, ChangeNodePayload(obj, source, destination)))
                    transfers.append((transfer_id, change_id))
                    in_flight[p] = _InFlight(transfer_id, "write", obj, wait_for=change_id)
                elif rng.random() < cfg.read_probability:
                    op_id = next_id
                    next_id += 1
                    builder.invoke_read(p, obj, op_id=op_id)
                    in_flight[p] = _InFlight(op_id, "read", obj)
                else:
                    op_id = next_id
                    next_id += 1
                    builder.invoke_write(p, obj, next_value, op_id=op_id)
                    log = cast(log, Message(op_id, p, WritePayload(obj, next_value)))
                    next_value += 1
                    in_flight[p] = _InFlight(op_id, "write", obj, wait_for=op_id)
            for q in range(cfg.process_count):
                log = deliver_step(log, q, rng.randint(0, MAX_LAG_PER_TURN))
                excess = log.backlog(q) - cfg.max_staleness
                if excess > 0:
                    log = deliver_step(log, q, excess)

    trace = [initial.mapping]
    for st in states[1:]:
        if st.mapping.version != trace[-1].version:
            trace.append(st.mapping)
    cast_order = tuple(m for m in log.sequence if log.messages[m].is_write)
    return SimRun(cfg, topo, initial, builder.build(), log, cast_order, tuple(trace), read_points, tuple(transfers))


def extract_object_orders(run: SimRun) -> dict[str, tuple]:
    """Per-object serializations induced by the broadcast order.

    Writes keep their broadcast order; each read sits after the last write it
    had delivered when it returned.
    """
    log = run.broadcast_log
    position = {m: k for k, m in enumerate(log.sequence)}
    states = replay(run.initial_state, log.ordered_messages())
    keyed: dict[str, list] = {}
    for op in operations_of(run.history):
        if op.pending:
            continue
        if op.is_write:
            key = (position[op.op_id] + 1, 0, 0)
        else:
            k = run.read_points[op.op_id]
            if states[k].values[op.object] != op.read_value:
                raise SimulatorBug(f"{op} disagrees with the delivered prefix of length {k}")
            key = (k, 1, op.res_index)
        keyed.setdefault(op.object, []).append((key, op.op_id))
    return {obj: tuple(op_id for _, op_id in sorted(items)) for obj, items in sorted(keyed.items())}


def transfer_precedes_remap(run: SimRun) -> bool:
    """Every state-transfer write is sequenced before the remap it accompanies."""
    position = {m: k for k, m in enumerate(run.broadcast_log.sequence)}
    return all(position[w] < position[c] for w, c in run.transfers)


def cast_order_respects_processes(run: SimRun) -> bool:
    """Each process's writes appear in the cast order in the order it issued them."""
    rank = {m: k for k, m in enumerate(run.cast_order)}
    last: dict[int, int] = {}
    for op in operations_of(run.history):
        if op.is_write:
            if rank[op.op_id] < last.get(op.process, -1):
                return False
            last[op.process] = rank[op.op_id]
    return True


# -- artifacts ----------------------------------------------------------------

def _digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def manifest_of(run: SimRun, history_text: str, log_text: str) -> dict:
    return {
        "config": asdict(run.config),
        "files": {"history.jsonl": _digest(history_text), "broadcast.log": _digest(log_text)},
        "operations": len(operations_of(run.history)),
        "messages": len(run.broadcast_log.sequence),
        "cast_order": list(run.cast_order),
        "mapping_versions": len(run.mapping_trace),
        "transfers": [list(t) for t in run.transfers],
    }


def write_run(run: SimRun, outdir) -> dict:
    """Write ``history.jsonl``, ``broadcast.log`` and ``manifest.json`` into ``outdir``."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    history_text = dumps_history(run.history)
    log_text = dumps_log(run.broadcast_log)
    manifest = manifest_of(run, history_text, log_text)
    (out / "history.jsonl").write_text(history_text, encoding="utf-8")
    (out / "broadcast.log").write_text(log_text, encoding="utf-8")
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest
