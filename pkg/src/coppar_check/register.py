"""Sequential specification of integer read/write registers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Sequence

from .errors import PreconditionError
from .history import (
    INITIAL_VALUE,
    Action,
    History,
    Kind,
    Operation,
    is_sequential,
    project_object,
)


@dataclass(frozen=True)
class RegisterState:
    current: int = INITIAL_VALUE

    def write(self, value: int) -> "RegisterState":
        return RegisterState(value)

    def can_read(self, value) -> bool:
        return value == self.current


def _replay(events) -> bool:
    state = RegisterState()
    for e in events:
        if e.kind is not Kind.RES and e.action is Action.WRITE:
            # A write takes effect in the sequential order at its invocation;
            # a trailing pending write is harmless for legality.
            state = state.write(e.value)
        elif e.kind is Kind.RES and e.action is Action.READ and not state.can_read(e.value):
            return False
    return True


def is_legal_object_history(s: History) -> bool:
    """Replay a sequential single-object history against a fresh register.

    Every read must return the most recently written value, or the initial
    value 0 when nothing has been written yet.
    """
    if not is_sequential(s):
        raise PreconditionError("history is not sequential")
    if len({e.object for e in s.events}) > 1:
        raise PreconditionError("history touches more than one object")
    return _replay(s.events)


def is_legal(s: History) -> bool:
    """A sequential history is legal when each of its object subhistories is."""
    if not is_sequential(s):
        raise PreconditionError("history is not sequential")
    return all(_replay(project_object(s, x).events) for x in s.objects)


def is_legal_order(ops: Iterable[Operation]) -> bool:
    """Legality of a total order of complete operations, all on one object."""
    current = INITIAL_VALUE
    for op in ops:
        if op.is_write:
            current = op.written_value
        elif op.read_value != current:
            return False
    return True


def legal_serializations_of_object(
    ops: Iterable[Operation], write_order: Optional[Sequence[int]] = None
) -> Iterator[tuple[Operation, ...]]:
    """Yield every legal total order of ``ops`` that keeps each process's order.

    The per-process order is kept because a serialization must be equivalent
    to the object subhistory it orders.  Orders come out in a fixed sequence
    determined by op ids, whatever order the input arrives in.  When
    ``write_order`` (op ids) is given, writes must also appear in that order.
    """
    ops = sorted(ops, key=lambda o: o.op_id)
    if not ops:
        yield ()
        return
    obj = ops[0].object
    for op in ops:
        if op.pending:
            raise PreconditionError(f"operation {op} is pending")
        if op.object != obj:
            raise PreconditionError("operations touch more than one object")

    n = len(ops)
    # Each op may only be placed once its same-process predecessor is.
    prev_in_process = [-1] * n
    last_seen: dict[int, int] = {}
    for i in sorted(range(n), key=lambda i: ops[i].inv_index):
        prev_in_process[i] = last_seen.get(ops[i].process, -1)
        last_seen[ops[i].process] = i
    prev_write = [-1] * n
    if write_order is not None:
        rank = {op_id: k for k, op_id in enumerate(write_order)}
        ranked = sorted((i for i in range(n) if ops[i].is_write), key=lambda i: rank[ops[i].op_id])
        for a, b in zip(ranked, ranked[1:]):
            prev_write[b] = a

    placed = [False] * n
    chosen: list[int] = []
    unplaced_writes: dict[int, int] = {}
    for op in ops:
        if op.is_write:
            unplaced_writes[op.written_value] = unplaced_writes.get(op.written_value, 0) + 1
    reads = [i for i in range(n) if ops[i].is_read]

    def extend(current):
        if len(chosen) == n:
            yield tuple(ops[i] for i in chosen)
            return
        for i in reads:
            # A read whose value is neither current nor still to be written is dead.
            v = ops[i].read_value
            if not placed[i] and v != current and not unplaced_writes.get(v):
                return
        for i in range(n):
            if placed[i]:
                continue
            pred = prev_in_process[i]
            if pred >= 0 and not placed[pred]:
                continue
            pred = prev_write[i]
            if pred >= 0 and not placed[pred]:
                continue
            op = ops[i]
            if op.is_read and op.read_value != current:
                continue
            placed[i] = True
            chosen.append(i)
            if op.is_write:
                unplaced_writes[op.written_value] -= 1
                yield from extend(op.written_value)
                unplaced_writes[op.written_value] += 1
            else:
                yield from extend(current)
            chosen.pop()
            placed[i] = False

    yield from extend(INITIAL_VALUE)
