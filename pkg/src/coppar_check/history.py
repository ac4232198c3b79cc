"""Events, operations and histories of read/write registers.

A history is a finite sequence of invocation and response events issued by
sequential processes against shared objects.  Positions in the sequence are
the only notion of time; the real-time order between operations is derived
from them on demand and never stored.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Sequence

from .errors import WellFormednessError

INITIAL_VALUE = 0


class Kind(str, enum.Enum):
    INV = "inv"
    RES = "res"


class Action(str, enum.Enum):
    READ = "r"
    WRITE = "w"


class _Pending:
    __slots__ = ()

    def __repr__(self):
        return "PENDING"

    def __reduce__(self):
        return "PENDING"


#: Marker for the response slots of an operation that has not returned.
PENDING = _Pending()


@dataclass(frozen=True, slots=True)
class Event:
    kind: Kind
    op_id: int
    process: int
    action: Action
    object: str
    value: Optional[int] = None

    def __str__(self):
        val = "" if self.value is None else f",{self.value}"
        return f"{self.kind.value}({self.action.value}{self.op_id},P{self.process},{self.object}{val})"


@dataclass(frozen=True, slots=True)
class Operation:
    """An invocation paired with its response (or with ``PENDING``)."""

    op_id: int
    process: int
    action: Action
    object: str
    written_value: Optional[int]
    read_value: object  # int, None for writes, or PENDING
    inv_index: int
    res_index: object  # int or PENDING

    @property
    def is_write(self) -> bool:
        return self.action is Action.WRITE

    @property
    def is_read(self) -> bool:
        return self.action is Action.READ

    @property
    def pending(self) -> bool:
        return self.res_index is PENDING

    @property
    def value(self):
        """The value the operation carries: written value or value read."""
        return self.written_value if self.is_write else self.read_value

    def __str__(self):
        if self.is_write:
            return f"w{self.op_id}(P{self.process},{self.object}:={self.written_value})"
        shown = "?" if self.pending else self.read_value
        return f"r{self.op_id}(P{self.process},{self.object})={shown}"


@dataclass(frozen=True)
class History:
    events: tuple = ()

    def __post_init__(self):
        if not isinstance(self.events, tuple):
            object.__setattr__(self, "events", tuple(self.events))

    def __len__(self):
        return len(self.events)

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)

    def __getitem__(self, item):
        return self.events[item]

    def __str__(self):
        return "[" + ", ".join(str(e) for e in self.events) + "]"

    @property
    def processes(self) -> list[int]:
        return sorted({e.process for e in self.events})

    @property
    def objects(self) -> list[str]:
        return sorted({e.object for e in self.events})


# -- event constructors -------------------------------------------------------

def inv_write(op_id: int, process: int, obj: str, value: int) -> Event:
    return Event(Kind.INV, op_id, process, Action.WRITE, obj, value)


def res_write(op_id: int, process: int, obj: str) -> Event:
    return Event(Kind.RES, op_id, process, Action.WRITE, obj, None)


def inv_read(op_id: int, process: int, obj: str) -> Event:
    return Event(Kind.INV, op_id, process, Action.READ, obj, None)


def res_read(op_id: int, process: int, obj: str, value: int) -> Event:
    return Event(Kind.RES, op_id, process, Action.READ, obj, value)


def response_for(invocation: Event, value: Optional[int] = None) -> Event:
    """Build the response matching ``invocation``; reads need ``value``."""
    if invocation.action is Action.READ:
        if value is None:
            raise ValueError("a read response needs a value")
        return res_read(invocation.op_id, invocation.process, invocation.object, value)
    return res_write(invocation.op_id, invocation.process, invocation.object)


class HistoryBuilder:
    """Incrementally records a history, allocating op ids as it goes.

    >>> b = HistoryBuilder()
    >>> w = b.invoke_write(0, "x", 1)
    >>> b.respond(w)
    >>> len(b.build())
    2
    """

    def __init__(self, first_op_id: int = 0):
        self._events: list[Event] = []
        self._open: dict[int, Event] = {}
        self._next = first_op_id

    def _invoke(self, event: Event) -> int:
        self._events.append(event)
        self._open[event.op_id] = event
        self._next = max(self._next, event.op_id + 1)
        return event.op_id

    def invoke_write(self, process: int, obj: str, value: int, op_id: int | None = None) -> int:
        return self._invoke(inv_write(self._next if op_id is None else op_id, process, obj, value))

    def invoke_read(self, process: int, obj: str, op_id: int | None = None) -> int:
        return self._invoke(inv_read(self._next if op_id is None else op_id, process, obj))

    def respond(self, op_id: int, value: Optional[int] = None) -> None:
        self._events.append(response_for(self._open.pop(op_id), value))

    def write(self, process: int, obj: str, value: int) -> int:
        """Record a write whose invocation is immediately followed by its response."""
        op = self.invoke_write(process, obj, value)
        self.respond(op)
        return op

    def read(self, process: int, obj: str, value: int) -> int:
        op = self.invoke_read(process, obj)
        self.respond(op, value)
        return op

    def build(self) -> History:
        return History(tuple(self._events))


# -- projections and predicates -----------------------------------------------

def project_process(h: History, p: int) -> History:
    """H|P: the events of ``h`` issued by process ``p``, in order."""
    return History(tuple(e for e in h.events if e.process == p))


def project_object(h: History, x: str) -> History:
    """H|x: the events of ``h`` touching object ``x``, in order."""
    return History(tuple(e for e in h.events if e.object == x))


def _matches(inv: Event, res: Event) -> bool:
    return (
        inv.kind is Kind.INV
        and res.kind is Kind.RES
        and inv.op_id == res.op_id
        and inv.process == res.process
        and inv.action is res.action
        and inv.object == res.object
    )


def is_sequential(h: History) -> bool:
    """True iff ``h`` alternates invocation, matching response, invocation, ...

    The last invocation may be left without a response.
    """
    events = h.events
    for i, e in enumerate(events):
        if i % 2 == 0:
            if e.kind is not Kind.INV:
                return False
        elif not _matches(events[i - 1], e):
            return False
    return True


def is_well_formed(h: History) -> bool:
    """True iff every process subhistory is sequential and op ids are unique."""
    open_by_process: dict[int, Event] = {}
    seen: set[int] = set()
    for e in h.events:
        if e.kind is Kind.INV:
            if e.process in open_by_process or e.op_id in seen:
                return False
            seen.add(e.op_id)
            open_by_process[e.process] = e
        else:
            inv = open_by_process.pop(e.process, None)
            if inv is None or not _matches(inv, e):
                return False
    return True


def equivalent(h1: History, h2: History) -> bool:
    """Two histories are equivalent when every process subhistory coincides."""
    procs = set(h1.processes) | set(h2.processes)
    return all(project_process(h1, p) == project_process(h2, p) for p in procs)


def pending_invocations(h: History) -> list[Event]:
    answered = {e.op_id for e in h.events if e.kind is Kind.RES}
    return [e for e in h.events if e.kind is Kind.INV and e.op_id not in answered]


def complete(h: History) -> History:
    """Drop every invocation that has no matching response."""
    answered = {e.op_id for e in h.events if e.kind is Kind.RES}
    if len(answered) * 2 == len(h.events):
        return h
    return History(tuple(e for e in h.events if e.kind is Kind.RES or e.op_id in answered))


def is_complete(h: History) -> bool:
    return not pending_invocations(h)


def operations_of(h: History) -> list[Operation]:
    """Pair invocations with responses, in invocation order.

    Raises WellFormednessError when a response has no open invocation of the
    same process or does not match it.
    """
    open_by_process: dict[int, tuple[int, Event]] = {}
    slots: dict[int, list] = {}
    order: list[int] = []
    for idx, e in enumerate(h.events):
        if e.kind is Kind.INV:
            if e.process in open_by_process:
                raise WellFormednessError(f"event {idx}: process P{e.process} already has a pending invocation")
            if e.op_id in slots:
                raise WellFormednessError(f"event {idx}: op id {e.op_id} invoked twice")
            open_by_process[e.process] = (idx, e)
            slots[e.op_id] = [idx, PENDING, PENDING]
            order.append(e.op_id)
        else:
            entry = open_by_process.pop(e.process, None)
            if entry is None or not _matches(entry[1], e):
                raise WellFormednessError(f"event {idx}: response {e} has no matching invocation")
            slot = slots[e.op_id]
            slot[1] = idx
            slot[2] = e.value
    ops = []
    for op_id in order:
        inv_index, res_index, res_value = slots[op_id]
        inv = h.events[inv_index]
        if inv.action is Action.WRITE:
            ops.append(Operation(op_id, inv.process, inv.action, inv.object, inv.value, None, inv_index, res_index))
        else:
            ops.append(Operation(op_id, inv.process, inv.action, inv.object, None, res_value, inv_index, res_index))
    return ops


def sequential_history(ops: Iterable[Operation]) -> History:
    """Materialize a total order of complete operations as a sequential history."""
    events = []
    for op in ops:
        if op.is_write:
            events.append(inv_write(op.op_id, op.process, op.object, op.written_value))
            events.append(res_write(op.op_id, op.process, op.object))
        else:
            events.append(inv_read(op.op_id, op.process, op.object))
            events.append(res_read(op.op_id, op.process, op.object, op.read_value))
    return History(tuple(events))


# -- extensions ---------------------------------------------------------------

@dataclass(frozen=True)
class Extensions:
    """The extensions of a history, and whether enumeration was cut short."""

    histories: tuple
    truncated: bool = False

    def __iter__(self):
        return iter(self.histories)

    def __len__(self):
        return len(self.histories)


def candidate_read_values(h: History, obj: str) -> list[int]:
    """Values a pending read of ``obj`` could return: the initial value or any written one."""
    vals = {INITIAL_VALUE}
    vals.update(e.value for e in h.events if e.kind is Kind.INV and e.action is Action.WRITE and e.object == obj)
    return sorted(vals)


def iter_extensions(h: History) -> Iterator[History]:
    """Lazily yield every extension of ``h`` by appended responses.

    Responses for the chosen pending invocations are appended in invocation
    order; appending them in any other order yields a history with the same
    process subhistories and the same real-time order.
    """
    pending = pending_invocations(h)
    if not pending:
        yield h
        return
    for size in range(len(pending) + 1):
        for chosen in itertools.combinations(pending, size):
            choices = [
                candidate_read_values(h, inv.object) if inv.action is Action.READ else [None]
                for inv in chosen
            ]
            for values in itertools.product(*choices):
                tail = tuple(response_for(inv, v) for inv, v in zip(chosen, values))
                yield History(h.events + tail)


def extensions(h: History, max_count: int | None = None) -> Extensions:
    """Enumerate the histories obtained by appending responses to pending invocations."""
    out = []
    for ext in iter_extensions(h):
        if max_count is not None and len(out) >= max_count:
            return Extensions(tuple(out), truncated=True)
        out.append(ext)
    return Extensions(tuple(out))


def extension_count(h: History) -> int:
    """How many histories ``iter_extensions`` will produce, without building them."""
    pending = pending_invocations(h)
    total = 0
    for size in range(len(pending) + 1):
        for chosen in itertools.combinations(pending, size):
            n = 1
            for inv in chosen:
                if inv.action is Action.READ:
                    n *= len(candidate_read_values(h, inv.object))
            total += n
    return total


def ops_by_id(ops: Sequence[Operation]) -> dict[int, Operation]:
    return {op.op_id: op for op in ops}
