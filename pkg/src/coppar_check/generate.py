"""Small-history enumeration and random history generation for checker testing."""

from __future__ import annotations

import itertools
import random
from typing import Iterator, Sequence

from .history import Event, History, inv_read, inv_write, res_read, res_write


def _op_labels(objects, values):
    for action in ("w", "r"):
        for obj in objects:
            for v in values:
                yield action, obj, v


def _events_for(op_id, process, label):
    action, obj, v = label
    if action == "w":
        return inv_write(op_id, process, obj, v), res_write(op_id, process, obj)
    return inv_read(op_id, process, obj), res_read(op_id, process, obj, v)


def _interleavings(n0: int, n1: int) -> list[tuple[int, ...]]:
    """Every merge of two sequences of lengths n0 and n1, as a list of 0/1 owners."""
    out = []
    total = n0 + n1
    for ones in itertools.combinations(range(total), n1):
        owner = [0] * total
        for k in ones:
            owner[k] = 1
        out.append(tuple(owner))
    return out


def enumerate_histories(
    max_ops: int = 4,
    objects: Sequence[str] = ("x", "y"),
    values: Sequence[int] = (0, 1),
) -> Iterator[History]:
    """Every complete well-formed history over two processes with at most ``max_ops`` operations.

    Each operation is a read or write of one of ``objects`` carrying one of
    ``values``.  Op ids are assigned in invocation order.
    """
    labels = list(_op_labels(objects, values))
    for n in range(max_ops + 1):
        for n0 in range(n + 1):
            n1 = n - n0
            merges = _interleavings(2 * n0, 2 * n1)
            for ops0 in itertools.product(labels, repeat=n0):
                for ops1 in itertools.product(labels, repeat=n1):
                    for owner in merges:
                        yield _materialize(owner, (ops0, ops1))


def _materialize(owner, per_process) -> History:
    events: list[Event] = []
    cursor = [0, 0]
    open_ids = [None, None]
    next_id = 0
    for p in owner:
        k = cursor[p]
        cursor[p] += 1
        label = per_process[p][k // 2]
        if k % 2 == 0:
            open_ids[p] = next_id
            next_id += 1
            events.append(_events_for(open_ids[p], p, label)[0])
        else:
            events.append(_events_for(open_ids[p], p, label)[1])
    return History(tuple(events))


def enumeration_size(max_ops: int = 4, labels: int = 8) -> int:
    from math import comb

    return sum(labels ** n * sum(comb(2 * n, 2 * n0) for n0 in range(n + 1)) for n in range(max_ops + 1))


def random_history(
    rng: random.Random,
    max_ops: int = 8,
    processes: int = 3,
    objects: Sequence[str] = ("x", "y"),
    values: Sequence[int] = (1, 2),
    pending_probability: float = 0.2,
) -> History:
    """A random well-formed history; reads return 0 or a value some write uses.

    Each process may leave its last operation pending with probability
    ``pending_probability``.
    """
    n_ops = rng.randint(0, max_ops)
    owners = [rng.randrange(processes) for _ in range(n_ops)]
    per_process: dict[int, list] = {}
    for p in owners:
        action = "w" if rng.random() < 0.5 else "r"
        per_process.setdefault(p, []).append((action, rng.choice(objects), None))
    written = {x: set() for x in objects}
    for p, ops in per_process.items():
        for k, (action, obj, _) in enumerate(ops):
            if action == "w":
                v = rng.choice(values)
                ops[k] = (action, obj, v)
                written[obj].add(v)
    for p, ops in per_process.items():
        for k, (action, obj, v) in enumerate(ops):
            if action == "r":
                ops[k] = (action, obj, rng.choice([0] + sorted(written[obj])))

    # Each process contributes 2 events per op; a pending last op drops its response.
    slots = []
    drops = set()
    for p, ops in per_process.items():
        count = 2 * len(ops)
        if ops and rng.random() < pending_probability:
            count -= 1
            drops.add(p)
        slots.extend([p] * count)
    rng.shuffle(slots)

    events: list[Event] = []
    cursor = {p: 0 for p in per_process}
    open_ids: dict[int, int] = {}
    next_id = 0
    for p in slots:
        k = cursor[p]
        cursor[p] += 1
        label = per_process[p][k // 2]
        if k % 2 == 0:
            open_ids[p] = next_id
            next_id += 1
            events.append(_events_for(open_ids[p], p, label)[0])
        else:
            events.append(_events_for(open_ids[p], p, label)[1])
    return History(tuple(events))
