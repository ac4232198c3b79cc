"""Ordered sequential consistency (OSC) checking.

A history is OSC for a subset A of its operations when some extension of it
admits a total order S of its completed operations such that

* every object subsequence of S is legal for a register,
* S respects each process's program order, and
* for every operation ``b`` in A, each operation ``a`` on the same object that
  finished before ``b`` started precedes ``b`` in S.

A = all operations gives linearizability; A = {} gives sequential consistency.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .errors import PreconditionError, WellFormednessError
from .history import (
    INITIAL_VALUE,
    History,
    Kind,
    Operation,
    complete,
    is_well_formed,
    iter_extensions,
    operations_of,
    sequential_history,
)
from .orders import real_time_precedes
from .register import is_legal

DEFAULT_BUDGET = 10**6
EXHAUSTIVE_MAX_OPS = 10


class PolicyMode(str, enum.Enum):
    ALL = "all"
    NONE = "none"
    WRITES = "writes"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class SubsetPolicy:
    """Which operations form the real-time subset A."""

    mode: PolicyMode
    ids: frozenset = frozenset()

    @classmethod
    def all(cls):
        return cls(PolicyMode.ALL)

    @classmethod
    def none(cls):
        return cls(PolicyMode.NONE)

    @classmethod
    def writes_only(cls):
        return cls(PolicyMode.WRITES)

    @classmethod
    def explicit(cls, ids: Iterable[int]):
        return cls(PolicyMode.EXPLICIT, frozenset(ids))

    def members(self, ops: Sequence[Operation]) -> frozenset:
        if self.mode is PolicyMode.ALL:
            return frozenset(op.op_id for op in ops)
        if self.mode is PolicyMode.WRITES:
            return frozenset(op.op_id for op in ops if op.is_write)
        if self.mode is PolicyMode.EXPLICIT:
            return frozenset(op.op_id for op in ops if op.op_id in self.ids)
        return frozenset()

    def __str__(self):
        if self.mode is PolicyMode.EXPLICIT:
            return f"explicit{sorted(self.ids)}"
        return self.mode.value


@dataclass(frozen=True)
class Serialization:
    order: tuple  # op ids
    subset_a: frozenset = frozenset()


class Outcome(str, enum.Enum):
    CONSISTENT = "consistent"
    VIOLATION = "violation"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class Verdict:
    outcome: Outcome
    witness: Optional[Serialization] = None
    reason: str = ""
    extension: Optional[History] = None
    explored: int = 0

    @property
    def consistent(self) -> bool:
        return self.outcome is Outcome.CONSISTENT

    @property
    def violation(self) -> bool:
        return self.outcome is Outcome.VIOLATION

    @property
    def inconclusive(self) -> bool:
        return self.outcome is Outcome.INCONCLUSIVE


class _BudgetExhausted(Exception):
    pass


@dataclass
class _Counter:
    limit: int
    used: int = 0

    def tick(self):
        self.used += 1
        if self.used > self.limit:
            raise _BudgetExhausted


def _validate_policy(h: History, a: SubsetPolicy) -> None:
    if a.mode is PolicyMode.EXPLICIT:
        known = {op.op_id for op in operations_of(h)}
        unknown = a.ids - known
        if unknown:
            raise PreconditionError(f"subset A names unknown operations {sorted(unknown)}")


def _search(ops: list[Operation], members: frozenset, counter: _Counter) -> Optional[list[int]]:
    """Backtracking search for a serialization of complete ``ops``.

    States are (placed set, register contents); states already shown to be
    dead ends are cached.
    """
    n = len(ops)
    if n == 0:
        return []
    objects = sorted({op.object for op in ops})
    obj_index = {x: k for k, x in enumerate(objects)}
    obj_of = [obj_index[op.object] for op in ops]
    is_write = [op.is_write for op in ops]
    value = [op.written_value if op.is_write else op.read_value for op in ops]

    pred = [0] * n
    last_of_process: dict[int, int] = {}
    for i, op in enumerate(ops):
        j = last_of_process.get(op.process)
        if j is not None:
            pred[i] |= 1 << j
        last_of_process[op.process] = i
        if op.op_id in members:
            for j, other in enumerate(ops):
                if j != i and obj_of[j] == obj_of[i] and other.res_index < op.inv_index:
                    pred[i] |= 1 << j

    # For each read, the writes that could still supply the value it returned.
    reads = [i for i in range(n) if not is_write[i]]
    suppliers = [0] * n
    for i in reads:
        for j in range(n):
            if is_write[j] and obj_of[j] == obj_of[i] and value[j] == value[i]:
                suppliers[i] |= 1 << j

    full = (1 << n) - 1
    dead: set = set()
    order: list[int] = []

    def feasible(placed, state):
        for i in reads:
            if not placed >> i & 1 and state[obj_of[i]] != value[i] and not suppliers[i] & ~placed:
                return False
        return True

    def visit(placed, state):
        if placed == full:
            return True
        key = (placed, state)
        if key in dead:
            return False
        counter.tick()
        if feasible(placed, state):
            for i in range(n):
                bit = 1 << i
                if placed & bit or pred[i] & ~placed:
                    continue
                if is_write[i]:
                    k = obj_of[i]
                    nxt = state[:k] + (value[i],) + state[k + 1:]
                elif state[obj_of[i]] != value[i]:
                    continue
                else:
                    nxt = state
                order.append(i)
                if visit(placed | bit, nxt):
                    return True
                order.pop()
        dead.add(key)
        return False

    if visit(0, (INITIAL_VALUE,) * len(objects)):
        return [ops[i].op_id for i in order]
    return None


def check_osc(h: History, a: SubsetPolicy, budget: int = DEFAULT_BUDGET) -> Verdict:
    """Decide whether ``h`` is OSC with real-time subset ``a``."""
    if not is_well_formed(h):
        raise WellFormednessError("history is not well-formed")
    _validate_policy(h, a)
    counter = _Counter(budget)
    tried = 0
    try:
        for ext in iter_extensions(h):
            counter.tick()
            tried += 1
            ops = operations_of(complete(ext))
            members = a.members(ops)
            found = _search(ops, members, counter)
            if found is not None:
                return Verdict(Outcome.CONSISTENT, Serialization(tuple(found), members), extension=ext,
                               explored=counter.used)
    except _BudgetExhausted:
        return Verdict(Outcome.INCONCLUSIVE, reason=f"budget of {budget} states exhausted after {tried} extension(s)",
                       explored=counter.used)
    return Verdict(Outcome.VIOLATION,
                   reason=f"no legal serialization respects process order and real-time subset {a} "
                          f"in any of {tried} extension(s)",
                   explored=counter.used)


def check_linearizable(h: History, budget: int = DEFAULT_BUDGET) -> Verdict:
    return check_osc(h, SubsetPolicy.all(), budget)


def check_sequentially_consistent(h: History, budget: int = DEFAULT_BUDGET) -> Verdict:
    return check_osc(h, SubsetPolicy.none(), budget)


def validate_witness(extension: History, order: Sequence[int], subset_a: Iterable[int],
                     conditions: str = "L1 L2 L3") -> list[str]:
    """Re-check a serialization against the OSC conditions; returns the problems found.

    ``conditions`` selects which of the legality (L1), process-order (L2) and
    real-time (L3) conditions to check.
    """
    ops = operations_of(complete(extension))
    by_id = {op.op_id: op for op in ops}
    problems = []
    if sorted(order) != sorted(by_id):
        return [f"order {list(order)} is not a permutation of completed operations {sorted(by_id)}"]
    pos = {op_id: k for k, op_id in enumerate(order)}
    if "L1" in conditions and not is_legal(sequential_history(by_id[i] for i in order)):
        problems.append("L1: the serialization is not legal")
    if "L2" in conditions:
        for a_op in ops:
            for b_op in ops:
                if a_op.process == b_op.process and a_op.inv_index < b_op.inv_index and pos[a_op.op_id] > pos[b_op.op_id]:
                    problems.append(f"L2: {a_op} precedes {b_op} in P{a_op.process} but not in S")
    if "L3" in conditions:
        subset_a = set(subset_a)
        for b_op in ops:
            if b_op.op_id not in subset_a:
                continue
            for a_op in ops:
                if (a_op.object == b_op.object and real_time_precedes(extension, a_op, b_op)
                        and pos[a_op.op_id] > pos[b_op.op_id]):
                    problems.append(f"L3: {a_op} finished before {b_op} started but follows it in S")
    return problems


# -- brute-force oracle -------------------------------------------------------

def _constraint_pairs(events, ops, members):
    """(before, after) index pairs demanded by process order and by real time into ``members``."""
    res_at = {}
    inv_at = {}
    for idx, e in enumerate(events):
        if e.kind is Kind.RES:
            res_at[e.op_id] = idx
        else:
            inv_at[e.op_id] = idx
    process_pairs = []
    rt_pairs = []
    for i, a_op in enumerate(ops):
        for j, b_op in enumerate(ops):
            if i == j:
                continue
            if a_op.process == b_op.process and inv_at[a_op.op_id] < inv_at[b_op.op_id]:
                process_pairs.append((i, j))
            if b_op.op_id in members and a_op.object == b_op.object and res_at[a_op.op_id] < inv_at[b_op.op_id]:
                rt_pairs.append((i, j))
    return process_pairs, rt_pairs


def exhaustive_verdicts(h: History, policies: Sequence[SubsetPolicy]) -> list[Verdict]:
    """Brute force over every extension and every permutation, for several policies at once."""
    if not is_well_formed(h):
        raise WellFormednessError("history is not well-formed")
    total_ops = len(operations_of(h))
    if total_ops > EXHAUSTIVE_MAX_OPS:
        raise PreconditionError(f"{total_ops} operations exceed the exhaustive cap of {EXHAUSTIVE_MAX_OPS}")
    for a in policies:
        _validate_policy(h, a)
    results: list[Optional[Verdict]] = [None] * len(policies)
    for ext in iter_extensions(h):
        done = complete(ext)
        ops = operations_of(done)
        process_pairs: list = []
        per_policy = []
        for a in policies:
            members = a.members(ops)
            process_pairs, rt = _constraint_pairs(done.events, ops, members)
            per_policy.append((members, rt))
        n = len(ops)
        for perm in itertools.permutations(range(n)):
            pos = [0] * n
            for k, i in enumerate(perm):
                pos[i] = k
            if any(pos[i] > pos[j] for i, j in process_pairs):
                continue
            current: dict = {}
            legal = True
            for i in perm:
                op = ops[i]
                if op.is_write:
                    current[op.object] = op.written_value
                elif current.get(op.object, INITIAL_VALUE) != op.read_value:
                    legal = False
                    break
            if not legal:
                continue
            for k, (members, rt) in enumerate(per_policy):
                if results[k] is None and all(pos[i] < pos[j] for i, j in rt):
                    order = tuple(ops[i].op_id for i in perm)
                    results[k] = Verdict(Outcome.CONSISTENT, Serialization(order, members), extension=ext)
            if all(r is not None for r in results):
                return results
    return [r if r is not None else Verdict(Outcome.VIOLATION, reason=f"no permutation satisfies L1-L3 for {a}")
            for r, a in zip(results, policies)]


def check_exhaustive(h: History, a: SubsetPolicy) -> Verdict:
    """Ground-truth OSC verdict by enumeration; limited to small histories."""
    return exhaustive_verdicts(h, [a])[0]
