"""Composition order cycle (COC) detection.

A history contains a COC when, in every extension and for every choice of a
legal per-object serialization, the union of those object orders with the
per-process orders is cyclic.  Equivalently, no way of composing legal
object histories yields one global order.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .errors import PreconditionError, WellFormednessError
from .history import History, Operation, complete, is_well_formed, iter_extensions, operations_of
from .orders import CycleWitness, DependencyGraph, Edge, EdgeLabel, find_cycle, process_order_edges
from .register import is_legal_order, legal_serializations_of_object

DEFAULT_BUDGET = 10**6


class CocOutcome(str, enum.Enum):
    CONTAINS_COC = "contains-coc"
    NO_COC = "no-coc"
    L4_UNSATISFIABLE = "l4-unsatisfiable"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class CocReport:
    outcome: CocOutcome
    witness: Optional[CycleWitness] = None
    orders: Mapping[str, tuple] = field(default_factory=dict)  # object -> op ids
    extension: Optional[History] = None
    unsatisfiable_object: Optional[str] = None
    explored: int = 0

    @property
    def contains_coc(self) -> bool:
        return self.outcome is CocOutcome.CONTAINS_COC

    @property
    def no_coc(self) -> bool:
        return self.outcome is CocOutcome.NO_COC


class _Exhausted(Exception):
    pass


def _object_groups(ops: Sequence[Operation]) -> dict[str, list[Operation]]:
    groups: dict[str, list[Operation]] = {}
    for op in ops:
        groups.setdefault(op.object, []).append(op)
    return dict(sorted(groups.items()))


def _edges_for_order(obj: str, order: Sequence[Operation]) -> list[Edge]:
    label = EdgeLabel.object_order(obj)
    return [Edge(a.op_id, b.op_id, label) for a, b in zip(order, order[1:])]


def _search_assignments(ext: History, candidates: Mapping[str, object], state: dict):
    """Look for an acyclic assignment of one order per object.

    ``candidates`` maps each object to a zero-argument callable producing its
    legal serializations.  Returns ``(True, orders)`` for an acyclic
    assignment, or ``(False, (witness, orders))`` for the first cycle seen.
    """
    done = complete(ext)
    nodes = tuple(sorted(op.op_id for op in operations_of(done)))
    base = list(process_order_edges(done))
    objects = list(candidates)
    chosen: dict[str, tuple] = {}
    first_cycle: list = []

    def recurse(k, edges):
        if k == len(objects):
            return True
        obj = objects[k]
        for order in candidates[obj]():
            state["explored"] += 1
            if state["explored"] > state["budget"]:
                raise _Exhausted
            new_edges = edges + _edges_for_order(obj, order)
            chosen[obj] = tuple(op.op_id for op in order)
            cycle = find_cycle(DependencyGraph(nodes, tuple(new_edges)))
            if cycle is not None:
                if not first_cycle:
                    # Complete the partial assignment with each remaining object's first order.
                    full = dict(chosen)
                    for rest in objects[k + 1:]:
                        full[rest] = tuple(op.op_id for op in next(iter(candidates[rest]())))
                    first_cycle.append((cycle, full))
                continue
            if recurse(k + 1, new_edges):
                return True
        chosen.pop(obj, None)
        return False

    if recurse(0, base):
        return True, dict(chosen)
    return False, first_cycle[0]


def _report_from_search(extensions, candidates_for, budget) -> CocReport:
    state = {"explored": 0, "budget": budget}
    cyclic = None
    unsat_object = None
    try:
        for ext in extensions:
            state["explored"] += 1
            ops = operations_of(complete(ext))
            groups = _object_groups(ops)
            candidates = {}
            empty = None
            for obj, members in groups.items():
                gen = candidates_for(obj, members)
                if next(iter(gen()), None) is None:
                    empty = obj
                    break
                candidates[obj] = gen
            if empty is not None:
                unsat_object = unsat_object or empty
                continue
            acyclic, payload = _search_assignments(ext, candidates, state)
            if acyclic:
                return CocReport(CocOutcome.NO_COC, orders=payload, extension=ext, explored=state["explored"])
            if cyclic is None:
                cyclic = (payload, ext)
    except _Exhausted:
        return CocReport(CocOutcome.INCONCLUSIVE, explored=state["explored"])
    if cyclic is not None:
        (witness, orders), ext = cyclic
        return CocReport(CocOutcome.CONTAINS_COC, witness=witness, orders=orders, extension=ext,
                         explored=state["explored"])
    return CocReport(CocOutcome.L4_UNSATISFIABLE, unsatisfiable_object=unsat_object, explored=state["explored"])


def detect_coc(h: History, budget: int = DEFAULT_BUDGET) -> CocReport:
    """Decide whether ``h`` contains a composition order cycle."""
    if not is_well_formed(h):
        raise WellFormednessError("history is not well-formed")

    def candidates_for(obj, members):
        return lambda: legal_serializations_of_object(members)

    return _report_from_search(iter_extensions(h), candidates_for, budget)


def _check_order_respects_processes(obj: str, order: Sequence[Operation]) -> None:
    seen: dict[int, int] = {}
    for op in order:
        if seen.get(op.process, -1) > op.inv_index:
            raise PreconditionError(f"order for {obj!r} reverses the program order of P{op.process}")
        seen[op.process] = op.inv_index


def detect_coc_with_fixed_orders(h: History, object_orders: Mapping[str, Sequence[int]]) -> CocReport:
    """Single cycle check for already-known per-object orders (complete histories only)."""
    if not is_well_formed(h):
        raise WellFormednessError("history is not well-formed")
    done = complete(h)
    ops = operations_of(done)
    by_id = {op.op_id: op for op in ops}
    groups = _object_groups(ops)
    edges = list(process_order_edges(done))
    orders = {}
    for obj, members in groups.items():
        if obj not in object_orders:
            raise PreconditionError(f"no order supplied for object {obj!r}")
        ids = [int(i) for i in object_orders[obj]]
        if sorted(ids) != sorted(op.op_id for op in members):
            raise PreconditionError(f"order for {obj!r} does not cover exactly its completed operations")
        order = [by_id[i] for i in ids]
        if not is_legal_order(order):
            raise PreconditionError(f"order for {obj!r} is not a legal register history")
        _check_order_respects_processes(obj, order)
        edges.extend(_edges_for_order(obj, order))
        orders[obj] = tuple(ids)
    cycle = find_cycle(DependencyGraph(tuple(sorted(by_id)), tuple(edges)))
    if cycle is not None:
        return CocReport(CocOutcome.CONTAINS_COC, witness=cycle, orders=orders, extension=h, explored=1)
    return CocReport(CocOutcome.NO_COC, orders=orders, extension=h, explored=1)


def verify_lemma2_instance(h: History, write_order: Sequence[int], budget: int = DEFAULT_BUDGET) -> bool:
    """Check that ``h`` has no COC once every object order must follow ``write_order``.

    Returns True when some legal assignment of object orders, each agreeing
    with ``write_order`` on its writes, has an acyclic union with the process
    orders.  Budget exhaustion counts as failure.
    """
    if not is_well_formed(h):
        raise WellFormednessError("history is not well-formed")
    rank = {op_id: k for k, op_id in enumerate(write_order)}
    writes = [op for op in operations_of(complete(h)) if op.is_write]
    missing = [op.op_id for op in writes if op.op_id not in rank]
    if missing:
        raise PreconditionError(f"write order omits completed writes {missing}")

    def candidates_for(obj, members):
        return lambda: legal_serializations_of_object(members, write_order=write_order)

    report = _report_from_search([h], candidates_for, budget)
    return report.no_coc


def render_witness(witness: CycleWitness, ops: Sequence[Operation]) -> str:
    """One line per step of the cycle, naming the relation that justifies it."""
    by_id = {op.op_id: op for op in ops}
    lines = []
    for src, dst, label in witness.steps():
        if label.kind == "process":
            why = f"program order of P{label.process}"
        elif label.kind == "object":
            why = f"serialization order of object {label.object}"
        else:
            why = str(label)
        lines.append(f"{by_id[src]}  ->  {by_id[dst]}    [{why}]")
    return "\n".join(lines)
