"""Order relations over operations and the dependency graph built from them.

Graphs keep only direct relations (consecutive operations of a process,
adjacent operations in an object's order); a cycle exists in the transitive
closure exactly when one exists among the direct edges.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from .errors import PreconditionError
from .history import History, Operation, complete, operations_of


@dataclass(frozen=True, slots=True)
class EdgeLabel:
    kind: str  # "real-time" | "process" | "object" | "broadcast"
    process: Optional[int] = None
    object: Optional[str] = None

    @classmethod
    def real_time(cls):
        return cls("real-time")

    @classmethod
    def process_order(cls, process: int):
        return cls("process", process=process)

    @classmethod
    def object_order(cls, obj: str):
        return cls("object", object=obj)

    @classmethod
    def broadcast(cls):
        return cls("broadcast")

    def __str__(self):
        if self.kind == "process":
            return f"<_H|P{self.process}"
        if self.kind == "object":
            return f"<_{self.object}"
        if self.kind == "real-time":
            return "<_H"
        return "<_cast"


@dataclass(frozen=True, slots=True)
class Edge:
    src: int
    dst: int
    label: EdgeLabel


@dataclass(frozen=True)
class DependencyGraph:
    nodes: tuple  # op ids, ascending
    edges: tuple  # Edge records, parallel edges with different labels allowed

    def __post_init__(self):
        for e in self.edges:
            if e.src == e.dst:
                raise PreconditionError(f"self-edge on {e.src}")

    def successors(self) -> dict[int, list[tuple[int, EdgeLabel]]]:
        out: dict[int, list] = {n: [] for n in self.nodes}
        for e in self.edges:
            out[e.src].append((e.dst, e.label))
        for lst in out.values():
            lst.sort(key=lambda t: t[0])
        return out

    def has_edge(self, src: int, dst: int) -> bool:
        return any(e.src == src and e.dst == dst for e in self.edges)


@dataclass(frozen=True)
class CycleWitness:
    """``ops[i] -> ops[i+1]`` is justified by ``labels[i]``; the last label closes the cycle."""

    ops: tuple
    labels: tuple

    def __len__(self):
        return len(self.ops)

    def steps(self):
        n = len(self.ops)
        return [(self.ops[i], self.ops[(i + 1) % n], self.labels[i]) for i in range(n)]


def real_time_precedes(h: History, a: Operation, b: Operation) -> bool:
    """a <_H b: the response of ``a`` comes before the invocation of ``b``."""
    return not a.pending and a.res_index < b.inv_index


def process_order_edges(h: History) -> list[Edge]:
    """Edges between consecutive completed operations of each process."""
    last: dict[int, Operation] = {}
    edges = []
    for op in operations_of(h):
        if op.pending:
            continue
        prev = last.get(op.process)
        if prev is not None:
            edges.append(Edge(prev.op_id, op.op_id, EdgeLabel.process_order(op.process)))
        last[op.process] = op
    return edges


def _as_ids(order) -> list[int]:
    return [o.op_id if isinstance(o, Operation) else int(o) for o in order]


def build_union_graph(h: History, object_orders: Mapping[str, Sequence]) -> DependencyGraph:
    """Union of per-process orders with the given per-object total orders.

    ``object_orders`` maps each object to a sequence of op ids (or operations)
    covering exactly the completed operations on that object.
    """
    ops = [op for op in operations_of(h) if not op.pending]
    by_object: dict[str, set[int]] = {}
    for op in ops:
        by_object.setdefault(op.object, set()).add(op.op_id)
    edges = list(process_order_edges(h))
    for obj, members in sorted(by_object.items()):
        if obj not in object_orders:
            raise PreconditionError(f"no order supplied for object {obj!r}")
        order = _as_ids(object_orders[obj])
        if len(order) != len(members) or set(order) != members:
            raise PreconditionError(f"order for {obj!r} does not cover exactly its completed operations")
        label = EdgeLabel.object_order(obj)
        edges.extend(Edge(a, b, label) for a, b in zip(order, order[1:]))
    return DependencyGraph(tuple(sorted(op.op_id for op in ops)), tuple(edges))


def graph_from_edges(nodes: Iterable[int], pairs: Iterable[tuple[int, int]], label: EdgeLabel | None = None) -> DependencyGraph:
    label = label or EdgeLabel.broadcast()
    return DependencyGraph(tuple(sorted(set(nodes))), tuple(Edge(a, b, label) for a, b in pairs))


def find_cycle(g: DependencyGraph) -> Optional[CycleWitness]:
    """Return some directed cycle of ``g`` with its edge labels, or None."""
    succ = g.successors()
    WHITE, GREY, BLACK = 0, 1, 2
    color = dict.fromkeys(g.nodes, WHITE)
    for root in g.nodes:
        if color[root] != WHITE:
            continue
        color[root] = GREY
        # path holds (node, label of the edge that led here); stack holds successor iterators.
        path: list[tuple[int, Optional[EdgeLabel]]] = [(root, None)]
        stack = [iter(succ[root])]
        while stack:
            advanced = False
            for nxt, label in stack[-1]:
                if color[nxt] == GREY:
                    start = next(i for i, (n, _) in enumerate(path) if n == nxt)
                    cyc = [n for n, _ in path[start:]]
                    labels = [lab for _, lab in path[start + 1:]] + [label]
                    return CycleWitness(tuple(cyc), tuple(labels))
                if color[nxt] == WHITE:
                    color[nxt] = GREY
                    path.append((nxt, label))
                    stack.append(iter(succ[nxt]))
                    advanced = True
                    break
            if not advanced:
                node, _ = path.pop()
                color[node] = BLACK
                stack.pop()
    return None


def topological_extension(g: DependencyGraph) -> Optional[list[int]]:
    """A total order of the nodes consistent with every edge, smallest op id first among ties."""
    indeg = dict.fromkeys(g.nodes, 0)
    succ: dict[int, list[int]] = {n: [] for n in g.nodes}
    for e in g.edges:
        succ[e.src].append(e.dst)
        indeg[e.dst] += 1
    ready = [n for n, d in indeg.items() if d == 0]
    heapq.heapify(ready)
    out = []
    while ready:
        n = heapq.heappop(ready)
        out.append(n)
        for m in succ[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                heapq.heappush(ready, m)
    return out if len(out) == len(g.nodes) else None


def to_dot(g: DependencyGraph, name: str = "dependencies") -> str:
    """Render the graph in Graphviz DOT syntax."""
    lines = [f"digraph {name} {{"]
    lines.extend(f"  {n};" for n in g.nodes)
    lines.extend(f'  {e.src} -> {e.dst} [label="{e.label}"];' for e in g.edges)
    lines.append("}")
    return "\n".join(lines) + "\n"


def order_union_is_acyclic(h: History, object_orders: Mapping[str, Sequence]) -> bool:
    return find_cycle(build_union_graph(complete(h), object_orders)) is None
