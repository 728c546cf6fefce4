"""Environmental graph: a DAG of unitary vertices with gate parameters on arcs.

Vertex 0 is the input vertex holding ``|z,1>``; vertices ``1..L`` are
unitaries and ``L`` is the output unitary. Every arc into vertex ``j``
carries the same parameter ``theta_j``, so angles are stored per vertex and
``arc_theta(i, j)`` simply reads ``theta[j]``. Per-vertex arrays (theta,
bias, label) are indexed by vertex id and have length ``L + 1``.
"""
from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidInputError, NotADAGError, UnknownVertexError
from .qsim import Circuit, PauliString

Arc = tuple[int, int]


def topological_sort(num_vertices: int, arcs: Iterable[Arc]) -> tuple[int, ...]:
    """Kahn's algorithm, ties broken by smallest vertex id."""
    children = [[] for _ in range(num_vertices)]
    indeg = [0] * num_vertices
    for i, j in arcs:
        children[i].append(j)
        indeg[j] += 1
    heap = [v for v in range(num_vertices) if indeg[v] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        v = heapq.heappop(heap)
        order.append(v)
        for c in children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                heapq.heappush(heap, c)
    if len(order) < num_vertices:
        raise NotADAGError(_vertex_on_cycle(num_vertices, arcs, set(order)))
    return tuple(order)


def _vertex_on_cycle(num_vertices, arcs, done):
    # every unsorted vertex has an unsorted parent; walking parents must revisit
    parent = {}
    for i, j in arcs:
        if i not in done and j not in done:
            parent.setdefault(j, i)
    v = min(set(range(num_vertices)) - done)
    seen = set()
    while v not in seen:
        seen.add(v)
        v = parent[v]
    return v


def _per_vertex(values, size, default, name):
    if values is None:
        return tuple([default] * size)
    values = tuple(values)
    if len(values) != size:
        raise InvalidInputError(f"{name} has {len(values)} entries, graph has {size} vertices")
    return values


@dataclass(frozen=True)
class EnvGraph:
    num_vertices: int
    arcs: tuple[Arc, ...]
    theta: tuple[float, ...] | None = None
    bias: tuple[float, ...] | None = None
    label: tuple[float, ...] | None = None
    pauli: tuple[PauliString | None, ...] | None = None
    n: int | None = field(default=None)

    def __post_init__(self):
        size = int(self.num_vertices)
        if size < 1:
            raise InvalidInputError("graph needs at least the input vertex")
        arcs = tuple(sorted({(int(i), int(j)) for i, j in self.arcs}))
        for i, j in arcs:
            if not (0 <= i < size and 0 <= j < size):
                raise UnknownVertexError(f"arc ({i}, {j}) references a missing vertex")
            if i == j:
                raise NotADAGError(i, f"self-loop on vertex {i}")
        set_ = object.__setattr__
        set_(self, "num_vertices", size)
        set_(self, "arcs", arcs)
        theta = tuple(float(t) for t in _per_vertex(self.theta, size, 0.0, "theta"))
        set_(self, "theta", (0.0,) + theta[1:])
        set_(self, "bias", tuple(float(b) for b in _per_vertex(self.bias, size, 0.0, "bias")))
        set_(self, "label", tuple(float(b) for b in _per_vertex(self.label, size, 0.0, "label")))
        pauli = _per_vertex(self.pauli, size, None, "pauli")
        pauli = tuple(None if p is None else (p if isinstance(p, PauliString) else PauliString.parse(p))
                      for p in pauli)
        if pauli[0] is not None:
            raise InvalidInputError("the input vertex carries no gate")
        widths = {p.num_wires for p in pauli if p is not None}
        if len(widths) > 1:
            raise InvalidInputError(f"gates act on differing wire counts {sorted(widths)}")
        set_(self, "pauli", pauli)
        if self.n is None and widths:
            set_(self, "n", widths.pop() - 1)
        self._check_structure()

    def _check_structure(self):
        self.order  # raises on cycles
        if any(j == 0 for _, j in self.arcs):
            raise InvalidInputError("the input vertex 0 may not have in-arcs")
        if self.num_vertices == 1:
            return
        out = self.L
        for v in range(1, self.num_vertices):
            if not self._parents[v]:
                raise InvalidInputError(f"vertex {v} has no parent")
        for v in range(self.num_vertices):
            if v != out and not self._children[v]:
                raise InvalidInputError(
                    f"vertex {v} is a sink; the output vertex {out} must lie on every maximal path"
                )
        if self._children[out]:
            raise InvalidInputError(f"output vertex {out} may not have children")

    @property
    def L(self) -> int:
        return self.num_vertices - 1

    @cached_property
    def order(self) -> tuple[int, ...]:
        return topological_sort(self.num_vertices, self.arcs)

    @cached_property
    def _parents(self) -> tuple[tuple[int, ...], ...]:
        out = [[] for _ in range(self.num_vertices)]
        for i, j in self.arcs:
            out[j].append(i)
        return tuple(tuple(p) for p in out)

    @cached_property
    def _children(self) -> tuple[tuple[int, ...], ...]:
        out = [[] for _ in range(self.num_vertices)]
        for i, j in self.arcs:
            out[i].append(j)
        return tuple(tuple(c) for c in out)

    def _check_vertex(self, v):
        if not (isinstance(v, (int, np.integer)) and 0 <= v < self.num_vertices):
            raise UnknownVertexError(f"unknown vertex {v!r}")

    def arc_theta(self, i: int, j: int) -> float:
        if (i, j) not in self._arc_set:
            raise UnknownVertexError(f"no arc ({i}, {j})")
        return self.theta[j]

    @cached_property
    def _arc_set(self) -> frozenset:
        return frozenset(self.arcs)

    def with_theta(self, theta: Sequence[float]) -> "EnvGraph":
        return replace(self, theta=tuple(theta))

    def circuit(self) -> Circuit:
        """Gates in topological order, each bound to its vertex id."""
        gates = []
        for v in self.order:
            if v == 0:
                continue
            if self.pauli[v] is None:
                raise InvalidInputError(f"vertex {v} has no Pauli assignment")
            gates.append((self.pauli[v], v))
        return Circuit(tuple(gates))

    def gate_thetas(self, theta: Sequence[float] | None = None) -> np.ndarray:
        """Per-vertex angles rearranged into circuit gate order."""
        theta = self.theta if theta is None else theta
        return np.array([theta[v] for v in self.order if v != 0], dtype=float)

    # serialisation

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "vertices": [
                {
                    "id": v,
                    "pauli": None if self.pauli[v] is None else str(self.pauli[v]),
                    "bias": self.bias[v],
                    "label": self.label[v],
                }
                for v in range(self.num_vertices)
            ],
            "arcs": [{"from": i, "to": j, "theta": self.theta[j]} for i, j in self.arcs],
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "EnvGraph":
        verts = sorted(doc["vertices"], key=lambda d: d["id"])
        if [d["id"] for d in verts] != list(range(len(verts))):
            raise InvalidInputError("vertex ids must be 0..L without gaps")
        theta: dict[int, float] = {}
        arcs = []
        for a in doc["arcs"]:
            i, j, t = int(a["from"]), int(a["to"]), float(a["theta"])
            if j in theta and theta[j] != t:
                raise InvalidInputError(f"in-arcs of vertex {j} carry different parameters")
            theta[j] = t
            arcs.append((i, j))
        return cls(
            num_vertices=len(verts),
            arcs=tuple(arcs),
            theta=tuple(theta.get(v, 0.0) for v in range(len(verts))),
            bias=tuple(d.get("bias", 0.0) for d in verts),
            label=tuple(d.get("label", 0.0) for d in verts),
            pauli=tuple(d.get("pauli") for d in verts),
            n=doc.get("n"),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "EnvGraph":
        return cls.from_dict(json.loads(text))


def topological_order(g: EnvGraph) -> tuple[int, ...]:
    return g.order


def parents(g: EnvGraph, v: int) -> frozenset[int]:
    g._check_vertex(v)
    return frozenset(g._parents[v])


def children(g: EnvGraph, v: int) -> frozenset[int]:
    g._check_vertex(v)
    return frozenset(g._children[v])


def chain_graph(theta: Sequence[float], paulis: Sequence[PauliString] | None = None, **kw) -> EnvGraph:
    """``0 -> 1 -> ... -> L`` with ``theta[k]`` on the arc into vertex ``k + 1``."""
    size = len(theta) + 1
    return EnvGraph(
        num_vertices=size,
        arcs=tuple((v, v + 1) for v in range(size - 1)),
        theta=(0.0, *theta),
        pauli=None if paulis is None else (None, *paulis),
        **kw,
    )


def circuit_graph(paulis: Sequence[PauliString], theta: Sequence[float], wiring: str = "wires") -> EnvGraph:
    """Graph for a gate list.

    ``wiring="wires"`` links each gate to the previous gate on every wire it
    touches (the input vertex feeds first uses); remaining sinks are linked
    to the last gate so it lies on every maximal path. ``"chain"`` links the
    gates in sequence.
    """
    if wiring == "chain":
        return chain_graph(theta, paulis)
    if wiring != "wires":
        raise InvalidInputError(f"unknown wiring {wiring!r}")
    size = len(paulis) + 1
    last = {}
    arcs = set()
    for v, p in enumerate(paulis, start=1):
        for w in p.support or range(p.num_wires):
            arcs.add((last.get(w, 0), v))
            last[w] = v
    out = size - 1
    has_child = {i for i, _ in arcs}
    for v in range(size - 1):
        if v not in has_child:
            arcs.add((v, out))
    return EnvGraph(num_vertices=size, arcs=tuple(arcs), theta=(0.0, *theta), pauli=(None, *paulis))


def _indicator(flags, v, name):
    try:
        value = flags[v]
    except (KeyError, IndexError):
        raise InvalidInputError(f"{name} has no entry for vertex {v}") from None
    return 1 if bool(value) else 0


def constraint_residual_qnn(g: EnvGraph, satisfied_transition, satisfied_output) -> int:
    """``sum_v (zeta_v + phi_v) - 2|V|`` over satisfaction indicators; 0 iff all hold."""
    total = 0
    for v in range(g.num_vertices):
        total += _indicator(satisfied_transition, v, "satisfied_transition")
        total += _indicator(satisfied_output, v, "satisfied_output")
    return total - 2 * g.num_vertices


def diffusion_residual(g: EnvGraph, satisfied_transition, satisfied_output) -> int:
    """Same sum as the constraint residual, read as the recurrent diffusion constraint."""
    return constraint_residual_qnn(g, satisfied_transition, satisfied_output)


def is_diffusion_machine(g: EnvGraph, satisfied_transition, satisfied_output) -> bool:
    return diffusion_residual(g, satisfied_transition, satisfied_output) == 0
