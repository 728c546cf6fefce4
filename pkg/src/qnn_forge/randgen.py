"""Random instances for oracles, sweeps and tests."""
from __future__ import annotations

import numpy as np

from .envgraph import EnvGraph
from .qsim import Circuit, PauliString

LETTERS = ("I", "X", "Y", "Z")


def random_pauli(rng: np.random.Generator, num_wires: int) -> PauliString:
    while True:
        ops = tuple(LETTERS[k] for k in rng.integers(0, 4, num_wires))
        if any(o != "I" for o in ops):
            return PauliString(ops)


def random_circuit(rng: np.random.Generator, max_n: int = 4, max_gates: int = 8) -> Circuit:
    n = int(rng.integers(1, max_n + 1))
    count = int(rng.integers(1, max_gates + 1))
    return Circuit.from_paulis(random_pauli(rng, n + 1) for _ in range(count))


def random_string(rng: np.random.Generator, n: int) -> np.ndarray:
    return 1 - 2 * rng.integers(0, 2, n)


def random_env_graph(rng: np.random.Generator, num_vertices: int, scale: float = 1.5) -> EnvGraph:
    """Random DAG with the input/output shape rules: every vertex past 0 has a
    parent and the last vertex is the only sink."""
    L = num_vertices - 1
    arcs = set()
    for v in range(1, num_vertices):
        k = int(rng.integers(1, v + 1))
        for p in rng.choice(v, size=k, replace=False):
            arcs.add((int(p), v))
    for v in range(L):
        if not any(i == v for i, _ in arcs):
            arcs.add((v, int(rng.integers(v + 1, num_vertices))))
    return EnvGraph(
        num_vertices=num_vertices,
        arcs=tuple(arcs),
        theta=tuple(rng.uniform(-scale, scale, num_vertices)),
        bias=tuple(rng.uniform(-1, 1, num_vertices)),
        label=tuple(rng.uniform(-1, 1, num_vertices)),
    )
