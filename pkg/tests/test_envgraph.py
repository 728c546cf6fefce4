import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qnn_forge.envgraph import (
    EnvGraph,
    chain_graph,
    children,
    circuit_graph,
    constraint_residual_qnn,
    diffusion_residual,
    is_diffusion_machine,
    parents,
    topological_order,
    topological_sort,
)
from qnn_forge.errors import InvalidInputError, NotADAGError, UnknownVertexError
from qnn_forge.qsim import reference_ansatz
from qnn_forge.randgen import random_env_graph

DIAMOND = ((0, 1), (0, 2), (1, 3), (2, 3))


def test_chain_order():
    assert topological_order(chain_graph([0.5, 0.3])) == (0, 1, 2)


def test_diamond_tie_break():
    assert topological_order(EnvGraph(4, DIAMOND)) == (0, 1, 2, 3)


def test_back_arc_is_a_cycle():
    with pytest.raises(NotADAGError) as info:
        EnvGraph(3, ((0, 1), (1, 2), (2, 1)))
    assert info.value.vertex in (1, 2)


def test_cycle_vertex_is_on_the_cycle():
    arcs = ((0, 1), (1, 2), (2, 3), (3, 4), (4, 2))
    with pytest.raises(NotADAGError) as info:
        topological_sort(5, arcs)
    assert info.value.vertex in (2, 3, 4)


def test_adjacency():
    g = chain_graph([0.5, 0.3])
    assert parents(g, 2) == {1}
    assert children(g, 2) == frozenset()
    assert parents(EnvGraph(4, DIAMOND), 3) == {1, 2}
    with pytest.raises(UnknownVertexError):
        parents(g, 7)


def test_shape_rules():
    with pytest.raises(InvalidInputError, match="no parent"):
        EnvGraph(3, ((0, 2),))
    with pytest.raises(InvalidInputError, match="sink"):
        EnvGraph(4, ((0, 1), (0, 2), (0, 3), (1, 3)))
    with pytest.raises(UnknownVertexError):
        EnvGraph(2, ((0, 5),))


def test_arc_parameter_is_shared_by_in_arcs():
    g = EnvGraph(4, DIAMOND, theta=(9.0, 0.1, 0.2, 0.3))
    assert g.theta[0] == 0.0
    assert g.arc_theta(1, 3) == g.arc_theta(2, 3) == 0.3


def test_round_trip_and_conflict():
    g = circuit_graph(reference_ansatz(2, 1), np.linspace(-1, 1, 5))
    assert EnvGraph.loads(g.dumps()) == g
    doc = g.to_dict()
    arcs_into_last = [a for a in doc["arcs"] if a["to"] == g.L]
    assert len(arcs_into_last) > 1
    arcs_into_last[0]["theta"] += 1.0
    with pytest.raises(InvalidInputError, match="different"):
        EnvGraph.from_dict(doc)


def test_circuit_follows_topological_order():
    paulis = reference_ansatz(2, 2)
    g = circuit_graph(paulis, np.arange(len(paulis), dtype=float))
    c = g.circuit()
    assert c.vertex_ids == tuple(v for v in g.order if v != 0)
    assert len(set(c.vertex_ids)) == len(c)


def test_wire_wiring_links_gates_sharing_a_wire():
    paulis = reference_ansatz(1, 1)  # XI, IX, ZZ
    g = circuit_graph(paulis, [0.1, 0.2, 0.3])
    assert set(g.arcs) == {(0, 1), (0, 2), (1, 3), (2, 3)}


@given(st.integers(2, 64), st.integers(0, 2**32 - 1))
def test_random_orders_respect_every_arc(size, seed):
    g = random_env_graph(np.random.default_rng(seed), size)
    pos = {v: k for k, v in enumerate(g.order)}
    assert all(pos[i] < pos[j] for i, j in g.arcs)
    assert topological_sort(g.num_vertices, reversed(g.arcs)) == g.order


def test_residual_examples():
    g4 = EnvGraph(4, DIAMOND)
    ok = [True] * 4
    assert constraint_residual_qnn(g4, ok, ok) == 0
    assert constraint_residual_qnn(g4, [False, True, True, True], ok) == -1
    g3 = chain_graph([0.1, 0.2])
    assert constraint_residual_qnn(g3, [False] * 3, [False] * 3) == -6
    assert is_diffusion_machine(g4, ok, ok)
    assert not is_diffusion_machine(g4, ok, [True, True, False, True])
    g1 = EnvGraph(1, ())
    assert diffusion_residual(g1, [True], [True]) == 0
    with pytest.raises(InvalidInputError):
        constraint_residual_qnn(g4, ok[:3], ok)


@pytest.mark.parametrize("size", range(1, 11))
def test_residual_zero_exactly_when_all_hold(size):
    g = chain_graph([0.1] * (size - 1))
    for f in itertools.product([False, True], repeat=2 * size):
        res = constraint_residual_qnn(g, f[:size], f[size:])
        assert (res == 0) == all(f)
