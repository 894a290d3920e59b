import networkx as nx
import numpy as np
import pytest

from cocyclerigidity.cocycles.builtin import (
    full_shift,
    future_dependent_generator,
    golden_mean_shift,
    mixed_generator,
    random_bunched_generator,
)
from cocyclerigidity.cocycles.holonomy import block_graph, uniform_bunching_value
from cocyclerigidity.utilities.mean_cycle import cyclic_components, maximum_mean_cycle


def brute_force_mean_cycle(graph: nx.DiGraph) -> float:
    best = float('-inf')
    for cycle in nx.simple_cycles(graph):
        best = max(best, sum(graph.nodes[v]['weight'] for v in cycle) / len(cycle))
    return best


def test_hand_built_graph():
    graph = nx.DiGraph()
    graph.add_nodes_from([('a', {'weight': 1.0}), ('b', {'weight': 3.0}), ('c', {'weight': 1.5})])
    graph.add_edges_from([('a', 'b'), ('b', 'a'), ('c', 'c'), ('a', 'c')])
    assert maximum_mean_cycle(graph) == pytest.approx(2.0, abs=1e-15)


def test_acyclic_and_empty_graphs():
    assert maximum_mean_cycle(nx.DiGraph()) == float('-inf')
    path = nx.DiGraph()
    path.add_nodes_from([(0, {'weight': 5.0}), (1, {'weight': 7.0})])
    path.add_edge(0, 1)
    assert maximum_mean_cycle(path) == float('-inf')


def test_random_graphs_against_cycle_enumeration():
    rng = np.random.default_rng(np.random.SeedSequence(17))
    for seed in range(40):
        graph = nx.gnp_random_graph(7, 0.35, seed=seed, directed=True)
        for v in graph.nodes:
            graph.nodes[v]['weight'] = float(rng.normal())
        expected = brute_force_mean_cycle(graph)
        if expected == float('-inf'):
            assert maximum_mean_cycle(graph) == float('-inf')
        else:
            assert maximum_mean_cycle(graph) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("make", [
    lambda: random_bunched_generator(full_shift(), seed=3, window=(0, 1), scale=0.3),
    lambda: random_bunched_generator(golden_mean_shift(), seed=8, window=(0, 1), scale=0.3),
    lambda: future_dependent_generator(full_shift()),
    lambda: mixed_generator(golden_mean_shift()),
])
@pytest.mark.parametrize("N", [1, 2])
def test_uniform_bunching_value_against_cycle_enumeration(make, N):
    gen = make()
    graph = block_graph(gen, N)
    expected = brute_force_mean_cycle(graph) / N
    assert uniform_bunching_value(gen, N) == pytest.approx(expected, abs=1e-12)
    assert uniform_bunching_value(gen, N) == maximum_mean_cycle(graph) / N


def test_components_joined_by_a_one_way_edge():
    graph = nx.DiGraph()
    weights = {'a': 4.0, 'b': -1.0, 'c': 0.5, 'd': 2.5, 'e': 9.0}
    graph.add_nodes_from((v, {'weight': w}) for v, w in weights.items())
    # cycles a-b and c-d, a self-loop at d, and e only on the bridge
    graph.add_edges_from([('a', 'b'), ('b', 'a'), ('b', 'e'), ('e', 'c'), ('c', 'd'), ('d', 'c'), ('d', 'd')])
    components = cyclic_components(graph)
    assert sorted(map(sorted, components)) == [['a', 'b'], ['c', 'd']]
    assert maximum_mean_cycle(graph) == pytest.approx(brute_force_mean_cycle(graph), abs=1e-15)
    assert maximum_mean_cycle(graph) == pytest.approx(2.5, abs=1e-15)

    graph.remove_edge('d', 'd')
    assert maximum_mean_cycle(graph) == pytest.approx(1.5, abs=1e-15)
    loop = nx.DiGraph()
    loop.add_node('x', weight=-3.0)
    loop.add_edge('x', 'x')
    assert cyclic_components(loop) == [{'x'}]
    assert maximum_mean_cycle(loop) == -3.0


def test_block_graph_shape():
    graph = block_graph(random_bunched_generator(golden_mean_shift(), seed=1, window=(0, 1)), 2)
    # words over [0, 2] avoiding "2 2"
    assert graph.number_of_nodes() == 5
    for u, v in graph.edges:
        assert u[2] == v[0]
