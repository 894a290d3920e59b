"""Maximum mean cycle of a vertex-weighted digraph (Karp's algorithm).

Every edge u -> v carries the weight of its source u. The graph is split into
strongly connected components first; Karp runs on each component that holds a
cycle, with walks starting at any vertex of the component.
"""
import networkx as nx
import numpy as np
from loguru import logger


def _karp(graph: nx.DiGraph, weight: str) -> float:
    nodes = list(graph.nodes)
    n = len(nodes)
    index = {v: i for i, v in enumerate(nodes)}
    w = np.array([graph.nodes[v][weight] for v in nodes], dtype=float)
    edges = np.array([(index[u], index[v]) for u, v in graph.edges], dtype=np.int64).reshape(-1, 2)
    src, dst = edges[:, 0], edges[:, 1]

    # D[k, v] = best weight of a k-edge walk ending at v
    D = np.full((n + 1, n), -np.inf)
    D[0] = 0.0
    for k in range(1, n + 1):
        np.maximum.at(D[k], dst, D[k - 1][src] + w[src])

    final = D[n]
    steps = (n - np.arange(n))[:, np.newaxis]
    with np.errstate(invalid='ignore'):
        ratios = (final[np.newaxis, :] - D[:n]) / steps
    ratios[~np.isfinite(D[:n])] = np.inf
    per_vertex = ratios.min(axis=0)
    per_vertex[~np.isfinite(final)] = -np.inf
    return float(per_vertex.max())


def cyclic_components(graph: nx.DiGraph) -> list[set]:
    """Strongly connected components that carry at least one cycle"""
    return [
        component for component in nx.strongly_connected_components(graph)
        if len(component) > 1 or any(graph.has_edge(v, v) for v in component)
    ]


def maximum_mean_cycle(graph: nx.DiGraph, weight: str = 'weight') -> float:
    """max over cycles of (total weight / length); -inf for an acyclic graph"""
    components = cyclic_components(graph)
    best = max((_karp(graph.subgraph(c), weight) for c in components), default=float('-inf'))
    logger.debug(
        f"Karp on {graph.number_of_nodes()} vertices in {len(components)} cyclic components: "
        f"maximum mean {best:.15g}"
    )
    return best
