import numpy as np
import pytest

from gapwalk import expander_gen, graph_model as gm, spectral


@pytest.fixture(scope="session")
def petersen():
    return expander_gen.petersen()


@pytest.fixture(scope="session")
def small_params():
    return gm.GraphParams.scaled((5, 4, 3), (1, 2, 3), expander_size=10)


@pytest.fixture(scope="session")
def small_instance(small_params, petersen):
    return gm.MainGraph(small_params, petersen)


@pytest.fixture(scope="session")
def small_materialized(small_instance):
    return gm.materialize(small_instance)


@pytest.fixture(scope="session")
def small_solution(small_instance):
    return spectral.solve_for_instance(small_instance)


def build_decorated_tree_topdown(degrees, depths, k, rounds):
    """Independent oracle: the round-by-round construction.  Start from the
    bare level-k perfect core; at round r attach, to every internal vertex,
    d_{k-r} - d_{k-r+1} fresh copies of the bare level-(k-r) core.

    Returns adjacency as a list of sorted neighbor lists, root index 0.
    """
    adjacency = []

    def new_node():
        adjacency.append(set())
        return len(adjacency) - 1

    def add_edge(u, v):
        adjacency[u].add(v)
        adjacency[v].add(u)

    def build_core(level):
        root = new_node()
        internal = []
        stack = [(root, 0)]
        while stack:
            u, depth = stack.pop()
            if depth == depths[level - 1]:
                continue
            internal.append(u)
            for _ in range(degrees[level - 1] - 1):
                c = new_node()
                add_edge(u, c)
                stack.append((c, depth + 1))
        return root, internal

    _, internal_nodes = build_core(k)
    for r in range(1, rounds + 1):
        level = k - r
        copies = degrees[level - 1] - degrees[level]
        grown = []
        for u in internal_nodes:
            for _ in range(copies):
                croot, cinternal = build_core(level)
                add_edge(u, croot)
                grown.extend(cinternal)
        internal_nodes = internal_nodes + grown
    return [sorted(nbrs) for nbrs in adjacency]
