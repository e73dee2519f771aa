import numpy as np
import pytest

from distobs import (
    NetworkGraph,
    Plant,
    full_rank_factorize,
    observability_decomposition,
    observability_matrix,
)
from distobs.linalg import numerical_rank


def random_strongly_connected_graph(rng, n_nodes: int) -> NetworkGraph:
    """Random digraph containing a Hamiltonian cycle plus extra edges."""
    w = np.zeros((n_nodes, n_nodes))
    perm = rng.permutation(n_nodes)
    for k in range(n_nodes):
        i, j = perm[k], perm[(k + 1) % n_nodes]
        if i != j:
            w[j, i] = rng.uniform(0.5, 2.0)
    for _ in range(n_nodes):
        i, j = rng.integers(0, n_nodes, size=2)
        if i != j:
            w[j, i] = rng.uniform(0.5, 2.0)
    return NetworkGraph(weights=w)


def random_observable_instance(rng, n=None, n_nodes=None, margin=1e-2):
    """Random observable (C, A) split over a random strongly connected graph.

    Resamples until every node's injection sub-pair has observability margin
    at least `margin` (smallest over largest singular value of its
    observability matrix), so the synthesized gains stay moderate.
    """
    n = int(n if n is not None else rng.integers(2, 7))
    n_nodes = int(n_nodes if n_nodes is not None else rng.integers(1, 5))
    m = int(rng.integers(n_nodes, n + n_nodes))
    while True:
        a = rng.standard_normal((n, n))
        c = rng.standard_normal((m, n))
        if numerical_rank(observability_matrix(c, a)) != n:
            continue
        if n_nodes > 1:
            cuts = sorted(rng.choice(np.arange(1, m), size=n_nodes - 1, replace=False))
        else:
            cuts = []
        rows = tuple(int(x) for x in np.diff([0, *cuts, m]))
        plant = Plant(a=a, c=c, node_rows=rows)
        if _well_conditioned(plant, margin):
            break
    graph = random_strongly_connected_graph(rng, n_nodes)
    return plant, graph


def _well_conditioned(plant, margin) -> bool:
    import scipy.linalg

    for i in range(plant.node_count):
        frf = full_rank_factorize(plant.c_block(i))
        dec = observability_decomposition(plant.a, frf.f_factor)
        if dec.v_dim > dec.p_dim:
            obs = observability_matrix(dec.e_mat @ dec.a12, dec.a22)
            s = scipy.linalg.svdvals(obs)
            if s[-1] < margin * s[0]:
                return False
    return True


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def standard_instance():
    """Deterministic n=4, N=3 directed cycle, single-row outputs."""
    rng = np.random.default_rng(7)
    n = 4
    while True:
        a = rng.standard_normal((n, n))
        c = rng.standard_normal((3, n))
        if numerical_rank(observability_matrix(c, a)) != n:
            continue
        plant = Plant(a=a, c=c, node_rows=(1, 1, 1))
        if _well_conditioned(plant, 1e-2):
            break
    w = np.zeros((3, 3))
    # directed cycle 1 -> 2 -> 3 -> 1, unit weights
    w[1, 0] = w[2, 1] = w[0, 2] = 1.0
    return plant, NetworkGraph(weights=w)
