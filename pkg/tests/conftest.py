import numpy as np
import pytest

from jknet import InteractionMatrix, ModelParams, sample_er_digraph
from jknet.rng import stream


@pytest.fixture
def example1():
    """Two-cycle {0,1} fed by vertex 2; equilibrium (1/2, 1/2, 0)."""
    return InteractionMatrix.from_edges(3, [(0, 1), (1, 0), (2, 0)])


@pytest.fixture
def example2():
    """Two-cycle {0,1} feeding vertex 2; equilibrium (1/3, 1/3, 1/3)."""
    return InteractionMatrix.from_edges(3, [(0, 1), (1, 0), (0, 2)])


@pytest.fixture
def example3():
    """Two disjoint 2-cycles; a one-parameter family of equilibria."""
    return InteractionMatrix.from_edges(4, [(0, 1), (1, 0), (2, 3), (3, 2)])


@pytest.fixture
def example4():
    """Disjoint 2-cycles plus edge 0->2; only (0, 0, 1/2, 1/2) attracts."""
    return InteractionMatrix.from_edges(4, [(0, 1), (1, 0), (2, 3), (3, 2), (0, 2)])


def random_matrix(d, p, seed):
    return sample_er_digraph(ModelParams(d=d, p=p), stream(seed))


def random_matrices(count, seed, d_range=(3, 8), p_range=(0.1, 0.6)):
    """Deterministic assortment of random graphs for sweep tests."""
    rng = stream(seed)
    out = []
    for _ in range(count):
        d = int(rng.integers(d_range[0], d_range[1] + 1))
        p = float(rng.uniform(*p_range))
        out.append(sample_er_digraph(ModelParams(d=d, p=p), rng))
    return out


def interior_state(d, rng):
    x = rng.uniform(0.05, 1.0, d)
    return x / x.sum()
