# tests/test_topology.py

import numpy as np
import pytest

from dcda.core.exceptions import ConfigurationError, DomainError
from dcda.core.topology import (
    is_connected,
    is_doubly_stochastic,
    make_full,
    make_random,
    make_ring,
    mixing_from_adjacency,
    mixing_product,
    second_singular_value,
)
from dcda.models.domain import MixingMatrix


def test_full_graph_adjacency():
    g = make_full(4)
    np.testing.assert_array_equal(g.adjacency, np.ones((4, 4)) - np.eye(4))


def test_ring_degrees():
    g = make_ring(8, 2)
    np.testing.assert_array_equal(g.degrees, np.full(8, 4))
    assert g.adjacency[0, 7] == 1 and g.adjacency[0, 6] == 1 and g.adjacency[0, 3] == 0


def test_ring_rejects_zero_width():
    with pytest.raises(ConfigurationError):
        make_ring(5, 0)


def test_random_graph_is_connected_and_reproducible():
    a = make_random(12, 0.2, seed=4)
    b = make_random(12, 0.2, seed=4)
    assert is_connected(a.adjacency)
    np.testing.assert_array_equal(a.adjacency, b.adjacency)


@pytest.mark.parametrize("method", ["max_degree", "metropolis"])
def test_mixing_is_doubly_stochastic(method):
    for graph in (make_full(5), make_ring(7, 1), make_random(9, 0.4, seed=1)):
        P = mixing_from_adjacency(graph, method=method)
        assert is_doubly_stochastic(P)
        off_graph = (graph.adjacency == 0) & ~np.eye(graph.n, dtype=bool)
        assert np.all(P.P[off_graph] == 0)


def test_max_degree_weights_on_ring():
    P = mixing_from_adjacency(make_ring(4, 1)).P
    # max degree 2: off-diagonal 1/3, diagonal 1 - 2/3
    assert P[0, 1] == pytest.approx(1 / 3)
    assert P[0, 0] == pytest.approx(1 / 3)
    assert P[0, 2] == 0


def test_asymmetric_adjacency_rejected():
    A = np.zeros((3, 3))
    A[0, 1] = 1
    with pytest.raises(ConfigurationError):
        mixing_from_adjacency(A)


class TestSecondSingularValue:
    def test_consensus_matrix(self):
        assert second_singular_value(MixingMatrix(np.full((5, 5), 0.2))) <= 1e-8

    def test_identity(self):
        assert second_singular_value(MixingMatrix(np.eye(5))) == pytest.approx(1.0, abs=1e-8)

    def test_ring_of_four(self):
        P = mixing_from_adjacency(make_ring(4, 1))
        assert second_singular_value(P) == pytest.approx(1 / 3, abs=1e-8)

    def test_matches_dense_svd(self):
        P = mixing_from_adjacency(make_ring(9, 2))
        expected = np.linalg.svd(P.P, compute_uv=False)[1]
        assert second_singular_value(P) == pytest.approx(expected, abs=1e-7)

    def test_single_node(self):
        assert second_singular_value(MixingMatrix(np.eye(1))) == 0.0


def test_mixing_product_order():
    A = np.array([[1.0, 0.0], [0.0, 1.0]])
    B = np.array([[0.5, 0.5], [0.5, 0.5]])
    C = np.array([[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_allclose(mixing_product([A, B, C], 2, 1), C @ B)
    np.testing.assert_allclose(mixing_product([A, B, C], 1, 1), B)


def test_mixing_product_rejects_reversed_range():
    with pytest.raises(DomainError):
        mixing_product([np.eye(2)] * 3, 0, 2)


@pytest.mark.parametrize("matrices", [
    [mixing_from_adjacency(make_ring(7, 1))] * 12,
    [mixing_from_adjacency(make_random(8, 0.4, seed=s)) for s in range(12)],
], ids=["ring", "random"])
def test_column_deviation_from_average_decays_geometrically(matrices):
    n = matrices[0].n
    sigma = max(second_singular_value(P) for P in matrices) + 1e-8
    for s in range(len(matrices)):
        for t in range(s, len(matrices)):
            Phi = mixing_product(matrices, t, s)
            deviation = np.linalg.norm(Phi - 1.0 / n, axis=0)
            assert np.all(deviation <= sigma ** (t - s + 1) + 1e-12), (s, t)


@pytest.mark.parametrize("method", ["max_degree", "metropolis"])
def test_connected_random_graphs_mix_strictly(method):
    for seed in range(100):
        graph = make_random(3 + seed % 10, 0.3, seed=seed)
        P = mixing_from_adjacency(graph, method=method)
        assert is_doubly_stochastic(P)
        assert second_singular_value(P) < 1 - 1e-9, seed
