"""Graph construction and Laplacian invariants."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphssl.graph import (
    build_epsilon_graph,
    build_knn_graph,
    default_connectivity,
    dirichlet_energy,
    laplacian,
    load_edge_list,
    save_edge_list,
    scaled,
    unit_ball_volume,
)
from graphssl.synthetic import gen_two_moons


def line_features(n, spacing=1.0):
    return np.column_stack([spacing * np.arange(n), np.zeros(n)])


def random_graph(n, seed):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, 2, size=(n, 2))
    return build_knn_graph(pts, k=min(4, n - 1))


class TestEpsilonGraph:
    def test_calibrated_weight_hand_value(self):
        # 100 points far apart except a single pair at distance 0.05
        feats = line_features(100)
        feats[1] = feats[0] + [0.05, 0.0]
        g = build_epsilon_graph(feats, m=1, h=0.1)
        # 2(m+2) / (N nu_m h^(m+2)) = 6 / (100 * 2 * 0.001) = 30
        assert g.weights[0, 1] == pytest.approx(30.0, rel=1e-12)
        assert g.weights[1, 0] == pytest.approx(30.0, rel=1e-12)
        assert g.n_edges == 1

    def test_cutoff_is_strict(self):
        feats = np.array([[0.0], [0.05], [0.15]])
        g = build_epsilon_graph(feats, m=1, h=0.1)
        # distances 0.1 (exactly h) and 0.15 carry no edge
        assert g.weights[1, 2] == 0.0 and g.weights[0, 2] == 0.0
        assert g.n_edges == 1

    def test_no_edges_raises(self):
        with pytest.raises(ValueError, match="no edges"):
            build_epsilon_graph(line_features(5), m=1, h=0.5)

    def test_two_moons_default_connectivity(self):
        feats, _ = gen_two_moons(200, noise=0.05, seed=1)
        h = default_connectivity(200, m=1, s=2)
        g = build_epsilon_graph(feats, m=1, h=h)
        assert g.n_edges > 0
        diff = (g.weights - g.weights.T).tocoo()
        assert diff.nnz == 0
        assert np.all(g.weights.diagonal() == 0.0)
        assert np.all(g.weights.data > 0)

    def test_doubling_n_halves_weights(self):
        close = line_features(10, spacing=0.05)
        far = line_features(10, spacing=1.0) + [0.0, 100.0]
        g_small = build_epsilon_graph(close, m=1, h=0.06)
        g_big = build_epsilon_graph(np.vstack([close, far]), m=1, h=0.06)
        w_small = g_small.weights[0, 1]
        w_big = g_big.weights[0, 1]
        assert w_big == pytest.approx(w_small / 2.0, rel=1e-14)

    def test_duplicate_points_keep_edge(self):
        feats = np.vstack([line_features(4), line_features(1)])  # point 4 == point 0
        g = build_epsilon_graph(feats, m=1, h=0.5)
        assert g.weights[0, 4] > 0
        assert np.all(g.weights.diagonal() == 0.0)

    def test_nonfinite_features_raise(self):
        feats = line_features(4)
        feats[2, 0] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            build_epsilon_graph(feats, m=1, h=2.0)


class TestDefaultConnectivity:
    def test_hand_values(self):
        assert default_connectivity(1000, 1, 2) == pytest.approx(
            math.sqrt(math.log(1000) / 1000), rel=1e-14
        )
        assert default_connectivity(1000, 1, 2) == pytest.approx(0.0831, abs=2e-4)
        assert default_connectivity(2, 1, 2) == pytest.approx(
            math.sqrt(math.log(2) / 2), rel=1e-14
        )

    def test_m2_exponent(self):
        h = default_connectivity(10**4, 2, 2)
        expected = math.sqrt(math.log(10**4) ** 0.75 / (10**4) ** 0.5)
        assert h == pytest.approx(expected, rel=1e-14)

    def test_window_violation_warns(self):
        # at large N with small s the upper bound N^(-1/2s) drops below h
        with pytest.warns(UserWarning, match="window"):
            default_connectivity(10**6, 1, 0.25)


class TestKnnGraph:
    def test_three_collinear_points(self):
        g = build_knn_graph(line_features(3), k=1, lengthscale=1.0)
        assert g.weights[0, 1] == pytest.approx(math.exp(-1.0), rel=1e-12)
        assert g.weights[1, 2] == pytest.approx(math.exp(-1.0), rel=1e-12)
        assert g.weights[0, 2] == 0.0

    def test_duplicates_weight_one(self):
        feats = np.array([[0.0, 0.0], [0.0, 0.0], [5.0, 0.0]])
        g = build_knn_graph(feats, k=1)
        assert g.weights[0, 1] == pytest.approx(1.0)

    def test_complete_graph_at_k_n_minus_1(self):
        n = 6
        g = build_knn_graph(np.random.default_rng(0).normal(size=(n, 2)), k=n - 1)
        assert g.weights.nnz == n * (n - 1)

    def test_k_out_of_range(self):
        with pytest.raises(ValueError):
            build_knn_graph(line_features(4), k=4)

    def test_union_symmetrization(self):
        # point 2 is nearest to 1 but 1's nearest is 0; union keeps (1,2) if
        # either side selects it
        feats = np.array([[0.0, 0.0], [1.0, 0.0], [2.5, 0.0]])
        g = build_knn_graph(feats, k=1)
        assert g.weights[1, 2] > 0  # 2 selected 1
        assert (abs(g.weights - g.weights.T)).nnz == 0


class TestLaplacian:
    def test_two_node_hand_value(self):
        g = build_epsilon_graph(np.array([[0.0], [0.05]]), m=1, h=0.1)
        w = g.weights[0, 1]
        lap = laplacian(g)
        dense = lap.matrix.toarray()
        np.testing.assert_allclose(dense, [[w, -w], [-w, w]], rtol=1e-14)

    def test_row_sums_zero(self):
        g = random_graph(40, seed=3)
        lap = laplacian(g)
        rowsums = np.asarray(lap.matrix.sum(axis=1)).ravel()
        assert np.max(np.abs(rowsums)) <= 1e-10 * max(lap.degrees.max(), 1.0)

    def test_psd_probe(self):
        g = random_graph(30, seed=4)
        lap = laplacian(g)
        rng = np.random.default_rng(0)
        for _ in range(100):
            v = rng.standard_normal(30)
            v /= np.linalg.norm(v)
            assert v @ (lap.matrix @ v) >= -1e-12


class TestDirichletEnergy:
    def test_constant_vector_zero(self):
        g = random_graph(25, seed=5)
        assert dirichlet_energy(g, np.full(25, 3.7)) == pytest.approx(0.0, abs=1e-12)

    def test_two_node_hand_value(self):
        feats = np.array([[0.0], [0.05]])
        g = build_epsilon_graph(feats, m=1, h=0.1)
        g = scaled(g, 3.0 / g.weights[0, 1])  # set the single weight to 3
        assert dirichlet_energy(g, [0.0, 1.0]) == pytest.approx(3.0, rel=1e-14)

    @given(st.integers(min_value=0, max_value=10**6))
    @settings(max_examples=25, deadline=None)
    def test_matches_quadratic_form(self, seed):
        rng = np.random.default_rng(seed)
        g = random_graph(20, seed=seed)
        v = rng.standard_normal(20)
        dense = laplacian(g).matrix.toarray()
        oracle = float(v @ dense @ v)
        energy = dirichlet_energy(g, v)
        assert energy == pytest.approx(oracle, rel=1e-10, abs=1e-12)
        assert energy >= -1e-12

    def test_length_mismatch(self):
        g = random_graph(10, seed=6)
        with pytest.raises(ValueError, match="length"):
            dirichlet_energy(g, np.zeros(11))


def test_sparsity_scaling_on_circle():
    """nnz(L) stays O(N^(3/2)) under the default connectivity."""
    ratios = {}
    for n in (250, 2000):
        rng = np.random.default_rng(123)
        theta = rng.uniform(0, 2 * np.pi, n)
        pts = np.column_stack([np.cos(theta), np.sin(theta)])
        g = build_epsilon_graph(pts, m=1, h=default_connectivity(n, 1, 2))
        ratios[n] = laplacian(g).matrix.nnz / n**1.5
    assert ratios[2000] <= 4.0 * ratios[250]


def test_edge_list_round_trip(tmp_path):
    g = random_graph(15, seed=9)
    path = tmp_path / "edges.csv"
    save_edge_list(g, path)
    g2 = load_edge_list(path, 15)
    np.testing.assert_allclose(
        g.weights.toarray(), g2.weights.toarray(), rtol=0, atol=1e-15
    )


def test_unit_ball_volume():
    assert unit_ball_volume(1) == pytest.approx(2.0)
    assert unit_ball_volume(2) == pytest.approx(math.pi)
    assert unit_ball_volume(3) == pytest.approx(4.0 * math.pi / 3.0)
