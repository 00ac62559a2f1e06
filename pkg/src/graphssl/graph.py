"""Similarity graph construction and the unnormalized graph Laplacian.

Two constructions are provided: the calibrated epsilon graph whose weights
are scaled so that the Laplacian approximates a manifold Laplacian under
uniform sampling, and a symmetrized k-nearest-neighbor graph with squared
exponential weights. Neighbor search is exact brute force; intended scale
is a few thousand points.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

_BLOCK_ROWS = 512  # pairwise-distance scans work on row blocks of this size


@dataclass(frozen=True)
class GraphMeta:
    """Construction record kept alongside the weight matrix."""

    kind: str                        # "epsilon" | "knn"
    intrinsic_dim: int | None = None
    connectivity: float | None = None
    neighbors: int | None = None
    kernel: str = "indicator"
    lengthscale: float | None = None


@dataclass(frozen=True)
class Graph:
    """Sparse symmetric nonnegative weight matrix with zero diagonal."""

    weights: sp.csr_matrix
    meta: GraphMeta

    @property
    def n(self):
        return self.weights.shape[0]

    @property
    def n_edges(self):
        return self.weights.nnz // 2


@dataclass(frozen=True)
class Laplacian:
    """Unnormalized Laplacian L = D - W with the degree vector cached."""

    matrix: sp.csr_matrix
    degrees: np.ndarray

    @property
    def n(self):
        return self.matrix.shape[0]


def unit_ball_volume(m):
    """Volume of the unit ball in m dimensions, pi^(m/2) / Gamma(m/2 + 1)."""
    return math.pi ** (m / 2) / math.gamma(m / 2 + 1)


def default_connectivity(n_points, m, s):
    """Default epsilon-graph connectivity h = ((log N)^c / N^(1/m))^(1/2).

    The exponent c is 3/4 for m = 2 and 1/m otherwise. Warns when h falls
    outside the admissible window (log N)^c / N^(1/m) < h < N^(-1/(2s)),
    which is unavoidable at small N.
    """
    if n_points < 2:
        raise ValueError("need at least two points")
    c_m = 0.75 if m == 2 else 1.0 / m
    lower = math.log(n_points) ** c_m / n_points ** (1.0 / m)
    h = math.sqrt(lower)
    upper = n_points ** (-1.0 / (2.0 * s))
    if not (lower < h < upper):
        warnings.warn(
            f"connectivity window ({lower:.4g}, {upper:.4g}) is violated by "
            f"h={h:.4g} at N={n_points}; proceeding anyway",
            stacklevel=2,
        )
    return h


def _check_features(features):
    feats = np.atleast_2d(np.asarray(features, dtype=float))
    if not np.all(np.isfinite(feats)):
        raise ValueError("features contain non-finite coordinates")
    if feats.shape[0] < 2:
        raise ValueError("need at least two points to build a graph")
    return feats


def _block_distances(feats, start, stop):
    """Squared Euclidean distances between rows [start:stop) and all rows."""
    block = feats[start:stop]
    d2 = (
        np.sum(block**2, axis=1)[:, None]
        + np.sum(feats**2, axis=1)[None, :]
        - 2.0 * block @ feats.T
    )
    np.maximum(d2, 0.0, out=d2)
    return d2


def build_epsilon_graph(features, m, h):
    """Epsilon graph with the calibrated weight 2(m+2) / (N nu_m h^(m+2)).

    An edge joins every pair of distinct indices at Euclidean distance
    below h; all present edges carry the same calibrated weight.
    """
    if h <= 0:
        raise ValueError("connectivity h must be positive")
    if m < 1:
        raise ValueError("intrinsic dimension m must be >= 1")
    feats = _check_features(features)
    n = feats.shape[0]
    weight = 2.0 * (m + 2) / (n * unit_ball_volume(m) * h ** (m + 2))

    rows, cols = [], []
    h2 = h * h
    for start in range(0, n, _BLOCK_ROWS):
        stop = min(start + _BLOCK_ROWS, n)
        d2 = _block_distances(feats, start, stop)
        i_loc, j = np.nonzero(d2 < h2)
        i = i_loc + start
        keep = i != j  # self-pairs excluded; duplicate points keep their edge
        rows.append(i[keep])
        cols.append(j[keep])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    if rows.size == 0:
        raise ValueError(f"epsilon graph has no edges at h={h:.4g}")
    weights = sp.csr_matrix(
        (np.full(rows.size, weight), (rows, cols)), shape=(n, n)
    )
    meta = GraphMeta(kind="epsilon", intrinsic_dim=m, connectivity=h)
    return Graph(weights=weights, meta=meta)


def build_knn_graph(features, k, lengthscale=1.0):
    """Symmetrized (union rule) k-NN graph with weights exp(-d^2 / l^2)."""
    feats = _check_features(features)
    n = feats.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < N, got k={k}, N={n}")
    if lengthscale <= 0:
        raise ValueError("lengthscale must be positive")

    rows, cols, d2s = [], [], []
    for start in range(0, n, _BLOCK_ROWS):
        stop = min(start + _BLOCK_ROWS, n)
        d2 = _block_distances(feats, start, stop)
        # bar self-edges before ranking
        d2[np.arange(stop - start), np.arange(start, stop)] = np.inf
        nbr = np.argpartition(d2, k - 1, axis=1)[:, :k]
        i = np.repeat(np.arange(start, stop), k)
        j = nbr.ravel()
        rows.append(i)
        cols.append(j)
        d2s.append(d2[np.repeat(np.arange(stop - start), k), j])
    i = np.concatenate(rows)
    j = np.concatenate(cols)
    w = np.exp(-np.concatenate(d2s) / lengthscale**2)

    directed = sp.csr_matrix((w, (i, j)), shape=(n, n))
    # union symmetrization: keep an edge if either endpoint selected it
    weights = directed.maximum(directed.T).tocsr()
    meta = GraphMeta(
        kind="knn",
        neighbors=k,
        kernel="squared_exponential",
        lengthscale=lengthscale,
    )
    return Graph(weights=weights, meta=meta)


def laplacian(graph):
    """Unnormalized Laplacian L = D - W of a graph."""
    w = graph.weights
    degrees = np.asarray(w.sum(axis=1)).ravel()
    lap = (sp.diags(degrees) - w).tocsr()
    return Laplacian(matrix=lap, degrees=degrees)


def dirichlet_energy(graph, v):
    """Graph Dirichlet energy (1/2) sum_ij W_ij (v_i - v_j)^2."""
    v = np.asarray(v, dtype=float).ravel()
    if v.size != graph.n:
        raise ValueError(f"vector length {v.size} != graph size {graph.n}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector contains non-finite entries")
    coo = graph.weights.tocoo()
    return 0.5 * float(np.sum(coo.data * (v[coo.row] - v[coo.col]) ** 2))


def scaled(graph, factor):
    """Copy of the graph with all weights multiplied by a positive factor."""
    if factor <= 0:
        raise ValueError("scale factor must be positive")
    return Graph(weights=(graph.weights * factor).tocsr(), meta=graph.meta)


def save_edge_list(graph, path):
    """Write the upper-triangle edge list as CSV `i,j,weight`."""
    coo = sp.triu(graph.weights, k=1).tocoo()
    with open(path, "w") as fh:
        fh.write("i,j,weight\n")
        for i, j, w in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i},{j},{w:.17g}\n")


def load_edge_list(path, n):
    """Rebuild a graph from an edge-list CSV written by save_edge_list."""
    raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if raw.size == 0:
        raise ValueError(f"edge list {path} is empty")
    i = raw[:, 0].astype(int)
    j = raw[:, 1].astype(int)
    w = raw[:, 2]
    weights = sp.csr_matrix((w, (i, j)), shape=(n, n))
    weights = weights.maximum(weights.T)
    return Graph(weights=weights, meta=GraphMeta(kind="imported"))
