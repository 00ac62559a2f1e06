"""Dataset container and CSV ingestion for features and labels."""

from dataclasses import dataclass, field

import numpy as np

REGRESSION = "regression"
CLASSIFICATION = "classification"


@dataclass(frozen=True)
class Dataset:
    """Feature points plus a (possibly empty) set of indexed labels.

    Parameters
    ----------
    features : ndarray, shape (N, d)
        One row per point.
    label_indices : ndarray, shape (n,)
        Node indices of the labeled points, distinct, in [0, N).
    label_values : ndarray, shape (n,)
        Observed labels. Restricted to {0, 1} for classification.
    task : str
        "regression" or "classification".
    noise_std : float, optional
        Known observation noise, required (and > 0) for regression.
    """

    features: np.ndarray
    label_indices: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    label_values: np.ndarray = field(default_factory=lambda: np.empty(0))
    task: str = REGRESSION
    noise_std: float | None = None

    def __post_init__(self):
        feats = np.atleast_2d(np.asarray(self.features, dtype=float))
        idx = np.asarray(self.label_indices, dtype=int).ravel()
        vals = np.asarray(self.label_values, dtype=float).ravel()
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "label_indices", idx)
        object.__setattr__(self, "label_values", vals)

        if not np.all(np.isfinite(feats)):
            raise ValueError("features contain non-finite coordinates")
        if idx.size != vals.size:
            raise ValueError("label indices and values have different lengths")
        if idx.size > self.n_points:
            raise ValueError("more labels than points")
        if idx.size and (idx.min() < 0 or idx.max() >= self.n_points):
            raise ValueError("label index out of range")
        if idx.size != np.unique(idx).size:
            raise ValueError("label indices must be distinct")
        if self.task == REGRESSION:
            if self.noise_std is None or not self.noise_std > 0:
                raise ValueError("regression requires noise_std > 0")
        elif self.task == CLASSIFICATION:
            if vals.size and not np.all(np.isin(vals, (0.0, 1.0))):
                raise ValueError("classification labels must be 0 or 1")
        else:
            raise ValueError(f"unknown task {self.task!r}")

    @property
    def n_points(self):
        return self.features.shape[0]

    @property
    def n_labels(self):
        return self.label_indices.size

    @property
    def dim(self):
        return self.features.shape[1]


def load_features_csv(path, header=False):
    """Read features from CSV, one point per row, d columns.

    `header=True` skips the first line.
    """
    try:
        feats = np.loadtxt(path, delimiter=",", skiprows=1 if header else 0, ndmin=2)
    except ValueError as exc:
        raise ValueError(f"malformed feature CSV {path}: {exc}") from exc
    return feats


def load_labels_csv(path):
    """Read labels from a two-column CSV `index,value` (0-based indices)."""
    try:
        raw = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise ValueError(f"malformed label CSV {path}: {exc}") from exc
    if raw.shape[1] != 2:
        raise ValueError(f"label CSV {path} must have exactly two columns")
    idx = raw[:, 0]
    if not np.all(idx == np.round(idx)):
        raise ValueError(f"label CSV {path} has non-integer indices")
    return idx.astype(int), raw[:, 1].copy()
