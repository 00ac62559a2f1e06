"""Synthetic datasets for the shipped experiments."""

import math

import numpy as np


def gen_two_moons(n_points, noise=0.05, seed=0):
    """Two interleaved semicircles with isotropic Gaussian noise.

    Class 0 is the upper semicircle of radius 1 centered at the origin,
    class 1 the lower semicircle of radius 1 centered at (1, 0.5); the
    arc angles are uniform and each class gets exactly n_points/2 points.

    Returns (features, classes) with features shaped (n_points, 2).
    """
    if n_points % 2 != 0:
        raise ValueError("two-moons needs an even number of points")
    if noise < 0:
        raise ValueError("noise must be nonnegative")
    rng = np.random.default_rng(seed)
    half = n_points // 2
    upper = rng.uniform(0.0, math.pi, half)
    lower = rng.uniform(math.pi, 2.0 * math.pi, half)
    features = np.empty((n_points, 2))
    features[:half, 0] = np.cos(upper)
    features[:half, 1] = np.sin(upper)
    features[half:, 0] = 1.0 + np.cos(lower)
    features[half:, 1] = 0.5 + np.sin(lower)
    if noise > 0:
        features += noise * rng.standard_normal(features.shape)
    classes = np.repeat([0, 1], half)
    return features, classes


def stratified_labels(classes, per_class, rng):
    """Pick per_class labeled nodes uniformly at random from each class."""
    rng = np.random.default_rng(rng)
    picks = []
    for cls in np.unique(classes):
        members = np.flatnonzero(classes == cls)
        if members.size < per_class:
            raise ValueError(f"class {cls} has fewer than {per_class} members")
        picks.append(rng.choice(members, size=per_class, replace=False))
    idx = np.concatenate(picks)
    return idx, classes[idx].astype(float)
