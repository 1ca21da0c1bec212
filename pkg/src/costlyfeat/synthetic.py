"""Small synthetic datasets with known optimal acquisition policies."""
from __future__ import annotations

import numpy as np

from .data import Dataset


def single_informative(n=300, noise_features=3, seed=0) -> Dataset:
    """Label is the sign of f0 (cost 0.1); the other features are pure noise."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 1 + noise_features))
    y = (X[:, 0] > 0).astype(np.int64)
    costs = np.concatenate(([0.1], np.linspace(0.5, 1.0, noise_features)))
    return Dataset(X, np.ones_like(X, dtype=bool), y, costs,
                   tuple(f"f{j}" for j in range(X.shape[1])), 2)


def redundant_informative(n=300, noise_features=2, seed=0) -> Dataset:
    """f0 and f1 carry the same signal (f1 = 2 f0 + 1); f0 costs 0.1, f1 costs 0.9."""
    rng = np.random.default_rng(seed)
    z = rng.normal(size=n)
    noise = rng.normal(size=(n, noise_features))
    X = np.column_stack([z, 2.0 * z + 1.0, noise])
    y = (z > 0).astype(np.int64)
    costs = np.concatenate(([0.1, 0.9], np.full(noise_features, 0.5)))
    return Dataset(X, np.ones_like(X, dtype=bool), y, costs,
                   tuple(f"f{j}" for j in range(X.shape[1])), 2)


def binary_and(n=240, costs=(0.3, 0.6, 0.2), seed=0) -> Dataset:
    """Three binary features; label = f0 AND f1, f2 is noise.

    Rows cycle through all 8 feature patterns in equal numbers, shuffled.
    """
    rng = np.random.default_rng(seed)
    patterns = np.array([[(k >> b) & 1 for b in range(3)] for k in range(8)], dtype=np.float64)
    X = patterns[np.arange(n) % 8]
    X = X[rng.permutation(n)]
    y = (X[:, 0] * X[:, 1]).astype(np.int64)
    return Dataset(X, np.ones_like(X, dtype=bool), y, np.array(costs, dtype=np.float64),
                   ("f0", "f1", "f2"), 2)


def gaussian_binary(n=1000, informative=2, noise_features=2, separation=1.5, seed=0) -> Dataset:
    """Two equal-sized classes separated by ``separation`` along each informative feature."""
    rng = np.random.default_rng(seed)
    y = rng.permutation(np.arange(n) % 2)
    X = rng.normal(size=(n, informative + noise_features))
    X[:, :informative] += separation * y[:, None]
    costs = np.concatenate((np.linspace(0.2, 0.4, informative), np.full(noise_features, 0.5)))
    return Dataset(X, np.ones_like(X, dtype=bool), y.astype(np.int64), costs,
                   tuple(f"f{j}" for j in range(X.shape[1])), 2)
