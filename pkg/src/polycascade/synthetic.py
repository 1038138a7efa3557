"""Self-contained synthetic benchmark: two classes on concentric shells.

Points are drawn on spheres around the origin; the two classes differ only
in shell radius, with Gaussian radial jitter making them overlap.  The
decision boundary is radial, so nothing linear separates the classes and a
model must pick up the norm nonlinearity.  Used as the desk-scale stand-in
for the large binary-classification benchmarks.
"""

from __future__ import annotations

import numpy as np

from .data import Dataset


def make_shell_task(n_train: int = 20000, n_test: int = 5000, dim: int = 10,
                    inner_radius: float = 0.6, outer_radius: float = 0.9,
                    radial_noise: float = 0.1, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Two concentric-shell classes in ``dim`` dimensions.

    Class 0 sits on the inner shell, class 1 on the outer; radii are jittered
    by ``radial_noise``.  Returns (train, test) datasets with binary labels.
    """
    rng = np.random.default_rng(seed)
    total = n_train + n_test
    labels = rng.integers(0, 2, size=total)
    directions = rng.standard_normal((total, dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = np.where(labels == 1, outer_radius, inner_radius) + radial_noise * rng.standard_normal(total)
    features = directions * np.abs(radii)[:, None]
    return (Dataset(features[:n_train], labels[:n_train]),
            Dataset(features[n_train:], labels[n_train:]))
