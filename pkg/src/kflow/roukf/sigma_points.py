"""Canonical sigma points: 2p scaled basis vectors with uniform weight."""

from __future__ import annotations

import numpy as np


def canonical_sigma_points(p: int) -> tuple[np.ndarray, float]:
    """Columns sqrt(p)*e_i followed by -sqrt(p)*e_i, weight alpha = 1/(2p).

    The points are zero-mean and alpha * [I][I]^T is the identity, so a
    cloud x + L C^T I_(i) has weighted covariance L C^T C L^T exactly.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    eye = np.sqrt(p) * np.eye(p)
    return np.concatenate([eye, -eye], axis=1), 1.0 / (2 * p)
