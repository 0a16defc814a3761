"""Deterministic sample points inside coordinate boxes."""

from __future__ import annotations

import numpy as np
from scipy.stats import qmc

DEFAULT_SAMPLES = 64


def as_box(box, dim: int) -> np.ndarray:
    box = np.asarray(box, dtype=float)
    if box.shape != (dim, 2):
        raise ValueError(f"chart box must have shape ({dim}, 2), got {box.shape}")
    if np.any(box[:, 1] <= box[:, 0]):
        raise ValueError("chart box intervals must have lower < upper")
    return box


def halton_points(box, count: int = DEFAULT_SAMPLES) -> np.ndarray:
    """``count`` unscrambled Halton points in ``box`` (shape ``(dim, 2)``).

    The leading all-zero point of the sequence is skipped so that samples
    avoid the box corner.
    """
    box = np.asarray(box, dtype=float)
    sampler = qmc.Halton(d=box.shape[0], scramble=False)
    sampler.fast_forward(1)
    unit = sampler.random(count)
    return box[:, 0] + unit * (box[:, 1] - box[:, 0])


def in_box(box, points, slack: float = 0.0) -> np.ndarray:
    points = np.atleast_2d(points)
    return np.all((points >= box[:, 0] - slack) & (points <= box[:, 1] + slack), axis=-1)
