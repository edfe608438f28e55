"""Shared builders for test data.

Oracle implementations live next to the tests that use them; this module
only provides random-object constructors reused across files.
"""

from __future__ import annotations

import numpy as np

from ivnda.frontend import FeatureMatrix
from ivnda.ubm import DiagonalGmm, PosteriorMatrix


def make_gmm(rng: np.random.Generator, g: int, d: int) -> DiagonalGmm:
    weights = rng.dirichlet(np.full(g, 5.0))
    means = rng.normal(0.0, 2.0, size=(g, d))
    variances = rng.uniform(0.3, 2.0, size=(g, d))
    return DiagonalGmm(weights=weights, means=means, variances=variances)


def make_features(
    rng: np.random.Generator,
    num_frames: int,
    dim: int,
    mask: np.ndarray | None = None,
    frame_shift_ms: float = 10.0,
) -> FeatureMatrix:
    frames = rng.normal(0.0, 1.5, size=(num_frames, dim))
    if mask is None:
        mask = np.ones(num_frames, dtype=bool)
    return FeatureMatrix(
        frames=frames, frame_shift_ms=frame_shift_ms, speech_mask=mask
    )


def dense_random_posteriors(
    rng: np.random.Generator, num_frames: int, g: int
) -> np.ndarray:
    """Random dense posterior rows (each sums to one)."""
    return rng.dirichlet(np.full(g, 0.7), size=num_frames)


def sparse_random_posteriors(
    rng: np.random.Generator, num_frames: int, g: int, per_frame: int
) -> PosteriorMatrix:
    """Random sparse posteriors with `per_frame` active components per row."""
    indptr = np.arange(num_frames + 1, dtype=np.int64) * per_frame
    indices = np.empty(num_frames * per_frame, dtype=np.int64)
    values = np.empty(num_frames * per_frame)
    for t in range(num_frames):
        chosen = np.sort(rng.choice(g, size=per_frame, replace=False))
        weights = rng.dirichlet(np.full(per_frame, 1.5))
        indices[t * per_frame : (t + 1) * per_frame] = chosen
        values[t * per_frame : (t + 1) * per_frame] = weights
    return PosteriorMatrix(
        indptr=indptr, indices=indices, values=values, num_components=g
    )
