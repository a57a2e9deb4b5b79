"""Temporal Haar decomposition of 8-frame chunk buffers and its features.

Each chunk's 8 luma planes are decomposed per pixel into 7 orthonormal Haar
detail subbands (4 level-1, 2 level-2, 1 level-3). Every detail subband is
noise-regularized, rescaled to two scales, and run through the 34-statistic
extractor: 34 x 7 x 2 = 476 features per chunk.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .media import Chunk, rescale_short_side
from .nss import DEFAULT_SCALES, NSS34_DIM, NoiseConfig, add_gaussian_noise, nss34

SQRT2 = np.sqrt(2.0)

N_SUBBANDS = 7
TEMPORAL_DIM = NSS34_DIM * N_SUBBANDS * 2  # 476

# level-major, time-ordered within level
SUBBAND_LABELS = ("L1_0", "L1_1", "L1_2", "L1_3", "L2_0", "L2_1", "L3_0")


@dataclass(frozen=True)
class SubbandSet:
    details: list[np.ndarray]  # 7 grids, SUBBAND_LABELS order
    approx: np.ndarray


def haar7(buffer: list[np.ndarray] | np.ndarray) -> SubbandSet:
    """Per-pixel orthonormal 3-level Haar transform of 8 frames over time."""
    x = np.asarray(buffer, dtype=np.float64)
    if x.shape[0] != 8:
        raise ValueError(f"temporal buffer must hold exactly 8 frames, got {x.shape[0]}")
    if x.ndim != 3:
        raise ValueError("temporal buffer frames must share one 2-d grid shape")
    d1 = [(x[2 * k] - x[2 * k + 1]) / SQRT2 for k in range(4)]
    a1 = [(x[2 * k] + x[2 * k + 1]) / SQRT2 for k in range(4)]
    d2 = [(a1[2 * k] - a1[2 * k + 1]) / SQRT2 for k in range(2)]
    a2 = [(a1[2 * k] + a1[2 * k + 1]) / SQRT2 for k in range(2)]
    d3 = (a2[0] - a2[1]) / SQRT2
    a3 = (a2[0] + a2[1]) / SQRT2
    return SubbandSet(details=d1 + d2 + [d3], approx=a3)


def extract_temporal_features(
    chunk: Chunk, noise: NoiseConfig, scales: tuple[int, ...] = DEFAULT_SCALES
) -> np.ndarray:
    """476-d temporal segment of one chunk (subband-major, scale-minor)."""
    if len(chunk.temporal_frames) != 8:
        raise ValueError(
            f"chunk {chunk.chunk_index} has {len(chunk.temporal_frames)} temporal frames, need 8"
        )
    planes = [f.y.astype(np.float64) for f in chunk.temporal_frames]
    bands = haar7(planes)
    parts = []
    for label, band in zip(SUBBAND_LABELS, bands.details):
        key = (noise.seed, chunk.chunk_index, f"T:{label}")
        noisy = add_gaussian_noise(band, noise.sigma_temporal, key)
        for scale in scales:
            parts.append(nss34(rescale_short_side(noisy, scale)))
    return np.concatenate(parts)
