"""Random patch masking for masked reconstruction."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def mask_count(n_patches: int, ratio: float) -> int:
    """Number of masked patches: round-half-up of ``ratio * n_patches``."""
    if not 0.0 <= ratio < 1.0:
        raise ValueError("mask ratio must be in [0, 1)")
    m = int(math.floor(ratio * n_patches + 0.5))
    if m >= n_patches:
        raise ValueError(f"ratio {ratio} would mask all {n_patches} patches")
    return m


@dataclass
class MaskSpec:
    masked: np.ndarray  # (B, M) sorted patch indices
    visible: np.ndarray  # (B, n - M)
    ratio: float
    seed: int | None = None


def mask_sample(n_patches: int, ratio: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """Uniform random split of ``range(n_patches)`` into (visible, masked)."""
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    m = mask_count(n_patches, ratio)
    perm = rng.permutation(n_patches)
    return np.sort(perm[m:]), np.sort(perm[:m])


def mask_batch(batch: int, n_patches: int, ratio: float, seed) -> MaskSpec:
    rng = np.random.default_rng(seed)
    pairs = [mask_sample(n_patches, ratio, rng) for _ in range(batch)]
    return MaskSpec(
        masked=np.stack([p[1] for p in pairs]).reshape(batch, -1),
        visible=np.stack([p[0] for p in pairs]).reshape(batch, -1),
        ratio=ratio,
        seed=seed if isinstance(seed, int) else None,
    )
