"""Deterministic synthetic test sequences.

These stand in for camera footage in tests and benchmarks: a smooth random
texture with a coarse checker pattern, panned by a fixed number of pixels per
frame, and a contrast-clone scene for exercising the mean gate of the motion
search.
"""

from __future__ import annotations

import numpy as np

__all__ = ["contrast_clone_sequence", "moving_texture", "smooth_noise"]


def _gaussian_kernel(sigma: float) -> np.ndarray:
    radius = max(1, int(round(3 * sigma)))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def smooth_noise(height: int, width: int, sigma: float = 3.0, seed: int = 0) -> np.ndarray:
    """Gaussian-blurred white noise rescaled to [20, 220], as float64."""
    rng = np.random.default_rng(seed)
    k = _gaussian_kernel(sigma)
    pad = k.size // 2
    noise = rng.normal(size=(height + 2 * pad, width + 2 * pad))
    rows = np.apply_along_axis(np.convolve, 1, noise, k, mode="valid")
    blur = np.apply_along_axis(np.convolve, 0, rows, k, mode="valid")
    lo, hi = blur.min(), blur.max()
    return (blur - lo) / (hi - lo) * 200.0 + 20.0


def moving_texture(n_frames: int = 20, width: int = 176, height: int = 144, dy: int = 1, dx: int = 2,
                   seed: int = 0, checker: int = 24) -> list[np.ndarray]:
    """A textured canvas panned by ``(dy, dx)`` pixels per frame."""
    margin_y = abs(dy) * n_frames + 1
    margin_x = abs(dx) * n_frames + 1
    canvas = smooth_noise(height + 2 * margin_y, width + 2 * margin_x, seed=seed)
    yy, xx = np.mgrid[: canvas.shape[0], : canvas.shape[1]]
    canvas += 30.0 * ((yy // checker + xx // checker) % 2)
    canvas = np.clip(np.round(canvas), 0, 255).astype(np.uint8)
    frames = []
    for t in range(n_frames):
        y0 = margin_y + dy * t
        x0 = margin_x + dx * t
        frames.append(canvas[y0:y0 + height, x0:x0 + width].copy())
    return frames


def contrast_clone_sequence(width: int = 80, height: int = 80, block: int = 16, margin: int = 4, seed: int = 1):
    """Key / WZ / key triple with a block and its ``2*I + 110`` contrast clone.

    A textured patch (the block plus ``margin`` pixels of context, enough for
    neighbourhoods up to N = 4) sits block-aligned at ``true_pos`` in all
    three frames, over a flat background.  The key frames also hold the
    contrast clone of the whole patch, with the clone block at ``clone_pos``.
    Texture levels are 14 apart, so every comparison with a margin
    ``|delta| <= 10`` comes out the same on the patch and on its clone: both
    blocks have rank SAD 0 against the WZ block, but only the true one has the
    right mean.  The clone comes first in raster order, so a plain rank-SAD
    search, which keeps the first of equal candidates, picks it.

    Returns ``(frames, true_pos, clone_pos)`` with positions as ``(y, x)``.
    """
    rng = np.random.default_rng(seed)
    levels = np.arange(0, 71, 14)  # 2 * 70 + 110 = 250 stays within 8 bits
    side = block + 2 * margin
    patch = levels[rng.integers(0, levels.size, size=(side, side))].astype(np.int32)
    background = 40
    true_pos = (height - 2 * block, width - 2 * block)
    clone_pos = (margin, margin)
    if true_pos[0] % block or true_pos[1] % block or true_pos[0] < side:
        raise ValueError("frame too small for a separated, block-aligned patch and clone")

    def paste(img, pos, values):
        y, x = pos[0] - margin, pos[1] - margin
        img[y:y + side, x:x + side] = values

    wz = np.full((height, width), background, dtype=np.int32)
    paste(wz, true_pos, patch)
    key = wz.copy()
    paste(key, clone_pos, 2 * patch + 110)
    frames = [key.astype(np.uint8), wz.astype(np.uint8), key.astype(np.uint8)]
    return frames, true_pos, clone_pos
