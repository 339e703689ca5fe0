"""delta-Local Rank Transforms over square, odd and even neighbourhoods.

The rank of a pixel ``x`` is the number of neighbours ``y`` with
``y < x - delta``.  With negative ``delta`` smooth areas reach the maximum
rank, so natural images pile up at the top of the alphabet.

Neighbourhoods are the ``(2N+1) x (2N+1)`` square around the pixel minus the
centre.  The *odd* and *even* variants keep the offsets whose city-block
distance is odd (resp. even), which splits the square into two halves of
``2N(N+1)`` offsets each.  Borders are replicate-padded so every pixel sees a
full neighbourhood.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from ._jit import NUMBA_ENABLED, njit
from .media_io import as_frame, save_pgm

__all__ = [
    "ABSENT",
    "LrtParams",
    "RankImage",
    "delta_rank",
    "interpolate_missing",
    "max_rank_for",
    "neighborhood_offsets",
    "sample_half",
    "save_rank_pgm",
    "transform",
    "transform_counted",
]

ABSENT = -1
VARIANTS = ("full", "odd", "even")
SAMPLINGS = ("full", "half")


def max_rank_for(n: int, variant: str) -> int:
    if variant == "full":
        return 4 * n * (n + 1)
    return 2 * n * (n + 1)


@dataclass(frozen=True)
class LrtParams:
    """Neighbourhood size, delta margin, neighbourhood variant and sampling."""

    n: int = 2
    delta: int = -10
    variant: str = "odd"
    sampling: str = "full"

    def __post_init__(self):
        if self.n not in (1, 2, 3, 4):
            raise ValueError(f"neighbourhood size must be 1..4, got {self.n}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.sampling not in SAMPLINGS:
            raise ValueError(f"sampling must be one of {SAMPLINGS}, got {self.sampling!r}")
        if not -128 <= self.delta <= 127:
            raise ValueError(f"delta must fit in a signed byte, got {self.delta}")

    @property
    def max_rank(self) -> int:
        return max_rank_for(self.n, self.variant)

    @classmethod
    def for_sampling(cls, n: int = 2, delta: int = -10, sampling: str = "full") -> "LrtParams":
        """Default variant per sampling mode: odd for full, even for half."""
        return cls(n=n, delta=delta, variant="odd" if sampling == "full" else "even", sampling=sampling)


@dataclass
class RankImage:
    """Per-pixel ranks; ``ABSENT`` marks positions dropped by sampling."""

    ranks: np.ndarray  # (height, width) int16
    max_rank: int
    sampling: str = "full"
    merged: bool = False

    @property
    def height(self) -> int:
        return self.ranks.shape[0]

    @property
    def width(self) -> int:
        return self.ranks.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.ranks.shape

    @property
    def present(self) -> np.ndarray:
        return self.ranks != ABSENT

    def __eq__(self, other):
        if not isinstance(other, RankImage):
            return NotImplemented
        return (
            self.max_rank == other.max_rank
            and self.sampling == other.sampling
            and self.merged == other.merged
            and np.array_equal(self.ranks, other.ranks)
        )


@lru_cache(maxsize=None)
def _offsets(n: int, variant: str) -> tuple[tuple[int, int], ...]:
    out = []
    for dy in range(-n, n + 1):
        for dx in range(-n, n + 1):
            if dy == 0 and dx == 0:
                continue
            parity = (abs(dy) + abs(dx)) % 2
            if variant == "full" or (variant == "odd") == (parity == 1):
                out.append((dy, dx))
    return tuple(out)


def neighborhood_offsets(n: int, variant: str = "odd") -> list[tuple[int, int]]:
    """``(dy, dx)`` offsets of the neighbourhood in raster order."""
    if n not in (1, 2, 3, 4):
        raise ValueError(f"neighbourhood size must be 1..4, got {n}")
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    return list(_offsets(n, variant))


def _offset_arrays(n: int, variant: str) -> tuple[np.ndarray, np.ndarray]:
    offs = np.array(_offsets(n, variant), dtype=np.int64)
    return offs[:, 0].copy(), offs[:, 1].copy()


def delta_rank(center: int, neighbors, delta: int) -> int:
    """Number of ``neighbors`` strictly below ``center - delta``."""
    threshold = int(center) - int(delta)
    return sum(1 for y in neighbors if int(y) < threshold)


# -- kernels -----------------------------------------------------------------


@njit
def _transform_kernel(img, dys, dxs, delta, out):
    height, width = img.shape
    for y in range(height):
        for x in range(width):
            threshold = img[y, x] - delta
            r = 0
            for k in range(dys.shape[0]):
                yy = min(max(y + dys[k], 0), height - 1)
                xx = min(max(x + dxs[k], 0), width - 1)
                if img[yy, xx] < threshold:
                    r += 1
            out[y, x] = r


def _transform_numpy(img: np.ndarray, dys: np.ndarray, dxs: np.ndarray, delta: int) -> np.ndarray:
    n = int(max(np.abs(dys).max(), np.abs(dxs).max()))
    height, width = img.shape
    padded = np.pad(img, n, mode="edge")
    threshold = img - delta
    out = np.zeros(img.shape, dtype=np.int16)
    for dy, dx in zip(dys.tolist(), dxs.tolist()):
        out += padded[n + dy:n + dy + height, n + dx:n + dx + width] < threshold
    return out


def _use_kernel() -> bool:
    return NUMBA_ENABLED and os.environ.get("LRTDVC_TRANSFORM", "") != "numpy"


def transform(frame, params: LrtParams) -> RankImage:
    """Rank image of ``frame``; half sampling drops the odd-parity checkerboard."""
    img = as_frame(frame).astype(np.int32)
    dys, dxs = _offset_arrays(params.n, params.variant)
    if _use_kernel():
        ranks = np.empty(img.shape, dtype=np.int16)
        _transform_kernel(img, dys, dxs, np.int32(params.delta), ranks)
    else:
        ranks = _transform_numpy(img, dys, dxs, params.delta)
    full = RankImage(ranks, params.max_rank, "full")
    return sample_half(full) if params.sampling == "half" else full


# -- instrumented transform ---------------------------------------------------


@dataclass
class TransformCounts:
    """Operations actually executed by :func:`transform_counted`."""

    comparisons: int = 0
    border_comparisons: int = 0
    increments: int = 0
    additions: int = 0
    shifts: int = 0

    @property
    def total_comparisons(self) -> int:
        return self.comparisons + self.border_comparisons


@njit
def _counted_kernel(img, fdys, fdxs, delta, block, ranks, sums, counts):
    # Each unordered neighbour pair is compared once from the anchor that
    # sees it as a forward offset; the signed difference feeds both ranks.
    height, width = img.shape
    comparisons = 0
    border = 0
    increments = 0
    additions = 0
    for y in range(height):
        for x in range(width):
            v = img[y, x]
            for k in range(fdys.shape[0]):
                ny = y + fdys[k]
                nx = x + fdxs[k]
                u = img[min(max(ny, 0), height - 1), min(max(nx, 0), width - 1)]
                d = v - u
                comparisons += 1
                ranks[y, x] += 1 if d > delta else 0
                increments += 1
                if 0 <= ny < height and 0 <= nx < width:
                    ranks[ny, nx] += 1 if -d > delta else 0
                    increments += 1
                # backward partner lies in the replicated margin: no anchor
                # inside the frame produced this comparison
                by = y - fdys[k]
                bx = x - fdxs[k]
                if by < 0 or by >= height or bx < 0 or bx >= width:
                    w = img[min(max(by, 0), height - 1), min(max(bx, 0), width - 1)]
                    border += 1
                    ranks[y, x] += 1 if v - w > delta else 0
                    increments += 1
            sums[y // block, x // block] += v
            additions += 1
    counts[0] = comparisons
    counts[1] = border
    counts[2] = increments
    counts[3] = additions


def transform_counted(frame, params: LrtParams, block_size: int = 16) -> tuple[RankImage, TransformCounts]:
    """Full-sampled rank image plus live operation counters.

    Uses the shared-comparison scheme: one signed difference per unordered
    neighbour pair and one increment per (pixel, neighbour) slot.  Block sums
    for the mean stream are accumulated in the same pass, one addition per
    pixel; the per-block division is a shift.
    """
    img = as_frame(frame).astype(np.int32)
    offs = [o for o in _offsets(params.n, params.variant) if o[0] > 0 or (o[0] == 0 and o[1] > 0)]
    fdys = np.array([o[0] for o in offs], dtype=np.int64)
    fdxs = np.array([o[1] for o in offs], dtype=np.int64)
    height, width = img.shape
    ranks = np.zeros(img.shape, dtype=np.int16)
    sums = np.zeros((-(-height // block_size), -(-width // block_size)), dtype=np.int64)
    raw = np.zeros(4, dtype=np.int64)
    _counted_kernel(img, fdys, fdxs, np.int32(params.delta), block_size, ranks, sums, raw)
    counts = TransformCounts(
        comparisons=int(raw[0]),
        border_comparisons=int(raw[1]),
        increments=int(raw[2]),
        additions=int(raw[3]),
        shifts=int(sums.size),
    )
    return RankImage(ranks, params.max_rank, "full"), counts


# -- sampling ------------------------------------------------------------------


def checkerboard(shape: tuple[int, int]) -> np.ndarray:
    """True where ``(y + x)`` is even."""
    yy, xx = np.indices(shape)
    return (yy + xx) % 2 == 0


def sample_half(r: RankImage) -> RankImage:
    """Keep the even-parity checkerboard, mark the rest ``ABSENT``."""
    if r.sampling != "full":
        raise ValueError("sample_half expects a fully sampled rank image")
    ranks = np.where(checkerboard(r.shape), r.ranks, ABSENT).astype(np.int16)
    return replace(r, ranks=ranks, sampling="half")


def interpolate_missing(r: RankImage) -> RankImage:
    """Fill ``ABSENT`` ranks with the lower median of their in-frame axial neighbours."""
    if r.sampling == "full":
        return r
    big = np.iinfo(np.int16).max
    vals = np.where(r.present, r.ranks, big).astype(np.int32)
    padded = np.pad(vals, 1, constant_values=big)
    h, w = r.shape
    stack = np.stack([
        padded[0:h, 1:w + 1],
        padded[2:h + 2, 1:w + 1],
        padded[1:h + 1, 0:w],
        padded[1:h + 1, 2:w + 2],
    ])
    stack.sort(axis=0)
    valid = (stack != big).sum(axis=0)
    pick = np.maximum(valid - 1, 0) // 2
    med = np.take_along_axis(stack, pick[None], axis=0)[0]
    med = np.where(valid > 0, med, 0)
    ranks = np.where(r.present, r.ranks, med).astype(np.int16)
    return replace(r, ranks=ranks, sampling="full")


def save_rank_pgm(path, r: RankImage) -> None:
    """Debug dump: ranks scaled to 0-255, absent positions black."""
    scaled = np.where(r.present, r.ranks.astype(np.int32) * 255 // max(r.max_rank, 1), 0)
    save_pgm(path, scaled.astype(np.uint8))
