"""Side information from mean-gated motion search in the rank domain.

For each block of the WZ frame two candidates are tracked over every key
frame in the search window:

* ``mv1``, the plain minimum of the rank SAD;
* ``mv2``, the minimum rank SAD among candidates whose intensity mean lies
  within ``t1`` of the transmitted block mean.

``mv2`` wins unless no candidate passed the mean gate or its SAD exceeds
``lsad1`` by more than ``t2``.  Rank images are blind to contrast changes, so
a brighter or darker copy of the right texture can tie with the true match;
the mean gate breaks that tie.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._jit import NUMBA_ENABLED, njit
from .lrt import RankImage
from .media_io import MeanGrid, as_frame, grid_shape

__all__ = [
    "MatchThresholds",
    "MotionField",
    "compensate",
    "motion_search",
    "rank_sad",
    "write_motion_csv",
]

DEFAULT_SEARCH_RANGE = 16


@dataclass(frozen=True)
class MatchThresholds:
    """Mean gate ``t1`` (intensity) and SAD-gap gate ``t2`` (rank units, full block)."""

    t1: float = 5.0
    t2: float = 0.0

    @classmethod
    def for_params(cls, max_rank: int, sampling: str = "full", block_size: int = 16,
                   t1: float = 5.0, fraction: float = 0.05) -> "MatchThresholds":
        t2 = fraction * max_rank * block_size * block_size
        if sampling == "half":
            t2 /= 2
        return cls(t1=t1, t2=t2)


@dataclass
class MotionField:
    """Per-block search results; vectors are ``(dy, dx)``."""

    mv: np.ndarray  # (rows, cols, 2) chosen vector
    ref: np.ndarray  # (rows, cols) chosen reference index
    mv1: np.ndarray
    ref1: np.ndarray
    lsad1: np.ndarray
    mv2: np.ndarray
    ref2: np.ndarray
    lsad2: np.ndarray
    mv2_valid: np.ndarray
    used_mv2: np.ndarray
    block_size: int = 16

    @property
    def shape(self) -> tuple[int, int]:
        return self.ref.shape


def rank_sad(a, b) -> int:
    """Sum of absolute rank differences over positions present in both blocks."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    mask = (a >= 0) & (b >= 0)
    return int(np.abs(a - b)[mask].sum())


def _sat(frame: np.ndarray) -> np.ndarray:
    sat = np.zeros((frame.shape[0] + 1, frame.shape[1] + 1), dtype=np.int64)
    sat[1:, 1:] = frame.astype(np.int64).cumsum(0).cumsum(1)
    return sat


@njit
def _search_kernel(wz, wz_means, refs, sats, block, rng, t1, out_i, out_f):
    # out_i[b] = [dy1, dx1, ref1, dy2, dx2, ref2, valid]; out_f[b] = [lsad1, lsad2]
    n_ref, height, width = refs.shape
    rows, cols = wz_means.shape
    for by in range(rows):
        for bx in range(cols):
            y0 = by * block
            x0 = bx * block
            bh = min(block, height - y0)
            bw = min(block, width - x0)
            target = wz_means[by, bx]
            best1 = np.int64(1) << 62
            best2 = np.int64(1) << 62
            b = by * cols + bx
            out_i[b, 6] = 0
            for r in range(n_ref):
                for dy in range(-rng, rng + 1):
                    cy = y0 + dy
                    if cy < 0 or cy + bh > height:
                        continue
                    for dx in range(-rng, rng + 1):
                        cx = x0 + dx
                        if cx < 0 or cx + bw > width:
                            continue
                        sad = np.int64(0)
                        for yy in range(bh):
                            for xx in range(bw):
                                w = wz[y0 + yy, x0 + xx]
                                if w >= 0:
                                    sad += abs(w - refs[r, cy + yy, cx + xx])
                        if sad < best1:
                            best1 = sad
                            out_i[b, 0] = dy
                            out_i[b, 1] = dx
                            out_i[b, 2] = r
                        s = sats[r, cy + bh, cx + bw] - sats[r, cy, cx + bw] - sats[r, cy + bh, cx] + sats[r, cy, cx]
                        mean = s / (bh * bw)
                        if abs(mean - target) < t1 and sad < best2:
                            best2 = sad
                            out_i[b, 3] = dy
                            out_i[b, 4] = dx
                            out_i[b, 5] = r
                            out_i[b, 6] = 1
            out_f[b, 0] = best1
            out_f[b, 1] = best2


def _search_numpy(wz, wz_means, refs, sats, block, rng, t1, out_i, out_f):
    n_ref, height, width = refs.shape
    rows, cols = wz_means.shape
    for by in range(rows):
        for bx in range(cols):
            y0, x0 = by * block, bx * block
            bh, bw = min(block, height - y0), min(block, width - x0)
            blk = wz[y0:y0 + bh, x0:x0 + bw].astype(np.int64)
            mask = blk >= 0
            ylo, yhi = max(y0 - rng, 0), min(y0 + rng, height - bh)
            xlo, xhi = max(x0 - rng, 0), min(x0 + rng, width - bw)
            sads, means, cands = [], [], []
            for r in range(n_ref):
                region = refs[r, ylo:yhi + bh, xlo:xhi + bw].astype(np.int64)
                win = sliding_window_view(region, (bh, bw))
                sads.append((np.abs(win - blk) * mask).sum(axis=(2, 3)).ravel())
                sat = sats[r]
                ys = np.arange(ylo, yhi + 1)[:, None]
                xs = np.arange(xlo, xhi + 1)[None, :]
                s = sat[ys + bh, xs + bw] - sat[ys, xs + bw] - sat[ys + bh, xs] + sat[ys, xs]
                means.append((s / (bh * bw)).ravel())
                dy, dx = np.meshgrid(np.arange(ylo, yhi + 1) - y0, np.arange(xlo, xhi + 1) - x0, indexing="ij")
                cands.append(np.stack([dy.ravel(), dx.ravel(), np.full(dy.size, r)], axis=1))
            sad = np.concatenate(sads)
            mean = np.concatenate(means)
            cand = np.concatenate(cands)
            b = by * cols + bx
            k1 = int(np.argmin(sad))
            out_i[b, 0:3] = cand[k1]
            out_f[b, 0] = sad[k1]
            gate = np.abs(mean - wz_means[by, bx]) < t1
            if gate.any():
                gated = np.where(gate, sad, np.iinfo(np.int64).max)
                k2 = int(np.argmin(gated))
                out_i[b, 3:6] = cand[k2]
                out_i[b, 6] = 1
                out_f[b, 1] = sad[k2]
            else:
                out_i[b, 6] = 0
                out_f[b, 1] = np.inf


def _use_kernel() -> bool:
    return NUMBA_ENABLED and os.environ.get("LRTDVC_SEARCH", "") != "numpy"


def motion_search(
    wz_ranks: RankImage,
    wz_means: MeanGrid,
    refs,
    thresholds: MatchThresholds,
    search_range: int = DEFAULT_SEARCH_RANGE,
    mean_assist: bool = True,
) -> MotionField:
    """Full search of every block over ``refs``, a list of ``(frame, RankImage)`` pairs.

    Reference rank images must be fully sampled and computed (and merged)
    exactly like the WZ ranks.  Only positions present in ``wz_ranks`` enter
    the SAD.  Ties keep the first candidate in (reference, dy, dx) raster order.
    """
    if not refs:
        raise ValueError("motion search needs at least one reference")
    block = wz_means.block_size
    height, width = wz_ranks.shape
    if wz_means.means.shape != grid_shape(width, height, block):
        raise ValueError("mean grid does not match the rank image")
    ref_ranks = np.stack([np.asarray(r.ranks, dtype=np.int64) for _, r in refs])
    if ref_ranks.shape[1:] != (height, width) or (ref_ranks < 0).any():
        raise ValueError("references must be fully sampled rank images of the WZ frame size")
    sats = np.stack([_sat(as_frame(f)) for f, _ in refs])
    wz = np.ascontiguousarray(wz_ranks.ranks, dtype=np.int64)
    means = wz_means.means.astype(np.float64)
    rows, cols = means.shape
    out_i = np.zeros((rows * cols, 7), dtype=np.int64)
    out_f = np.zeros((rows * cols, 2), dtype=np.float64)
    search = _search_kernel if _use_kernel() else _search_numpy
    search(wz, means, ref_ranks, sats, block, int(search_range), float(thresholds.t1), out_i, out_f)
    if _use_kernel():
        out_f[out_i[:, 6] == 0, 1] = np.inf

    # the SAD-gap gate scales with the pixel count of partial edge blocks
    bh = np.minimum(block, height - np.arange(rows) * block)[:, None]
    bw = np.minimum(block, width - np.arange(cols) * block)[None, :]
    t2 = (thresholds.t2 * (bh * bw) / (block * block)).ravel()

    valid = out_i[:, 6] == 1
    use2 = valid & (np.abs(out_f[:, 1] - out_f[:, 0]) <= t2)
    if not mean_assist:
        use2[:] = False
    mv1 = out_i[:, 0:2]
    mv2 = np.where(valid[:, None], out_i[:, 3:5], 0)
    mv = np.where(use2[:, None], mv2, mv1)
    ref = np.where(use2, out_i[:, 5], out_i[:, 2])

    def grid(a):
        return a.reshape((rows, cols) + a.shape[1:])

    return MotionField(
        mv=grid(mv), ref=grid(ref), mv1=grid(mv1), ref1=grid(out_i[:, 2].copy()), lsad1=grid(out_f[:, 0].copy()),
        mv2=grid(mv2), ref2=grid(np.where(valid, out_i[:, 5], -1)), lsad2=grid(out_f[:, 1].copy()),
        mv2_valid=grid(valid), used_mv2=grid(use2), block_size=block,
    )


def compensate(mf: MotionField, frames) -> np.ndarray:
    """Assemble side information by copying each block from its chosen reference."""
    frames = [as_frame(f) for f in frames]
    height, width = frames[0].shape
    block = mf.block_size
    si = np.empty((height, width), dtype=np.uint8)
    rows, cols = mf.shape
    for by in range(rows):
        for bx in range(cols):
            y0, x0 = by * block, bx * block
            bh, bw = min(block, height - y0), min(block, width - x0)
            dy, dx = (int(v) for v in mf.mv[by, bx])
            cy = min(max(y0 + dy, 0), height - bh)
            cx = min(max(x0 + dx, 0), width - bw)
            si[y0:y0 + bh, x0:x0 + bw] = frames[int(mf.ref[by, bx])][cy:cy + bh, cx:cx + bw]
    return si


def write_motion_csv(path, mf: MotionField) -> None:
    """Per-block dump: chosen vector, both candidates and the gate decision."""
    rows, cols = mf.shape
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["block_row", "block_col", "dy", "dx", "ref", "mv1_dy", "mv1_dx", "lsad1",
                    "mv2_dy", "mv2_dx", "lsad2", "mv2_valid", "used_mv2"])
        for by in range(rows):
            for bx in range(cols):
                lsad2 = mf.lsad2[by, bx]
                w.writerow([
                    by, bx, *mf.mv[by, bx].tolist(), int(mf.ref[by, bx]),
                    *mf.mv1[by, bx].tolist(), int(mf.lsad1[by, bx]),
                    *mf.mv2[by, bx].tolist(), "" if not np.isfinite(lsad2) else int(lsad2),
                    int(mf.mv2_valid[by, bx]), int(mf.used_mv2[by, bx]),
                ])
