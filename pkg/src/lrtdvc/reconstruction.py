"""Iterative reconstruction of WZ frames from their rank images.

:func:`dlrtex` nudges every pixel of an initial estimate up or down by
``step`` until its rank agrees with the transmitted one, stopping as soon as
the rank-domain PSNR drops.  All pixels of an iteration are updated from the
previous iterate (Jacobi order), and intensities are clamped to [0, 255]
before ranks are recomputed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .entropy import build_merge_map, merge_ranks
from .lrt import LrtParams, RankImage, transform
from .media_io import MeanGrid, as_frame, block_means

__all__ = [
    "IterationTrace",
    "ReconParams",
    "SampledResult",
    "dlrtex",
    "post_process",
    "rank_fidelity",
    "reconstruct_sampled",
    "write_trace_csv",
]


@dataclass(frozen=True)
class ReconParams:
    lrt: LrtParams = LrtParams()
    step: int = 2
    t3_fraction: float = 0.05
    max_iterations: int = 200

    def __post_init__(self):
        if self.step < 1:
            raise ValueError(f"step must be >= 1, got {self.step}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class IterationTrace:
    """Rank PSNR and changed-pixel count per iteration; entry 0 is the initial estimate."""

    rank_psnr: list = field(default_factory=list)
    changed: list = field(default_factory=list)
    stop: str = ""
    accepted: int = 0  # index of the returned iterate

    @property
    def iterations(self) -> int:
        return len(self.rank_psnr) - 1


def rank_fidelity(ref: RankImage, est: RankImage) -> float:
    """PSNR between rank images with peak ``max_rank``, over positions present in ``ref``."""
    if ref.shape != est.shape or ref.max_rank != est.max_rank:
        raise ValueError("rank images differ in geometry or alphabet")
    mask = ref.present
    diff = ref.ranks[mask].astype(np.int64) - est.ranks[mask].astype(np.int64)
    sse = int(np.dot(diff, diff))
    if sse == 0:
        return math.inf
    return 10.0 * math.log10(ref.max_rank ** 2 * diff.size / sse)


def _ranker(rank_ref: RankImage, lrt: LrtParams):
    full = replace(lrt, sampling="full")
    if full.max_rank != rank_ref.max_rank:
        raise ValueError(f"params give max rank {full.max_rank}, reference has {rank_ref.max_rank}")
    merge = build_merge_map(full.max_rank) if rank_ref.merged else None

    def ranks(frame: np.ndarray) -> RankImage:
        r = transform(frame, full)
        return merge_ranks(r, merge) if merge is not None else r

    return ranks


def dlrtex(rank_ref: RankImage, si, params: ReconParams) -> tuple[np.ndarray, IterationTrace]:
    """Refine ``si`` towards the reference ranks; only positions present in ``rank_ref`` move."""
    ranks = _ranker(rank_ref, params.lrt)
    est = as_frame(si).astype(np.int32)
    if est.shape != rank_ref.shape:
        raise ValueError("side information and rank image differ in size")
    mask = rank_ref.present
    ref = rank_ref.ranks.astype(np.int32)
    cur = ranks(est)
    trace = IterationTrace()
    best = rank_fidelity(rank_ref, cur)
    trace.rank_psnr.append(best)
    trace.changed.append(0)
    for _ in range(params.max_iterations):
        direction = np.sign(ref - cur.ranks.astype(np.int32)) * mask
        nxt = np.clip(est + params.step * direction, 0, 255)
        changed = int(np.count_nonzero(nxt != est))
        if changed == 0:
            trace.stop = "fixed point"
            break
        nxt_ranks = ranks(nxt)
        fid = rank_fidelity(rank_ref, nxt_ranks)
        trace.rank_psnr.append(fid)
        trace.changed.append(changed)
        if fid < best:
            trace.stop = "rank PSNR decreased"
            break
        est, cur, best = nxt, nxt_ranks, fid
        trace.accepted = trace.iterations
    else:
        trace.stop = "iteration cap"
    return est.astype(np.uint8), trace


def _axial(a: np.ndarray, fill) -> np.ndarray:
    """The four axial neighbours of every pixel, out-of-frame entries set to ``fill``."""
    padded = np.pad(a, 1, constant_values=fill)
    h, w = a.shape
    return np.stack([padded[0:h, 1:w + 1], padded[2:h + 2, 1:w + 1], padded[1:h + 1, 0:w], padded[1:h + 1, 2:w + 2]])


@dataclass
class SampledResult:
    frame: np.ndarray
    trace: IterationTrace
    low_motion: np.ndarray  # unknown pixels copied from SI
    high_motion: np.ndarray  # unknown pixels averaged from known neighbours


def reconstruct_sampled(sampled_ref: RankImage, si, si_ranks: RankImage, params: ReconParams) -> SampledResult:
    """Reconstruct from a half-sampled rank image.

    Known-rank pixels go through :func:`dlrtex`, which never sees SI
    intensities at unknown positions.  Each unknown pixel compares
    the transmitted ranks of its in-frame axial neighbours with the SI ranks
    at the same positions: a rank SAD below ``t3_fraction * max_rank * count``
    copies the SI pixel, anything else takes the rounded mean of the
    reconstructed neighbours.
    """
    if sampled_ref.sampling != "half":
        raise ValueError("reconstruct_sampled expects a half-sampled rank image")
    si = as_frame(si)
    if si_ranks.shape != sampled_ref.shape or not si_ranks.present.all():
        raise ValueError("SI ranks must be fully sampled and match the WZ geometry")
    known = sampled_ref.present
    unknown = ~known
    valid = _axial(known, False)
    count = valid.sum(axis=0)
    div = 2 * np.maximum(count, 1)

    def neighbour_mean(a: np.ndarray) -> np.ndarray:
        return (2 * (_axial(a.astype(np.int64), 0) * valid).sum(axis=0) + np.maximum(count, 1)) // div

    # Replicated borders can pull an unknown pixel into a known pixel's
    # neighbourhood, so the known-rank pass starts from SI with unknown
    # positions replaced by the mean of their known neighbours.
    start = np.where(known, si, neighbour_mean(si)).astype(np.uint8)
    est, trace = dlrtex(sampled_ref, start, params)

    ref_nb = _axial(np.where(known, sampled_ref.ranks, 0).astype(np.int64), 0)
    si_rank_nb = _axial(si_ranks.ranks.astype(np.int64), 0)
    sad = (np.abs(ref_nb - si_rank_nb) * valid).sum(axis=0)
    t3 = params.t3_fraction * sampled_ref.max_rank * count
    low = unknown & (sad < t3)
    high = unknown & ~low

    avg = neighbour_mean(est)
    out = est.copy()
    out[low] = si[low]
    out[high] = np.clip(avg[high], 0, 255)
    return SampledResult(out.astype(np.uint8), trace, low, high)


def mean_shift(decoded, wz_means: MeanGrid) -> np.ndarray:
    """Move each block's mean onto the transmitted one, clamping to [0, 255]."""
    decoded = as_frame(decoded)
    block = wz_means.block_size
    dec_means = block_means(decoded, block).means.astype(np.int32)
    shift = wz_means.means.astype(np.int32) - dec_means
    full = np.kron(shift, np.ones((block, block), dtype=np.int32))[: decoded.shape[0], : decoded.shape[1]]
    return np.clip(decoded.astype(np.int32) + full, 0, 255).astype(np.uint8)


def post_process(decoded, wz_means: MeanGrid, rank_ref: RankImage, params: ReconParams) -> tuple[np.ndarray, IterationTrace]:
    """Block mean correction followed by one more :func:`dlrtex` pass."""
    return dlrtex(rank_ref, mean_shift(decoded, wz_means), params)


def write_trace_csv(path, trace: IterationTrace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "rank_psnr", "changed_pixels"])
        for i, (fid, changed) in enumerate(zip(trace.rank_psnr, trace.changed)):
            w.writerow([i, fid, changed])
