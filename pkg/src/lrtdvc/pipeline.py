"""Sequence-level encoder, decoder and reporting.

Frames alternate between key frames and WZ frames with period ``gop``:
frame ``i`` is a key frame when ``i % gop == 0``.  Key frames are carried
losslessly, either embedded in the container or as ``key_%05d.pgm`` files
next to it.  A WZ frame is decoded from the key frames that bound its GOP
(the previous one and, when the sequence has it, the next one).

Container layout (little-endian)::

    magic "LRTD" | version u8 | flags u8 | frames u32 | gop u16 |
    width u16 | height u16 |
    then per frame: role u8 (0 key, 1 WZ) | length u32 | data[length]

WZ data is a :class:`~lrtdvc.entropy.WzBitstream`; key data is the raw
luma plane when bit 0 of ``flags`` is set and empty otherwise.
"""

from __future__ import annotations

import csv
import math
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .complexity import DEFAULT_FPS, encoder_cost, power
from .entropy import BitstreamError, HEADER_BYTES, WzBitstream, encode_rank_image, merge_map_for, merge_ranks, symbol_count
from .lrt import LrtParams, RankImage, interpolate_missing, transform
from .media_io import FormatError, as_frame, block_means, load_pgm, psnr, save_pgm
from .reconstruction import IterationTrace, ReconParams, dlrtex, post_process, reconstruct_sampled
from .side_info import MatchThresholds, MotionField, compensate, motion_search

__all__ = [
    "CodecConfig",
    "DecodedFrame",
    "EncodedSequence",
    "FrameStats",
    "decode_sequence",
    "decode_wz",
    "encode_frame",
    "encode_sequence",
    "key_indices",
    "merge_ablation",
    "read_container",
    "read_stats_csv",
    "reference_keys",
    "report",
    "write_container",
    "write_stats_csv",
]

MAGIC = b"LRTD"
VERSION = 1
KEY, WZ = 0, 1
_EMBED_KEYS = 0x01
_HEAD = struct.Struct("<4sBBIHHH")
_ENTRY = struct.Struct("<BI")


def _default_threads() -> int:
    value = os.environ.get("LRTDVC_THREADS", "")
    try:
        return max(1, int(value))
    except ValueError:
        return os.cpu_count() or 1


@dataclass(frozen=True)
class CodecConfig:
    """Everything both ends must agree on, plus decoder-only knobs.

    Encoder side: ``lrt``, ``gop``, ``merge``, ``block_size``.  The rest only
    affects decoding and reporting.
    """

    lrt: LrtParams = LrtParams()
    gop: int = 2
    merge: bool = True
    block_size: int = 16
    step: int = 2
    search_range: int = 16
    mean_assist: bool = True
    postprocess: bool = True
    interpolate_me: bool = False  # fill sampled ranks before motion search
    t1: float = 5.0
    t2_fraction: float = 0.05
    t3_fraction: float = 0.05
    max_iterations: int = 200
    fps: float = DEFAULT_FPS
    include_key_bits: bool = False
    threads: int = field(default_factory=_default_threads)

    def __post_init__(self):
        if self.gop < 2:
            raise ValueError(f"gop must be >= 2, got {self.gop}")
        if self.block_size < 1 or self.search_range < 0:
            raise ValueError("block_size must be positive and search_range non-negative")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    @property
    def recon(self) -> ReconParams:
        return ReconParams(lrt=replace(self.lrt, sampling="full"), step=self.step,
                           t3_fraction=self.t3_fraction, max_iterations=self.max_iterations)


@dataclass
class FrameStats:
    """Per-frame rate, quality and cost figures; PSNRs are NaN when no original was given."""

    index: int
    role: str
    bits: int = 0
    header_bits: int = 0
    mean_bits: int = 0
    mq_bits: int = 0
    n: int = 0
    pixels: int = 0
    frame_pixels: int = 0
    beta: int = 0
    si_psnr: float = math.nan
    rec_psnr: float = math.nan
    post_psnr: float = math.nan
    iterations: int = 0
    post_iterations: int = 0
    pi_total: float = 0.0
    power: float = 0.0
    ablation: dict = field(default_factory=dict)


def key_indices(n_frames: int, gop: int) -> list[int]:
    return list(range(0, n_frames, gop))


def reference_keys(index: int, n_frames: int, gop: int) -> list[int]:
    """Key frames bounding WZ frame ``index``: previous, then next if it exists."""
    if index % gop == 0:
        raise ValueError(f"frame {index} is a key frame")
    prev = index - index % gop
    nxt = prev + gop
    return [prev, nxt] if nxt < n_frames else [prev]


# -- encoder ------------------------------------------------------------------


def _rank_image(frame: np.ndarray, lrt: LrtParams, merge: bool) -> RankImage:
    r = transform(frame, lrt)
    m = merge_map_for(lrt, merge)
    return merge_ranks(r, m) if m.merged else r


def encode_frame(frame, cfg: CodecConfig) -> tuple[WzBitstream, FrameStats]:
    """Code one WZ frame; the stats carry rate and encoder cost but no PSNRs."""
    frame = as_frame(frame)
    height, width = frame.shape
    ranks = _rank_image(frame, cfg.lrt, cfg.merge)
    payload, beta = encode_rank_image(ranks, merge_map_for(cfg.lrt, cfg.merge))
    bs = WzBitstream(width, height, cfg.lrt, block_means(frame, cfg.block_size), payload, merged=cfg.merge)
    stats = _wz_stats(bs, beta, int(ranks.present.sum()), cfg)
    return bs, stats


def _wz_stats(bs: WzBitstream, beta: int, pixels: int, cfg: CodecConfig, index: int = 0) -> FrameStats:
    bits = bs.bits
    cost = encoder_cost(pixels, bs.params.n, beta, mean_pixels=bs.width * bs.height)
    return FrameStats(
        index=index, role="wz", bits=bits, header_bits=8 * HEADER_BYTES, mean_bits=bs.means.bits,
        mq_bits=8 * len(bs.payload), n=bs.params.n, pixels=pixels, frame_pixels=bs.width * bs.height,
        beta=beta, pi_total=cost.total, power=power(cost.total, bits * cfg.fps, f_wz=cfg.fps).power,
    )


@dataclass
class EncodedSequence:
    """In-memory form of a coded sequence."""

    width: int
    height: int
    gop: int
    frames: list  # WzBitstream for WZ frames, uint8 array for key frames

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    def role(self, index: int) -> str:
        return "key" if index % self.gop == 0 else "wz"


def encode_sequence(frames, cfg: CodecConfig) -> tuple[EncodedSequence, list[FrameStats]]:
    """Encode every frame; the output depends on nothing but ``frames`` and ``cfg``."""
    frames = [as_frame(f) for f in frames]
    if not frames:
        raise ValueError("empty sequence")
    height, width = frames[0].shape
    if any(f.shape != (height, width) for f in frames):
        raise FormatError("inconsistent frame sizes")
    if not (0 < width <= 0xFFFF and 0 < height <= 0xFFFF):
        raise FormatError(f"unsupported dimensions {width}x{height}")

    wz_idx = [i for i in range(len(frames)) if i % cfg.gop]

    def job(i):
        bs, st = encode_frame(frames[i], cfg)
        st.index = i
        return bs, st

    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        coded = dict(zip(wz_idx, pool.map(job, wz_idx)))

    out, stats = [], []
    for i, f in enumerate(frames):
        if i % cfg.gop == 0:
            out.append(f)
            stats.append(FrameStats(index=i, role="key", bits=8 * f.size, frame_pixels=f.size))
        else:
            bs, st = coded[i]
            out.append(bs)
            stats.append(st)
    return EncodedSequence(width, height, cfg.gop, out), stats


def merge_ablation(frames, cfg: CodecConfig, stats: list[FrameStats]) -> None:
    """Record encoder ablations for each WZ frame.

    ``bits_no_merge`` is the bit count without rank merging;
    ``beta_lowest_plane`` is the symbol count if the lowest-rank plane,
    which the decoder infers, were coded as well.
    """
    plain = replace(cfg, merge=False)
    for st in stats:
        if st.role == "wz":
            bs, _ = encode_frame(frames[st.index], plain)
            st.ablation["bits_no_merge"] = bs.bits
            ranks = _rank_image(as_frame(frames[st.index]), cfg.lrt, cfg.merge)
            lowest = merge_map_for(cfg.lrt, cfg.merge).distinct[-1]
            st.ablation["beta_lowest_plane"] = st.beta + int(np.count_nonzero(ranks.ranks[ranks.present] == lowest))


# -- container ----------------------------------------------------------------


def write_container(path, enc: EncodedSequence, keys_dir=None) -> int:
    """Write ``enc`` to ``path``; key frames go to ``keys_dir`` if given, else inline.

    Returns the number of bytes written.
    """
    embed = keys_dir is None
    parts = [_HEAD.pack(MAGIC, VERSION, _EMBED_KEYS if embed else 0, enc.n_frames, enc.gop, enc.width, enc.height)]
    if not embed:
        Path(keys_dir).mkdir(parents=True, exist_ok=True)
    for i, item in enumerate(enc.frames):
        if isinstance(item, WzBitstream):
            data = item.to_bytes()
            parts.append(_ENTRY.pack(WZ, len(data)) + data)
        else:
            if embed:
                data = as_frame(item).tobytes()
            else:
                save_pgm(Path(keys_dir) / f"key_{i:05d}.pgm", item)
                data = b""
            parts.append(_ENTRY.pack(KEY, len(data)) + data)
    blob = b"".join(parts)
    Path(path).write_bytes(blob)
    return len(blob)


def read_container(path, keys_dir=None) -> EncodedSequence:
    """Parse a container; sidecar key frames are loaded from ``keys_dir``."""
    data = Path(path).read_bytes()
    if len(data) < _HEAD.size:
        raise BitstreamError("truncated container header")
    magic, version, flags, n_frames, gop, width, height = _HEAD.unpack_from(data)
    if magic != MAGIC:
        raise BitstreamError(f"bad magic {magic!r}")
    if version != VERSION:
        raise BitstreamError(f"unsupported version {version}")
    if gop < 2:
        raise BitstreamError(f"bad gop {gop}")
    embed = bool(flags & _EMBED_KEYS)
    pos = _HEAD.size
    frames = []
    for i in range(n_frames):
        if pos + _ENTRY.size > len(data):
            raise BitstreamError(f"truncated container at frame {i}")
        role, length = _ENTRY.unpack_from(data, pos)
        pos += _ENTRY.size
        chunk = data[pos:pos + length]
        if len(chunk) != length:
            raise BitstreamError(f"truncated payload for frame {i}")
        pos += length
        if role != (KEY if i % gop == 0 else WZ):
            raise BitstreamError(f"frame {i} has role {role}, inconsistent with gop {gop}")
        if role == WZ:
            bs = WzBitstream.from_bytes(chunk)
            if (bs.width, bs.height) != (width, height):
                raise BitstreamError(f"frame {i} size differs from the sequence")
            frames.append(bs)
        elif embed:
            if length != width * height:
                raise BitstreamError(f"key frame {i} has {length} bytes, expected {width * height}")
            frames.append(np.frombuffer(chunk, dtype=np.uint8).reshape(height, width).copy())
        else:
            if keys_dir is None:
                raise FileNotFoundError("key frames are stored separately; pass the key directory")
            key = load_pgm(Path(keys_dir) / f"key_{i:05d}.pgm")
            if key.shape != (height, width):
                raise FormatError(f"key frame {i} is {key.shape[1]}x{key.shape[0]}, expected {width}x{height}")
            frames.append(key)
    if pos != len(data):
        raise BitstreamError("trailing bytes after last frame")
    return EncodedSequence(width, height, gop, frames)


# -- decoder ------------------------------------------------------------------


@dataclass
class DecodedFrame:
    """Intermediate and final pictures of one WZ frame."""

    ranks: RankImage
    motion: MotionField
    si: np.ndarray
    reconstructed: np.ndarray
    output: np.ndarray
    trace: IterationTrace
    post_trace: IterationTrace | None
    beta: int


def decode_wz(bs: WzBitstream, refs, cfg: CodecConfig) -> DecodedFrame:
    """Decode one WZ frame against the key frames ``refs`` (previous first)."""
    ranks = bs.decode_ranks()
    m = bs.merge_map()
    full = replace(bs.params, sampling="full")
    ref_pairs = [(as_frame(f), _rank_image(as_frame(f), full, bs.merged)) for f in refs]
    block = bs.block_size
    thresholds = MatchThresholds.for_params(full.max_rank, bs.params.sampling, block, cfg.t1, cfg.t2_fraction)
    me_ranks = interpolate_missing(ranks) if cfg.interpolate_me else ranks
    mf = motion_search(me_ranks, bs.means, ref_pairs, thresholds, cfg.search_range, cfg.mean_assist)
    si = compensate(mf, [f for f, _ in ref_pairs])
    rp = replace(cfg.recon, lrt=full)
    if bs.params.sampling == "half":
        si_ranks = _rank_image(si, full, bs.merged)
        res = reconstruct_sampled(ranks, si, si_ranks, rp)
        rec, trace = res.frame, res.trace
    else:
        rec, trace = dlrtex(ranks, si, rp)
    post_trace = None
    out = rec
    if cfg.postprocess:
        out, post_trace = post_process(rec, bs.means, ranks, rp)
    return DecodedFrame(ranks, mf, si, rec, out, trace, post_trace, symbol_count(ranks, m))


def decode_sequence(enc: EncodedSequence, cfg: CodecConfig, originals=None,
                    keep: bool = False) -> tuple[list[np.ndarray], list[FrameStats], dict]:
    """Decode every frame, in parallel over WZ frames.

    ``originals`` (same length as the sequence) enables PSNR columns.  With
    ``keep`` the third return value maps WZ indices to :class:`DecodedFrame`.
    """
    if originals is not None and len(originals) != enc.n_frames:
        raise ValueError(f"{len(originals)} originals for {enc.n_frames} frames")
    wz_idx = [i for i in range(enc.n_frames) if i % enc.gop]

    def job(i):
        refs = [enc.frames[k] for k in reference_keys(i, enc.n_frames, enc.gop)]
        return decode_wz(enc.frames[i], refs, cfg)

    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        decoded = dict(zip(wz_idx, pool.map(job, wz_idx)))

    frames, stats = [], []
    for i, item in enumerate(enc.frames):
        if i % enc.gop == 0:
            frames.append(item)
            st = FrameStats(index=i, role="key", bits=8 * item.size, frame_pixels=item.size)
            if originals is not None:
                st.si_psnr = st.rec_psnr = st.post_psnr = psnr(originals[i], item)
        else:
            d = decoded[i]
            frames.append(d.output)
            st = _wz_stats(item, d.beta, int(d.ranks.present.sum()), cfg, index=i)
            st.iterations = d.trace.accepted
            st.post_iterations = d.post_trace.accepted if d.post_trace else 0
            if originals is not None:
                orig = as_frame(originals[i])
                st.si_psnr = psnr(orig, d.si)
                st.rec_psnr = psnr(orig, d.reconstructed)
                st.post_psnr = psnr(orig, d.output)
        stats.append(st)
    return frames, stats, decoded if keep else {}


# -- reporting ----------------------------------------------------------------

STATS_COLUMNS = ["frame", "role", "bits", "header_bits", "mean_bits", "mq_bits", "n", "pixels", "frame_pixels",
                 "beta", "si_psnr", "rec_psnr", "post_psnr", "iterations", "post_iterations", "pi_total", "power"]


def _ablation_columns(stats) -> list[str]:
    cols = []
    for st in stats:
        for k in st.ablation:
            if k not in cols:
                cols.append(k)
    return cols


def write_stats_csv(path, stats: list[FrameStats]) -> None:
    extra = _ablation_columns(stats)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(STATS_COLUMNS + extra)
        for st in stats:
            w.writerow([st.index, st.role, st.bits, st.header_bits, st.mean_bits, st.mq_bits, st.n, st.pixels,
                        st.frame_pixels, st.beta, st.si_psnr, st.rec_psnr, st.post_psnr, st.iterations,
                        st.post_iterations, st.pi_total, st.power] + [st.ablation.get(k, "") for k in extra])


def read_stats_csv(path) -> list[FrameStats]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            ints = ("bits", "header_bits", "mean_bits", "mq_bits", "n", "pixels", "frame_pixels", "beta",
                    "iterations", "post_iterations")
            st = FrameStats(index=int(row["frame"]), role=row["role"],
                            **{k: int(row[k]) for k in ints},
                            **{k: float(row[k]) for k in ("si_psnr", "rec_psnr", "post_psnr", "pi_total", "power")})
            st.ablation = {k: float(v) for k, v in row.items() if k not in STATS_COLUMNS and v != ""}
            out.append(st)
    return out


def _mean(values) -> float:
    values = [v for v in values if not math.isnan(v)]
    if not values:
        return math.nan
    if any(math.isinf(v) for v in values):
        return math.inf
    return sum(values) / len(values)


def report(stats: list[FrameStats], path=None, fps: float = DEFAULT_FPS, include_key_bits: bool = False) -> dict:
    """Summary averages over WZ frames, optionally writing the per-frame CSV to ``path``.

    ``kbps`` is the average per-frame bit count times ``fps`` / 1000, over WZ
    frames only unless ``include_key_bits``.  Ablation entries found in the
    stats are averaged into ``<name>_avg`` keys.
    """
    if not stats:
        raise ValueError("no frame statistics to report")
    if path is not None:
        write_stats_csv(path, stats)
    wz = [s for s in stats if s.role == "wz"]
    rated = stats if include_key_bits else wz
    summary = {
        "frames": len(stats),
        "wz_frames": len(wz),
        "avg_bits": _mean([s.bits for s in rated]) if rated else 0.0,
        "mean_bits": _mean([s.mean_bits for s in wz]) if wz else 0.0,
        "si_psnr": _mean([s.si_psnr for s in wz]),
        "rec_psnr": _mean([s.rec_psnr for s in wz]),
        "post_psnr": _mean([s.post_psnr for s in wz]),
        "pi_total": _mean([s.pi_total for s in wz]),
        "power": _mean([s.power for s in wz]),
    }
    summary["kbps"] = summary["avg_bits"] * fps / 1000.0
    for k in _ablation_columns(stats):
        summary[f"{k}_avg"] = _mean([float(s.ablation[k]) for s in stats if k in s.ablation])
    return summary
