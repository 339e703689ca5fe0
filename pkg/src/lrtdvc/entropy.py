"""Rank merging, rank-position coding and the WZ frame container.

Positions are coded plane by plane from the highest surviving rank down.  In
each plane every still-unassigned pixel gets one binary symbol (1 if it holds
that rank), coded by the MQ coder in a context equal to the number of its 8
neighbours already assigned.  The lowest surviving rank is never coded: it is
whatever is left after the last plane.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ._jit import njit
from .lrt import ABSENT, LrtParams, RankImage, max_rank_for
from .media_io import MeanGrid
from .mq import MAX_OVERRUN, N_CONTEXTS, MQError, NLPS, NMPS, QE, SWITCH, decode_bit, init_decoder, initial_contexts, mq_encode

__all__ = [
    "BitstreamError",
    "MergeMap",
    "PositionStream",
    "WzBitstream",
    "build_merge_map",
    "decode_positions",
    "encode_positions",
    "encode_rank_image",
    "merge_ranks",
    "symbol_count",
]

SUPPORTED_MAX_RANKS = frozenset(max_rank_for(n, v) for n in (1, 2, 3, 4) for v in ("odd", "full"))


class BitstreamError(ValueError):
    """Raised for corrupt or truncated WZ bitstreams."""


@dataclass(frozen=True)
class MergeMap:
    """Lookup from raw rank to merged rank, plus the surviving values (descending)."""

    max_rank: int
    table: np.ndarray
    distinct: tuple[int, ...]

    @property
    def merged(self) -> bool:
        return len(self.distinct) < self.max_rank + 1

    @classmethod
    def identity(cls, max_rank: int) -> "MergeMap":
        return cls(max_rank, np.arange(max_rank + 1, dtype=np.int16), tuple(range(max_rank, -1, -1)))


def build_merge_map(max_rank: int) -> MergeMap:
    """Pair-merge the lowest ``max_rank // 4 + 1`` rank pairs onto their upper member."""
    if max_rank not in SUPPORTED_MAX_RANKS:
        raise ValueError(f"no merge rule for max rank {max_rank}")
    pairs = max_rank // 4 + 1
    table = np.arange(max_rank + 1, dtype=np.int16)
    for k in range(pairs):
        table[2 * k] = 2 * k + 1
    distinct = tuple(sorted(set(table.tolist()), reverse=True))
    return MergeMap(max_rank, table, distinct)


def merge_map_for(params: LrtParams, merge: bool = True) -> MergeMap:
    return build_merge_map(params.max_rank) if merge else MergeMap.identity(params.max_rank)


def merge_ranks(r: RankImage, m: MergeMap) -> RankImage:
    if r.max_rank != m.max_rank:
        raise ValueError(f"rank image max {r.max_rank} does not match merge map max {m.max_rank}")
    present = r.present
    if present.any() and (r.ranks[present].min() < 0 or r.ranks[present].max() > m.max_rank):
        raise ValueError("rank outside merge table")
    out = np.where(present, m.table[np.where(present, r.ranks, 0)], ABSENT).astype(np.int16)
    return RankImage(out, r.max_rank, r.sampling, merged=r.merged or m.merged)


# -- position coding kernels --------------------------------------------------


@njit
def _context(status, y, x):
    # status is padded by one on every side
    return (
        status[y, x] + status[y, x + 1] + status[y, x + 2]
        + status[y + 1, x] + status[y + 1, x + 2]
        + status[y + 2, x] + status[y + 2, x + 1] + status[y + 2, x + 2]
    )


@njit
def _scan_kernel(ranks, planes, syms, ctxs):
    height, width = ranks.shape
    status = np.zeros((height + 2, width + 2), dtype=np.int64)
    remaining = 0
    for y in range(height):
        for x in range(width):
            if ranks[y, x] >= 0:
                remaining += 1
    k = 0
    for p in range(planes.shape[0]):
        if remaining == 0:
            break
        v = planes[p]
        for y in range(height):
            for x in range(width):
                r = ranks[y, x]
                if r < 0 or status[y + 1, x + 1] == 1:
                    continue
                ctxs[k] = _context(status, y, x)
                if r == v:
                    syms[k] = 1
                    status[y + 1, x + 1] = 1
                    remaining -= 1
                else:
                    syms[k] = 0
                k += 1
    return k


@njit
def _decode_planes_kernel(data, present, planes, lowest, index, mps, qe, nmps, nlps, switch, ranks, max_overrun):
    height, width = present.shape
    status = np.zeros((height + 2, width + 2), dtype=np.int64)
    remaining = 0
    for y in range(height):
        for x in range(width):
            if present[y, x]:
                remaining += 1
                ranks[y, x] = lowest
            else:
                ranks[y, x] = -1
    reg = init_decoder(data)
    count = 0
    for p in range(planes.shape[0]):
        if remaining == 0:
            break
        v = planes[p]
        for y in range(height):
            for x in range(width):
                if not present[y, x] or status[y + 1, x + 1] == 1:
                    continue
                cx = _context(status, y, x)
                d = decode_bit(reg, data, cx, index, mps, qe, nmps, nlps, switch)
                count += 1
                if reg[4] > max_overrun:
                    return -1
                if d == 1:
                    ranks[y, x] = v
                    status[y + 1, x + 1] = 1
                    remaining -= 1
    return count


# -- public API ----------------------------------------------------------------


@dataclass
class PositionStream:
    """Binary symbols and their contexts in emission order."""

    symbols: np.ndarray
    contexts: np.ndarray

    def __len__(self) -> int:
        return self.symbols.size


def symbol_count(r: RankImage, m: MergeMap) -> int:
    """Number of symbols :func:`encode_positions` emits, from the rank histogram."""
    vals = r.ranks[r.present]
    remaining = vals.size
    total = 0
    for v in m.distinct[:-1]:
        if remaining == 0:
            break
        total += remaining
        remaining -= int(np.count_nonzero(vals == v))
    return total


def _check_merged(r: RankImage, m: MergeMap) -> None:
    if r.max_rank != m.max_rank:
        raise ValueError(f"rank image max {r.max_rank} does not match merge map max {m.max_rank}")
    vals = np.unique(r.ranks[r.present])
    stray = set(vals.tolist()) - set(m.distinct)
    if stray:
        raise ValueError(f"ranks {sorted(stray)} are not merged survivors")


def encode_positions(r: RankImage, m: MergeMap) -> PositionStream:
    """Serialize a merged rank image into (symbol, context) pairs."""
    _check_merged(r, m)
    n = symbol_count(r, m)
    syms = np.zeros(n, dtype=np.uint8)
    ctxs = np.zeros(n, dtype=np.uint8)
    planes = np.array(m.distinct[:-1], dtype=np.int64)
    k = _scan_kernel(np.ascontiguousarray(r.ranks), planes, syms, ctxs)
    assert k == n
    return PositionStream(syms, ctxs)


def encode_rank_image(r: RankImage, m: MergeMap) -> tuple[bytes, int]:
    """MQ payload for a merged rank image and the number of symbols it carries."""
    stream = encode_positions(r, m)
    return mq_encode(stream.symbols, stream.contexts), len(stream)


def sampling_mask(shape: tuple[int, int], sampling: str) -> np.ndarray:
    if sampling == "full":
        return np.ones(shape, dtype=np.bool_)
    yy, xx = np.indices(shape)
    return (yy + xx) % 2 == 0


def decode_positions(data: bytes, shape: tuple[int, int], sampling: str, m: MergeMap) -> RankImage:
    """Invert :func:`encode_rank_image`; unassigned positions get the lowest survivor."""

    buf = np.frombuffer(bytes(data), dtype=np.uint8)
    present = sampling_mask(shape, sampling)
    planes = np.array(m.distinct[:-1], dtype=np.int64)
    index, mps = initial_contexts(N_CONTEXTS)
    ranks = np.empty(shape, dtype=np.int16)
    count = _decode_planes_kernel(
        buf, present, planes, m.distinct[-1], index, mps, QE, NMPS, NLPS, SWITCH, ranks, MAX_OVERRUN
    )
    if count < 0:
        raise MQError("rank payload exhausted before all planes were decoded")
    return RankImage(ranks, m.max_rank, sampling, merged=m.merged)


# -- container -----------------------------------------------------------------

MAGIC = b"LRTW"
VERSION = 1
_VARIANT_CODE = {"full": 0, "odd": 1, "even": 2}
_SAMPLING_CODE = {"full": 0, "half": 1}
_UNMERGED_FLAG = 0x80
_HEAD = struct.Struct("<4sBHHBbBBBH")
_LEN = struct.Struct("<I")
HEADER_BYTES = _HEAD.size + _LEN.size


@dataclass
class WzBitstream:
    """One coded WZ frame: parameters, block means and the MQ payload.

    Layout (little-endian)::

        magic "LRTW" | version u8 | width u16 | height u16 | N u8 | delta i8 |
        variant u8 | sampling u8 | block_size u8 | mean count u16 |
        means[count] | mq_len u32 | mq[mq_len]

    Bit 7 of the variant byte is set when ranks were coded without merging.
    """

    width: int
    height: int
    params: LrtParams
    means: MeanGrid
    payload: bytes
    merged: bool = True

    @property
    def block_size(self) -> int:
        return self.means.block_size

    def to_bytes(self) -> bytes:
        variant = _VARIANT_CODE[self.params.variant] | (0 if self.merged else _UNMERGED_FLAG)
        head = _HEAD.pack(
            MAGIC, VERSION, self.width, self.height, self.params.n, self.params.delta,
            variant, _SAMPLING_CODE[self.params.sampling], self.block_size, self.means.count,
        )
        return head + self.means.tobytes() + _LEN.pack(len(self.payload)) + self.payload

    @property
    def bits(self) -> int:
        return 8 * (HEADER_BYTES + self.means.count + len(self.payload))

    @classmethod
    def from_bytes(cls, data: bytes) -> "WzBitstream":
        if len(data) < _HEAD.size:
            raise BitstreamError("truncated WZ header")
        magic, version, width, height, n, delta, variant, sampling, block, count = _HEAD.unpack_from(data)
        if magic != MAGIC:
            raise BitstreamError(f"bad magic {magic!r}")
        if version != VERSION:
            raise BitstreamError(f"unsupported version {version}")
        variants = {v: k for k, v in _VARIANT_CODE.items()}
        samplings = {v: k for k, v in _SAMPLING_CODE.items()}
        if variant & 0x7F not in variants or sampling not in samplings or block == 0:
            raise BitstreamError("bad parameter fields")
        try:
            params = LrtParams(n=n, delta=delta, variant=variants[variant & 0x7F], sampling=samplings[sampling])
        except ValueError as exc:
            raise BitstreamError(str(exc)) from exc
        pos = _HEAD.size
        if len(data) < pos + count + _LEN.size:
            raise BitstreamError("truncated block means")
        try:
            means = MeanGrid.frombytes(data[pos:pos + count], width, height, block)
        except ValueError as exc:
            raise BitstreamError(str(exc)) from exc
        pos += count
        (mq_len,) = _LEN.unpack_from(data, pos)
        pos += _LEN.size
        payload = data[pos:pos + mq_len]
        if len(payload) != mq_len:
            raise BitstreamError(f"truncated MQ payload: {len(payload)} of {mq_len} bytes")
        if pos + mq_len != len(data):
            raise BitstreamError("trailing bytes after MQ payload")
        return cls(width, height, params, means, bytes(payload), merged=not variant & _UNMERGED_FLAG)

    def merge_map(self) -> MergeMap:
        return merge_map_for(self.params, self.merged)

    def decode_ranks(self) -> RankImage:
        return decode_positions(self.payload, (self.height, self.width), self.params.sampling, self.merge_map())
