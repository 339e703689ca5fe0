"""Frame I/O, PSNR and block means.

A frame is a 2-D ``uint8`` numpy array of shape ``(height, width)`` holding
luma samples.  Chroma is dropped on input.
"""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

__all__ = [
    "FormatError",
    "MeanGrid",
    "as_frame",
    "block_means",
    "load_pgm",
    "load_raw_yuv",
    "load_sequence",
    "load_y4m",
    "psnr",
    "save_pgm",
    "save_y4m",
]

BLOCK_SIZE = 16


class FormatError(ValueError):
    """Raised for malformed or unsupported media files."""


def as_frame(samples) -> np.ndarray:
    """Validate and convert ``samples`` to a contiguous ``uint8`` frame."""
    arr = np.asarray(samples)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"frame must be a non-empty 2-D array, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        if np.any(arr < 0) or np.any(arr > 255):
            raise ValueError("frame samples must lie in [0, 255]")
        arr = arr.astype(np.uint8)
    return np.ascontiguousarray(arr)


# -- PGM ---------------------------------------------------------------------

_PGM_TOKEN = re.compile(rb"\s*(#[^\n]*\n\s*)*([^\s#]+)")


def _pgm_header(data: bytes) -> tuple[bytes, int, int, int, int]:
    pos = 0
    tokens = []
    for _ in range(4):
        m = _PGM_TOKEN.match(data, pos)
        if m is None:
            raise FormatError("truncated PGM header")
        tokens.append(m.group(2))
        pos = m.end()
    magic = tokens[0]
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise FormatError(f"bad PGM header fields {tokens[1:]!r}") from exc
    return magic, width, height, maxval, pos


def load_pgm(path: str | os.PathLike) -> np.ndarray:
    """Read a binary (P5) or ASCII (P2) PGM with maxval 255."""
    data = Path(path).read_bytes()
    magic, width, height, maxval, pos = _pgm_header(data)
    if magic not in (b"P5", b"P2"):
        raise FormatError(f"not a PGM file (magic {magic!r})")
    if width <= 0 or height <= 0:
        raise FormatError(f"bad PGM dimensions {width}x{height}")
    if maxval != 255:
        raise FormatError(f"only maxval 255 is supported, got {maxval}")
    count = width * height
    if magic == b"P5":
        # exactly one whitespace byte separates the header from the raster
        payload = data[pos + 1:pos + 1 + count]
        if len(payload) != count:
            raise FormatError(f"truncated PGM raster: {len(payload)} of {count} bytes")
        samples = np.frombuffer(payload, dtype=np.uint8)
    else:
        fields = data[pos:].split()
        if len(fields) < count:
            raise FormatError(f"truncated PGM raster: {len(fields)} of {count} values")
        samples = np.array([int(v) for v in fields[:count]])
        if samples.min() < 0 or samples.max() > 255:
            raise FormatError("PGM sample outside [0, 255]")
        samples = samples.astype(np.uint8)
    return samples.reshape(height, width).copy()


def save_pgm(path: str | os.PathLike, frame) -> None:
    """Write ``frame`` as a binary P5 PGM."""
    frame = as_frame(frame)
    height, width = frame.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (width, height))
        fh.write(frame.tobytes())


# -- YUV4MPEG2 ---------------------------------------------------------------

_CHROMA_FACTOR = {"420": 0.5, "mono": 0.0, "422": 1.0, "444": 2.0}


def _y4m_chroma(tag: str) -> float:
    if tag.startswith("420"):
        return _CHROMA_FACTOR["420"]
    if tag.startswith("mono"):
        return _CHROMA_FACTOR["mono"]
    raise FormatError(f"unsupported Y4M colour space C{tag} (only 4:2:0 and mono)")


def _iter_y4m(data: bytes) -> Iterator[np.ndarray]:
    if not data.startswith(b"YUV4MPEG2"):
        raise FormatError("bad Y4M magic")
    eol = data.find(b"\n")
    if eol < 0:
        raise FormatError("unterminated Y4M header")
    width = height = None
    chroma = _CHROMA_FACTOR["420"]
    for token in data[9:eol].split():
        key, value = chr(token[0]), token[1:].decode("ascii")
        if key == "W":
            width = int(value)
        elif key == "H":
            height = int(value)
        elif key == "C":
            chroma = _y4m_chroma(value)
    if not width or not height:
        raise FormatError("Y4M header lacks W/H")
    luma = width * height
    if chroma == 0.5:
        extra = 2 * ((width + 1) // 2) * ((height + 1) // 2)
    else:
        extra = int(chroma * luma)
    pos = eol + 1
    while pos < len(data):
        nl = data.find(b"\n", pos)
        if nl < 0 or not data.startswith(b"FRAME", pos):
            raise FormatError(f"bad Y4M frame header at byte {pos}")
        start = nl + 1
        end = start + luma + extra
        if end > len(data):
            raise FormatError("truncated Y4M frame")
        yield np.frombuffer(data, dtype=np.uint8, count=luma, offset=start).reshape(height, width).copy()
        pos = end


def load_y4m(path: str | os.PathLike) -> list[np.ndarray]:
    """Luma planes of every picture in a YUV4MPEG2 file."""
    data = Path(path).read_bytes()
    if not data:
        raise FormatError(f"{path}: empty file")
    frames = list(_iter_y4m(data))
    if not frames:
        raise FormatError(f"{path}: no pictures")
    return frames


def save_y4m(path: str | os.PathLike, frames, fps: int = 15) -> None:
    """Write luma-only frames as a ``Cmono`` YUV4MPEG2 stream."""
    frames = [as_frame(f) for f in frames]
    if not frames:
        raise ValueError("no frames to write")
    height, width = frames[0].shape
    with open(path, "wb") as fh:
        fh.write(b"YUV4MPEG2 W%d H%d F%d:1 Ip A1:1 Cmono\n" % (width, height, fps))
        for frame in frames:
            if frame.shape != (height, width):
                raise ValueError("inconsistent frame sizes")
            fh.write(b"FRAME\n")
            fh.write(frame.tobytes())


def load_raw_yuv(path: str | os.PathLike, width: int, height: int, chroma: str = "420") -> list[np.ndarray]:
    """Luma planes of a headerless planar 8-bit YUV file."""
    factor = _y4m_chroma(chroma)
    luma = width * height
    extra = 2 * ((width + 1) // 2) * ((height + 1) // 2) if factor == 0.5 else int(factor * luma)
    data = Path(path).read_bytes()
    step = luma + extra
    if not data or len(data) % step:
        raise FormatError(f"{path}: size {len(data)} is not a multiple of the {step}-byte picture size")
    return [
        np.frombuffer(data, dtype=np.uint8, count=luma, offset=off).reshape(height, width).copy()
        for off in range(0, len(data), step)
    ]


def load_sequence(path: str | os.PathLike, width: int | None = None, height: int | None = None) -> list[np.ndarray]:
    """Load ``.y4m``, ``.pgm``, a directory of PGMs, or raw ``.yuv`` by extension."""
    p = Path(path)
    if p.is_dir():
        files = sorted(p.glob("*.pgm"))
        if not files:
            raise FormatError(f"{p}: no .pgm files")
        frames = [load_pgm(f) for f in files]
    elif p.suffix.lower() == ".y4m":
        frames = load_y4m(p)
    elif p.suffix.lower() == ".pgm":
        frames = [load_pgm(p)]
    else:
        if width is None or height is None:
            raise FormatError(f"{p}: raw YUV input needs explicit width and height")
        frames = load_raw_yuv(p, width, height)
    shape = frames[0].shape
    if any(f.shape != shape for f in frames):
        raise FormatError(f"{p}: inconsistent frame sizes")
    return frames


# -- metrics -----------------------------------------------------------------


def psnr(a, b) -> float:
    """Luma PSNR in dB with peak 255; ``inf`` for identical frames."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch {a.shape} vs {b.shape}")
    diff = a.astype(np.int64) - b.astype(np.int64)
    sse = int(np.dot(diff.ravel(), diff.ravel()))
    if sse == 0:
        return math.inf
    return 10.0 * math.log10(255.0 * 255.0 * diff.size / sse)


@dataclass(frozen=True)
class MeanGrid:
    """One quantized 8-bit mean per block, in raster order."""

    means: np.ndarray  # (rows, cols) uint8
    block_size: int = BLOCK_SIZE

    @property
    def count(self) -> int:
        return self.means.size

    @property
    def bits(self) -> int:
        return 8 * self.count

    def tobytes(self) -> bytes:
        return self.means.astype(np.uint8).tobytes()

    @classmethod
    def frombytes(cls, data: bytes, width: int, height: int, block_size: int = BLOCK_SIZE) -> "MeanGrid":
        rows, cols = grid_shape(width, height, block_size)
        if len(data) != rows * cols:
            raise FormatError(f"expected {rows * cols} block means, got {len(data)}")
        return cls(np.frombuffer(data, dtype=np.uint8).reshape(rows, cols).copy(), block_size)


def grid_shape(width: int, height: int, block_size: int = BLOCK_SIZE) -> tuple[int, int]:
    return -(-height // block_size), -(-width // block_size)


def block_means(frame, block_size: int = BLOCK_SIZE) -> MeanGrid:
    """Floor of the mean of each block; partial edge blocks use their own pixel count."""
    frame = np.asarray(frame)
    height, width = frame.shape
    rows, cols = grid_shape(width, height, block_size)
    pad_h = rows * block_size - height
    pad_w = cols * block_size - width
    padded = np.pad(frame.astype(np.int64), ((0, pad_h), (0, pad_w)))
    sums = padded.reshape(rows, block_size, cols, block_size).sum(axis=(1, 3))
    counts = np.full((rows, cols), block_size * block_size, dtype=np.int64)
    if pad_h:
        counts[-1, :] = (block_size - pad_h) * block_size
    if pad_w:
        counts[:, -1] = counts[:, -1] // block_size * (block_size - pad_w)
    full = block_size * block_size
    shift = full.bit_length() - 1
    if 1 << shift == full and not pad_h and not pad_w:
        means = sums >> shift
    else:
        means = sums // counts
    return MeanGrid(means.astype(np.uint8), block_size)
