"""JPEG 2000 MQ binary arithmetic coder (ISO/IEC 15444-1 Annex C).

Byte-exact with the standard: 47-state Qe table, 16-bit interval register,
carry resolution with 0xFF bit stuffing, and the SETBITS flush that drops a
trailing 0xFF.  Every context starts in state 0 with MPS 0.

The decoder treats bytes past the end of the codeword as 0xFF, as the
standard requires after a discarded trailing 0xFF.  It raises
:class:`MQError` once it has had to synthesise more than
:data:`MAX_OVERRUN` bytes, which is how a truncated payload shows up.
"""

from __future__ import annotations

import numpy as np

from ._jit import njit

__all__ = ["MQError", "N_CONTEXTS", "mq_decode", "mq_encode", "initial_contexts"]

N_CONTEXTS = 9

# (Qe, NMPS, NLPS, SWITCH) for states 0..46
_TABLE = [
    (0x5601, 1, 1, 1), (0x3401, 2, 6, 0), (0x1801, 3, 9, 0), (0x0AC1, 4, 12, 0),
    (0x0521, 5, 29, 0), (0x0221, 38, 33, 0), (0x5601, 7, 6, 1), (0x5401, 8, 14, 0),
    (0x4801, 9, 14, 0), (0x3801, 10, 14, 0), (0x3001, 11, 17, 0), (0x2401, 12, 18, 0),
    (0x1C01, 13, 20, 0), (0x1601, 29, 21, 0), (0x5601, 15, 14, 1), (0x5401, 16, 14, 0),
    (0x5101, 17, 15, 0), (0x4801, 18, 16, 0), (0x3801, 19, 17, 0), (0x3401, 20, 18, 0),
    (0x3001, 21, 19, 0), (0x2801, 22, 19, 0), (0x2401, 23, 20, 0), (0x2201, 24, 21, 0),
    (0x1C01, 25, 22, 0), (0x1801, 26, 23, 0), (0x1601, 27, 24, 0), (0x1401, 28, 25, 0),
    (0x1201, 29, 26, 0), (0x1101, 30, 27, 0), (0x0AC1, 31, 28, 0), (0x09C1, 32, 29, 0),
    (0x08A1, 33, 30, 0), (0x0521, 34, 31, 0), (0x0441, 35, 32, 0), (0x02A1, 36, 33, 0),
    (0x0221, 37, 34, 0), (0x0141, 38, 35, 0), (0x0111, 39, 36, 0), (0x0085, 40, 37, 0),
    (0x0049, 41, 38, 0), (0x0025, 42, 39, 0), (0x0015, 43, 40, 0), (0x0009, 44, 41, 0),
    (0x0005, 45, 42, 0), (0x0001, 45, 43, 0), (0x5601, 46, 46, 0),
]
QE = np.array([t[0] for t in _TABLE], dtype=np.int64)
NMPS = np.array([t[1] for t in _TABLE], dtype=np.int64)
NLPS = np.array([t[2] for t in _TABLE], dtype=np.int64)
SWITCH = np.array([t[3] for t in _TABLE], dtype=np.int64)

MAX_OVERRUN = 4


class MQError(ValueError):
    """Raised when a codeword is exhausted before decoding finished."""


def initial_contexts(n: int = N_CONTEXTS) -> tuple[np.ndarray, np.ndarray]:
    """State indices and MPS bits for ``n`` fresh contexts."""
    return np.zeros(n, dtype=np.int64), np.zeros(n, dtype=np.int64)


# -- encoder -----------------------------------------------------------------


@njit
def _byteout(reg, out):
    # reg: [A, C, CT, BP]
    bp = reg[3]
    c = reg[1]
    if out[bp] == 0xFF:
        bp += 1
        out[bp] = (c >> 20) & 0xFF
        c &= 0xFFFFF
        reg[2] = 7
    elif c & 0x8000000 == 0:
        bp += 1
        out[bp] = (c >> 19) & 0xFF
        c &= 0x7FFFF
        reg[2] = 8
    else:
        out[bp] += 1
        if out[bp] == 0xFF:
            c &= 0x7FFFFFF
            bp += 1
            out[bp] = (c >> 20) & 0xFF
            c &= 0xFFFFF
            reg[2] = 7
        else:
            bp += 1
            out[bp] = (c >> 19) & 0xFF
            c &= 0x7FFFF
            reg[2] = 8
    reg[1] = c
    reg[3] = bp


@njit
def _renorme(reg, out):
    while True:
        reg[0] = reg[0] << 1
        reg[1] = reg[1] << 1
        reg[2] -= 1
        if reg[2] == 0:
            _byteout(reg, out)
        if reg[0] & 0x8000:
            break


@njit
def _encode_kernel(syms, ctxs, index, mps, qe, nmps, nlps, switch, out):
    reg = np.zeros(4, dtype=np.int64)
    reg[0] = 0x8000
    reg[2] = 12
    out[0] = 0  # the byte before the codeword; never emitted
    for k in range(syms.shape[0]):
        cx = ctxs[k]
        i = index[cx]
        q = qe[i]
        reg[0] -= q
        if syms[k] == mps[cx]:
            if reg[0] & 0x8000 == 0:
                if reg[0] < q:
                    reg[0] = q
                else:
                    reg[1] += q
                index[cx] = nmps[i]
                _renorme(reg, out)
            else:
                reg[1] += q
        else:
            if reg[0] < q:
                reg[1] += q
            else:
                reg[0] = q
            if switch[i] == 1:
                mps[cx] = 1 - mps[cx]
            index[cx] = nlps[i]
            _renorme(reg, out)
    # SETBITS and flush
    tempc = reg[1] + reg[0]
    reg[1] = reg[1] | 0xFFFF
    if reg[1] >= tempc:
        reg[1] -= 0x8000
    reg[1] = reg[1] << reg[2]
    _byteout(reg, out)
    reg[1] = reg[1] << reg[2]
    _byteout(reg, out)
    end = reg[3]
    if out[end] != 0xFF:
        end += 1
    return end


def mq_encode(symbols, contexts, n_contexts: int = N_CONTEXTS) -> bytes:
    """Encode binary ``symbols`` under the matching ``contexts`` sequence."""
    syms = np.ascontiguousarray(symbols, dtype=np.uint8)
    ctxs = np.ascontiguousarray(contexts, dtype=np.int64)
    if syms.shape != ctxs.shape or syms.ndim != 1:
        raise ValueError("symbols and contexts must be 1-D sequences of equal length")
    if syms.size and (ctxs.min() < 0 or ctxs.max() >= n_contexts):
        raise ValueError(f"contexts must lie in [0, {n_contexts - 1}]")
    if syms.size and syms.max() > 1:
        raise ValueError("symbols must be 0 or 1")
    index, mps = initial_contexts(n_contexts)
    # each symbol renormalises at most 15 times, so 2 bytes per symbol bounds it
    out = np.zeros(2 * syms.size + 8, dtype=np.int64)
    end = _encode_kernel(syms, ctxs, index, mps, QE, NMPS, NLPS, SWITCH, out)
    return out[1:end].astype(np.uint8).tobytes()


# -- decoder -----------------------------------------------------------------


@njit
def _byte_at(data, i):
    if i < data.shape[0]:
        return np.int64(data[i])
    return np.int64(0xFF)


@njit
def _bytein(reg, data):
    # reg: [A, C, CT, BP, overrun]
    bp = reg[3]
    n = data.shape[0]
    if _byte_at(data, bp) == 0xFF:
        b1 = _byte_at(data, bp + 1)
        if b1 > 0x8F:
            reg[1] += 0xFF00
            reg[2] = 8
            if bp + 1 >= n:
                reg[4] += 1
        else:
            reg[3] = bp + 1
            reg[1] += b1 << 9
            reg[2] = 7
    else:
        reg[3] = bp + 1
        if bp + 1 >= n:
            reg[4] += 1
        reg[1] += _byte_at(data, bp + 1) << 8
        reg[2] = 8


@njit
def init_decoder(data):
    """INITDEC: fresh register file ``[A, C, CT, BP, overrun]``."""
    reg = np.zeros(5, dtype=np.int64)
    if data.shape[0] == 0:
        reg[4] = 1
    reg[1] = _byte_at(data, 0) << 16
    _bytein(reg, data)
    reg[1] = (reg[1] << 7) & 0xFFFFFFFF
    reg[2] -= 7
    reg[0] = 0x8000
    return reg


@njit
def _renormd(reg, data):
    while True:
        if reg[2] == 0:
            _bytein(reg, data)
        reg[0] = reg[0] << 1
        reg[1] = (reg[1] << 1) & 0xFFFFFFFF
        reg[2] -= 1
        if reg[0] & 0x8000:
            break


@njit
def decode_bit(reg, data, cx, index, mps, qe, nmps, nlps, switch):
    """DECODE one binary decision in context ``cx``."""
    i = index[cx]
    q = qe[i]
    reg[0] -= q
    if (reg[1] >> 16) < q:
        # LPS exchange
        if reg[0] < q:
            d = mps[cx]
            index[cx] = nmps[i]
        else:
            d = 1 - mps[cx]
            if switch[i] == 1:
                mps[cx] = 1 - mps[cx]
            index[cx] = nlps[i]
        reg[0] = q
        _renormd(reg, data)
    else:
        reg[1] -= q << 16
        if reg[0] & 0x8000 == 0:
            # MPS exchange
            if reg[0] < q:
                d = 1 - mps[cx]
                if switch[i] == 1:
                    mps[cx] = 1 - mps[cx]
                index[cx] = nlps[i]
            else:
                d = mps[cx]
                index[cx] = nmps[i]
            _renormd(reg, data)
        else:
            d = mps[cx]
    return d


@njit
def _decode_kernel(data, ctxs, index, mps, qe, nmps, nlps, switch, out, max_overrun):
    reg = init_decoder(data)
    for k in range(ctxs.shape[0]):
        out[k] = decode_bit(reg, data, ctxs[k], index, mps, qe, nmps, nlps, switch)
        if reg[4] > max_overrun:
            return k
    return ctxs.shape[0]


def mq_decode(data: bytes, contexts, n_contexts: int = N_CONTEXTS) -> np.ndarray:
    """Decode one symbol per entry of ``contexts``; the caller drives the context order."""
    buf = np.frombuffer(bytes(data), dtype=np.uint8)
    ctxs = np.ascontiguousarray(contexts, dtype=np.int64)
    if ctxs.size and (ctxs.min() < 0 or ctxs.max() >= n_contexts):
        raise ValueError(f"contexts must lie in [0, {n_contexts - 1}]")
    index, mps = initial_contexts(n_contexts)
    out = np.zeros(ctxs.size, dtype=np.uint8)
    done = _decode_kernel(buf, ctxs, index, mps, QE, NMPS, NLPS, SWITCH, out, MAX_OVERRUN)
    if done < ctxs.size:
        raise MQError(f"codeword exhausted after {done} of {ctxs.size} symbols")
    return out
