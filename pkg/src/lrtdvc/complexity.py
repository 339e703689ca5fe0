"""Encoder operation counts, cycle weights and the power figure.

Counts are kept per operation class in :class:`OpCounts` and turned into
clock cycles with :class:`CycleWeights`.  The default weights are average
cycles per instruction on an embedded x86 core.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields

__all__ = [
    "CycleWeights",
    "LDPC_CODE_LENGTHS",
    "OpCounts",
    "PowerEstimate",
    "beta_symbols",
    "context_cost",
    "encoder_cost",
    "ldpc_cost",
    "ldpc_counts",
    "lrt_cost",
    "lrt_cost_naive",
    "mq_cost",
    "power",
    "write_cost_csv",
]

LDPC_CODE_LENGTHS = (8, 11, 15, 23)
DEFAULT_K = 1.0
DEFAULT_ALPHA = 50.0
DEFAULT_FPS = 15.0


@dataclass(frozen=True)
class OpCounts:
    comparisons: float = 0
    increments: float = 0
    additions: float = 0
    memory: float = 0
    shifts: float = 0
    decrements: float = 0
    moves: float = 0
    modulo2: float = 0
    divisions: float = 0
    multiplications: float = 0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be non-negative")

    def __add__(self, other: "OpCounts") -> "OpCounts":
        return OpCounts(**{f.name: getattr(self, f.name) + getattr(other, f.name) for f in fields(self)})

    def scaled(self, factor: float) -> "OpCounts":
        return OpCounts(**{f.name: getattr(self, f.name) * factor for f in fields(self)})

    def cycles(self, weights: "CycleWeights | None" = None) -> float:
        w = weights or CycleWeights()
        return sum(getattr(self, f.name) * getattr(w, f.name) for f in fields(self))


@dataclass(frozen=True)
class CycleWeights:
    comparisons: float = 1.0
    increments: float = 0.5
    additions: float = 1.0
    memory: float = 3.0
    shifts: float = 0.5
    decrements: float = 0.5
    moves: float = 0.5
    modulo2: float = 0.5
    divisions: float = 6.0
    multiplications: float = 6.0


def lrt_cost(p_pixels: int, n: int, mean_pixels: int | None = None) -> OpCounts:
    """Rank transform with shared comparisons: ``PN(N+1)(C + 2I) + P'A``.

    ``mean_pixels`` (default ``p_pixels``) is the number of pixels summed
    for the block means.
    """
    if n < 1:
        raise ValueError("neighbourhood size must be >= 1")
    pairs = p_pixels * n * (n + 1)
    return OpCounts(comparisons=pairs, increments=2 * pairs,
                    additions=p_pixels if mean_pixels is None else mean_pixels)


def lrt_cost_naive(p_pixels: int, n: int, mean_pixels: int | None = None) -> OpCounts:
    """Rank transform comparing every pixel with every neighbour: ``2PN(N+1)(C + I) + P'A``."""
    if n < 1:
        raise ValueError("neighbourhood size must be >= 1")
    slots = 2 * p_pixels * n * (n + 1)
    return OpCounts(comparisons=slots, increments=slots,
                    additions=p_pixels if mean_pixels is None else mean_pixels)


def beta_symbols(p_pixels: int, histogram) -> int:
    """Position symbols emitted for a rank histogram given highest rank first.

    Every plane except the lowest codes all positions still unassigned:
    ``P + (P - P_top) + (P - P_top - P_next) + ...``.
    """
    counts = [int(c) for c in histogram]
    if sum(counts) != p_pixels:
        raise ValueError(f"histogram sums to {sum(counts)}, expected {p_pixels}")
    remaining = p_pixels
    beta = 0
    for c in counts[:-1]:
        if remaining == 0:
            break
        beta += remaining
        remaining -= c
    return beta


def context_cost(p_pixels: int, beta: int) -> OpCounts:
    """Context formation: ``P(C + 4I) + (beta - P)(C + 8I)``."""
    if beta < p_pixels:
        raise ValueError(f"beta ({beta}) must be at least P ({p_pixels})")
    return OpCounts(comparisons=beta, increments=4 * p_pixels + 8 * (beta - p_pixels))


def mq_cost(beta: int) -> OpCounts:
    """Worst-case MQ encoding: ``beta(3M + C + A + 2S + D + MV)``."""
    return OpCounts(memory=3 * beta, comparisons=beta, additions=beta, shifts=2 * beta,
                    decrements=beta, moves=beta)


def ldpc_counts(p_pixels: int, n_code: int) -> OpCounts:
    """Syndrome generation for the ``n``-th LDPC code: ``8P(4A + 7M + D + (n+1)/132 (DIV + MULT + 2A + D))``."""
    if n_code < 1:
        raise ValueError("code index must be >= 1")
    frac = (n_code + 1) / 132
    scale = 8 * p_pixels
    return OpCounts(additions=scale * (4 + 2 * frac), memory=scale * 7, decrements=scale * (1 + frac),
                    divisions=scale * frac, multiplications=scale * frac)


def ldpc_cost(p_pixels: int, n_code: int, weights: CycleWeights | None = None) -> float:
    return ldpc_counts(p_pixels, n_code).cycles(weights)


@dataclass(frozen=True)
class EncoderCost:
    lrt: float
    context: float
    mq: float

    @property
    def total(self) -> float:
        return self.lrt + self.context + self.mq


def encoder_cost(p_pixels: int, n: int, beta: int, weights: CycleWeights | None = None,
                 mean_pixels: int | None = None) -> EncoderCost:
    """Cycles for the transform, context modelling and MQ stages of one WZ frame."""
    return EncoderCost(
        lrt=lrt_cost(p_pixels, n, mean_pixels).cycles(weights),
        context=context_cost(p_pixels, beta).cycles(weights) if beta else 0.0,
        mq=mq_cost(beta).cycles(weights),
    )


@dataclass(frozen=True)
class PowerEstimate:
    cycles: float
    rate: float
    power: float


def power(cycles: float, rate_bps: float, k: float = DEFAULT_K, alpha: float = DEFAULT_ALPHA,
          f_wz: float = DEFAULT_FPS) -> PowerEstimate:
    """``k (f_wz * cycles + alpha * rate)`` in raw (unscaled) units."""
    if min(cycles, rate_bps, k, alpha, f_wz) < 0:
        raise ValueError("power model inputs must be non-negative")
    return PowerEstimate(cycles, rate_bps, k * (f_wz * cycles + alpha * rate_bps))


COST_COLUMNS = (
    ["frame", "n", "pixels", "frame_pixels", "beta", "pi_lrt", "pi_cx", "pi_mq", "pi_total"]
    + [f"pi_ldpc_{n}" for n in LDPC_CODE_LENGTHS]
    + ["rate_bps", "power_lrt"]
    + [f"power_ldpc_{n}" for n in LDPC_CODE_LENGTHS]
)


def cost_rows(frames, weights: CycleWeights | None = None, k: float = DEFAULT_K,
              alpha: float = DEFAULT_ALPHA, f_wz: float = DEFAULT_FPS) -> list[dict]:
    """One cost-report row per ``(frame, n, pixels, frame_pixels, beta, bits)`` tuple.

    ``pixels`` counts the ranked (coded) positions, ``frame_pixels`` the whole
    picture, which is what the block means and the LDPC coder see.  LDPC
    power is priced at the LRT frame's own rate.
    """
    rows = []
    for frame, n, pixels, frame_pixels, beta, bits in frames:
        cost = encoder_cost(pixels, n, beta, weights, mean_pixels=frame_pixels)
        rate = bits * f_wz
        row = {"frame": frame, "n": n, "pixels": pixels, "frame_pixels": frame_pixels, "beta": beta,
               "pi_lrt": cost.lrt, "pi_cx": cost.context, "pi_mq": cost.mq, "pi_total": cost.total}
        for code in LDPC_CODE_LENGTHS:
            row[f"pi_ldpc_{code}"] = ldpc_cost(frame_pixels, code, weights)
        row["rate_bps"] = rate
        row["power_lrt"] = power(cost.total, rate, k, alpha, f_wz).power
        for code in LDPC_CODE_LENGTHS:
            row[f"power_ldpc_{code}"] = power(row[f"pi_ldpc_{code}"], rate, k, alpha, f_wz).power
        rows.append(row)
    return rows


def write_cost_csv(path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=COST_COLUMNS)
        w.writeheader()
        for row in rows:
            w.writerow(row)


