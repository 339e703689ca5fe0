"""Feedback-channel-free distributed video coding with local rank transforms.

The encoder sends, for every Wyner-Ziv (WZ) frame, a context-coded rank image
and one 8-bit mean per 16x16 block.  The decoder builds side information by
rank-domain motion search over neighbouring key frames and refines it until
its ranks agree with the transmitted ones.
"""

from .complexity import CycleWeights, OpCounts, encoder_cost, ldpc_cost, power
from .entropy import BitstreamError, MergeMap, WzBitstream, build_merge_map, decode_positions, encode_positions, merge_ranks
from .lrt import LrtParams, RankImage, interpolate_missing, sample_half, transform, transform_counted
from .media_io import FormatError, MeanGrid, block_means, load_pgm, load_sequence, load_y4m, psnr, save_pgm
from .mq import MQError, mq_decode, mq_encode
from .pipeline import CodecConfig, FrameStats, decode_sequence, encode_sequence, report
from .reconstruction import ReconParams, dlrtex, post_process, reconstruct_sampled
from .side_info import MatchThresholds, compensate, motion_search

__version__ = "0.1.0"

__all__ = [
    "BitstreamError",
    "CodecConfig",
    "CycleWeights",
    "FormatError",
    "FrameStats",
    "LrtParams",
    "MQError",
    "MatchThresholds",
    "MeanGrid",
    "MergeMap",
    "OpCounts",
    "RankImage",
    "ReconParams",
    "WzBitstream",
    "block_means",
    "build_merge_map",
    "compensate",
    "decode_positions",
    "decode_sequence",
    "dlrtex",
    "encode_positions",
    "encode_sequence",
    "encoder_cost",
    "interpolate_missing",
    "ldpc_cost",
    "load_pgm",
    "load_sequence",
    "load_y4m",
    "merge_ranks",
    "motion_search",
    "mq_decode",
    "mq_encode",
    "post_process",
    "power",
    "psnr",
    "reconstruct_sampled",
    "report",
    "sample_half",
    "save_pgm",
    "transform",
    "transform_counted",
]
