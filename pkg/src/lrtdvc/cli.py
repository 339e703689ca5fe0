"""Command-line front end: ``lrtdvc encode | decode | cost | sweep | synth``.

Exit codes: 0 on success, 1 for usage errors, 2 for unreadable or corrupt
data.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

from .complexity import cost_rows, write_cost_csv
from .entropy import BitstreamError, WzBitstream
from .lrt import LrtParams
from .media_io import FormatError, load_sequence, save_pgm
from .mq import MQError
from .pipeline import (CodecConfig, decode_sequence, encode_sequence, merge_ablation, read_container,
                       read_stats_csv, report, write_container)
from .reconstruction import write_trace_csv
from .side_info import write_motion_csv

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_input(p: argparse.ArgumentParser) -> None:
    p.add_argument("--in", dest="input", required=True, help="y4m, pgm, directory of pgm, or raw yuv")
    p.add_argument("--width", type=int, help="frame width for raw yuv input")
    p.add_argument("--height", type=int, help="frame height for raw yuv input")


def _lrt_params(args) -> LrtParams:
    if args.variant is None:
        return LrtParams.for_sampling(args.n, args.delta, args.sampling)
    return LrtParams(n=args.n, delta=args.delta, variant=args.variant, sampling=args.sampling)


def _summary_line(summary: dict) -> str:
    parts = []
    for k, v in summary.items():
        parts.append(f"{k}={v:.4f}" if isinstance(v, float) and math.isfinite(v) else f"{k}={v}")
    return " ".join(parts)


def cmd_encode(args) -> int:
    frames = load_sequence(args.input, args.width, args.height)
    cfg = CodecConfig(lrt=_lrt_params(args), gop=args.gop, merge=not args.no_merge, fps=args.fps,
                      include_key_bits=args.include_key_bits)
    enc, stats = encode_sequence(frames, cfg)
    if args.ablate:
        merge_ablation(frames, cfg, stats)
    size = write_container(args.out, enc, args.keys)
    summary = report(stats, args.stats, fps=cfg.fps, include_key_bits=cfg.include_key_bits)
    print(f"wrote {args.out}: {size} bytes, {len(frames)} frames")
    print(_summary_line(summary))
    return EXIT_OK


def cmd_decode(args) -> int:
    enc = read_container(args.input, args.keys)
    first = next((f for f in enc.frames if isinstance(f, WzBitstream)), None)
    lrt = first.params if first is not None else LrtParams()
    cfg = CodecConfig(lrt=lrt, gop=enc.gop, step=args.step, search_range=args.search_range,
                      mean_assist=not args.no_mean_assist, postprocess=not args.no_postprocess,
                      interpolate_me=args.interpolate_me, fps=args.fps, include_key_bits=args.include_key_bits,
                      max_iterations=args.max_iterations)
    originals = None
    if args.ref:
        originals = load_sequence(args.ref, args.width, args.height)
    keep = bool(args.trace_csv or args.motion_csv)
    frames, stats, decoded = decode_sequence(enc, cfg, originals, keep=keep)
    if args.ablate and originals is not None:
        _, plain, _ = decode_sequence(enc, replace(cfg, mean_assist=False), originals)
        for st, ref in zip(stats, plain):
            if st.role == "wz":
                st.ablation["post_psnr_no_mean_assist"] = ref.post_psnr
                st.ablation["rec_psnr_no_postprocess"] = st.rec_psnr
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for i, f in enumerate(frames):
            save_pgm(out / f"frame_{i:05d}.pgm", f)
    for i, d in decoded.items():
        if args.trace_csv:
            Path(args.trace_csv).mkdir(parents=True, exist_ok=True)
            write_trace_csv(Path(args.trace_csv) / f"trace_{i:05d}.csv", d.trace)
        if args.motion_csv:
            Path(args.motion_csv).mkdir(parents=True, exist_ok=True)
            write_motion_csv(Path(args.motion_csv) / f"motion_{i:05d}.csv", d.motion)
    summary = report(stats, args.stats, fps=cfg.fps, include_key_bits=cfg.include_key_bits)
    print(_summary_line(summary))
    return EXIT_OK


def cmd_cost(args) -> int:
    stats = [s for s in read_stats_csv(args.input) if s.role == "wz"]
    if not stats:
        raise FormatError(f"{args.input}: no WZ frames")
    rows = cost_rows([(s.index, s.n, s.pixels, s.frame_pixels, s.beta, s.bits) for s in stats], f_wz=args.fps)
    if args.out:
        write_cost_csv(args.out, rows)
    keys = [k for k in rows[0] if k.startswith(("pi_", "power_"))]
    for k in keys:
        print(f"{k}={sum(r[k] for r in rows) / len(rows):.1f}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    """Rate/quality operating points: sampled LRT for low rates, full LRT for high rates."""
    frames = load_sequence(args.input, args.width, args.height)
    rows = []
    for sampling in ("half", "full"):
        for n in args.n_values:
            cfg = CodecConfig(lrt=LrtParams.for_sampling(n, args.delta, sampling), gop=args.gop, step=args.step,
                              fps=args.fps)
            enc, _ = encode_sequence(frames, cfg)
            _, stats, _ = decode_sequence(enc, cfg, frames)
            s = report(stats, fps=cfg.fps)
            rows.append({"sampling": sampling, "n": n, "kbps": s["kbps"], "si_psnr": s["si_psnr"],
                         "rec_psnr": s["rec_psnr"], "post_psnr": s["post_psnr"], "power": s["power"]})
            print(_summary_line(rows[-1]))
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    return EXIT_OK


def cmd_synth(args) -> int:
    from .media_io import save_y4m
    from .synthetic import moving_texture

    frames = moving_texture(args.frames, args.width or 176, args.height or 144, args.dy, args.dx, args.seed)
    save_y4m(args.out, frames, fps=int(args.fps))
    print(f"wrote {args.out}: {len(frames)} frames")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lrtdvc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("encode", help="encode a sequence")
    _add_input(p)
    p.add_argument("--n", type=int, default=2, choices=(1, 2, 3, 4), help="neighbourhood size N")
    p.add_argument("--delta", type=int, default=-10)
    p.add_argument("--variant", choices=("full", "odd", "even"), help="default: odd (full) / even (half)")
    p.add_argument("--sampling", choices=("full", "half"), default="full")
    p.add_argument("--gop", type=int, default=2)
    p.add_argument("--out", required=True, help="output .lrtd container")
    p.add_argument("--keys", help="write key frames to this directory instead of embedding them")
    p.add_argument("--stats", help="per-frame CSV")
    p.add_argument("--no-merge", action="store_true", help="code the full rank alphabet")
    p.add_argument("--ablate", action="store_true", help="also report bits without merging")
    p.add_argument("--fps", type=float, default=15.0)
    p.add_argument("--include-key-bits", action="store_true")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode a container")
    p.add_argument("--in", dest="input", required=True, help=".lrtd container")
    p.add_argument("--keys", help="directory with key_NNNNN.pgm sidecars")
    p.add_argument("--step", type=int, default=2)
    p.add_argument("--search-range", type=int, default=16)
    p.add_argument("--max-iterations", type=int, default=200)
    p.add_argument("--out", help="directory for decoded frame_NNNNN.pgm")
    p.add_argument("--stats", help="per-frame CSV")
    p.add_argument("--ref", help="original sequence, enables PSNR columns")
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--no-mean-assist", action="store_true")
    p.add_argument("--no-postprocess", action="store_true")
    p.add_argument("--interpolate-me", action="store_true", help="fill sampled ranks before motion search")
    p.add_argument("--ablate", action="store_true", help="add no-mean-assist / no-postprocess PSNR columns")
    p.add_argument("--trace-csv", help="directory for per-frame iteration traces")
    p.add_argument("--motion-csv", help="directory for per-frame motion fields")
    p.add_argument("--fps", type=float, default=15.0)
    p.add_argument("--include-key-bits", action="store_true")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("cost", help="encoder complexity and power report from a stats CSV")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", help="per-frame cost CSV")
    p.add_argument("--fps", type=float, default=15.0)
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("sweep", help="rate/quality sweep over N for sampled and full LRT")
    _add_input(p)
    p.add_argument("--n-values", type=int, nargs="+", default=[1, 2, 3, 4])
    p.add_argument("--delta", type=int, default=-10)
    p.add_argument("--gop", type=int, default=2)
    p.add_argument("--step", type=int, default=2)
    p.add_argument("--fps", type=float, default=15.0)
    p.add_argument("--out", help="summary CSV")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", help="write a synthetic moving-texture sequence")
    p.add_argument("--out", required=True, help="output .y4m")
    p.add_argument("--frames", type=int, default=20)
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--dy", type=int, default=1)
    p.add_argument("--dx", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fps", type=float, default=15.0)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (FormatError, BitstreamError, MQError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"lrtdvc: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"lrtdvc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
