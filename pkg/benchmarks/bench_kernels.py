"""Compare the numba kernels with their pure-Python / numpy fallbacks.

Run from the repository root::

    python3 benchmarks/bench_kernels.py [--repeat 3]

For each hot kernel the compiled version, the numpy fallback (where one
exists) and the interpreted kernel body are timed on a QCIF-sized input;
the interpreted body is run on a smaller crop and scaled, since it is
several hundred times slower.  The end-to-end row times one WZ frame
decode, in-process for the compiled path and in a subprocess with
``LRTDVC_DISABLE_JIT=1`` for the fallback path.
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from lrtdvc import entropy, lrt, mq, side_info
from lrtdvc._jit import NUMBA_ENABLED, py_func
from lrtdvc.lrt import LrtParams, transform
from lrtdvc.media_io import block_means
from lrtdvc.synthetic import moving_texture

W, H = 176, 144


def best_of(fn, repeat):
    fn()  # warm-up / compilation
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def bench_transform(frames, repeat):
    img = frames[1].astype(np.int32)
    dys, dxs = lrt._offset_arrays(2, "odd")
    out = np.empty(img.shape, np.int16)
    crop = img[:36, :44].copy()
    small = np.empty(crop.shape, np.int16)
    scale = img.size / crop.size
    return {
        "numba": best_of(lambda: lrt._transform_kernel(img, dys, dxs, np.int32(-10), out), repeat),
        "numpy": best_of(lambda: lrt._transform_numpy(img, dys, dxs, -10), repeat),
        "python": scale * best_of(lambda: py_func(lrt._transform_kernel)(crop, dys, dxs, np.int32(-10), small), 1),
    }


def bench_mq(frames, repeat):
    m = entropy.build_merge_map(12)
    r = entropy.merge_ranks(transform(frames[1], LrtParams()), m)
    stream = entropy.encode_positions(r, m)
    syms, ctxs = stream.symbols, stream.contexts.astype(np.int64)
    cut = syms.size // 16

    def run(kernel, s, c):
        index, mps = mq.initial_contexts()
        out = np.zeros(2 * s.size + 8, np.int64)
        kernel(s, c, index, mps, mq.QE, mq.NMPS, mq.NLPS, mq.SWITCH, out)

    return {
        "numba": best_of(lambda: run(mq._encode_kernel, syms, ctxs), repeat),
        "python": 16 * best_of(lambda: run(py_func(mq._encode_kernel), syms[:cut], ctxs[:cut]), 1),
    }


def bench_search(frames, repeat, search_range=16):
    p = LrtParams()
    wz = frames[1]
    wz_r = transform(wz, p).ranks.astype(np.int64)
    means = block_means(wz).means.astype(np.float64)
    refs = np.stack([transform(frames[0], p).ranks, transform(frames[2], p).ranks]).astype(np.int64)
    sats = np.stack([side_info._sat(frames[0]), side_info._sat(frames[2])])
    rows, cols = means.shape

    def run(search, rng):
        out_i = np.zeros((rows * cols, 7), np.int64)
        out_f = np.zeros((rows * cols, 2), np.float64)
        search(wz_r, means, refs, sats, 16, rng, 5.0, out_i, out_f)

    small = 2
    scale = ((2 * search_range + 1) / (2 * small + 1)) ** 2
    return {
        "numba": best_of(lambda: run(side_info._search_kernel, search_range), repeat),
        "numpy": best_of(lambda: run(side_info._search_numpy, search_range), 1),
        "python": scale * best_of(lambda: run(py_func(side_info._search_kernel), small), 1),
    }


DECODE_SNIPPET = """
import time
from lrtdvc.pipeline import CodecConfig, decode_wz, encode_frame
from lrtdvc.synthetic import moving_texture
f = moving_texture(3, {w}, {h})
cfg = CodecConfig(threads=1)
bs, _ = encode_frame(f[1], cfg)
decode_wz(bs, [f[0], f[2]], cfg)
t = time.perf_counter()
decode_wz(bs, [f[0], f[2]], cfg)
print(time.perf_counter() - t)
"""


def bench_decode(_frames, _repeat):
    code = DECODE_SNIPPET.format(w=W, h=H)
    res = {}
    for label, extra in (("numba", {}), ("fallback", {"LRTDVC_DISABLE_JIT": "1"})):
        env = dict(os.environ, **extra)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        res[label] = float(out.stdout.strip())
    return res


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if not NUMBA_ENABLED:
        print("numba is disabled (LRTDVC_DISABLE_JIT); both columns would time the fallback", file=sys.stderr)
        return 1
    frames = moving_texture(3, W, H)
    benches = {"transform N=2": bench_transform, "mq encode": bench_mq, "motion search +-16": bench_search,
               "decode one WZ frame": bench_decode}
    print(f"{'kernel':<22}{'numba':>12}{'numpy':>12}{'python':>12}{'fallback':>12}")
    for name, fn in benches.items():
        res = fn(frames, args.repeat)
        cells = "".join(f"{res[k] * 1e3:>10.1f}ms" if k in res else f"{'-':>12}"
                        for k in ("numba", "numpy", "python", "fallback"))
        print(f"{name:<22}{cells}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
