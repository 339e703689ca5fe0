"""Regenerate the golden bitstreams.  Run from the repository root::

    python3 tests/golden/make_golden.py

Each case is a key / WZ / key triple cut from the synthetic moving texture at
a size with partial edge blocks.  Written per case: the container
(``<name>.lrtd``, keys embedded), the original WZ frame (``<name>_wz.pgm``),
the decoded rank image (``<name>_ranks.npy``) and the decoder PSNRs in
``golden.json``.  Only regenerate after an intentional format change.
"""

import json
from pathlib import Path

import numpy as np

from lrtdvc.lrt import LrtParams
from lrtdvc.media_io import save_pgm
from lrtdvc.pipeline import CodecConfig, decode_sequence, encode_sequence, write_container
from lrtdvc.synthetic import moving_texture

HERE = Path(__file__).parent
WIDTH, HEIGHT = 72, 56

CASES = {
    "full_n2_odd": dict(lrt=LrtParams(n=2, delta=-10, variant="odd", sampling="full")),
    "half_n1_even": dict(lrt=LrtParams(n=1, delta=-10, variant="even", sampling="half")),
    "full_n3_square_unmerged": dict(lrt=LrtParams(n=3, delta=-6, variant="full", sampling="full"), merge=False),
}


def frames_for(name: str):
    seed = sorted(CASES).index(name)
    return moving_texture(3, WIDTH, HEIGHT, dy=1, dx=2, seed=seed)


def main() -> None:
    record = {}
    for name, kw in CASES.items():
        cfg = CodecConfig(threads=1, **kw)
        frames = frames_for(name)
        enc, _ = encode_sequence(frames, cfg)
        write_container(HERE / f"{name}.lrtd", enc)
        save_pgm(HERE / f"{name}_wz.pgm", frames[1])
        _, stats, decoded = decode_sequence(enc, cfg, frames, keep=True)
        np.save(HERE / f"{name}_ranks.npy", decoded[1].ranks.ranks)
        wz = stats[1]
        record[name] = {"si_psnr": wz.si_psnr, "rec_psnr": wz.rec_psnr, "post_psnr": wz.post_psnr, "bits": wz.bits}
    (HERE / "golden.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
