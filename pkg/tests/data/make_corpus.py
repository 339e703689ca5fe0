"""Regenerate the QCIF natural-image corpus used by the merge-reduction tests.

Needs scikit-image, which is only required to rebuild these files; the tests
read the checked-in PGMs.  Run from the repository root::

    python3 tests/data/make_corpus.py
"""

from pathlib import Path

import numpy as np
from skimage import color, data, transform, util

from lrtdvc.media_io import save_pgm

NAMES = ["camera", "astronaut", "coffee", "chelsea", "coins", "moon", "rocket", "grass", "gravel", "brick"]
WIDTH, HEIGHT = 176, 144


def qcif(img: np.ndarray) -> np.ndarray:
    if img.ndim == 3:
        img = color.rgb2gray(img[..., :3])
    small = transform.resize(img, (HEIGHT, WIDTH), anti_aliasing=True)
    return util.img_as_ubyte(np.clip(small, 0, 1))


def main() -> None:
    out = Path(__file__).parent
    for name in NAMES:
        save_pgm(out / f"{name}.pgm", qcif(getattr(data, name)()))


if __name__ == "__main__":
    main()
