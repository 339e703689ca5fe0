import csv

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lrtdvc.lrt import ABSENT, LrtParams, sample_half, transform
from lrtdvc.media_io import MeanGrid, block_means
from lrtdvc.side_info import MatchThresholds, MotionField, compensate, motion_search, rank_sad, write_motion_csv
from lrtdvc.synthetic import contrast_clone_sequence


def test_rank_sad_examples(rng):
    a = rng.integers(0, 12, (16, 16))
    assert rank_sad(a, a) == 0
    assert rank_sad(a, a + 1) == 256
    b = rng.integers(0, 12, (16, 16))
    assert rank_sad(a, b) == sum(abs(int(x) - int(y)) for x, y in zip(a.ravel(), b.ravel()))
    c = a.copy()
    c[::2] = ABSENT
    assert rank_sad(c, a + 3) == 3 * 128
    with pytest.raises(ValueError):
        rank_sad(a, a[:8])


def test_t2_values():
    assert MatchThresholds.for_params(12).t2 == pytest.approx(153.6)
    assert MatchThresholds.for_params(12, "half").t2 == pytest.approx(76.8)
    assert MatchThresholds.for_params(12).t1 == 5


def _refs(frames, p):
    return [(f, transform(f, p)) for f in frames]


def test_static_scene_prefers_zero_motion(rng):
    f = rng.integers(0, 256, (48, 64), dtype=np.uint8)
    p = LrtParams()
    mf = motion_search(transform(f, p), block_means(f), _refs([f], p), MatchThresholds.for_params(12))
    assert (mf.mv == 0).all()
    assert (mf.lsad1 == 0).all() and (mf.lsad2 == 0).all()
    assert mf.used_mv2.all()


def test_mean_gate_breaks_contrast_tie():
    frames, true_pos, clone_pos = contrast_clone_sequence()
    p = LrtParams()
    wz = frames[1]
    refs = _refs([frames[0]], p)
    th = MatchThresholds.for_params(p.max_rank)
    by, bx = true_pos[0] // 16, true_pos[1] // 16
    want_clone = (clone_pos[0] - true_pos[0], clone_pos[1] - true_pos[1])
    plain = motion_search(transform(wz, p), block_means(wz), refs, th, search_range=64, mean_assist=False)
    gated = motion_search(transform(wz, p), block_means(wz), refs, th, search_range=64)
    assert tuple(plain.mv[by, bx]) == want_clone
    assert tuple(gated.mv[by, bx]) == (0, 0)
    assert plain.lsad1[by, bx] == gated.lsad2[by, bx] == 0


def exhaustive(wz_ranks, means, refs, block, rng_px, t1):
    """Scalar-loop MV1/MV2 for every block."""
    h, w = wz_ranks.shape
    res = {}
    for by in range(means.shape[0]):
        for bx in range(means.shape[1]):
            y0, x0 = by * block, bx * block
            bh, bw = min(block, h - y0), min(block, w - x0)
            target = wz_ranks[y0:y0 + bh, x0:x0 + bw]
            best1 = best2 = None
            for r, (frame, ranks) in enumerate(refs):
                for dy in range(-rng_px, rng_px + 1):
                    for dx in range(-rng_px, rng_px + 1):
                        cy, cx = y0 + dy, x0 + dx
                        if cy < 0 or cx < 0 or cy + bh > h or cx + bw > w:
                            continue
                        sad = rank_sad(target, ranks.ranks[cy:cy + bh, cx:cx + bw])
                        mean = frame[cy:cy + bh, cx:cx + bw].astype(float).mean()
                        if best1 is None or sad < best1[0]:
                            best1 = (sad, (dy, dx), r)
                        if abs(mean - means[by, bx]) < t1 and (best2 is None or sad < best2[0]):
                            best2 = (sad, (dy, dx), r)
            res[by, bx] = (best1, best2)
    return res


@given(st.integers(0, 2 ** 32 - 1), st.sampled_from(["full", "half"]), st.booleans())
def test_search_matches_exhaustive_oracle(seed, sampling, numpy_path):
    import os

    rng = np.random.default_rng(seed)
    base = rng.integers(0, 256, (20, 28), dtype=np.uint8)
    wz = np.roll(base, (1, -2), axis=(0, 1))
    other = np.clip(base.astype(int) + rng.integers(-20, 20), 0, 255).astype(np.uint8)
    p = LrtParams.for_sampling(1, -10, sampling)
    full = LrtParams(n=1, variant=p.variant)
    wz_r = transform(wz, p)
    means = block_means(wz, 8)
    refs = _refs([base, other], full)
    th = MatchThresholds.for_params(full.max_rank, sampling, 8, t1=6)
    old = os.environ.get("LRTDVC_SEARCH")
    os.environ["LRTDVC_SEARCH"] = "numpy" if numpy_path else ""
    try:
        mf = motion_search(wz_r, means, refs, th, search_range=3)
    finally:
        if old is None:
            os.environ.pop("LRTDVC_SEARCH")
        else:
            os.environ["LRTDVC_SEARCH"] = old
    oracle = exhaustive(wz_r.ranks, means.means, refs, 8, 3, 6)
    for (by, bx), (b1, b2) in oracle.items():
        assert mf.lsad1[by, bx] == b1[0]
        assert tuple(mf.mv1[by, bx]) == b1[1] and mf.ref1[by, bx] == b1[2]
        assert mf.mv2_valid[by, bx] == (b2 is not None)
        if b2 is not None:
            assert mf.lsad2[by, bx] == b2[0]
            assert tuple(mf.mv2[by, bx]) == b2[1] and mf.ref2[by, bx] == b2[2]
            assert mf.lsad1[by, bx] <= mf.lsad2[by, bx]
        else:
            assert np.isinf(mf.lsad2[by, bx])
        # gap gate, scaled by the block's share of a full block
        h = min(8, 20 - 8 * by) * min(8, 28 - 8 * bx)
        use2 = b2 is not None and abs(b2[0] - b1[0]) <= th.t2 * h / 64
        assert mf.used_mv2[by, bx] == use2
        assert tuple(mf.mv[by, bx]) == (b2[1] if use2 else b1[1])


def test_search_rejects_sampled_references(rng):
    f = rng.integers(0, 256, (16, 16), dtype=np.uint8)
    p = LrtParams()
    with pytest.raises(ValueError):
        motion_search(transform(f, p), block_means(f), [(f, sample_half(transform(f, p)))], MatchThresholds())
    with pytest.raises(ValueError):
        motion_search(transform(f, p), block_means(f), [], MatchThresholds())


def _field(mv, ref, block=16):
    rows, cols = ref.shape
    z = np.zeros((rows, cols))
    return MotionField(mv=mv, ref=ref, mv1=mv, ref1=ref, lsad1=z, mv2=mv, ref2=ref, lsad2=z,
                       mv2_valid=np.ones_like(ref, bool), used_mv2=np.ones_like(ref, bool), block_size=block)


def test_compensate_zero_field_copies_reference(rng):
    f = rng.integers(0, 256, (40, 40), dtype=np.uint8)
    mf = _field(np.zeros((3, 3, 2), int), np.zeros((3, 3), int))
    np.testing.assert_array_equal(compensate(mf, [f]), f)


def test_compensate_alternating_references(rng):
    a = rng.integers(0, 256, (32, 48), dtype=np.uint8)
    b = rng.integers(0, 256, (32, 48), dtype=np.uint8)
    ref = (np.indices((2, 3)).sum(axis=0) % 2).astype(int)
    mv = np.zeros((2, 3, 2), int)
    mv[0, 1] = (4, -3)
    si = compensate(_field(mv, ref), [a, b])
    expected = np.empty_like(a)
    for by in range(2):
        for bx in range(3):
            src = [a, b][ref[by, bx]]
            dy, dx = mv[by, bx]
            expected[16 * by:16 * by + 16, 16 * bx:16 * bx + 16] = src[16 * by + dy:16 * by + dy + 16,
                                                                         16 * bx + dx:16 * bx + dx + 16]
    np.testing.assert_array_equal(si, expected)


def test_search_is_deterministic_and_csv(tmp_path, rng):
    f = rng.integers(0, 256, (32, 32), dtype=np.uint8)
    g = np.roll(f, 3, axis=1)
    p = LrtParams()
    args = (transform(g, p), block_means(g), _refs([f, f], p), MatchThresholds.for_params(12))
    a, b = motion_search(*args), motion_search(*args)
    np.testing.assert_array_equal(a.mv, b.mv)
    np.testing.assert_array_equal(a.ref, b.ref)
    write_motion_csv(tmp_path / "m.csv", a)
    rows = list(csv.DictReader(open(tmp_path / "m.csv")))
    assert len(rows) == 4
    assert {"dy", "dx", "lsad1", "lsad2", "used_mv2"} <= set(rows[0])


def test_mean_grid_mismatch(rng):
    f = rng.integers(0, 256, (32, 32), dtype=np.uint8)
    p = LrtParams()
    with pytest.raises(ValueError):
        motion_search(transform(f, p), MeanGrid(np.zeros((1, 1), np.uint8)), _refs([f], p), MatchThresholds())
