import csv
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lrtdvc.entropy import build_merge_map, merge_ranks
from lrtdvc.lrt import LrtParams, RankImage, transform
from lrtdvc.media_io import MeanGrid, block_means, psnr
from lrtdvc.reconstruction import (ReconParams, dlrtex, mean_shift, post_process, rank_fidelity,
                                   reconstruct_sampled, write_trace_csv)
from lrtdvc.synthetic import smooth_noise

P = LrtParams()
RP = ReconParams()


def natural(seed, h=48, w=64):
    return np.round(smooth_noise(h, w, sigma=2.0, seed=seed)).astype(np.uint8)


def test_rank_fidelity_identical_is_infinite(rng):
    r = RankImage(rng.integers(0, 13, (8, 8)).astype(np.int16), 12)
    assert rank_fidelity(r, r) == math.inf


def test_rank_fidelity_single_error_closed_form(rng):
    a = RankImage(np.full((10, 7), 12, np.int16), 12)
    b = RankImage(a.ranks.copy(), 12)
    b.ranks[3, 4] = 0
    assert rank_fidelity(a, b) == pytest.approx(10 * math.log10(70))


def test_rank_fidelity_monotone_and_geometry():
    a = RankImage(np.full((6, 6), 12, np.int16), 12)
    one, two = RankImage(a.ranks.copy(), 12), RankImage(a.ranks.copy(), 12)
    one.ranks[0, 0] = 10
    two.ranks[0, :2] = 10
    assert rank_fidelity(a, one) > rank_fidelity(a, two)
    with pytest.raises(ValueError):
        rank_fidelity(a, RankImage(np.zeros((5, 6), np.int16), 12))


def test_dlrtex_fixed_point_on_truth():
    f = natural(3)
    out, trace = dlrtex(transform(f, P), f, RP)
    np.testing.assert_array_equal(out, f)
    assert trace.changed == [0] and trace.stop == "fixed point"


def test_dlrtex_rank_null_space():
    ref = transform(np.full((20, 20), 110, np.uint8), P)
    si = np.full((20, 20), 100, np.uint8)
    out, trace = dlrtex(ref, si, RP)
    np.testing.assert_array_equal(out, si)
    assert trace.iterations == 0


@given(st.integers(0, 10_000), st.sampled_from([1, 2, 3]), st.booleans())
def test_dlrtex_trace_and_update_bounds(seed, step, merged):
    f = natural(seed, 32, 32)
    noise = np.random.default_rng(seed).integers(-8, 9, f.shape)
    si = np.clip(f.astype(int) + noise, 0, 255).astype(np.uint8)
    ref = transform(f, P)
    if merged:
        ref = merge_ranks(ref, build_merge_map(12))
    out, trace = dlrtex(ref, si, ReconParams(step=step))
    fid = trace.rank_psnr
    # non-decreasing up to the returned iterate, which is the running maximum
    assert all(b >= a for a, b in zip(fid[: trace.accepted], fid[1: trace.accepted + 1]))
    assert fid[trace.accepted] == max(fid)
    if trace.stop == "rank PSNR decreased":
        assert trace.accepted == trace.iterations - 1 and fid[-1] < fid[-2]
    moved = np.abs(out.astype(int) - si.astype(int))
    assert moved.max(initial=0) <= step * trace.accepted


def test_dlrtex_improves_noisy_si():
    f = natural(11)
    si = np.clip(f.astype(int) + np.random.default_rng(0).integers(-8, 9, f.shape), 0, 255).astype(np.uint8)
    out, trace = dlrtex(transform(f, P), si, RP)
    assert psnr(f, out) > psnr(f, si)
    assert trace.accepted >= 1


def test_dlrtex_rejects_mismatched_params():
    f = natural(1, 16, 16)
    with pytest.raises(ValueError):
        dlrtex(transform(f, LrtParams(n=1)), f, RP)
    with pytest.raises(ValueError):
        dlrtex(transform(f, P), f[:8], RP)


def _half(f):
    hp = LrtParams(variant="even", sampling="half")
    full = LrtParams(variant="even")
    return transform(f, hp), full, ReconParams(lrt=full)


def test_sampled_truth_copies_every_unknown_pixel():
    f = natural(5)
    ref, full, rp = _half(f)
    res = reconstruct_sampled(ref, f, transform(f, full), rp)
    unknown = ~ref.present
    np.testing.assert_array_equal(res.frame[unknown], f[unknown])
    assert res.low_motion.sum() == (~ref.present).sum()
    assert not res.high_motion.any()


def test_sampled_high_motion_takes_neighbour_mean():
    f = np.full((6, 6), 100, np.uint8)
    f[0, 2], f[2, 2], f[1, 1], f[1, 3] = 100, 104, 96, 100
    f[1, 2] = 7
    ref, full, _ = _half(f)
    rp = ReconParams(lrt=full, t3_fraction=0.0)
    res = reconstruct_sampled(ref, f, transform(f, full), rp)
    assert res.high_motion[1, 2]
    assert res.frame[1, 2] == 100


@given(st.integers(0, 10_000))
def test_sampled_stages_are_separated(seed):
    f = natural(seed, 24, 32)
    rng = np.random.default_rng(seed)
    si = np.clip(f.astype(int) + rng.integers(-6, 7, f.shape), 0, 255).astype(np.uint8)
    ref, full, _ = _half(f)
    rp = ReconParams(lrt=full, t3_fraction=0.0)
    res = reconstruct_sampled(ref, si, transform(si, full), rp)
    known = ref.present
    assert res.trace.rank_psnr[res.trace.accepted] == max(res.trace.rank_psnr)
    # with every unknown pixel averaged, SI intensities there never matter
    other = si.copy()
    other[~known] = rng.integers(0, 256, int((~known).sum()))
    res2 = reconstruct_sampled(ref, other, transform(si, full), rp)
    np.testing.assert_array_equal(res.frame, res2.frame)


def test_sampled_requires_half_input():
    f = natural(2, 16, 16)
    with pytest.raises(ValueError):
        reconstruct_sampled(transform(f, P), f, transform(f, P), RP)


def test_mean_shift_identity_and_clamp():
    f = natural(4, 32, 32)
    np.testing.assert_array_equal(mean_shift(f, block_means(f)), f)
    block = np.full((16, 16), 120, np.uint8)
    block[0, :3] = 253, 0, 107
    assert block_means(block).means[0, 0] == 120
    shifted = mean_shift(block, MeanGrid(np.array([[125]], np.uint8)))
    assert shifted[0, 0] == 255
    assert shifted[5, 5] == 125


def test_post_process_with_equal_means_is_dlrtex():
    f = natural(8)
    si = np.clip(f.astype(int) + 3, 0, 255).astype(np.uint8)
    ref = transform(f, P)
    a, _ = post_process(si, block_means(si), ref, RP)
    b, _ = dlrtex(ref, si, RP)
    np.testing.assert_array_equal(a, b)


def test_trace_csv(tmp_path):
    f = natural(9, 24, 24)
    si = np.clip(f.astype(int) + 5, 0, 255).astype(np.uint8)
    _, trace = dlrtex(transform(f, P), si, RP)
    write_trace_csv(tmp_path / "t.csv", trace)
    rows = list(csv.reader(open(tmp_path / "t.csv")))
    assert rows[0] == ["iteration", "rank_psnr", "changed_pixels"]
    assert len(rows) == len(trace.rank_psnr) + 1


def test_recon_params_validation():
    with pytest.raises(ValueError):
        ReconParams(step=0)
    with pytest.raises(ValueError):
        ReconParams(max_iterations=0)
