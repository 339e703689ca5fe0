import inspect
import struct

import numpy as np
import pytest

from lrtdvc.entropy import BitstreamError, WzBitstream, build_merge_map, merge_ranks
from lrtdvc.lrt import LrtParams, transform
from lrtdvc.pipeline import (CodecConfig, FrameStats, decode_sequence, encode_sequence, merge_ablation,
                             read_container, read_stats_csv, reference_keys, report, write_container,
                             write_stats_csv)
from lrtdvc.synthetic import moving_texture


@pytest.fixture(scope="module")
def seq():
    return moving_texture(5, 64, 48, seed=7)


def test_gop_cadence(seq):
    enc, stats = encode_sequence(seq[:4], CodecConfig())
    assert [s.role for s in stats] == ["key", "wz", "key", "wz"]
    assert sum(isinstance(f, WzBitstream) for f in enc.frames) == 2
    assert all(s.bits > 0 for s in stats)


def test_qcif_mean_stream_budget():
    frames = moving_texture(2)
    _, stats = encode_sequence(frames, CodecConfig())
    assert stats[1].mean_bits == 792


def test_encoder_is_feedback_free_and_deterministic(seq, tmp_path):
    assert list(inspect.signature(encode_sequence).parameters) == ["frames", "cfg"]
    cfg = CodecConfig()
    a, _ = encode_sequence(seq, cfg)
    b, _ = encode_sequence([f.copy() for f in seq], CodecConfig(threads=1))
    write_container(tmp_path / "a.lrtd", a)
    write_container(tmp_path / "b.lrtd", b)
    assert (tmp_path / "a.lrtd").read_bytes() == (tmp_path / "b.lrtd").read_bytes()


@pytest.mark.parametrize("sampling", ["full", "half"])
def test_decode_recovers_merged_ranks(seq, sampling):
    lrt = LrtParams.for_sampling(2, -10, sampling)
    cfg = CodecConfig(lrt=lrt)
    enc, _ = encode_sequence(seq, cfg)
    _, stats, decoded = decode_sequence(enc, cfg, seq, keep=True)
    for i, d in decoded.items():
        assert d.ranks == merge_ranks(transform(seq[i], lrt), build_merge_map(lrt.max_rank))
        assert d.beta == stats[i].beta


def test_static_sequence_is_exact():
    frame = moving_texture(1, 48, 32)[0]
    frames = [frame] * 3
    cfg = CodecConfig()
    enc, _ = encode_sequence(frames, cfg)
    out, stats, decoded = decode_sequence(enc, cfg, frames, keep=True)
    np.testing.assert_array_equal(out[1], frame)
    assert (decoded[1].motion.mv == 0).all()
    np.testing.assert_array_equal(decoded[1].si, frame)
    assert decoded[1].trace.changed == [0]
    assert stats[1].post_psnr == np.inf


def test_reference_keys():
    assert reference_keys(1, 5, 2) == [0, 2]
    assert reference_keys(3, 4, 2) == [2]
    assert reference_keys(4, 9, 3) == [3, 6]
    assert reference_keys(5, 6, 3) == [3]
    with pytest.raises(ValueError):
        reference_keys(2, 5, 2)


def test_only_adjacent_keys_are_used(seq):
    cfg = CodecConfig()
    enc, _ = encode_sequence(seq, cfg)
    out, _, _ = decode_sequence(enc, cfg)
    enc.frames[4] = np.zeros_like(enc.frames[4])
    out2, _, _ = decode_sequence(enc, cfg)
    np.testing.assert_array_equal(out[1], out2[1])
    assert not np.array_equal(out[3], out2[3])


def test_thread_count_does_not_change_output(seq):
    enc, _ = encode_sequence(seq, CodecConfig())
    a, _, _ = decode_sequence(enc, CodecConfig(threads=1))
    b, _, _ = decode_sequence(enc, CodecConfig(threads=4))
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)


def test_container_embedded_and_sidecar(seq, tmp_path):
    enc, stats = encode_sequence(seq, CodecConfig())
    size = write_container(tmp_path / "e.lrtd", enc)
    assert size == (tmp_path / "e.lrtd").stat().st_size
    back = read_container(tmp_path / "e.lrtd")
    np.testing.assert_array_equal(back.frames[2], seq[2])
    write_container(tmp_path / "s.lrtd", enc, tmp_path / "keys")
    assert sorted(p.name for p in (tmp_path / "keys").iterdir()) == ["key_00000.pgm", "key_00002.pgm",
                                                                     "key_00004.pgm"]
    back = read_container(tmp_path / "s.lrtd", tmp_path / "keys")
    np.testing.assert_array_equal(back.frames[4], seq[4])
    with pytest.raises(FileNotFoundError):
        read_container(tmp_path / "s.lrtd")
    # rate accounting: WZ bits in the stats are exactly the WZ payload bytes in the file
    blob = (tmp_path / "s.lrtd").read_bytes()
    pos, wz_bytes = 16, 0
    for _ in range(len(seq)):
        role, length = struct.unpack_from("<BI", blob, pos)
        pos += 5 + length
        wz_bytes += length if role == 1 else 0
    assert pos == len(blob)
    assert sum(s.bits for s in stats if s.role == "wz") == 8 * wz_bytes


def test_container_errors(seq, tmp_path):
    enc, _ = encode_sequence(seq[:3], CodecConfig())
    write_container(tmp_path / "a.lrtd", enc)
    blob = (tmp_path / "a.lrtd").read_bytes()
    for i, bad in enumerate([b"XXXX" + blob[4:], blob[:-1], blob + b"\x00", blob[:10]]):
        (tmp_path / f"bad{i}").write_bytes(bad)
        with pytest.raises(BitstreamError):
            read_container(tmp_path / f"bad{i}")
    swapped = bytearray(blob)
    swapped[16] = 1  # first frame claims to be WZ
    (tmp_path / "swap").write_bytes(bytes(swapped))
    with pytest.raises(BitstreamError):
        read_container(tmp_path / "swap")


def test_report_rates_and_ablation_columns(tmp_path):
    stats = [FrameStats(index=0, role="key", bits=8 * 25344)]
    stats += [FrameStats(index=i, role="wz", bits=40817, post_psnr=35.0) for i in (1, 3)]
    s = report(stats, tmp_path / "s.csv")
    assert s["kbps"] == pytest.approx(40817 * 15 / 1000)
    assert not any(k.endswith("_avg") for k in s)
    header = open(tmp_path / "s.csv").readline().strip().split(",")
    assert "bits_no_merge" not in header
    stats[1].ablation["bits_no_merge"] = 50375
    s = report(stats, tmp_path / "t.csv")
    assert s["bits_no_merge_avg"] == 50375
    assert "bits_no_merge" in open(tmp_path / "t.csv").readline()
    with_keys = report(stats, include_key_bits=True)
    assert with_keys["avg_bits"] == pytest.approx((8 * 25344 + 2 * 40817) / 3)
    with pytest.raises(ValueError):
        report([])


def test_stats_csv_roundtrip(seq, tmp_path):
    cfg = CodecConfig()
    enc, _ = encode_sequence(seq, cfg)
    _, stats, _ = decode_sequence(enc, cfg, seq)
    merge_ablation(seq, cfg, stats)
    write_stats_csv(tmp_path / "s.csv", stats)
    back = read_stats_csv(tmp_path / "s.csv")
    for a, b in zip(stats, back):
        assert (a.index, a.role, a.bits, a.beta, a.pixels) == (b.index, b.role, b.bits, b.beta, b.pixels)
        assert a.post_psnr == pytest.approx(b.post_psnr)
        assert a.ablation == b.ablation
    assert all(s.ablation["bits_no_merge"] >= s.bits for s in stats if s.role == "wz")
    assert all(s.ablation["beta_lowest_plane"] >= s.beta for s in stats if s.role == "wz")


def test_config_validation():
    with pytest.raises(ValueError):
        CodecConfig(gop=1)
    with pytest.raises(ValueError):
        CodecConfig(threads=0)
    with pytest.raises(ValueError):
        encode_sequence([], CodecConfig())
