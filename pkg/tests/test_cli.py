import csv

import pytest

from lrtdvc.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main


@pytest.fixture
def clip(tmp_path):
    path = tmp_path / "clip.y4m"
    assert main(["synth", "--out", str(path), "--frames", "4", "--width", "48", "--height", "32"]) == EXIT_OK
    return path


def test_encode_decode_cost(tmp_path, clip, capsys):
    out = tmp_path / "s.lrtd"
    assert main(["encode", "--in", str(clip), "--out", str(out), "--keys", str(tmp_path / "keys"),
                 "--stats", str(tmp_path / "enc.csv"), "--ablate"]) == EXIT_OK
    assert "bits_no_merge" in open(tmp_path / "enc.csv").readline()
    assert main(["decode", "--in", str(out), "--keys", str(tmp_path / "keys"), "--ref", str(clip),
                 "--out", str(tmp_path / "rec"), "--stats", str(tmp_path / "dec.csv"),
                 "--trace-csv", str(tmp_path / "tr"), "--motion-csv", str(tmp_path / "mv"), "--ablate"]) == EXIT_OK
    assert len(list((tmp_path / "rec").glob("*.pgm"))) == 4
    assert len(list((tmp_path / "tr").glob("*.csv"))) == 2
    assert len(list((tmp_path / "mv").glob("*.csv"))) == 2
    rows = list(csv.DictReader(open(tmp_path / "dec.csv")))
    assert [r["role"] for r in rows] == ["key", "wz", "key", "wz"]
    assert "post_psnr_no_mean_assist" in rows[0]
    assert main(["cost", "--in", str(tmp_path / "dec.csv"), "--out", str(tmp_path / "cost.csv")]) == EXIT_OK
    assert "pi_ldpc_23" in open(tmp_path / "cost.csv").readline()
    assert "power_lrt=" in capsys.readouterr().out


def test_sampled_no_merge_options(tmp_path, clip):
    out = tmp_path / "h.lrtd"
    assert main(["encode", "--in", str(clip), "--out", str(out), "--sampling", "half", "--n", "1",
                 "--no-merge"]) == EXIT_OK
    assert main(["decode", "--in", str(out), "--no-mean-assist", "--no-postprocess", "--interpolate-me",
                 "--step", "3"]) == EXIT_OK


def test_sweep(tmp_path, clip):
    assert main(["sweep", "--in", str(clip), "--n-values", "1", "--out", str(tmp_path / "sw.csv")]) == EXIT_OK
    rows = list(csv.DictReader(open(tmp_path / "sw.csv")))
    assert [(r["sampling"], r["n"]) for r in rows] == [("half", "1"), ("full", "1")]
    assert float(rows[0]["kbps"]) < float(rows[1]["kbps"])


def test_exit_codes(tmp_path, clip):
    assert main(["decode", "--in", str(tmp_path / "missing.lrtd")]) == EXIT_DATA
    (tmp_path / "junk.lrtd").write_bytes(b"not a stream at all")
    assert main(["decode", "--in", str(tmp_path / "junk.lrtd")]) == EXIT_DATA
    with pytest.raises(SystemExit) as exc:
        main(["encode", "--in", str(clip)])
    assert exc.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == EXIT_USAGE
    assert main(["encode", "--in", str(clip), "--out", str(tmp_path / "x"), "--gop", "1"]) == EXIT_USAGE
    (tmp_path / "raw.yuv").write_bytes(bytes(100))
    assert main(["encode", "--in", str(tmp_path / "raw.yuv"), "--out", str(tmp_path / "y")]) == EXIT_DATA
