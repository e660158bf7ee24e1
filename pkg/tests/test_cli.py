import json
import re

import numpy as np
import pytest

from imgattest.bundle import bundle_from_bytes, bundle_to_bytes
from imgattest.cli import main, parse_size
from imgattest.image import Image, read_image, save_ppm, write_image
from imgattest.poseidon import digest_hex, hash_image


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def files(tmp_path):
    img = Image.random(64, 48, 11)
    ipath = tmp_path / "in.ppm"
    write_image(ipath, img)
    ppath = tmp_path / "p.txt"
    ppath.write_text("source 64x48\ncrop x=4 y=2 w=40 h=30\ncontrast f=1.5\n")
    return tmp_path, img, ipath, ppath


def test_parse_size_units():
    assert parse_size("512MiB") == 512 << 20
    assert parse_size("8GiB") == 8 << 30
    assert parse_size("1000000") == 1_000_000
    assert parse_size("1kb") == 1000


def test_plan_big_limit_single_segment(capsys, files):
    _, _, _, ppath = files
    code, out, _ = run(capsys, "plan", ppath, "--mem-limit", "1TiB")
    assert code == 0
    doc = json.loads(out)
    assert len(doc["segments"]) == 1
    assert doc["source"] == [64, 48]


def test_plan_tiny_limit_infeasible(capsys, files):
    _, _, _, ppath = files
    code, _, err = run(capsys, "plan", ppath, "--mem-limit", "1")
    assert code == 3
    assert "infeasible" in err


def test_plan_malformed_reports_line(capsys, tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("source 8x8\ncontrast f=1.2\nwarp q=3\n")
    code, _, err = run(capsys, "plan", p)
    assert code == 2
    assert "3" in err


def test_missing_file_and_bad_args(capsys, tmp_path):
    assert run(capsys, "plan", tmp_path / "nope.txt")[0] == 2
    assert run(capsys, "plan")[0] == 2
    assert run(capsys, "plan", tmp_path / "x", "--mem-limit", "lots")[0] == 2


def test_prove_verify_roundtrip(capsys, files):
    d, img, ipath, ppath = files
    bpath = d / "out.zimg"
    jpath = d / "out.json"
    code, out, _ = run(capsys, "prove", ppath, ipath, "-o", bpath, "--json", jpath)
    assert code == 0
    assert "segment 0" in out
    assert json.loads(jpath.read_text())["format"] == "ZIMG"
    code, out, _ = run(capsys, "verify", bpath)
    assert code == 0 and out.startswith("OK")
    src = digest_hex(hash_image(img))
    assert run(capsys, "verify", bpath, "--source-digest", src)[0] == 0
    other = "0" * 63 + "1"
    code, out, _ = run(capsys, "verify", bpath, "--source-digest", other)
    assert code == 1 and "REJECTED" in out
    assert run(capsys, "verify", bpath, "--source-digest", "zz")[0] == 2


def test_prove_dimension_mismatch(capsys, files):
    d, _, _, ppath = files
    small = d / "small.ppm"
    write_image(small, Image.random(32, 24, 1))
    assert run(capsys, "prove", ppath, small, "-o", d / "b.zimg")[0] == 2


def test_reveal_hash_bundle_has_no_image(capsys, files):
    d, _, ipath, _ = files
    p = d / "h.txt"
    p.write_text("source 64x48\ncrop x=4 y=2 w=40 h=30\ncontrast f=1.5\nreveal hash\n")
    bpath = d / "h.zimg"
    assert run(capsys, "prove", p, ipath, "-o", bpath)[0] == 0
    b = bundle_from_bytes(bpath.read_bytes())
    assert b.final_image is None
    assert run(capsys, "verify", bpath)[0] == 0


@pytest.fixture
def proven(capsys, files):
    d, _, ipath, _ = files
    p = d / "h.txt"
    p.write_text("source 64x48\ncrop x=4 y=2 w=40 h=30\ncontrast f=1.5\nreveal hash\n")
    bpath = d / "h.zimg"
    assert run(capsys, "prove", p, ipath, "-o", bpath)[0] == 0
    return bpath


def test_flipped_binding_byte_rejected(capsys, proven):
    data = bytearray(proven.read_bytes())
    data[-1] ^= 0x01  # last segment binding, no image follows
    proven.write_bytes(bytes(data))
    code, out, _ = run(capsys, "verify", proven)
    assert code == 1
    assert "segment 0" in out


def test_altered_instance_digest_rejected(capsys, proven):
    b = bundle_from_bytes(proven.read_bytes())
    b.segments[0].instance[-1] = (b.segments[0].instance[-1] + 1) % (1 << 250)
    proven.write_bytes(bundle_to_bytes(b))
    code, out, _ = run(capsys, "verify", proven)
    assert code == 1
    assert "segment 0" in out


def test_truncated_bundle_is_input_error(capsys, proven):
    proven.write_bytes(proven.read_bytes()[:-7])
    code, _, err = run(capsys, "verify", proven)
    assert code == 2
    assert "truncated" in err


def test_hash_deterministic(capsys, files):
    _, img, ipath, _ = files
    code, out1, _ = run(capsys, "hash", ipath)
    assert code == 0
    _, out2, _ = run(capsys, "hash", ipath)
    assert out1 == out2
    assert re.fullmatch(r"[0-9a-f]{64}\n", out1)
    assert out1.strip() == digest_hex(hash_image(img))


def test_hash_directory_is_input_error(capsys, tmp_path):
    assert run(capsys, "hash", tmp_path)[0] == 2


def test_apply_identity_crop_byte_identical(capsys, files):
    d, _, ipath, _ = files
    p = d / "id.txt"
    p.write_text("source 64x48\ncrop x=0 y=0 w=64 h=48\n")
    out = d / "o.ppm"
    assert run(capsys, "apply", p, ipath, "-o", out)[0] == 0
    assert out.read_bytes() == ipath.read_bytes()


def test_apply_matches_native(capsys, files):
    d, img, ipath, ppath = files
    out = d / "o.ppm"
    assert run(capsys, "apply", ppath, ipath, "-o", out)[0] == 0
    got = read_image(out)
    assert got.dims == (40, 30)
    lut = np.clip(np.floor(128 + 1.5 * (np.arange(256) - 128) + 0.5), 0, 255).astype(np.uint8)
    assert np.array_equal(got.data, lut[img.data[2:32, 4:44]])


def test_apply_invalid_param(capsys, files):
    d, _, ipath, _ = files
    p = d / "bad.txt"
    p.write_text("source 64x48\ncontrast f=abc\n")
    assert run(capsys, "apply", p, ipath, "-o", d / "o.ppm")[0] == 2


def _bench(capsys, *argv):
    code, out, _ = run(capsys, "bench", *argv)
    assert code == 0
    head, row = out.strip().splitlines()
    return dict(zip(head.split(","), row.split(",")))


def test_bench_contrast_padded_rows_power_of_two(capsys):
    r = _bench(capsys, "contrast", "64x48")
    n = int(r["padded_rows"])
    assert n & (n - 1) == 0
    assert r["satisfied"] == "true"
    assert int(r["gates_hash"]) > 0


def test_bench_crop_without_hash_has_no_transform_gates(capsys):
    r = _bench(capsys, "crop", "1280x720", "--hash", "none", "--dry")
    assert int(r["gates_transform"]) == 0
    assert int(r["hash_rows"]) == 0


def test_bench_errors(capsys):
    assert run(capsys, "bench", "warp", "8x8")[0] == 2
    assert run(capsys, "bench", "contrast", "8by8")[0] == 2
    assert run(capsys, "bench", "contrast", "0x8")[0] == 2


def test_ppm_input_bytes_stable(tmp_path):
    img = Image.random(5, 3, 2)
    data = save_ppm(img)
    assert data.startswith(b"P6\n5 3\n255\n")
    assert len(data) == 11 + 45
