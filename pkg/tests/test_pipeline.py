import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from imgattest.errors import BundleFormatError, DimensionMismatch, EmptyPipeline, InfeasibleLimit, ParseError
from imgattest.image import Image
from imgattest.pipeline import (
    ChainBundle, PipelineSpec, Segment, build_segment, estimate_cost, parse_pipeline, plan_segments, run_pipeline,
    verify_chain,
)
from imgattest.plonkish import check_constraints, next_pow2
from imgattest.poseidon import hash_image, hash_rows
from imgattest.transforms import spec as T
from imgattest.transforms.native import apply_all

EXAMPLE = """\
# the running example: crop, censor, white balance, sharpen, contrast, resize
source 160x120
crop x=8 y=6 w=144 h=108
censor rect x=10 y=10 w=30 h=20 oval cx=100 cy=60 rx=12 ry=8
whitebalance r=1.1 g=1.0 b=0.9
sharpen
contrast f=1.3
resize w=72 h=54
reveal image
"""

SAME_SIZE = ["flip axis=x", "flip axis=y", "rotate deg=180", "censor rect x=0 y=0 w=3 h=2", "contrast f=1.5",
             "whitebalance r=0.9 g=1.1 b=1.0", "blur", "sharpen", "rgb2ycbcr", "ycbcr2rgb", "translate dx=2 dy=-1"]


def pipeline(lines, size=(16, 12), reveal="image"):
    return parse_pipeline(f"source {size[0]}x{size[1]}\n" + "\n".join(lines) + f"\nreveal {reveal}\n")


def seg_cost(p, i, j):
    return estimate_cost(p.transforms[i:j], p.dims()[i]).estimated_peak_memory


def brute_force_min_segments(p, limit):
    n = len(p.transforms)
    best = None
    for mask in range(1 << (n - 1)):
        cuts = [0] + [i + 1 for i in range(n - 1) if mask >> i & 1] + [n]
        if all(seg_cost(p, a, b) <= limit for a, b in zip(cuts, cuts[1:])):
            k = len(cuts) - 1
            best = k if best is None else min(best, k)
    return best


# -- parsing ----------------------------------------------------------------------


def test_parse_example():
    p = parse_pipeline(EXAMPLE)
    assert p.source == (160, 120)
    assert [t.kind.value for t in p.transforms] == ["crop", "censor", "whitebalance", "sharpen", "contrast", "resize"]
    assert p.output_dims == (72, 54)
    assert p.reveal == "image"
    assert parse_pipeline(p.text()) == p


def test_parse_errors():
    with pytest.raises(EmptyPipeline):
        parse_pipeline("source 4x4\nreveal image\n")
    with pytest.raises(EmptyPipeline):
        parse_pipeline("")
    with pytest.raises(DimensionMismatch, match="line 3"):
        parse_pipeline("source 10x10\nflip axis=x\ncrop x=5 y=5 w=6 h=2\n")
    with pytest.raises(ParseError) as e:
        parse_pipeline("source 8x8\ncontrast f=1.0\ncontrast g=2\n")
    assert e.value.line == 3
    with pytest.raises(ParseError) as e:
        parse_pipeline("source 8x8\nblur\nwarp\n")
    assert (e.value.line, e.value.column) == (3, 1)
    with pytest.raises(ParseError):
        parse_pipeline("blur\n")
    with pytest.raises(ParseError):
        parse_pipeline("source 8x8\nblur\nreveal image\nsharpen\n")
    with pytest.raises(ParseError):
        parse_pipeline("source 8x8\ncensor rect x=1 y=1 w=2\n")
    with pytest.raises(ParseError):
        parse_pipeline("source 8x8\nreveal nothing\n")


def test_parse_reveal_hash_and_comments():
    p = parse_pipeline("source 4x3   # header\n\n  blur # smooth\nreveal hash\n")
    assert p.reveal == "hash" and len(p.transforms) == 1


# -- cost model -----------------------------------------------------------------


def test_cost_crop_without_hashes_is_table_bound():
    c = estimate_cost([T.crop(1, 1, 4, 4)], (8, 6), hash_in=False, hash_out=False)
    assert c.hash_rows == 0 and c.transform_rows == 0
    assert c.padded_rows == next_pow2(256 + 6)
    assert c.useful_rows < c.padded_rows


def test_input_hash_adds_exact_rows():
    for spec, dims in [(T.contrast(1.2), (8, 6)), (T.blur(), (20, 10)), (T.crop(0, 0, 3, 3), (5, 5))]:
        base = estimate_cost([spec], dims, hash_in=False, hash_out=False)
        with_in = estimate_cost([spec], dims, hash_in=True, hash_out=False)
        n_el = -(-dims[0] * dims[1] * 3 // 31)
        assert with_in.useful_rows - base.useful_rows == hash_rows(n_el)


def test_cost_fields_consistent():
    c = estimate_cost([T.blur()], (16, 12))
    assert c.padded_rows == next_pow2(c.useful_rows) or c.padded_rows >= 1 << 16
    assert c.estimated_cells == c.padded_rows * c.total_columns
    assert c.estimated_peak_memory == c.estimated_cells * 32 * 4
    assert c.to_dict()["estimated_cells"] == c.estimated_cells


def test_cost_matches_real_build():
    img = Image.random(16, 12, 1)
    seg = Segment(0, (T.sharpen(), T.contrast(1.4)), (16, 12), (16, 12), cost=None)
    built = build_segment(seg, img)
    est = estimate_cost(seg.transforms, (16, 12))
    assert (est.padded_rows, est.useful_rows) == (built.layout.rows, built.layout.used_rows)
    assert est.total_columns == len(built.layout.columns)


# -- planning ---------------------------------------------------------------------


def test_one_transform_one_segment():
    p = pipeline(["contrast f=2.0"])
    segs = plan_segments(p, 1 << 40)
    assert len(segs) == 1 and segs[0].in_dims == (16, 12)


def test_infeasible_limit_names_transform():
    p = pipeline(["flip axis=x", "contrast f=2.0"])
    with pytest.raises(InfeasibleLimit, match="transform 1"):
        plan_segments(p, 10)
    with pytest.raises(InfeasibleLimit):
        plan_segments(p, 0)


def test_five_transforms_three_segments():
    p = pipeline(["contrast f=1.3", "whitebalance r=1.1 g=1.0 b=0.9", "contrast f=0.7",
                  "whitebalance r=0.8 g=1.0 b=1.2", "contrast f=1.1"])
    n = len(p.transforms)
    pairs = max(seg_cost(p, i, i + 2) for i in range(n - 1))
    triples = min(seg_cost(p, i, i + 3) for i in range(n - 2))
    assert pairs < triples, "fixture no longer separates pairs from triples"
    segs = plan_segments(p, pairs)
    assert len(segs) == 3 == brute_force_min_segments(p, pairs)
    assert all(len(s.transforms) <= 2 for s in segs)


@given(st.lists(st.sampled_from(SAME_SIZE), min_size=1, max_size=5), st.data())
def test_greedy_matches_brute_force(lines, data):
    p = pipeline(lines, size=(12, 8))
    n = len(p.transforms)
    ladder = sorted({seg_cost(p, i, j) for i in range(n) for j in range(i + 1, n + 1)})
    limit = data.draw(st.sampled_from(ladder))
    singles = max(seg_cost(p, i, i + 1) for i in range(n))
    if limit < singles:
        with pytest.raises(InfeasibleLimit):
            plan_segments(p, limit)
        return
    segs = plan_segments(p, limit)
    assert [t for s in segs for t in s.transforms] == list(p.transforms)
    assert all(s.cost.estimated_peak_memory <= limit for s in segs)
    assert len(segs) == brute_force_min_segments(p, limit)


@given(st.lists(st.sampled_from(SAME_SIZE + ["crop x=0 y=0 w=6 h=4", "resize w=6 h=4"]), min_size=1, max_size=6))
def test_segment_count_monotone_in_limit(lines):
    p = pipeline(lines, size=(12, 8))
    n = len(p.transforms)
    costs = sorted({seg_cost(p, i, j) for i in range(n) for j in range(i + 1, n + 1)})
    counts = []
    for limit in costs:
        try:
            segs = plan_segments(p, limit)
        except InfeasibleLimit:
            continue
        assert all(s.cost.estimated_peak_memory <= limit for s in segs)
        assert [t for s in segs for t in s.transforms] == list(p.transforms)
        for a, b in zip(segs, segs[1:]):
            assert a.out_dims == b.in_dims
        counts.append(len(segs))
    assert counts == sorted(counts, reverse=True)
    assert counts[-1] == 1


# -- building -----------------------------------------------------------------------


def test_identity_crop_segment_hashes_agree():
    img = Image.random(10, 7, 2)
    b = build_segment(Segment(0, (T.crop(0, 0, 10, 7),), (10, 7), (10, 7), None), img)
    assert b.instance[0] == b.instance[1] == hash_image(img)


def test_contrast_segment():
    img = Image.random(32, 24, 3)
    b = build_segment(Segment(0, (T.contrast(2.0),), (32, 24), (32, 24), None), img)
    assert check_constraints(b.layout, b.witness, b.instance).satisfied
    assert b.instance[1] == hash_image(apply_all([T.contrast(2.0)], img))
    assert b.output == apply_all([T.contrast(2.0)], img)


def test_altered_intermediate_subpixel_detected():
    from imgattest import gadgets
    from imgattest.plonkish import CircuitBuilder
    from imgattest.transforms.synth import synthesize

    img = Image.random(8, 6, 4)
    b = CircuitBuilder()

    cells, _ = gadgets.pixel_entry(b, img.data)
    mid = synthesize(b, T.contrast(1.5), cells.reshape(6, 8, 3))
    synthesize(b, T.blur(), mid)
    lay = b.finalize()
    w = b.witness(lay)
    assert check_constraints(lay, w, []).satisfied
    k = int(mid.keys[2, 3, 1])
    w.set(k & 0xFFFFFFFF, k >> 32, (w.get(k & 0xFFFFFFFF, k >> 32) + 1) % 256)
    assert not check_constraints(lay, w, []).satisfied


def test_build_rejects_wrong_image_size():
    with pytest.raises(DimensionMismatch):
        build_segment(Segment(0, (T.blur(),), (8, 6), (8, 6), None), Image.random(6, 8, 0))


# -- chain protocol -----------------------------------------------------------------


CHAIN = ["crop x=1 y=1 w=14 h=10", "contrast f=1.4", "whitebalance r=1.1 g=1.0 b=0.9", "flip axis=y",
         "contrast f=0.8", "whitebalance r=0.9 g=1.0 b=1.2"]


def chain_limit(p):
    return max(seg_cost(p, i, i + 1) for i in range(len(p.transforms)))


@pytest.fixture(scope="module")
def chain():
    p = pipeline(CHAIN)
    img = Image.random(16, 12, 7)
    bundle = run_pipeline(img, p, chain_limit(p), threads=1)
    return p, img, bundle


def test_single_segment_pipeline():
    p = pipeline(["sharpen"])
    img = Image.random(16, 12, 8)
    b = run_pipeline(img, p, 1 << 40)
    assert len(b.segments) == 1
    assert b.source_digest == hash_image(img)
    assert b.final_image == apply_all(p.transforms, img)
    assert verify_chain(b).satisfied


def test_multi_segment_linkage(chain):
    p, img, b = chain
    assert len(b.segments) >= 3
    for a, c in zip(b.segments, b.segments[1:]):
        assert a.h_out == c.h_in
        assert a.out_dims == c.in_dims
    assert b.segments[0].h_in == hash_image(img)
    assert b.final_image == apply_all(p.transforms, img)
    assert b.segments[-1].h_out == hash_image(b.final_image)
    assert verify_chain(b).satisfied


def test_reveal_hash_carries_no_pixels():
    p = pipeline(["contrast f=0.5"], reveal="hash")
    img = Image.random(16, 12, 9)
    b = run_pipeline(img, p, 1 << 40)
    assert b.final_image is None
    raw = b.to_bytes()
    assert raw[6] & 1 == 0
    assert ChainBundle.from_bytes(raw).final_image is None
    assert verify_chain(b).satisfied


def test_threads_do_not_change_bundle(chain):
    p, img, b = chain
    assert run_pipeline(img, p, chain_limit(p), threads=3).to_bytes() == b.to_bytes()


def _checks(rep):
    return {v.location.get("check") for v in rep.violations}


def test_swapped_digests_rejected_at_linkage(chain):
    _, _, b = chain
    bad = ChainBundle.from_bytes(b.to_bytes())
    s0, s1 = bad.segments[0], bad.segments[1]
    s0.instance[1], s1.instance[0] = s1.instance[1], s0.instance[1]
    rep = verify_chain(bad)
    assert not rep.satisfied and "linkage" in _checks(rep)


def test_flipped_final_pixel_rejected(chain):
    _, _, b = chain
    bad = ChainBundle.from_bytes(b.to_bytes())
    bad.final_image.data[0, 0, 0] ^= 1
    rep = verify_chain(bad)
    assert _checks(rep) == {"final"}


def test_wrong_source_rejected(chain):
    _, _, b = chain
    bad = ChainBundle.from_bytes(b.to_bytes())
    bad.source_digest ^= 1
    assert _checks(verify_chain(bad)) == {"source"}


def test_unsatisfied_report_rejected(chain):
    from imgattest.pipeline import SegmentRecord, _binding
    from imgattest.plonkish import SatisfactionReport, Violation

    _, _, b = chain
    bad = ChainBundle.from_bytes(b.to_bytes())
    rec = bad.segments[1]
    rep = SatisfactionReport([Violation("gate", {"gate": 0, "row": 5}, "forged")])
    bad.segments[1] = SegmentRecord(rec.transforms, rec.in_dims, rec.out_dims, rec.layout_bytes, rec.instance, rep,
                                    _binding(rec.layout_bytes, rec.instance, rep, rec.transforms))
    out = verify_chain(bad)
    assert [v.kind for v in out.violations] == ["gate"]
    assert out.violations[0].location["segment"] == 1


def test_random_single_bit_tampers_rejected(chain):
    _, _, b = chain
    raw = b.to_bytes()
    rng = np.random.default_rng(10)
    for _ in range(40):
        bad = ChainBundle.from_bytes(raw)
        target = rng.integers(3)
        if target == 0:
            rec = bad.segments[rng.integers(len(bad.segments))]
            i = rng.integers(2)
            rec.instance[i] ^= 1 << int(rng.integers(250))
        elif target == 1:
            bad.source_digest ^= 1 << int(rng.integers(250))
        else:
            d = bad.final_image.data
            d[rng.integers(d.shape[0]), rng.integers(d.shape[1]), rng.integers(3)] ^= 1 << int(rng.integers(8))
        assert not verify_chain(bad).satisfied


def test_layout_or_transform_text_tamper_rejected(chain):
    _, _, b = chain
    bad = ChainBundle.from_bytes(b.to_bytes())
    rec = bad.segments[0]
    rec.transforms = rec.transforms + ("flip axis=x",)
    assert "proof" in _checks(verify_chain(bad))
    bad = ChainBundle.from_bytes(b.to_bytes())
    lb = bytearray(bad.segments[0].layout_bytes)
    lb[len(lb) // 2] ^= 4
    bad.segments[0].layout_bytes = bytes(lb)
    assert "proof" in _checks(verify_chain(bad))


# -- bundle format ------------------------------------------------------------------


def test_bundle_round_trip(chain):
    _, _, b = chain
    raw = b.to_bytes()
    assert raw[:4] == b"ZIMG"
    back = ChainBundle.from_bytes(raw)
    assert back.to_bytes() == raw
    assert back.final_image == b.final_image
    assert [r.instance for r in back.segments] == [r.instance for r in b.segments]
    doc = json.loads(b.to_json())
    assert doc["format"] == "ZIMG" and len(doc["segments"]) == len(b.segments)
    assert doc["segments"][0]["h_out"] == doc["segments"][1]["h_in"]


def test_bundle_decoding_errors(chain):
    _, _, b = chain
    raw = b.to_bytes()
    for broken in (raw[:-1], raw + b"\x00", b"ZIMX" + raw[4:], raw[:4] + b"\x02\x00" + raw[6:], raw[:40]):
        with pytest.raises(BundleFormatError):
            ChainBundle.from_bytes(broken)
    # non-canonical source digest (>= p)
    with pytest.raises(BundleFormatError):
        ChainBundle.from_bytes(raw[:7] + b"\xff" * 32 + raw[39:])


def test_end_to_end_matches_native_composition():
    p = parse_pipeline("source 40x30\ncrop x=2 y=1 w=36 h=27\n"
                       "censor rect x=2 y=2 w=5 h=4 oval cx=20 cy=15 rx=6 ry=4\n"
                       "whitebalance r=1.1 g=1.0 b=0.9\nsharpen\ncontrast f=1.3\nresize w=18 h=13\n")
    img = Image.random(40, 30, 11)
    b = run_pipeline(img, p, 1 << 40)
    assert b.final_image == apply_all(p.transforms, img)
    assert verify_chain(b).satisfied


def test_pipeline_rejects_wrong_image():
    with pytest.raises(DimensionMismatch):
        run_pipeline(Image.random(5, 5, 0), pipeline(["blur"]), 1 << 40)


def test_pipeline_spec_dims():
    p = PipelineSpec((10, 8), (T.rotate(90), T.crop(0, 0, 4, 4)))
    assert p.dims() == [(10, 8), (8, 10), (4, 4)]
