# SPDX-License-Identifier: Apache-2.0
import json
import pathlib
import struct

import numpy as np
import pytest

import makeup_forge as mf

FIXTURES = pathlib.Path(__file__).resolve().parents[2] / "tests" / "fixtures"


def test_image_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    img = rng.integers(0, 256, size=(9, 17, 3), dtype=np.uint8)
    mf.save_image(img, tmp_path / "a.png")
    np.testing.assert_array_equal(mf.load_image(tmp_path / "a.png"), img)


def test_fixture_decode_errors():
    with pytest.raises(mf.ForgeError, match="unsupported bit depth"):
        mf.load_image(FIXTURES / "edge" / "gray16_8x8.png")
    with pytest.raises(mf.ForgeError):
        mf.load_image(FIXTURES / "edge" / "truncated.png")


def test_mask_ops_match_numpy():
    rng = np.random.default_rng(1)
    a = (rng.random((30, 20)) < 0.4).astype(np.uint8)
    b = (rng.random((30, 20)) < 0.6).astype(np.uint8)
    assert mf.non_overlap_count(a, b) == int(np.sum(a != b))
    assert mf.area(a) == int(a.sum())


def test_metrics():
    rng = np.random.default_rng(2)
    img = rng.integers(0, 256, size=(32, 32, 3), dtype=np.uint8)
    face = np.zeros((32, 32), dtype=np.uint8)
    face[8:24, 8:24] = 1
    assert mf.ssim(img, img) == 1.0
    assert mf.l2m(img, img, face) == 0.0
    assert mf.clip_i([1, 2, 2], [2, 1, 2]) == pytest.approx(8 / 9)


def test_embedding_layout(tmp_path):
    mf.write_embedding([1.0, 2.0, 2.0], tmp_path / "e.emb")
    raw = (tmp_path / "e.emb").read_bytes()
    assert raw[:4] == b"EMB1"
    assert struct.unpack("<I", raw[4:8])[0] == 3
    assert mf.read_embedding(tmp_path / "e.emb") == [1.0, 2.0, 2.0]


def test_filters_on_arrays():
    src = np.full((64, 64, 3), 100, dtype=np.uint8)
    face = np.zeros((64, 64), dtype=np.uint8)
    face[16:48, 16:48] = 1
    gen = src.copy()
    gen[16:48, 16:48, 0] += 60
    v = mf.makeup_failed_filter(src, gen, face)
    assert v["passed"] and v["filter_name"] == "makeup_failed"
    assert mf.background_filter(src, gen, face)["passed"]
    masks = {"face": face, "eyes": face, "teeth": face, "contour": face}
    assert mf.misalignment_filter(masks, masks)["statistic"] == 0.0
    with pytest.raises(mf.ForgeError):
        mf.makeup_failed_filter(src, gen, face, {"mu_pixel_thresh": 3})


def test_pipeline_end_to_end(tmp_path):
    manifest = mf.gen_corpus(tmp_path / "c", seed=42, counts="clean=3,misaligned=3", dims="64x64")
    summary = mf.filter_manifest(manifest, tmp_path / "out.jsonl", workers=2)
    assert summary == {"total": 6, "passed": 3, "failed": 3, "errors": 0}
    rep = mf.report(tmp_path / "out.jsonl")
    assert rep["pass_rate_percent"] == 50.0
    lines = (tmp_path / "out.jsonl").read_text().splitlines()
    assert [json.loads(l)["label"] for l in lines].count("clean") == 3


def test_inject_check():
    rows = mf.inject_check(0)
    assert len(rows) == 13
    assert all(r["passed"] for r in rows)
