import numpy as np
import pytest

from hevcface import featimg
from hevcface.errors import EmptyRecordList, FormatError, TilingGap
from hevcface.featimg import (FeatureImage, assemble, fimg_bytes, from_parse, map_bn, map_ipm,
                              map_pus, parse_fimg, ppm_bytes)
from hevcface.syntax import PuRecord

import helpers


def quad_records(bins=(1, 2, 3, 4)):
    return [PuRecord(0, 0, 32, 0, bins[0]), PuRecord(32, 0, 32, 10, bins[1]),
            PuRecord(0, 32, 32, 26, bins[2]), PuRecord(32, 32, 32, 34, bins[3])]


def test_map_ipm_examples():
    assert map_ipm(0) == 0
    assert map_ipm(34) == 255
    assert map_ipm(17) == 128


def test_map_ipm_injective_and_monotone():
    vals = [map_ipm(m) for m in range(35)]
    assert len(set(vals)) == 35
    assert vals == sorted(vals)
    # independent half-up rounding in exact rational arithmetic
    from fractions import Fraction
    import math
    assert vals == [math.floor(Fraction(m * 255, 34) + Fraction(1, 2)) for m in range(35)]


@pytest.mark.parametrize("bad", [-1, 35])
def test_map_ipm_range(bad):
    with pytest.raises(ValueError):
        map_ipm(bad)


def test_map_pus():
    assert {s: map_pus(s) for s in (4, 8, 16, 32)} == {4: 0, 8: 85, 16: 170, 32: 255}
    with pytest.raises(ValueError):
        map_pus(64)


def test_map_bn_examples():
    recs = [PuRecord(0, 0, 4, 0, b) for b in (5, 25, 15)]
    assert map_bn(recs) == [0, 255, 128]
    assert map_bn([PuRecord(0, 0, 4, 0, 7)] * 3) == [0, 0, 0]
    with pytest.raises(EmptyRecordList):
        map_bn([])


def test_map_bn_monotone():
    rng = np.random.default_rng(1)
    bins = rng.integers(0, 500, 200)
    vals = map_bn([PuRecord(0, 0, 4, 0, int(b)) for b in bins])
    order = np.argsort(bins, kind="stable")
    assert all(vals[order[i]] <= vals[order[i + 1]] for i in range(len(order) - 1))
    assert min(vals) == 0 and max(vals) == 255


def test_assemble_quadrants():
    img = assemble(quad_records(), 64, 64, 32)
    assert img.ipm_plane.shape == img.pus_plane.shape == img.bn_plane.shape == (64, 64)
    assert img.ipm_plane.dtype == np.uint8
    for plane in img.planes():
        for ys in (slice(0, 32), slice(32, 64)):
            for xs in (slice(0, 32), slice(32, 64)):
                assert len(np.unique(plane[ys, xs])) == 1
    assert img.ipm_plane[0, 0] == 0 and img.ipm_plane[63, 63] == 255
    assert img.ipm_plane[0, 40] == map_ipm(10)
    assert np.all(img.pus_plane == 255)
    assert img.bn_plane[0, 0] == 0 and img.bn_plane[63, 63] == 255


def test_assemble_rejects_gaps_and_overlaps():
    recs = quad_records()
    with pytest.raises(TilingGap):
        assemble(recs[:3], 64, 64, 32)
    with pytest.raises(TilingGap):
        assemble(recs + [PuRecord(0, 0, 4, 0, 1)], 64, 64, 32)
    with pytest.raises(TilingGap):
        assemble(recs[:3] + [PuRecord(48, 48, 32, 0, 1)], 64, 64, 32)


def test_stream_feature_image_matches_trace_oracle():
    """Independent mapping of the reference trace reproduces the IPM and PUS planes."""
    name = "face_64_qp22"
    img = from_parse(helpers.parsed(name)[0])
    ipm = np.zeros((64, 64), np.uint8)
    pus = np.zeros((64, 64), np.uint8)
    for x, y, s, m in helpers.ref_records(helpers.trace(name)["slices"][0]["cus"]):
        ipm[y:y + s, x:x + s] = int(m * 255 / 34 + 0.5)
        pus[y:y + s, x:x + s] = {4: 0, 8: 85, 16: 170, 32: 255}[s]
    assert np.array_equal(img.ipm_plane, ipm)
    assert np.array_equal(img.pus_plane, pus)


def test_piecewise_constant_per_pu():
    pic = helpers.parsed("scene_128_qp32")[0]
    img = from_parse(pic)
    bn = dict(zip(pic.records, map_bn(pic.records)))
    for r in pic.records:
        block = img.stacked()[r.y:r.y + r.size, r.x:r.x + r.size].reshape(-1, 3)
        assert np.all(block == [map_ipm(r.ipm), map_pus(r.size), bn[r]])


def test_assembly_is_deterministic():
    a = fimg_bytes(from_parse(helpers.parsed("face_128_qp42")[0]))
    b = fimg_bytes(from_parse(helpers.parsed("face_128_qp42")[0]))
    assert a == b


def test_fimg_layout():
    img = assemble(quad_records(), 64, 64, 22)
    data = fimg_bytes(img)
    assert data[:4] == b"FIMG"
    assert data[4] == 1
    assert int.from_bytes(data[5:7], "little") == 64
    assert int.from_bytes(data[7:9], "little") == 64
    assert data[9] == 22 and data[10] == 0
    assert len(data) == 11 + 3 * 64 * 64
    # planes in IPM, PUS, BN order, row-major
    assert data[11:11 + 4096] == img.ipm_plane.tobytes()
    assert data[11 + 8192:] == img.bn_plane.tobytes()


@pytest.mark.parametrize("compact", [False, True])
def test_fimg_round_trip(tmp_path, compact):
    img = from_parse(helpers.parsed("face_136x80_qp30")[0])
    path = tmp_path / "a.fimg"
    featimg.save_fimg(path, img, compact=compact)
    back = featimg.load_fimg(path)
    assert back == img
    assert back.compact == compact
    featimg.save_fimg(tmp_path / "b.fimg", back)
    assert (tmp_path / "b.fimg").read_bytes() == path.read_bytes()


def test_compact_is_one_sixteenth():
    img = from_parse(helpers.parsed("face_128_qp22")[0])
    assert len(fimg_bytes(img, compact=True)) == 11 + 3 * 128 * 128 // 16


def test_compact_requires_block_constant_planes():
    z = np.zeros((8, 8), np.uint8)
    noisy = z.copy()
    noisy[1, 1] = 9
    with pytest.raises(FormatError):
        fimg_bytes(FeatureImage(8, 8, noisy, z, z, 32), compact=True)


@pytest.mark.parametrize("mutate", [
    lambda d: b"FIMX" + d[4:],
    lambda d: d[:4] + b"\x02" + d[5:],
    lambda d: d[:10] + b"\x04" + d[11:],
    lambda d: d[:-1],
    lambda d: d + b"\x00",
    lambda d: d[:6],
])
def test_fimg_malformed(mutate):
    data = fimg_bytes(assemble(quad_records(), 64, 64, 32))
    with pytest.raises(FormatError):
        parse_fimg(mutate(data))


def test_as_input_scaling_and_order():
    img = assemble(quad_records(), 64, 64, 32)
    x = img.as_input()
    assert x.shape == (64, 64, 3) and x.dtype == np.float32
    assert x.min() >= 0 and x.max() <= 1
    assert x[63, 63, 0] == 1.0 and x[0, 0, 0] == 0.0
    assert img.as_input(np.float64).dtype == np.float64


def test_ppm_export():
    img = assemble(quad_records(), 64, 64, 32)
    data = ppm_bytes(img)
    header = b"P6\n64 64\n255\n"
    assert data.startswith(header)
    px = np.frombuffer(data[len(header):], np.uint8).reshape(64, 64, 3)
    assert np.array_equal(px, img.stacked())
