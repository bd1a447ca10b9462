import pytest

from hevcface.bitio import NAL_IDR_N_LP, NAL_PPS, NAL_SPS, NAL_VPS, BitWriter, split_annexb
from hevcface.errors import MalformedCode, UnsupportedFeature
from hevcface.paramsets import parse_pps, parse_slice_header, parse_sps, parse_vps

import helpers


def stream_sets(name):
    units = split_annexb(helpers.stream_bytes(name))
    by_type = {}
    for u in units:
        by_type.setdefault(u.nal_unit_type, u)
    return units, by_type


def test_reference_64_qp32_sps():
    _, t = stream_sets("face_64_qp32")
    sps = parse_sps(t[NAL_SPS])
    assert (sps.pic_width_luma, sps.pic_height_luma, sps.ctb_log2_size) == (64, 64, 6)
    assert sps.min_cb_log2_size == 3
    assert sps.chroma_format == "4:2:0"
    assert sps.bit_depth_luma == sps.bit_depth_chroma == 8
    assert not sps.sao_enabled


def test_reference_pps_and_slice():
    units, t = stream_sets("face_64_qp32")
    parse_vps(t[NAL_VPS])
    sps = parse_sps(t[NAL_SPS])
    pps = parse_pps(t[NAL_PPS])
    assert not pps.tiles_enabled and not pps.entropy_sync_enabled
    assert pps.sign_data_hiding_enabled
    sl = next(u for u in units if u.is_slice)
    header, reader = parse_slice_header(sl, sps, pps)
    assert header.slice_type == "I"
    assert header.slice_qp == 32
    assert reader.byte_aligned()
    assert reader.bits_left > 0


@pytest.mark.parametrize("name, qp", [("face_64_qp22", 22), ("scene_128_qp42", 42),
                                      ("face_128_qp32", 32), ("noise_64_qp12", 12)])
def test_slice_qp_matches_encode_qp(name, qp):
    units, t = stream_sets(name)
    sps, pps = parse_sps(t[NAL_SPS]), parse_pps(t[NAL_PPS])
    header, _ = parse_slice_header(next(u for u in units if u.is_slice), sps, pps)
    assert header.slice_qp == qp


def test_ctu_size_from_stream():
    _, t = stream_sets("cat_64_qp37_ctu16")
    assert parse_sps(t[NAL_SPS]).ctb_log2_size == 4


def test_parse_is_deterministic():
    _, t = stream_sets("scene_64_qp22")
    assert parse_sps(t[NAL_SPS]) == parse_sps(t[NAL_SPS])
    assert parse_pps(t[NAL_PPS]) == parse_pps(t[NAL_PPS])


def test_synthetic_vectors_parse():
    sps = parse_sps(helpers.sps_nal(width=128, height=128))
    assert sps.pic_width_luma == 128 and sps.ctb_size == 64
    assert parse_pps(helpers.pps_nal(init_qp=42)).init_qp == 42


@pytest.mark.parametrize("kw, feature", [
    (dict(bit_depth_luma=10), "bit_depth"),
    (dict(bit_depth_chroma=10), "bit_depth"),
    (dict(chroma_format_idc=3), "chroma_format"),
    (dict(chroma_format_idc=0), "chroma_format"),
    (dict(scaling_lists=1), "scaling_lists"),
    (dict(pcm=1), "pcm"),
    (dict(extension_bits=0x80), "sps_extension"),
])
def test_sps_subset_gates(kw, feature):
    with pytest.raises(UnsupportedFeature) as ei:
        parse_sps(helpers.sps_nal(**kw))
    assert ei.value.feature == feature


@pytest.mark.parametrize("kw, feature", [
    (dict(tiles=1), "tiles"),
    (dict(wavefronts=1), "wavefronts"),
    (dict(dependent_slices=1), "dependent_slices"),
])
def test_pps_subset_gates(kw, feature):
    with pytest.raises(UnsupportedFeature) as ei:
        parse_pps(helpers.pps_nal(**kw))
    assert ei.value.feature == feature


def test_sps_layer_gate():
    with pytest.raises(UnsupportedFeature):
        parse_sps(helpers.nal(NAL_SPS, helpers.sps_rbsp(), layer=1))


def test_wrong_nal_type():
    with pytest.raises(MalformedCode):
        parse_sps(helpers.pps_nal())


def _slice(**kw):
    sps = parse_sps(helpers.sps_nal())
    pps = parse_pps(helpers.pps_nal(init_qp=32))
    idr = kw.get("idr", True)
    nal = helpers.nal(NAL_IDR_N_LP if idr else 1, helpers.slice_rbsp(**kw))
    return parse_slice_header(nal, sps, pps)


def test_synthetic_slice_header():
    header, reader = _slice(qp_delta=-10)
    assert header.slice_qp == 22
    assert reader.bit_position % 8 == 0


def test_p_slice_rejected():
    with pytest.raises(UnsupportedFeature) as ei:
        _slice(slice_type=1, idr=False)
    assert ei.value.feature == "inter_slice"


def test_qp_out_of_range():
    with pytest.raises(MalformedCode):
        _slice(qp_delta=28)  # 32 + 28 = 60


def test_second_slice_rejected():
    with pytest.raises(UnsupportedFeature) as ei:
        _slice(first_in_pic=0)
    assert ei.value.feature == "multiple_slices"


def test_sao_rejected_in_slice():
    sps = parse_sps(helpers.sps_nal(sao=1))
    pps = parse_pps(helpers.pps_nal())
    # IDR slice header with both SAO flags set after slice_type
    w = BitWriter()
    w.write_bits(1, 1)
    w.write_bits(0, 1)
    w.write_ue(0)
    w.write_ue(2)
    w.write_bits(1, 1)
    w.write_bits(1, 1)
    w.write_se(0)
    w.write_bits(1, 1)
    while w.bit_length % 8:
        w.write_bits(0, 1)
    rbsp = w.to_bytes() + b"\x80"
    with pytest.raises(UnsupportedFeature) as ei:
        parse_slice_header(helpers.nal(NAL_IDR_N_LP, rbsp), sps, pps)
    assert ei.value.feature == "sao"
