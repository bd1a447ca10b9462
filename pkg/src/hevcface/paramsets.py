"""VPS/SPS/PPS and slice segment header parsing for the all-intra subset.

Anything outside the supported subset (Main 8-bit 4:2:0, one I slice per
picture, no tiles, wavefronts, dependent slices, PCM or scaling lists)
raises UnsupportedFeature instead of being skipped.
"""
from dataclasses import dataclass, field

from .bitio import NAL_IDR_N_LP, NAL_IDR_W_RADL, NAL_PPS, NAL_SPS, NAL_VPS, BitReader
from .errors import MalformedCode, OutOfBits, UnsupportedFeature

SLICE_B, SLICE_P, SLICE_I = 0, 1, 2


@dataclass(frozen=True)
class VideoParams:
    vps_id: int
    max_sub_layers: int


@dataclass(frozen=True)
class ShortTermRps:
    num_negative: int
    num_positive: int
    delta_poc_s0: tuple
    delta_poc_s1: tuple

    @property
    def num_delta_pocs(self):
        return self.num_negative + self.num_positive


@dataclass(frozen=True)
class SequenceParams:
    sps_id: int
    pic_width_luma: int
    pic_height_luma: int
    ctb_log2_size: int
    min_cb_log2_size: int
    min_tb_log2_size: int
    max_tb_log2_size: int
    max_transform_hierarchy_depth_intra: int
    sao_enabled: bool
    bit_depth_luma: int
    bit_depth_chroma: int
    chroma_format: str
    log2_max_poc_lsb: int
    amp_enabled: bool
    strong_intra_smoothing: bool
    temporal_mvp_enabled: bool
    long_term_refs_present: bool
    num_long_term_ref_pics_sps: int
    short_term_rps: tuple = field(default=(), repr=False)

    @property
    def ctb_size(self):
        return 1 << self.ctb_log2_size

    @property
    def width_ctbs(self):
        return -(-self.pic_width_luma // self.ctb_size)

    @property
    def height_ctbs(self):
        return -(-self.pic_height_luma // self.ctb_size)


@dataclass(frozen=True)
class PictureParams:
    pps_id: int
    sps_id: int
    init_qp: int
    sign_data_hiding_enabled: bool
    transform_skip_enabled: bool
    constrained_intra_pred: bool
    tiles_enabled: bool
    entropy_sync_enabled: bool
    cu_qp_delta_enabled: bool
    diff_cu_qp_delta_depth: int
    transquant_bypass_enabled: bool
    output_flag_present: bool
    num_extra_slice_header_bits: int
    slice_chroma_qp_offsets_present: bool
    deblocking_override_enabled: bool
    pps_deblocking_disabled: bool
    loop_filter_across_slices: bool
    slice_header_extension_present: bool
    cabac_init_present: bool
    lists_modification_present: bool
    weighted_pred: bool


@dataclass(frozen=True)
class SliceHeader:
    slice_type: str
    slice_qp: int
    sao_luma: bool
    sao_chroma: bool
    first_ctb_address: int
    pps_id: int
    deblocking_disabled: bool
    # byte offset of the first slice_segment_data byte within the RBSP
    data_offset: int = 0


def _ceil_log2(n):
    return (n - 1).bit_length() if n > 1 else 0


def _profile_tier_level(r, max_sub_layers_minus1):
    r.skip_bits(2 + 1 + 5)   # profile_space, tier, profile_idc
    r.skip_bits(32)          # compatibility flags
    r.skip_bits(4 + 43 + 1)  # source flags, constraint/reserved bits
    r.skip_bits(8)           # general_level_idc
    present = []
    for _ in range(max_sub_layers_minus1):
        present.append((r.read_flag(), r.read_flag()))
    if max_sub_layers_minus1 > 0:
        for _ in range(max_sub_layers_minus1, 8):
            r.skip_bits(2)
    for profile_present, level_present in present:
        if profile_present:
            r.skip_bits(88)
        if level_present:
            r.skip_bits(8)


def _expect_type(nal, expected, what):
    if nal.nal_unit_type != expected:
        raise MalformedCode(f"expected {what} NAL, got type {nal.nal_unit_type}")
    if nal.nuh_layer_id != 0:
        raise UnsupportedFeature("multi_layer")


def parse_vps(nal):
    """Validate a VPS; nothing downstream depends on its contents."""
    _expect_type(nal, NAL_VPS, "VPS")
    r = BitReader(nal.rbsp)
    vps_id = r.read_bits(4)
    r.skip_bits(2)  # base_layer_internal, base_layer_available
    r.read_bits(6)  # max_layers_minus1
    max_sub_layers_minus1 = r.read_bits(3)
    r.skip_bits(1)
    if r.read_bits(16) != 0xFFFF:
        raise MalformedCode("vps_reserved_0xffff_16bits mismatch")
    _profile_tier_level(r, max_sub_layers_minus1)
    return VideoParams(vps_id=vps_id, max_sub_layers=max_sub_layers_minus1 + 1)


def parse_st_ref_pic_set(r, idx, num_sets, previous):
    """st_ref_pic_set(idx); previous holds the already-parsed sets."""
    inter = r.read_flag() if idx != 0 else False
    if inter:
        delta_idx = r.read_ue() + 1 if idx == num_sets else 1
        if delta_idx > idx:
            raise MalformedCode("delta_idx_minus1 out of range")
        sign = r.read_bit()
        abs_delta = r.read_ue() + 1
        delta_rps = (1 - 2 * sign) * abs_delta
        ref = previous[idx - delta_idx]
        used, use_delta = [], []
        for _ in range(ref.num_delta_pocs + 1):
            u = r.read_bit()
            used.append(u)
            use_delta.append(1 if u else r.read_bit())
        s0, s1 = [], []
        for j in range(ref.num_positive - 1, -1, -1):
            d = ref.delta_poc_s1[j] + delta_rps
            if d < 0 and use_delta[ref.num_negative + j]:
                s0.append(d)
        if delta_rps < 0 and use_delta[ref.num_delta_pocs]:
            s0.append(delta_rps)
        for j in range(ref.num_negative):
            d = ref.delta_poc_s0[j] + delta_rps
            if d < 0 and use_delta[j]:
                s0.append(d)
        for j in range(ref.num_negative - 1, -1, -1):
            d = ref.delta_poc_s0[j] + delta_rps
            if d > 0 and use_delta[j]:
                s1.append(d)
        if delta_rps > 0 and use_delta[ref.num_delta_pocs]:
            s1.append(delta_rps)
        for j in range(ref.num_positive):
            d = ref.delta_poc_s1[j] + delta_rps
            if d > 0 and use_delta[ref.num_negative + j]:
                s1.append(d)
        return ShortTermRps(len(s0), len(s1), tuple(s0), tuple(s1))
    num_negative = r.read_ue()
    num_positive = r.read_ue()
    if num_negative > 16 or num_positive > 16:
        raise MalformedCode("too many pictures in short-term RPS")
    s0, s1, poc = [], [], 0
    for _ in range(num_negative):
        poc -= r.read_ue() + 1
        r.skip_bits(1)
        s0.append(poc)
    poc = 0
    for _ in range(num_positive):
        poc += r.read_ue() + 1
        r.skip_bits(1)
        s1.append(poc)
    return ShortTermRps(num_negative, num_positive, tuple(s0), tuple(s1))


def _sub_layer_hrd(r, cpb_cnt, sub_pic):
    for _ in range(cpb_cnt):
        r.read_ue()
        r.read_ue()
        if sub_pic:
            r.read_ue()
            r.read_ue()
        r.skip_bits(1)


def _hrd_parameters(r, common, max_sub_layers_minus1):
    nal_hrd = vcl_hrd = sub_pic = False
    if common:
        nal_hrd = r.read_flag()
        vcl_hrd = r.read_flag()
        if nal_hrd or vcl_hrd:
            sub_pic = r.read_flag()
            if sub_pic:
                r.skip_bits(8 + 5 + 1 + 5)
            r.skip_bits(4 + 4)
            if sub_pic:
                r.skip_bits(4)
            r.skip_bits(5 + 5 + 5)
    for _ in range(max_sub_layers_minus1 + 1):
        fixed_general = r.read_flag()
        fixed_within_cvs = True if fixed_general else r.read_flag()
        low_delay = False
        if fixed_within_cvs:
            r.read_ue()
        else:
            low_delay = r.read_flag()
        cpb_cnt = 1
        if not low_delay:
            cpb_cnt = r.read_ue() + 1
            if cpb_cnt > 32:
                raise MalformedCode("cpb_cnt_minus1 out of range")
        if nal_hrd:
            _sub_layer_hrd(r, cpb_cnt, sub_pic)
        if vcl_hrd:
            _sub_layer_hrd(r, cpb_cnt, sub_pic)


def _vui_parameters(r, max_sub_layers_minus1):
    if r.read_flag():  # aspect_ratio_info_present
        if r.read_bits(8) == 255:
            r.skip_bits(32)
    if r.read_flag():  # overscan_info_present
        r.skip_bits(1)
    if r.read_flag():  # video_signal_type_present
        r.skip_bits(3 + 1)
        if r.read_flag():
            r.skip_bits(24)
    if r.read_flag():  # chroma_loc_info_present
        r.read_ue()
        r.read_ue()
    r.skip_bits(3)  # neutral_chroma, field_seq, frame_field_info
    if r.read_flag():  # default_display_window
        for _ in range(4):
            r.read_ue()
    if r.read_flag():  # vui_timing_info_present
        r.skip_bits(64)
        if r.read_flag():
            r.read_ue()
        if r.read_flag():
            _hrd_parameters(r, True, max_sub_layers_minus1)
    if r.read_flag():  # bitstream_restriction
        r.skip_bits(3)
        for _ in range(5):
            r.read_ue()


def parse_sps(nal):
    _expect_type(nal, NAL_SPS, "SPS")
    r = BitReader(nal.rbsp)
    r.skip_bits(4)  # sps_video_parameter_set_id
    max_sub_layers_minus1 = r.read_bits(3)
    r.skip_bits(1)
    _profile_tier_level(r, max_sub_layers_minus1)
    sps_id = r.read_ue()
    if sps_id > 15:
        raise MalformedCode("sps_seq_parameter_set_id out of range")
    chroma_format_idc = r.read_ue()
    if chroma_format_idc == 3:
        r.skip_bits(1)
    if chroma_format_idc != 1:
        raise UnsupportedFeature("chroma_format")
    width = r.read_ue()
    height = r.read_ue()
    if r.read_flag():  # conformance_window_flag
        for _ in range(4):
            r.read_ue()
    bit_depth_luma = r.read_ue() + 8
    bit_depth_chroma = r.read_ue() + 8
    if bit_depth_luma != 8 or bit_depth_chroma != 8:
        raise UnsupportedFeature("bit_depth")
    log2_max_poc_lsb = r.read_ue() + 4
    if log2_max_poc_lsb > 16:
        raise MalformedCode("log2_max_pic_order_cnt_lsb_minus4 out of range")
    ordering_all = r.read_flag()
    for _ in range(0 if ordering_all else max_sub_layers_minus1, max_sub_layers_minus1 + 1):
        r.read_ue()
        r.read_ue()
        r.read_ue()
    min_cb = r.read_ue() + 3
    ctb = min_cb + r.read_ue()
    min_tb = r.read_ue() + 2
    max_tb = min_tb + r.read_ue()
    r.read_ue()  # max_transform_hierarchy_depth_inter
    depth_intra = r.read_ue()
    if not 4 <= ctb <= 6 or min_cb > ctb:
        raise MalformedCode(f"CTB log2 size {ctb} out of range")
    if min_tb >= min_cb or max_tb > min(ctb, 5):
        raise MalformedCode("transform block sizes out of range")
    if width == 0 or height == 0 or width % (1 << min_cb) or height % (1 << min_cb):
        raise MalformedCode("picture size not a multiple of the minimum CU size")
    if r.read_flag():
        raise UnsupportedFeature("scaling_lists")
    amp = r.read_flag()
    sao = r.read_flag()
    if r.read_flag():
        raise UnsupportedFeature("pcm")
    num_st = r.read_ue()
    if num_st > 64:
        raise MalformedCode("num_short_term_ref_pic_sets out of range")
    sets = []
    for i in range(num_st):
        sets.append(parse_st_ref_pic_set(r, i, num_st, sets))
    lt_present = r.read_flag()
    num_lt = 0
    if lt_present:
        num_lt = r.read_ue()
        for _ in range(num_lt):
            r.skip_bits(log2_max_poc_lsb + 1)
    temporal_mvp = r.read_flag()
    strong_smoothing = r.read_flag()
    if r.read_flag():
        _vui_parameters(r, max_sub_layers_minus1)
    if r.read_flag():  # sps_extension_present_flag
        if r.read_bits(8):
            raise UnsupportedFeature("sps_extension")
    return SequenceParams(
        sps_id=sps_id,
        pic_width_luma=width,
        pic_height_luma=height,
        ctb_log2_size=ctb,
        min_cb_log2_size=min_cb,
        min_tb_log2_size=min_tb,
        max_tb_log2_size=max_tb,
        max_transform_hierarchy_depth_intra=depth_intra,
        sao_enabled=sao,
        bit_depth_luma=bit_depth_luma,
        bit_depth_chroma=bit_depth_chroma,
        chroma_format="4:2:0",
        log2_max_poc_lsb=log2_max_poc_lsb,
        amp_enabled=amp,
        strong_intra_smoothing=strong_smoothing,
        temporal_mvp_enabled=temporal_mvp,
        long_term_refs_present=lt_present,
        num_long_term_ref_pics_sps=num_lt,
        short_term_rps=tuple(sets),
    )


def parse_pps(nal):
    _expect_type(nal, NAL_PPS, "PPS")
    r = BitReader(nal.rbsp)
    pps_id = r.read_ue()
    sps_id = r.read_ue()
    if pps_id > 63 or sps_id > 15:
        raise MalformedCode("parameter set id out of range")
    if r.read_flag():
        raise UnsupportedFeature("dependent_slices")
    output_flag_present = r.read_flag()
    extra_bits = r.read_bits(3)
    sdh = r.read_flag()
    cabac_init_present = r.read_flag()
    r.read_ue()
    r.read_ue()
    init_qp = 26 + r.read_se()
    if not 0 <= init_qp <= 51:
        raise MalformedCode("init_qp_minus26 out of range")
    constrained_intra = r.read_flag()
    tskip = r.read_flag()
    cu_qp_delta = r.read_flag()
    diff_depth = r.read_ue() if cu_qp_delta else 0
    r.read_se()  # pps_cb_qp_offset
    r.read_se()  # pps_cr_qp_offset
    chroma_offsets_present = r.read_flag()
    weighted_pred = r.read_flag()
    r.skip_bits(1)  # weighted_bipred
    bypass = r.read_flag()
    tiles = r.read_flag()
    wpp = r.read_flag()
    if tiles:
        raise UnsupportedFeature("tiles")
    if wpp:
        raise UnsupportedFeature("wavefronts")
    across_slices = r.read_flag()
    override_enabled = False
    deblock_disabled = False
    if r.read_flag():  # deblocking_filter_control_present
        override_enabled = r.read_flag()
        deblock_disabled = r.read_flag()
        if not deblock_disabled:
            r.read_se()
            r.read_se()
    if r.read_flag():
        raise UnsupportedFeature("scaling_lists")
    lists_mod = r.read_flag()
    r.read_ue()  # log2_parallel_merge_level_minus2
    header_ext = r.read_flag()
    if r.read_flag():  # pps_extension_present
        if r.read_bits(8):
            raise UnsupportedFeature("pps_extension")
    return PictureParams(
        pps_id=pps_id,
        sps_id=sps_id,
        init_qp=init_qp,
        sign_data_hiding_enabled=sdh,
        transform_skip_enabled=tskip,
        constrained_intra_pred=constrained_intra,
        tiles_enabled=tiles,
        entropy_sync_enabled=wpp,
        cu_qp_delta_enabled=cu_qp_delta,
        diff_cu_qp_delta_depth=diff_depth,
        transquant_bypass_enabled=bypass,
        output_flag_present=output_flag_present,
        num_extra_slice_header_bits=extra_bits,
        slice_chroma_qp_offsets_present=chroma_offsets_present,
        deblocking_override_enabled=override_enabled,
        pps_deblocking_disabled=deblock_disabled,
        loop_filter_across_slices=across_slices,
        slice_header_extension_present=header_ext,
        cabac_init_present=cabac_init_present,
        lists_modification_present=lists_mod,
        weighted_pred=weighted_pred,
    )


def parse_slice_header(nal, sps, pps):
    """Parse a slice segment header; returns (SliceHeader, BitReader at slice data)."""
    if not nal.is_slice:
        raise MalformedCode(f"NAL type {nal.nal_unit_type} is not a coded slice")
    r = BitReader(nal.rbsp)
    first_in_pic = r.read_flag()
    if nal.is_irap:
        r.skip_bits(1)  # no_output_of_prior_pics_flag
    pps_id = r.read_ue()
    if pps_id != pps.pps_id or pps.sps_id != sps.sps_id:
        raise MalformedCode("slice refers to a parameter set that was not supplied")
    if not first_in_pic:
        raise UnsupportedFeature("multiple_slices")
    r.skip_bits(pps.num_extra_slice_header_bits)
    slice_type = r.read_ue()
    if slice_type > 2:
        raise MalformedCode(f"slice_type {slice_type} out of range")
    if slice_type != SLICE_I:
        raise UnsupportedFeature("inter_slice")
    if pps.output_flag_present:
        r.skip_bits(1)
    if nal.nal_unit_type not in (NAL_IDR_W_RADL, NAL_IDR_N_LP):
        r.skip_bits(sps.log2_max_poc_lsb)
        if not r.read_flag():  # short_term_ref_pic_set_sps_flag
            n = len(sps.short_term_rps)
            parse_st_ref_pic_set(r, n, n, list(sps.short_term_rps))
        elif len(sps.short_term_rps) > 1:
            r.skip_bits(_ceil_log2(len(sps.short_term_rps)))
        if sps.long_term_refs_present:
            num_lt_sps = r.read_ue() if sps.num_long_term_ref_pics_sps > 0 else 0
            num_lt = r.read_ue()
            for i in range(num_lt_sps + num_lt):
                if i < num_lt_sps:
                    if sps.num_long_term_ref_pics_sps > 1:
                        r.skip_bits(_ceil_log2(sps.num_long_term_ref_pics_sps))
                else:
                    r.skip_bits(sps.log2_max_poc_lsb + 1)
                if r.read_flag():
                    r.read_ue()
        if sps.temporal_mvp_enabled:
            r.skip_bits(1)
    sao_luma = sao_chroma = False
    if sps.sao_enabled:
        sao_luma = r.read_flag()
        sao_chroma = r.read_flag()
    slice_qp = pps.init_qp + r.read_se()
    if not 0 <= slice_qp <= 51:
        raise MalformedCode(f"slice QP {slice_qp} outside [0, 51]")
    if pps.slice_chroma_qp_offsets_present:
        r.read_se()
        r.read_se()
    deblock_disabled = pps.pps_deblocking_disabled
    override = r.read_flag() if pps.deblocking_override_enabled else False
    if override:
        deblock_disabled = r.read_flag()
        if not deblock_disabled:
            r.read_se()
            r.read_se()
    if pps.loop_filter_across_slices and (sao_luma or sao_chroma or not deblock_disabled):
        r.skip_bits(1)
    if pps.slice_header_extension_present:
        r.skip_bits(8 * r.read_ue())
    # byte_alignment(): a one bit then zeros
    if r.read_bit() != 1:
        raise MalformedCode("slice header alignment bit is not 1")
    while not r.byte_aligned():
        if r.read_bit() != 0:
            raise MalformedCode("non-zero slice header alignment bit")
    if sao_luma or sao_chroma:
        raise UnsupportedFeature("sao")
    if r.bits_left == 0:
        raise OutOfBits("slice has no data")
    header = SliceHeader(
        slice_type="I",
        slice_qp=slice_qp,
        sao_luma=sao_luma,
        sao_chroma=sao_chroma,
        first_ctb_address=0,
        pps_id=pps_id,
        deblocking_disabled=deblock_disabled,
        data_offset=r.bit_position // 8,
    )
    return header, r
