"""Shared test helpers: fixture access, the reference-trace oracle and
hand-built parameter-set / slice-header vectors."""
import json
from functools import lru_cache
from pathlib import Path

from hevcface.bitio import NAL_PPS, NAL_SPS, BitWriter, NalUnit, add_emulation_prevention

CONF = Path(__file__).parent / "data" / "conformance"

# filled by test_acceptance, printed by the conftest terminal-summary hook
ACCEPTANCE_LINES = []


def stream_names():
    return json.loads((CONF / "index.json").read_text())


def stream_bytes(name):
    return (CONF / f"{name}.hevc").read_bytes()


def trace(name):
    return json.loads((CONF / f"{name}.trace.json").read_text())


@lru_cache(maxsize=None)
def parsed(name, with_trace=True):
    from hevcface.syntax import decode_stream
    return decode_stream(stream_bytes(name), trace=with_trace)


def ref_records(cus):
    """Expand the reference decoder's CU list [x, y, log2, nxn, m0..m3] into
    (x, y, size, ipm) PUs under the 4-way split of 64x64 CUs."""
    out = []
    for x, y, log2, nxn, *modes in cus:
        if nxn:
            h = 1 << (log2 - 1)
            out += [(x + (i & 1) * h, y + (i >> 1) * h, h, modes[i]) for i in range(4)]
        elif log2 == 6:
            out += [(x + (i & 1) * 32, y + (i >> 1) * 32, 32, modes[0]) for i in range(4)]
        else:
            out.append((x, y, 1 << log2, modes[0]))
    return out


def nal(nal_type, rbsp, layer=0):
    return NalUnit(nal_type, layer, 0, bytes(rbsp))


def annexb(*units):
    """Byte stream from NalUnits (4-byte start codes)."""
    out = bytearray()
    for u in units:
        header = ((u.nal_unit_type << 9) | (u.nuh_layer_id << 3) | (u.temporal_id + 1)).to_bytes(2, "big")
        out += b"\x00\x00\x00\x01" + header + add_emulation_prevention(u.rbsp)
    return bytes(out)


def _ptl(w):
    w.write_bits(0, 2)
    w.write_bits(0, 1)
    w.write_bits(1, 5)          # Main profile
    w.write_bits(0x60000000, 32)
    w.write_bits(0b1001, 4)
    w.write_bits(0, 43)
    w.write_bits(0, 1)
    w.write_bits(90, 8)


def sps_rbsp(width=64, height=64, chroma_format_idc=1, bit_depth_luma=8, bit_depth_chroma=8,
             min_cb_log2=3, ctb_log2=6, scaling_lists=0, pcm=0, sao=0, extension_bits=None):
    w = BitWriter()
    w.write_bits(0, 4)
    w.write_bits(0, 3)
    w.write_bits(1, 1)
    _ptl(w)
    w.write_ue(0)                       # sps id
    w.write_ue(chroma_format_idc)
    if chroma_format_idc == 3:
        w.write_bits(0, 1)
    w.write_ue(width)
    w.write_ue(height)
    w.write_bits(0, 1)                  # conformance window
    w.write_ue(bit_depth_luma - 8)
    w.write_ue(bit_depth_chroma - 8)
    w.write_ue(4)                       # log2_max_poc_lsb_minus4
    w.write_bits(1, 1)
    for _ in range(3):
        w.write_ue(0)
    w.write_ue(min_cb_log2 - 3)
    w.write_ue(ctb_log2 - min_cb_log2)
    w.write_ue(0)                       # min tb 4x4
    w.write_ue(3)                       # max tb 32x32
    w.write_ue(0)
    w.write_ue(1)
    w.write_bits(scaling_lists, 1)
    if scaling_lists:
        w.write_bits(0, 1)
    w.write_bits(0, 1)                  # amp
    w.write_bits(sao, 1)
    w.write_bits(pcm, 1)
    if pcm:
        w.write_bits(7, 4)
        w.write_bits(7, 4)
        w.write_ue(0)
        w.write_ue(0)
        w.write_bits(0, 1)
    w.write_ue(0)                       # no short-term RPS
    w.write_bits(0, 1)
    w.write_bits(0, 1)
    w.write_bits(1, 1)                  # strong intra smoothing
    w.write_bits(0, 1)                  # no VUI
    if extension_bits is None:
        w.write_bits(0, 1)
    else:
        w.write_bits(1, 1)
        w.write_bits(extension_bits, 8)
    w.trailing_bits()
    return w.to_bytes()


def pps_rbsp(init_qp=26, dependent_slices=0, sign_data_hiding=1, tiles=0, wavefronts=0,
             transform_skip=0, cu_qp_delta=0):
    w = BitWriter()
    w.write_ue(0)
    w.write_ue(0)
    w.write_bits(dependent_slices, 1)
    w.write_bits(0, 1)                  # output_flag_present
    w.write_bits(0, 3)
    w.write_bits(sign_data_hiding, 1)
    w.write_bits(0, 1)
    w.write_ue(0)
    w.write_ue(0)
    w.write_se(init_qp - 26)
    w.write_bits(0, 1)                  # constrained intra
    w.write_bits(transform_skip, 1)
    w.write_bits(cu_qp_delta, 1)
    if cu_qp_delta:
        w.write_ue(0)
    w.write_se(0)
    w.write_se(0)
    w.write_bits(0, 1)
    w.write_bits(0, 1)
    w.write_bits(0, 1)
    w.write_bits(0, 1)                  # transquant bypass
    w.write_bits(tiles, 1)
    w.write_bits(wavefronts, 1)
    if tiles:
        w.write_ue(1)
        w.write_ue(1)
        w.write_bits(1, 1)
        w.write_bits(1, 1)
    w.write_bits(0, 1)                  # loop filter across slices
    w.write_bits(0, 1)                  # no deblocking control
    w.write_bits(0, 1)
    w.write_bits(0, 1)
    w.write_ue(0)
    w.write_bits(0, 1)
    w.write_bits(0, 1)
    w.trailing_bits()
    return w.to_bytes()


def slice_rbsp(slice_type=2, qp_delta=0, idr=True, first_in_pic=1, payload=b"\x80"):
    """Slice header for the sps_rbsp/pps_rbsp defaults followed by ``payload``."""
    w = BitWriter()
    w.write_bits(first_in_pic, 1)
    if idr:
        w.write_bits(0, 1)
    w.write_ue(0)
    w.write_ue(slice_type)
    if not idr:
        w.write_bits(0, 8)              # poc lsb
        w.write_bits(0, 1)              # explicit st RPS
        w.write_ue(0)
        w.write_ue(0)
    w.write_se(qp_delta)
    w.write_bits(1, 1)                  # byte_alignment
    while w.bit_length % 8:
        w.write_bits(0, 1)
    return w.to_bytes() + payload


def sps_nal(**kw):
    return nal(NAL_SPS, sps_rbsp(**kw))


def pps_nal(**kw):
    return nal(NAL_PPS, pps_rbsp(**kw))
