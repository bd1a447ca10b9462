import hashlib
import importlib.util
from pathlib import Path

import pytest

from hevcface import cabac
from hevcface import cabac_tables as T
from hevcface.bitio import BitReader, split_annexb
from hevcface.cabac import CabacState, ContextModel, init_context
from hevcface.errors import OutOfBits
from hevcface.paramsets import parse_pps, parse_slice_header, parse_sps

import helpers

TOOLS = Path(__file__).resolve().parents[1] / "tools"

# flat digest of the generated module, frozen when the tables were first verified
FLAT_TABLE_SHA256 = "aefe267ccff00fbc008b1ec35367baac57d1044cb083722891a78fa5088cc843"


def _generator():
    spec = importlib.util.spec_from_file_location("gen_cabac_tables", TOOLS / "gen_cabac_tables.py")
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


def test_init_context_examples():
    assert init_context(154, 32) == ContextModel(0, 1)
    assert init_context(154, 22) == ContextModel(0, 1)
    assert init_context(0, 0) == ContextModel(62, 0)


def test_init_context_ranges():
    for v in range(256):
        for qp in range(52):
            m = init_context(v, qp)
            assert 0 <= m.p_state_idx <= 62
            assert m.val_mps in (0, 1)


def test_table_checksum():
    flat = hashlib.sha256(bytes(T.INIT_VALUES) + b"".join(bytes(r) for r in T.RANGE_TAB_LPS)
                          + bytes(T.TRANS_IDX_LPS) + bytes(T.TRANS_IDX_MPS)).hexdigest()
    assert flat == FLAT_TABLE_SHA256
    gen = _generator()
    assert gen.table_digest() == T.TABLE_SHA256
    assert gen.render() == Path(T.__file__).read_text()


def test_table_spot_values():
    assert T.NUM_CONTEXTS == len(T.INIT_VALUES) == 132
    assert T.INIT_VALUES[T.SPLIT_CU_FLAG:T.SPLIT_CU_FLAG + 3] == (139, 141, 157)
    assert T.RANGE_TAB_LPS[0] == (128, 176, 208, 240)
    assert T.RANGE_TAB_LPS[62] == (6, 7, 8, 9)
    assert T.TRANS_IDX_MPS[62] == 62
    assert T.TRANS_IDX_LPS[0] == 0


def _slice_start(name):
    units = split_annexb(helpers.stream_bytes(name))
    sps = parse_sps(next(u for u in units if u.nal_unit_type == 33))
    pps = parse_pps(next(u for u in units if u.nal_unit_type == 34))
    header, reader = parse_slice_header(next(u for u in units if u.is_slice), sps, pps)
    return header, reader


@pytest.mark.parametrize("name", ["face_64_qp32", "scene_128_qp22", "face_128_qp42"])
def test_first_100_bins_match_reference(name):
    pic = helpers.parsed(name)[0]
    ref = helpers.trace(name)["slices"][0]["first_bins"]
    assert len(ref) == 100
    assert cabac.bin_trace_digits(pic.bin_log)[:100] == ref


def test_init_slice_state_and_determinism():
    header, reader = _slice_start("face_64_qp32")
    a = cabac.init_slice(BitReader(reader.data, reader.bit_position), header.slice_qp)
    b = cabac.init_slice(BitReader(reader.data, reader.bit_position), header.slice_qp)
    assert a.ivl_curr_range == 510 and a.bins_decoded == 0
    assert a.ivl_offset == b.ivl_offset and a.contexts == b.contexts
    assert a.bit_position == reader.bit_position + 9
    assert [cabac.decode_bin(a, 0) for _ in range(20)] == [cabac.decode_bin(b, 0) for _ in range(20)]


def test_empty_payload_out_of_bits():
    with pytest.raises(OutOfBits):
        CabacState(BitReader(b"\x80", 8), 32)
    with pytest.raises(OutOfBits):
        CabacState(BitReader(b"\x80"), 32)


def test_range_stays_normalized():
    header, reader = _slice_start("scene_64_qp22")
    st = CabacState(reader, header.slice_qp)
    for i in range(3000):
        if i % 3 == 2:
            st.decode_bypass()
        else:
            st.decode_bin(i % T.NUM_CONTEXTS)
        assert 256 <= st.ivl_curr_range <= 510
        assert st.ivl_offset < st.ivl_curr_range


def test_mark_and_bins_since():
    header, reader = _slice_start("face_64_qp22")
    st = CabacState(reader, header.slice_qp)
    m = cabac.mark(st)
    assert cabac.bins_since(st, m) == 0
    for _ in range(3):
        cabac.decode_bin(st, 0)
    cabac.decode_bypass(st)
    cabac.decode_bypass(st)
    assert cabac.bins_since(st, m) == 5
    m = st.mark()
    assert cabac.decode_bypass_n(st, 0) == 0
    assert st.bins_since(m) == 0
    cabac.decode_bypass_n(st, 4)
    assert st.bins_since(m) == 4


def test_terminate_counts_as_bin():
    header, reader = _slice_start("face_64_qp22")
    st = CabacState(reader, header.slice_qp, trace=True)
    assert cabac.decode_terminate(st) == 0
    assert st.bins_decoded == 1
    assert st.bin_log == [(cabac.MODE_TERMINATE, -1, 0)]


@pytest.mark.parametrize("name", helpers.stream_names())
def test_terminate_only_at_slice_end(name):
    for pic in helpers.parsed(name):
        terms = [v for m, _, v in pic.bin_log if m == cabac.MODE_TERMINATE]
        # one end_of_slice_segment_flag per CTU (pcm is off, so no other terminate bins)
        assert terms[-1] == 1
        assert not any(terms[:-1])
        assert 0 <= pic.alignment_bits <= 7


def test_trace_rows_format():
    pic = helpers.parsed("face_64_qp32")[0]
    rows = cabac.bin_trace_rows(pic.bin_log)
    assert len(rows) == pic.bins_total
    assert rows[0][0] == 0 and rows[0][1] in cabac.MODE_NAMES
    assert {r[1] for r in rows} <= set(cabac.MODE_NAMES)
    assert all(r[2] == -1 for r in rows if r[1] != "ctx")
