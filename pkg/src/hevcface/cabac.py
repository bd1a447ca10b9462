"""CABAC arithmetic decoder with per-bin accounting.

Every decoded bin (regular, bypass, terminate) increments ``bins_decoded``;
``mark``/``bins_since`` turn that counter into per-PU bin numbers.
"""
from dataclasses import dataclass

from . import cabac_tables as T
from .errors import OutOfBits

MODE_CONTEXT, MODE_BYPASS, MODE_TERMINATE = 0, 1, 2
MODE_NAMES = ("ctx", "bypass", "term")

_LPS = T.RANGE_TAB_LPS
_NEXT_LPS = T.TRANS_IDX_LPS
_NEXT_MPS = T.TRANS_IDX_MPS


@dataclass(frozen=True)
class ContextModel:
    p_state_idx: int
    val_mps: int


def init_context(init_value, qp):
    """Context initialization from an 8-bit initValue at slice QP."""
    slope = (init_value >> 4) * 5 - 45
    offset = ((init_value & 15) << 3) - 16
    pre = min(max(((slope * qp) >> 4) + offset, 1), 126)
    if pre <= 63:
        return ContextModel(63 - pre, 0)
    return ContextModel(pre - 64, 1)


class CabacState:
    """Decoder registers, context table and bin counter for one slice.

    The bit position is tracked locally and written back to ``reader``
    through :meth:`sync_reader`; this keeps the per-bin path cheap.
    """

    def __init__(self, reader, slice_qp, trace=False):
        self.reader = reader
        self._data = reader.data
        self._nbits = 8 * len(reader.data)
        self._pos = reader.bit_position
        self.slice_qp = slice_qp
        models = [init_context(v, slice_qp) for v in T.INIT_VALUES]
        self._state = [m.p_state_idx for m in models]
        self._mps = [m.val_mps for m in models]
        self.bins_decoded = 0
        self.bin_log = [] if trace else None
        self.ivl_curr_range = 510
        self.ivl_offset = self._read(9)

    @property
    def contexts(self):
        return tuple(ContextModel(s, m) for s, m in zip(self._state, self._mps))

    @property
    def bit_position(self):
        return self._pos

    def sync_reader(self):
        self.reader.bit_position = self._pos
        return self.reader

    def _read(self, n):
        pos = self._pos
        if pos + n > self._nbits:
            raise OutOfBits(f"CABAC needs {n} bits at bit {pos}, slice has {self._nbits}")
        data = self._data
        v = 0
        for p in range(pos, pos + n):
            v = (v << 1) | ((data[p >> 3] >> (7 - (p & 7))) & 1)
        self._pos = pos + n
        return v

    def decode_bin(self, ctx_index):
        st = self._state[ctx_index]
        mps = self._mps[ctx_index]
        rng = self.ivl_curr_range
        lps = _LPS[st][(rng >> 6) & 3]
        rng -= lps
        off = self.ivl_offset
        if off >= rng:
            binval = 1 - mps
            off -= rng
            rng = lps
            if st == 0:
                self._mps[ctx_index] = 1 - mps
            self._state[ctx_index] = _NEXT_LPS[st]
        else:
            binval = mps
            self._state[ctx_index] = _NEXT_MPS[st]
        if rng < 256:
            pos = self._pos
            data = self._data
            nbits = self._nbits
            while rng < 256:
                if pos >= nbits:
                    self._pos = pos
                    raise OutOfBits(f"CABAC renormalization past end of slice data (bit {pos})")
                rng <<= 1
                off = (off << 1) | ((data[pos >> 3] >> (7 - (pos & 7))) & 1)
                pos += 1
            self._pos = pos
        self.ivl_curr_range = rng
        self.ivl_offset = off
        self.bins_decoded += 1
        if self.bin_log is not None:
            self.bin_log.append((MODE_CONTEXT, ctx_index, binval))
        return binval

    def decode_bypass(self):
        pos = self._pos
        if pos >= self._nbits:
            raise OutOfBits(f"CABAC bypass past end of slice data (bit {pos})")
        off = (self.ivl_offset << 1) | ((self._data[pos >> 3] >> (7 - (pos & 7))) & 1)
        self._pos = pos + 1
        if off >= self.ivl_curr_range:
            off -= self.ivl_curr_range
            binval = 1
        else:
            binval = 0
        self.ivl_offset = off
        self.bins_decoded += 1
        if self.bin_log is not None:
            self.bin_log.append((MODE_BYPASS, -1, binval))
        return binval

    def decode_bypass_n(self, n):
        """n bypass bins read MSB first as an unsigned value."""
        v = 0
        for _ in range(n):
            v = (v << 1) | self.decode_bypass()
        return v

    def decode_terminate(self):
        """Terminate-mode bin. On a 1 the last bit already shifted into the
        offset register is the rbsp stop bit, so the position is left as is
        and only alignment zeros remain."""
        rng = self.ivl_curr_range - 2
        if self.ivl_offset >= rng:
            binval = 1
            self.ivl_curr_range = rng
        else:
            binval = 0
            off = self.ivl_offset
            while rng < 256:
                rng <<= 1
                off = (off << 1) | self._read(1)
            self.ivl_curr_range = rng
            self.ivl_offset = off
        self.bins_decoded += 1
        if self.bin_log is not None:
            self.bin_log.append((MODE_TERMINATE, -1, binval))
        return binval

    def mark(self):
        return self.bins_decoded

    def bins_since(self, mark):
        return self.bins_decoded - mark


def init_slice(reader, slice_qp, trace=False):
    return CabacState(reader, slice_qp, trace=trace)


def decode_bin(state, ctx_index):
    return state.decode_bin(ctx_index)


def decode_bypass(state):
    return state.decode_bypass()


def decode_bypass_n(state, n):
    return state.decode_bypass_n(n)


def decode_terminate(state):
    return state.decode_terminate()


def mark(state):
    return state.mark()


def bins_since(state, m):
    return state.bins_since(m)


def bin_trace_rows(bin_log):
    """Rows for the debug CSV ``bin_index,mode,ctx_index,bin_value``."""
    return [(i, MODE_NAMES[m], c, v) for i, (m, c, v) in enumerate(bin_log)]


def bin_trace_digits(bin_log):
    """Compact ``(mode << 1) | value`` digit string used by the conformance fixtures."""
    return "".join(str((m << 1) | v) for m, _, v in bin_log)
