"""Annex-B splitting, emulation prevention and MSB-first bit reading."""
from dataclasses import dataclass

from .errors import MalformedCode, NoStartCode, OutOfBits, TruncatedNal

NAL_VPS = 32
NAL_SPS = 33
NAL_PPS = 34
NAL_AUD = 35
NAL_PREFIX_SEI = 39
NAL_SUFFIX_SEI = 40
NAL_IDR_W_RADL = 19
NAL_IDR_N_LP = 20

MAX_EG_PREFIX = 31


@dataclass(frozen=True)
class NalUnit:
    nal_unit_type: int
    nuh_layer_id: int
    temporal_id: int
    rbsp: bytes
    # header + escaped payload as found in the stream, start code excluded
    raw: bytes = b""

    @property
    def is_slice(self):
        t = self.nal_unit_type
        return t <= 9 or 16 <= t <= 21

    @property
    def is_irap(self):
        return 16 <= self.nal_unit_type <= 23


def remove_emulation_prevention(payload):
    """Drop every 0x03 that follows two zero bytes."""
    out = bytearray()
    zeros = 0
    for b in payload:
        if zeros >= 2 and b == 0x03:
            zeros = 0
            continue
        out.append(b)
        zeros = zeros + 1 if b == 0 else 0
    return bytes(out)


def add_emulation_prevention(rbsp):
    """Inverse of remove_emulation_prevention, as an encoder would apply it."""
    out = bytearray()
    zeros = 0
    for b in rbsp:
        if zeros >= 2 and b <= 0x03:
            out.append(0x03)
            zeros = 0
        out.append(b)
        zeros = zeros + 1 if b == 0 else 0
    return bytes(out)


def _start_codes(stream):
    """Yield (code_start, payload_start) for every 0x000001 prefix."""
    i = stream.find(b"\x00\x00\x01")
    while i != -1:
        begin = i - 1 if i > 0 and stream[i - 1] == 0 else i
        yield begin, i + 3
        i = stream.find(b"\x00\x00\x01", i + 3)


def split_annexb(stream):
    """Split an Annex-B byte stream into NAL units, in stream order."""
    stream = bytes(stream)
    marks = list(_start_codes(stream))
    if not marks:
        raise NoStartCode("no start code in stream")
    units = []
    for k, (_, start) in enumerate(marks):
        end = marks[k + 1][0] if k + 1 < len(marks) else len(stream)
        raw = stream[start:end]
        # trailing_zero_8bits belong to the byte stream, not the NAL
        raw = raw.rstrip(b"\x00")
        if len(raw) < 2:
            raise TruncatedNal(f"NAL unit {k} has {len(raw)} header byte(s)")
        h = (raw[0] << 8) | raw[1]
        rbsp = remove_emulation_prevention(raw[2:])
        if not rbsp:
            raise TruncatedNal(f"NAL unit {k} has an empty payload")
        units.append(NalUnit(
            nal_unit_type=(h >> 9) & 0x3F,
            nuh_layer_id=(h >> 3) & 0x3F,
            temporal_id=(h & 0x7) - 1,
            rbsp=rbsp,
            raw=raw,
        ))
    return units


class BitReader:
    __slots__ = ("data", "bit_position", "_nbits")

    def __init__(self, data, bit_position=0):
        self.data = bytes(data)
        self._nbits = 8 * len(self.data)
        if not 0 <= bit_position <= self._nbits:
            raise OutOfBits("start position beyond data")
        self.bit_position = bit_position

    @property
    def bits_left(self):
        return self._nbits - self.bit_position

    def read_bit(self):
        pos = self.bit_position
        if pos >= self._nbits:
            raise OutOfBits(f"read past end of {len(self.data)}-byte buffer")
        self.bit_position = pos + 1
        return (self.data[pos >> 3] >> (7 - (pos & 7))) & 1

    def read_bits(self, n):
        if n == 0:
            return 0
        if n < 0 or n > 32:
            raise ValueError(f"read_bits supports 0..32 bits, got {n}")
        pos = self.bit_position
        if pos + n > self._nbits:
            raise OutOfBits(f"need {n} bits, {self._nbits - pos} left")
        first = pos >> 3
        last = (pos + n - 1) >> 3
        chunk = int.from_bytes(self.data[first:last + 1], "big")
        shift = (last + 1) * 8 - (pos + n)
        self.bit_position = pos + n
        return (chunk >> shift) & ((1 << n) - 1)

    def read_flag(self):
        return bool(self.read_bit())

    def read_ue(self):
        zeros = 0
        while self.read_bit() == 0:
            zeros += 1
            if zeros > MAX_EG_PREFIX:
                raise MalformedCode(f"Exp-Golomb prefix longer than {MAX_EG_PREFIX} zeros")
        return (1 << zeros) - 1 + self.read_bits(zeros)

    def read_se(self):
        k = self.read_ue()
        return (k + 1) >> 1 if k & 1 else -(k >> 1)

    def byte_aligned(self):
        return self.bit_position & 7 == 0

    def skip_bits(self, n):
        if self.bit_position + n > self._nbits:
            raise OutOfBits(f"cannot skip {n} bits")
        self.bit_position += n

    def more_rbsp_data(self):
        """True while payload remains before the rbsp_stop_one_bit."""
        if self.bit_position >= self._nbits:
            return False
        last = len(self.data) - 1
        while last >= 0 and self.data[last] == 0:
            last -= 1
        if last < 0:
            return False
        byte = self.data[last]
        stop = last * 8 + 7 - ((byte & -byte).bit_length() - 1)
        return self.bit_position < stop


def read_bits(r, n):
    return r.read_bits(n)


def read_ue(r):
    return r.read_ue()


def read_se(r):
    return r.read_se()


class BitWriter:
    """MSB-first writer; only used to build test vectors and by the tools."""

    def __init__(self):
        self._bits = []

    def write_bits(self, value, n):
        for i in range(n - 1, -1, -1):
            self._bits.append((value >> i) & 1)

    def write_ue(self, value):
        code = value + 1
        n = code.bit_length()
        self.write_bits(0, n - 1)
        self.write_bits(code, n)

    def write_se(self, value):
        self.write_ue(2 * value - 1 if value > 0 else -2 * value)

    def trailing_bits(self):
        self._bits.append(1)
        while len(self._bits) % 8:
            self._bits.append(0)

    @property
    def bit_length(self):
        return len(self._bits)

    def to_bytes(self):
        bits = self._bits + [0] * (-len(self._bits) % 8)
        out = bytearray()
        for i in range(0, len(bits), 8):
            byte = 0
            for b in bits[i:i + 8]:
                byte = (byte << 1) | b
            out.append(byte)
        return bytes(out)
