"""Feature images: per-PU (IPM, PUS, BN) values replicated over each PU.

Channel order everywhere (files, arrays, CNN input) is IPM, PUS, BN.
"""
import struct
from dataclasses import dataclass

import numpy as np

from .errors import EmptyRecordList, FormatError, TilingGap

FIMG_MAGIC = b"FIMG"
FIMG_VERSION = 1
FLAG_COMPACT = 0x01
_HEADER = struct.Struct("<4sBHHBB")

PUS_VALUES = {4: 0, 8: 85, 16: 170, 32: 255}


def _round_half_up(num, den):
    """round(num / den) with halves rounded up; num >= 0, den > 0."""
    return (2 * num + den) // (2 * den)


def map_ipm(ipm):
    if not 0 <= ipm <= 34:
        raise ValueError(f"intra mode {ipm} outside [0, 34]")
    return _round_half_up(ipm * 255, 34)


def map_pus(size):
    try:
        return PUS_VALUES[size]
    except KeyError:
        raise ValueError(f"PU size {size} not in {sorted(PUS_VALUES)}") from None


def map_bn(records):
    """Min-max scale the bin counts of ``records`` to 0..255 (constant -> 0)."""
    if not records:
        raise EmptyRecordList("cannot map bin numbers of an empty record list")
    bins = [r.bins for r in records]
    lo, hi = min(bins), max(bins)
    if hi == lo:
        return [0] * len(bins)
    return [_round_half_up((b - lo) * 255, hi - lo) for b in bins]


@dataclass
class FeatureImage:
    width: int
    height: int
    ipm_plane: np.ndarray
    pus_plane: np.ndarray
    bn_plane: np.ndarray
    qp: int
    compact: bool = False

    def stacked(self):
        """(height, width, 3) uint8 array in channel order IPM, PUS, BN."""
        return np.stack([self.ipm_plane, self.pus_plane, self.bn_plane], axis=-1)

    def as_input(self, dtype=np.float32):
        """CNN input: bytes scaled into [0, 1]."""
        dtype = np.dtype(dtype)
        return self.stacked().astype(dtype) / dtype.type(255.0)

    def __eq__(self, other):
        if not isinstance(other, FeatureImage):
            return NotImplemented
        return (self.width, self.height, self.qp) == (other.width, other.height, other.qp) and all(
            np.array_equal(a, b) for a, b in zip(self.planes(), other.planes()))

    def planes(self):
        return (self.ipm_plane, self.pus_plane, self.bn_plane)


def assemble(records, width, height, qp):
    """Paint each record's mapped values over its rectangle."""
    bn = map_bn(records)
    planes = np.zeros((3, height, width), dtype=np.uint8)
    covered = np.zeros((height, width), dtype=np.int32)
    for rec, b in zip(records, bn):
        if rec.x < 0 or rec.y < 0 or rec.x + rec.size > width or rec.y + rec.size > height:
            raise TilingGap(f"PU at ({rec.x}, {rec.y}) size {rec.size} outside {width}x{height}")
        ys = slice(rec.y, rec.y + rec.size)
        xs = slice(rec.x, rec.x + rec.size)
        planes[0, ys, xs] = map_ipm(rec.ipm)
        planes[1, ys, xs] = map_pus(rec.size)
        planes[2, ys, xs] = b
        covered[ys, xs] += 1
    if not np.all(covered == 1):
        gaps = int(np.count_nonzero(covered == 0))
        overlaps = int(np.count_nonzero(covered > 1))
        raise TilingGap(f"records do not tile {width}x{height}: "
                        f"{gaps} uncovered and {overlaps} overlapping pixels")
    return FeatureImage(width, height, planes[0], planes[1], planes[2], qp)


def from_parse(picture):
    """Feature image for a syntax.PictureParse."""
    return assemble(picture.records, picture.width, picture.height, picture.qp)


def fimg_bytes(img, compact=None):
    compact = img.compact if compact is None else compact
    if not (0 <= img.qp <= 255):
        raise FormatError(f"qp {img.qp} does not fit in a byte")
    flags = FLAG_COMPACT if compact else 0
    out = [_HEADER.pack(FIMG_MAGIC, FIMG_VERSION, img.width, img.height, img.qp, flags)]
    for plane in img.planes():
        if compact:
            if img.width % 4 or img.height % 4:
                raise FormatError("compact storage needs dimensions divisible by 4")
            sub = plane[::4, ::4]
            if not np.array_equal(np.repeat(np.repeat(sub, 4, 0), 4, 1), plane):
                raise FormatError("plane is not constant over 4x4 blocks")
            plane = sub
        out.append(np.ascontiguousarray(plane, dtype=np.uint8).tobytes())
    return b"".join(out)


def parse_fimg(data):
    if len(data) < _HEADER.size:
        raise FormatError("FIMG file shorter than its header")
    magic, version, width, height, qp, flags = _HEADER.unpack_from(data)
    if magic != FIMG_MAGIC:
        raise FormatError(f"bad FIMG magic {magic!r}")
    if version != FIMG_VERSION:
        raise FormatError(f"unsupported FIMG version {version}")
    if flags & ~FLAG_COMPACT:
        raise FormatError(f"unknown FIMG flags 0x{flags:02x}")
    compact = bool(flags & FLAG_COMPACT)
    pw, ph = (width // 4, height // 4) if compact else (width, height)
    if compact and (width % 4 or height % 4):
        raise FormatError("compact FIMG with dimensions not divisible by 4")
    n = pw * ph
    if len(data) != _HEADER.size + 3 * n:
        raise FormatError(f"FIMG payload is {len(data) - _HEADER.size} bytes, expected {3 * n}")
    planes = []
    for c in range(3):
        start = _HEADER.size + c * n
        p = np.frombuffer(data, dtype=np.uint8, count=n, offset=start).reshape(ph, pw)
        if compact:
            p = np.repeat(np.repeat(p, 4, 0), 4, 1)
        planes.append(p.copy())
    return FeatureImage(width, height, planes[0], planes[1], planes[2], qp, compact)


def save_fimg(path, img, compact=None):
    with open(path, "wb") as fh:
        fh.write(fimg_bytes(img, compact))


def load_fimg(path):
    with open(path, "rb") as fh:
        return parse_fimg(fh.read())


def ppm_bytes(img):
    """Binary PPM with IPM, PUS, BN as R, G, B. For viewing only."""
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + np.ascontiguousarray(img.stacked()).tobytes()


def save_ppm(path, img):
    with open(path, "wb") as fh:
        fh.write(ppm_bytes(img))
