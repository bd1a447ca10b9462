"""Intra slice syntax walk producing per-PU (x, y, size, ipm, bins) records.

The full coding quadtree, intra mode, transform tree and residual syntax is
parsed so that CABAC stays in sync; coefficient values are discarded.

Bin attribution (every decoded bin lands in exactly one record):
  * bins inside a CU go to that CU's PUs. With N x N partitioning the
    per-PU mode syntax and the luma syntax of a quadrant's transform
    subtree go to that quadrant's PU; the remaining CU-level bins
    (transquant bypass, part mode, chroma mode, chroma cbf and residual,
    cu_qp_delta) are split equally, remainder to the first PU.
  * split_cu_flag bins go to the first PU emitted after them.
  * a 64x64 CU is emitted as four 32x32 records with the same mode; its
    CU bins are split equally, remainder to the first record.
  * the end_of_slice_segment_flag bin of each CTU goes to its last PU.
"""
from dataclasses import dataclass, field

from . import cabac_tables as T
from .bitio import NAL_PPS, NAL_SPS, NAL_VPS, BitReader, split_annexb
from .cabac import CabacState
from .errors import HevcFaceError, MalformedCode, UnsupportedFeature
from .paramsets import parse_pps, parse_slice_header, parse_sps, parse_vps

PLANAR, DC, VER = 0, 1, 26
MAX_REMAINING_PREFIX = 32

# attribution pools: pending split flags, CU-shared, then PU 0..3
_PENDING, _SHARED, _PU0 = 0, 1, 2

_CTX_IDX_MAP_4X4 = (0, 1, 4, 5, 2, 3, 4, 5, 6, 6, 8, 8, 7, 7, 8, 8)


@dataclass(frozen=True)
class PuRecord:
    x: int
    y: int
    size: int
    ipm: int
    bins: int


@dataclass
class PictureParse:
    """Everything one picture parse yields besides the records themselves."""
    records: list
    width: int
    height: int
    qp: int
    bins_total: int
    alignment_bits: int
    bin_log: list = field(default=None, repr=False)


def _diag_scan(size):
    out = []
    x = y = 0
    while len(out) < size * size:
        while y >= 0:
            if x < size and y < size:
                out.append((x, y))
            y -= 1
            x += 1
        y, x = x, 0
    return tuple(out)


def _scan_orders():
    orders = {}
    for log2 in range(0, 4):
        n = 1 << log2
        orders[log2] = (
            _diag_scan(n),
            tuple((x, y) for y in range(n) for x in range(n)),
            tuple((x, y) for x in range(n) for y in range(n)),
        )
    return orders


SCAN_ORDERS = _scan_orders()


def scan_index(log2_size, c_idx, pred_mode):
    """Mode-dependent coefficient scan: 0 diagonal, 1 horizontal, 2 vertical."""
    if log2_size == 2 or (log2_size == 3 and c_idx == 0):
        if 6 <= pred_mode <= 14:
            return 2
        if 22 <= pred_mode <= 30:
            return 1
    return 0


def mpm_candidates(cand_a, cand_b):
    if cand_a == cand_b:
        if cand_a < 2:
            return [PLANAR, DC, VER]
        return [cand_a, 2 + ((cand_a + 29) % 32), 2 + ((cand_a - 1) % 32)]
    if PLANAR not in (cand_a, cand_b):
        third = PLANAR
    elif DC not in (cand_a, cand_b):
        third = DC
    else:
        third = VER
    return [cand_a, cand_b, third]


def mode_from_rem(cands, rem):
    mode = rem
    for c in sorted(cands):
        if mode >= c:
            mode += 1
    return mode


def chroma_mode(intra_chroma_pred_mode, luma_mode):
    if intra_chroma_pred_mode == 4:
        return luma_mode
    m = (PLANAR, VER, 10, DC)[intra_chroma_pred_mode]
    return 34 if m == luma_mode else m


def _split_equal(total, parts):
    q, r = divmod(total, parts)
    return [q + r] + [q] * (parts - 1)


class SliceParser:
    """Per-slice parse state: neighbour maps, CABAC engine, attribution pools."""

    def __init__(self, sps, pps, header, reader, trace=False):
        self.sps = sps
        self.pps = pps
        self.header = header
        self.width = sps.pic_width_luma
        self.height = sps.pic_height_luma
        self.w4 = (self.width + 3) >> 2
        self.h4 = (self.height + 3) >> 2
        # per-4x4 maps; -1 marks not yet decoded / unavailable
        self.ipm_map = [-1] * (self.w4 * self.h4)
        self.depth_map = [-1] * (self.w4 * self.h4)
        self.cabac = CabacState(reader, header.slice_qp, trace=trace)
        self.records = []
        self.pools = [0] * 6
        self.sink = _PENDING
        self.last = 0
        self.qg_log2 = sps.ctb_log2_size - pps.diff_cu_qp_delta_depth
        self.cu_qp_delta_coded = False
        self.cu_bypass = False

    # attribution

    def _to(self, sink):
        n = self.cabac.bins_decoded
        self.pools[self.sink] += n - self.last
        self.last = n
        self.sink = sink

    # slice

    def parse(self):
        sps = self.sps
        ctb = sps.ctb_log2_size
        n_ctb = sps.width_ctbs * sps.height_ctbs
        for addr in range(n_ctb):
            cx = (addr % sps.width_ctbs) << ctb
            cy = (addr // sps.width_ctbs) << ctb
            try:
                self.coding_quadtree(cx, cy, ctb, 0)
                end = self.cabac.decode_terminate()
            except HevcFaceError as exc:
                if hasattr(exc, "located"):
                    raise exc.located(f"CTU ({cx}, {cy})") from exc
                raise
            self._to(_PENDING)
            last = self.records[-1]
            self.records[-1] = PuRecord(last.x, last.y, last.size, last.ipm,
                                        last.bins + self.pools[_PENDING])
            self.pools[_PENDING] = 0
            if end and addr != n_ctb - 1:
                raise UnsupportedFeature("multiple_slices", f"CTU ({cx}, {cy})")
            if not end and addr == n_ctb - 1:
                raise MalformedCode("end_of_slice_segment_flag missing after last CTU",
                                    f"CTU ({cx}, {cy})")
        return self.records

    def trailing_alignment_bits(self):
        """Zero bits left after the stop bit; raises if the trailer is malformed.

        After the final terminate bin the stop bit is the last bit the
        engine consumed, so it sits just before the current position.
        """
        pos = self.cabac.bit_position
        data = self.cabac.reader.data
        stop = pos - 1
        if (data[stop >> 3] >> (7 - (stop & 7))) & 1 != 1:
            raise MalformedCode(f"expected rbsp_stop_one_bit at bit {stop}")
        rest = (-pos) % 8
        low_bits = data[stop >> 3] & ((1 << rest) - 1)
        # anything past the stop byte may only be cabac_zero_words
        if low_bits or any(data[(pos + rest) >> 3:]):
            raise MalformedCode("non-zero bits after rbsp_stop_one_bit")
        return rest

    # coding quadtree

    def coding_quadtree(self, x0, y0, log2, depth):
        sps = self.sps
        size = 1 << log2
        if x0 + size <= self.width and y0 + size <= self.height and log2 > sps.min_cb_log2_size:
            self._to(_PENDING)
            split = self.cabac.decode_bin(T.SPLIT_CU_FLAG + self._split_ctx(x0, y0, depth))
        else:
            split = log2 > sps.min_cb_log2_size
        if self.pps.cu_qp_delta_enabled and log2 >= self.qg_log2:
            self.cu_qp_delta_coded = False
        if split:
            half = size >> 1
            for dy in (0, half):
                for dx in (0, half):
                    if x0 + dx < self.width and y0 + dy < self.height:
                        self.coding_quadtree(x0 + dx, y0 + dy, log2 - 1, depth + 1)
        else:
            self.coding_unit(x0, y0, log2, depth)

    def _split_ctx(self, x0, y0, depth):
        inc = 0
        if x0 > 0 and self.depth_map[(y0 >> 2) * self.w4 + ((x0 - 1) >> 2)] > depth:
            inc += 1
        if y0 > 0 and self.depth_map[((y0 - 1) >> 2) * self.w4 + (x0 >> 2)] > depth:
            inc += 1
        return inc

    def _fill(self, grid, x0, y0, size, value):
        w4 = self.w4
        n = size >> 2
        x4 = x0 >> 2
        x_end = min(x4 + n, w4)
        for y4 in range(y0 >> 2, min((y0 >> 2) + n, self.h4)):
            row = y4 * w4
            grid[row + x4:row + x_end] = [value] * (x_end - x4)

    # coding unit

    def coding_unit(self, x0, y0, log2, depth):
        cab = self.cabac
        sps = self.sps
        self._to(_SHARED)
        self._fill(self.depth_map, x0, y0, 1 << log2, depth)
        self.cu_bypass = False
        if self.pps.transquant_bypass_enabled:
            self.cu_bypass = bool(cab.decode_bin(T.CU_TRANSQUANT_BYPASS_FLAG))
        nxn = False
        if log2 == sps.min_cb_log2_size:
            nxn = cab.decode_bin(T.PART_MODE) == 0
        n_pu = 4 if nxn else 1
        pb_log2 = log2 - 1 if nxn else log2
        pb = 1 << pb_log2
        positions = [(x0 + (i & 1) * pb, y0 + (i >> 1) * pb) for i in range(n_pu)]

        prev_flags = []
        for i in range(n_pu):
            if nxn:
                self._to(_PU0 + i)
            prev_flags.append(cab.decode_bin(T.PREV_INTRA_LUMA_PRED_FLAG))
        modes = []
        for i, (px, py) in enumerate(positions):
            if nxn:
                self._to(_PU0 + i)
            cands = mpm_candidates(self._cand(px - 1, py, px, py, False),
                                   self._cand(px, py - 1, px, py, True))
            if prev_flags[i]:
                idx = 0
                while idx < 2 and cab.decode_bypass():
                    idx += 1
                mode = cands[idx]
            else:
                mode = mode_from_rem(cands, cab.decode_bypass_n(5))
            if mode > 34:
                raise MalformedCode(f"intra mode {mode} out of range", f"CU ({px}, {py})")
            modes.append(mode)
            self._fill(self.ipm_map, px, py, pb, mode)

        self._to(_SHARED)
        if cab.decode_bin(T.INTRA_CHROMA_PRED_MODE):
            icpm = cab.decode_bypass_n(2)
        else:
            icpm = 4
        self.luma_modes = modes
        self.chroma_mode = chroma_mode(icpm, modes[0])
        self.nxn = nxn
        self.cu_x, self.cu_y, self.cu_pb_log2 = x0, y0, pb_log2
        max_depth = sps.max_transform_hierarchy_depth_intra + (1 if nxn else 0)
        self.max_trafo_depth = max_depth
        self.transform_tree(x0, y0, x0, y0, log2, 0, 0, True, True)
        self._to(_PENDING)
        self._emit_cu(positions, pb_log2, modes, nxn)

    def _cand(self, xn, yn, xp, yp, above):
        if xn < 0 or yn < 0:
            return DC
        if above and yn < ((yp >> self.sps.ctb_log2_size) << self.sps.ctb_log2_size):
            return DC
        m = self.ipm_map[(yn >> 2) * self.w4 + (xn >> 2)]
        return DC if m < 0 else m

    def _emit_cu(self, positions, pb_log2, modes, nxn):
        pools = self.pools
        pending = pools[_PENDING]
        if nxn:
            share = _split_equal(pools[_SHARED], 4)
            bins = [pools[_PU0 + i] + share[i] for i in range(4)]
            sizes = [(positions[i], pb_log2, modes[i]) for i in range(4)]
        elif pb_log2 == 6:
            x0, y0 = positions[0]
            total = pools[_SHARED] + pools[_PU0]
            bins = _split_equal(total, 4)
            sizes = [((x0 + (i & 1) * 32, y0 + (i >> 1) * 32), 5, modes[0]) for i in range(4)]
        else:
            bins = [pools[_SHARED] + pools[_PU0]]
            sizes = [(positions[0], pb_log2, modes[0])]
        bins[0] += pending
        for ((px, py), lg, mode), b in zip(sizes, bins):
            if px < self.width and py < self.height:
                self.records.append(PuRecord(px, py, 1 << lg, mode, b))
            elif b:
                # picture sizes are multiples of the min CU, so only
                # 64x64 sub-records can fall outside; keep bins conserved
                last = self.records[-1]
                self.records[-1] = PuRecord(last.x, last.y, last.size, last.ipm, last.bins + b)
        for i in range(6):
            pools[i] = 0

    # transform tree

    def transform_tree(self, x0, y0, xb, yb, log2, depth, blk, parent_cb, parent_cr, lsink=_SHARED):
        sps = self.sps
        cab = self.cabac
        if self.nxn and depth == 1:
            lsink = _PU0 + blk
        if (log2 <= sps.max_tb_log2_size and log2 > sps.min_tb_log2_size
                and depth < self.max_trafo_depth and not (self.nxn and depth == 0)):
            self._to(lsink)
            split = cab.decode_bin(T.SPLIT_TRANSFORM_FLAG + 5 - log2)
        else:
            split = log2 > sps.max_tb_log2_size or (self.nxn and depth == 0)
        cbf_cb = cbf_cr = False
        if log2 > 2:
            if depth == 0 or parent_cb:
                self._to(_SHARED)
                cbf_cb = bool(cab.decode_bin(T.CBF_CHROMA + depth))
            if depth == 0 or parent_cr:
                self._to(_SHARED)
                cbf_cr = bool(cab.decode_bin(T.CBF_CHROMA + depth))
        if split:
            half = 1 << (log2 - 1)
            for i in range(4):
                self.transform_tree(x0 + (i & 1) * half, y0 + (i >> 1) * half, x0, y0,
                                    log2 - 1, depth + 1, i, cbf_cb, cbf_cr, lsink)
            return
        self._to(lsink)
        cbf_luma = cab.decode_bin(T.CBF_LUMA + (1 if depth == 0 else 0))
        if log2 == 2:
            cbf_cb, cbf_cr = parent_cb, parent_cr
        self.transform_unit(x0, y0, xb, yb, log2, blk, cbf_luma, cbf_cb, cbf_cr, lsink)

    def transform_unit(self, x0, y0, xb, yb, log2, blk, cbf_luma, cbf_cb, cbf_cr, lsink):
        if not (cbf_luma or cbf_cb or cbf_cr):
            return
        if self.pps.cu_qp_delta_enabled and not self.cu_qp_delta_coded:
            self._to(_SHARED)
            self._cu_qp_delta()
            self.cu_qp_delta_coded = True
        if cbf_luma:
            self._to(lsink)
            self.residual_coding(x0, y0, log2, 0)
        if log2 > 2:
            self._to(_SHARED)
            if cbf_cb:
                self.residual_coding(x0, y0, log2 - 1, 1)
            if cbf_cr:
                self.residual_coding(x0, y0, log2 - 1, 2)
        elif blk == 3:
            self._to(_SHARED)
            if cbf_cb:
                self.residual_coding(xb, yb, 2, 1)
            if cbf_cr:
                self.residual_coding(xb, yb, 2, 2)

    def _cu_qp_delta(self):
        cab = self.cabac
        prefix = 0
        while prefix < 5 and cab.decode_bin(T.CU_QP_DELTA_ABS + (0 if prefix == 0 else 1)):
            prefix += 1
        value = prefix
        if prefix == 5:
            k = 0
            while cab.decode_bypass():
                value += 1 << k
                k += 1
                if k > 31:
                    raise MalformedCode("cu_qp_delta_abs suffix too long")
            value += cab.decode_bypass_n(k)
        if value:
            cab.decode_bypass()
        return value

    # residual coding

    def residual_coding(self, x0, y0, log2, c_idx):
        cab = self.cabac
        decode_bin = cab.decode_bin
        decode_bypass = cab.decode_bypass
        luma = c_idx == 0
        if self.pps.transform_skip_enabled and not self.cu_bypass and log2 <= 2:
            decode_bin(T.TRANSFORM_SKIP_FLAG + (0 if luma else 1))

        if luma:
            pred_mode = self.ipm_map[(y0 >> 2) * self.w4 + (x0 >> 2)]
            ctx_off = 3 * (log2 - 2) + ((log2 - 1) >> 2)
            ctx_shift = (log2 + 1) >> 2
        else:
            pred_mode = self.chroma_mode
            ctx_off = 15
            ctx_shift = log2 - 2
        scan_idx = scan_index(log2, c_idx, pred_mode)
        cmax = (log2 << 1) - 1
        px = 0
        while px < cmax and decode_bin(T.LAST_SIG_COEFF_X_PREFIX + ctx_off + (px >> ctx_shift)):
            px += 1
        py = 0
        while py < cmax and decode_bin(T.LAST_SIG_COEFF_Y_PREFIX + ctx_off + (py >> ctx_shift)):
            py += 1
        last_x = px
        if px > 3:
            nb = (px >> 1) - 1
            last_x = (1 << nb) * (2 + (px & 1)) + cab.decode_bypass_n(nb)
        last_y = py
        if py > 3:
            nb = (py >> 1) - 1
            last_y = (1 << nb) * (2 + (py & 1)) + cab.decode_bypass_n(nb)
        if scan_idx == 2:
            last_x, last_y = last_y, last_x

        sb_log2 = log2 - 2
        sb_w = 1 << sb_log2
        sb_scan = SCAN_ORDERS[sb_log2][scan_idx]
        pos_scan = SCAN_ORDERS[2][scan_idx]
        # locate the last significant position in scan order
        last_sb = (1 << (2 * sb_log2)) - 1
        last_pos = 16
        while True:
            if last_pos == 0:
                last_pos = 16
                last_sb -= 1
                if last_sb < 0:
                    raise MalformedCode("last significant coefficient outside the block")
            last_pos -= 1
            xs, ys = sb_scan[last_sb]
            xp, yp = pos_scan[last_pos]
            if (xs << 2) + xp == last_x and (ys << 2) + yp == last_y:
                break

        csbf = [0] * (sb_w * sb_w)
        sdh = self.pps.sign_data_hiding_enabled and not self.cu_bypass
        if luma:
            sig_base = T.SIG_COEFF_FLAG
            g1_base = T.COEFF_ABS_LEVEL_GREATER1_FLAG
            g2_base = T.COEFF_ABS_LEVEL_GREATER2_FLAG
        else:
            sig_base = T.SIG_COEFF_FLAG + 27
            g1_base = T.COEFF_ABS_LEVEL_GREATER1_FLAG + 16
            g2_base = T.COEFF_ABS_LEVEL_GREATER2_FLAG + 4
        if log2 == 3:
            sig_add = (9 if scan_idx == 0 else 15) if luma else 9
        else:
            sig_add = 21 if luma else 12
        # greater1 context state carries across sub-blocks
        c1 = 1

        for i in range(last_sb, -1, -1):
            xs, ys = sb_scan[i]
            infer_dc = False
            if 0 < i < last_sb:
                right = csbf[ys * sb_w + xs + 1] if xs + 1 < sb_w else 0
                below = csbf[(ys + 1) * sb_w + xs] if ys + 1 < sb_w else 0
                flag = decode_bin(T.CODED_SUB_BLOCK_FLAG + min(right + below, 1) + (0 if luma else 2))
                csbf[ys * sb_w + xs] = flag
                infer_dc = True
            else:
                csbf[ys * sb_w + xs] = 1
            coded = csbf[ys * sb_w + xs]

            if log2 > 2:
                right = csbf[ys * sb_w + xs + 1] if xs + 1 < sb_w else 0
                below = csbf[(ys + 1) * sb_w + xs] if ys + 1 < sb_w else 0
                prev_csbf = right + 2 * below
            sig_pos = []
            if i == last_sb:
                start = last_pos - 1
                sig_pos.append(last_pos)
            else:
                start = 15
            if coded:
                for n in range(start, -1, -1):
                    xp, yp = pos_scan[n]
                    if n == 0 and infer_dc:
                        sig_pos.append(0)
                        continue
                    if log2 == 2:
                        sig_ctx = _CTX_IDX_MAP_4X4[(yp << 2) + xp]
                    elif xs == 0 and ys == 0 and n == 0:
                        sig_ctx = 0
                    else:
                        if prev_csbf == 0:
                            s = xp + yp
                            sig_ctx = 2 if s == 0 else (1 if s < 3 else 0)
                        elif prev_csbf == 1:
                            sig_ctx = 2 if yp == 0 else (1 if yp == 1 else 0)
                        elif prev_csbf == 2:
                            sig_ctx = 2 if xp == 0 else (1 if xp == 1 else 0)
                        else:
                            sig_ctx = 2
                        if luma and (xs or ys):
                            sig_ctx += 3
                        sig_ctx += sig_add
                    if decode_bin(sig_base + sig_ctx):
                        sig_pos.append(n)
                        infer_dc = False
            if not sig_pos:
                continue

            # greater1 / greater2 flags
            ctx_set = 2 if (i > 0 and luma) else 0
            if c1 == 0:
                ctx_set += 1
            c1 = 1
            g1_flags = {}
            last_g1_pos = -1
            for n in sig_pos[:8]:
                flag = decode_bin(g1_base + ctx_set * 4 + c1)
                g1_flags[n] = flag
                if flag:
                    c1 = 0
                    if last_g1_pos < 0:
                        last_g1_pos = n
                elif 0 < c1 < 3:
                    c1 += 1
            g2 = 0
            if last_g1_pos >= 0:
                g2 = decode_bin(g2_base + ctx_set)

            first_sig = sig_pos[-1]
            sign_hidden = sdh and (sig_pos[0] - first_sig > 3)
            for n in sig_pos:
                if not (sign_hidden and n == first_sig):
                    decode_bypass()

            # remaining absolute levels
            rice = 0
            for k, n in enumerate(sig_pos):
                base = 1 + g1_flags.get(n, 0) + (g2 if n == last_g1_pos else 0)
                if k < 8:
                    threshold = 3 if n == last_g1_pos else 2
                else:
                    threshold = 1
                if base == threshold:
                    prefix = 0
                    while decode_bypass():
                        prefix += 1
                        if prefix > MAX_REMAINING_PREFIX:
                            raise MalformedCode("coeff_abs_level_remaining prefix too long")
                    if prefix <= 3:
                        rem = (prefix << rice) + cab.decode_bypass_n(rice)
                    else:
                        nb = prefix - 3 + rice
                        rem = (((1 << (prefix - 3)) + 2) << rice) + cab.decode_bypass_n(nb)
                    if base + rem > 3 * (1 << rice):
                        rice = min(rice + 1, 4)


def _picture_groups(nals):
    """Yield (sps, pps, slice_nal) for each coded slice, tracking parameter sets."""
    sps_by_id, pps_by_id = {}, {}
    for nal in nals:
        t = nal.nal_unit_type
        if t == NAL_VPS:
            parse_vps(nal)
        elif t == NAL_SPS:
            sps = parse_sps(nal)
            sps_by_id[sps.sps_id] = sps
        elif t == NAL_PPS:
            pps = parse_pps(nal)
            pps_by_id[pps.pps_id] = pps
        elif nal.is_slice:
            if nal.nuh_layer_id != 0:
                raise UnsupportedFeature("multi_layer")
            if not pps_by_id:
                raise MalformedCode("slice before any PPS")
            # slice_pic_parameter_set_id is the ue(v) after one or two flags
            r = BitReader(nal.rbsp)
            r.read_flag()
            if nal.is_irap:
                r.read_flag()
            pps_id = r.read_ue()
            if pps_id not in pps_by_id:
                raise MalformedCode(f"slice refers to missing PPS {pps_id}")
            pps = pps_by_id[pps_id]
            if pps.sps_id not in sps_by_id:
                raise MalformedCode(f"PPS refers to missing SPS {pps.sps_id}")
            yield sps_by_id[pps.sps_id], pps, nal


def decode_slice(nal, sps, pps, trace=False):
    """Parse one slice NAL into a PictureParse."""
    header, reader = parse_slice_header(nal, sps, pps)
    parser = SliceParser(sps, pps, header, reader, trace=trace)
    records = parser.parse()
    align = parser.trailing_alignment_bits()
    parser.cabac.sync_reader()
    return PictureParse(
        records=records,
        width=sps.pic_width_luma,
        height=sps.pic_height_luma,
        qp=header.slice_qp,
        bins_total=parser.cabac.bins_decoded,
        alignment_bits=align,
        bin_log=parser.cabac.bin_log,
    )


def decode_stream(stream, trace=False):
    """Parse every picture of an Annex-B stream; one PictureParse per picture."""
    nals = split_annexb(stream)
    return [decode_slice(nal, sps, pps, trace=trace) for sps, pps, nal in _picture_groups(nals)]


def parse_picture(nals, trace=False):
    """Records for the single picture carried by ``nals`` (parameter sets included)."""
    groups = list(_picture_groups(nals))
    if not groups:
        raise MalformedCode("no coded slice in input")
    if len(groups) > 1:
        raise UnsupportedFeature("multiple_slices")
    sps, pps, nal = groups[0]
    return decode_slice(nal, sps, pps, trace=trace).records


def parse_stream(stream):
    """Records per picture for an Annex-B byte stream."""
    return [p.records for p in decode_stream(stream)]
