//! Slice headers for I pictures and single-reference P pictures.
//! Dependent segments, B pictures and weighted prediction are unsupported.
//! SAO and deblocking parameters are applied after reconstruction.

use super::nal::is_irap_nal;
use super::params::{Pps, Sps};
use crate::bitreader::BitReader;
use crate::error::{HeifError, Result};

#[derive(Debug, Clone)]
pub struct InterSlice {
    pub poc_lsb: u32,
    pub reference_deltas: Vec<i32>,
    pub max_merge_candidates: u32,
    pub cabac_init_b: bool,
    pub temporal_mvp: bool,
}

#[derive(Debug, Clone)]
pub struct SliceHeader {
    pub slice_segment_address: usize,
    pub inter: Option<InterSlice>,
    pub slice_qp_y: i32,
    pub cb_qp_offset: i32,
    pub cr_qp_offset: i32,
    pub sao_luma: bool,
    pub sao_chroma: bool,
    pub deblocking_filter_disabled: bool,
    pub beta_offset_div2: i32,
    pub tc_offset_div2: i32,
    /// Cumulative-sum-able substream lengths in EBSP bytes (one per
    /// substream except the last, which runs to the end of the slice
    /// segment data), empty when there's only one substream.
    pub entry_point_offsets: Vec<u32>,
}

pub fn parse_slice_header(rbsp: &[u8], nal_unit_type: u8, sps: &Sps, pps: &Pps) -> Result<(SliceHeader, usize)> {
    let mut r = BitReader::new(rbsp);
    let first_slice_segment_in_pic = r.flag()?;
    if is_irap_nal(nal_unit_type) {
        r.bit()?; // no_output_of_prior_pics_flag
    }
    r.ue()?; // slice_pic_parameter_set_id

    if pps.dependent_slice_segments_enabled {
        return Err(HeifError::Unsupported("slice header: dependent slice segments not supported"));
    }
    let ctb = 1usize << sps.ctb_log2_size_y();
    let ctb_count = (sps.pic_width_in_luma_samples as usize).div_ceil(ctb)
        * (sps.pic_height_in_luma_samples as usize).div_ceil(ctb);
    let slice_segment_address = if first_slice_segment_in_pic { 0 } else {
        let address = r.bits(usize::BITS - (ctb_count - 1).leading_zeros())? as usize;
        if address == 0 || address >= ctb_count { return Err(HeifError::MalformedHevc("slice: segment address out of range")); }
        address
    };
    for _ in 0..pps.num_extra_slice_header_bits {
        r.bit()?;
    }
    let slice_type = r.ue()?;
    if slice_type != 2 && slice_type != 1 {
        return Err(HeifError::Unsupported("slice header: only I/P slices are supported"));
    }
    if pps.output_flag_present {
        r.bit()?; // pic_output_flag
    }
    let mut poc_lsb = 0;
    let mut reference_deltas = Vec::new();
    let mut temporal_mvp = false;
    if nal_unit_type != 19 && nal_unit_type != 20 {
        poc_lsb = r.bits(sps.log2_max_pic_order_cnt_lsb)?;
        let use_sps_set = r.flag()?;
        let set = if use_sps_set {
            let count = sps.short_term_refs.len();
            if count == 0 { return Err(HeifError::MalformedHevc("slice: no SPS reference set")); }
            let index = if count > 1 { r.bits(usize::BITS - (count - 1).leading_zeros())? as usize } else { 0 };
            sps.short_term_refs.get(index).cloned().ok_or(HeifError::MalformedHevc("slice: RPS index out of range"))?
        } else {
            super::params::parse_short_term_refs(&mut r, sps.short_term_refs.len(), &sps.short_term_refs, true)?
        };
        reference_deltas = set.0.iter().filter_map(|&(delta, used)| used.then_some(delta)).collect();
        if sps.temporal_mvp_enabled { temporal_mvp = r.flag()?; }
    }

    let mut sao_luma = false;
    let mut sao_chroma = false;
    if sps.sample_adaptive_offset_enabled {
        sao_luma = r.flag()?;
        if sps.chroma_format_idc != 0 { sao_chroma = r.flag()?; }
    }

    let inter = if slice_type == 1 {
        let references = if r.flag()? { r.ue()?.checked_add(1).ok_or(HeifError::MalformedHevc("slice: reference count overflow"))? } else { pps.default_l0_references };
        if references != 1 || reference_deltas.len() != 1 {
            return Err(HeifError::Unsupported("P slice: only one short-term reference supported"));
        }
        // List modification syntax is absent with NumPicTotalCurr == 1.
        let cabac_init_b = pps.cabac_init_present && r.flag()?;
        // With one L0 reference, collocated_ref_idx is inferred as zero.
        if pps.weighted_pred { return Err(HeifError::Unsupported("P slice: weighted prediction")); }
        let merge_delta = r.ue()?;
        let max_merge_candidates = 5u32.checked_sub(merge_delta).filter(|&n| n != 0).ok_or(HeifError::MalformedHevc("slice: merge candidate count"))?;
        Some(InterSlice { poc_lsb, reference_deltas, max_merge_candidates, cabac_init_b, temporal_mvp })
    } else { None };

    // SliceQpY, clause 7.4.7.1: PPS's init_qp (already includes the +26
    // offset per `parse_pps`) plus this slice's delta.
    let slice_qp_delta = r.se()?;

    let mut cb_qp_offset = 0;
    let mut cr_qp_offset = 0;
    if pps.slice_chroma_qp_offsets_present {
        cb_qp_offset = r.se()?;
        cr_qp_offset = r.se()?;
    }

    // Deblocking override (clause 7.3.6.1): falls back to the PPS's own
    // disabled flag/offsets unless this slice explicitly overrides them.
    let mut slice_deblocking_filter_disabled = pps.deblocking_filter_disabled;
    let mut beta_offset_div2 = pps.beta_offset_div2;
    let mut tc_offset_div2 = pps.tc_offset_div2;
    if pps.deblocking_filter_override_enabled {
        let deblocking_filter_override = r.flag()?;
        if deblocking_filter_override {
            slice_deblocking_filter_disabled = r.flag()?;
            if !slice_deblocking_filter_disabled {
                beta_offset_div2 = r.se()?;
                tc_offset_div2 = r.se()?;
            }
        }
    }
    if pps.loop_filter_across_slices_enabled && (sao_luma || sao_chroma || !slice_deblocking_filter_disabled) {
        r.bit()?; // slice_loop_filter_across_slices_enabled_flag
    }

    // Entry point offsets (clause 7.3.6.1): present for tiled *or*
    // wavefront-parallel-processing (WPP) pictures. Each value is a
    // substream length in EBSP bytes (i.e. counting emulation-prevention
    // bytes) — `hevc::ctu::decode_slice`'s caller converts these to RBSP
    // positions before seeking, since this function only ever sees the
    // already-emulation-stripped RBSP.
    let mut entry_point_offsets: Vec<u32> = Vec::new();
    if pps.tiles_enabled || pps.entropy_coding_sync_enabled {
        let num_entry_point_offsets = r.ue()?;
        if num_entry_point_offsets > 0 {
            let offset_len = r.ue()? + 1;
            if offset_len > 32 {
                return Err(HeifError::MalformedHevc("slice header: entry point offset length too large"));
            }
            for _ in 0..num_entry_point_offsets {
                entry_point_offsets.push(r.bits(offset_len)? + 1);
            }
        }
    }

    if pps.slice_segment_header_extension_present {
        let ext_len = r.ue()?;
        for _ in 0..ext_len {
            r.bits(8)?;
        }
    }

    // byte_alignment() always consumes alignment_bit_equal_to_one,
    // including when the syntax fields already end on a byte boundary.
    // In that case a whole 0x80 byte precedes CABAC, not zero padding bits.
    if r.bit()? != 1 {
        return Err(HeifError::MalformedHevc("slice header: missing alignment one bit"));
    }
    while !r.bit_pos().is_multiple_of(8) {
        if r.bit()? != 0 {
            return Err(HeifError::MalformedHevc("slice header: nonzero alignment padding"));
        }
    }
    let byte_pos = r.bit_pos() / 8;

    Ok((
        SliceHeader {
            slice_segment_address,
            inter,
            slice_qp_y: pps.init_qp + slice_qp_delta,
            cb_qp_offset,
            cr_qp_offset,
            sao_luma,
            sao_chroma,
            deblocking_filter_disabled: slice_deblocking_filter_disabled,
            beta_offset_div2,
            tc_offset_div2,
            entry_point_offsets,
        },
        byte_pos,
    ))
}
