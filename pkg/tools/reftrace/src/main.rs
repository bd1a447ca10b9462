//! Decode an Annex-B HEVC stream with the instrumented pure-Rust decoder and
//! print a JSON trace: intra CU structure plus the full bin sequence per slice.
use heic_decoder::bitreader::strip_emulation_prevention;
use heic_decoder::hevc::ctu::{decode_slice_rows, Picture};
use heic_decoder::hevc::nal::{is_slice_nal, parse_nal_header, NAL_PPS, NAL_SPS};
use heic_decoder::hevc::params::{parse_pps, parse_sps};
use heic_decoder::hevc::slice::parse_slice_header;
use heic_decoder::hevc::trace::{BINS, CUS};

fn split_annexb(data: &[u8]) -> Vec<&[u8]> {
    let mut starts = Vec::new();
    let mut i = 0;
    while i + 3 <= data.len() {
        if data[i] == 0 && data[i + 1] == 0 && data[i + 2] == 1 {
            starts.push(i + 3);
            i += 3;
        } else {
            i += 1;
        }
    }
    let mut out = Vec::new();
    for (k, &s) in starts.iter().enumerate() {
        let mut e = if k + 1 < starts.len() { starts[k + 1] - 3 } else { data.len() };
        while e > s && data[e - 1] == 0 {
            e -= 1;
        }
        out.push(&data[s..e]);
    }
    out
}

fn main() {
    let path = std::env::args().nth(1).expect("usage: reftrace <stream.hevc>");
    let data = std::fs::read(&path).expect("read");
    let nals = split_annexb(&data);
    let mut sps = None;
    let mut pps = None;
    let mut slices_json = Vec::new();
    for nal in nals {
        let (header, payload) = parse_nal_header(nal).expect("nal header");
        let rbsp = strip_emulation_prevention(payload);
        if header.nal_unit_type == NAL_SPS {
            sps = Some(parse_sps(&rbsp).expect("sps"));
        } else if header.nal_unit_type == NAL_PPS {
            pps = Some(parse_pps(&rbsp).expect("pps"));
        } else if is_slice_nal(header.nal_unit_type) {
            let sps = sps.as_ref().expect("sps before slice");
            let pps = pps.as_ref().expect("pps before slice");
            let (sh, byte_pos) = parse_slice_header(&rbsp, header.nal_unit_type, sps, pps).expect("slice header");
            let sub_w = sps.sub_width_c() as usize;
            let sub_h = sps.sub_height_c() as usize;
            let mut pic = Picture::new(
                sps.pic_width_in_luma_samples as usize,
                sps.pic_height_in_luma_samples as usize,
                sub_w,
                sub_h,
                sps.bit_depth_luma,
                sps.bit_depth_chroma,
                sps.log2_min_luma_coding_block_size,
                sps.ctb_log2_size_y(),
            );
            let ctb = 1usize << sps.ctb_log2_size_y();
            let rows = (sps.pic_height_in_luma_samples as usize).div_ceil(ctb);
            BINS.with(|b| b.borrow_mut().clear());
            CUS.with(|c| c.borrow_mut().clear());
            decode_slice_rows(
                &mut pic, &rbsp[byte_pos..], &[], sps, pps, sh.slice_qp_y, sh.sao_luma, sh.sao_chroma,
                sh.cb_qp_offset, sh.cr_qp_offset, None, None, 0, rows,
            )
            .expect("decode slice");
            let bins: String = BINS.with(|b| b.borrow().iter().map(|&v| (b'0' + v) as char).collect());
            let cus: Vec<String> = CUS.with(|c| {
                c.borrow().iter().map(|e| format!("[{},{},{},{},{},{},{},{}]", e[0], e[1], e[2], e[3], e[4], e[5], e[6], e[7])).collect()
            });
            slices_json.push(format!(
                "{{\"nal_unit_type\":{},\"slice_qp\":{},\"width\":{},\"height\":{},\"bins\":\"{}\",\"cus\":[{}]}}",
                header.nal_unit_type, sh.slice_qp_y, sps.pic_width_in_luma_samples, sps.pic_height_in_luma_samples,
                bins, cus.join(",")
            ));
        }
    }
    println!("{{\"slices\":[{}]}}", slices_json.join(","));
}
