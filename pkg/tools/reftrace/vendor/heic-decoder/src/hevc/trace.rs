//! Thread-local instrumentation sinks filled by the patched decoder.
use std::cell::RefCell;

thread_local! {
    /// One entry per decoded bin: (mode << 1) | value, mode 0 = context, 1 = bypass, 2 = terminate.
    pub static BINS: RefCell<Vec<u8>> = RefCell::new(Vec::new());
    /// One entry per intra CU: x, y, log2 size, nxn, mode0..mode3.
    pub static CUS: RefCell<Vec<[u32; 8]>> = RefCell::new(Vec::new());
}

pub fn bin(mode: u8, value: u32) {
    BINS.with(|b| b.borrow_mut().push((mode << 1) | (value as u8 & 1)));
}

pub fn cu(entry: [u32; 8]) {
    CUS.with(|c| c.borrow_mut().push(entry));
}
