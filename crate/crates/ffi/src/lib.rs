//! C ABI over `nr-pdcch`.
//!
//! Handles are opaque and owned by the caller once returned; release them with
//! the matching `*_free` function. Every fallible call returns an [`NrStatus`];
//! on failure a description is available from [`nr_last_error_message`] on the
//! same thread. Bit buffers hold one bit per byte (0 or 1).

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use nr_pdcch::budget::non_ca_limits;
use nr_pdcch::config::parse_cell;
use nr_pdcch::dci::{
    blind_decode, encode_candidate, gold_sequence, CodecSuite, Complex64, DciFormat, DciMessage, Rnti, ScrambleInit,
    SizeHypothesis,
};
use nr_pdcch::model::validate_cell;
use nr_pdcch::search_space::{enumerate_candidates, SsType};
use nr_pdcch::CellConfig;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Validation = 4,
    BufferTooSmall = 5,
    NotFound = 6,
    Panic = 7,
}

/// Opaque cell configuration.
pub struct NrCell {
    inner: CellConfig,
}

/// Opaque codec suite.
pub struct NrCodec {
    inner: CodecSuite,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NrCandidate {
    pub ss_index: u8,
    /// 0 for a common search space, 1 for UE-specific.
    pub ss_type: u8,
    pub coreset: u8,
    pub aggregation_level: u8,
    pub candidate_index: u32,
    pub first_cce: u32,
    pub start_symbol: u8,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn fail(status: NrStatus, msg: impl Into<String>) -> NrStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> NrStatus) -> NrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(NrStatus::Panic, "internal panic"),
    }
}

/// Copies the last error message of this thread into `buf` (NUL terminated,
/// truncated to fit). Returns the full message length excluding the NUL.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes of writes.
#[no_mangle]
pub unsafe extern "C" fn nr_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            // SAFETY: caller guarantees `buf` holds `len` bytes; n < len.
            unsafe {
                ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n) = 0;
            }
        }
        msg.len()
    })
}

/// Parses a TOML cell configuration. The cell is not validated; see
/// [`nr_cell_validate`].
///
/// # Safety
/// `toml` must be a valid NUL-terminated string; `out` must be valid for a
/// pointer write.
#[no_mangle]
pub unsafe extern "C" fn nr_cell_from_toml(toml: *const c_char, out: *mut *mut NrCell) -> NrStatus {
    guard(|| {
        if toml.is_null() || out.is_null() {
            return fail(NrStatus::NullPointer, "null argument");
        }
        // SAFETY: checked non-null; caller guarantees NUL termination.
        let text = match unsafe { CStr::from_ptr(toml) }.to_str() {
            Ok(t) => t,
            Err(e) => return fail(NrStatus::Parse, format!("configuration is not UTF-8: {e}")),
        };
        match parse_cell(text) {
            Ok(cell) => {
                let handle = Box::into_raw(Box::new(NrCell { inner: cell }));
                // SAFETY: checked non-null.
                unsafe { *out = handle };
                NrStatus::Ok
            }
            Err(e) => fail(NrStatus::Parse, e.to_string()),
        }
    })
}

/// # Safety
/// `cell` must be null or a handle from [`nr_cell_from_toml`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nr_cell_free(cell: *mut NrCell) {
    if !cell.is_null() {
        // SAFETY: handle originated from Box::into_raw.
        drop(unsafe { Box::from_raw(cell) });
    }
}

/// Writes the number of configuration violations to `count`. Returns
/// `NR_STATUS_VALIDATION` when it is non-zero, with the first violation as the
/// error message.
///
/// # Safety
/// `cell` must be a live handle; `count` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn nr_cell_validate(cell: *const NrCell, count: *mut usize) -> NrStatus {
    guard(|| {
        // SAFETY: caller contract.
        let (Some(cell), false) = (unsafe { cell.as_ref() }, count.is_null()) else {
            return fail(NrStatus::NullPointer, "null argument");
        };
        let v = validate_cell(&cell.inner);
        // SAFETY: checked non-null.
        unsafe { *count = v.len() };
        match v.first() {
            None => NrStatus::Ok,
            Some(first) => fail(NrStatus::Validation, first.to_string()),
        }
    })
}

/// # Safety
/// `cell` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn nr_cell_num_cces(cell: *const NrCell, coreset: u8, out: *mut u32) -> NrStatus {
    guard(|| {
        // SAFETY: caller contract.
        let (Some(cell), false) = (unsafe { cell.as_ref() }, out.is_null()) else {
            return fail(NrStatus::NullPointer, "null argument");
        };
        match cell.inner.coreset(coreset) {
            Some(c) => {
                // SAFETY: checked non-null.
                unsafe { *out = c.num_cces() };
                NrStatus::Ok
            }
            None => fail(NrStatus::NotFound, format!("no CORESET {coreset}")),
        }
    })
}

/// Enumerates the PDCCH candidates of `rnti` in `slot`. `written` receives the
/// total count; when it exceeds `cap` nothing is written to `buf` and
/// `NR_STATUS_BUFFER_TOO_SMALL` is returned, so a call with `cap = 0` sizes
/// the buffer.
///
/// # Safety
/// `cell` must be a live handle; `buf` must be valid for `cap` elements (may be
/// null when `cap` is 0); `written` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn nr_candidates(
    cell: *const NrCell,
    rnti: u16,
    slot: u64,
    buf: *mut NrCandidate,
    cap: usize,
    written: *mut usize,
) -> NrStatus {
    guard(|| {
        // SAFETY: caller contract.
        let (Some(cell), false) = (unsafe { cell.as_ref() }, written.is_null()) else {
            return fail(NrStatus::NullPointer, "null argument");
        };
        let cands = match enumerate_candidates(&cell.inner, rnti, slot) {
            Ok(c) => c,
            Err(e) => return fail(NrStatus::InvalidArgument, e.to_string()),
        };
        // SAFETY: checked non-null.
        unsafe { *written = cands.len() };
        if cands.len() > cap {
            return fail(
                NrStatus::BufferTooSmall,
                format!("{} candidates, buffer holds {cap}", cands.len()),
            );
        }
        if cands.is_empty() {
            return NrStatus::Ok;
        }
        if buf.is_null() {
            return fail(NrStatus::NullPointer, "null buffer");
        }
        // SAFETY: buf valid for cap >= len elements.
        let out = unsafe { slice::from_raw_parts_mut(buf, cands.len()) };
        for (o, c) in out.iter_mut().zip(&cands) {
            *o = NrCandidate {
                ss_index: c.ss_index,
                ss_type: u8::from(c.ss_type == SsType::Uss),
                coreset: c.coreset,
                aggregation_level: c.aggregation_level,
                candidate_index: c.candidate_index,
                first_cce: c.first_cce(),
                start_symbol: c.start_symbol,
            };
        }
        NrStatus::Ok
    })
}

/// Per-slot blind-decode and CCE limits of a single serving cell.
///
/// # Safety
/// `candidates` and `cces` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn nr_non_ca_limits(mu: u8, candidates: *mut u32, cces: *mut u32) -> NrStatus {
    guard(|| {
        if candidates.is_null() || cces.is_null() {
            return fail(NrStatus::NullPointer, "null argument");
        }
        match non_ca_limits(mu) {
            Ok(l) => {
                // SAFETY: checked non-null.
                unsafe {
                    *candidates = l.candidates;
                    *cces = l.cces;
                }
                NrStatus::Ok
            }
            Err(e) => fail(NrStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Default codec suite. Never returns null.
#[no_mangle]
pub extern "C" fn nr_codec_new() -> *mut NrCodec {
    Box::into_raw(Box::new(NrCodec {
        inner: CodecSuite::default(),
    }))
}

/// # Safety
/// `codec` must be null or a handle from [`nr_codec_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nr_codec_free(codec: *mut NrCodec) {
    if !codec.is_null() {
        // SAFETY: handle originated from Box::into_raw.
        drop(unsafe { Box::from_raw(codec) });
    }
}

/// Encodes a DCI into `54·level` QPSK symbols, written to `iq` as interleaved
/// (re, im) pairs. `iq_cap` counts doubles and must be at least `108·level`.
///
/// # Safety
/// `codec` must be a live handle; `payload` valid for `nbits` reads; `iq` valid
/// for `iq_cap` writes.
#[no_mangle]
pub unsafe extern "C" fn nr_encode(
    codec: *const NrCodec,
    payload: *const u8,
    nbits: usize,
    rnti: u16,
    level: u8,
    c_init: u32,
    iq: *mut f64,
    iq_cap: usize,
) -> NrStatus {
    guard(|| {
        // SAFETY: caller contract.
        let Some(codec) = (unsafe { codec.as_ref() }) else {
            return fail(NrStatus::NullPointer, "null codec");
        };
        if payload.is_null() || iq.is_null() {
            return fail(NrStatus::NullPointer, "null buffer");
        }
        // SAFETY: payload valid for nbits reads.
        let bits = unsafe { slice::from_raw_parts(payload, nbits) };
        let msg = DciMessage {
            format: DciFormat::F1_0,
            payload: bits.iter().map(|b| b & 1).collect(),
            rnti: Rnti::c_rnti(rnti),
        };
        let coded = match encode_candidate(&msg, level, &codec.inner, ScrambleInit::from_c_init(c_init)) {
            Ok(c) => c,
            Err(e) => return fail(NrStatus::InvalidArgument, e.to_string()),
        };
        let need = coded.symbols.len() * 2;
        if iq_cap < need {
            return fail(
                NrStatus::BufferTooSmall,
                format!("need {need} doubles, buffer holds {iq_cap}"),
            );
        }
        // SAFETY: iq valid for iq_cap >= need writes.
        let out = unsafe { slice::from_raw_parts_mut(iq, need) };
        for (pair, z) in out.chunks_exact_mut(2).zip(&coded.symbols) {
            pair[0] = z.re;
            pair[1] = z.im;
        }
        NrStatus::Ok
    })
}

/// Blind-decodes `nsym` symbols (interleaved re, im) under one payload-size
/// hypothesis. On success writes `nbits` payload bits to `payload` and returns
/// `NR_STATUS_OK`; a CRC failure returns `NR_STATUS_NOT_FOUND`.
///
/// # Safety
/// `codec` must be a live handle; `iq` valid for `2·nsym` reads; `payload`
/// valid for `nbits` writes.
#[no_mangle]
pub unsafe extern "C" fn nr_blind_decode(
    codec: *const NrCodec,
    iq: *const f64,
    nsym: usize,
    nbits: usize,
    rnti: u16,
    c_init: u32,
    payload: *mut u8,
) -> NrStatus {
    guard(|| {
        // SAFETY: caller contract.
        let Some(codec) = (unsafe { codec.as_ref() }) else {
            return fail(NrStatus::NullPointer, "null codec");
        };
        if iq.is_null() || payload.is_null() {
            return fail(NrStatus::NullPointer, "null buffer");
        }
        // SAFETY: iq valid for 2·nsym reads.
        let raw = unsafe { slice::from_raw_parts(iq, nsym * 2) };
        let symbols: Vec<Complex64> = raw.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect();
        let hyp = [SizeHypothesis {
            format: DciFormat::F1_0,
            payload_bits: nbits,
        }];
        match blind_decode(
            &symbols,
            &hyp,
            Rnti::c_rnti(rnti),
            &codec.inner,
            ScrambleInit::from_c_init(c_init),
        ) {
            Some(msg) => {
                // SAFETY: payload valid for nbits writes; msg.payload has nbits entries.
                unsafe { ptr::copy_nonoverlapping(msg.payload.as_ptr(), payload, msg.payload.len()) };
                NrStatus::Ok
            }
            None => fail(NrStatus::NotFound, "no CRC match"),
        }
    })
}

/// Writes `len` bits of the Gold sequence for `c_init` to `out`.
///
/// # Safety
/// `out` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn nr_gold_sequence(c_init: u32, out: *mut u8, len: usize) -> NrStatus {
    guard(|| {
        if out.is_null() && len > 0 {
            return fail(NrStatus::NullPointer, "null buffer");
        }
        let seq = gold_sequence(c_init, len);
        if len > 0 {
            // SAFETY: out valid for len writes.
            unsafe { ptr::copy_nonoverlapping(seq.as_ptr(), out, len) };
        }
        NrStatus::Ok
    })
}
