//! Hex test-vector files for codec conformance.
//!
//! One case per line, comma separated:
//!
//! ```text
//! payload_hex,rnti,L,scramble_init,expected_coded_hex
//! ```
//!
//! `payload_hex` may carry a `:nbits` suffix when the payload is not a whole
//! number of nibbles (the leading `nbits` bits are used, MSB first). `rnti`
//! and `scramble_init` accept decimal or `0x` hex. `expected_coded_hex` is the
//! `108·L` scrambled coded bits, MSB first. Blank lines and `#` comments are
//! skipped.

use thiserror::Error;

use super::{encode_coded_bits, CodecSuite, DciError, DciFormat, DciMessage, Rnti, ScrambleInit};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VectorError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestVector {
    pub line: usize,
    pub payload: Vec<u8>,
    pub rnti: u16,
    pub level: u8,
    pub init: ScrambleInit,
    pub expected: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VectorOutcome {
    Pass,
    Mismatch { first_diff: usize },
    Error(DciError),
}

pub fn hex_to_bits(hex: &str, nbits: Option<usize>) -> Option<Vec<u8>> {
    let mut bits = Vec::with_capacity(hex.len() * 4);
    for c in hex.chars() {
        let v = c.to_digit(16)?;
        bits.extend((0..4).rev().map(|i| (v >> i & 1) as u8));
    }
    match nbits {
        Some(n) if n > bits.len() => None,
        Some(n) => {
            bits.truncate(n);
            Some(bits)
        }
        None => Some(bits),
    }
}

/// MSB first; a trailing partial nibble is zero-filled.
pub fn bits_to_hex(bits: &[u8]) -> String {
    bits.chunks(4)
        .map(|c| {
            let v = (0..4).fold(0u32, |acc, i| acc << 1 | u32::from(c.get(i).copied().unwrap_or(0) & 1));
            char::from_digit(v, 16).unwrap_or('0')
        })
        .collect()
}

fn parse_int(s: &str) -> Option<u64> {
    match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(h) => u64::from_str_radix(h, 16).ok(),
        None => s.parse().ok(),
    }
}

fn payload_field(s: &str) -> Option<Vec<u8>> {
    match s.split_once(':') {
        Some((hex, n)) => hex_to_bits(hex, Some(n.parse().ok()?)),
        None => hex_to_bits(s, None),
    }
}

pub fn parse_vectors(text: &str) -> Result<Vec<TestVector>, VectorError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |msg: &str| VectorError::Parse {
            line,
            msg: msg.to_string(),
        };
        let fields: Vec<&str> = content.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(err("expected 5 comma-separated fields"));
        }
        let payload = payload_field(fields[0]).ok_or_else(|| err("bad payload hex"))?;
        let rnti = parse_int(fields[1])
            .and_then(|v| u16::try_from(v).ok())
            .ok_or_else(|| err("bad rnti"))?;
        let level = parse_int(fields[2])
            .and_then(|v| u8::try_from(v).ok())
            .ok_or_else(|| err("bad aggregation level"))?;
        let init = parse_int(fields[3])
            .and_then(|v| u32::try_from(v).ok())
            .ok_or_else(|| err("bad scramble init"))?;
        let expected = hex_to_bits(fields[4], None).ok_or_else(|| err("bad expected hex"))?;
        out.push(TestVector {
            line,
            payload,
            rnti,
            level,
            init: ScrambleInit::from_c_init(init),
            expected,
        });
    }
    Ok(out)
}

fn encode(v: &TestVector, suite: &CodecSuite) -> Result<Vec<u8>, DciError> {
    let msg = DciMessage {
        format: DciFormat::F1_0,
        payload: v.payload.clone(),
        rnti: Rnti::c_rnti(v.rnti),
    };
    encode_coded_bits(&msg, v.level, suite, v.init)
}

pub fn run_vector(v: &TestVector, suite: &CodecSuite) -> VectorOutcome {
    match encode(v, suite) {
        Err(e) => VectorOutcome::Error(e),
        Ok(bits) if bits == v.expected => VectorOutcome::Pass,
        Ok(bits) => VectorOutcome::Mismatch {
            first_diff: bits
                .iter()
                .zip(&v.expected)
                .position(|(a, b)| a != b)
                .unwrap_or(bits.len().min(v.expected.len())),
        },
    }
}

/// Re-renders a vector line with the expected field recomputed.
pub fn regenerate_line(v: &TestVector, suite: &CodecSuite) -> Result<String, DciError> {
    let bits = encode(v, suite)?;
    let payload = if v.payload.len().is_multiple_of(4) {
        bits_to_hex(&v.payload)
    } else {
        format!("{}:{}", bits_to_hex(&v.payload), v.payload.len())
    };
    Ok(format!(
        "{},0x{:04x},{},{},{}",
        payload,
        v.rnti,
        v.level,
        v.init.c_init(),
        bits_to_hex(&bits)
    ))
}
