//! 24-bit CRC with RNTI masking and the CRC-distributing interleaver.

pub const CRC_BITS: usize = 24;
/// D^24+D^23+D^21+D^20+D^17+D^15+D^13+D^12+D^8+D^4+D^2+D+1 (CRC24C).
pub const CRC24C_POLY: u32 = 0xB2_B117;
pub const CRC_INTERLEAVER_MAX: usize = 164;

const MASK24: u32 = 0xFF_FFFF;

/// Interleaving pattern for the maximum input size; shorter inputs use the
/// entries that fall in range after an offset.
pub(crate) static CRC_INTERLEAVER_TABLE: [u16; CRC_INTERLEAVER_MAX] = [
    0, 2, 4, 7, 9, 14, 19, 20, 24, 25, 26, 28, 31, 34, 42, 45, 49, 50, 51, 53, 54, 56, 58, 59, 61, 62, 65, 66, 67, 69,
    70, 71, 72, 76, 77, 81, 82, 83, 87, 88, 89, 91, 93, 95, 98, 101, 104, 106, 108, 110, 111, 113, 115, 118, 119, 120,
    122, 123, 126, 127, 129, 132, 134, 138, 139, 140, 1, 3, 5, 8, 10, 15, 21, 27, 29, 32, 35, 43, 46, 52, 55, 57, 60,
    63, 68, 73, 78, 84, 90, 92, 94, 96, 99, 102, 105, 107, 109, 112, 114, 116, 121, 124, 128, 130, 133, 135, 141, 6,
    11, 16, 22, 30, 33, 36, 44, 47, 64, 74, 79, 85, 97, 100, 103, 117, 125, 131, 136, 142, 12, 17, 23, 37, 48, 75, 80,
    86, 137, 143, 13, 18, 38, 144, 39, 145, 40, 146, 41, 147, 148, 149, 150, 151, 152, 153, 154, 155, 156, 157, 158,
    159, 160, 161, 162, 163,
];

/// Remainder of `bits(x)·x^24 mod poly(x)`, MSB first, zero initial state.
/// Linear over GF(2).
pub fn crc24(bits: &[u8], poly: u32) -> u32 {
    crc24_iter(bits.iter().copied(), poly)
}

fn crc24_iter(bits: impl Iterator<Item = u8>, poly: u32) -> u32 {
    let mut reg = 0u32;
    for b in bits {
        let feedback = (reg >> 23 & 1) ^ u32::from(b & 1);
        reg = (reg << 1) & MASK24;
        if feedback == 1 {
            reg ^= poly & MASK24;
        }
    }
    reg
}

/// Parity of a DCI payload. The register is primed with 24 ones, which keeps
/// an all-zero payload from producing an all-zero codeword.
pub(crate) fn dci_parity(payload: &[u8], poly: u32) -> u32 {
    crc24_iter(std::iter::repeat_n(1u8, CRC_BITS).chain(payload.iter().copied()), poly)
}

fn push_bits(out: &mut Vec<u8>, value: u32, width: usize) {
    out.extend((0..width).rev().map(|i| (value >> i & 1) as u8));
}

/// `payload ‖ parity`, with the last 16 parity bits XORed with `rnti`.
pub fn append_crc(payload: &[u8], rnti: u16, poly: u32) -> Vec<u8> {
    let parity = dci_parity(payload, poly) ^ u32::from(rnti);
    let mut out = Vec::with_capacity(payload.len() + CRC_BITS);
    out.extend_from_slice(payload);
    push_bits(&mut out, parity, CRC_BITS);
    out
}

/// Output position `k` takes input bit `pattern[k]`.
pub fn crc_interleave_pattern(len: usize, table: &[u16]) -> Vec<usize> {
    let max = table.len();
    assert!(len <= max, "interleaver input {len} exceeds table size {max}");
    let offset = max - len;
    table
        .iter()
        .map(|&p| usize::from(p))
        .filter(|&p| p >= offset)
        .map(|p| p - offset)
        .collect()
}

pub fn crc_interleave(bits: &[u8], table: &[u16]) -> Vec<u8> {
    crc_interleave_pattern(bits.len(), table)
        .into_iter()
        .map(|p| bits[p])
        .collect()
}

pub(crate) fn crc_deinterleave(bits: &[u8], table: &[u16]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len()];
    for (k, p) in crc_interleave_pattern(bits.len(), table).into_iter().enumerate() {
        out[p] = bits[k];
    }
    out
}
