use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use super::crc::{
    append_crc, crc_deinterleave, crc_interleave, dci_parity, CRC24C_POLY, CRC_BITS, CRC_INTERLEAVER_TABLE,
};
use super::scrambler::{BitScrambler, GoldScrambler, ScrambleInit};
use super::{DciError, DciFormat, DciMessage, Rnti};
use crate::search_space::AGGREGATION_LEVELS;

pub const MIN_PAYLOAD_BITS: usize = 12;
pub const MAX_PAYLOAD_BITS: usize = 140;
/// Coded bits per CCE: 54 payload REs × 2 QPSK bits.
pub const BITS_PER_CCE: usize = 108;

/// Channel code behind the rate-matching interface: `encode` must produce
/// exactly `target_len` bits.
pub trait FecCodec: Send + Sync {
    fn encode(&self, bits: &[u8], target_len: usize) -> Result<Vec<u8>, DciError>;
    fn decode(&self, coded: &[u8], info_len: usize) -> Option<Vec<u8>>;
}

/// Cyclic repetition to the target length; majority vote on decode (ties
/// resolve to 0).
#[derive(Debug, Clone, Copy, Default)]
pub struct RepetitionCodec;

impl FecCodec for RepetitionCodec {
    fn encode(&self, bits: &[u8], target_len: usize) -> Result<Vec<u8>, DciError> {
        if bits.is_empty() {
            return Err(DciError::EmptyPayload);
        }
        if bits.len() > target_len {
            return Err(DciError::CodeRateTooHigh {
                info_bits: bits.len(),
                coded_bits: target_len,
            });
        }
        Ok(bits.iter().copied().cycle().take(target_len).collect())
    }

    fn decode(&self, coded: &[u8], info_len: usize) -> Option<Vec<u8>> {
        if info_len == 0 || coded.len() < info_len {
            return None;
        }
        let mut ones = vec![0u32; info_len];
        let mut total = vec![0u32; info_len];
        for (i, &b) in coded.iter().enumerate() {
            ones[i % info_len] += u32::from(b & 1);
            total[i % info_len] += 1;
        }
        Some(ones.iter().zip(&total).map(|(&o, &t)| u8::from(2 * o > t)).collect())
    }
}

/// Pluggable pieces of the PDCCH chain.
#[derive(Clone)]
pub struct CodecSuite {
    pub fec: Arc<dyn FecCodec>,
    pub crc_poly: u32,
    /// CRC-distributing interleaver table; its length caps the input size.
    pub interleaver: Arc<[u16]>,
    pub scrambler: Arc<dyn BitScrambler>,
}

impl Default for CodecSuite {
    fn default() -> Self {
        CodecSuite {
            fec: Arc::new(RepetitionCodec),
            crc_poly: CRC24C_POLY,
            interleaver: Arc::from(&CRC_INTERLEAVER_TABLE[..]),
            scrambler: Arc::new(GoldScrambler),
        }
    }
}

impl fmt::Debug for CodecSuite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CodecSuite")
            .field("crc_poly", &format_args!("{:#08x}", self.crc_poly))
            .field("interleaver_len", &self.interleaver.len())
            .finish_non_exhaustive()
    }
}

pub fn pad_payload(bits: &[u8]) -> Result<Vec<u8>, DciError> {
    if bits.is_empty() {
        return Err(DciError::EmptyPayload);
    }
    if bits.len() > MAX_PAYLOAD_BITS {
        return Err(DciError::PayloadTooLarge(bits.len()));
    }
    let mut out = bits.to_vec();
    out.resize(bits.len().max(MIN_PAYLOAD_BITS), 0);
    Ok(out)
}

/// CRC attach, RNTI mask on the last 16 parity bits, then CRC interleaving.
pub fn attach_crc_and_mask(suite: &CodecSuite, bits: &[u8], rnti: u16) -> Result<Vec<u8>, DciError> {
    if bits.len() < MIN_PAYLOAD_BITS {
        return Err(DciError::EmptyPayload);
    }
    if bits.len() > MAX_PAYLOAD_BITS {
        return Err(DciError::PayloadTooLarge(bits.len()));
    }
    Ok(crc_interleave(
        &append_crc(bits, rnti, suite.crc_poly),
        &suite.interleaver,
    ))
}

/// Inverse of [`attach_crc_and_mask`]: returns the payload iff the parity,
/// unmasked with `rnti`, checks.
pub fn check_crc_and_unmask(suite: &CodecSuite, bits: &[u8], rnti: u16) -> Option<Vec<u8>> {
    if bits.len() <= CRC_BITS || bits.len() > suite.interleaver.len() {
        return None;
    }
    let plain = crc_deinterleave(bits, &suite.interleaver);
    let (payload, parity) = plain.split_at(plain.len() - CRC_BITS);
    let received = parity.iter().fold(0u32, |acc, &b| acc << 1 | u32::from(b & 1));
    (received ^ u32::from(rnti) == dci_parity(payload, suite.crc_poly)).then(|| payload.to_vec())
}

fn check_level(level: u8) -> Result<usize, DciError> {
    if AGGREGATION_LEVELS.contains(&level) {
        Ok(usize::from(level))
    } else {
        Err(DciError::InvalidAggregationLevel(level))
    }
}

/// Scrambled coded bits of a DCI at aggregation level `level` (`108·L` bits).
pub fn encode_coded_bits(
    msg: &DciMessage,
    level: u8,
    suite: &CodecSuite,
    init: ScrambleInit,
) -> Result<Vec<u8>, DciError> {
    let target = check_level(level)? * BITS_PER_CCE;
    let padded = pad_payload(&msg.payload)?;
    let with_crc = attach_crc_and_mask(suite, &padded, msg.rnti.value)?;
    let coded = suite.fec.encode(&with_crc, target)?;
    debug_assert_eq!(coded.len(), target);
    let c = suite.scrambler.sequence(init, target);
    Ok(coded.iter().zip(&c).map(|(a, b)| a ^ b).collect())
}

/// `(b0, b1) → ((1−2b0) + j(1−2b1))/√2`.
pub fn bits_to_qpsk(bits: &[u8]) -> Vec<Complex64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    bits.chunks_exact(2)
        .map(|p| Complex64::new(s * (1.0 - 2.0 * f64::from(p[0])), s * (1.0 - 2.0 * f64::from(p[1]))))
        .collect()
}

/// Hard decision: a negative component is a 1.
pub fn bits_from_qpsk(symbols: &[Complex64]) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|z| [u8::from(z.re < 0.0), u8::from(z.im < 0.0)])
        .collect()
}

/// The `54·L` modulation symbols of one PDCCH.
#[derive(Debug, Clone, PartialEq)]
pub struct CodedPdcch {
    pub symbols: Vec<Complex64>,
    pub aggregation_level: u8,
    pub scramble_init: ScrambleInit,
}

pub fn encode_candidate(
    msg: &DciMessage,
    level: u8,
    suite: &CodecSuite,
    init: ScrambleInit,
) -> Result<CodedPdcch, DciError> {
    let bits = encode_coded_bits(msg, level, suite, init)?;
    Ok(CodedPdcch {
        symbols: bits_to_qpsk(&bits),
        aggregation_level: level,
        scramble_init: init,
    })
}

/// One (format, payload size) the UE tries during blind decoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SizeHypothesis {
    pub format: DciFormat,
    pub payload_bits: usize,
}

/// Tries each size hypothesis in order; returns the first whose CRC checks
/// under `rnti`.
pub fn blind_decode(
    symbols: &[Complex64],
    hypotheses: &[SizeHypothesis],
    rnti: Rnti,
    suite: &CodecSuite,
    init: ScrambleInit,
) -> Option<DciMessage> {
    let n = symbols.len();
    if n == 0 || !n.is_multiple_of(BITS_PER_CCE / 2) || !AGGREGATION_LEVELS.contains(&((n / (BITS_PER_CCE / 2)) as u8))
    {
        return None;
    }
    let received = bits_from_qpsk(symbols);
    let c = suite.scrambler.sequence(init, received.len());
    let descrambled: Vec<u8> = received.iter().zip(&c).map(|(a, b)| a ^ b).collect();
    hypotheses.iter().find_map(|h| {
        if h.payload_bits == 0 || h.payload_bits > MAX_PAYLOAD_BITS {
            return None;
        }
        let k = h.payload_bits.max(MIN_PAYLOAD_BITS) + CRC_BITS;
        let info = suite.fec.decode(&descrambled, k)?;
        let mut payload = check_crc_and_unmask(suite, &info, rnti.value)?;
        payload.truncate(h.payload_bits);
        Some(DciMessage {
            format: h.format,
            payload,
            rnti,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn msg(bits: Vec<u8>, rnti: u16) -> DciMessage {
        DciMessage {
            format: DciFormat::F1_0,
            payload: bits,
            rnti: Rnti::c_rnti(rnti),
        }
    }

    fn random_bits(rng: &mut impl Rng, n: usize) -> Vec<u8> {
        (0..n).map(|_| rng.random_range(0..2u8)).collect()
    }

    #[test]
    fn padding_rules() {
        let p = pad_payload(&[1; 9]).unwrap();
        assert_eq!(p.len(), 12);
        assert_eq!(&p[9..], &[0, 0, 0]);
        assert_eq!(pad_payload(&[1; 12]).unwrap(), vec![1; 12]);
        assert_eq!(pad_payload(&[1; 141]), Err(DciError::PayloadTooLarge(141)));
        assert_eq!(pad_payload(&[]), Err(DciError::EmptyPayload));
    }

    #[test]
    fn mask_check_accepts_only_matching_rnti() {
        let suite = CodecSuite::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let n = rng.random_range(12..=140);
            let bits = random_bits(&mut rng, n);
            let rnti: u16 = rng.random();
            let other: u16 = rng.random();
            let coded = attach_crc_and_mask(&suite, &bits, rnti).unwrap();
            assert_eq!(coded.len(), bits.len() + 24);
            assert_eq!(check_crc_and_unmask(&suite, &coded, rnti), Some(bits.clone()));
            if other != rnti {
                assert_eq!(check_crc_and_unmask(&suite, &coded, other), None);
            }
        }
    }

    #[test]
    fn output_lengths() {
        let suite = CodecSuite::default();
        let m = msg(vec![1; 40], 0x4601);
        let coded = encode_candidate(&m, 8, &suite, ScrambleInit::cell(1)).unwrap();
        assert_eq!(coded.symbols.len(), 432);
        let coded = encode_coded_bits(&m, 1, &suite, ScrambleInit::cell(1)).unwrap();
        assert_eq!(coded.len(), 108);
        assert_eq!(
            encode_coded_bits(&m, 3, &suite, ScrambleInit::cell(1)),
            Err(DciError::InvalidAggregationLevel(3))
        );
    }

    #[test]
    fn too_many_bits_for_one_cce() {
        let suite = CodecSuite::default();
        let m = msg(vec![1; 100], 1);
        assert_eq!(
            encode_coded_bits(&m, 1, &suite, ScrambleInit::cell(1)),
            Err(DciError::CodeRateTooHigh {
                info_bits: 124,
                coded_bits: 108
            })
        );
    }

    #[test]
    fn scrambling_differs_but_descrambles_identically() {
        let suite = CodecSuite::default();
        let m = msg(vec![1, 0, 1, 1, 0, 0, 1, 0, 1, 1, 1, 0, 0, 1], 0x1234);
        let a = encode_coded_bits(&m, 2, &suite, ScrambleInit::from_c_init(11)).unwrap();
        let b = encode_coded_bits(&m, 2, &suite, ScrambleInit::from_c_init(12)).unwrap();
        assert_ne!(a, b);
        let strip = |bits: &[u8], seed| {
            let c = super::super::gold_sequence(seed, bits.len());
            bits.iter().zip(c).map(|(x, y)| x ^ y).collect::<Vec<u8>>()
        };
        assert_eq!(strip(&a, 11), strip(&b, 12));
    }

    #[test]
    fn qpsk_labeling() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let z = bits_to_qpsk(&[0, 0, 0, 1, 1, 0, 1, 1]);
        assert_eq!(z[0], Complex64::new(s, s));
        assert_eq!(z[1], Complex64::new(s, -s));
        assert_eq!(z[2], Complex64::new(-s, s));
        assert_eq!(z[3], Complex64::new(-s, -s));
        assert_eq!(bits_from_qpsk(&z), vec![0, 0, 0, 1, 1, 0, 1, 1]);
    }

    #[test]
    fn round_trip_and_wrong_rnti() {
        let suite = CodecSuite::default();
        let init = ScrambleInit::ue_specific(9, 0x4601);
        let m = msg(
            vec![
                1, 1, 0, 1, 0, 0, 0, 1, 1, 0, 1, 0, 1, 1, 1, 1, 0, 0, 1, 0, 1, 0, 0, 1, 1, 1, 0, 1, 0, 1, 0, 0, 1, 1,
                1, 0, 0, 1, 1,
            ],
            0x4601,
        );
        let coded = encode_candidate(&m, 4, &suite, init).unwrap();
        let hyp = [SizeHypothesis {
            format: DciFormat::F1_0,
            payload_bits: 39,
        }];
        assert_eq!(
            blind_decode(&coded.symbols, &hyp, m.rnti, &suite, init),
            Some(m.clone())
        );
        assert_eq!(
            blind_decode(&coded.symbols, &hyp, Rnti::c_rnti(0x4602), &suite, init),
            None
        );
        let wrong = [SizeHypothesis {
            format: DciFormat::F1_1,
            payload_bits: 55,
        }];
        assert_eq!(blind_decode(&coded.symbols, &wrong, m.rnti, &suite, init), None);
        assert_eq!(blind_decode(&coded.symbols[..50], &hyp, m.rnti, &suite, init), None);
    }

    #[test]
    fn short_payload_round_trips_unpadded() {
        let suite = CodecSuite::default();
        let init = ScrambleInit::cell(3);
        let m = msg(vec![1, 0, 1, 1, 1, 0, 0, 1, 1], 77);
        let coded = encode_candidate(&m, 1, &suite, init).unwrap();
        let hyp = [SizeHypothesis {
            format: DciFormat::F1_0,
            payload_bits: 9,
        }];
        assert_eq!(blind_decode(&coded.symbols, &hyp, m.rnti, &suite, init), Some(m));
    }

    #[test]
    fn repetition_majority_corrects_sparse_flips() {
        let codec = RepetitionCodec;
        let bits: Vec<u8> = (0..36).map(|i| (i % 5 == 1) as u8).collect();
        let mut coded = codec.encode(&bits, 864).unwrap();
        for i in (0..864).step_by(97) {
            coded[i] ^= 1;
        }
        assert_eq!(codec.decode(&coded, 36), Some(bits));
    }
}
