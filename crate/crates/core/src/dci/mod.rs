//! Downlink control information: format registry, the PDCCH construction
//! chain (pad → CRC/RNTI mask → interleave → FEC → scramble → QPSK), blind
//! decoding and the "3+1" DCI size budget.

mod codec;
mod crc;
mod scrambler;
mod size_budget;
pub mod vectors;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use codec::{
    attach_crc_and_mask, bits_from_qpsk, bits_to_qpsk, blind_decode, check_crc_and_unmask, encode_candidate,
    encode_coded_bits, pad_payload, CodecSuite, CodedPdcch, FecCodec, RepetitionCodec, SizeHypothesis, BITS_PER_CCE,
    MAX_PAYLOAD_BITS, MIN_PAYLOAD_BITS,
};
pub use crc::{append_crc, crc24, crc_interleave, crc_interleave_pattern, CRC24C_POLY, CRC_BITS, CRC_INTERLEAVER_MAX};
pub use scrambler::{gold_sequence, BitScrambler, GoldScrambler, ScrambleInit};
pub use size_budget::{align_sizes, check_size_budget, MonitoredFormat, SizeBudgetViolation};

pub use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DciError {
    #[error("payload of {0} bits exceeds the 140-bit maximum")]
    PayloadTooLarge(usize),
    #[error("empty payload")]
    EmptyPayload,
    #[error("aggregation level {0} not in {{1,2,4,8,16}}")]
    InvalidAggregationLevel(u8),
    #[error("{info_bits} bits cannot be carried in {coded_bits} coded bits")]
    CodeRateTooHigh { info_bits: usize, coded_bits: usize },
    #[error("symbol count {got} is not 54·L for any aggregation level")]
    SymbolCount { got: usize },
    #[error("unknown DCI format {0:?}")]
    UnknownFormat(String),
    #[error("unknown RNTI type {0:?}")]
    UnknownRntiType(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DciFormat {
    #[serde(rename = "0_0")]
    F0_0,
    #[serde(rename = "0_1")]
    F0_1,
    #[serde(rename = "1_0")]
    F1_0,
    #[serde(rename = "1_1")]
    F1_1,
    #[serde(rename = "2_0")]
    F2_0,
    #[serde(rename = "2_1")]
    F2_1,
    #[serde(rename = "2_2")]
    F2_2,
    #[serde(rename = "2_3")]
    F2_3,
}

impl DciFormat {
    pub const ALL: [DciFormat; 8] = [
        DciFormat::F0_0,
        DciFormat::F0_1,
        DciFormat::F1_0,
        DciFormat::F1_1,
        DciFormat::F2_0,
        DciFormat::F2_1,
        DciFormat::F2_2,
        DciFormat::F2_3,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DciFormat::F0_0 => "0_0",
            DciFormat::F0_1 => "0_1",
            DciFormat::F1_0 => "1_0",
            DciFormat::F1_1 => "1_1",
            DciFormat::F2_0 => "2_0",
            DciFormat::F2_1 => "2_1",
            DciFormat::F2_2 => "2_2",
            DciFormat::F2_3 => "2_3",
        }
    }

    pub fn info(self) -> &'static DciFormatInfo {
        &REGISTRY[self as usize]
    }

    /// Scheduling formats (0_x, 1_x) as opposed to group-common 2_x.
    pub fn is_scheduling(self) -> bool {
        !matches!(
            self,
            DciFormat::F2_0 | DciFormat::F2_1 | DciFormat::F2_2 | DciFormat::F2_3
        )
    }
}

impl fmt::Display for DciFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DciFormat {
    type Err = DciError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DciFormat::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| DciError::UnknownFormat(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RntiType {
    C,
    McsC,
    Cs,
    Tc,
    Si,
    P,
    Ra,
    SpCsi,
    Sfi,
    Int,
    TpcPucch,
    TpcPusch,
    TpcSrs,
}

impl RntiType {
    /// C-RNTI, MCS-C-RNTI and CS-RNTI: the time-critical unicast class that the
    /// three-size part of the budget covers.
    pub fn is_c_rnti_class(self) -> bool {
        matches!(self, RntiType::C | RntiType::McsC | RntiType::Cs)
    }
}

impl FromStr for RntiType {
    type Err = DciError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_uppercase().trim_end_matches("-RNTI") {
            "C" => RntiType::C,
            "MCS-C" => RntiType::McsC,
            "CS" => RntiType::Cs,
            "TC" => RntiType::Tc,
            "SI" => RntiType::Si,
            "P" => RntiType::P,
            "RA" => RntiType::Ra,
            "SP-CSI" => RntiType::SpCsi,
            "SFI" => RntiType::Sfi,
            "INT" => RntiType::Int,
            "TPC-PUCCH" => RntiType::TpcPucch,
            "TPC-PUSCH" => RntiType::TpcPusch,
            "TPC-SRS" => RntiType::TpcSrs,
            _ => return Err(DciError::UnknownRntiType(s.to_string())),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DciFormatInfo {
    pub format: DciFormat,
    pub usage: &'static str,
    pub allowed_rnti_types: &'static [RntiType],
}

impl DciFormatInfo {
    pub fn allows(&self, rnti: RntiType) -> bool {
        self.allowed_rnti_types.contains(&rnti)
    }
}

use RntiType as R;

static REGISTRY: [DciFormatInfo; 8] = [
    DciFormatInfo {
        format: DciFormat::F0_0,
        usage: "fallback PUSCH scheduling",
        allowed_rnti_types: &[R::C, R::McsC, R::Cs, R::Tc],
    },
    DciFormatInfo {
        format: DciFormat::F0_1,
        usage: "non-fallback PUSCH scheduling",
        allowed_rnti_types: &[R::C, R::McsC, R::Cs, R::SpCsi],
    },
    DciFormatInfo {
        format: DciFormat::F1_0,
        usage: "fallback PDSCH scheduling",
        allowed_rnti_types: &[R::C, R::McsC, R::Cs, R::Si, R::P, R::Ra, R::Tc],
    },
    DciFormatInfo {
        format: DciFormat::F1_1,
        usage: "non-fallback PDSCH scheduling",
        allowed_rnti_types: &[R::C, R::McsC, R::Cs],
    },
    DciFormatInfo {
        format: DciFormat::F2_0,
        usage: "slot format indication to a UE group",
        allowed_rnti_types: &[R::Sfi],
    },
    DciFormatInfo {
        format: DciFormat::F2_1,
        usage: "downlink pre-emption indication to a UE group",
        allowed_rnti_types: &[R::Int],
    },
    DciFormatInfo {
        format: DciFormat::F2_2,
        usage: "group TPC commands for PUCCH and PUSCH",
        allowed_rnti_types: &[R::TpcPucch, R::TpcPusch],
    },
    DciFormatInfo {
        format: DciFormat::F2_3,
        usage: "group SRS requests and TPC commands for SRS",
        allowed_rnti_types: &[R::TpcSrs],
    },
];

pub fn registry() -> &'static [DciFormatInfo] {
    &REGISTRY
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rnti {
    pub value: u16,
    pub kind: RntiType,
}

impl Rnti {
    pub fn c_rnti(value: u16) -> Self {
        Rnti {
            value,
            kind: RntiType::C,
        }
    }
}

/// A DCI payload addressed with an RNTI. `payload` holds one bit per byte (0/1).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DciMessage {
    pub format: DciFormat,
    pub payload: Vec<u8>,
    pub rnti: Rnti,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_mirrors_format_table() {
        assert_eq!(registry().len(), 8);
        for (i, info) in registry().iter().enumerate() {
            assert_eq!(info.format as usize, i);
            assert_eq!(info.format.info(), info);
        }
        let f10 = DciFormat::F1_0.info();
        for r in [R::C, R::McsC, R::Cs, R::Si, R::P, R::Ra, R::Tc] {
            assert!(f10.allows(r));
        }
        assert_eq!(f10.allowed_rnti_types.len(), 7);
        assert_eq!(DciFormat::F2_0.info().allowed_rnti_types, &[R::Sfi]);
        assert!(!DciFormat::F1_1.info().allows(R::Tc));
        assert!(DciFormat::F0_1.info().allows(R::SpCsi));
    }

    #[test]
    fn text_forms() {
        assert_eq!("1_1".parse::<DciFormat>().unwrap(), DciFormat::F1_1);
        assert!("3_0".parse::<DciFormat>().is_err());
        assert_eq!("MCS-C-RNTI".parse::<RntiType>().unwrap(), RntiType::McsC);
        assert_eq!("tpc-srs".parse::<RntiType>().unwrap(), RntiType::TpcSrs);
    }
}
