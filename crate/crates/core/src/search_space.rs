//! Search-space set timing and PDCCH candidate placement.
//!
//! A UE-specific set spreads its candidates with
//! `L·((Y + ⌊m·N_CCE/(L·M_L)⌋) mod ⌊N_CCE/L⌋) + i`; common sets use `Y = 0`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dci::DciFormat;
use crate::model::{CellConfig, SYMBOLS_PER_SLOT};

pub const AGGREGATION_LEVELS: [u8; 5] = [1, 2, 4, 8, 16];
pub const MAX_CANDIDATES_PER_LEVEL: u8 = 8;
pub const MAX_SS_INDEX: u8 = 39;
pub const MAX_SS_PER_BWP: usize = 10;
pub const MAX_SS_PER_CELL: usize = 40;

/// Modulus of the UE-specific hashing recurrence.
pub const Y_MODULUS: u64 = 65537;
/// Multipliers selected by `coreset_index mod 3`.
pub const Y_MULTIPLIERS: [u64; 3] = [39827, 39829, 39839];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SearchSpaceError {
    #[error("aggregation level {0} not in {{1,2,4,8,16}}")]
    InvalidAggregationLevel(u8),
    #[error("candidate index {m} not below candidate count {count}")]
    CandidateIndex { m: u32, count: u32 },
    #[error("aggregation level {level} exceeds the {num_cces} CCEs of the CORESET")]
    AggregationExceedsCoreset { level: u8, num_cces: u32 },
    #[error("RNTI 0 cannot seed UE-specific hashing")]
    ZeroRnti,
    #[error("occasion starting at symbol {start} with duration {duration} runs past the slot")]
    OccasionOverflow { start: u8, duration: u8 },
    #[error("SS set {ss} references unknown CORESET {coreset}")]
    UnknownCoreset { ss: u8, coreset: u8 },
    #[error("CORESET {0} belongs to a BWP that is not configured")]
    UnknownBwp(u8),
    #[error("invalid symbol bitmap {0:?}: expected 14 characters of '0'/'1'")]
    InvalidBitmap(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SsType {
    Css,
    Uss,
}

/// First-symbol bitmap of monitoring occasions. Bit `i` is slot symbol `i`;
/// the text form puts symbol 0 first (`"10000010000000"` = symbols 0 and 6).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SymbolBitmap(u16);

impl SymbolBitmap {
    pub fn from_bits(bits: u16) -> Self {
        SymbolBitmap(bits & 0x3fff)
    }

    pub fn first_symbol() -> Self {
        SymbolBitmap(1)
    }

    pub fn bits(self) -> u16 {
        self.0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn symbols(self) -> impl Iterator<Item = u8> {
        (0..SYMBOLS_PER_SLOT).filter(move |s| self.0 >> s & 1 == 1)
    }

    /// First start symbol whose occasion would spill past symbol 13.
    pub fn first_overflow(self, duration: u8) -> Option<u8> {
        self.symbols().find(|&s| s + duration > SYMBOLS_PER_SLOT)
    }
}

impl FromStr for SymbolBitmap {
    type Err = SearchSpaceError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.chars().count() != usize::from(SYMBOLS_PER_SLOT) {
            return Err(SearchSpaceError::InvalidBitmap(s.to_string()));
        }
        let mut bits = 0u16;
        for (i, ch) in s.chars().enumerate() {
            match ch {
                '1' => bits |= 1 << i,
                '0' => {}
                _ => return Err(SearchSpaceError::InvalidBitmap(s.to_string())),
            }
        }
        Ok(SymbolBitmap(bits))
    }
}

impl fmt::Display for SymbolBitmap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..SYMBOLS_PER_SLOT {
            f.write_str(if self.0 >> i & 1 == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl Serialize for SymbolBitmap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SymbolBitmap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpaceSet {
    pub index: u8,
    #[serde(rename = "type")]
    pub ss_type: SsType,
    pub coreset: u8,
    /// Slots.
    #[serde(default = "one")]
    pub periodicity: u32,
    #[serde(default)]
    pub offset: u32,
    #[serde(default = "one")]
    pub duration: u32,
    #[serde(default = "SymbolBitmap::first_symbol")]
    pub symbols: SymbolBitmap,
    /// Candidates per aggregation level 1, 2, 4, 8, 16.
    pub candidates: [u8; 5],
    #[serde(default)]
    pub formats: Vec<DciFormat>,
}

impl SearchSpaceSet {
    /// Monitored every slot on symbol 0, no formats listed.
    pub fn new(index: u8, ss_type: SsType, coreset: u8, candidates: [u8; 5]) -> Self {
        SearchSpaceSet {
            index,
            ss_type,
            coreset,
            periodicity: 1,
            offset: 0,
            duration: 1,
            symbols: SymbolBitmap::first_symbol(),
            candidates,
            formats: Vec::new(),
        }
    }

    pub fn is_css(&self) -> bool {
        self.ss_type == SsType::Css
    }

    pub fn total_candidates(&self) -> u32 {
        self.candidates.iter().map(|&m| u32::from(m)).sum()
    }

    /// Whether `format` may be carried; an empty list means any format.
    pub fn monitors(&self, format: DciFormat) -> bool {
        self.formats.is_empty() || self.formats.contains(&format)
    }
}

pub fn is_monitored_slot(ss: &SearchSpaceSet, absolute_slot: u64) -> bool {
    let (k, o, d) = (u64::from(ss.periodicity), u64::from(ss.offset), u64::from(ss.duration));
    k > 0 && absolute_slot >= o && (absolute_slot - o) % k < d
}

/// Start symbols of the monitoring occasions in a monitored slot.
pub fn occasions_in_slot(ss: &SearchSpaceSet, coreset_duration: u8) -> Result<Vec<u8>, SearchSpaceError> {
    if let Some(start) = ss.symbols.first_overflow(coreset_duration) {
        return Err(SearchSpaceError::OccasionOverflow {
            start,
            duration: coreset_duration,
        });
    }
    Ok(ss.symbols.symbols().collect())
}

/// Source of the per-slot hashing offset `Y` for UE-specific sets.
pub trait CandidateRandomizer: Send + Sync {
    fn y_value(&self, rnti: u16, coreset: u8, slot: u32) -> Result<u32, SearchSpaceError>;
}

/// `Y(-1) = rnti`, `Y(n) = A_p·Y(n-1) mod 65537`, `A_p` chosen by `p mod 3`.
#[derive(Debug, Clone, Copy, Default)]
pub struct MultiplicativeHash;

impl CandidateRandomizer for MultiplicativeHash {
    fn y_value(&self, rnti: u16, coreset: u8, slot: u32) -> Result<u32, SearchSpaceError> {
        y_value(rnti, coreset, slot)
    }
}

/// `Y_{p,n_s}` under the default recurrence. `slot` is the slot index within
/// the frame, so at most 160 multiplications are needed.
pub fn y_value(rnti: u16, coreset: u8, slot: u32) -> Result<u32, SearchSpaceError> {
    if rnti == 0 {
        return Err(SearchSpaceError::ZeroRnti);
    }
    let a = Y_MULTIPLIERS[usize::from(coreset % 3)];
    let mut y = u64::from(rnti);
    for _ in 0..=slot {
        y = a * y % Y_MODULUS;
    }
    Ok(y as u32)
}

fn check_level(level: u8) -> Result<(), SearchSpaceError> {
    if AGGREGATION_LEVELS.contains(&level) {
        Ok(())
    } else {
        Err(SearchSpaceError::InvalidAggregationLevel(level))
    }
}

/// CCE indices of candidate `m` (of `count`) at aggregation level `level`.
pub fn candidate_cces(level: u8, m: u32, count: u32, y: u32, num_cces: u32) -> Result<Vec<u32>, SearchSpaceError> {
    check_level(level)?;
    if m >= count {
        return Err(SearchSpaceError::CandidateIndex { m, count });
    }
    let l = u64::from(level);
    let n = u64::from(num_cces);
    if l > n {
        return Err(SearchSpaceError::AggregationExceedsCoreset { level, num_cces });
    }
    let stride = u64::from(m) * n / (l * u64::from(count));
    let start = l * ((u64::from(y) + stride) % (n / l));
    Ok((start..start + l).map(|c| c as u32).collect())
}

/// One blind-decode hypothesis.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct PdcchCandidate {
    pub ss_index: u8,
    pub ss_type: SsType,
    pub coreset: u8,
    pub aggregation_level: u8,
    pub candidate_index: u32,
    pub cces: Vec<u32>,
    pub slot: u64,
    pub start_symbol: u8,
}

impl PdcchCandidate {
    pub fn first_cce(&self) -> u32 {
        self.cces[0]
    }
}

pub const CANDIDATE_CSV_HEADER: &str = "ss,slot,symbol,L,m,first_cce";

impl PdcchCandidate {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.ss_index,
            self.slot,
            self.start_symbol,
            self.aggregation_level,
            self.candidate_index,
            self.first_cce()
        )
    }
}

/// Candidates of one SS set in one slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SsCandidates {
    pub ss_index: u8,
    pub ss_type: SsType,
    pub coreset: u8,
    pub candidates: Vec<PdcchCandidate>,
}

/// Candidates of one SS set in one slot, ordered (occasion, L descending, m).
pub fn set_candidates(
    cell: &CellConfig,
    ss: &SearchSpaceSet,
    rnti: u16,
    absolute_slot: u64,
    randomizer: &dyn CandidateRandomizer,
) -> Result<Vec<PdcchCandidate>, SearchSpaceError> {
    if !is_monitored_slot(ss, absolute_slot) {
        return Ok(Vec::new());
    }
    let coreset = cell.coreset(ss.coreset).ok_or(SearchSpaceError::UnknownCoreset {
        ss: ss.index,
        coreset: ss.coreset,
    })?;
    let mu = cell
        .bwp(coreset.bwp)
        .map(|b| b.mu)
        .ok_or(SearchSpaceError::UnknownBwp(coreset.index))?;
    let num_cces = coreset.num_cces();
    let y = match ss.ss_type {
        SsType::Css => 0,
        SsType::Uss => {
            let slot_in_frame = mu.slot_position(absolute_slot).slot_in_frame;
            randomizer.y_value(rnti, coreset.index, slot_in_frame)?
        }
    };
    let mut out = Vec::new();
    for start_symbol in occasions_in_slot(ss, coreset.duration)? {
        for (&level, &count) in AGGREGATION_LEVELS.iter().zip(&ss.candidates).rev() {
            let count = u32::from(count);
            for m in 0..count {
                out.push(PdcchCandidate {
                    ss_index: ss.index,
                    ss_type: ss.ss_type,
                    coreset: coreset.index,
                    aggregation_level: level,
                    candidate_index: m,
                    cces: candidate_cces(level, m, count, y, num_cces)?,
                    slot: absolute_slot,
                    start_symbol,
                });
            }
        }
    }
    Ok(out)
}

/// Per-set candidates for the SS sets selected by `filter` (all when `None`),
/// in ascending SS index. Sets not monitored in the slot are omitted.
pub fn candidates_by_set(
    cell: &CellConfig,
    filter: Option<&[u8]>,
    rnti: u16,
    absolute_slot: u64,
    randomizer: &dyn CandidateRandomizer,
) -> Result<Vec<SsCandidates>, SearchSpaceError> {
    let mut sets: Vec<&SearchSpaceSet> = cell
        .search_spaces
        .iter()
        .filter(|ss| filter.is_none_or(|f| f.contains(&ss.index)))
        .collect();
    sets.sort_by_key(|ss| ss.index);
    let mut out = Vec::new();
    for ss in sets {
        if !is_monitored_slot(ss, absolute_slot) {
            continue;
        }
        out.push(SsCandidates {
            ss_index: ss.index,
            ss_type: ss.ss_type,
            coreset: ss.coreset,
            candidates: set_candidates(cell, ss, rnti, absolute_slot, randomizer)?,
        });
    }
    Ok(out)
}

/// All candidates the UE `rnti` would monitor in `absolute_slot`, ordered
/// (SS index, occasion, L descending, m ascending).
pub fn enumerate_candidates(
    cell: &CellConfig,
    rnti: u16,
    absolute_slot: u64,
) -> Result<Vec<PdcchCandidate>, SearchSpaceError> {
    Ok(candidates_by_set(cell, None, rnti, absolute_slot, &MultiplicativeHash)?
        .into_iter()
        .flat_map(|s| s.candidates)
        .collect())
}
