//! Numerology, bandwidth parts, CORESET geometry and the cell configuration
//! that ties them to search-space sets and TCI states.

mod validate;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beam::TciState;
use crate::dci::DciFormat;
use crate::search_space::SearchSpaceSet;

pub use validate::{validate_cell, Subject, Violation, ViolationCode};

pub const SYMBOLS_PER_SLOT: u8 = 14;
pub const SUBCARRIERS_PER_PRB: u8 = 12;
pub const PRBS_PER_GROUP: u32 = 6;
pub const REGS_PER_CCE: u32 = 6;

pub const MAX_BWPS_PER_CELL: usize = 4;
pub const MAX_CORESETS_PER_BWP: usize = 3;
pub const MAX_CORESETS_PER_CELL: usize = 12;
pub const MAX_CORESET_INDEX: u8 = 11;
pub const MAX_CORESET_DURATION: u8 = 3;
pub const MAX_TCI_STATES_PER_CORESET: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("numerology mu={0} out of range 0..=4")]
    NumerologyOutOfRange(u8),
    #[error("invalid frequency resource bitmap {0:?}: expected a string of '0'/'1' (max 64 groups)")]
    InvalidFreqResource(String),
}

/// Subcarrier spacing exponent: SCS = 15·2^mu kHz.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Numerology(u8);

impl Numerology {
    pub const MAX_MU: u8 = 4;

    pub fn new(mu: u8) -> Result<Self, ModelError> {
        if mu > Self::MAX_MU {
            return Err(ModelError::NumerologyOutOfRange(mu));
        }
        Ok(Numerology(mu))
    }

    pub fn mu(self) -> u8 {
        self.0
    }

    pub fn scs_khz(self) -> u32 {
        15 << self.0
    }

    /// 2^-mu ms. Exact in binary floating point for every legal mu.
    pub fn slot_duration_ms(self) -> f64 {
        1.0 / f64::from(1u32 << self.0)
    }

    pub fn slots_per_subframe(self) -> u32 {
        1 << self.0
    }

    pub fn slots_per_frame(self) -> u32 {
        10 << self.0
    }

    pub fn symbols_per_slot(self) -> u8 {
        SYMBOLS_PER_SLOT
    }

    /// Splits an absolute slot count (slot 0 = first slot of frame 0) into
    /// frame, subframe and slot-within-frame.
    pub fn slot_position(self, absolute_slot: u64) -> SlotPosition {
        let per_frame = u64::from(self.slots_per_frame());
        let per_subframe = u64::from(self.slots_per_subframe());
        let slot_in_frame = (absolute_slot % per_frame) as u32;
        SlotPosition {
            frame: absolute_slot / per_frame,
            subframe: (u64::from(slot_in_frame) / per_subframe) as u8,
            slot_in_frame,
        }
    }
}

impl TryFrom<u8> for Numerology {
    type Error = ModelError;
    fn try_from(mu: u8) -> Result<Self, Self::Error> {
        Numerology::new(mu)
    }
}

impl From<Numerology> for u8 {
    fn from(n: Numerology) -> u8 {
        n.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotPosition {
    pub frame: u64,
    pub subframe: u8,
    pub slot_in_frame: u32,
}

pub fn slot_duration_ms(mu: u8) -> Result<f64, ModelError> {
    Ok(Numerology::new(mu)?.slot_duration_ms())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandwidthPart {
    pub index: u8,
    /// PRB offset from point A.
    pub start_prb: u32,
    pub num_prbs: u32,
    pub mu: Numerology,
}

impl BandwidthPart {
    pub fn end_prb(&self) -> u32 {
        self.start_prb + self.num_prbs
    }

    pub fn contains_prb(&self, prb: u32) -> bool {
        prb >= self.start_prb && prb < self.end_prb()
    }
}

/// Bitmask of 6-PRB groups. Bit `g` set means PRBs `6g..6g+6` (relative to the
/// CORESET's PRB origin) belong to the CORESET.
///
/// The text form is a string of `0`/`1` where character `g` is group `g`,
/// so the leftmost character is the group nearest point A.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct FreqResource(u64);

impl FreqResource {
    pub fn from_bits(bits: u64) -> Self {
        FreqResource(bits)
    }

    /// `n` contiguous groups starting at group 0.
    pub fn contiguous(groups: u32) -> Self {
        if groups >= 64 {
            FreqResource(u64::MAX)
        } else {
            FreqResource((1u64 << groups) - 1)
        }
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn num_groups(self) -> u32 {
        self.0.count_ones()
    }

    pub fn groups(self) -> impl Iterator<Item = u32> {
        (0..64).filter(move |g| self.0 >> g & 1 == 1)
    }
}

impl FromStr for FreqResource {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() || s.len() > 64 {
            return Err(ModelError::InvalidFreqResource(s.to_string()));
        }
        let mut bits = 0u64;
        for (g, ch) in s.chars().enumerate() {
            match ch {
                '1' => bits |= 1 << g,
                '0' => {}
                _ => return Err(ModelError::InvalidFreqResource(s.to_string())),
            }
        }
        Ok(FreqResource(bits))
    }
}

impl fmt::Display for FreqResource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = 64 - self.0.leading_zeros();
        for g in 0..width.max(1) {
            f.write_str(if self.0 >> g & 1 == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl TryFrom<String> for FreqResource {
    type Error = ModelError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<FreqResource> for String {
    fn from(f: FreqResource) -> String {
        f.to_string()
    }
}

impl Serialize for FreqResource {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for FreqResource {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CceRegMapping {
    Interleaved,
    NonInterleaved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecoderGranularity {
    /// DMRS in every REG of the CORESET, one precoder.
    #[default]
    Wideband,
    /// DMRS only in the REG bundles a PDCCH actually uses.
    Narrowband,
}

fn default_rows() -> u8 {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoresetConfig {
    pub index: u8,
    #[serde(default)]
    pub bwp: u8,
    pub freq_resource: FreqResource,
    pub duration: u8,
    pub mapping: CceRegMapping,
    pub bundle_size: u8,
    #[serde(default = "default_rows")]
    pub interleaver_rows: u8,
    #[serde(default)]
    pub shift: u16,
    #[serde(default)]
    pub precoder: PrecoderGranularity,
    #[serde(default)]
    pub tci_states: Vec<u32>,
    #[serde(default)]
    pub dmrs_scrambling_id: u16,
    #[serde(default)]
    pub is_coreset0: bool,
    /// PRB (relative to point A) of group 0's first PRB. Must sit on the
    /// 6-PRB grid unless this is CORESET 0, whose placement is SSB-relative.
    #[serde(default)]
    pub prb_offset: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoresetGeometry {
    pub num_prbs: u32,
    pub num_regs: u32,
    pub num_cces: u32,
}

pub fn coreset_geometry(c: &CoresetConfig) -> CoresetGeometry {
    let num_prbs = PRBS_PER_GROUP * c.freq_resource.num_groups();
    let num_regs = num_prbs * u32::from(c.duration);
    CoresetGeometry {
        num_prbs,
        num_regs,
        num_cces: num_regs / REGS_PER_CCE,
    }
}

impl CoresetConfig {
    /// A contiguous non-interleaved CORESET at the grid origin; handy for tests
    /// and examples.
    pub fn non_interleaved(index: u8, num_prbs: u32, duration: u8) -> Self {
        CoresetConfig {
            index,
            bwp: 0,
            freq_resource: FreqResource::contiguous(num_prbs / PRBS_PER_GROUP),
            duration,
            mapping: CceRegMapping::NonInterleaved,
            bundle_size: 6,
            interleaver_rows: 1,
            shift: 0,
            precoder: PrecoderGranularity::Wideband,
            tci_states: Vec::new(),
            dmrs_scrambling_id: 0,
            is_coreset0: index == 0,
            prb_offset: 0,
        }
    }

    pub fn interleaved(index: u8, num_prbs: u32, duration: u8, bundle_size: u8, rows: u8, shift: u16) -> Self {
        CoresetConfig {
            mapping: CceRegMapping::Interleaved,
            bundle_size,
            interleaver_rows: rows,
            shift,
            ..Self::non_interleaved(index, num_prbs, duration)
        }
    }

    pub fn geometry(&self) -> CoresetGeometry {
        coreset_geometry(self)
    }

    pub fn num_cces(&self) -> u32 {
        self.geometry().num_cces
    }

    pub fn num_bundles(&self) -> u32 {
        if self.bundle_size == 0 {
            return 0;
        }
        self.geometry().num_regs / u32::from(self.bundle_size)
    }

    /// Absolute PRB indices (from point A) occupied by the CORESET, ascending.
    pub fn prbs(&self) -> Vec<u32> {
        self.freq_resource
            .groups()
            .flat_map(|g| {
                let first = self.prb_offset + g * PRBS_PER_GROUP;
                first..first + PRBS_PER_GROUP
            })
            .collect()
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CellConfig {
    #[serde(default)]
    pub phys_cell_id: u16,
    /// Absolute frequency reference of PRB 0; carried but not interpreted.
    #[serde(default)]
    pub point_a: u64,
    /// Overbooking is legal only on the primary cell.
    #[serde(default = "default_true")]
    pub is_primary: bool,
    #[serde(default, rename = "bwp")]
    pub bwps: Vec<BandwidthPart>,
    #[serde(default, rename = "coreset")]
    pub coresets: Vec<CoresetConfig>,
    #[serde(default, rename = "search_space")]
    pub search_spaces: Vec<SearchSpaceSet>,
    #[serde(default, rename = "tci_state")]
    pub tci_pool: Vec<TciState>,
    /// Configured payload size (bits, before padding) per monitored DCI format.
    #[serde(default)]
    pub dci_sizes: BTreeMap<DciFormat, u32>,
}

impl CellConfig {
    pub fn coreset(&self, index: u8) -> Option<&CoresetConfig> {
        self.coresets.iter().find(|c| c.index == index)
    }

    pub fn bwp(&self, index: u8) -> Option<&BandwidthPart> {
        self.bwps.iter().find(|b| b.index == index)
    }

    pub fn search_space(&self, index: u8) -> Option<&SearchSpaceSet> {
        self.search_spaces.iter().find(|s| s.index == index)
    }

    /// Numerology of the BWP a CORESET belongs to.
    pub fn coreset_numerology(&self, coreset: u8) -> Option<Numerology> {
        let c = self.coreset(coreset)?;
        self.bwp(c.bwp).map(|b| b.mu)
    }
}
