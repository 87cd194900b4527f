//! Per-slot blind-decode and channel-estimation budgets, SS-set overbooking
//! and the carrier-aggregation split of the limits.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::model::{CellConfig, Subject, Violation, ViolationCode};
use crate::search_space::{
    candidates_by_set, MultiplicativeHash, PdcchCandidate, SearchSpaceError, SsCandidates, SsType,
};

/// Blind decodes per slot for mu = 0..=3.
pub const MAX_CANDIDATES_PER_SLOT: [u32; 4] = [44, 36, 22, 20];
/// Non-overlapping CCEs (channel estimates) per slot for mu = 0..=3.
pub const MAX_CCES_PER_SLOT: [u32; 4] = [56, 56, 48, 32];
pub const MIN_CA_CELLS_CAPABILITY: u32 = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BudgetError {
    #[error("no monitoring limits defined for mu={0}")]
    UnsupportedNumerology(u8),
    #[error("reported CA cell capability {0} is below 4")]
    CapabilityTooSmall(u32),
    #[error("no serving cells configured")]
    NoServingCells,
    #[error("common search spaces alone need {candidates} candidates / {cces} CCEs, limits are {limit_candidates} / {limit_cces}")]
    CssOverLimit {
        candidates: u32,
        cces: u32,
        limit_candidates: u32,
        limit_cces: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Limits {
    pub candidates: u32,
    pub cces: u32,
}

impl Limits {
    pub fn new(candidates: u32, cces: u32) -> Self {
        Limits { candidates, cces }
    }

    pub fn min(self, other: Limits) -> Limits {
        Limits {
            candidates: self.candidates.min(other.candidates),
            cces: self.cces.min(other.cces),
        }
    }

    fn admits(self, candidates: u32, cces: u32) -> bool {
        candidates <= self.candidates && cces <= self.cces
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct UeCapability {
    n_cells_cap: u32,
}

impl UeCapability {
    pub fn new(n_cells_cap: u32) -> Result<Self, BudgetError> {
        if n_cells_cap < MIN_CA_CELLS_CAPABILITY {
            return Err(BudgetError::CapabilityTooSmall(n_cells_cap));
        }
        Ok(UeCapability { n_cells_cap })
    }

    pub fn n_cells_cap(self) -> u32 {
        self.n_cells_cap
    }
}

impl Default for UeCapability {
    fn default() -> Self {
        UeCapability {
            n_cells_cap: MIN_CA_CELLS_CAPABILITY,
        }
    }
}

/// Number of configured downlink serving cells per numerology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CellGroupCa {
    pub cells_per_mu: [u32; 4],
}

impl CellGroupCa {
    pub fn new(cells_per_mu: [u32; 4]) -> Result<Self, BudgetError> {
        let ca = CellGroupCa { cells_per_mu };
        if ca.total() == 0 {
            return Err(BudgetError::NoServingCells);
        }
        Ok(ca)
    }

    pub fn single_cell(mu: u8) -> Result<Self, BudgetError> {
        let mut cells = [0; 4];
        *cells
            .get_mut(usize::from(mu))
            .ok_or(BudgetError::UnsupportedNumerology(mu))? = 1;
        Ok(CellGroupCa { cells_per_mu: cells })
    }

    pub fn total(&self) -> u32 {
        self.cells_per_mu.iter().sum()
    }
}

fn table_index(mu: u8) -> Result<usize, BudgetError> {
    if mu <= 3 {
        Ok(usize::from(mu))
    } else {
        Err(BudgetError::UnsupportedNumerology(mu))
    }
}

pub fn non_ca_limits(mu: u8) -> Result<Limits, BudgetError> {
    let i = table_index(mu)?;
    Ok(Limits::new(MAX_CANDIDATES_PER_SLOT[i], MAX_CCES_PER_SLOT[i]))
}

/// Group limit for the cells of numerology `mu`:
/// `⌊cap · X_max,mu · N_mu / Σ_j N_j⌋` for X in {candidates, CCEs}.
pub fn ca_limits(cap: UeCapability, ca: &CellGroupCa, mu: u8) -> Result<Limits, BudgetError> {
    let i = table_index(mu)?;
    let total = u64::from(ca.total());
    if total == 0 {
        return Err(BudgetError::NoServingCells);
    }
    let n_mu = u64::from(ca.cells_per_mu[i]);
    let cap = u64::from(cap.n_cells_cap);
    let scale = |max: u32| (cap * u64::from(max) * n_mu / total) as u32;
    Ok(Limits::new(
        scale(MAX_CANDIDATES_PER_SLOT[i]),
        scale(MAX_CCES_PER_SLOT[i]),
    ))
}

/// Whether the CA limit is in force at all. With at most four configured cells,
/// or no more cells than the UE reported, only the per-cell limits apply.
pub fn ca_limit_applies(cap: UeCapability, ca: &CellGroupCa) -> bool {
    let total = ca.total();
    total > MIN_CA_CELLS_CAPABILITY && total > cap.n_cells_cap
}

/// Limits governing overbooking on the primary cell: the smaller of the CA
/// group limit and the per-cell limit.
pub fn overbooking_limits(cap: UeCapability, ca: &CellGroupCa, mu: u8) -> Result<Limits, BudgetError> {
    Ok(ca_limits(cap, ca, mu)?.min(non_ca_limits(mu)?))
}

/// Shares a group budget among cells in index order, each capped by the
/// per-cell limit.
pub fn share_group_budget(group: Limits, per_cell: Limits, demands: &[Limits]) -> Vec<Limits> {
    let mut left = group;
    demands
        .iter()
        .map(|d| {
            let grant = d.min(per_cell).min(left);
            left.candidates -= grant.candidates;
            left.cces -= grant.cces;
            grant
        })
        .collect()
}

type CceKey = (u8, u8, u32);

fn cce_keys(c: &PdcchCandidate) -> impl Iterator<Item = CceKey> + '_ {
    c.cces.iter().map(move |&k| (c.coreset, c.start_symbol, k))
}

/// Distinct (CORESET, occasion start symbol, CCE) triples. Overlapping
/// candidates in the same CORESET and occasion share channel estimates.
pub fn count_cces_for_estimation(candidates: &[PdcchCandidate]) -> usize {
    candidates.iter().flat_map(cce_keys).collect::<BTreeSet<_>>().len()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SlotBudgetReport {
    pub mapped_ss: Vec<u8>,
    pub dropped_ss: Vec<u8>,
    pub candidates_used: u32,
    pub cces_used: u32,
}

impl SlotBudgetReport {
    pub fn is_mapped(&self, ss: u8) -> bool {
        self.mapped_ss.contains(&ss)
    }
}

/// Maps SS sets into a slot: common sets first, then UE-specific sets in
/// ascending index. The first UE-specific set that would push either count
/// past its limit is dropped together with every higher-index set.
///
/// CCE demand is incremental: a set only pays for CCEs not already estimated
/// for earlier sets, which is why mapping order matters.
pub fn allocate_slot(sets: &[SsCandidates], limits: Limits) -> Result<SlotBudgetReport, BudgetError> {
    let mut css: Vec<&SsCandidates> = sets.iter().filter(|s| s.ss_type == SsType::Css).collect();
    let mut uss: Vec<&SsCandidates> = sets.iter().filter(|s| s.ss_type == SsType::Uss).collect();
    css.sort_by_key(|s| s.ss_index);
    uss.sort_by_key(|s| s.ss_index);

    let mut used = BTreeSet::new();
    let mut candidates = 0u32;
    let mut mapped = Vec::new();
    for set in css {
        candidates += set.candidates.len() as u32;
        used.extend(set.candidates.iter().flat_map(cce_keys));
        mapped.push(set.ss_index);
    }
    if !limits.admits(candidates, used.len() as u32) {
        return Err(BudgetError::CssOverLimit {
            candidates,
            cces: used.len() as u32,
            limit_candidates: limits.candidates,
            limit_cces: limits.cces,
        });
    }

    let mut dropped = Vec::new();
    for set in uss {
        if !dropped.is_empty() {
            dropped.push(set.ss_index);
            continue;
        }
        let new_cces: BTreeSet<CceKey> = set
            .candidates
            .iter()
            .flat_map(cce_keys)
            .filter(|k| !used.contains(k))
            .collect();
        let next_candidates = candidates + set.candidates.len() as u32;
        let next_cces = (used.len() + new_cces.len()) as u32;
        if limits.admits(next_candidates, next_cces) {
            candidates = next_candidates;
            used.extend(new_cces);
            mapped.push(set.ss_index);
        } else {
            dropped.push(set.ss_index);
        }
    }

    Ok(SlotBudgetReport {
        mapped_ss: mapped,
        dropped_ss: dropped,
        candidates_used: candidates,
        cces_used: used.len() as u32,
    })
}

/// Total demand of every set in a slot, without dropping anything.
pub fn slot_demand(sets: &[SsCandidates]) -> Limits {
    let all: Vec<PdcchCandidate> = sets.iter().flat_map(|s| s.candidates.iter().cloned()).collect();
    Limits::new(all.len() as u32, count_cces_for_estimation(&all) as u32)
}

/// Secondary cells may not be overbooked: the full demand must fit.
pub fn check_secondary_slot(sets: &[SsCandidates], limits: Limits) -> Result<(), Limits> {
    let demand = slot_demand(sets);
    if limits.admits(demand.candidates, demand.cces) {
        Ok(())
    } else {
        Err(demand)
    }
}

/// Candidates belonging to the SS sets the report mapped.
pub fn mapped_candidates(sets: &[SsCandidates], report: &SlotBudgetReport) -> Vec<PdcchCandidate> {
    sets.iter()
        .filter(|s| report.is_mapped(s.ss_index))
        .flat_map(|s| s.candidates.iter().cloned())
        .collect()
}

/// Budget outcome of one slot on one BWP.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HorizonSlot {
    pub slot: u64,
    pub bwp: u8,
    pub mapped_ss: Vec<u8>,
    pub dropped_ss: Vec<u8>,
    pub candidates: u32,
    pub cces: u32,
    pub limits: Limits,
    /// `ok`, or the violation code for this slot.
    pub status: &'static str,
}

/// Outcome of checking every slot of a horizon against the monitoring limits.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HorizonReport {
    pub slots: Vec<HorizonSlot>,
    pub violations: Vec<Violation>,
    /// Slots in which at least one USS set was dropped.
    pub slots_with_drops: u64,
    pub dropped_sets: u64,
}

/// Runs the per-slot budget over `horizon` slots for every BWP with a limit
/// table, as seen by a UE with `rnti`. Violations are reported once per BWP
/// with the first offending slot as subject.
pub fn check_horizon(
    cell: &CellConfig,
    cap: UeCapability,
    ca: Option<&CellGroupCa>,
    rnti: u16,
    horizon: u64,
) -> Result<HorizonReport, SearchSpaceError> {
    let mut report = HorizonReport::default();
    let mut first: BTreeMap<(ViolationCode, u8), (u64, u64, String)> = BTreeMap::new();
    for bwp in &cell.bwps {
        let mu = bwp.mu.mu();
        let Ok(single) = CellGroupCa::single_cell(mu) else {
            continue;
        };
        let Ok(limits) = overbooking_limits(cap, ca.unwrap_or(&single), mu) else {
            continue;
        };
        let sets: Vec<u8> = cell
            .search_spaces
            .iter()
            .filter(|ss| cell.coreset(ss.coreset).is_some_and(|c| c.bwp == bwp.index))
            .map(|ss| ss.index)
            .collect();
        for slot in 0..horizon {
            let cands = candidates_by_set(cell, Some(&sets), rnti, slot, &MultiplicativeHash)?;
            let demand = slot_demand(&cands);
            let mut row = HorizonSlot {
                slot,
                bwp: bwp.index,
                mapped_ss: cands.iter().map(|c| c.ss_index).collect(),
                dropped_ss: Vec::new(),
                candidates: demand.candidates,
                cces: demand.cces,
                limits,
                status: "ok",
            };
            let mut note = |code: ViolationCode, detail: String| {
                let e = first.entry((code, bwp.index)).or_insert((slot, 0, detail));
                e.1 += 1;
                code.as_str()
            };
            if cell.is_primary {
                match allocate_slot(&cands, limits) {
                    Ok(r) => {
                        if !r.dropped_ss.is_empty() {
                            report.slots_with_drops += 1;
                            report.dropped_sets += r.dropped_ss.len() as u64;
                        }
                        row.candidates = r.candidates_used;
                        row.cces = r.cces_used;
                        row.mapped_ss = r.mapped_ss;
                        row.dropped_ss = r.dropped_ss;
                    }
                    Err(e) => row.status = note(ViolationCode::SsCssOverLimit, e.to_string()),
                }
            } else if let Err(d) = check_secondary_slot(&cands, limits) {
                row.status = note(
                    ViolationCode::SecondaryCellOverbooked,
                    format!(
                        "demand {} candidates / {} CCEs exceeds {} / {} on a secondary cell",
                        d.candidates, d.cces, limits.candidates, limits.cces
                    ),
                );
            }
            report.slots.push(row);
        }
    }
    for ((code, bwp), (slot, count, detail)) in first {
        report.violations.push(Violation::new(
            code,
            Subject::Slot(slot),
            format!("bwp {bwp}: {detail} ({count} slot(s) affected in horizon)"),
        ));
    }
    Ok(report)
}
