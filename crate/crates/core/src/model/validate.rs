use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::*;
use crate::search_space::{MAX_SS_INDEX, MAX_SS_PER_BWP, MAX_SS_PER_CELL};

/// Machine-readable violation codes. The string form is stable and is what the
/// linter prints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationCode {
    BwpCountPerCell,
    BwpIndexRange,
    BwpIndexDuplicate,
    BwpEmpty,
    CoresetIndexRange,
    CoresetIndexDuplicate,
    CoresetCountPerBwp,
    CoresetCountPerCell,
    CoresetBwpMissing,
    CoresetEmpty,
    CoresetDuration,
    CoresetOffGrid,
    CoresetOutsideBwp,
    Coreset0Index,
    Coreset0NumerologyMismatch,
    BundleSize,
    NonInterleavedBundleSize,
    InterleaverRows,
    TciStateCount,
    TciStateUnknown,
    TciIdDuplicate,
    SsIndexRange,
    SsIndexDuplicate,
    SsCountPerBwp,
    SsCountPerCell,
    SsCoresetMissing,
    SsPeriodicity,
    SsOffset,
    SsDuration,
    SsBitmapEmpty,
    SsOccasionOverflow,
    SsCandidateCount,
    SsAggregationExceedsCoreset,
    DciSizeBudget,
    SsCssOverLimit,
    SecondaryCellOverbooked,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        use ViolationCode::*;
        match self {
            BwpCountPerCell => "bwp_count_per_cell",
            BwpIndexRange => "bwp_index_range",
            BwpIndexDuplicate => "bwp_index_duplicate",
            BwpEmpty => "bwp_empty",
            CoresetIndexRange => "coreset_index_range",
            CoresetIndexDuplicate => "coreset_index_duplicate",
            CoresetCountPerBwp => "coreset_count_per_bwp",
            CoresetCountPerCell => "coreset_count_per_cell",
            CoresetBwpMissing => "coreset_bwp_missing",
            CoresetEmpty => "coreset_empty",
            CoresetDuration => "coreset_duration",
            CoresetOffGrid => "coreset_off_grid",
            CoresetOutsideBwp => "coreset_outside_bwp",
            Coreset0Index => "coreset0_index",
            Coreset0NumerologyMismatch => "coreset0_numerology_mismatch",
            BundleSize => "bundle_size",
            NonInterleavedBundleSize => "non_interleaved_bundle_size",
            InterleaverRows => "interleaver_rows",
            TciStateCount => "tci_state_count",
            TciStateUnknown => "tci_state_unknown",
            TciIdDuplicate => "tci_id_duplicate",
            SsIndexRange => "ss_index_range",
            SsIndexDuplicate => "ss_index_duplicate",
            SsCountPerBwp => "ss_count_per_bwp",
            SsCountPerCell => "ss_count_per_cell",
            SsCoresetMissing => "ss_coreset_missing",
            SsPeriodicity => "ss_periodicity",
            SsOffset => "ss_offset",
            SsDuration => "ss_duration",
            SsBitmapEmpty => "ss_bitmap_empty",
            SsOccasionOverflow => "ss_occasion_overflow",
            SsCandidateCount => "ss_candidate_count",
            SsAggregationExceedsCoreset => "ss_aggregation_exceeds_coreset",
            DciSizeBudget => "dci_size_budget",
            SsCssOverLimit => "css_over_limit",
            SecondaryCellOverbooked => "secondary_cell_overbooked",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum Subject {
    Cell,
    Bwp(u8),
    Coreset(u8),
    SearchSpace(u8),
    TciState(u32),
    Slot(u64),
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subject::Cell => f.write_str("cell"),
            Subject::Bwp(i) => write!(f, "bwp {i}"),
            Subject::Coreset(i) => write!(f, "coreset {i}"),
            Subject::SearchSpace(i) => write!(f, "search_space {i}"),
            Subject::TciState(i) => write!(f, "tci_state {i}"),
            Subject::Slot(i) => write!(f, "slot {i}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub subject: Subject,
    pub detail: String,
}

impl Violation {
    pub fn new(code: ViolationCode, subject: Subject, detail: impl Into<String>) -> Self {
        Violation {
            code,
            subject,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]: {}", self.code, self.subject, self.detail)
    }
}

fn duplicates<K: Ord + Copy>(keys: impl Iterator<Item = K>) -> Vec<K> {
    let mut counts = BTreeMap::new();
    for k in keys {
        *counts.entry(k).or_insert(0usize) += 1;
    }
    counts.into_iter().filter(|&(_, n)| n > 1).map(|(k, _)| k).collect()
}

/// Checks every structural invariant of a cell configuration. The report is
/// sorted, so permuting any of the input lists yields the same result.
pub fn validate_cell(cell: &CellConfig) -> Vec<Violation> {
    use ViolationCode::*;
    let mut out = Vec::new();

    // Bandwidth parts.
    if cell.bwps.len() > MAX_BWPS_PER_CELL {
        out.push(Violation::new(
            BwpCountPerCell,
            Subject::Cell,
            format!("{} BWPs configured, at most {MAX_BWPS_PER_CELL}", cell.bwps.len()),
        ));
    }
    for dup in duplicates(cell.bwps.iter().map(|b| b.index)) {
        out.push(Violation::new(
            BwpIndexDuplicate,
            Subject::Bwp(dup),
            "BWP index used more than once",
        ));
    }
    for b in &cell.bwps {
        if usize::from(b.index) >= MAX_BWPS_PER_CELL {
            out.push(Violation::new(
                BwpIndexRange,
                Subject::Bwp(b.index),
                "BWP index must be 0..=3",
            ));
        }
        if b.num_prbs == 0 {
            out.push(Violation::new(BwpEmpty, Subject::Bwp(b.index), "BWP has no PRBs"));
        }
    }

    // CORESETs.
    if cell.coresets.len() > MAX_CORESETS_PER_CELL {
        out.push(Violation::new(
            CoresetCountPerCell,
            Subject::Cell,
            format!(
                "{} CORESETs configured, at most {MAX_CORESETS_PER_CELL}",
                cell.coresets.len()
            ),
        ));
    }
    for dup in duplicates(cell.coresets.iter().map(|c| c.index)) {
        out.push(Violation::new(
            CoresetIndexDuplicate,
            Subject::Coreset(dup),
            "CORESET index used more than once",
        ));
    }
    let mut per_bwp: BTreeMap<u8, usize> = BTreeMap::new();
    for c in &cell.coresets {
        *per_bwp.entry(c.bwp).or_default() += 1;
    }
    for (&bwp, &n) in &per_bwp {
        if n > MAX_CORESETS_PER_BWP {
            out.push(Violation::new(
                CoresetCountPerBwp,
                Subject::Bwp(bwp),
                format!("{n} CORESETs on one BWP, at most {MAX_CORESETS_PER_BWP}"),
            ));
        }
    }
    let tci_ids: Vec<u32> = cell.tci_pool.iter().map(|t| t.id).collect();
    for dup in duplicates(tci_ids.iter().copied()) {
        out.push(Violation::new(
            TciIdDuplicate,
            Subject::TciState(dup),
            "TCI state id used more than once",
        ));
    }
    for c in &cell.coresets {
        validate_coreset(cell, c, &tci_ids, &mut out);
    }

    // Search-space sets.
    if cell.search_spaces.len() > MAX_SS_PER_CELL {
        out.push(Violation::new(
            SsCountPerCell,
            Subject::Cell,
            format!(
                "{} SS sets configured, at most {MAX_SS_PER_CELL}",
                cell.search_spaces.len()
            ),
        ));
    }
    for dup in duplicates(cell.search_spaces.iter().map(|s| s.index)) {
        out.push(Violation::new(
            SsIndexDuplicate,
            Subject::SearchSpace(dup),
            "SS set index used more than once",
        ));
    }
    let mut ss_per_bwp: BTreeMap<u8, usize> = BTreeMap::new();
    for ss in &cell.search_spaces {
        let s = Subject::SearchSpace(ss.index);
        if ss.index > MAX_SS_INDEX {
            out.push(Violation::new(SsIndexRange, s, "SS set index must be 0..=39"));
        }
        if ss.periodicity == 0 {
            out.push(Violation::new(
                SsPeriodicity,
                s,
                "periodicity must be at least one slot",
            ));
        } else {
            if ss.offset >= ss.periodicity {
                out.push(Violation::new(
                    SsOffset,
                    s,
                    format!("offset {} not below periodicity {}", ss.offset, ss.periodicity),
                ));
            }
            if ss.duration == 0 || ss.duration > ss.periodicity {
                out.push(Violation::new(
                    SsDuration,
                    s,
                    format!("duration {} outside 1..={}", ss.duration, ss.periodicity),
                ));
            }
        }
        if ss.symbols.is_empty() {
            out.push(Violation::new(
                SsBitmapEmpty,
                s,
                "monitoring symbol bitmap has no set bit",
            ));
        }
        if let Some((l, &m)) = ss
            .candidates
            .iter()
            .enumerate()
            .find(|&(_, &m)| m > crate::search_space::MAX_CANDIDATES_PER_LEVEL)
        {
            out.push(Violation::new(
                SsCandidateCount,
                s,
                format!(
                    "{m} candidates at AL {} exceeds 8",
                    crate::search_space::AGGREGATION_LEVELS[l]
                ),
            ));
        }
        // Duplicate CORESET indices are reported separately; check against every
        // match so the report stays independent of list order.
        let targets: Vec<&CoresetConfig> = cell.coresets.iter().filter(|c| c.index == ss.coreset).collect();
        if targets.is_empty() {
            out.push(Violation::new(
                SsCoresetMissing,
                s,
                format!("references unknown CORESET {}", ss.coreset),
            ));
        }
        let mut bwps: Vec<u8> = targets.iter().map(|c| c.bwp).collect();
        bwps.sort_unstable();
        bwps.dedup();
        for b in bwps {
            *ss_per_bwp.entry(b).or_default() += 1;
        }
        for c in targets {
            if (1..=MAX_CORESET_DURATION).contains(&c.duration) {
                if let Some(first) = ss.symbols.first_overflow(c.duration) {
                    out.push(Violation::new(
                        SsOccasionOverflow,
                        s,
                        format!(
                            "occasion at symbol {first} with CORESET duration {} runs past symbol 13",
                            c.duration
                        ),
                    ));
                }
            }
            let n_cce = c.num_cces();
            for (l, &m) in crate::search_space::AGGREGATION_LEVELS.iter().zip(&ss.candidates) {
                if m > 0 && u32::from(*l) > n_cce {
                    out.push(Violation::new(
                        SsAggregationExceedsCoreset,
                        s,
                        format!("AL {l} configured but CORESET {} has {n_cce} CCEs", c.index),
                    ));
                }
            }
        }
    }
    for (&bwp, &n) in &ss_per_bwp {
        if n > MAX_SS_PER_BWP {
            out.push(Violation::new(
                SsCountPerBwp,
                Subject::Bwp(bwp),
                format!("{n} SS sets on one BWP, at most {MAX_SS_PER_BWP}"),
            ));
        }
    }

    if !cell.dci_sizes.is_empty() {
        let monitored = crate::dci::MonitoredFormat::defaults_for(&cell.dci_sizes);
        if let Err(v) = crate::dci::check_size_budget(&monitored) {
            out.push(Violation::new(DciSizeBudget, Subject::Cell, v.to_string()));
        }
    }

    out.sort();
    out
}

fn validate_coreset(cell: &CellConfig, c: &CoresetConfig, tci_ids: &[u32], out: &mut Vec<Violation>) {
    use ViolationCode::*;
    let s = Subject::Coreset(c.index);
    if c.index > MAX_CORESET_INDEX {
        out.push(Violation::new(CoresetIndexRange, s, "CORESET index must be 0..=11"));
    }
    if c.is_coreset0 != (c.index == 0) {
        out.push(Violation::new(
            Coreset0Index,
            s,
            "the CORESET 0 flag must be set exactly on index 0",
        ));
    }
    if c.freq_resource.num_groups() == 0 {
        out.push(Violation::new(CoresetEmpty, s, "frequency resource has no 6-PRB group"));
    }
    if !(1..=MAX_CORESET_DURATION).contains(&c.duration) {
        out.push(Violation::new(
            CoresetDuration,
            s,
            format!("duration {} outside 1..=3", c.duration),
        ));
    }
    if !c.is_coreset0 && !c.prb_offset.is_multiple_of(PRBS_PER_GROUP) {
        out.push(Violation::new(
            CoresetOffGrid,
            s,
            format!("PRB offset {} is not on the 6-PRB grid", c.prb_offset),
        ));
    }

    let bundle_ok = c.bundle_size > 0
        && REGS_PER_CCE.is_multiple_of(u32::from(c.bundle_size))
        && c.duration > 0
        && c.bundle_size.is_multiple_of(c.duration);
    if !bundle_ok {
        out.push(Violation::new(
            BundleSize,
            s,
            format!(
                "bundle size {} must divide 6 and be a multiple of duration {}",
                c.bundle_size, c.duration
            ),
        ));
    }
    match c.mapping {
        CceRegMapping::NonInterleaved => {
            if c.bundle_size != 6 {
                out.push(Violation::new(
                    NonInterleavedBundleSize,
                    s,
                    "non-interleaved mapping requires bundle size 6",
                ));
            }
        }
        CceRegMapping::Interleaved => {
            let n_b = c.num_bundles();
            if c.interleaver_rows == 0 || (bundle_ok && !n_b.is_multiple_of(u32::from(c.interleaver_rows))) {
                out.push(Violation::new(
                    InterleaverRows,
                    s,
                    format!("{n_b} bundles not divisible by {} rows", c.interleaver_rows),
                ));
            }
        }
    }

    if c.tci_states.len() > MAX_TCI_STATES_PER_CORESET {
        out.push(Violation::new(
            TciStateCount,
            s,
            format!(
                "{} TCI states, at most {MAX_TCI_STATES_PER_CORESET}",
                c.tci_states.len()
            ),
        ));
    }
    for id in &c.tci_states {
        if !tci_ids.contains(id) {
            out.push(Violation::new(
                TciStateUnknown,
                s,
                format!("TCI state {id} not in the cell pool"),
            ));
        }
    }

    let bwps: Vec<&BandwidthPart> = cell.bwps.iter().filter(|b| b.index == c.bwp).collect();
    if bwps.is_empty() {
        out.push(Violation::new(
            CoresetBwpMissing,
            s,
            format!("BWP {} does not exist", c.bwp),
        ));
        return;
    }
    let prbs = c.prbs();
    for bwp in bwps {
        if c.is_coreset0 && c.bwp != 0 {
            for initial in cell.bwps.iter().filter(|b| b.index == 0) {
                if initial.mu != bwp.mu {
                    out.push(Violation::new(
                        Coreset0NumerologyMismatch,
                        s,
                        format!(
                            "CORESET 0 monitored in BWP {} with mu={} but the initial BWP has mu={}",
                            bwp.index,
                            bwp.mu.mu(),
                            initial.mu.mu()
                        ),
                    ));
                }
            }
        }
        if let (Some(&lo), Some(&hi)) = (prbs.first(), prbs.last()) {
            if !bwp.contains_prb(lo) || !bwp.contains_prb(hi) {
                out.push(Violation::new(
                    CoresetOutsideBwp,
                    s,
                    format!(
                        "PRBs {lo}..={hi} not inside BWP {} ({}..{})",
                        bwp.index,
                        bwp.start_prb,
                        bwp.end_prb()
                    ),
                ));
            }
        }
    }
}
