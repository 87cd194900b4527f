//! Multi-UE blind-decode simulator.
//!
//! Each slot: every UE enumerates its candidates and applies its monitoring
//! budget, the scheduler places the slot's DCIs on free candidates, placed DCIs
//! are encoded onto a shared RE grid, and every UE blind-decodes exactly its
//! budget-mapped candidates.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beam::{bfr_step, BeamError, BfrAction, BfrConfig, BfrEvent, BfrState, RsId};
use crate::budget::{allocate_slot, overbooking_limits, BudgetError, CellGroupCa, Limits, UeCapability};
use crate::dci::{
    bits_to_qpsk, blind_decode, encode_coded_bits, CodecSuite, DciError, DciFormat, DciMessage, Rnti, ScrambleInit,
    SizeHypothesis, BITS_PER_CCE, CRC_BITS, MIN_PAYLOAD_BITS,
};
use crate::mapping::{candidate_payload_res, MappingError};
use crate::model::{validate_cell, CellConfig, Violation};
use crate::search_space::{
    candidates_by_set, MultiplicativeHash, PdcchCandidate, SearchSpaceError, SsCandidates, SsType, AGGREGATION_LEVELS,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("cell configuration has {} violation(s); first: {}", .0.len(), .0[0])]
    InvalidCell(Vec<Violation>),
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("slot {slot}, rnti {rnti:#06x}: {source}")]
    Budget {
        slot: u64,
        rnti: u16,
        #[source]
        source: BudgetError,
    },
    #[error("slot {slot}, rnti {rnti:#06x}: {source}")]
    Bfr {
        slot: u64,
        rnti: u16,
        #[source]
        source: BeamError,
    },
    #[error(transparent)]
    SearchSpace(#[from] SearchSpaceError),
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error(transparent)]
    Dci(#[from] DciError),
}

fn default_cap() -> u32 {
    4
}

fn default_response_delay() -> u64 {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSample {
    pub slot: u64,
    pub rs: RsId,
    pub quality: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UeConfig {
    pub rnti: u16,
    #[serde(default = "default_cap")]
    pub n_cells_cap: u32,
    /// Monitored SS set indices; all sets of the active BWP when absent.
    #[serde(default)]
    pub search_spaces: Option<Vec<u8>>,
    /// UE-specific scrambling identity for USS candidates. Without it the
    /// cell identity seeds the scrambler.
    #[serde(default)]
    pub scrambling_id: Option<u16>,
    #[serde(default)]
    pub bfr: Option<BfrConfig>,
    #[serde(default, rename = "measurement")]
    pub measurements: Vec<MeasurementSample>,
    /// Slots between the recovery request and the response on the recovery
    /// SS set.
    #[serde(default = "default_response_delay")]
    pub bfr_response_delay: u64,
}

impl UeConfig {
    pub fn new(rnti: u16) -> Self {
        UeConfig {
            rnti,
            n_cells_cap: default_cap(),
            search_spaces: None,
            scrambling_id: None,
            bfr: None,
            measurements: Vec::new(),
            bfr_response_delay: default_response_delay(),
        }
    }
}

/// A DCI source: fires once at `slot`, or every `period` slots at `phase`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficEntry {
    pub rnti: u16,
    pub format: DciFormat,
    /// Defaults to the cell's configured size for `format`.
    #[serde(default)]
    pub payload_bits: Option<u32>,
    pub aggregation_level: u8,
    #[serde(default)]
    pub slot: Option<u64>,
    #[serde(default)]
    pub period: Option<u64>,
    #[serde(default)]
    pub phase: u64,
}

impl TrafficEntry {
    pub fn fires(&self, slot: u64) -> bool {
        match (self.slot, self.period) {
            (Some(s), _) => s == slot,
            (None, Some(p)) if p > 0 => slot % p == self.phase % p,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub cell: CellConfig,
    #[serde(rename = "ue")]
    pub ues: Vec<UeConfig>,
    #[serde(default)]
    pub traffic: Vec<TrafficEntry>,
    #[serde(default)]
    pub seed: u64,
    pub horizon: u64,
    #[serde(default)]
    pub active_bwp: u8,
    /// Serving cells per numerology for the CA limits; a single cell when absent.
    #[serde(default)]
    pub ca_cells_per_mu: Option<[u32; 4]>,
    /// Independent flip probability applied to each coded bit.
    #[serde(default)]
    pub bit_flip_probability: f64,
}

/// A DCI waiting for placement in the current slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PendingDci {
    pub rnti: u16,
    pub format: DciFormat,
    pub payload_bits: u32,
    pub preferred_level: u8,
}

/// What a UE can be reached on in one slot.
#[derive(Debug, Clone, Default)]
pub struct UeSlotView {
    pub candidates: Vec<PdcchCandidate>,
    /// SS sets (and the formats they carry) dropped by overbooking.
    pub dropped_ss: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Placement {
    pub dci: usize,
    pub candidate: PdcchCandidate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockReason {
    /// Every SS set able to carry the DCI was dropped by overbooking.
    SsDropped,
    /// The UE monitors no SS set for the format in this slot.
    NotMonitored,
    /// Candidates exist but none at the preferred or a lower level fits the payload.
    NoFittingLevel,
    /// All fitting candidates overlap CCEs already in use.
    CceCollision,
}

impl BlockReason {
    pub fn as_str(self) -> &'static str {
        match self {
            BlockReason::SsDropped => "ss_dropped",
            BlockReason::NotMonitored => "not_monitored",
            BlockReason::NoFittingLevel => "no_fitting_level",
            BlockReason::CceCollision => "cce_collision",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScheduleOutcome {
    pub placements: Vec<Placement>,
    pub blocked: Vec<(usize, BlockReason)>,
}

/// Physical resource key: CORESET, occasion start symbol, CCE.
pub type CceKey = (u8, u8, u32);

fn keys(c: &PdcchCandidate) -> impl Iterator<Item = CceKey> + '_ {
    c.cces.iter().map(move |&k| (c.coreset, c.start_symbol, k))
}

fn fits(level: u8, payload_bits: u32) -> bool {
    (payload_bits as usize).max(MIN_PAYLOAD_BITS) + CRC_BITS <= usize::from(level) * BITS_PER_CCE
}

/// Placement policy used by [`schedule_slot`].
pub trait SchedulingPolicy {
    /// Index into `candidates` of the chosen candidate, or why none was chosen.
    fn choose(
        &self,
        dci: &PendingDci,
        candidates: &[&PdcchCandidate],
        occupied: &BTreeSet<CceKey>,
    ) -> Result<usize, BlockReason>;
}

/// First free candidate at the preferred level, then at each lower level.
#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyFirstFit;

impl SchedulingPolicy for GreedyFirstFit {
    fn choose(
        &self,
        dci: &PendingDci,
        candidates: &[&PdcchCandidate],
        occupied: &BTreeSet<CceKey>,
    ) -> Result<usize, BlockReason> {
        let mut any_level = false;
        for &level in AGGREGATION_LEVELS.iter().rev() {
            if level > dci.preferred_level || !fits(level, dci.payload_bits) {
                continue;
            }
            for (i, c) in candidates.iter().enumerate() {
                if c.aggregation_level != level {
                    continue;
                }
                any_level = true;
                if keys(c).all(|k| !occupied.contains(&k)) {
                    return Ok(i);
                }
            }
        }
        Err(if any_level {
            BlockReason::CceCollision
        } else {
            BlockReason::NoFittingLevel
        })
    }
}

/// Places `pending` DCIs in order. `occupied` is updated with every placement.
pub fn schedule_slot(
    cell: &CellConfig,
    pending: &[PendingDci],
    views: &BTreeMap<u16, UeSlotView>,
    occupied: &mut BTreeSet<CceKey>,
    policy: &dyn SchedulingPolicy,
) -> ScheduleOutcome {
    let mut out = ScheduleOutcome::default();
    let carries = |ss: u8, f: DciFormat| cell.search_space(ss).is_none_or(|s| s.monitors(f));
    for (i, dci) in pending.iter().enumerate() {
        let Some(view) = views.get(&dci.rnti) else {
            out.blocked.push((i, BlockReason::NotMonitored));
            continue;
        };
        let usable: Vec<&PdcchCandidate> = view
            .candidates
            .iter()
            .filter(|c| carries(c.ss_index, dci.format))
            .collect();
        if usable.is_empty() {
            let reason = if view.dropped_ss.iter().any(|&s| carries(s, dci.format)) {
                BlockReason::SsDropped
            } else {
                BlockReason::NotMonitored
            };
            out.blocked.push((i, reason));
            continue;
        }
        match policy.choose(dci, &usable, occupied) {
            Ok(k) => {
                occupied.extend(keys(usable[k]));
                out.placements.push(Placement {
                    dci: i,
                    candidate: usable[k].clone(),
                });
            }
            Err(reason) => out.blocked.push((i, reason)),
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct UeStats {
    pub scheduled: u64,
    pub successes: u64,
    pub misses: u64,
    pub blocked: u64,
    pub blind_decodes: u64,
    pub false_detections: u64,
    pub dropped_ss_sets: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BfrTransition {
    pub slot: u64,
    pub state: BfrState,
    pub actions: Vec<BfrAction>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SimStats {
    pub seed: u64,
    pub horizon: u64,
    pub scheduled: u64,
    pub successes: u64,
    pub misses: u64,
    pub blocked: u64,
    pub false_detections: u64,
    pub blocked_by_reason: BTreeMap<BlockReason, u64>,
    pub per_ue: BTreeMap<u16, UeStats>,
    /// Slot → number of SS sets dropped across all UEs (non-zero slots only).
    pub overbooking_drops: BTreeMap<u64, u32>,
    /// CCEs in use per slot → number of slots.
    pub cce_utilization: BTreeMap<u32, u64>,
    pub bfr: BTreeMap<u16, Vec<BfrTransition>>,
}

impl SimStats {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize")
    }
}

/// Scenario checks beyond cell validation.
pub fn check_scenario(s: &Scenario) -> Result<(), SimError> {
    let violations = validate_cell(&s.cell);
    if !violations.is_empty() {
        return Err(SimError::InvalidCell(violations));
    }
    let bad = |m: String| Err(SimError::Scenario(m));
    if s.horizon == 0 {
        return bad("horizon must be at least 1".into());
    }
    if !(0.0..=1.0).contains(&s.bit_flip_probability) {
        return bad("bit_flip_probability must lie in [0, 1]".into());
    }
    let bwp = s
        .cell
        .bwp(s.active_bwp)
        .ok_or_else(|| SimError::Scenario(format!("no BWP {}", s.active_bwp)))?;
    if bwp.mu.mu() > 3 {
        return bad(format!(
            "active BWP numerology {} has no monitoring limits",
            bwp.mu.mu()
        ));
    }
    let mut seen = BTreeSet::new();
    for ue in &s.ues {
        if ue.rnti == 0 {
            return bad("UE rnti must be non-zero".into());
        }
        if !seen.insert(ue.rnti) {
            return bad(format!("rnti {:#06x} configured twice", ue.rnti));
        }
        UeCapability::new(ue.n_cells_cap).map_err(|e| SimError::Scenario(e.to_string()))?;
        if let Some(sets) = &ue.search_spaces {
            if let Some(missing) = sets.iter().find(|&&i| s.cell.search_space(i).is_none()) {
                return bad(format!("UE {:#06x} monitors unknown SS set {missing}", ue.rnti));
            }
        }
        if let Some(bfr) = &ue.bfr {
            bfr.check().map_err(|e| SimError::Scenario(e.to_string()))?;
            if s.cell.search_space(bfr.ss_bfr).is_none() {
                return bad(format!("recovery SS set {} not configured", bfr.ss_bfr));
            }
        }
    }
    for t in &s.traffic {
        if !seen.contains(&t.rnti) {
            return bad(format!("traffic targets unknown rnti {:#06x}", t.rnti));
        }
        if !AGGREGATION_LEVELS.contains(&t.aggregation_level) {
            return bad(format!(
                "aggregation level {} not in {{1,2,4,8,16}}",
                t.aggregation_level
            ));
        }
        match t.payload_bits.or_else(|| s.cell.dci_sizes.get(&t.format).copied()) {
            Some(1..=140) => {}
            Some(n) => return bad(format!("payload of {n} bits outside 1..=140")),
            None => return bad(format!("no payload size for format {}", t.format)),
        }
        if t.slot.is_none() && t.period.is_none_or(|p| p == 0) {
            return bad("traffic entry needs `slot` or a non-zero `period`".into());
        }
    }
    Ok(())
}

fn scramble_init(cell: &CellConfig, ue: &UeConfig, ss_type: SsType) -> ScrambleInit {
    match (ss_type, ue.scrambling_id) {
        (SsType::Uss, Some(id)) => ScrambleInit::ue_specific(id, ue.rnti),
        _ => ScrambleInit::cell(cell.phys_cell_id),
    }
}

struct UeRuntime {
    limits: Limits,
    filter: Vec<u8>,
    bfr_state: BfrState,
    latest: BTreeMap<RsId, f64>,
    prach_slot: Option<u64>,
}

/// Runs the scenario with its own seed.
pub fn run(scenario: &Scenario) -> Result<SimStats, SimError> {
    run_with_policy(scenario, scenario.seed, &GreedyFirstFit)
}

pub fn run_with_policy(scenario: &Scenario, seed: u64, policy: &dyn SchedulingPolicy) -> Result<SimStats, SimError> {
    check_scenario(scenario)?;
    let cell = &scenario.cell;
    let suite = CodecSuite::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mu = cell.bwp(scenario.active_bwp).map(|b| b.mu.mu()).unwrap_or(0);
    let ca = match scenario.ca_cells_per_mu {
        Some(c) => CellGroupCa::new(c),
        None => CellGroupCa::single_cell(mu),
    }
    .map_err(|e| SimError::Scenario(e.to_string()))?;

    let active_sets: Vec<u8> = cell
        .search_spaces
        .iter()
        .filter(|ss| cell.coreset(ss.coreset).is_some_and(|c| c.bwp == scenario.active_bwp))
        .map(|ss| ss.index)
        .collect();

    let mut ues: BTreeMap<u16, (&UeConfig, UeRuntime)> = BTreeMap::new();
    for ue in &scenario.ues {
        let cap = UeCapability::new(ue.n_cells_cap).map_err(|e| SimError::Scenario(e.to_string()))?;
        let limits = overbooking_limits(cap, &ca, mu).map_err(|e| SimError::Scenario(e.to_string()))?;
        let filter = match &ue.search_spaces {
            Some(f) => f.iter().copied().filter(|i| active_sets.contains(i)).collect(),
            None => active_sets.clone(),
        };
        let rt = UeRuntime {
            limits,
            filter,
            bfr_state: BfrState::Normal,
            latest: BTreeMap::new(),
            prach_slot: None,
        };
        ues.insert(ue.rnti, (ue, rt));
    }

    let mut stats = SimStats {
        seed,
        horizon: scenario.horizon,
        per_ue: ues.keys().map(|&r| (r, UeStats::default())).collect(),
        ..SimStats::default()
    };

    for slot in 0..scenario.horizon {
        // Beam failure recovery bookkeeping.
        for (&rnti, (ue, rt)) in ues.iter_mut() {
            let Some(cfg) = &ue.bfr else { continue };
            let mut events = Vec::new();
            let samples: Vec<&MeasurementSample> = ue.measurements.iter().filter(|m| m.slot == slot).collect();
            if !samples.is_empty() {
                for m in samples {
                    rt.latest.insert(m.rs, m.quality);
                }
                events.push(BfrEvent::Measure);
            }
            if let (BfrState::PrachSent(_), Some(p)) = (rt.bfr_state, rt.prach_slot) {
                if slot == p + ue.bfr_response_delay {
                    events.push(BfrEvent::ResponseReceived { ss_index: cfg.ss_bfr });
                }
            }
            for ev in events {
                let (next, actions) = bfr_step(rt.bfr_state, cfg, &rt.latest, ev).map_err(|source| SimError::Bfr {
                    slot,
                    rnti,
                    source,
                })?;
                if matches!(next, BfrState::PrachSent(_)) && !matches!(rt.bfr_state, BfrState::PrachSent(_)) {
                    rt.prach_slot = Some(slot);
                }
                if next != rt.bfr_state || !actions.is_empty() {
                    stats.bfr.entry(rnti).or_default().push(BfrTransition {
                        slot,
                        state: next,
                        actions,
                    });
                }
                rt.bfr_state = next;
            }
        }

        // Candidate enumeration and monitoring budget.
        let mut views: BTreeMap<u16, UeSlotView> = BTreeMap::new();
        let mut drops = 0u32;
        for (&rnti, (_, rt)) in &ues {
            let sets: Vec<SsCandidates> = candidates_by_set(cell, Some(&rt.filter), rnti, slot, &MultiplicativeHash)?;
            let report = allocate_slot(&sets, rt.limits).map_err(|source| SimError::Budget { slot, rnti, source })?;
            drops += report.dropped_ss.len() as u32;
            stats.per_ue.get_mut(&rnti).expect("ue").dropped_ss_sets += report.dropped_ss.len() as u64;
            views.insert(
                rnti,
                UeSlotView {
                    candidates: crate::budget::mapped_candidates(&sets, &report),
                    dropped_ss: report.dropped_ss,
                },
            );
        }
        if drops > 0 {
            stats.overbooking_drops.insert(slot, drops);
        }

        // Scheduling.
        let pending: Vec<PendingDci> = scenario
            .traffic
            .iter()
            .filter(|t| t.fires(slot))
            .map(|t| PendingDci {
                rnti: t.rnti,
                format: t.format,
                payload_bits: t
                    .payload_bits
                    .or_else(|| cell.dci_sizes.get(&t.format).copied())
                    .unwrap_or(0),
                preferred_level: t.aggregation_level,
            })
            .collect();
        let mut occupied = BTreeSet::new();
        let outcome = schedule_slot(cell, &pending, &views, &mut occupied, policy);
        *stats.cce_utilization.entry(occupied.len() as u32).or_default() += 1;
        for dci in &pending {
            stats.scheduled += 1;
            stats.per_ue.get_mut(&dci.rnti).expect("ue").scheduled += 1;
        }
        for &(i, reason) in &outcome.blocked {
            stats.blocked += 1;
            *stats.blocked_by_reason.entry(reason).or_default() += 1;
            stats.per_ue.get_mut(&pending[i].rnti).expect("ue").blocked += 1;
        }

        // Transmission onto the RE grid.
        let mut grid: HashMap<(u32, u8, u8), Complex64> = HashMap::new();
        let mut sent: Vec<(u16, Vec<u8>)> = Vec::new();
        for p in &outcome.placements {
            let dci = &pending[p.dci];
            let (ue, _) = &ues[&dci.rnti];
            let payload: Vec<u8> = (0..dci.payload_bits).map(|_| rng.random_range(0..2u8)).collect();
            let msg = DciMessage {
                format: dci.format,
                payload: payload.clone(),
                rnti: Rnti::c_rnti(dci.rnti),
            };
            let init = scramble_init(cell, ue, p.candidate.ss_type);
            let mut bits = encode_coded_bits(&msg, p.candidate.aggregation_level, &suite, init)?;
            if scenario.bit_flip_probability > 0.0 {
                for b in bits.iter_mut() {
                    if rng.random_bool(scenario.bit_flip_probability) {
                        *b ^= 1;
                    }
                }
            }
            let coreset = cell.coreset(p.candidate.coreset).expect("validated coreset");
            let res = candidate_payload_res(coreset, &p.candidate.cces)?;
            for (re, z) in res.iter().zip(bits_to_qpsk(&bits)) {
                grid.insert((re.prb, p.candidate.start_symbol + re.symbol, re.subcarrier), z);
            }
            sent.push((dci.rnti, payload));
        }

        // Blind decoding by every UE on its mapped candidates.
        for (&rnti, view) in &views {
            let (ue, _) = &ues[&rnti];
            let mut decoded: BTreeSet<Vec<u8>> = BTreeSet::new();
            let mut attempts = 0u64;
            for cand in &view.candidates {
                let ss = cell.search_space(cand.ss_index).expect("validated ss");
                let mut sizes: Vec<SizeHypothesis> = Vec::new();
                for (&format, &size) in &cell.dci_sizes {
                    if ss.monitors(format) && !sizes.iter().any(|h| h.payload_bits == size as usize) {
                        sizes.push(SizeHypothesis {
                            format,
                            payload_bits: size as usize,
                        });
                    }
                }
                let coreset = cell.coreset(cand.coreset).expect("validated coreset");
                let res = candidate_payload_res(coreset, &cand.cces)?;
                attempts += sizes.len() as u64;
                let symbols: Option<Vec<Complex64>> = res
                    .iter()
                    .map(|re| {
                        grid.get(&(re.prb, cand.start_symbol + re.symbol, re.subcarrier))
                            .copied()
                    })
                    .collect();
                let Some(symbols) = symbols else { continue };
                let init = scramble_init(cell, ue, cand.ss_type);
                if let Some(msg) = blind_decode(&symbols, &sizes, Rnti::c_rnti(rnti), &suite, init) {
                    decoded.insert(msg.payload);
                }
            }
            let st = stats.per_ue.get_mut(&rnti).expect("ue");
            st.blind_decodes += attempts;
            for (target, payload) in sent.iter().filter(|(r, _)| *r == rnti) {
                debug_assert_eq!(*target, rnti);
                if decoded.remove(payload) {
                    st.successes += 1;
                    stats.successes += 1;
                } else {
                    st.misses += 1;
                    stats.misses += 1;
                }
            }
            st.false_detections += decoded.len() as u64;
            stats.false_detections += decoded.len() as u64;
        }
    }
    Ok(stats)
}
