//! TCI/QCL bookkeeping per CORESET, the collision rule for overlapping
//! monitoring occasions, and the beam-failure-recovery state machine.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CoresetConfig, MAX_TCI_STATES_PER_CORESET};
use crate::search_space::SsType;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BeamError {
    #[error("TCI state {0} not in the cell pool")]
    UnknownTci(u32),
    #[error("TCI state {tci} not configured for CORESET {coreset}")]
    NotConfigured { tci: u32, coreset: u8 },
    #[error("{0} TCI states configured, at most 64")]
    TooManyTciStates(usize),
    #[error("no measurement for failure-detection resource {0}")]
    MissingMeasurement(RsId),
    #[error("measurement for {0} is NaN")]
    NanMeasurement(RsId),
    #[error("BFR resource set {0} is empty")]
    EmptyResourceSet(&'static str),
    #[error("bad reference signal id {0:?}")]
    BadRsId(String),
}

/// Reference signal identifier. Orders SSBs before CSI-RS, then by index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum RsId {
    Ssb(u32),
    CsiRs(u32),
}

impl fmt::Display for RsId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RsId::Ssb(i) => write!(f, "ssb:{i}"),
            RsId::CsiRs(i) => write!(f, "csi-rs:{i}"),
        }
    }
}

impl FromStr for RsId {
    type Err = BeamError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || BeamError::BadRsId(s.to_string());
        let (kind, idx) = s.split_once(':').ok_or_else(bad)?;
        let idx: u32 = idx.trim().parse().map_err(|_| bad())?;
        match kind.trim().to_ascii_lowercase().as_str() {
            "ssb" => Ok(RsId::Ssb(idx)),
            "csi-rs" | "csirs" => Ok(RsId::CsiRs(idx)),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for RsId {
    type Error = BeamError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<RsId> for String {
    fn from(r: RsId) -> String {
        r.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TciState {
    pub id: u32,
    pub qcl_type_a: RsId,
    #[serde(default)]
    pub qcl_type_d: Option<RsId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoresetBeamState {
    pub coreset_index: u8,
    configured: Vec<u32>,
    active: Option<u32>,
    pub default_ssb: RsId,
}

impl CoresetBeamState {
    pub fn new(coreset_index: u8, configured: Vec<u32>, default_ssb: RsId) -> Result<Self, BeamError> {
        if configured.len() > MAX_TCI_STATES_PER_CORESET {
            return Err(BeamError::TooManyTciStates(configured.len()));
        }
        Ok(CoresetBeamState {
            coreset_index,
            configured,
            active: None,
            default_ssb,
        })
    }

    pub fn from_config(c: &CoresetConfig, default_ssb: RsId) -> Result<Self, BeamError> {
        Self::new(c.index, c.tci_states.clone(), default_ssb)
    }

    pub fn configured_tci_ids(&self) -> &[u32] {
        &self.configured
    }

    pub fn active_tci(&self) -> Option<u32> {
        self.active
    }

    /// MAC-CE activation of one configured TCI state.
    pub fn activate(&mut self, tci: u32) -> Result<(), BeamError> {
        if !self.configured.contains(&tci) {
            return Err(BeamError::NotConfigured {
                tci,
                coreset: self.coreset_index,
            });
        }
        self.active = Some(tci);
        Ok(())
    }

    pub fn deactivate(&mut self) {
        self.active = None;
    }
}

/// The reference signals a CORESET is assumed quasi co-located with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QclAssumption {
    pub type_a: RsId,
    pub type_d: RsId,
}

/// Active TCI's reference signals, or the default SSB when nothing is
/// activated. An active state without a TypeD reference keeps the SSB as the
/// spatial reference.
pub fn effective_qcl(state: &CoresetBeamState, pool: &[TciState]) -> Result<QclAssumption, BeamError> {
    let Some(id) = state.active else {
        return Ok(QclAssumption {
            type_a: state.default_ssb,
            type_d: state.default_ssb,
        });
    };
    let tci = pool.iter().find(|t| t.id == id).ok_or(BeamError::UnknownTci(id))?;
    Ok(QclAssumption {
        type_a: tci.qcl_type_a,
        type_d: tci.qcl_type_d.unwrap_or(state.default_ssb),
    })
}

/// QCL used when monitoring SS set `ss_index` in `state`'s CORESET. Once a
/// recovery request has been sent, the recovery SS set follows `q_new`.
pub fn monitoring_qcl(
    ss_index: u8,
    state: &CoresetBeamState,
    pool: &[TciState],
    bfr: Option<(&BfrConfig, &BfrState)>,
) -> Result<QclAssumption, BeamError> {
    if let Some((cfg, st)) = bfr {
        if cfg.ss_bfr == ss_index {
            if let Some(q) = st.q_new() {
                return Ok(QclAssumption { type_a: q, type_d: q });
            }
        }
    }
    effective_qcl(state, pool)
}

/// One CORESET's monitoring occasion in a set of time-overlapping occasions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlappingOccasion {
    pub coreset: u8,
    pub ss_sets: Vec<(u8, SsType)>,
    pub type_d: RsId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollisionResolution {
    /// `None` when all occasions share one TypeD reference.
    pub selected: Option<u8>,
    /// CORESETs monitored: the selected one plus any sharing its TypeD RS.
    pub monitored: Vec<u8>,
}

/// With two or more distinct TypeD references, monitor the CORESET holding the
/// lowest-index CSS set, or failing any CSS set, the lowest-index USS set.
pub fn resolve_collision(occasions: &[OverlappingOccasion]) -> CollisionResolution {
    let all: BTreeSet<u8> = occasions.iter().map(|o| o.coreset).collect();
    let beams: BTreeSet<RsId> = occasions.iter().map(|o| o.type_d).collect();
    if beams.len() < 2 {
        return CollisionResolution {
            selected: None,
            monitored: all.into_iter().collect(),
        };
    }
    let key = |o: &OverlappingOccasion| {
        o.ss_sets
            .iter()
            .map(|&(idx, ty)| (ty == SsType::Uss, idx, o.coreset))
            .min()
    };
    let Some(winner) = occasions
        .iter()
        .filter_map(|o| key(o).map(|k| (k, o)))
        .min_by_key(|(k, _)| *k)
    else {
        return CollisionResolution {
            selected: None,
            monitored: Vec::new(),
        };
    };
    let (_, chosen) = winner;
    let monitored: BTreeSet<u8> = occasions
        .iter()
        .filter(|o| o.type_d == chosen.type_d)
        .map(|o| o.coreset)
        .collect();
    CollisionResolution {
        selected: Some(chosen.coreset),
        monitored: monitored.into_iter().collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BfrConfig {
    pub q0: Vec<RsId>,
    pub q1: Vec<RsId>,
    /// Abstract quality, higher is better.
    pub threshold: f64,
    pub ss_bfr: u8,
}

impl BfrConfig {
    pub fn check(&self) -> Result<(), BeamError> {
        if self.q0.is_empty() {
            return Err(BeamError::EmptyResourceSet("q0"));
        }
        if self.q1.is_empty() {
            return Err(BeamError::EmptyResourceSet("q1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(tag = "phase", content = "q_new", rename_all = "snake_case")]
pub enum BfrState {
    #[default]
    Normal,
    FailureDetected,
    PrachSent(RsId),
    Recovered(RsId),
}

impl BfrState {
    pub fn q_new(self) -> Option<RsId> {
        match self {
            BfrState::PrachSent(q) | BfrState::Recovered(q) => Some(q),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BfrState::Normal => "normal",
            BfrState::FailureDetected => "failure_detected",
            BfrState::PrachSent(_) => "prach_sent",
            BfrState::Recovered(_) => "recovered",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BfrEvent {
    Measure,
    /// A response detected in SS set `ss_index`.
    ResponseReceived {
        ss_index: u8,
    },
    Reset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "action", content = "rs", rename_all = "snake_case")]
pub enum BfrAction {
    BeamFailureDetected,
    SendPrach(RsId),
    RecoveryComplete,
}

fn quality(m: &BTreeMap<RsId, f64>, rs: RsId) -> Result<Option<f64>, BeamError> {
    match m.get(&rs) {
        Some(q) if q.is_nan() => Err(BeamError::NanMeasurement(rs)),
        Some(&q) => Ok(Some(q)),
        None => Ok(None),
    }
}

/// Best measured q1 resource; equal qualities resolve to the lowest id.
fn select_candidate(cfg: &BfrConfig, m: &BTreeMap<RsId, f64>) -> Result<Option<RsId>, BeamError> {
    let mut best: Option<(f64, RsId)> = None;
    for &rs in &cfg.q1 {
        if let Some(q) = quality(m, rs)? {
            best = match best {
                Some((bq, brs)) if bq > q || (bq == q && brs < rs) => Some((bq, brs)),
                _ => Some((q, rs)),
            };
        }
    }
    Ok(best.map(|(_, rs)| rs))
}

/// Pure transition function of the recovery procedure.
pub fn bfr_step(
    state: BfrState,
    cfg: &BfrConfig,
    measurements: &BTreeMap<RsId, f64>,
    event: BfrEvent,
) -> Result<(BfrState, Vec<BfrAction>), BeamError> {
    cfg.check()?;
    match event {
        BfrEvent::Reset => Ok((BfrState::Normal, Vec::new())),
        BfrEvent::ResponseReceived { ss_index } => match state {
            BfrState::PrachSent(q) if ss_index == cfg.ss_bfr => {
                Ok((BfrState::Recovered(q), vec![BfrAction::RecoveryComplete]))
            }
            other => Ok((other, Vec::new())),
        },
        BfrEvent::Measure => {
            let mut all_below = true;
            for &rs in &cfg.q0 {
                let q = quality(measurements, rs)?.ok_or(BeamError::MissingMeasurement(rs))?;
                all_below &= q < cfg.threshold;
            }
            let mut actions = Vec::new();
            match state {
                BfrState::Normal if all_below => actions.push(BfrAction::BeamFailureDetected),
                BfrState::FailureDetected => {}
                other => return Ok((other, actions)),
            }
            match select_candidate(cfg, measurements)? {
                Some(q) => {
                    actions.push(BfrAction::SendPrach(q));
                    Ok((BfrState::PrachSent(q), actions))
                }
                None => Ok((BfrState::FailureDetected, actions)),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool() -> Vec<TciState> {
        vec![
            TciState {
                id: 1,
                qcl_type_a: RsId::CsiRs(10),
                qcl_type_d: Some(RsId::CsiRs(11)),
            },
            TciState {
                id: 2,
                qcl_type_a: RsId::CsiRs(20),
                qcl_type_d: None,
            },
        ]
    }

    #[test]
    fn qcl_defaults_to_ssb() {
        let st = CoresetBeamState::new(1, vec![1, 2], RsId::Ssb(3)).unwrap();
        assert_eq!(
            effective_qcl(&st, &pool()).unwrap(),
            QclAssumption {
                type_a: RsId::Ssb(3),
                type_d: RsId::Ssb(3)
            }
        );
    }

    #[test]
    fn qcl_follows_active_tci() {
        let mut st = CoresetBeamState::new(1, vec![1, 2], RsId::Ssb(3)).unwrap();
        st.activate(1).unwrap();
        let q = effective_qcl(&st, &pool()).unwrap();
        assert_eq!(q.type_a, RsId::CsiRs(10));
        assert_eq!(q.type_d, RsId::CsiRs(11));
        st.activate(2).unwrap();
        assert_eq!(effective_qcl(&st, &pool()).unwrap().type_d, RsId::Ssb(3));
    }

    #[test]
    fn activation_outside_configured_list() {
        let mut st = CoresetBeamState::new(4, vec![1], RsId::Ssb(0)).unwrap();
        assert_eq!(st.activate(2), Err(BeamError::NotConfigured { tci: 2, coreset: 4 }));
        assert_eq!(st.active_tci(), None);
        let mut st = CoresetBeamState::new(4, vec![7], RsId::Ssb(0)).unwrap();
        st.activate(7).unwrap();
        assert_eq!(effective_qcl(&st, &pool()), Err(BeamError::UnknownTci(7)));
        assert!(CoresetBeamState::new(0, (0..65).collect(), RsId::Ssb(0)).is_err());
    }

    #[test]
    fn rs_id_text() {
        assert_eq!("ssb:4".parse::<RsId>().unwrap(), RsId::Ssb(4));
        assert_eq!("CSI-RS:12".parse::<RsId>().unwrap(), RsId::CsiRs(12));
        assert!("beam:1".parse::<RsId>().is_err());
        assert_eq!(RsId::CsiRs(2).to_string(), "csi-rs:2");
        assert!(RsId::Ssb(9) < RsId::CsiRs(0));
    }

    fn occ(coreset: u8, sets: &[(u8, SsType)], rs: RsId) -> OverlappingOccasion {
        OverlappingOccasion {
            coreset,
            ss_sets: sets.to_vec(),
            type_d: rs,
        }
    }

    #[test]
    fn css_wins() {
        let r = resolve_collision(&[
            occ(1, &[(0, SsType::Css)], RsId::CsiRs(1)),
            occ(2, &[(5, SsType::Uss)], RsId::CsiRs(2)),
        ]);
        assert_eq!(r.selected, Some(1));
        assert_eq!(r.monitored, vec![1]);
    }

    #[test]
    fn lowest_uss_wins() {
        let r = resolve_collision(&[
            occ(1, &[(7, SsType::Uss)], RsId::CsiRs(1)),
            occ(2, &[(4, SsType::Uss)], RsId::CsiRs(2)),
        ]);
        assert_eq!(r.selected, Some(2));
    }

    #[test]
    fn css_beats_lower_uss_index() {
        let r = resolve_collision(&[
            occ(1, &[(1, SsType::Uss)], RsId::CsiRs(1)),
            occ(2, &[(9, SsType::Css)], RsId::CsiRs(2)),
        ]);
        assert_eq!(r.selected, Some(2));
    }

    #[test]
    fn same_beam_no_collision() {
        let r = resolve_collision(&[
            occ(1, &[(7, SsType::Uss)], RsId::Ssb(1)),
            occ(2, &[(4, SsType::Uss)], RsId::Ssb(1)),
        ]);
        assert_eq!(r.selected, None);
        assert_eq!(r.monitored, vec![1, 2]);
    }

    #[test]
    fn same_beam_as_winner_is_kept() {
        let r = resolve_collision(&[
            occ(1, &[(0, SsType::Css)], RsId::Ssb(1)),
            occ(2, &[(4, SsType::Uss)], RsId::Ssb(1)),
            occ(3, &[(2, SsType::Uss)], RsId::Ssb(2)),
        ]);
        assert_eq!(r.selected, Some(1));
        assert_eq!(r.monitored, vec![1, 2]);
    }

    fn cfg() -> BfrConfig {
        BfrConfig {
            q0: vec![RsId::CsiRs(0), RsId::CsiRs(1)],
            q1: vec![RsId::Ssb(2), RsId::Ssb(3), RsId::CsiRs(4)],
            threshold: -5.0,
            ss_bfr: 3,
        }
    }

    fn meas(v: &[(RsId, f64)]) -> BTreeMap<RsId, f64> {
        v.iter().copied().collect()
    }

    #[test]
    fn full_recovery_path() {
        let cfg = cfg();
        let m = meas(&[
            (RsId::CsiRs(0), -10.0),
            (RsId::CsiRs(1), -12.0),
            (RsId::Ssb(2), -3.0),
            (RsId::Ssb(3), 1.0),
            (RsId::CsiRs(4), 0.5),
        ]);
        let (s, a) = bfr_step(BfrState::Normal, &cfg, &m, BfrEvent::Measure).unwrap();
        assert_eq!(s, BfrState::PrachSent(RsId::Ssb(3)));
        assert_eq!(
            a,
            vec![BfrAction::BeamFailureDetected, BfrAction::SendPrach(RsId::Ssb(3))]
        );
        let (s2, a2) = bfr_step(s, &cfg, &m, BfrEvent::ResponseReceived { ss_index: 2 }).unwrap();
        assert_eq!((s2, a2.len()), (s, 0));
        let (s3, a3) = bfr_step(s, &cfg, &m, BfrEvent::ResponseReceived { ss_index: 3 }).unwrap();
        assert_eq!(s3, BfrState::Recovered(RsId::Ssb(3)));
        assert_eq!(a3, vec![BfrAction::RecoveryComplete]);
        let (s4, _) = bfr_step(s3, &cfg, &m, BfrEvent::Measure).unwrap();
        assert_eq!(s4, s3);
        assert_eq!(bfr_step(s3, &cfg, &m, BfrEvent::Reset).unwrap().0, BfrState::Normal);
    }

    #[test]
    fn one_good_q0_stays_normal() {
        let m = meas(&[(RsId::CsiRs(0), -10.0), (RsId::CsiRs(1), -5.0), (RsId::Ssb(2), 0.0)]);
        assert_eq!(
            bfr_step(BfrState::Normal, &cfg(), &m, BfrEvent::Measure).unwrap(),
            (BfrState::Normal, vec![])
        );
    }

    #[test]
    fn failure_without_candidates_waits() {
        let cfg = cfg();
        let m = meas(&[(RsId::CsiRs(0), -10.0), (RsId::CsiRs(1), -12.0)]);
        let (s, a) = bfr_step(BfrState::Normal, &cfg, &m, BfrEvent::Measure).unwrap();
        assert_eq!(
            (s, a),
            (BfrState::FailureDetected, vec![BfrAction::BeamFailureDetected])
        );
        let m = meas(&[
            (RsId::CsiRs(0), -10.0),
            (RsId::CsiRs(1), -12.0),
            (RsId::CsiRs(4), -20.0),
        ]);
        let (s, a) = bfr_step(s, &cfg, &m, BfrEvent::Measure).unwrap();
        assert_eq!(s, BfrState::PrachSent(RsId::CsiRs(4)));
        assert_eq!(a, vec![BfrAction::SendPrach(RsId::CsiRs(4))]);
    }

    #[test]
    fn tie_picks_lowest_id() {
        let m = meas(&[
            (RsId::CsiRs(0), -10.0),
            (RsId::CsiRs(1), -12.0),
            (RsId::CsiRs(4), 2.0),
            (RsId::Ssb(3), 2.0),
        ]);
        let (s, _) = bfr_step(BfrState::Normal, &cfg(), &m, BfrEvent::Measure).unwrap();
        assert_eq!(s, BfrState::PrachSent(RsId::Ssb(3)));
    }

    #[test]
    fn measurement_errors() {
        let m = meas(&[(RsId::CsiRs(0), -10.0)]);
        assert_eq!(
            bfr_step(BfrState::Normal, &cfg(), &m, BfrEvent::Measure),
            Err(BeamError::MissingMeasurement(RsId::CsiRs(1)))
        );
        let m = meas(&[(RsId::CsiRs(0), -10.0), (RsId::CsiRs(1), f64::NAN)]);
        assert_eq!(
            bfr_step(BfrState::Normal, &cfg(), &m, BfrEvent::Measure),
            Err(BeamError::NanMeasurement(RsId::CsiRs(1)))
        );
    }

    #[test]
    fn recovery_qcl_override() {
        let cfg = cfg();
        let st = CoresetBeamState::new(1, vec![], RsId::Ssb(0)).unwrap();
        let bfr = BfrState::PrachSent(RsId::CsiRs(4));
        assert_eq!(
            monitoring_qcl(3, &st, &[], Some((&cfg, &bfr))).unwrap().type_d,
            RsId::CsiRs(4)
        );
        assert_eq!(
            monitoring_qcl(2, &st, &[], Some((&cfg, &bfr))).unwrap().type_d,
            RsId::Ssb(0)
        );
        assert_eq!(
            monitoring_qcl(3, &st, &[], Some((&cfg, &BfrState::Normal)))
                .unwrap()
                .type_d,
            RsId::Ssb(0)
        );
    }
}
