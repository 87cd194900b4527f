//! CCE → REG bundle → RE mapping inside a CORESET.
//!
//! REGs are numbered time-first: REG `r` sits on CORESET symbol
//! `r % duration` of the `r / duration`-th PRB (ascending frequency). With that
//! numbering a run of `bundle_size` consecutive REGs covers every symbol of the
//! CORESET. CCE `k` owns logical bundles `k·6/B .. (k+1)·6/B`; the interleaver
//! maps each logical bundle to a physical one.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::model::{CceRegMapping, CoresetConfig, PrecoderGranularity, REGS_PER_CCE, SUBCARRIERS_PER_PRB};

/// Subcarriers inside each REG that carry PDCCH DMRS.
pub const DMRS_SUBCARRIERS: [u8; 3] = [1, 5, 9];
pub const PAYLOAD_RES_PER_REG: u32 = 9;
pub const PAYLOAD_RES_PER_CCE: u32 = PAYLOAD_RES_PER_REG * REGS_PER_CCE;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MappingError {
    #[error("bundle size {bundle_size} invalid for duration {duration}")]
    BundleSize { bundle_size: u8, duration: u8 },
    #[error("{bundles} REG bundles not divisible by {rows} interleaver rows")]
    RowsNotDivisible { bundles: u32, rows: u8 },
    #[error("CCE {cce} out of range (CORESET has {num_cces})")]
    CceOutOfRange { cce: u32, num_cces: u32 },
    #[error("CCE {0} listed more than once")]
    DuplicateCce(u32),
    #[error("empty CCE list")]
    NoCces,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct RegIndex(pub u32);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegBundle {
    pub index: u32,
    pub regs: Vec<RegIndex>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReKind {
    Payload,
    Dmrs,
}

impl ReKind {
    pub fn of_subcarrier(subcarrier: u8) -> Self {
        if DMRS_SUBCARRIERS.contains(&subcarrier) {
            ReKind::Dmrs
        } else {
            ReKind::Payload
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ReKind::Payload => "payload",
            ReKind::Dmrs => "dmrs",
        }
    }
}

/// One resource element. `prb` is absolute (from point A); `symbol` counts
/// from the first symbol of the monitoring occasion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ReLocation {
    pub prb: u32,
    pub symbol: u8,
    pub subcarrier: u8,
    pub kind: ReKind,
}

fn check_bundles(c: &CoresetConfig) -> Result<u32, MappingError> {
    let b = c.bundle_size;
    if b == 0 || c.duration == 0 || !REGS_PER_CCE.is_multiple_of(u32::from(b)) || !b.is_multiple_of(c.duration) {
        return Err(MappingError::BundleSize {
            bundle_size: b,
            duration: c.duration,
        });
    }
    Ok(c.num_bundles())
}

/// Returns `f` with `f[j]` = physical bundle at logical position `j`.
///
/// Interleaved: bundle indices are written row-wise into an `R × N/R` array,
/// read column-wise, then cyclically shifted by `shift`. Non-interleaved: identity.
pub fn interleave_bundles(c: &CoresetConfig) -> Result<Vec<u32>, MappingError> {
    let n = check_bundles(c)?;
    if c.mapping == CceRegMapping::NonInterleaved {
        return Ok((0..n).collect());
    }
    let rows = u32::from(c.interleaver_rows);
    if rows == 0 || n % rows != 0 {
        return Err(MappingError::RowsNotDivisible {
            bundles: n,
            rows: c.interleaver_rows,
        });
    }
    let cols = n / rows;
    let shift = u32::from(c.shift);
    Ok((0..n)
        .map(|j| {
            let (col, row) = (j / rows, j % rows);
            (row * cols + col + shift) % n
        })
        .collect())
}

pub fn bundle(c: &CoresetConfig, index: u32) -> RegBundle {
    let b = u32::from(c.bundle_size);
    RegBundle {
        index,
        regs: (index * b..(index + 1) * b).map(RegIndex).collect(),
    }
}

/// Precomputed CCE → REG table for one CORESET.
#[derive(Debug, Clone)]
pub struct CceRegMap {
    num_cces: u32,
    bundle_size: u32,
    permutation: Vec<u32>,
}

impl CceRegMap {
    pub fn new(c: &CoresetConfig) -> Result<Self, MappingError> {
        Ok(CceRegMap {
            permutation: interleave_bundles(c)?,
            num_cces: c.num_cces(),
            bundle_size: u32::from(c.bundle_size),
        })
    }

    pub fn num_cces(&self) -> u32 {
        self.num_cces
    }

    /// Physical bundle indices used by a CCE, in logical order.
    pub fn bundles_of(&self, cce: u32) -> Result<Vec<u32>, MappingError> {
        if cce >= self.num_cces {
            return Err(MappingError::CceOutOfRange {
                cce,
                num_cces: self.num_cces,
            });
        }
        let per_cce = REGS_PER_CCE / self.bundle_size;
        Ok((cce * per_cce..(cce + 1) * per_cce)
            .map(|j| self.permutation[j as usize])
            .collect())
    }

    pub fn regs_of(&self, cce: u32) -> Result<Vec<RegIndex>, MappingError> {
        let mut regs: Vec<RegIndex> = self
            .bundles_of(cce)?
            .into_iter()
            .flat_map(|b| (b * self.bundle_size..(b + 1) * self.bundle_size).map(RegIndex))
            .collect();
        regs.sort_unstable();
        Ok(regs)
    }
}

/// The six REGs of `cce`, ascending.
pub fn cce_to_regs(c: &CoresetConfig, cce: u32) -> Result<Vec<RegIndex>, MappingError> {
    CceRegMap::new(c)?.regs_of(cce)
}

fn distinct_cces(cces: &[u32]) -> Result<(), MappingError> {
    if cces.is_empty() {
        return Err(MappingError::NoCces);
    }
    let mut seen = BTreeSet::new();
    for &k in cces {
        if !seen.insert(k) {
            return Err(MappingError::DuplicateCce(k));
        }
    }
    Ok(())
}

/// Resolves REGs to (absolute PRB, occasion symbol).
#[derive(Debug, Clone)]
pub struct RegLocator {
    prbs: Vec<u32>,
    duration: u32,
}

impl RegLocator {
    pub fn new(c: &CoresetConfig) -> Self {
        RegLocator {
            prbs: c.prbs(),
            duration: u32::from(c.duration),
        }
    }

    pub fn prb(&self, reg: RegIndex) -> u32 {
        self.prbs[(reg.0 / self.duration) as usize]
    }

    pub fn symbol(&self, reg: RegIndex) -> u8 {
        (reg.0 % self.duration) as u8
    }

    pub fn res(&self, reg: RegIndex) -> impl Iterator<Item = ReLocation> + '_ {
        let (prb, symbol) = (self.prb(reg), self.symbol(reg));
        (0..SUBCARRIERS_PER_PRB).map(move |subcarrier| ReLocation {
            prb,
            symbol,
            subcarrier,
            kind: ReKind::of_subcarrier(subcarrier),
        })
    }
}

/// Payload REs of a candidate in transmission order: frequency first (PRB,
/// then subcarrier) within a symbol, then the next symbol. Always `54·|cces|`
/// entries.
pub fn candidate_payload_res(c: &CoresetConfig, cces: &[u32]) -> Result<Vec<ReLocation>, MappingError> {
    distinct_cces(cces)?;
    let map = CceRegMap::new(c)?;
    let locator = RegLocator::new(c);
    let mut res = Vec::with_capacity(cces.len() * PAYLOAD_RES_PER_CCE as usize);
    for &k in cces {
        for reg in map.regs_of(k)? {
            res.extend(locator.res(reg).filter(|re| re.kind == ReKind::Payload));
        }
    }
    res.sort_unstable_by_key(|re| (re.symbol, re.prb, re.subcarrier));
    Ok(res)
}

/// REGs carrying DMRS when the candidate on `cces` is transmitted.
pub fn dmrs_regs(c: &CoresetConfig, cces: &[u32]) -> Result<BTreeSet<RegIndex>, MappingError> {
    match c.precoder {
        PrecoderGranularity::Wideband => Ok((0..c.geometry().num_regs).map(RegIndex).collect()),
        PrecoderGranularity::Narrowband => {
            let map = CceRegMap::new(c)?;
            let mut out = BTreeSet::new();
            for &k in cces {
                // Bundles never straddle CCEs, so the CCE's REGs are exactly
                // the REGs of its bundles.
                out.extend(map.regs_of(k)?);
            }
            Ok(out)
        }
    }
}

/// One row of the CCE → REG → RE dump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MappingRow {
    pub cce: u32,
    pub reg: u32,
    pub prb: u32,
    pub symbol: u8,
    pub subcarrier: u8,
    pub kind: ReKind,
}

pub const MAPPING_CSV_HEADER: &str = "cce,reg,prb,symbol,subcarrier,kind";

impl MappingRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.cce,
            self.reg,
            self.prb,
            self.symbol,
            self.subcarrier,
            self.kind.as_str()
        )
    }
}

/// Every RE of every CCE, grouped by CCE and then by ascending REG.
pub fn mapping_table(c: &CoresetConfig) -> Result<Vec<MappingRow>, MappingError> {
    let map = CceRegMap::new(c)?;
    let locator = RegLocator::new(c);
    let mut rows = Vec::new();
    for cce in 0..map.num_cces() {
        for reg in map.regs_of(cce)? {
            rows.extend(locator.res(reg).map(|re| MappingRow {
                cce,
                reg: reg.0,
                prb: re.prb,
                symbol: re.symbol,
                subcarrier: re.subcarrier,
                kind: re.kind,
            }));
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CoresetConfig;
    use proptest::prelude::*;

    fn fig3() -> CoresetConfig {
        CoresetConfig::interleaved(1, 54, 2, 2, 2, 0)
    }

    /// Literal row-fill / column-read of a 2-D array.
    fn array_oracle(n: u32, rows: u32, shift: u32) -> Vec<u32> {
        let cols = n / rows;
        let mut grid = vec![vec![0u32; cols as usize]; rows as usize];
        let mut next = 0;
        for row in grid.iter_mut() {
            for cell in row.iter_mut() {
                *cell = next;
                next += 1;
            }
        }
        let mut out = Vec::new();
        for col in 0..cols as usize {
            for row in &grid {
                out.push((row[col] + shift) % n);
            }
        }
        out
    }

    #[test]
    fn six_bundles_two_rows() {
        // 36 PRBs × 1 symbol, bundle 6 → 6 bundles.
        let c = CoresetConfig::interleaved(1, 36, 1, 6, 2, 0);
        assert_eq!(interleave_bundles(&c).unwrap(), vec![0, 3, 1, 4, 2, 5]);
        assert_eq!(array_oracle(6, 2, 0), vec![0, 3, 1, 4, 2, 5]);
    }

    #[test]
    fn one_row_is_identity() {
        let c = CoresetConfig::interleaved(1, 36, 1, 6, 1, 0);
        assert_eq!(interleave_bundles(&c).unwrap(), (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn fig3_transpose_closed_form() {
        let f = interleave_bundles(&fig3()).unwrap();
        assert_eq!(f.len(), 54);
        for (j, &b) in f.iter().enumerate() {
            let j = j as u32;
            assert_eq!(b, 27 * (j % 2) + j / 2);
        }
        assert_eq!(f, array_oracle(54, 2, 0));
    }

    #[test]
    fn indivisible_rows_rejected() {
        let c = CoresetConfig::interleaved(1, 54, 2, 2, 4, 0);
        assert_eq!(
            interleave_bundles(&c),
            Err(MappingError::RowsNotDivisible { bundles: 54, rows: 4 })
        );
    }

    #[test]
    fn cce_to_regs_examples() {
        let c = CoresetConfig::non_interleaved(1, 48, 1);
        assert_eq!(cce_to_regs(&c, 0).unwrap(), (0..6).map(RegIndex).collect::<Vec<_>>());

        let regs: Vec<u32> = cce_to_regs(&fig3(), 0).unwrap().into_iter().map(|r| r.0).collect();
        assert_eq!(regs, vec![0, 1, 2, 3, 54, 55]);

        assert_eq!(
            cce_to_regs(&fig3(), 18),
            Err(MappingError::CceOutOfRange { cce: 18, num_cces: 18 })
        );
    }

    #[test]
    fn fig3_cces_partition_regs() {
        let c = fig3();
        let mut all = BTreeSet::new();
        for k in 0..18 {
            for r in cce_to_regs(&c, k).unwrap() {
                assert!(all.insert(r), "REG {r:?} used twice");
            }
        }
        assert_eq!(all.len(), 108);
    }

    #[test]
    fn payload_res_single_symbol_ascending() {
        let c = CoresetConfig::non_interleaved(1, 24, 1);
        let res = candidate_payload_res(&c, &[0]).unwrap();
        assert_eq!(res.len(), 54);
        let freq: Vec<u32> = res.iter().map(|r| r.prb * 12 + u32::from(r.subcarrier)).collect();
        assert!(freq.windows(2).all(|w| w[0] < w[1]));
        assert!(res.iter().all(|r| r.symbol == 0 && r.kind == ReKind::Payload));
    }

    #[test]
    fn payload_res_fig3_symbol_major() {
        let c = fig3();
        let res = candidate_payload_res(&c, &[0]).unwrap();
        assert_eq!(res.len(), 54);
        // REGs {0,1,2,3,54,55} → PRBs {0,1,27} on both symbols.
        let expected: Vec<(u8, u32, u8)> = [0u8, 1]
            .iter()
            .flat_map(|&sym| {
                [0u32, 1, 27].into_iter().flat_map(move |prb| {
                    (0..12u8)
                        .filter(|sc| !DMRS_SUBCARRIERS.contains(sc))
                        .map(move |sc| (sym, prb, sc))
                })
            })
            .collect();
        let got: Vec<(u8, u32, u8)> = res.iter().map(|r| (r.symbol, r.prb, r.subcarrier)).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn payload_res_rejects_duplicates() {
        assert_eq!(
            candidate_payload_res(&fig3(), &[2, 2]),
            Err(MappingError::DuplicateCce(2))
        );
        assert_eq!(candidate_payload_res(&fig3(), &[]), Err(MappingError::NoCces));
    }

    #[test]
    fn dmrs_examples() {
        let mut c = fig3();
        assert_eq!(dmrs_regs(&c, &[3]).unwrap().len(), 108);
        c.precoder = PrecoderGranularity::Narrowband;
        let one = dmrs_regs(&c, &[3]).unwrap();
        assert_eq!(one, cce_to_regs(&c, 3).unwrap().into_iter().collect());
        let al16: Vec<u32> = (0..16).collect();
        assert_eq!(dmrs_regs(&c, &al16).unwrap().len(), 96);
    }

    #[test]
    fn mapping_table_shape() {
        let rows = mapping_table(&fig3()).unwrap();
        assert_eq!(rows.len(), 18 * 6 * 12);
        assert_eq!(rows.iter().filter(|r| r.kind == ReKind::Dmrs).count(), 18 * 6 * 3);
        assert_eq!(rows[0].to_csv(), "0,0,0,0,0,payload");
        assert_eq!(rows[1].to_csv(), "0,0,0,0,1,dmrs");
    }

    fn legal_interleaved() -> impl Strategy<Value = CoresetConfig> {
        (1u32..=16, 1u8..=3, 0u16..200).prop_flat_map(|(groups, duration, shift)| {
            let bundles: Vec<u8> = [1u8, 2, 3, 6].into_iter().filter(|b| b % duration == 0).collect();
            (
                Just(groups),
                Just(duration),
                Just(shift),
                proptest::sample::select(bundles),
                1u8..=8,
            )
                .prop_filter_map("rows must divide bundle count", |(g, d, s, b, r)| {
                    let n_b = g * 6 * u32::from(d) / u32::from(b);
                    (n_b % u32::from(r) == 0).then(|| CoresetConfig::interleaved(1, g * 6, d, b, r, s))
                })
        })
    }

    proptest! {
        #[test]
        fn interleaver_is_bijection(c in legal_interleaved()) {
            let f = interleave_bundles(&c).unwrap();
            let n = c.num_bundles();
            let set: BTreeSet<u32> = f.iter().copied().collect();
            prop_assert_eq!(set.len() as u32, n);
            prop_assert!(f.iter().all(|&b| b < n));
            prop_assert_eq!(f, array_oracle(n, u32::from(c.interleaver_rows), u32::from(c.shift)));
        }

        #[test]
        fn shift_is_cyclic(c in legal_interleaved()) {
            let n = c.num_bundles();
            let mut zero = c.clone();
            zero.shift = 0;
            let base = interleave_bundles(&zero).unwrap();
            let shifted = interleave_bundles(&c).unwrap();
            for (a, b) in base.iter().zip(&shifted) {
                prop_assert_eq!((a + u32::from(c.shift)) % n, *b);
            }
        }

        #[test]
        fn cces_partition_regs(c in legal_interleaved()) {
            let map = CceRegMap::new(&c).unwrap();
            let mut seen = BTreeSet::new();
            for k in 0..map.num_cces() {
                let regs = map.regs_of(k).unwrap();
                prop_assert_eq!(regs.len(), 6);
                for r in regs {
                    prop_assert!(seen.insert(r));
                }
            }
            prop_assert_eq!(seen.len() as u32, c.geometry().num_regs);
        }

        #[test]
        fn payload_res_exclude_dmrs(c in legal_interleaved(), start in 0u32..16, len in 1u32..=4) {
            let n = c.num_cces();
            let cces: Vec<u32> = (start..start + len).filter(|&k| k < n).collect();
            prop_assume!(!cces.is_empty());
            let res = candidate_payload_res(&c, &cces).unwrap();
            prop_assert_eq!(res.len(), 54 * cces.len());
            let set: BTreeSet<_> = res.iter().collect();
            prop_assert_eq!(set.len(), res.len());
            prop_assert!(res.iter().all(|r| !DMRS_SUBCARRIERS.contains(&r.subcarrier)));
        }
    }
}
