use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{DciFormat, RntiType};

pub const MAX_C_RNTI_SIZES: usize = 3;
pub const MAX_EXTRA_SPECIAL_SIZES: usize = 1;

/// A format the UE monitors, at a given payload size, under one RNTI type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct MonitoredFormat {
    pub format: DciFormat,
    pub size: u32,
    pub rnti_type: RntiType,
}

impl MonitoredFormat {
    /// Scheduling formats under C-RNTI; group-common formats under their own
    /// (first listed) special RNTI.
    pub fn defaults_for(sizes: &BTreeMap<DciFormat, u32>) -> Vec<MonitoredFormat> {
        sizes
            .iter()
            .map(|(&format, &size)| MonitoredFormat {
                format,
                size,
                rnti_type: if format.is_scheduling() {
                    RntiType::C
                } else {
                    format.info().allowed_rnti_types[0]
                },
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SizeBudgetViolation {
    pub c_rnti_sizes: BTreeSet<u32>,
    /// Special-RNTI sizes not already among the C-RNTI sizes.
    pub extra_sizes: BTreeSet<u32>,
    pub offending: Vec<DciFormat>,
}

impl fmt::Display for SizeBudgetViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |s: &BTreeSet<u32>| s.iter().map(u32::to_string).collect::<Vec<_>>().join(",");
        let formats: Vec<&str> = self.offending.iter().map(|f| f.as_str()).collect();
        write!(
            f,
            "DCI sizes exceed 3+1 budget: C-RNTI sizes {{{}}}, extra sizes {{{}}}, formats [{}]",
            list(&self.c_rnti_sizes),
            list(&self.extra_sizes),
            formats.join(",")
        )
    }
}

impl std::error::Error for SizeBudgetViolation {}

/// At most three distinct C-RNTI-class sizes plus one further size for the
/// special RNTIs.
pub fn check_size_budget(monitored: &[MonitoredFormat]) -> Result<(), SizeBudgetViolation> {
    let c_rnti_sizes: BTreeSet<u32> = monitored
        .iter()
        .filter(|m| m.rnti_type.is_c_rnti_class())
        .map(|m| m.size)
        .collect();
    let extra_sizes: BTreeSet<u32> = monitored
        .iter()
        .filter(|m| !m.rnti_type.is_c_rnti_class() && !c_rnti_sizes.contains(&m.size))
        .map(|m| m.size)
        .collect();
    let c_over = c_rnti_sizes.len() > MAX_C_RNTI_SIZES;
    let extra_over = extra_sizes.len() > MAX_EXTRA_SPECIAL_SIZES;
    if !c_over && !extra_over {
        return Ok(());
    }
    let mut offending: Vec<DciFormat> = monitored
        .iter()
        .filter(|m| {
            if m.rnti_type.is_c_rnti_class() {
                c_over
            } else {
                extra_over && extra_sizes.contains(&m.size)
            }
        })
        .map(|m| m.format)
        .collect();
    offending.sort();
    offending.dedup();
    Err(SizeBudgetViolation {
        c_rnti_sizes,
        extra_sizes,
        offending,
    })
}

const PAIRS: [(DciFormat, DciFormat); 2] = [(DciFormat::F0_0, DciFormat::F1_0), (DciFormat::F0_1, DciFormat::F1_1)];

/// Pads the fallback pair (0_0, 1_0) and the non-fallback pair (0_1, 1_1) to
/// the larger size of each pair when both members are present.
///
/// If padding both pairs breaks the budget (a special-RNTI size that matched a
/// C-RNTI size no longer does), only the fallback pair is padded, and failing
/// that the native sizes are kept. The first map that passes
/// [`check_size_budget`] is returned, otherwise the violation of the fully
/// padded map.
pub fn align_sizes(native: &BTreeMap<DciFormat, u32>) -> Result<BTreeMap<DciFormat, u32>, SizeBudgetViolation> {
    let both = pad_pairs(native, &PAIRS);
    let attempts = [pad_pairs(native, &PAIRS[..1]), native.clone()];
    let residual = match check_size_budget(&MonitoredFormat::defaults_for(&both)) {
        Ok(()) => return Ok(both),
        Err(v) => v,
    };
    attempts
        .into_iter()
        .find(|m| check_size_budget(&MonitoredFormat::defaults_for(m)).is_ok())
        .ok_or(residual)
}

fn pad_pairs(native: &BTreeMap<DciFormat, u32>, pairs: &[(DciFormat, DciFormat)]) -> BTreeMap<DciFormat, u32> {
    let mut sizes = native.clone();
    for &(a, b) in pairs {
        if let (Some(&sa), Some(&sb)) = (sizes.get(&a), sizes.get(&b)) {
            let common = sa.max(sb);
            sizes.insert(a, common);
            sizes.insert(b, common);
        }
    }
    sizes
}
