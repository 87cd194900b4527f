//! Length-31 Gold sequence scrambling.

use serde::{Deserialize, Serialize};

/// Warm-up shift applied before the first output bit.
const GOLD_NC: usize = 1600;
const REG_MASK: u32 = 0x7fff_ffff;

/// Initial state of the second m-sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScrambleInit(u32);

impl ScrambleInit {
    pub fn from_c_init(c_init: u32) -> Self {
        ScrambleInit(c_init & REG_MASK)
    }

    /// Initialised from the physical cell identity.
    pub fn cell(phys_cell_id: u16) -> Self {
        Self::from_c_init(u32::from(phys_cell_id))
    }

    /// Initialised from a UE-specific scrambling identity and the C-RNTI.
    pub fn ue_specific(scrambling_id: u16, c_rnti: u16) -> Self {
        Self::from_c_init((u32::from(c_rnti) << 16) + u32::from(scrambling_id))
    }

    pub fn c_init(self) -> u32 {
        self.0
    }
}

pub trait BitScrambler: Send + Sync {
    fn sequence(&self, init: ScrambleInit, len: usize) -> Vec<u8>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GoldScrambler;

impl BitScrambler for GoldScrambler {
    fn sequence(&self, init: ScrambleInit, len: usize) -> Vec<u8> {
        gold_sequence(init.c_init(), len)
    }
}

/// `c(n) = x1(n+1600) ⊕ x2(n+1600)` with
/// `x1(n+31) = x1(n+3) ⊕ x1(n)` (x1 seeded with a single 1) and
/// `x2(n+31) = x2(n+3) ⊕ x2(n+2) ⊕ x2(n+1) ⊕ x2(n)` (x2 seeded with `c_init`).
///
/// Bit `i` of each register holds `x(n+i)`.
pub fn gold_sequence(c_init: u32, len: usize) -> Vec<u8> {
    let mut x1: u32 = 1;
    let mut x2: u32 = c_init & REG_MASK;
    let step = |x1: &mut u32, x2: &mut u32| {
        let f1 = (*x1 >> 3 ^ *x1) & 1;
        let f2 = (*x2 >> 3 ^ *x2 >> 2 ^ *x2 >> 1 ^ *x2) & 1;
        *x1 = *x1 >> 1 | f1 << 30;
        *x2 = *x2 >> 1 | f2 << 30;
    };
    for _ in 0..GOLD_NC {
        step(&mut x1, &mut x2);
    }
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push(((x1 ^ x2) & 1) as u8);
        step(&mut x1, &mut x2);
    }
    out
}
