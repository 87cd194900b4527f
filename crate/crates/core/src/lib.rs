//! Desk-scale, bit-exact model of the 5G NR physical downlink control channel.
//!
//! The crate covers the full receive-side picture of PDCCH monitoring:
//!
//! - [`model`]: numerology, bandwidth parts, CORESET geometry and cell validation
//! - [`mapping`]: CCE-to-REG bundle interleaving and RE ordering with DMRS placement
//! - [`search_space`]: monitoring occasions and the candidate hashing function
//! - [`budget`]: blind-decode / channel-estimation limits, overbooking and CA splitting
//! - [`dci`]: DCI format registry, the encode chain, blind decoding and the "3+1" size budget
//! - [`beam`]: TCI/QCL resolution, beam collision and beam failure recovery
//! - [`sim`]: a multi-UE blind-decode simulator with a greedy CCE scheduler
//!
//! Configuration files are TOML; see [`config`].

pub mod beam;
pub mod budget;
pub mod config;
pub mod dci;
pub mod mapping;
pub mod model;
pub mod search_space;
pub mod sim;

pub use model::{CellConfig, CoresetConfig, Numerology};
pub use search_space::{PdcchCandidate, SearchSpaceSet};
