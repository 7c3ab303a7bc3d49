//! Concrete SSP oracles.

pub mod extragradient;
pub mod mogda;
pub mod saa;
pub mod speg;

pub use extragradient::{extragradient_solve, EgConfig};
pub use mogda::{mogda_solve, MogdaConfig};
pub use saa::{robust_saa, saa_solve, SaaConfig};
pub use speg::{speg_solve, SpegConfig};

use crate::problem::PrimalDualPair;

/// An oracle's answer plus its sample bill.
#[derive(Debug, Clone)]
pub struct OracleOutput {
    pub pair: PrimalDualPair,
    pub samples: u64,
}
