//! Statevector simulation and security analysis of a GHZ-state quantum
//! private comparison protocol with a semi-honest third party.

pub mod adversary;
pub mod analysis;
pub mod bits;
pub mod channel;
pub mod error;
pub mod protocol;
pub mod quantum;
pub mod rng;

pub use bits::BitString;
pub use error::{QpcError, Result};
