//! Shared fixtures for the benchmarks.

use qpc_core::protocol::{ProtocolConfig, Secret};

/// A fixed, unequal secret pair of length `len`.
pub fn secret_pair(len: usize) -> (Secret, Secret) {
    let x = Secret::from_value(0, len).expect("valid length");
    let y = Secret::from_value(1, len).expect("valid length");
    (x, y)
}

pub fn config(len: usize, group_size: usize, decoys: usize) -> ProtocolConfig {
    ProtocolConfig::new(len, group_size).with_decoys(decoys)
}
