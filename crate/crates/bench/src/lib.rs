//! Fixtures shared by the benchmarks under `benches/`.

use std::f64::consts::PI;

use trapgen_core::{canonical_state, BlockDensity, Canonical, ProtocolConfig, PureState};

/// `|10…0⟩` as a block density.
pub fn first_excited(n: usize) -> BlockDensity {
    BlockDensity::from_pure(&canonical_state(Canonical::Computational(1), n).expect("valid n")).expect("pure state")
}

pub fn w1(n: usize) -> PureState {
    canonical_state(Canonical::W1, n).expect("valid n")
}

/// One-photon monitoring at the first node `π/√(4n-2)`.
pub fn node_config(n: usize, reps: usize) -> ProtocolConfig {
    ProtocolConfig::new(n, PI / ((4 * n - 2) as f64).sqrt(), reps, 1)
}
