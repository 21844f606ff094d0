//! Simulation of conditional photon-count measurements on `n` two-level
//! emitters sharing one resonant cavity mode.
//!
//! Repeatedly injecting a photon, evolving for `θ = γτ`, and keeping only
//! runs where the cavity still holds the injected photon number drives the
//! emitters toward a pair singlet (`n = 2`) or the W state (`n ≥ 3`). This
//! crate builds the sector Hamiltonians, the conditional measurement
//! operators and their spectra, runs the protocol exactly and by Monte Carlo,
//! and evaluates the matching closed-form expressions.

pub mod closed_form;
pub mod error;
pub mod fock;
pub mod jump;
pub mod linalg;
pub mod protocol;
pub mod tavis_cummings;

pub use closed_form::{
    chain_amplitudes, node_time, p_and_f, p_and_f_two_qw, purification_yield, superop_eigenvalue, ChainAmplitudes,
    EigenvalueKind, SuccessFidelity, TwoEmitterFidelity, YieldMode,
};
pub use error::{Error, Result};
pub use fock::{
    canonical_state, enumerate_sector, Canonical, DensityMatrix, PureState, QubitConfig, SectorBasis, Space,
};
pub use jump::{
    completeness_defect, conditional_operator, spectrum, ConditionalOperator, Eigenpair, SpectralReport,
    DEFAULT_CLUSTER_TOL, DEFAULT_UNIT_TOL,
};
pub use protocol::{
    initialize_two_photon, rabi_amplitudes, run_conditional, run_conditional_blocks, run_trajectories, BlockDensity,
    ProtocolConfig, ProtocolTrace, RabiAmplitudes, StepRecord, TrajectoryConfig, TrajectoryStats,
};
pub use tavis_cummings::{evolve, hamiltonian, propagator, Evolve, Hamiltonian, Propagator, TavisCummings};

pub use num_complex::Complex64;
