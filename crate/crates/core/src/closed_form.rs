//! Analytic success probability, fidelity, yield and eigenvalue expressions.
//!
//! These serve two roles: fast evaluators for parameter sweeps and an
//! independent check on the matrix engine in [`crate::protocol`].

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::error::{param, Result};

/// Success probability and target fidelity after `N` repetitions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SuccessFidelity {
    pub probability: f64,
    pub fidelity: f64,
}

fn check_n(n: usize, min: usize) -> Result<()> {
    if n < min {
        return param(format!("emitter count {n} below {min}"));
    }
    Ok(())
}

/// Frequency of the symmetric one-photon mode, `√(4n-2)`.
pub fn w1_frequency(n: usize) -> f64 {
    ((4 * n - 2) as f64).sqrt()
}

/// Frequency of the non-symmetric one-excitation modes, `√(n-2)`.
pub fn bright_t_frequency(n: usize) -> f64 {
    ((n - 2) as f64).sqrt()
}

/// Probability of `N` consecutive one-photon outcomes starting from a single
/// excited emitter, and the resulting fidelity to W1.
pub fn p_and_f(n: usize, theta: f64, reps: usize) -> Result<SuccessFidelity> {
    check_n(n, 2)?;
    let w = (w1_frequency(n) * theta).cos().powi(2).powi(reps as i32);
    let t = (bright_t_frequency(n) * theta).cos().powi(2).powi(reps as i32);
    let total = w + (n - 1) as f64 * t;
    Ok(SuccessFidelity { probability: total / n as f64, fidelity: w / total })
}

/// Which two-emitter fidelity expression to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TwoEmitterFidelity {
    /// `1/(1 + c^{2N})`, consistent with the stated limits.
    #[default]
    SelfConsistent,
    /// `1/(2 c^{2N})` exactly as printed; exceeds one for large `N`.
    AsPrinted,
}

/// Two emitters with `m` photons kept in the cavity: singlet fidelity and
/// success probability.
pub fn p_and_f_two_qw(m: usize, theta: f64, reps: usize, variant: TwoEmitterFidelity) -> Result<SuccessFidelity> {
    if m == 0 {
        return param("photon number m must be at least 1");
    }
    let c2n = ((2.0 * (2 * m + 1) as f64).sqrt() * theta).cos().powi(2).powi(reps as i32);
    let probability = 0.5 * (1.0 + c2n);
    let fidelity = match variant {
        TwoEmitterFidelity::SelfConsistent => 1.0 / (1.0 + c2n),
        TwoEmitterFidelity::AsPrinted => 1.0 / (2.0 * c2n),
    };
    Ok(SuccessFidelity { probability, fidelity })
}

/// Named analytic eigenvalues of conditional operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EigenvalueKind {
    /// W1 under one-photon monitoring.
    W1,
    /// Non-symmetric single-excitation states under one-photon monitoring.
    BrightT,
    /// The emitter vacuum under two-photon monitoring.
    VacuumTwoPhoton,
}

pub fn superop_eigenvalue(kind: EigenvalueKind, n: usize, theta: f64) -> Result<f64> {
    check_n(n, 2)?;
    let cw = (w1_frequency(n) * theta).cos();
    match kind {
        EigenvalueKind::W1 => Ok(cw),
        EigenvalueKind::BrightT => {
            check_n(n, 3)?;
            Ok((bright_t_frequency(n) * theta).cos())
        }
        EigenvalueKind::VacuumTwoPhoton => {
            let nf = n as f64;
            Ok((nf * (cw + 1.0) - 1.0) / (2.0 * nf - 1.0))
        }
    }
}

/// Amplitudes of the three-state chain `|0…0,2⟩ ↔ |W1,1⟩ ↔ |φ,0⟩` starting
/// from `|W1,1⟩`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainAmplitudes {
    /// On `|W1⟩|1⟩`.
    pub mid: C64,
    /// On `|0…0⟩|2⟩`.
    pub up: C64,
    /// On `|φ⟩|0⟩`.
    pub down: C64,
}

impl ChainAmplitudes {
    pub fn total_weight(&self) -> f64 {
        self.mid.norm_sqr() + self.up.norm_sqr() + self.down.norm_sqr()
    }
}

/// Chain with couplings `√(2n)` and `√(2(n-1))`, frequency `√(4n-2)`.
pub fn chain_amplitudes(n: usize, t: f64) -> Result<ChainAmplitudes> {
    check_n(n, 2)?;
    let omega = w1_frequency(n);
    let (s, c) = (omega * t).sin_cos();
    let nf = n as f64;
    Ok(ChainAmplitudes {
        mid: C64::new(c, 0.0),
        up: C64::new(0.0, -s * (2.0 * nf).sqrt() / omega),
        down: C64::new(0.0, -s * (2.0 * (nf - 1.0)).sqrt() / omega),
    })
}

/// The two-quanta expression as printed: frequency `√(3n-2)` with weights
/// `n/(3n-2)` and `(2n-2)/(3n-2)`. Kept for comparison only.
pub fn chain_amplitudes_as_printed(n: usize, t: f64) -> Result<ChainAmplitudes> {
    check_n(n, 2)?;
    let nf = n as f64;
    let denom = 3.0 * nf - 2.0;
    let (s, c) = (denom.sqrt() * t).sin_cos();
    Ok(ChainAmplitudes {
        mid: C64::new(c, 0.0),
        up: C64::new(0.0, -s * (nf / denom).sqrt()),
        down: C64::new(0.0, -s * ((2.0 * nf - 2.0) / denom).sqrt()),
    })
}

/// How repeated success probabilities are compounded into a yield.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum YieldMode {
    /// `Y_N = Π_{i=0..N} P_i` with cumulative `P_i`, as printed.
    #[default]
    AsPrinted,
    /// `Π_{i=1..N} P_i / P_{i-1} = P_N`.
    PerStep,
}

/// Compounds a sequence of cumulative success probabilities into yields.
pub fn yields(probabilities: &[f64], mode: YieldMode) -> Vec<f64> {
    match mode {
        YieldMode::AsPrinted => probabilities
            .iter()
            .scan(1.0, |acc, p| {
                *acc *= p;
                Some(*acc)
            })
            .collect(),
        YieldMode::PerStep => probabilities.to_vec(),
    }
}

/// Purification yield `Y_{N,n}` from the closed-form probabilities.
pub fn purification_yield(n: usize, theta: f64, reps: usize, mode: YieldMode) -> Result<f64> {
    let probs = (0..=reps).map(|i| p_and_f(n, theta, i).map(|pf| pf.probability)).collect::<Result<Vec<_>>>()?;
    Ok(*yields(&probs, mode).last().expect("at least P_0"))
}

/// `k`-th time at which the W1 eigenvalue has unit modulus, `kπ/√(4n-2)`.
pub fn node_time(n: usize, k: usize) -> Result<f64> {
    check_n(n, 2)?;
    if k == 0 {
        return param("node index starts at 1");
    }
    Ok(k as f64 * PI / w1_frequency(n))
}
