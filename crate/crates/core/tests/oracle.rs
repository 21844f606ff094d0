//! Cross-checks against an independent brute-force construction: the full
//! emitter ⊗ truncated-Fock space built from Kronecker products and
//! exponentiated by scaled Taylor series, with no sector bookkeeping and no
//! eigensolver.

use nalgebra::{DMatrix, DVector};
use trapgen_core::{
    canonical_state, conditional_operator, p_and_f, Canonical, Complex64 as C64, DensityMatrix, ProtocolConfig,
};

fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a.kronecker(b)
}

fn identity(d: usize) -> DMatrix<C64> {
    DMatrix::identity(d, d)
}

/// Full-space Hamiltonian `Σ_m (a σ_m⁺ + a† σ_m⁻)` with photon cutoff
/// `cutoff`. Ordering: photon index is the slow index, emitter mask fast.
fn full_hamiltonian(n: usize, cutoff: usize) -> DMatrix<C64> {
    let dp = cutoff + 1;
    let mut a = DMatrix::<C64>::zeros(dp, dp);
    for p in 1..dp {
        a[(p - 1, p)] = C64::new((p as f64).sqrt(), 0.0);
    }
    let mut h = DMatrix::<C64>::zeros(dp << n, dp << n);
    for m in 0..n {
        // σ⁺ on emitter m in the mask ordering (bit m)
        let mut raise = DMatrix::<C64>::zeros(1 << n, 1 << n);
        for mask in 0..(1usize << n) {
            if mask & (1 << m) == 0 {
                raise[(mask | 1 << m, mask)] = C64::new(1.0, 0.0);
            }
        }
        let term = kron(&a, &raise);
        h += &term + term.adjoint();
    }
    h
}

fn expm_taylor(m: &DMatrix<C64>) -> DMatrix<C64> {
    let norm = m.iter().map(|z| z.norm()).sum::<f64>().max(1e-300);
    let squarings = (norm.log2().ceil().max(0.0) as u32) + 4;
    let scaled = m / C64::new(2f64.powi(squarings as i32), 0.0);
    let dim = m.nrows();
    let mut result = identity(dim);
    let mut term = identity(dim);
    for k in 1..30 {
        term = &term * &scaled / C64::new(k as f64, 0.0);
        result += &term;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// `⟨p|U(θ)|p⟩` on the emitter space from the full construction.
fn brute_conditional(n: usize, p: usize, theta: f64) -> DMatrix<C64> {
    let cutoff = n + p + 1;
    let h = full_hamiltonian(n, cutoff);
    let u = expm_taylor(&(h * C64::new(0.0, -theta)));
    let d = 1usize << n;
    u.view((p * d, p * d), (d, d)).into_owned()
}

fn brute_protocol(n: usize, theta: f64, reps: usize, initial: &DMatrix<C64>, target: &DVector<C64>) -> Vec<(f64, f64)> {
    let k = brute_conditional(n, 1, theta);
    let mut sigma = initial.clone();
    let mut out = Vec::new();
    for _ in 0..=reps {
        let p: f64 = sigma.trace().re;
        let f = target.dotc(&(&sigma * target)).re / p;
        out.push((p, f));
        sigma = &k * sigma * k.adjoint();
    }
    out
}

#[test]
fn conditional_operator_matches_brute_force() {
    for (n, p, theta) in [(2, 1, 0.7), (3, 1, 1.3), (3, 0, 0.4), (4, 2, 0.9), (3, 2, 2.2)] {
        let ours = conditional_operator(n, p, p, theta).unwrap().to_dense().unwrap();
        let brute = brute_conditional(n, p, theta);
        let diff = (ours - brute).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-11, "n={n} p={p} θ={theta}: {diff:e}");
    }
}

#[test]
fn protocol_matches_brute_force() {
    for (n, theta) in [(2usize, 0.321), (3, std::f64::consts::PI / 10f64.sqrt()), (4, 1.07), (5, 0.55)] {
        let initial = canonical_state(Canonical::Computational(1), n).unwrap();
        let w1 = canonical_state(Canonical::W1, n).unwrap();
        let rho = initial.to_density();
        let brute = brute_protocol(n, theta, 12, rho.matrix(), w1.amplitudes());
        let trace = trapgen_core::run_conditional(&rho, &w1, &ProtocolConfig::new(n, theta, 12, 1)).unwrap();
        for (step, (p, f)) in trace.steps.iter().zip(brute) {
            assert!((step.probability - p).abs() < 1e-10, "n={n} N={} P", step.index);
            assert!((step.fidelity - f).abs() < 1e-10, "n={n} N={} F", step.index);
            let cf = p_and_f(n, theta, step.index).unwrap();
            assert!((cf.probability - p).abs() < 1e-10);
            assert!((cf.fidelity - f).abs() < 1e-10);
        }
    }
}

#[test]
fn mixed_initial_state_matches_brute_force() {
    let n = 3;
    let theta = 0.83;
    let w1 = canonical_state(Canonical::W1, n).unwrap();
    let rho = DensityMatrix::maximally_mixed(n).unwrap();
    let brute = brute_protocol(n, theta, 8, rho.matrix(), w1.amplitudes());
    let trace = trapgen_core::run_conditional(&rho, &w1, &ProtocolConfig::new(n, theta, 8, 1)).unwrap();
    for (step, (p, f)) in trace.steps.iter().zip(brute) {
        assert!((step.probability - p).abs() < 1e-10);
        assert!((step.fidelity - f).abs() < 1e-10);
    }
}
