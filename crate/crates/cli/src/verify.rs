//! Analytic-versus-numeric verification suite behind `trapgen verify`.

use std::f64::consts::PI;
use std::fmt;

use anyhow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trapgen_core::closed_form::EigenvalueKind;
use trapgen_core::protocol::{compare_chain, rabi_amplitudes, RabiAmplitudes};
use trapgen_core::tavis_cummings::TavisCummings;
use trapgen_core::{
    canonical_state, completeness_defect, node_time, p_and_f, p_and_f_two_qw, run_conditional_blocks, run_trajectories,
    spectrum, superop_eigenvalue, BlockDensity, Canonical, Complex64 as C64, ConditionalOperator, ProtocolConfig,
    ProtocolTrace, PureState, TrajectoryConfig, TwoEmitterFidelity, DEFAULT_CLUSTER_TOL, DEFAULT_UNIT_TOL,
};

use crate::theta::parse_theta;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Relation {
    Within(f64),
    AtLeast,
    AtMost,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub observed: f64,
    pub expected: f64,
    pub relation: Relation,
}

impl Check {
    pub fn within(name: impl Into<String>, observed: f64, expected: f64, tol: f64) -> Self {
        Check { name: name.into(), observed, expected, relation: Relation::Within(tol) }
    }

    pub fn at_least(name: impl Into<String>, observed: f64, bound: f64) -> Self {
        Check { name: name.into(), observed, expected: bound, relation: Relation::AtLeast }
    }

    pub fn at_most(name: impl Into<String>, observed: f64, bound: f64) -> Self {
        Check { name: name.into(), observed, expected: bound, relation: Relation::AtMost }
    }

    /// The worst `(where, observed, expected)` triple against `tol`.
    pub fn worst<I>(name: &str, tol: f64, items: I) -> Self
    where
        I: IntoIterator<Item = (String, f64, f64)>,
    {
        let mut worst: Option<(String, f64, f64)> = None;
        for (at, obs, exp) in items {
            let dev = (obs - exp).abs();
            let replace = match &worst {
                None => true,
                Some((_, o, e)) => dev.is_nan() || dev > (o - e).abs(),
            };
            if replace {
                worst = Some((at, obs, exp));
            }
        }
        let (at, obs, exp) = worst.unwrap_or_else(|| ("(no points)".into(), f64::NAN, f64::NAN));
        Check::within(format!("{name} [worst at {at}]"), obs, exp, tol)
    }

    pub fn passed(&self) -> bool {
        match self.relation {
            Relation::Within(tol) => (self.observed - self.expected).abs() <= tol,
            Relation::AtLeast => self.observed >= self.expected,
            Relation::AtMost => self.observed <= self.expected,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        match self.relation {
            Relation::Within(tol) => write!(
                f,
                "{status} {}: observed {:.15e}, expected {:.15e} (|diff| {:.3e}, tol {tol:e})",
                self.name,
                self.observed,
                self.expected,
                (self.observed - self.expected).abs()
            ),
            Relation::AtLeast => {
                write!(f, "{status} {}: observed {:.15e}, expected >= {:.15e}", self.name, self.observed, self.expected)
            }
            Relation::AtMost => {
                write!(f, "{status} {}: observed {:.15e}, expected <= {:.15e}", self.name, self.observed, self.expected)
            }
        }
    }
}

pub fn random_thetas(seed: u64, count: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.random_range(f64::EPSILON..PI)).collect()
}

/// Engine trace from `|10…0⟩` toward `target`, monitoring `monitor` photons.
pub fn single_excitation_trace(n: usize, theta: f64, reps: usize, target: &PureState) -> Result<ProtocolTrace> {
    let initial = BlockDensity::from_pure(&canonical_state(Canonical::Computational(1), n)?)?;
    Ok(run_conditional_blocks(&initial, target, &ProtocolConfig::new(n, theta, reps, 1))?)
}

fn residual(op: &ConditionalOperator, v: &PureState) -> Result<(C64, f64)> {
    let kv = op.apply(v)?;
    let lambda = v.inner(&kv)?;
    Ok((lambda, (kv.amplitudes() - v.amplitudes() * lambda).norm()))
}

/// Runs every check. Errors are numerical failures, not tolerance breaches.
pub fn run_suite(samples: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();

    // two emitters
    let bell = PI / (4.0 * 6f64.sqrt());
    let singlet = canonical_state(Canonical::Singlet(0, 1), 2)?;
    let trace = single_excitation_trace(2, bell, 20, &singlet)?;
    checks.push(Check::worst(
        "two emitters P_N = (1+2^-N)/2",
        1e-9,
        trace
            .steps
            .iter()
            .map(|s| (format!("N={}", s.index), s.probability, 0.5 * (1.0 + 0.5f64.powi(s.index as i32)))),
    ));
    checks.push(Check::worst(
        "two emitters F_N = 1/(1+2^-N)",
        1e-9,
        trace.steps.iter().map(|s| (format!("N={}", s.index), s.fidelity, 1.0 / (1.0 + 0.5f64.powi(s.index as i32)))),
    ));
    let mut items = Vec::new();
    for theta in random_thetas(2, 10) {
        let trace = single_excitation_trace(2, theta, 10, &singlet)?;
        for s in &trace.steps {
            let cf = p_and_f_two_qw(1, theta, s.index, TwoEmitterFidelity::SelfConsistent)?;
            items.push((format!("θ={theta:.6} N={}", s.index), s.fidelity, cf.fidelity));
        }
    }
    checks.push(Check::worst("two-emitter closed-form fidelity", 1e-9, items));

    // three and six emitters at their nodes
    let theta3 = PI / 10f64.sqrt();
    let w1 = canonical_state(Canonical::W1, 3)?;
    let trace = single_excitation_trace(3, theta3, 20, &w1)?;
    let mut pf = Vec::new();
    for s in &trace.steps {
        let cf = p_and_f(3, theta3, s.index)?;
        pf.push((format!("N={} P", s.index), s.probability, cf.probability));
        pf.push((format!("N={} F", s.index), s.fidelity, cf.fidelity));
    }
    checks.push(Check::worst("n=3 engine vs closed form", 1e-9, pf));
    let last = trace.last();
    checks.push(Check::within("n=3 P_20", last.probability, 1.0 / 3.0 + 2.0 / 3.0 * 0.297892f64.powi(20), 1e-9));
    checks.push(Check::at_least("n=3 F_20", last.fidelity, 0.999999));

    let theta6 = PI / 22f64.sqrt();
    let trace = single_excitation_trace(6, theta6, 1, &canonical_state(Canonical::W1, 6)?)?;
    let s1 = &trace.steps[1];
    checks.push(Check::within("n=6 P_1", s1.probability, 0.2104293641772886, 1e-6));
    checks.push(Check::within("n=6 F_1", s1.fidelity, 0.7920314130980718, 1e-6));

    // general law
    let mut items = Vec::new();
    for n in 2..=10 {
        let w1 = canonical_state(Canonical::W1, n)?;
        for theta in random_thetas(100 + n as u64, 20) {
            for s in &single_excitation_trace(n, theta, 10, &w1)?.steps {
                let cf = p_and_f(n, theta, s.index)?;
                let at = format!("n={n} θ={theta:.6} N={}", s.index);
                items.push((format!("{at} P"), s.probability, cf.probability));
                items.push((format!("{at} F"), s.fidelity, cf.fidelity));
            }
        }
    }
    checks.push(Check::worst("general law engine vs closed form", 1e-9, items));

    // spectra
    let mut residuals = Vec::new();
    let mut eigen = Vec::new();
    let mut vacuum2 = Vec::new();
    for n in 2..=10 {
        let tc = TavisCummings::new(n)?;
        let w1 = canonical_state(Canonical::W1, n)?;
        let w2 = canonical_state(Canonical::W2, n)?;
        let vac = canonical_state(Canonical::Computational(0), n)?;
        for theta in random_thetas(200 + n as u64, 5) {
            let op = ConditionalOperator::build(&tc, 1, 1, theta, [1, n - 1])?;
            let (l1, r1) = residual(&op, &w1)?;
            let (_, r2) = residual(&op, &w2)?;
            residuals.push((format!("n={n} θ={theta:.6} W1"), r1, 0.0));
            residuals.push((format!("n={n} θ={theta:.6} W2"), r2, 0.0));
            let expected = superop_eigenvalue(EigenvalueKind::W1, n, theta)?;
            eigen.push((format!("n={n} θ={theta:.6}"), l1.re, expected));
            eigen.push((format!("n={n} θ={theta:.6} imag"), l1.im, 0.0));
            let op2 = ConditionalOperator::build(&tc, 2, 2, theta, [0])?;
            let (l0, _) = residual(&op2, &vac)?;
            let expected = superop_eigenvalue(EigenvalueKind::VacuumTwoPhoton, n, theta)?;
            vacuum2.push((format!("n={n} θ={theta:.6}"), l0.re, expected));
        }
    }
    checks.push(Check::worst("W1/W2 eigenvector residual", 1e-9, residuals));
    checks.push(Check::worst("W1 eigenvalue cos(√(4n-2)θ)", 1e-9, eigen));
    checks.push(Check::worst("two-photon vacuum eigenvalue", 1e-9, vacuum2));
    for n in 2..=10 {
        let tc = TavisCummings::new(n)?;
        let op = ConditionalOperator::build(&tc, 0, 0, 0.61, [1])?;
        let report = spectrum(&op, DEFAULT_CLUSTER_TOL, DEFAULT_UNIT_TOL)?;
        checks.push(Check::within(
            format!("n={n} vacuum-monitor unit multiplicity, one excitation"),
            report.unit_multiplicity_in_block(1) as f64,
            (n - 1) as f64,
            0.0,
        ));
    }
    let report = spectrum(&trapgen_core::conditional_operator(3, 0, 0, 0.61)?, DEFAULT_CLUSTER_TOL, DEFAULT_UNIT_TOL)?;
    checks.push(Check::within(
        "n=3 vacuum-monitor total unit multiplicity",
        report.unit_norm_indices.len() as f64,
        3.0,
        0.0,
    ));

    // completeness
    let mut items = Vec::new();
    for n in 1..=6 {
        for p_in in 0..=2 {
            for theta in random_thetas(300 + (3 * n + p_in) as u64, 10) {
                items.push((format!("n={n} p_in={p_in} θ={theta:.6}"), completeness_defect(n, p_in, theta)?, 0.0));
            }
        }
    }
    checks.push(Check::worst("measurement completeness", 1e-10, items));

    // Monte Carlo
    let initial = BlockDensity::from_pure(&canonical_state(Canonical::Computational(1), 3)?)?;
    let cfg = TrajectoryConfig::new(ProtocolConfig::new(3, theta3, 5, 1), samples, 42);
    let stats = run_trajectories(&initial, &cfg)?;
    let exact = 0.334897;
    let sigma = (exact * (1.0 - exact) / samples as f64).sqrt();
    checks.push(Check::within("n=3 N=5 trajectory success rate (4σ)", stats.rate, exact, 4.0 * sigma));
    let again = run_trajectories(&initial, &cfg)?;
    let same = serde_json::to_string(&stats)? == serde_json::to_string(&again)?;
    checks.push(Check::within("trajectory reproducibility", same as u8 as f64, 1.0, 0.0));

    // Rabi dynamics
    let mut items = Vec::new();
    let mut derived = Vec::new();
    for n in 2..=8 {
        for t in [0.0, 0.37, 1.1, 2.9] {
            let RabiAmplitudes::OneQuantum { stay, emitted } = rabi_amplitudes(n, 1, t)? else {
                unreachable!("one quantum requested")
            };
            let w = (n as f64).sqrt() * t;
            items.push((format!("n={n} t={t} stay"), (stay - C64::new(w.cos(), 0.0)).norm(), 0.0));
            items.push((format!("n={n} t={t} emitted"), (emitted - C64::new(0.0, -w.sin())).norm(), 0.0));
            derived.push((format!("n={n} t={t}"), compare_chain(n, t)?.derived_deviation, 0.0));
        }
        checks.push(Check::at_least(
            format!("n={n} printed √(3n-2) chain deviates at t=0.5"),
            compare_chain(n, 0.5)?.printed_deviation,
            1e-6,
        ));
    }
    checks.push(Check::worst("one-quantum Rabi amplitudes", 1e-10, items));
    checks.push(Check::worst("two-quanta chain vs √(4n-2) form", 1e-10, derived));

    // figure shape
    let fig = crate::figure2::figure2(crate::figure2::DEFAULT_REPS)?;
    let f3 = fig.curve("n=3").expect("n=3 curve").trace.fidelities();
    let f6 = fig.curve("n=6").expect("n=6 curve").trace.fidelities();
    checks.push(Check::at_least("figure n=3 F_5", f3[5], 0.99));
    checks.push(Check::at_least("figure n=6 F_3", f6[3], 0.99));
    for c in &fig.curves {
        let y = c.trace.yields();
        let rise = y.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        checks.push(Check::at_most(format!("{} yield never increases", c.label), rise, 1e-14));
    }
    let p5: Vec<f64> = (3..=9)
        .map(|n| p_and_f(n, node_time(n, 1)?, 5).map(|pf| pf.probability))
        .collect::<trapgen_core::Result<_>>()?;
    let rise = p5.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check::at_most("P_5 at node θ, largest increase from n to n+1 (n=3..9)", rise, -f64::MIN_POSITIVE));

    // θ expressions
    let mut items = Vec::new();
    for n in 2..=12 {
        for k in 1..=4 {
            let expr = format!("{k}*pi/sqrt({})", 4 * n - 2);
            items.push((expr.clone(), parse_theta(&expr)?, node_time(n, k)?));
        }
    }
    checks.push(Check::worst("θ expression round trip", 1e-15, items));

    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relations() {
        assert!(Check::within("a", 1.0, 1.0 + 1e-12, 1e-9).passed());
        assert!(!Check::within("a", 1.0, 1.1, 1e-9).passed());
        assert!(!Check::within("nan", f64::NAN, 0.0, 1.0).passed());
        assert!(Check::at_least("b", 2.0, 1.0).passed());
        assert!(!Check::at_most("c", 2.0, 1.0).passed());
    }

    #[test]
    fn worst_picks_largest_and_nan() {
        let c = Check::worst("w", 1e-3, vec![("x".into(), 1.0, 1.0), ("y".into(), 2.0, 1.5), ("z".into(), 0.0, 0.1)]);
        assert!(c.name.contains("worst at y"));
        let c = Check::worst("w", 1e-3, vec![("x".into(), 1.0, 1.0), ("nan".into(), f64::NAN, 1.0)]);
        assert!(!c.passed());
        assert!(!Check::worst("empty", 1.0, Vec::new()).passed());
    }

    #[test]
    fn display_reports_values() {
        let line = Check::within("p", 0.5, 0.25, 1e-9).to_string();
        assert!(line.starts_with("FAIL p: observed 5.0"));
        assert!(line.contains("expected 2.5"));
    }

    #[test]
    fn suite_passes() {
        let checks = run_suite(20_000).unwrap();
        let failed: Vec<String> = checks.iter().filter(|c| !c.passed()).map(|c| c.to_string()).collect();
        assert!(failed.is_empty(), "{failed:#?}");
    }
}
