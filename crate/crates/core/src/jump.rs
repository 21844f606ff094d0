//! Conditional photon-count measurement operators `⟨p_out|U(θ)|p_in⟩` on the
//! emitter register, and their spectral analysis.
//!
//! Quanta conservation makes the operator block-structured: the block for `k`
//! input excitations maps onto `k + p_in - p_out` excitations and is read off
//! the propagator of the `k + p_in` sector.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{param, Result};
use crate::fock::{binomial, complex_pairs, DensityMatrix, ExcitationBlocks, PureState, Space};
use crate::linalg;
use crate::tavis_cummings::TavisCummings;

pub const DEFAULT_CLUSTER_TOL: f64 = 1e-8;
pub const DEFAULT_UNIT_TOL: f64 = 1e-8;

/// Relative hermiticity defect below which a block is diagonalized with the
/// Hermitian solver.
const HERMITIAN_TOL: f64 = 1e-12;

/// Kraus operator of one stroboscopic evolve-and-count round.
#[derive(Clone, Debug)]
pub struct ConditionalOperator {
    n: usize,
    p_in: usize,
    p_out: usize,
    theta: f64,
    blocks: BTreeMap<usize, DMatrix<C64>>,
}

/// `⟨p_out|U(θ)|p_in⟩` for `n` emitters with every input block present.
pub fn conditional_operator(n: usize, p_in: usize, p_out: usize, theta: f64) -> Result<ConditionalOperator> {
    let tc = TavisCummings::new(n)?;
    ConditionalOperator::build(&tc, p_in, p_out, theta, 0..=n)
}

impl ConditionalOperator {
    /// Builds only the blocks whose input excitation count is in `inputs`
    /// (and for which the output count is physical).
    pub fn build(
        tc: &TavisCummings,
        p_in: usize,
        p_out: usize,
        theta: f64,
        inputs: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        let n = tc.n();
        if !theta.is_finite() {
            return param(format!("theta must be finite, got {theta}"));
        }
        let mut blocks = BTreeMap::new();
        for k in inputs {
            if k > n {
                return param(format!("input excitation {k} exceeds emitter count {n}"));
            }
            let q = k + p_in;
            if p_out > q || q - p_out > n {
                continue;
            }
            let sector = tc.sector(q)?;
            let cols = sector.basis().indices_with_photons(p_in);
            let rows = sector.basis().indices_with_photons(p_out);
            blocks.insert(k, sector.propagator_block(theta, &rows, &cols));
        }
        Ok(Self { n, p_in, p_out, theta, blocks })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p_in(&self) -> usize {
        self.p_in
    }

    pub fn p_out(&self) -> usize {
        self.p_out
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn blocks(&self) -> &BTreeMap<usize, DMatrix<C64>> {
        &self.blocks
    }

    pub fn block(&self, k: usize) -> Option<&DMatrix<C64>> {
        self.blocks.get(&k)
    }

    pub fn output_excitations(&self, k: usize) -> usize {
        k + self.p_in - self.p_out
    }

    pub fn is_square(&self) -> bool {
        self.p_in == self.p_out
    }

    /// The operator on the full `2^n` emitter space.
    pub fn to_dense(&self) -> Result<DMatrix<C64>> {
        let layout = ExcitationBlocks::new(self.n)?;
        let dim = 1usize << self.n;
        let mut dense = DMatrix::zeros(dim, dim);
        for (&k, block) in &self.blocks {
            let out = layout.block(self.output_excitations(k));
            let inp = layout.block(k);
            for (r, &rm) in out.iter().enumerate() {
                for (c, &cm) in inp.iter().enumerate() {
                    dense[(rm as usize, cm as usize)] = block[(r, c)];
                }
            }
        }
        Ok(dense)
    }

    /// `K|ψ⟩`, unnormalized.
    pub fn apply(&self, state: &PureState) -> Result<PureState> {
        let space = Space::qubits(self.n)?;
        if state.space() != space {
            return param(format!("state on {:?}, operator on {space:?}", state.space()));
        }
        let layout = ExcitationBlocks::new(self.n)?;
        let mut out = DVector::zeros(space.dim());
        for (&k, block) in &self.blocks {
            let inp = layout.block(k);
            let v = DVector::from_iterator(inp.len(), inp.iter().map(|&m| state.amplitudes()[m as usize]));
            let w = block * v;
            for (r, &m) in layout.block(self.output_excitations(k)).iter().enumerate() {
                out[m as usize] += w[r];
            }
        }
        PureState::new(space, out)
    }

    /// `K ρ K†`, unnormalized.
    pub fn sandwich(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        let space = Space::qubits(self.n)?;
        if rho.space() != space {
            return param(format!("state on {:?}, operator on {space:?}", rho.space()));
        }
        let k = self.to_dense()?;
        DensityMatrix::new_unchecked(space, &k * rho.matrix() * k.adjoint())
    }
}

/// One eigenpair of a square conditional operator.
#[derive(Clone, Debug)]
pub struct Eigenpair {
    pub value: C64,
    /// Excitation count of the block holding the eigenvector.
    pub excitations: usize,
    pub vector: PureState,
}

/// Eigen-decomposition of a conditional operator, sorted by descending `|λ|`.
#[derive(Clone, Debug)]
pub struct SpectralReport {
    pub pairs: Vec<Eigenpair>,
    /// Partition of eigen-indices into groups of coinciding eigenvalues.
    pub clusters: Vec<Vec<usize>>,
    /// Indices with `|λ| ≥ 1 - unit_tol`.
    pub unit_norm_indices: Vec<usize>,
    pub cluster_tol: f64,
    pub unit_tol: f64,
}

impl SpectralReport {
    pub fn eigenvalues(&self) -> impl Iterator<Item = C64> + '_ {
        self.pairs.iter().map(|p| p.value)
    }

    /// Number of unit-modulus eigenvalues whose eigenvectors live in the
    /// `k`-excitation block.
    pub fn unit_multiplicity_in_block(&self, k: usize) -> usize {
        self.unit_norm_indices.iter().filter(|&&i| self.pairs[i].excitations == k).count()
    }

    /// Indices of eigenvalues within `tol` of `value`.
    pub fn indices_near(&self, value: C64, tol: f64) -> Vec<usize> {
        (0..self.pairs.len()).filter(|&i| (self.pairs[i].value - value).norm() <= tol).collect()
    }
}

/// Eigen-analysis of a square (`p_in == p_out`) conditional operator.
pub fn spectrum(op: &ConditionalOperator, cluster_tol: f64, unit_tol: f64) -> Result<SpectralReport> {
    if !op.is_square() {
        return param(format!("spectrum needs p_in == p_out, got {} -> {}", op.p_in, op.p_out));
    }
    let layout = ExcitationBlocks::new(op.n)?;
    let space = Space::qubits(op.n)?;
    let mut pairs = Vec::new();
    for (&k, block) in &op.blocks {
        let scale = block.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let (values, vectors): (Vec<C64>, DMatrix<C64>) = if linalg::hermiticity_defect(block) <= HERMITIAN_TOL * scale
        {
            let (vals, vecs) = linalg::hermitian_eigen(block.clone())?;
            (vals.into_iter().map(|x| C64::new(x, 0.0)).collect(), vecs)
        } else {
            linalg::general_eigen(block.clone())?
        };
        for (j, value) in values.into_iter().enumerate() {
            let mut amps = DVector::zeros(space.dim());
            for (r, &m) in layout.block(k).iter().enumerate() {
                amps[m as usize] = vectors[(r, j)];
            }
            pairs.push(Eigenpair { value, excitations: k, vector: PureState::new(space, amps)? });
        }
    }
    pairs.sort_by(|a, b| b.value.norm().total_cmp(&a.value.norm()));

    let clusters = cluster_values(&pairs, cluster_tol);
    // Re-orthonormalize degenerate eigenvectors sharing a block.
    for cluster in clusters.iter().filter(|c| c.len() > 1) {
        let mut by_block: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &i in cluster {
            by_block.entry(pairs[i].excitations).or_default().push(i);
        }
        for members in by_block.values().filter(|m| m.len() > 1) {
            let mut vs: Vec<DVector<C64>> = members.iter().map(|&i| pairs[i].vector.amplitudes().clone()).collect();
            linalg::orthonormalize(&mut vs)?;
            for (&i, v) in members.iter().zip(vs) {
                pairs[i].vector = PureState::new(space, v)?;
            }
        }
    }
    let unit_norm_indices = (0..pairs.len()).filter(|&i| pairs[i].value.norm() >= 1.0 - unit_tol).collect();
    Ok(SpectralReport { pairs, clusters, unit_norm_indices, cluster_tol, unit_tol })
}

/// Single-linkage grouping of eigenvalues closer than `tol`.
fn cluster_values(pairs: &[Eigenpair], tol: f64) -> Vec<Vec<usize>> {
    let len = pairs.len();
    let mut parent: Vec<usize> = (0..len).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..len {
        for j in i + 1..len {
            if (pairs[i].value - pairs[j].value).norm() <= tol {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..len {
        let r = root(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

/// Max-norm of `Σ_{p_out} K†K - I` over the emitter space.
pub fn completeness_defect(n: usize, p_in: usize, theta: f64) -> Result<f64> {
    let tc = TavisCummings::new(n)?;
    let max_out = n + p_in;
    let ops = (0..=max_out)
        .map(|p_out| ConditionalOperator::build(&tc, p_in, p_out, theta, 0..=n))
        .collect::<Result<Vec<_>>>()?;
    let mut worst = 0.0f64;
    for k in 0..=n {
        let dim = binomial(n, k);
        let mut acc = DMatrix::<C64>::zeros(dim, dim);
        for op in &ops {
            if let Some(b) = op.block(k) {
                acc += b.adjoint() * b;
            }
        }
        let defect = (acc - DMatrix::<C64>::identity(dim, dim)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        worst = worst.max(defect);
    }
    Ok(worst)
}

#[derive(Serialize)]
struct SpectralReportRepr<'a> {
    eigenvalues: Vec<[f64; 2]>,
    excitations: Vec<usize>,
    clusters: &'a [Vec<usize>],
    unit_norm_indices: &'a [usize],
}

impl Serialize for SpectralReport {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let values: Vec<C64> = self.eigenvalues().collect();
        SpectralReportRepr {
            eigenvalues: complex_pairs(values.iter()),
            excitations: self.pairs.iter().map(|p| p.excitations).collect(),
            clusters: &self.clusters,
            unit_norm_indices: &self.unit_norm_indices,
        }
        .serialize(s)
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::fock::{canonical_state, Canonical};

    fn residual(op: &ConditionalOperator, v: &PureState, lambda: C64) -> f64 {
        let kv = op.apply(v).unwrap();
        (kv.amplitudes() - v.amplitudes() * lambda).norm()
    }

    fn rayleigh(op: &ConditionalOperator, v: &PureState) -> C64 {
        v.inner(&op.apply(v).unwrap()).unwrap()
    }

    #[test]
    fn two_emitter_singlet_has_unit_eigenvalue() {
        let op = conditional_operator(2, 1, 1, 0.83).unwrap();
        let s = canonical_state(Canonical::Singlet(0, 1), 2).unwrap();
        assert!(residual(&op, &s, C64::new(1.0, 0.0)) < 1e-12);
    }

    #[test]
    fn three_emitter_w1_eigenvalue() {
        let theta = 0.61;
        let op = conditional_operator(3, 1, 1, theta).unwrap();
        let w1 = canonical_state(Canonical::W1, 3).unwrap();
        let expected = C64::new((10f64.sqrt() * theta).cos(), 0.0);
        assert!(residual(&op, &w1, expected) < 1e-12);
    }

    #[test]
    fn zero_time_identity_blocks() {
        for n in 1..=4 {
            for p in 0..=2 {
                let op = conditional_operator(n, p, p, 0.0).unwrap();
                assert_eq!(op.blocks().len(), n + 1);
                for (k, b) in op.blocks() {
                    let d = binomial(n, *k);
                    assert!((b - DMatrix::<C64>::identity(d, d)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn block_shapes_are_binomial() {
        let op = conditional_operator(4, 1, 0, 0.4).unwrap();
        // k = 4 would need five excitations out
        assert!(op.block(4).is_none());
        for (k, b) in op.blocks() {
            assert_eq!(b.shape(), (binomial(4, k + 1), binomial(4, *k)));
        }
        let op = conditional_operator(4, 0, 2, 0.4).unwrap();
        assert!(op.block(0).is_none() && op.block(1).is_none());
        assert_eq!(op.block(2).unwrap().shape(), (1, 6));
    }

    #[test]
    fn three_emitter_one_photon_spectrum() {
        let theta = 0.9;
        let op = conditional_operator(3, 1, 1, theta).unwrap();
        let report = spectrum(&op, DEFAULT_CLUSTER_TOL, DEFAULT_UNIT_TOL).unwrap();
        assert_eq!(report.pairs.len(), 8);
        let w = (10f64.sqrt() * theta).cos();
        let t = theta.cos();
        let in_block = |k: usize, v: f64| {
            report.pairs.iter().filter(|p| p.excitations == k && (p.value - C64::new(v, 0.0)).norm() < 1e-9).count()
        };
        assert_eq!(in_block(1, w), 1);
        assert_eq!(in_block(1, t), 2);
        // W2 mirrors W1 in the two-excitation block
        let w2 = canonical_state(Canonical::W2, 3).unwrap();
        let lambda = rayleigh(&op, &w2);
        assert!(residual(&op, &w2, lambda) < 1e-10);
        assert_eq!(report.indices_near(lambda, 1e-9).len(), 1);
        // the remaining two-excitation pair is degenerate
        let rest: Vec<_> =
            report.pairs.iter().filter(|p| p.excitations == 2 && (p.value - lambda).norm() > 1e-9).collect();
        assert_eq!(rest.len(), 2);
        assert!((rest[0].value - rest[1].value).norm() < 1e-9);
        let sorted: Vec<f64> = report.eigenvalues().map(|z| z.norm()).collect();
        assert!(sorted.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn degenerate_eigenvectors_orthonormal() {
        let op = conditional_operator(4, 1, 1, 1.1).unwrap();
        let report = spectrum(&op, DEFAULT_CLUSTER_TOL, DEFAULT_UNIT_TOL).unwrap();
        assert!(report.clusters.iter().any(|c| c.len() > 1));
        for cluster in &report.clusters {
            for &i in cluster {
                for &j in cluster {
                    let ip = report.pairs[i].vector.inner(&report.pairs[j].vector).unwrap();
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!((ip - C64::new(expected, 0.0)).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn vacuum_monitor_three_fold_unit_eigenvalue() {
        let op = conditional_operator(3, 0, 0, 0.7).unwrap();
        let report = spectrum(&op, DEFAULT_CLUSTER_TOL, DEFAULT_UNIT_TOL).unwrap();
        assert_eq!(report.unit_norm_indices.len(), 3);
        assert_eq!(report.unit_multiplicity_in_block(0), 1);
        assert_eq!(report.unit_multiplicity_in_block(1), 2);
        let ones = report.indices_near(C64::new(1.0, 0.0), 1e-9);
        assert_eq!(ones.len(), 3);
        assert!(report.clusters.iter().any(|c| c.len() == 3 && ones.iter().all(|i| c.contains(i))));
    }

    #[test]
    fn vacuum_monitor_six_emitters() {
        let op = conditional_operator(6, 0, 0, 0.45).unwrap();
        let report = spectrum(&op, DEFAULT_CLUSTER_TOL, DEFAULT_UNIT_TOL).unwrap();
        assert_eq!(report.unit_multiplicity_in_block(1), 5);
    }

    #[test]
    fn spectrum_rejects_rectangular() {
        let op = conditional_operator(2, 1, 0, 0.3).unwrap();
        assert!(spectrum(&op, 1e-8, 1e-8).is_err());
    }

    #[test]
    fn general_solver_path_on_non_hermitian_block() {
        // ⟨1|U|1⟩ blocks are real symmetric; exercise the general path via a
        // deliberately skewed copy and compare eigenvalues.
        let op = conditional_operator(3, 1, 1, 0.5).unwrap();
        let mut skewed = op.clone();
        let b = skewed.blocks.get_mut(&1).unwrap();
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![
            C64::new(1.0, 0.0),
            C64::new(2.0, 0.0),
            C64::new(0.5, 0.0),
        ]));
        let d_inv = DMatrix::from_diagonal(&DVector::from_vec(vec![
            C64::new(1.0, 0.0),
            C64::new(0.5, 0.0),
            C64::new(2.0, 0.0),
        ]));
        *b = &d * &*b * &d_inv;
        let a = spectrum(&op, 1e-8, 1e-8).unwrap();
        let s = spectrum(&skewed, 1e-8, 1e-8).unwrap();
        let mut va: Vec<f64> = a.pairs.iter().filter(|p| p.excitations == 1).map(|p| p.value.re).collect();
        let mut vs: Vec<f64> = s.pairs.iter().filter(|p| p.excitations == 1).map(|p| p.value.re).collect();
        va.sort_by(f64::total_cmp);
        vs.sort_by(f64::total_cmp);
        for (x, y) in va.iter().zip(&vs) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn completeness_examples() {
        assert!(completeness_defect(2, 1, 0.7).unwrap() <= 1e-10);
        assert!(completeness_defect(3, 1, PI / 10f64.sqrt()).unwrap() <= 1e-10);
        assert!(completeness_defect(6, 2, 0.3).unwrap() <= 1e-10);
    }

    #[test]
    fn dense_matches_block_apply() {
        let op = conditional_operator(3, 1, 1, 0.4).unwrap();
        let dense = op.to_dense().unwrap();
        let w1 = canonical_state(Canonical::W1, 3).unwrap();
        let a = op.apply(&w1).unwrap();
        assert!((dense * w1.amplitudes() - a.amplitudes()).norm() < 1e-14);
    }

    #[test]
    fn report_json_schema() {
        let op = conditional_operator(2, 1, 1, 0.3).unwrap();
        let report = spectrum(&op, DEFAULT_CLUSTER_TOL, DEFAULT_UNIT_TOL).unwrap();
        let v = serde_json::to_value(&report).unwrap();
        assert_eq!(v["eigenvalues"].as_array().unwrap().len(), 4);
        assert!(v["clusters"].is_array());
        assert_eq!(v["unit_norm_indices"].as_array().unwrap().len(), report.unit_norm_indices.len());
    }
}
