//! Conserved-quanta bases, emitter-space states and the canonical states the
//! protocol targets (W states, pair singlets, two-excitation symmetric state).
//!
//! Emitter `m` is bit `m` of an occupation mask. When written as a ket the
//! leftmost symbol is emitter 0, so `|100⟩` is the mask `0b001`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// Largest emitter count accepted by sector enumeration.
pub const MAX_EMITTERS: usize = 24;

/// Largest emitter count for operations on the full `2^n` emitter space.
pub const MAX_FULL_SPACE_EMITTERS: usize = 12;

const NORM_TOL: f64 = 1e-12;

/// Occupation pattern of `n` two-level emitters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QubitConfig {
    n: usize,
    mask: u32,
}

impl QubitConfig {
    pub fn new(n: usize, mask: u32) -> Result<Self> {
        check_emitters(n, MAX_EMITTERS)?;
        if (mask as u64) >> n != 0 {
            return param(format!("mask {mask:#b} has bits above emitter {}", n - 1));
        }
        Ok(Self { n, mask })
    }

    /// Parses a ket label such as `100` (emitter 0 excited).
    pub fn from_ket(label: &str) -> Result<Self> {
        let label = label.trim().trim_start_matches('|').trim_end_matches('>');
        let label = label.trim_end_matches('⟩');
        if label.is_empty() {
            return param("empty ket label");
        }
        let mut mask = 0u32;
        for (m, ch) in label.chars().enumerate() {
            match ch {
                '0' => {}
                '1' if m < 32 => mask |= 1 << m,
                _ => return param(format!("invalid ket label {label:?}")),
            }
        }
        Self::new(label.chars().count(), mask)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mask(&self) -> u32 {
        self.mask
    }

    pub fn excitations(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_excited(&self, emitter: usize) -> bool {
        emitter < self.n && self.mask & (1 << emitter) != 0
    }

    pub fn ket(&self) -> String {
        (0..self.n).map(|m| if self.is_excited(m) { '1' } else { '0' }).collect()
    }
}

impl fmt::Display for QubitConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{}⟩", self.ket())
    }
}

fn check_emitters(n: usize, cap: usize) -> Result<()> {
    if n == 0 || n > cap {
        return param(format!("emitter count {n} outside 1..={cap}"));
    }
    Ok(())
}

pub(crate) fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Joint emitter/photon basis of the sector with `quanta` total excitations.
///
/// Elements are ordered by ascending occupation mask; the photon number of
/// each element is `quanta - popcount(mask)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SectorBasis {
    n: usize,
    quanta: usize,
    masks: Vec<u32>,
}

/// Enumerates the basis of the `(n, q)` sector.
pub fn enumerate_sector(n: usize, q: usize) -> Result<SectorBasis> {
    check_emitters(n, MAX_EMITTERS)?;
    let masks = (0u32..(1u32 << n)).filter(|m| m.count_ones() as usize <= q).collect();
    Ok(SectorBasis { n, quanta: q, masks })
}

impl SectorBasis {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn quanta(&self) -> usize {
        self.quanta
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn masks(&self) -> &[u32] {
        &self.masks
    }

    pub fn photons(&self, index: usize) -> usize {
        self.quanta - self.masks[index].count_ones() as usize
    }

    pub fn element(&self, index: usize) -> (QubitConfig, usize) {
        (QubitConfig { n: self.n, mask: self.masks[index] }, self.photons(index))
    }

    pub fn iter(&self) -> impl Iterator<Item = (QubitConfig, usize)> + '_ {
        (0..self.len()).map(move |i| self.element(i))
    }

    pub fn index_of(&self, mask: u32) -> Option<usize> {
        self.masks.binary_search(&mask).ok()
    }

    /// Indices of the elements holding exactly `photons` cavity quanta, in
    /// basis order.
    pub fn indices_with_photons(&self, photons: usize) -> Vec<usize> {
        if photons > self.quanta {
            return Vec::new();
        }
        let k = (self.quanta - photons) as u32;
        (0..self.len()).filter(|&i| self.masks[i].count_ones() == k).collect()
    }

    pub fn space(&self) -> Space {
        Space::Sector { n: self.n, quanta: self.quanta }
    }
}

/// The emitter space split into fixed-excitation blocks.
#[derive(Clone, Debug)]
pub struct ExcitationBlocks {
    n: usize,
    masks: Vec<Vec<u32>>,
}

impl ExcitationBlocks {
    pub fn new(n: usize) -> Result<Self> {
        check_emitters(n, MAX_FULL_SPACE_EMITTERS)?;
        let mut masks = vec![Vec::new(); n + 1];
        for m in 0u32..(1 << n) {
            masks[m.count_ones() as usize].push(m);
        }
        Ok(Self { n, masks })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Masks with `k` excitations, ascending.
    pub fn block(&self, k: usize) -> &[u32] {
        &self.masks[k]
    }

    pub fn block_len(&self, k: usize) -> usize {
        self.masks.get(k).map_or(0, Vec::len)
    }

    /// Position of `mask` inside its excitation block.
    pub fn position(&self, mask: u32) -> usize {
        let k = mask.count_ones() as usize;
        self.masks[k].binary_search(&mask).expect("mask belongs to its excitation block")
    }
}

/// The Hilbert space a state lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Space {
    /// Joint emitter/photon sector with fixed total quanta.
    Sector { n: usize, quanta: usize },
    /// The `2^n` dimensional emitter-only space, indexed by mask.
    Qubits { n: usize },
}

impl Space {
    pub fn qubits(n: usize) -> Result<Self> {
        check_emitters(n, MAX_FULL_SPACE_EMITTERS)?;
        Ok(Space::Qubits { n })
    }

    pub fn n(&self) -> usize {
        match *self {
            Space::Sector { n, .. } | Space::Qubits { n } => n,
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            Space::Sector { n, quanta } => (0..=n.min(quanta)).map(|k| binomial(n, k)).sum(),
            Space::Qubits { n } => 1 << n,
        }
    }
}

fn check_space(space: Space) -> Result<()> {
    match space {
        Space::Sector { n, .. } => check_emitters(n, MAX_EMITTERS),
        Space::Qubits { n } => check_emitters(n, MAX_FULL_SPACE_EMITTERS),
    }
}

/// A state vector over a [`Space`].
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    space: Space,
    amplitudes: DVector<C64>,
}

impl PureState {
    pub fn new(space: Space, amplitudes: DVector<C64>) -> Result<Self> {
        check_space(space)?;
        if amplitudes.len() != space.dim() {
            return param(format!("{} amplitudes for a space of dimension {}", amplitudes.len(), space.dim()));
        }
        Ok(Self { space, amplitudes })
    }

    pub fn basis_state(space: Space, index: usize) -> Result<Self> {
        check_space(space)?;
        let dim = space.dim();
        if index >= dim {
            return param(format!("basis index {index} outside dimension {dim}"));
        }
        let mut amplitudes = DVector::zeros(dim);
        amplitudes[index] = C64::new(1.0, 0.0);
        Ok(Self { space, amplitudes })
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> DVector<C64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOL
    }

    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm_sqr().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Numerical("cannot normalize a null state".into()));
        }
        Ok(Self { space: self.space, amplitudes: self.amplitudes.unscale(norm) })
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> Result<C64> {
        if self.space != other.space {
            return param(format!("space mismatch: {:?} vs {:?}", self.space, other.space));
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// `|⟨target|self⟩|²`, clamped to `[0, 1]`.
    pub fn fidelity_to(&self, target: &PureState) -> Result<f64> {
        Ok(target.inner(self)?.norm_sqr().clamp(0.0, 1.0))
    }

    /// Lifts an emitter state with a definite excitation count `k` into the
    /// sector with `k + photons` quanta.
    pub fn with_photons(&self, photons: usize) -> Result<PureState> {
        let Space::Qubits { n } = self.space else {
            return param("with_photons expects an emitter-space state");
        };
        let mut k = None;
        for (mask, a) in self.amplitudes.iter().enumerate() {
            if *a != C64::new(0.0, 0.0) {
                let pop = (mask as u32).count_ones() as usize;
                match k {
                    None => k = Some(pop),
                    Some(prev) if prev != pop => {
                        return param("state mixes excitation numbers; no single sector holds it")
                    }
                    _ => {}
                }
            }
        }
        let k = k.unwrap_or(0);
        let basis = enumerate_sector(n, k + photons)?;
        let mut amplitudes = DVector::zeros(basis.len());
        for (mask, a) in self.amplitudes.iter().enumerate() {
            if (mask as u32).count_ones() as usize == k {
                let idx = basis.index_of(mask as u32).expect("mask in sector");
                amplitudes[idx] = *a;
            }
        }
        Ok(PureState { space: basis.space(), amplitudes })
    }

    /// Projects a sector state onto `photons` cavity quanta and returns the
    /// (unnormalized) emitter-space remainder.
    pub fn photon_component(&self, photons: usize) -> Result<PureState> {
        let Space::Sector { n, quanta } = self.space else {
            return param("photon_component expects a sector state");
        };
        let space = Space::qubits(n)?;
        let basis = enumerate_sector(n, quanta)?;
        let mut amplitudes = DVector::zeros(space.dim());
        for i in basis.indices_with_photons(photons) {
            amplitudes[basis.masks()[i] as usize] = self.amplitudes[i];
        }
        Ok(PureState { space, amplitudes })
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix { space: self.space, matrix: &self.amplitudes * self.amplitudes.adjoint() }
    }
}

/// A density matrix over a [`Space`].
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    space: Space,
    matrix: DMatrix<C64>,
}

impl DensityMatrix {
    /// Wraps `matrix` after checking it is Hermitian, positive and of unit
    /// trace.
    pub fn new(space: Space, matrix: DMatrix<C64>) -> Result<Self> {
        let rho = Self::new_unchecked(space, matrix)?;
        rho.validate()?;
        Ok(rho)
    }

    /// Shape checks only; the matrix may be unnormalized.
    pub fn new_unchecked(space: Space, matrix: DMatrix<C64>) -> Result<Self> {
        check_space(space)?;
        let dim = space.dim();
        if matrix.shape() != (dim, dim) {
            return param(format!("matrix of shape {:?} for a space of dimension {dim}", matrix.shape()));
        }
        Ok(Self { space, matrix })
    }

    pub fn maximally_mixed(n: usize) -> Result<Self> {
        let space = Space::qubits(n)?;
        let dim = space.dim();
        Ok(Self { space, matrix: DMatrix::from_diagonal_element(dim, dim, C64::new(1.0 / dim as f64, 0.0)) })
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.matrix.nrows();
        let herm = (0..dim)
            .flat_map(|i| (0..dim).map(move |j| (i, j)))
            .map(|(i, j)| (self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm())
            .fold(0.0, f64::max);
        if herm > NORM_TOL {
            return param(format!("density matrix not Hermitian (defect {herm:e})"));
        }
        let trace = self.trace();
        if (trace - 1.0).abs() > NORM_TOL {
            return param(format!("density matrix trace {trace} != 1"));
        }
        let eig = nalgebra::SymmetricEigen::new(self.matrix.clone());
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -1e-10 {
            return param(format!("density matrix has negative eigenvalue {min:e}"));
        }
        Ok(())
    }

    /// `⟨target|ρ|target⟩`, clamped to `[0, 1]`.
    pub fn fidelity_to(&self, target: &PureState) -> Result<f64> {
        if self.space != target.space {
            return param(format!("space mismatch: {:?} vs {:?}", self.space, target.space));
        }
        let v = &target.amplitudes;
        Ok(v.dotc(&(&self.matrix * v)).re.clamp(0.0, 1.0))
    }
}

impl From<&PureState> for DensityMatrix {
    fn from(state: &PureState) -> Self {
        state.to_density()
    }
}

/// Named states of the emitter register.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Canonical {
    /// Uniform superposition of all single-excitation configurations.
    W1,
    /// Uniform superposition of all `(n-1)`-excitation configurations.
    W2,
    /// Uniform superposition of all two-excitation configurations.
    Phi,
    /// `(|1_i⟩ - |1_j⟩)/√2` on the single-excitation manifold.
    Singlet(usize, usize),
    Computational(u32),
}

pub fn canonical_state(kind: Canonical, n: usize) -> Result<PureState> {
    let space = Space::qubits(n)?;
    let mut amplitudes = DVector::zeros(space.dim());
    let uniform_over = |amps: &mut DVector<C64>, k: usize| {
        let weight = C64::new(1.0 / (binomial(n, k) as f64).sqrt(), 0.0);
        for mask in 0..amps.len() {
            if (mask as u32).count_ones() as usize == k {
                amps[mask] = weight;
            }
        }
    };
    match kind {
        Canonical::W1 | Canonical::W2 | Canonical::Phi | Canonical::Singlet(..) if n < 2 => {
            return param(format!("{kind:?} needs at least two emitters"));
        }
        Canonical::W1 => uniform_over(&mut amplitudes, 1),
        Canonical::W2 => uniform_over(&mut amplitudes, n - 1),
        Canonical::Phi => uniform_over(&mut amplitudes, 2),
        Canonical::Singlet(i, j) => {
            if i == j || i >= n || j >= n {
                return param(format!("singlet indices ({i}, {j}) invalid for n = {n}"));
            }
            let h = std::f64::consts::FRAC_1_SQRT_2;
            amplitudes[1 << i] = C64::new(h, 0.0);
            amplitudes[1 << j] = C64::new(-h, 0.0);
        }
        Canonical::Computational(mask) => {
            let config = QubitConfig::new(n, mask)?;
            amplitudes[config.mask() as usize] = C64::new(1.0, 0.0);
        }
    }
    Ok(PureState { space, amplitudes })
}

/// JSON layout shared by states and operators.
#[derive(Serialize, Deserialize)]
struct BasisTag {
    n: usize,
    q: QuantaTag,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum QuantaTag {
    Sector(usize),
    Label(String),
}

const QUBIT_ONLY: &str = "qubit-only";

impl Serialize for Space {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let tag = match *self {
            Space::Sector { n, quanta } => BasisTag { n, q: QuantaTag::Sector(quanta) },
            Space::Qubits { n } => BasisTag { n, q: QuantaTag::Label(QUBIT_ONLY.into()) },
        };
        tag.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Space {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let tag = BasisTag::deserialize(d)?;
        let space = match tag.q {
            QuantaTag::Sector(quanta) => Space::Sector { n: tag.n, quanta },
            QuantaTag::Label(l) if l == QUBIT_ONLY => Space::Qubits { n: tag.n },
            QuantaTag::Label(l) => return Err(serde::de::Error::custom(format!("unknown basis label {l:?}"))),
        };
        check_space(space).map_err(serde::de::Error::custom)?;
        Ok(space)
    }
}

pub(crate) fn complex_pairs<'a>(values: impl IntoIterator<Item = &'a C64>) -> Vec<[f64; 2]> {
    values.into_iter().map(|z| [z.re, z.im]).collect()
}

#[derive(Serialize, Deserialize)]
struct PureStateRepr {
    basis: Space,
    amplitudes: Vec<[f64; 2]>,
}

impl Serialize for PureState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PureStateRepr { basis: self.space, amplitudes: complex_pairs(self.amplitudes.iter()) }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PureState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = PureStateRepr::deserialize(d)?;
        let amplitudes =
            DVector::from_iterator(repr.amplitudes.len(), repr.amplitudes.iter().map(|&[re, im]| C64::new(re, im)));
        PureState::new(repr.basis, amplitudes).map_err(serde::de::Error::custom)
    }
}
