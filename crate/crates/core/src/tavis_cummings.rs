//! Resonant emitter-cavity coupling restricted to a conserved-quanta sector,
//! its exact propagator and state evolution.
//!
//! In the ascending-mask basis the Hamiltonian is real symmetric: the only
//! nonzero entries are `γ√p` between `(mask, p)` and `(mask | 1<<m, p-1)`.
//! Time enters only through the dimensionless `θ = γτ`, and the propagator
//! is `exp(-i H θ/γ)`.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{param, Result};
use crate::fock::{complex_pairs, enumerate_sector, DensityMatrix, PureState, SectorBasis, Space};
use crate::linalg;

/// Interaction Hamiltonian on one sector.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    basis: SectorBasis,
    matrix: DMatrix<f64>,
    coupling: f64,
}

/// Hamiltonian of `n` emitters with `q` total quanta at unit coupling.
pub fn hamiltonian(n: usize, q: usize) -> Result<Hamiltonian> {
    Hamiltonian::with_coupling(n, q, 1.0)
}

impl Hamiltonian {
    pub fn with_coupling(n: usize, q: usize, coupling: f64) -> Result<Self> {
        if !(coupling.is_finite() && coupling > 0.0) {
            return param(format!("coupling must be positive and finite, got {coupling}"));
        }
        let basis = enumerate_sector(n, q)?;
        let dim = basis.len();
        let mut matrix = DMatrix::zeros(dim, dim);
        for (col, &mask) in basis.masks().iter().enumerate() {
            let photons = basis.photons(col);
            if photons == 0 {
                continue;
            }
            let amp = coupling * (photons as f64).sqrt();
            for m in 0..n {
                let bit = 1u32 << m;
                if mask & bit == 0 {
                    let row = basis.index_of(mask | bit).expect("raised configuration stays in sector");
                    matrix[(row, col)] = amp;
                    matrix[(col, row)] = amp;
                }
            }
        }
        Ok(Self { basis, matrix, coupling })
    }

    pub fn basis(&self) -> &SectorBasis {
        &self.basis
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    /// Real entries in the sector basis.
    pub fn real_matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn matrix(&self) -> DMatrix<C64> {
        self.matrix.map(|x| C64::new(x, 0.0))
    }

    pub fn apply(&self, state: &PureState) -> Result<PureState> {
        check_same_space(self.basis.space(), state.space())?;
        PureState::new(state.space(), self.matrix() * state.amplitudes())
    }

    /// Diagonalizes the Hamiltonian once so propagators at any θ are cheap.
    pub fn dynamics(&self) -> Result<SectorDynamics> {
        let (energies, modes) = linalg::symmetric_eigen(self.matrix.clone())?;
        Ok(SectorDynamics { basis: self.basis.clone(), coupling: self.coupling, energies, modes })
    }
}

fn check_same_space(expected: Space, got: Space) -> Result<()> {
    if expected != got {
        return param(format!("basis mismatch: operator on {expected:?}, state on {got:?}"));
    }
    Ok(())
}

/// Eigendecomposition of a sector Hamiltonian.
#[derive(Clone, Debug)]
pub struct SectorDynamics {
    basis: SectorBasis,
    coupling: f64,
    energies: Vec<f64>,
    modes: DMatrix<f64>,
}

impl SectorDynamics {
    pub fn basis(&self) -> &SectorBasis {
        &self.basis
    }

    /// Eigenvalues of `H`, ascending.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    fn phases(&self, theta: f64) -> Vec<C64> {
        let t = theta / self.coupling;
        self.energies.iter().map(|&e| C64::from_polar(1.0, -e * t)).collect()
    }

    pub fn propagator(&self, theta: f64) -> Propagator {
        let all: Vec<usize> = (0..self.basis.len()).collect();
        Propagator { basis: self.basis.clone(), matrix: self.propagator_block(theta, &all, &all), theta }
    }

    /// Rows `rows` and columns `cols` of `U(θ)`.
    pub fn propagator_block(&self, theta: f64, rows: &[usize], cols: &[usize]) -> DMatrix<C64> {
        let phases = self.phases(theta);
        let left = DMatrix::from_fn(rows.len(), phases.len(), |r, j| phases[j] * self.modes[(rows[r], j)]);
        let right = DMatrix::from_fn(phases.len(), cols.len(), |j, c| C64::new(self.modes[(cols[c], j)], 0.0));
        left * right
    }
}

/// `exp(-i H θ/γ)` on one sector.
#[derive(Clone, Debug)]
pub struct Propagator {
    basis: SectorBasis,
    matrix: DMatrix<C64>,
    theta: f64,
}

/// Exact propagator by Hermitian eigendecomposition.
pub fn propagator(h: &Hamiltonian, theta: f64) -> Result<Propagator> {
    Ok(h.dynamics()?.propagator(theta))
}

impl Propagator {
    pub fn basis(&self) -> &SectorBasis {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Largest entry of `|U U† - I|`.
    pub fn unitarity_defect(&self) -> f64 {
        let dim = self.matrix.nrows();
        let prod = &self.matrix * self.matrix.adjoint();
        (prod - DMatrix::<C64>::identity(dim, dim)).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Unitary evolution of a state (`Uψ` or `UρU†`).
pub trait Evolve: Sized {
    fn evolve(&self, u: &Propagator) -> Result<Self>;
}

impl Evolve for PureState {
    fn evolve(&self, u: &Propagator) -> Result<Self> {
        check_same_space(u.basis.space(), self.space())?;
        PureState::new(self.space(), &u.matrix * self.amplitudes())
    }
}

impl Evolve for DensityMatrix {
    fn evolve(&self, u: &Propagator) -> Result<Self> {
        check_same_space(u.basis.space(), self.space())?;
        DensityMatrix::new_unchecked(self.space(), &u.matrix * self.matrix() * u.matrix.adjoint())
    }
}

pub fn evolve<S: Evolve>(state: &S, u: &Propagator) -> Result<S> {
    state.evolve(u)
}

/// Per-sector eigendecompositions for a fixed emitter count, computed on
/// first use and shared across threads.
#[derive(Debug)]
pub struct TavisCummings {
    n: usize,
    coupling: f64,
    sectors: Mutex<BTreeMap<usize, Arc<SectorDynamics>>>,
}

impl TavisCummings {
    pub fn new(n: usize) -> Result<Self> {
        Self::with_coupling(n, 1.0)
    }

    pub fn with_coupling(n: usize, coupling: f64) -> Result<Self> {
        // validates n and coupling
        Hamiltonian::with_coupling(n, 0, coupling)?;
        Ok(Self { n, coupling, sectors: Mutex::new(BTreeMap::new()) })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sector(&self, quanta: usize) -> Result<Arc<SectorDynamics>> {
        if let Some(found) = self.sectors.lock().expect("sector cache poisoned").get(&quanta) {
            return Ok(Arc::clone(found));
        }
        // Diagonalize outside the lock; a racing thread computes the same result.
        let dynamics = Arc::new(Hamiltonian::with_coupling(self.n, quanta, self.coupling)?.dynamics()?);
        let mut cache = self.sectors.lock().expect("sector cache poisoned");
        Ok(Arc::clone(cache.entry(quanta).or_insert(dynamics)))
    }
}

#[derive(Serialize)]
struct DenseOperatorRepr {
    basis: Space,
    entries: Vec<[f64; 2]>,
}

fn dense_repr(basis: &SectorBasis, m: &DMatrix<C64>) -> DenseOperatorRepr {
    let row_major = m.transpose();
    DenseOperatorRepr { basis: basis.space(), entries: complex_pairs(row_major.iter()) }
}

impl Serialize for Hamiltonian {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        dense_repr(&self.basis, &self.matrix()).serialize(s)
    }
}

impl Serialize for Propagator {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        dense_repr(&self.basis, &self.matrix).serialize(s)
    }
}
