//! Truncated Hilbert space of two cavities and two qubits, elementary
//! operators on it, and product initial states.

use std::collections::HashMap;
use std::fmt;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::sparse::SparseOperator;
use crate::state::QuantumState;

/// Largest Poisson weight a truncated coherent state may discard.
pub const COHERENT_TAIL_LIMIT: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Site {
    Left,
    Right,
}

impl Site {
    pub fn other(self) -> Site {
        match self {
            Site::Left => Site::Right,
            Site::Right => Site::Left,
        }
    }
}

/// Occupation labels `|n_L, q_L; n_R, q_R>`. `q = true` is the excited qubit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisState {
    pub n_l: usize,
    pub q_l: bool,
    pub n_r: usize,
    pub q_r: bool,
}

impl BasisState {
    pub fn new(n_l: usize, q_l: bool, n_r: usize, q_r: bool) -> Self {
        Self { n_l, q_l, n_r, q_r }
    }

    pub fn photons(&self, site: Site) -> usize {
        match site {
            Site::Left => self.n_l,
            Site::Right => self.n_r,
        }
    }

    pub fn excited(&self, site: Site) -> bool {
        match site {
            Site::Left => self.q_l,
            Site::Right => self.q_r,
        }
    }

    fn with_photons(mut self, site: Site, n: usize) -> Self {
        match site {
            Site::Left => self.n_l = n,
            Site::Right => self.n_r = n,
        }
        self
    }

    fn with_qubit(mut self, site: Site, q: bool) -> Self {
        match site {
            Site::Left => self.q_l = q,
            Site::Right => self.q_r = q,
        }
        self
    }

    /// Total excitation `n_L + n_R + q_L + q_R`.
    pub fn excitation(&self) -> usize {
        self.n_l + self.n_r + self.q_l as usize + self.q_r as usize
    }

    /// Mirror image under L <-> R.
    pub fn swapped(&self) -> Self {
        Self { n_l: self.n_r, q_l: self.q_r, n_r: self.n_l, q_r: self.q_l }
    }
}

impl fmt::Display for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let q = |e: bool| if e { 'e' } else { 'g' };
        write!(f, "|{},{}; {},{}>", self.n_l, q(self.q_l), self.n_r, q(self.q_r))
    }
}

/// Enumerated basis with contiguous indexing. Immutable once built.
#[derive(Clone, Debug)]
pub struct SpaceDescriptor {
    n_max: usize,
    excitation_cap: Option<usize>,
    basis: Vec<BasisState>,
    index: HashMap<BasisState, usize>,
}

/// Build the truncated space. Basis order is lexicographic in
/// `(n_L, q_L, n_R, q_R)`.
pub fn build_space(n_max: usize, excitation_cap: Option<usize>) -> Result<SpaceDescriptor> {
    let admissible = |s: &BasisState| excitation_cap.is_none_or(|c| s.excitation() <= c);
    let mut basis = Vec::new();
    for n_l in 0..=n_max {
        for q_l in [false, true] {
            for n_r in 0..=n_max {
                for q_r in [false, true] {
                    let s = BasisState::new(n_l, q_l, n_r, q_r);
                    if admissible(&s) {
                        basis.push(s);
                    }
                }
            }
        }
    }
    if basis.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "n_max = {n_max}, cap = {excitation_cap:?} yields an empty space"
        )));
    }
    let index = basis.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    Ok(SpaceDescriptor { n_max, excitation_cap, basis, index })
}

impl SpaceDescriptor {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn excitation_cap(&self) -> Option<usize> {
        self.excitation_cap
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[BasisState] {
        &self.basis
    }

    pub fn state(&self, i: usize) -> BasisState {
        self.basis[i]
    }

    pub fn index_of(&self, s: &BasisState) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn contains(&self, s: &BasisState) -> bool {
        self.index.contains_key(s)
    }

    /// Largest total excitation present in the basis.
    pub fn max_excitation(&self) -> usize {
        self.basis.iter().map(BasisState::excitation).max().unwrap_or(0)
    }

    /// Diagonal operator with entries `f(basis state)`.
    pub fn diagonal_operator(&self, f: impl Fn(&BasisState) -> f64) -> SparseOperator {
        SparseOperator::diagonal(self.basis.iter().map(|s| C64::new(f(s), 0.0)))
    }

    /// Basis permutation implementing L <-> R. The space is symmetric, so
    /// the image of every state exists.
    pub fn swap_permutation(&self) -> Vec<usize> {
        self.basis
            .iter()
            .map(|s| self.index_of(&s.swapped()).expect("space is L/R symmetric"))
            .collect()
    }

    fn lowering(&self, f: impl Fn(&BasisState) -> Option<(BasisState, f64)>) -> SparseOperator {
        let trips = self.basis.iter().enumerate().filter_map(|(col, s)| {
            let (target, amp) = f(s)?;
            let row = self.index_of(&target)?;
            Some((row, col, C64::new(amp, 0.0)))
        });
        SparseOperator::from_triplets(self.dim(), trips).expect("indices come from the basis")
    }
}

/// Photon annihilation `a_site`: `<.., n-1, ..|a|.., n, ..> = sqrt(n)`.
pub fn site_annihilation(space: &SpaceDescriptor, site: Site) -> SparseOperator {
    space.lowering(|s| {
        let n = s.photons(site);
        (n > 0).then(|| (s.with_photons(site, n - 1), (n as f64).sqrt()))
    })
}

/// Photon creation, built as the adjoint of annihilation so that states
/// outside the truncation are projected away.
pub fn site_creation(space: &SpaceDescriptor, site: Site) -> SparseOperator {
    site_annihilation(space, site).adjoint()
}

/// Qubit lowering `sigma^-_site`.
pub fn qubit_lowering(space: &SpaceDescriptor, site: Site) -> SparseOperator {
    space.lowering(|s| s.excited(site).then(|| (s.with_qubit(site, false), 1.0)))
}

pub fn qubit_raising(space: &SpaceDescriptor, site: Site) -> SparseOperator {
    qubit_lowering(space, site).adjoint()
}

/// Qubit inversion with eigenvalues `+1/2` (excited) and `-1/2` (ground).
pub fn qubit_inversion(space: &SpaceDescriptor, site: Site) -> SparseOperator {
    space.diagonal_operator(|s| if s.excited(site) { 0.5 } else { -0.5 })
}

/// `a_site† a_site`.
pub fn photon_number(space: &SpaceDescriptor, site: Site) -> SparseOperator {
    space.diagonal_operator(|s| s.photons(site) as f64)
}

/// Total excitation `sum_i (a_i† a_i + sigma_i^+ sigma_i^-)`.
pub fn total_excitation(space: &SpaceDescriptor) -> SparseOperator {
    space.diagonal_operator(|s| s.excitation() as f64)
}

/// Unit vector on a product basis state.
pub fn fock_product_state(space: &SpaceDescriptor, n_l: usize, n_r: usize, q_l: bool, q_r: bool) -> Result<QuantumState> {
    let s = BasisState::new(n_l, q_l, n_r, q_r);
    let i = space.index_of(&s).ok_or_else(|| {
        Error::StateNotRepresentable(format!(
            "{s} outside truncation (n_max = {}, cap = {:?})",
            space.n_max(),
            space.excitation_cap()
        ))
    })?;
    let mut psi = vec![C64::new(0.0, 0.0); space.dim()];
    psi[i] = C64::new(1.0, 0.0);
    QuantumState::pure(psi)
}

/// Truncated, renormalized coherent amplitudes `c_n ∝ α^n / sqrt(n!)` for
/// `n = 0..=n_max`, together with the discarded Poisson weight.
fn truncated_coherent(alpha: C64, n_max: usize) -> (Vec<C64>, f64) {
    let mut amps = Vec::with_capacity(n_max + 1);
    let mut c = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    amps.push(c);
    for n in 1..=n_max {
        c = c * alpha / (n as f64).sqrt();
        amps.push(c);
    }
    let kept: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    let norm = kept.sqrt();
    amps.iter_mut().for_each(|a| *a /= norm);
    (amps, (1.0 - kept).max(0.0))
}

fn check_coherent_truncation(alpha: C64, n_max: usize) -> Result<()> {
    let a = alpha.norm();
    let required = a * a + 5.0 * a;
    if (n_max as f64) < required {
        return Err(Error::TruncationTooSmall { required, n_max });
    }
    let (_, discarded) = truncated_coherent(alpha, n_max);
    if discarded > COHERENT_TAIL_LIMIT {
        // the |α|² + 5|α| rule alone is not enough at small |α|
        return Err(Error::TruncationTooSmall { required: required.max(n_max as f64 + 1.0), n_max });
    }
    Ok(())
}

/// Product of truncated coherent states in both cavities with both qubits
/// in the ground state. Requires an uncapped space.
pub fn coherent_product_state(space: &SpaceDescriptor, alpha_l: C64, alpha_r: C64) -> Result<QuantumState> {
    if space.excitation_cap().is_some() {
        return Err(Error::StateNotRepresentable(
            "coherent states require a space without excitation cap".into(),
        ));
    }
    check_coherent_truncation(alpha_l, space.n_max())?;
    check_coherent_truncation(alpha_r, space.n_max())?;
    let (cl, _) = truncated_coherent(alpha_l, space.n_max());
    let (cr, _) = truncated_coherent(alpha_r, space.n_max());
    let psi = space
        .basis()
        .iter()
        .map(|s| {
            if s.q_l || s.q_r {
                C64::new(0.0, 0.0)
            } else {
                cl[s.n_l] * cr[s.n_r]
            }
        })
        .collect();
    QuantumState::pure(psi)
}
