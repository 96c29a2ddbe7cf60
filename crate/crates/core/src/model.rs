//! Dimer Hamiltonian, Lindblad generator and the single-site polariton
//! ladder.
//!
//! All operators live in the frame rotating at the cavity frequency: the
//! term `omega_c * N_tot` is removed, which leaves the detuning
//! `delta = omega_x - omega_c` on the qubits. `N_tot` commutes with the
//! Hamiltonian, with every dissipator, and with all recorded observables,
//! so nothing observable changes.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    qubit_lowering, qubit_raising, site_annihilation, site_creation, Site, SpaceDescriptor,
};
use crate::sparse::SparseOperator;

/// Rates in arbitrary but consistent units (the CLI uses units of `J`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub omega_c: f64,
    pub omega_x: f64,
    pub g: f64,
    pub j: f64,
    pub kappa: f64,
    pub gamma: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self { omega_c: 0.0, omega_x: 0.0, g: 0.0, j: 1.0, kappa: 0.0, gamma: 0.0 }
    }
}

impl ModelParams {
    /// Resonant, lossless dimer.
    pub fn resonant(g: f64, j: f64) -> Self {
        Self { g, j, ..Self::default() }
    }

    pub fn with_losses(mut self, kappa: f64, gamma: f64) -> Self {
        self.kappa = kappa;
        self.gamma = gamma;
        self
    }

    pub fn detuning(&self) -> f64 {
        self.omega_x - self.omega_c
    }

    pub fn is_conservative(&self) -> bool {
        self.kappa == 0.0 && self.gamma == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let named = [("g", self.g), ("J", self.j), ("kappa", self.kappa), ("gamma", self.gamma)];
        for (name, v) in named {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        if !self.omega_c.is_finite() || !self.omega_x.is_finite() {
            return Err(Error::InvalidParameter("frequencies must be finite".into()));
        }
        Ok(())
    }
}

/// `H = sum_i [delta sigma_i^+ sigma_i^- + g (sigma_i^+ a_i + sigma_i^- a_i†)]
///      - J (a_L† a_R + a_R† a_L)`
pub fn dimer_hamiltonian(space: &SpaceDescriptor, params: &ModelParams) -> SparseOperator {
    // Every product is ordered lowering-first so that no intermediate state
    // leaves a capped space; each coupling is then completed by its adjoint.
    let dim = space.dim();
    let mut h = SparseOperator::zeros(dim);
    let delta = params.detuning();
    for site in [Site::Left, Site::Right] {
        let a = site_annihilation(space, site);
        let sm = qubit_lowering(space, site);
        let sp = qubit_raising(space, site);
        if delta != 0.0 {
            h = &h + &(&sp * &sm).scale(delta);
        }
        let absorb = &sp * &a;
        h = &h + &(&absorb + &absorb.adjoint()).scale(params.g);
    }
    let hop = &site_creation(space, Site::Left) * &site_annihilation(space, Site::Right);
    &h + &(&hop + &hop.adjoint()).scale(-params.j)
}

/// The four dissipative channels `(a_L, kappa)`, `(a_R, kappa)`,
/// `(sigma^-_L, gamma)`, `(sigma^-_R, gamma)`. Zero-rate channels are kept.
pub fn jump_operators(space: &SpaceDescriptor, params: &ModelParams) -> Vec<(SparseOperator, f64)> {
    vec![
        (site_annihilation(space, Site::Left), params.kappa),
        (site_annihilation(space, Site::Right), params.kappa),
        (qubit_lowering(space, Site::Left), params.gamma),
        (qubit_lowering(space, Site::Right), params.gamma),
    ]
}

/// Lower (`Minus`) or upper (`Plus`) polariton branch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Branch {
    Minus,
    Plus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Minus => -1.0,
            Branch::Plus => 1.0,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Branch::Minus => '-',
            Branch::Plus => '+',
        }
    }
}

/// Eigenstate of one Jaynes-Cummings site with `m` excitations:
/// `amp_g |m, g> + amp_e |m-1, e>`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolaritonLevel {
    pub m: usize,
    pub branch: Branch,
    pub energy: f64,
    pub amp_g: f64,
    pub amp_e: f64,
}

/// Polariton ladder rung `m`. `m = 0` has the single level `|0, g>`;
/// otherwise the two branches are returned lower first.
pub fn jc_eigensystem(m: usize, params: &ModelParams) -> Vec<PolaritonLevel> {
    if m == 0 {
        return vec![PolaritonLevel { m, branch: Branch::Minus, energy: 0.0, amp_g: 1.0, amp_e: 0.0 }];
    }
    let delta = params.detuning();
    let c = params.g * (m as f64).sqrt();
    // [[0, c], [c, delta]] in the basis (|m,g>, |m-1,e>)
    let half = delta / 2.0;
    let root = (half * half + c * c).sqrt();
    [Branch::Minus, Branch::Plus]
        .into_iter()
        .map(|branch| {
            let energy = half + branch.sign() * root;
            let (amp_g, amp_e) = if c == 0.0 {
                // uncoupled: the lower level is whichever bare state has lower energy
                let g_is_lower = delta >= 0.0;
                match (branch, g_is_lower) {
                    (Branch::Minus, true) | (Branch::Plus, false) => (1.0, 0.0),
                    _ => (0.0, 1.0),
                }
            } else {
                let n = (c * c + energy * energy).sqrt();
                (c / n, energy / n)
            };
            PolaritonLevel { m, branch, energy, amp_g, amp_e }
        })
        .collect()
}

/// `i[rho, H] + sum_k rate_k (2 O rho O† - O†O rho - rho O†O) / 2`
pub fn liouvillian_apply(
    rho: &DMatrix<C64>,
    h: &SparseOperator,
    jumps: &[(SparseOperator, f64)],
) -> Result<DMatrix<C64>> {
    let dim = h.dim();
    if rho.nrows() != dim || rho.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: rho.nrows() });
    }
    for (op, _) in jumps {
        if op.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: op.dim() });
        }
    }
    let i = C64::new(0.0, 1.0);
    let mut out = (dense_sparse(rho, h) - sparse_dense(h, rho)) * i;
    for (op, rate) in jumps {
        if *rate == 0.0 {
            continue;
        }
        let od = op.adjoint();
        let odo = &od * op;
        let sandwich = dense_sparse(&sparse_dense(op, rho), &od);
        let anti = sparse_dense(&odo, rho) + dense_sparse(rho, &odo);
        out += (sandwich * C64::new(2.0, 0.0) - anti) * C64::new(rate / 2.0, 0.0);
    }
    Ok(out)
}

fn sparse_dense(a: &SparseOperator, m: &DMatrix<C64>) -> DMatrix<C64> {
    let mut out = DMatrix::zeros(a.dim(), m.ncols());
    for (r, c, v) in a.triplets() {
        for k in 0..m.ncols() {
            out[(r, k)] += v * m[(c, k)];
        }
    }
    out
}

fn dense_sparse(m: &DMatrix<C64>, a: &SparseOperator) -> DMatrix<C64> {
    let mut out = DMatrix::zeros(m.nrows(), a.dim());
    for (r, c, v) in a.triplets() {
        for k in 0..m.nrows() {
            out[(k, c)] += m[(k, r)] * v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{build_space, total_excitation, BasisState};

    /// Dense single-mode matrices lifted by Kronecker products onto the full
    /// `(n_max+1)² · 4` product space and restricted to the basis.
    fn brute_hamiltonian(space: &SpaceDescriptor, p: &ModelParams) -> DMatrix<C64> {
        let nb = space.n_max() + 1;
        let c = |x: f64| C64::new(x, 0.0);
        let mut a = DMatrix::<C64>::zeros(nb, nb);
        for n in 1..nb {
            a[(n - 1, n)] = c((n as f64).sqrt());
        }
        let mut sm = DMatrix::<C64>::zeros(2, 2);
        sm[(0, 1)] = c(1.0);
        let ib = DMatrix::<C64>::identity(nb, nb);
        let iq = DMatrix::<C64>::identity(2, 2);
        let lift = |x: [&DMatrix<C64>; 4]| x[0].kronecker(x[1]).kronecker(x[2]).kronecker(x[3]);
        let a_l = lift([&a, &iq, &ib, &iq]);
        let a_r = lift([&ib, &iq, &a, &iq]);
        let s_l = lift([&ib, &sm, &ib, &iq]);
        let s_r = lift([&ib, &iq, &ib, &sm]);
        let mut h = (a_l.adjoint() * &a_r + a_r.adjoint() * &a_l) * c(-p.j);
        for (a, s) in [(&a_l, &s_l), (&a_r, &s_r)] {
            h += (s.adjoint() * a + s * a.adjoint()) * c(p.g);
            h += s.adjoint() * s * c(p.detuning());
        }
        let full_index = |b: &BasisState| ((b.n_l * 2 + b.q_l as usize) * nb + b.n_r) * 2 + b.q_r as usize;
        let idx: Vec<usize> = space.basis().iter().map(full_index).collect();
        DMatrix::from_fn(idx.len(), idx.len(), |i, j| h[(idx[i], idx[j])])
    }

    fn params() -> ModelParams {
        ModelParams { omega_c: 3.0, omega_x: 3.4, g: 1.3, j: 0.7, kappa: 0.2, gamma: 0.1 }
    }

    #[test]
    fn matrix_elements() {
        let space = build_space(2, None).unwrap();
        let p = ModelParams::resonant(0.8, 0.3);
        let h = dimer_hamiltonian(&space, &p);
        let idx = |nl, ql, nr, qr| space.index_of(&BasisState::new(nl, ql, nr, qr)).unwrap();
        assert!((h.get(idx(0, true, 0, false), idx(1, false, 0, false)) - C64::new(0.8, 0.0)).norm() < 1e-15);
        assert!((h.get(idx(0, false, 1, false), idx(1, false, 0, false)) - C64::new(-0.3, 0.0)).norm() < 1e-15);
        let zero = dimer_hamiltonian(&space, &ModelParams::resonant(0.0, 0.0));
        assert_eq!(zero.nnz(), 0);
    }

    #[test]
    fn hamiltonian_matches_kronecker_oracle() {
        for (n_max, cap) in [(1, None), (2, None), (3, Some(3)), (4, Some(2))] {
            let space = build_space(n_max, cap).unwrap();
            let h = dimer_hamiltonian(&space, &params()).to_dense();
            let oracle = brute_hamiltonian(&space, &params());
            assert!(crate::state::max_abs(&(h - oracle)) < 1e-12, "n_max={n_max} cap={cap:?}");
        }
    }

    #[test]
    fn hermitian_and_excitation_conserving() {
        for cap in [None, Some(4)] {
            let space = build_space(4, cap).unwrap();
            let h = dimer_hamiltonian(&space, &params());
            assert!(h.hermiticity_error() < 1e-12);
            let comm = h.commutator(&total_excitation(&space)).unwrap();
            // uncapped truncation breaks conservation only through the ladder top
            if cap.is_some() {
                assert!(comm.max_abs() < 1e-12);
            }
        }
        let space = build_space(3, None).unwrap();
        let p = ModelParams { j: 0.0, ..params() };
        let comm = dimer_hamiltonian(&space, &p).commutator(&total_excitation(&space)).unwrap();
        assert!(comm.max_abs() < 1e-12);
    }

    #[test]
    fn swap_symmetry() {
        let space = build_space(3, Some(4)).unwrap();
        let h = dimer_hamiltonian(&space, &params());
        let swapped = h.permuted(&space.swap_permutation()).unwrap();
        assert!((&h - &swapped).max_abs() < 1e-15);
    }

    #[test]
    fn polariton_ladder_resonant() {
        let p = ModelParams::resonant(0.9, 1.0);
        let zero = jc_eigensystem(0, &p);
        assert_eq!(zero.len(), 1);
        assert_eq!(zero[0].energy, 0.0);
        let one = jc_eigensystem(1, &p);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((one[0].energy + 0.9).abs() < 1e-15 && (one[1].energy - 0.9).abs() < 1e-15);
        assert!((one[0].amp_g - r).abs() < 1e-15 && (one[0].amp_e + r).abs() < 1e-15);
        assert!((one[1].amp_g - r).abs() < 1e-15 && (one[1].amp_e - r).abs() < 1e-15);
        for m in 1..8 {
            let lv = jc_eigensystem(m, &p);
            assert!((lv[1].energy - lv[0].energy - 2.0 * 0.9 * (m as f64).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn polariton_ladder_detuned_matches_2x2() {
        let p = params();
        for m in 1..5 {
            let c = p.g * (m as f64).sqrt();
            let block = nalgebra::Matrix2::new(0.0, c, c, p.detuning());
            for lv in jc_eigensystem(m, &p) {
                let v = nalgebra::Vector2::new(lv.amp_g, lv.amp_e);
                assert!((block * v - v * lv.energy).norm() < 1e-12);
                assert!((v.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn uncoupled_dimer_spectrum_is_polariton_sums() {
        let cap = 3;
        let p = ModelParams { j: 0.0, ..params() };
        let space = build_space(cap, Some(cap)).unwrap();
        let h = dimer_hamiltonian(&space, &p).to_dense();
        let mut numeric: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        numeric.sort_by(f64::total_cmp);
        let mut sums = Vec::new();
        for ml in 0..=cap {
            for mr in 0..=cap - ml {
                for a in jc_eigensystem(ml, &p) {
                    for b in jc_eigensystem(mr, &p) {
                        sums.push(a.energy + b.energy);
                    }
                }
            }
        }
        sums.sort_by(f64::total_cmp);
        assert_eq!(sums.len(), numeric.len());
        for (a, b) in sums.iter().zip(&numeric) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn liouvillian_rejects_wrong_dimension() {
        let space = build_space(1, None).unwrap();
        let h = dimer_hamiltonian(&space, &params());
        let rho = DMatrix::<C64>::zeros(3, 3);
        assert!(liouvillian_apply(&rho, &h, &[]).is_err());
    }
}
