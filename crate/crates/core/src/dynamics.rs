//! Time evolution of pure states and density matrices.
//!
//! The Hamiltonian conserves total excitation and every jump operator
//! lowers it by one, so a density matrix splits into blocks `rho[k][k']`
//! between excitation sectors `k` and `k'`, and blocks with different
//! `k - k'` never mix. [`LindbladGenerator`] stores only the blocks with
//! `k >= k'` whose offset occurs in the initial state and applies the
//! generator block by block without ever forming the superoperator. A
//! Fock-state initial condition therefore evolves only the diagonal blocks.

use std::collections::{BTreeSet, HashMap};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hilbert::{photon_number, qubit_inversion, Site, SpaceDescriptor};
use crate::integrator::{integrate, IntegrationStats, IntegratorConfig};
use crate::model::{dimer_hamiltonian, jump_operators, ModelParams};
use crate::sparse::{Csr, SparseOperator};
use crate::state::{min_eigenvalue, pure_expectation, QuantumState};

/// Relative floor below which the imbalance of a depleted dimer is reported
/// as zero.
pub const DEFAULT_DEPLETION_FLOOR: f64 = 1e-6;
/// Trace drift that aborts a density-matrix run.
pub const TRACE_ABORT: f64 = 1e-6;
/// Eigenvalues below this raise the positivity flag.
pub const NEGATIVITY_FLAG: f64 = -1e-7;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Observables at one sample time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObservableRecord {
    pub n_l: f64,
    pub n_r: f64,
    pub n_total: f64,
    pub sz_l: f64,
    pub sz_r: f64,
    /// `(n_L - n_R) / N(t)`, zero when `N(t)` is below the depletion floor.
    pub z: f64,
    /// `(n_L - n_R) / N(0)`, zero when `N(0) = 0`.
    pub z_rescaled: f64,
    pub depleted: bool,
}

impl ObservableRecord {
    pub fn new(n_l: f64, n_r: f64, sz_l: f64, sz_r: f64, n0: f64) -> Self {
        let n_total = n_l + n_r;
        let floor = DEFAULT_DEPLETION_FLOOR * n0;
        let depleted = !(n_total >= floor && n_total > 0.0);
        let z = if depleted { 0.0 } else { (n_l - n_r) / n_total };
        let z_rescaled = if n0 > 0.0 { (n_l - n_r) / n0 } else { 0.0 };
        Self { n_l, n_r, n_total, sz_l, sz_r, z, z_rescaled, depleted }
    }
}

/// Numerical health of the state at one sample.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Diagnostics {
    /// `| ||psi|| - 1 |` for pure runs, `|Tr rho - 1|` for density runs.
    pub trace_err: f64,
    /// `max |rho - rho†|` over stored blocks.
    pub hermiticity_err: f64,
    /// Smallest eigenvalue of `rho`, when checked at this sample.
    pub min_eigenvalue: Option<f64>,
    pub negative_flag: bool,
    /// `<H>` (or the conserved mean-field energy).
    pub energy: f64,
}

#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub records: Vec<ObservableRecord>,
    pub diagnostics: Vec<Diagnostics>,
    pub stats: IntegrationStats,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Initial photon number `N(0)`.
    pub fn initial_photons(&self) -> f64 {
        self.records.first().map_or(0.0, |r| r.n_total)
    }

    pub fn z(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.z).collect()
    }

    pub fn max_trace_err(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.trace_err).fold(0.0, f64::max)
    }

    /// Smallest eigenvalue over all positivity checks (`None` if never checked).
    pub fn min_eigenvalue(&self) -> Option<f64> {
        self.diagnostics.iter().filter_map(|d| d.min_eigenvalue).reduce(f64::min)
    }

    pub fn any_negative_flag(&self) -> bool {
        self.diagnostics.iter().any(|d| d.negative_flag)
    }

    pub(crate) fn push(&mut self, t: f64, record: ObservableRecord, diag: Diagnostics) {
        self.times.push(t);
        self.records.push(record);
        self.diagnostics.push(diag);
    }
}

/// Diagonal observables sampled along a run.
struct DiagonalObservables {
    n_l: Vec<f64>,
    n_r: Vec<f64>,
    sz_l: Vec<f64>,
    sz_r: Vec<f64>,
}

impl DiagonalObservables {
    fn new(space: &SpaceDescriptor) -> Self {
        let diag = |op: SparseOperator| op.diagonal_values().iter().map(|v| v.re).collect();
        Self {
            n_l: diag(photon_number(space, Site::Left)),
            n_r: diag(photon_number(space, Site::Right)),
            sz_l: diag(qubit_inversion(space, Site::Left)),
            sz_r: diag(qubit_inversion(space, Site::Right)),
        }
    }

    /// Weighted sums over basis populations `p[i]` at global indices `idx`.
    fn accumulate(&self, acc: &mut [f64; 4], idx: impl Iterator<Item = (usize, f64)>) {
        for (i, p) in idx {
            acc[0] += p * self.n_l[i];
            acc[1] += p * self.n_r[i];
            acc[2] += p * self.sz_l[i];
            acc[3] += p * self.sz_r[i];
        }
    }
}

/// `<psi|O|psi>` or `Tr(O rho)`.
pub fn expectation(state: &QuantumState, op: &SparseOperator) -> Result<C64> {
    state.expectation(op)
}

/// Solve `d psi/dt = -i H psi` and record observables at every sample time.
/// Norm drift is recorded, never corrected.
pub fn evolve_pure(
    space: &SpaceDescriptor,
    h: &SparseOperator,
    psi0: &QuantumState,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let psi0 = psi0
        .as_pure()
        .ok_or_else(|| Error::InvalidState("evolve_pure needs a pure state".into()))?;
    if psi0.len() != space.dim() || h.dim() != space.dim() {
        return Err(Error::DimensionMismatch { expected: space.dim(), found: psi0.len().min(h.dim()) });
    }
    let obs = DiagonalObservables::new(space);
    let csr = h.csr().clone();
    let mut traj = Trajectory::default();
    let mut n0 = None;
    let stats = integrate(
        psi0.to_vec(),
        cfg,
        |_, psi, dpsi| {
            csr.mul_vec(psi, dpsi);
            dpsi.iter_mut().for_each(|v| *v *= -I);
        },
        |_, t, psi| {
            let mut acc = [0.0; 4];
            obs.accumulate(&mut acc, psi.iter().map(|a| a.norm_sqr()).enumerate());
            let norm = psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            let n0 = *n0.get_or_insert(acc[0] + acc[1]);
            let diag = Diagnostics {
                trace_err: (norm - 1.0).abs(),
                energy: pure_expectation(h, psi).re,
                ..Diagnostics::default()
            };
            traj.push(t, ObservableRecord::new(acc[0], acc[1], acc[2], acc[3], n0), diag);
            Ok(())
        },
    )?;
    traj.stats = stats;
    Ok(traj)
}

/// Options of the density-matrix evolution beyond the integrator settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityOptions {
    /// Number of (evenly spaced) samples at which `min eig rho` is computed.
    /// Block-diagonal runs check every sample when this is `usize::MAX`.
    pub positivity_samples: usize,
}

impl Default for DensityOptions {
    fn default() -> Self {
        Self { positivity_samples: 20 }
    }
}

/// Integrate the Lindblad master equation from `rho0` (pure states are
/// promoted to projectors).
pub fn evolve_density(
    space: &SpaceDescriptor,
    params: &ModelParams,
    rho0: &QuantumState,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    evolve_density_with(space, params, rho0, cfg, DensityOptions::default())
}

pub fn evolve_density_with(
    space: &SpaceDescriptor,
    params: &ModelParams,
    rho0: &QuantumState,
    cfg: &IntegratorConfig,
    opts: DensityOptions,
) -> Result<Trajectory> {
    params.validate()?;
    if rho0.dim() != space.dim() {
        return Err(Error::DimensionMismatch { expected: space.dim(), found: rho0.dim() });
    }
    let gen = LindbladGenerator::new(space, params, rho0)?;
    let obs = DiagonalObservables::new(space);
    let y0 = gen.pack(rho0);
    let n_samples = cfg.sample_times.len();
    let check_at: BTreeSet<usize> = if opts.positivity_samples == usize::MAX || n_samples == 0 {
        (0..n_samples).collect()
    } else {
        let m = opts.positivity_samples.min(n_samples);
        (0..m).map(|i| if m == 1 { n_samples - 1 } else { i * (n_samples - 1) / (m - 1) }).collect()
    };
    let mut traj = Trajectory::default();
    let mut n0 = None;
    let stats = integrate(
        y0,
        cfg,
        |_, y, dy| gen.apply(y, dy),
        |k, t, y| {
            let mut acc = [0.0; 4];
            let mut trace = ZERO;
            for (block, rho) in gen.diagonal_blocks(y) {
                let idx = &gen.sectors[block.row];
                let d = idx.len();
                obs.accumulate(&mut acc, (0..d).map(|i| (idx[i], rho[i * d + i].re)));
                trace += (0..d).map(|i| rho[i * d + i]).sum::<C64>();
            }
            let trace_err = (trace - C64::new(1.0, 0.0)).norm();
            let (hermiticity_err, energy) = gen.hermiticity_and_energy(y);
            let min_eig = check_at.contains(&k).then(|| gen.min_eigenvalue(y));
            let negative_flag = min_eig.is_some_and(|e| e < NEGATIVITY_FLAG);
            if negative_flag {
                log::warn!("density matrix eigenvalue {:e} at t = {t}", min_eig.unwrap_or_default());
            }
            let n0 = *n0.get_or_insert(acc[0] + acc[1]);
            let diag = Diagnostics { trace_err, hermiticity_err, min_eigenvalue: min_eig, negative_flag, energy };
            traj.push(t, ObservableRecord::new(acc[0], acc[1], acc[2], acc[3], n0), diag);
            if trace_err > TRACE_ABORT {
                return Err(Error::TraceDrift { t, drift: trace_err });
            }
            Ok(())
        },
    )?;
    traj.stats = stats;
    Ok(traj)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct BlockKey {
    row: usize,
    col: usize,
}

#[derive(Clone, Copy, Debug)]
struct Block {
    key: BlockKey,
    offset: usize,
    /// Block `(row + 1, col + 1)` feeding this one through the jumps.
    source: Option<usize>,
}

/// Matrix-free Lindblad generator acting on excitation-sector blocks.
pub struct LindbladGenerator {
    /// Global basis indices of each excitation sector.
    sectors: Vec<Vec<usize>>,
    /// `H_k - (i/2) sum_c rate_c O_c†O_c` restricted to sector `k`.
    heff: Vec<Csr>,
    /// `H` restricted to sector `k`.
    ham: Vec<Csr>,
    /// For each sector `k >= 1` and channel: `(O_c: k -> k-1, rate_c)`.
    jumps: Vec<Vec<(Csr, f64)>>,
    blocks: Vec<Block>,
    len: usize,
}

impl LindbladGenerator {
    pub fn new(space: &SpaceDescriptor, params: &ModelParams, rho0: &QuantumState) -> Result<Self> {
        let kmax = space.max_excitation();
        let mut sectors = vec![Vec::new(); kmax + 1];
        for (i, s) in space.basis().iter().enumerate() {
            sectors[s.excitation()].push(i);
        }
        let h = dimer_hamiltonian(space, params);
        let jump_ops: Vec<(SparseOperator, f64)> =
            jump_operators(space, params).into_iter().filter(|(_, r)| *r > 0.0).collect();
        let mut decay = SparseOperator::zeros(space.dim());
        for (op, rate) in &jump_ops {
            decay = &decay + &(&op.adjoint() * op).scale(*rate);
        }
        let heff_full = &h - &decay.scale(C64::new(0.0, 0.5));
        let heff = sectors.iter().map(|s| heff_full.csr().restrict(s, s)).collect();
        let ham = sectors.iter().map(|s| h.csr().restrict(s, s)).collect();
        let jumps = (0..=kmax)
            .map(|k| {
                if k == 0 {
                    return Vec::new();
                }
                jump_ops.iter().map(|(op, rate)| (op.csr().restrict(&sectors[k - 1], &sectors[k]), *rate)).collect()
            })
            .collect();

        // offsets k - k' >= 0 present in the initial state
        let mut offsets = BTreeSet::new();
        match rho0 {
            QuantumState::Pure(psi) => {
                let occupied: Vec<usize> = (0..=kmax)
                    .filter(|&k| sectors[k].iter().any(|&i| psi[i] != ZERO))
                    .collect();
                for &a in &occupied {
                    for &b in &occupied {
                        if a >= b {
                            offsets.insert(a - b);
                        }
                    }
                }
            }
            QuantumState::Mixed(rho) => {
                for a in 0..=kmax {
                    for b in 0..=a {
                        if sectors[a].iter().any(|&i| sectors[b].iter().any(|&j| rho[(i, j)] != ZERO)) {
                            offsets.insert(a - b);
                        }
                    }
                }
            }
        }
        let mut blocks = Vec::new();
        let mut index = HashMap::new();
        let mut len = 0;
        for &d in &offsets {
            for col in 0..=kmax - d {
                let row = col + d;
                let key = BlockKey { row, col };
                index.insert(key, blocks.len());
                blocks.push(Block { key, offset: len, source: None });
                len += sectors[row].len() * sectors[col].len();
            }
        }
        for b in blocks.iter_mut() {
            b.source = index.get(&BlockKey { row: b.key.row + 1, col: b.key.col + 1 }).copied();
        }
        Ok(Self { sectors, heff, ham, jumps, blocks, len })
    }

    /// Number of stored complex entries.
    pub fn state_len(&self) -> usize {
        self.len
    }

    fn shape(&self, key: BlockKey) -> (usize, usize) {
        (self.sectors[key.row].len(), self.sectors[key.col].len())
    }

    fn slice<'a>(&self, y: &'a [C64], b: &Block) -> &'a [C64] {
        let (r, c) = self.shape(b.key);
        &y[b.offset..b.offset + r * c]
    }

    /// Pack a state into block storage.
    pub fn pack(&self, state: &QuantumState) -> Vec<C64> {
        let mut y = vec![ZERO; self.len];
        for b in &self.blocks {
            let (rows, cols) = (&self.sectors[b.key.row], &self.sectors[b.key.col]);
            let dst = &mut y[b.offset..b.offset + rows.len() * cols.len()];
            for (i, &gi) in rows.iter().enumerate() {
                for (j, &gj) in cols.iter().enumerate() {
                    dst[i * cols.len() + j] = match state {
                        QuantumState::Pure(psi) => psi[gi] * psi[gj].conj(),
                        QuantumState::Mixed(rho) => rho[(gi, gj)],
                    };
                }
            }
        }
        y
    }

    /// Reassemble the full density matrix (blocks with `k < k'` by adjoint).
    pub fn unpack(&self, y: &[C64], dim: usize) -> DMatrix<C64> {
        let mut rho = DMatrix::zeros(dim, dim);
        for b in &self.blocks {
            let (rows, cols) = (&self.sectors[b.key.row], &self.sectors[b.key.col]);
            let src = self.slice(y, b);
            for (i, &gi) in rows.iter().enumerate() {
                for (j, &gj) in cols.iter().enumerate() {
                    let v = src[i * cols.len() + j];
                    rho[(gi, gj)] = v;
                    if b.key.row != b.key.col {
                        rho[(gj, gi)] = v.conj();
                    }
                }
            }
        }
        rho
    }

    fn diagonal_blocks<'a>(&'a self, y: &'a [C64]) -> impl Iterator<Item = (BlockKey, &'a [C64])> + 'a {
        self.blocks.iter().filter(|b| b.key.row == b.key.col).map(move |b| (b.key, self.slice(y, b)))
    }

    /// `dy = L(y)` block by block.
    pub fn apply(&self, y: &[C64], dy: &mut [C64]) {
        for b in &self.blocks {
            let (r, c) = self.shape(b.key);
            let rho = self.slice(y, b);
            let out = &mut dy[b.offset..b.offset + r * c];
            out.iter_mut().for_each(|v| *v = ZERO);
            let diagonal = b.key.row == b.key.col;
            // -i Heff_k rho
            self.heff[b.key.row].mul_dense_rowmajor_acc(-I, rho, c, out);
            if diagonal {
                // A + A† keeps the diagonal blocks exactly Hermitian
                hermitian_part_in_place(out, r, 2.0);
            } else {
                // + i rho Heff_{k'}†
                dense_times_adjoint_acc(I, rho, r, c, &self.heff[b.key.col], out);
            }
            if let Some(src) = b.source {
                let sb = &self.blocks[src];
                let (sr, sc) = self.shape(sb.key);
                let src_rho = self.slice(y, sb);
                let mut tmp = vec![ZERO; r * sc];
                let mut sandwich = vec![ZERO; r * c];
                for ((o_row, rate), (o_col, _)) in self.jumps[sb.key.row].iter().zip(&self.jumps[sb.key.col]) {
                    tmp.iter_mut().for_each(|v| *v = ZERO);
                    o_row.mul_dense_rowmajor_acc(C64::new(*rate, 0.0), src_rho, sc, &mut tmp);
                    debug_assert_eq!(o_row.ncols(), sr);
                    dense_times_adjoint_acc(C64::new(1.0, 0.0), &tmp, r, sc, o_col, &mut sandwich);
                }
                if diagonal {
                    hermitian_part_in_place(&mut sandwich, r, 1.0);
                }
                out.iter_mut().zip(&sandwich).for_each(|(o, s)| *o += s);
            }
        }
    }

    fn hermiticity_and_energy(&self, y: &[C64]) -> (f64, f64) {
        let mut herm = 0.0f64;
        let mut energy = 0.0;
        for (key, rho) in self.diagonal_blocks(y) {
            let d = self.sectors[key.row].len();
            for i in 0..d {
                for j in i..d {
                    herm = herm.max((rho[i * d + j] - rho[j * d + i].conj()).norm());
                }
            }
            for (i, j, v) in self.ham[key.row].triplets() {
                energy += (v * rho[j * d + i]).re;
            }
        }
        (herm, energy)
    }

    fn min_eigenvalue(&self, y: &[C64]) -> f64 {
        let block_diagonal = self.blocks.iter().all(|b| b.key.row == b.key.col);
        if block_diagonal {
            self.diagonal_blocks(y)
                .map(|(key, rho)| {
                    let d = self.sectors[key.row].len();
                    min_eigenvalue(&DMatrix::from_row_slice(d, d, rho))
                })
                .fold(f64::INFINITY, f64::min)
        } else {
            let dim = self.sectors.iter().map(Vec::len).sum();
            min_eigenvalue(&self.unpack(y, dim))
        }
    }
}

/// `out += alpha * m * s†` with `m` row-major `rows x cols` and `s` a CSR
/// matrix with `cols` columns; `out` is `rows x s.nrows()`.
fn dense_times_adjoint_acc(alpha: C64, m: &[C64], rows: usize, cols: usize, s: &Csr, out: &mut [C64]) {
    let width = s.nrows();
    debug_assert_eq!(s.ncols(), cols);
    for i in 0..rows {
        let mrow = &m[i * cols..(i + 1) * cols];
        let orow = &mut out[i * width..(i + 1) * width];
        for (j, o) in orow.iter_mut().enumerate() {
            let (sc, sv) = s.row(j);
            let mut acc = ZERO;
            for (&c, v) in sc.iter().zip(sv) {
                acc += mrow[c] * v.conj();
            }
            *o += alpha * acc;
        }
    }
}

/// `m <- scale * (m + m†) / 2` for a square row-major block.
fn hermitian_part_in_place(m: &mut [C64], d: usize, scale: f64) {
    let half = 0.5 * scale;
    for i in 0..d {
        m[i * d + i] = C64::new(m[i * d + i].re * scale, 0.0);
        for j in i + 1..d {
            let v = (m[i * d + j] + m[j * d + i].conj()) * half;
            m[i * d + j] = v;
            m[j * d + i] = v.conj();
        }
    }
}
