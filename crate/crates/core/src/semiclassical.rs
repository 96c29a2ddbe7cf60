//! Factorized (mean-field) dynamics of the dimer.
//!
//! Mixed moments are factorized, `<a† sigma^-> ≈ <a†><sigma^->`, which
//! closes the Heisenberg-Langevin equations on the photon amplitudes
//! `psi_i = <a_i>`, the qubit coherences `s_i = <sigma_i^->` and the
//! inversions `m_i = <sigma_i^z>` (eigenvalues ±1/2):
//!
//! ```text
//! dpsi_i/dt = -i g s_i + i J psi_j - (kappa/2) psi_i
//! ds_i/dt   = -i delta s_i + 2 i g psi_i m_i - (gamma/2) s_i
//! dm_i/dt   = i g (psi_i* s_i - psi_i s_i*) - gamma (m_i + 1/2)
//! ```
//!
//! Without losses and starting from a real `psi_L`, empty right cavity and
//! ground-state qubits, the motion stays on the planar manifold
//! `Im psi_L = Re psi_R = 0`, `s_L = i sin(theta_L)/2`,
//! `s_R = -sin(theta_R)/2`, `m_i = -cos(theta_i)/2`, where it reduces to
//! four equations in `(theta_L, theta_R, Re psi_L, Im psi_R)`.

use num_complex::Complex64 as C64;

use crate::dynamics::{Diagnostics, ObservableRecord, Trajectory};
use crate::error::{Error, Result};
use crate::integrator::{integrate, IntegratorConfig};
use crate::model::ModelParams;

const PLANAR_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanFieldState {
    pub psi_l: C64,
    pub psi_r: C64,
    pub s_l: C64,
    pub s_r: C64,
    pub m_l: f64,
    pub m_r: f64,
}

impl MeanFieldState {
    /// Coherent amplitude `psi_l` in the left cavity, empty right cavity,
    /// both qubits in the ground state.
    pub fn left_loaded(psi_l: C64) -> Self {
        Self {
            psi_l,
            psi_r: C64::new(0.0, 0.0),
            s_l: C64::new(0.0, 0.0),
            s_r: C64::new(0.0, 0.0),
            m_l: -0.5,
            m_r: -0.5,
        }
    }

    pub fn vacuum() -> Self {
        Self::left_loaded(C64::new(0.0, 0.0))
    }

    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.psi_l.re, self.psi_l.im, self.psi_r.re, self.psi_r.im,
            self.s_l.re, self.s_l.im, self.s_r.re, self.s_r.im,
            self.m_l, self.m_r,
        ]
    }

    pub fn from_slice(y: &[f64]) -> Self {
        Self {
            psi_l: C64::new(y[0], y[1]),
            psi_r: C64::new(y[2], y[3]),
            s_l: C64::new(y[4], y[5]),
            s_r: C64::new(y[6], y[7]),
            m_l: y[8],
            m_r: y[9],
        }
    }

    /// Mean photon numbers `|psi_i|^2`.
    pub fn photons(&self) -> (f64, f64) {
        (self.psi_l.norm_sqr(), self.psi_r.norm_sqr())
    }

    /// Bloch-vector lengths `4|s_i|^2 + 4 m_i^2` (1 for pure qubit states).
    pub fn bloch_lengths(&self) -> (f64, f64) {
        (
            4.0 * self.s_l.norm_sqr() + 4.0 * self.m_l * self.m_l,
            4.0 * self.s_r.norm_sqr() + 4.0 * self.m_r * self.m_r,
        )
    }

    /// Mean-field energy in the rotating frame, conserved without losses.
    pub fn energy(&self, p: &ModelParams) -> f64 {
        let jc = |psi: C64, s: C64| 2.0 * p.g * (psi.conj() * s).re;
        jc(self.psi_l, self.s_l) + jc(self.psi_r, self.s_r)
            - 2.0 * p.j * (self.psi_l.conj() * self.psi_r).re
            + p.detuning() * (self.m_l + self.m_r + 1.0)
    }
}

/// Variables of the four-equation conservative system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReducedState {
    pub theta_l: f64,
    pub theta_r: f64,
    pub re_psi_l: f64,
    pub im_psi_r: f64,
}

impl ReducedState {
    /// `Re psi_L = sqrt(N)`, both qubits in the ground state.
    pub fn left_loaded(n: f64) -> Self {
        Self { theta_l: 0.0, theta_r: 0.0, re_psi_l: n.sqrt(), im_psi_r: 0.0 }
    }

    pub fn to_full(&self) -> MeanFieldState {
        MeanFieldState {
            psi_l: C64::new(self.re_psi_l, 0.0),
            psi_r: C64::new(0.0, self.im_psi_r),
            s_l: C64::new(0.0, self.theta_l.sin() / 2.0),
            s_r: C64::new(-self.theta_r.sin() / 2.0, 0.0),
            m_l: -self.theta_l.cos() / 2.0,
            m_r: -self.theta_r.cos() / 2.0,
        }
    }

    /// Inverse of [`ReducedState::to_full`]; fails off the planar manifold.
    pub fn from_full(s: &MeanFieldState) -> Result<Self> {
        let off_plane = [s.psi_l.im, s.psi_r.re, s.s_l.re, s.s_r.im]
            .into_iter()
            .fold(0.0f64, |a, v| a.max(v.abs()));
        let (bl, br) = s.bloch_lengths();
        if off_plane > PLANAR_TOL || (bl - 1.0).abs() > PLANAR_TOL || (br - 1.0).abs() > PLANAR_TOL {
            return Err(Error::InvalidState(
                "mean-field state is not on the planar manifold of the reduced system".into(),
            ));
        }
        Ok(Self {
            theta_l: (2.0 * s.s_l.im).atan2(-2.0 * s.m_l),
            theta_r: (-2.0 * s.s_r.re).atan2(-2.0 * s.m_r),
            re_psi_l: s.psi_l.re,
            im_psi_r: s.psi_r.im,
        })
    }

    fn to_array(self) -> [f64; 4] {
        [self.theta_l, self.theta_r, self.re_psi_l, self.im_psi_r]
    }

    fn from_array(y: &[f64]) -> Self {
        Self { theta_l: y[0], theta_r: y[1], re_psi_l: y[2], im_psi_r: y[3] }
    }
}

fn check_reduced(params: &ModelParams) -> Result<()> {
    if !params.is_conservative() {
        return Err(Error::ReducedNotConservative { kappa: params.kappa, gamma: params.gamma });
    }
    if params.detuning() != 0.0 {
        return Err(Error::InvalidParameter("reduced system requires zero detuning".into()));
    }
    Ok(())
}

/// Time derivative of the reduced system.
pub fn rhs_reduced(state: &ReducedState, params: &ModelParams) -> Result<ReducedState> {
    check_reduced(params)?;
    Ok(reduced_derivative(state, params))
}

fn reduced_derivative(s: &ReducedState, p: &ModelParams) -> ReducedState {
    ReducedState {
        theta_l: -2.0 * p.g * s.re_psi_l,
        theta_r: -2.0 * p.g * s.im_psi_r,
        re_psi_l: p.g * s.theta_l.sin() / 2.0 - p.j * s.im_psi_r,
        im_psi_r: p.g * s.theta_r.sin() / 2.0 + p.j * s.re_psi_l,
    }
}

/// Time derivative of the full factorized system.
pub fn rhs_full(s: &MeanFieldState, p: &ModelParams) -> MeanFieldState {
    let i = C64::new(0.0, 1.0);
    let delta = p.detuning();
    let photon = |psi: C64, coh: C64, other: C64| -i * p.g * coh + i * p.j * other - psi * (p.kappa / 2.0);
    let coherence = |psi: C64, coh: C64, m: f64| -i * delta * coh + i * 2.0 * p.g * m * psi - coh * (p.gamma / 2.0);
    // i g (psi* s - psi s*) = -2 g Im(psi* s)
    let inversion = |psi: C64, coh: C64, m: f64| -2.0 * p.g * (psi.conj() * coh).im - p.gamma * (m + 0.5);
    MeanFieldState {
        psi_l: photon(s.psi_l, s.s_l, s.psi_r),
        psi_r: photon(s.psi_r, s.s_r, s.psi_l),
        s_l: coherence(s.psi_l, s.s_l, s.m_l),
        s_r: coherence(s.psi_r, s.s_r, s.m_r),
        m_l: inversion(s.psi_l, s.s_l, s.m_l),
        m_r: inversion(s.psi_r, s.s_r, s.m_r),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeanFieldSystem {
    /// All ten real equations, any parameters.
    Full,
    /// The four-equation conservative reduction.
    Reduced,
}

/// Integrate the mean-field equations. Photon numbers are `|psi_i|^2` and
/// the inversions are `m_i`; `trace_err` carries the largest Bloch-length
/// deviation `|4|s_i|^2 + 4 m_i^2 - 1|`.
pub fn evolve_meanfield(
    state0: &MeanFieldState,
    params: &ModelParams,
    cfg: &IntegratorConfig,
    system: MeanFieldSystem,
) -> Result<Trajectory> {
    params.validate()?;
    let mut traj = Trajectory::default();
    let mut n0 = None;
    let mut record = |t: f64, s: &MeanFieldState| {
        let (n_l, n_r) = s.photons();
        let n0 = *n0.get_or_insert(n_l + n_r);
        let (bl, br) = s.bloch_lengths();
        let diag = Diagnostics {
            trace_err: (bl - 1.0).abs().max((br - 1.0).abs()),
            energy: s.energy(params),
            ..Diagnostics::default()
        };
        traj.push(t, ObservableRecord::new(n_l, n_r, s.m_l, s.m_r, n0), diag);
    };
    let stats = match system {
        MeanFieldSystem::Full => integrate(
            state0.to_vec(),
            cfg,
            |_, y, dy| dy.copy_from_slice(&rhs_full(&MeanFieldState::from_slice(y), params).to_vec()),
            |_, t, y| {
                record(t, &MeanFieldState::from_slice(y));
                Ok(())
            },
        )?,
        MeanFieldSystem::Reduced => {
            check_reduced(params)?;
            let r0 = ReducedState::from_full(state0)?;
            integrate(
                r0.to_array().to_vec(),
                cfg,
                |_, y, dy| dy.copy_from_slice(&reduced_derivative(&ReducedState::from_array(y), params).to_array()),
                |_, t, y| {
                    record(t, &ReducedState::from_array(y).to_full());
                    Ok(())
                },
            )?
        }
    };
    traj.stats = stats;
    Ok(traj)
}
