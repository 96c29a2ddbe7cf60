//! Observables and transition analysis built on trajectories: imbalance
//! series, time averages, oscillation periods, the semiclassical critical
//! coupling, transition curves and the ultra-long tunnel splitting.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve_density, evolve_pure, Trajectory, DEFAULT_DEPLETION_FLOOR};
use crate::error::{Error, Result};
use crate::hilbert::{build_space, fock_product_state, BasisState};
use crate::integrator::{uniform_grid, IntegratorConfig, Method};
use crate::model::{dimer_hamiltonian, jc_eigensystem, Branch, ModelParams};
use crate::semiclassical::{evolve_meanfield, MeanFieldState, MeanFieldSystem, ReducedState};

/// Prefactor of the semiclassical estimate `g_c ≈ 2.8 sqrt(N) J`.
pub const GC_PREFACTOR: f64 = 2.8;
/// Residual (standard deviation of `log c_N` across the fit) above which a
/// splitting fit is flagged.
pub const FIT_RESIDUAL_WARN: f64 = 0.05;

/// `2.8 sqrt(N) J`.
pub fn gc_formula(n: f64, j: f64) -> f64 {
    GC_PREFACTOR * n.sqrt() * j
}

/// Single-site Rabi frequency `2 g sqrt(N)`.
pub fn rabi_frequency(n: f64, g: f64) -> f64 {
    2.0 * g * n.sqrt()
}

/// Strong-coupling approximation of the rescaled imbalance,
/// `cos(delta t) [1 - sin^2(omega_r t / 2) / N]`.
///
/// With `omega_r` the polariton splitting `2 g sqrt(N)` the fast factor is
/// the excited-qubit population `sin^2(g sqrt(N) t)` of the populated site.
pub fn analytic_longtime_imbalance(t: f64, n: f64, delta: f64, omega_r: f64) -> f64 {
    let s = (omega_r * t / 2.0).sin();
    (delta * t).cos() * (1.0 - s * s / n)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImbalancePoint {
    pub z: f64,
    pub depleted: bool,
}

/// `z = (n_L - n_R) / N(t)`; samples with `N(t) < floor` are reported as
/// zero and flagged.
pub fn imbalance_series(traj: &Trajectory, floor: f64) -> Vec<ImbalancePoint> {
    traj.records
        .iter()
        .map(|r| {
            let depleted = !(r.n_total >= floor && r.n_total > 0.0);
            let z = if depleted { 0.0 } else { (r.n_l - r.n_r) / r.n_total };
            ImbalancePoint { z, depleted }
        })
        .collect()
}

/// Floor used by [`imbalance_series`] when none is given: `1e-6 N(0)`.
pub fn default_floor(traj: &Trajectory) -> f64 {
    DEFAULT_DEPLETION_FLOOR * traj.initial_photons()
}

/// `(n_L - n_R) / N(0)`.
pub fn rescaled_imbalance_series(traj: &Trajectory) -> Result<Vec<f64>> {
    let n0 = traj.initial_photons();
    if !(n0 > 0.0) {
        return Err(Error::ZeroInitialPhotons);
    }
    Ok(traj.records.iter().map(|r| (r.n_l - r.n_r) / n0).collect())
}

/// Averaging interval `[start, end]` in absolute time units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    /// `[0, 100/J]`.
    pub fn default_for(j: f64) -> Self {
        Self { start: 0.0, end: 100.0 / j }
    }
}

/// Trapezoidal mean of the trajectory's `z` over `window`; the window ends
/// are linearly interpolated when they fall between samples.
pub fn time_averaged_imbalance(traj: &Trajectory, window: Window) -> Result<f64> {
    series_average(&traj.times, &traj.z(), window)
}

/// Trapezoidal mean of a sampled series over `window`.
pub fn series_average(times: &[f64], values: &[f64], window: Window) -> Result<f64> {
    let (first, last) = match (times.first(), times.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(Error::InvalidParameter("empty series".into())),
    };
    let slack = 1e-9 * (last - first).abs().max(1.0);
    if !(window.end > window.start) || window.start < first - slack || window.end > last + slack {
        return Err(Error::WindowOutOfRange { start: window.start, end: window.end, span_start: first, span_end: last });
    }
    let (a, b) = (window.start.max(first), window.end.min(last));
    let interp = |t: f64| {
        let i = times.partition_point(|&s| s <= t).clamp(1, times.len() - 1);
        let (t0, t1) = (times[i - 1], times[i]);
        if t1 == t0 {
            values[i]
        } else {
            values[i - 1] + (values[i] - values[i - 1]) * (t - t0) / (t1 - t0)
        }
    };
    let mut pts = vec![(a, interp(a))];
    pts.extend(times.iter().zip(values).filter(|(t, _)| **t > a && **t < b).map(|(t, v)| (*t, *v)));
    pts.push((b, interp(b)));
    let area: f64 = pts.windows(2).map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0).sum();
    Ok(area / (b - a))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Period {
    Finite(f64),
    /// No zero crossing inside the sampled window.
    Diverged,
}

impl Period {
    pub fn value(self) -> Option<f64> {
        match self {
            Period::Finite(p) => Some(p),
            Period::Diverged => None,
        }
    }
}

/// Four times the (linearly interpolated) time of the first zero crossing
/// of `z`, i.e. the full period of a symmetric oscillation starting at its
/// maximum.
pub fn oscillation_period(z: &[f64], times: &[f64]) -> Period {
    first_crossing_time(z, times, 0.0).map_or(Period::Diverged, |t| Period::Finite(4.0 * t))
}

/// Time at which `z` first falls to `level`, linearly interpolated.
pub fn first_crossing_time(z: &[f64], times: &[f64], level: f64) -> Option<f64> {
    if z.first().is_some_and(|&z0| z0 <= level) {
        return times.first().copied();
    }
    z.windows(2).zip(times.windows(2)).find_map(|(zw, tw)| {
        (zw[1] <= level).then(|| tw[0] + (tw[1] - tw[0]) * (zw[0] - level) / (zw[0] - zw[1]))
    })
}

/// Angular frequency of a sampled oscillation from the spacing of its
/// downward crossings of the sample mean.
pub fn oscillation_frequency(times: &[f64], values: &[f64]) -> Option<f64> {
    let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
    let crossings: Vec<f64> = values
        .windows(2)
        .zip(times.windows(2))
        .filter(|(v, _)| v[0] > mean && v[1] <= mean)
        .map(|(v, t)| t[0] + (t[1] - t[0]) * (v[0] - mean) / (v[0] - v[1]))
        .collect();
    if crossings.len() < 2 {
        return None;
    }
    let span = crossings[crossings.len() - 1] - crossings[0];
    Some(2.0 * std::f64::consts::PI * (crossings.len() - 1) as f64 / span)
}

/// Settings of the critical-coupling bisection. Times are in units of `1/J`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticalSearch {
    pub t_max: f64,
    /// Sample spacing at which zero crossings are detected.
    pub dt: f64,
    pub rel_width: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for CriticalSearch {
    fn default() -> Self {
        Self { t_max: 200.0, dt: 0.01, rel_width: 1e-3, rel_tol: 1e-9, abs_tol: 1e-12 }
    }
}

/// Reduced mean-field run from `Re psi_L = sqrt(N)` on `[0, t_max]`
/// (`t_max` in units of `1/J`).
pub fn reduced_trajectory(n: f64, params: &ModelParams, t_max: f64, dt: f64, tols: (f64, f64)) -> Result<Trajectory> {
    let t_end = t_max / params.j;
    let count = (t_max / dt).round() as usize + 1;
    let cfg = IntegratorConfig::new(uniform_grid(t_end, count), default_step(params, n)).with_tolerances(tols.0, tols.1);
    evolve_meanfield(&ReducedState::left_loaded(n).to_full(), params, &cfg, MeanFieldSystem::Reduced)
}

fn default_step(p: &ModelParams, n: f64) -> f64 {
    IntegratorConfig::default_max_step(p.g, n.ceil() as usize, p.j, p.kappa, p.gamma, p.detuning())
}

/// Bisection for the smallest coupling at which the reduced mean-field
/// imbalance no longer crosses zero within `t_max / J`.
pub fn estimate_critical_coupling(n: f64, j: f64, search: &CriticalSearch) -> Result<f64> {
    if !(n > 0.0 && j > 0.0) {
        return Err(Error::InvalidParameter("critical coupling needs N > 0 and J > 0".into()));
    }
    let crosses = |g: f64| -> Result<bool> {
        let p = ModelParams::resonant(g, j);
        let traj = reduced_trajectory(n, &p, search.t_max, search.dt, (search.rel_tol, search.abs_tol))?;
        Ok(traj.records.iter().any(|r| r.z <= 0.0))
    };
    let (mut lo, mut hi) = (0.0, 5.0 * n.sqrt() * j);
    let (at_lo, at_hi) = (crosses(lo)?, crosses(hi)?);
    if at_lo == at_hi {
        return Err(Error::BracketFailure { lo, hi, value: at_lo });
    }
    while hi - lo > search.rel_width * 0.5 * (hi + lo) {
        let mid = 0.5 * (lo + hi);
        if crosses(mid)? == at_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    Quantum,
    Semiclassical,
}

/// Shared settings of a transition sweep. Losses switch the quantum path
/// from state vectors to the master equation and the semiclassical path
/// from the reduced to the full system.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub n: usize,
    pub j: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub mode: SweepMode,
    pub window: Window,
    /// Samples per unit of `1/J`.
    pub samples_per_unit: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Step bound; the default `0.01 / max(...)` rule when `None`.
    pub max_step: Option<f64>,
    pub method: Method,
}

impl SweepConfig {
    pub fn new(n: usize, j: f64, mode: SweepMode) -> Self {
        Self {
            n,
            j,
            kappa: 0.0,
            gamma: 0.0,
            mode,
            window: Window::default_for(j),
            samples_per_unit: 10.0,
            rel_tol: crate::integrator::DEFAULT_REL_TOL,
            abs_tol: crate::integrator::DEFAULT_ABS_TOL,
            max_step: None,
            method: Method::Dopri45,
        }
    }

    pub fn params(&self, g: f64) -> ModelParams {
        ModelParams::resonant(g, self.j).with_losses(self.kappa, self.gamma)
    }

    pub fn integrator(&self, g: f64) -> IntegratorConfig {
        let p = self.params(g);
        let t_end = self.window.end;
        let count = (t_end * self.j * self.samples_per_unit).round().max(1.0) as usize + 1;
        let step = self.max_step.unwrap_or_else(|| default_step(&p, self.n as f64));
        IntegratorConfig::new(uniform_grid(t_end, count), step)
            .with_tolerances(self.rel_tol, self.abs_tol)
            .with_method(self.method)
    }
}

/// One trajectory of a sweep: Fock state `|N, g; 0, g>` in the quantum
/// mode, `psi_L = sqrt(N)` in the semiclassical mode.
pub fn simulate_point(g: f64, cfg: &SweepConfig) -> Result<Trajectory> {
    let p = cfg.params(g);
    let icfg = cfg.integrator(g);
    match cfg.mode {
        SweepMode::Quantum => {
            let space = build_space(cfg.n, Some(cfg.n))?;
            let psi0 = fock_product_state(&space, cfg.n, 0, false, false)?;
            if p.is_conservative() {
                evolve_pure(&space, &dimer_hamiltonian(&space, &p), &psi0, &icfg)
            } else {
                evolve_density(&space, &p, &psi0, &icfg)
            }
        }
        SweepMode::Semiclassical => {
            let n = cfg.n as f64;
            if p.is_conservative() {
                evolve_meanfield(&ReducedState::left_loaded(n).to_full(), &p, &icfg, MeanFieldSystem::Reduced)
            } else {
                let s0 = MeanFieldState::left_loaded(C64::new(n.sqrt(), 0.0));
                evolve_meanfield(&s0, &p, &icfg, MeanFieldSystem::Full)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub g: f64,
    pub g_over_gc: f64,
    /// `NaN` when the point failed.
    pub z_avg: f64,
    pub period: Period,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransitionCurve {
    pub mode: SweepMode,
    pub window: Window,
    pub points: Vec<SweepPoint>,
}

impl TransitionCurve {
    pub fn g_values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.g).collect()
    }

    pub fn z_avg(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.z_avg).collect()
    }

    /// `g/g_c` at which `<z>` first exceeds `level`, interpolated between
    /// grid points.
    pub fn crossing(&self, level: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self.points.iter().filter(|p| p.z_avg.is_finite()).map(|p| (p.g_over_gc, p.z_avg)).collect();
        if pts.first().is_some_and(|p| p.1 > level) {
            return Some(pts[0].0);
        }
        pts.windows(2)
            .find(|w| w[1].1 > level)
            .map(|w| w[0].0 + (w[1].0 - w[0].0) * (level - w[0].1) / (w[1].1 - w[0].1))
    }
}

/// Time-averaged imbalance for every coupling in `g_list` (absolute units).
/// Points run in parallel on the current rayon pool; a failing point is
/// recorded and does not stop the sweep.
pub fn sweep_transition_curve(g_list: &[f64], cfg: &SweepConfig) -> TransitionCurve {
    let gc = gc_formula(cfg.n as f64, cfg.j);
    let points = g_list
        .par_iter()
        .map(|&g| {
            let outcome = simulate_point(g, cfg).and_then(|traj| {
                let z_avg = time_averaged_imbalance(&traj, cfg.window)?;
                Ok((z_avg, oscillation_period(&traj.z(), &traj.times)))
            });
            match outcome {
                Ok((z_avg, period)) => SweepPoint { g, g_over_gc: g / gc, z_avg, period, error: None },
                Err(e) => {
                    log::warn!("sweep point g = {g} failed: {e}");
                    SweepPoint { g, g_over_gc: g / gc, z_avg: f64::NAN, period: Period::Diverged, error: Some(e.to_string()) }
                }
            }
        })
        .collect();
    TransitionCurve { mode: cfg.mode, window: cfg.window, points }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplittingResult {
    pub n: usize,
    pub j: f64,
    pub g: f64,
    pub delta: f64,
    /// `2 pi / delta`.
    pub period: f64,
    pub c_n: Option<f64>,
    pub fit_exponent: Option<f64>,
    pub fit_residual: Option<f64>,
    pub warning: Option<String>,
}

/// Hamiltonian restricted to the `N`-excitation sector together with the
/// sector basis.
pub fn excitation_sector(n: usize, params: &ModelParams) -> Result<(Vec<BasisState>, DMatrix<f64>)> {
    let space = build_space(n, Some(n))?;
    let h = dimer_hamiltonian(&space, params);
    let idx: Vec<usize> = (0..space.dim()).filter(|&i| space.state(i).excitation() == n).collect();
    let block = h.csr().restrict(&idx, &idx).to_dense().map(|v| v.re);
    Ok((idx.iter().map(|&i| space.state(i)).collect(), block))
}

/// Exact splitting of the left/right-localized lower-polariton pair
/// `|N->_L |0>_R`, `|0>_L |N->_R`.
pub fn tunnel_splitting_exact(n: usize, params: &ModelParams) -> Result<SplittingResult> {
    params.validate()?;
    if !params.is_conservative() {
        return Err(Error::InvalidParameter("tunnel splitting needs kappa = gamma = 0".into()));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("tunnel splitting needs N >= 1".into()));
    }
    let (basis, h) = excitation_sector(n, params)?;
    let lower = jc_eigensystem(n, params).into_iter().find(|l| l.branch == Branch::Minus).expect("rung has a lower branch");
    let amp = |s: &BasisState| {
        let left = match (s.n_l, s.q_l, s.n_r, s.q_r) {
            (m, false, 0, false) if m == n => lower.amp_g,
            (m, true, 0, false) if m + 1 == n => lower.amp_e,
            _ => 0.0,
        };
        let right = match (s.n_l, s.q_l, s.n_r, s.q_r) {
            (0, false, m, false) if m == n => lower.amp_g,
            (0, false, m, true) if m + 1 == n => lower.amp_e,
            _ => 0.0,
        };
        (left, right)
    };
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let sym = DVector::from_iterator(basis.len(), basis.iter().map(|s| (amp(s).0 + amp(s).1) * r));
    let anti = DVector::from_iterator(basis.len(), basis.iter().map(|s| (amp(s).0 - amp(s).1) * r));
    let eig = SymmetricEigen::new(h);
    let best = |target: &DVector<f64>| {
        (0..eig.eigenvalues.len())
            .map(|k| (k, eig.eigenvectors.column(k).dot(target).powi(2)))
            .fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a })
    };
    let (ks, os) = best(&sym);
    let (ka, oa) = best(&anti);
    let overlap = os.min(oa);
    if overlap < 0.5 || ks == ka {
        return Err(Error::NotLocalized { overlap });
    }
    let delta = (eig.eigenvalues[ks] - eig.eigenvalues[ka]).abs();
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter("tunnel splitting vanishes (J = 0?)".into()));
    }
    Ok(SplittingResult {
        n,
        j: params.j,
        g: params.g,
        delta,
        period: 2.0 * std::f64::consts::PI / delta,
        c_n: None,
        fit_exponent: None,
        fit_residual: None,
        warning: None,
    })
}

/// Fit `log Delta = log c_N + N log J - (N - 1) log g` over `j_list` at
/// fixed `g`. The free least-squares slope of `log Delta` against `log J`
/// is reported as `fit_exponent`; `c_N` comes from the fixed-exponent form.
/// The returned splitting and period belong to the largest `J`.
pub fn fit_splitting_scaling(n: usize, g: f64, j_list: &[f64]) -> Result<SplittingResult> {
    if j_list.len() < 2 {
        return Err(Error::InvalidParameter("splitting fit needs at least two J values".into()));
    }
    let (jmin, jmax) = j_list.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &j| (a.min(j), b.max(j)));
    if !(jmin > 0.0) || jmax / jmin < 10.0 * (1.0 - 1e-12) {
        return Err(Error::InvalidParameter("J values must be positive and span at least one decade".into()));
    }
    if jmax * (n as f64).sqrt() > 0.1 * g {
        return Err(Error::InvalidParameter(format!("J = {jmax} is not small against g/sqrt(N) = {}", g / (n as f64).sqrt())));
    }
    let results = j_list
        .iter()
        .map(|&j| tunnel_splitting_exact(n, &ModelParams::resonant(g, j)))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = j_list.iter().map(|j| j.ln()).collect();
    let ys: Vec<f64> = results.iter().map(|r| r.delta.ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let nf = n as f64;
    let log_c: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y - nf * x + (nf - 1.0) * g.ln()).collect();
    let mean_c = log_c.iter().sum::<f64>() / m;
    let residual = (log_c.iter().map(|c| (c - mean_c).powi(2)).sum::<f64>() / m).sqrt();
    let warning = (residual > FIT_RESIDUAL_WARN).then(|| {
        log::warn!("splitting fit for N = {n}: residual {residual:.3} beyond leading order");
        format!("beyond leading order (residual {residual:.3})")
    });
    let largest = results
        .into_iter()
        .max_by(|a, b| a.j.total_cmp(&b.j))
        .expect("at least two J values");
    Ok(SplittingResult {
        c_n: Some(mean_c.exp()),
        fit_exponent: Some(slope),
        fit_residual: Some(residual),
        warning,
        ..largest
    })
}
