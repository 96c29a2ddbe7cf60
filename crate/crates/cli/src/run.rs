//! Mode dispatch and output files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use jcdsim_core::analysis::{
    fit_splitting_scaling, gc_formula, sweep_transition_curve, tunnel_splitting_exact, Period, SplittingResult, SweepConfig,
    TransitionCurve, Window,
};
use jcdsim_core::dynamics::{evolve_density, evolve_pure, Trajectory};
use jcdsim_core::hilbert::{build_space, coherent_product_state, fock_product_state};
use jcdsim_core::integrator::{uniform_grid, IntegratorConfig};
use jcdsim_core::model::{dimer_hamiltonian, jc_eigensystem, ModelParams};
use jcdsim_core::semiclassical::{evolve_meanfield, MeanFieldState, MeanFieldSystem};
use jcdsim_core::C64;

use crate::config::{InitialState, Mode, RunConfig, SemiclassicalSystem};
use crate::error::{CliError, CliResult};

pub const TRAJECTORY_HEADER: &str = "t,n_L,n_R,N_total,z,z_rescaled,sz_L,sz_R,trace_err,depleted_flag";
pub const SWEEP_HEADER: &str = "g,g_over_gc,z_avg,period,diverged_flag";
pub const SPLITTING_HEADER: &str = "N,J,g,delta,period,c_N,fit_exponent";
pub const SPECTRUM_HEADER: &str = "M,sigma,energy,amp_g,amp_e";

/// Everything a mode produces besides timing.
pub struct ModeOutput {
    pub csv: String,
    pub diagnostics: toml::Table,
}

/// Paths written by a successful run.
#[derive(Debug)]
pub struct RunFiles {
    pub csv: PathBuf,
    pub metadata: PathBuf,
}

fn integrator_config(cfg: &RunConfig, params: &ModelParams) -> IntegratorConfig {
    let j = params.j;
    let step = match cfg.integrator.max_step {
        Some(s) => s / j,
        None => IntegratorConfig::default_max_step(params.g, cfg.n_max, j, params.kappa, params.gamma, params.detuning()),
    };
    let mut icfg = IntegratorConfig::new(uniform_grid(cfg.t_max / j, cfg.sample_count), step)
        .with_method(cfg.integrator.method)
        .with_tolerances(cfg.integrator.rel_tol, cfg.integrator.abs_tol);
    icfg.max_steps = cfg.integrator.max_steps;
    icfg
}

fn trajectory_csv(traj: &Trajectory, j: f64) -> String {
    let mut out = String::with_capacity(traj.len() * 160);
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for ((t, r), d) in traj.times.iter().zip(&traj.records).zip(&traj.diagnostics) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            t * j,
            r.n_l,
            r.n_r,
            r.n_total,
            r.z,
            r.z_rescaled,
            r.sz_l,
            r.sz_r,
            d.trace_err,
            u8::from(r.depleted)
        );
    }
    out
}

fn trajectory_diagnostics(traj: &Trajectory) -> toml::Table {
    let mut t = toml::Table::new();
    t.insert("accepted_steps".into(), (traj.stats.accepted as i64).into());
    t.insert("rejected_steps".into(), (traj.stats.rejected as i64).into());
    t.insert("rhs_evaluations".into(), (traj.stats.rhs_evals as i64).into());
    t.insert("max_trace_err".into(), traj.max_trace_err().into());
    if let Some(e) = traj.min_eigenvalue() {
        t.insert("min_eigenvalue".into(), e.into());
        t.insert("negative_eigenvalue_flag".into(), traj.any_negative_flag().into());
    }
    let herm = traj.diagnostics.iter().map(|d| d.hermiticity_err).fold(0.0, f64::max);
    t.insert("max_hermiticity_err".into(), herm.into());
    if let (Some(first), Some(last)) = (traj.diagnostics.first(), traj.diagnostics.last()) {
        t.insert("energy_initial".into(), first.energy.into());
        t.insert("energy_final".into(), last.energy.into());
    }
    t
}

fn run_trajectory(cfg: &RunConfig) -> CliResult<ModeOutput> {
    let p = cfg.params;
    let icfg = integrator_config(cfg, &p);
    let traj = match cfg.mode {
        Mode::Semiclassical => {
            let s0 = MeanFieldState::left_loaded(C64::new((cfg.n0 as f64).sqrt(), 0.0));
            let system = match cfg.system {
                SemiclassicalSystem::Full => MeanFieldSystem::Full,
                SemiclassicalSystem::Reduced => MeanFieldSystem::Reduced,
            };
            evolve_meanfield(&s0, &p, &icfg, system)?
        }
        Mode::QuantumPure | Mode::QuantumLindblad => {
            let space = build_space(cfg.n_max, cfg.excitation_cap)?;
            let psi0 = match cfg.initial_state {
                InitialState::Fock => fock_product_state(&space, cfg.n0, 0, false, false)?,
                InitialState::Coherent => {
                    coherent_product_state(&space, C64::new((cfg.n0 as f64).sqrt(), 0.0), C64::new(0.0, 0.0))?
                }
            };
            log::info!("Hilbert space dimension {}", space.dim());
            if cfg.mode == Mode::QuantumPure {
                evolve_pure(&space, &dimer_hamiltonian(&space, &p), &psi0, &icfg)?
            } else {
                evolve_density(&space, &p, &psi0, &icfg)?
            }
        }
        _ => unreachable!("not a trajectory mode"),
    };
    Ok(ModeOutput { csv: trajectory_csv(&traj, p.j), diagnostics: trajectory_diagnostics(&traj) })
}

fn sweep_csv(curve: &TransitionCurve, j: f64) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for p in &curve.points {
        let (period, diverged) = match p.period {
            Period::Finite(t) => ((t * j).to_string(), 0),
            Period::Diverged => (String::new(), 1),
        };
        let _ = writeln!(out, "{},{},{},{},{}", p.g, p.g_over_gc, p.z_avg, period, diverged);
    }
    out
}

fn run_sweep(cfg: &RunConfig) -> CliResult<ModeOutput> {
    let s = cfg.sweep.as_ref().expect("sweep settings resolved");
    let p = cfg.params;
    let j = p.j;
    let mut sc = SweepConfig::new(cfg.n0, j, s.mode);
    sc.kappa = p.kappa;
    sc.gamma = p.gamma;
    sc.window = Window::new(s.window[0] / j, s.window[1] / j);
    sc.samples_per_unit = (cfg.sample_count - 1) as f64 / cfg.t_max;
    sc.rel_tol = cfg.integrator.rel_tol;
    sc.abs_tol = cfg.integrator.abs_tol;
    sc.max_step = cfg.integrator.max_step.map(|m| m / j);
    sc.method = cfg.integrator.method;
    let curve = sweep_transition_curve(&s.g_list, &sc);
    let mut diagnostics = toml::Table::new();
    diagnostics.insert("g_c_formula".into(), gc_formula(cfg.n0 as f64, j).into());
    let failures: Vec<toml::Value> = curve
        .points
        .iter()
        .filter_map(|pt| pt.error.as_ref().map(|e| format!("g = {}: {e}", pt.g).into()))
        .collect();
    diagnostics.insert("failed_points".into(), failures.into());
    if let Some(x) = curve.crossing(0.5) {
        diagnostics.insert("half_crossing_g_over_gc".into(), x.into());
    }
    Ok(ModeOutput { csv: sweep_csv(&curve, j), diagnostics })
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

fn run_splitting(cfg: &RunConfig) -> CliResult<ModeOutput> {
    let s = cfg.splitting.as_ref().expect("splitting settings resolved");
    let p = cfg.params;
    let mut out = String::from(SPLITTING_HEADER);
    out.push('\n');
    let mut warnings = Vec::new();
    for &n in &s.n_list {
        let exact = tunnel_splitting_exact(n, &p)?;
        let fit = if s.j_list.is_empty() { None } else { Some(fit_splitting_scaling(n, p.g, &s.j_list)?) };
        if let Some(w) = fit.as_ref().and_then(|f| f.warning.clone()) {
            warnings.push(toml::Value::from(format!("N = {n}: {w}")));
        }
        let row = SplittingResult {
            c_n: fit.as_ref().and_then(|f| f.c_n),
            fit_exponent: fit.as_ref().and_then(|f| f.fit_exponent),
            ..exact
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.n,
            row.j,
            row.g,
            row.delta,
            row.period,
            opt(row.c_n),
            opt(row.fit_exponent)
        );
    }
    let mut diagnostics = toml::Table::new();
    diagnostics.insert("fit_warnings".into(), warnings.into());
    Ok(ModeOutput { csv: out, diagnostics })
}

fn run_spectrum(cfg: &RunConfig) -> CliResult<ModeOutput> {
    let mut out = String::from(SPECTRUM_HEADER);
    out.push('\n');
    let mut rows = 0i64;
    for m in 0..=cfg.spectrum_m_max {
        for level in jc_eigensystem(m, &cfg.params) {
            let _ = writeln!(out, "{},{},{},{},{}", m, level.branch.symbol(), level.energy, level.amp_g, level.amp_e);
            rows += 1;
        }
    }
    let mut diagnostics = toml::Table::new();
    diagnostics.insert("levels".into(), rows.into());
    Ok(ModeOutput { csv: out, diagnostics })
}

/// Run the configured mode without touching the file system.
pub fn execute(cfg: &RunConfig) -> CliResult<ModeOutput> {
    cfg.params.validate()?;
    match cfg.mode {
        Mode::Semiclassical | Mode::QuantumPure | Mode::QuantumLindblad => run_trajectory(cfg),
        Mode::Sweep => run_sweep(cfg),
        Mode::Splitting => run_splitting(cfg),
        Mode::Spectrum => run_spectrum(cfg),
    }
}

fn metadata_table(cfg: &RunConfig, wall: f64, diagnostics: toml::Table) -> toml::Table {
    let p = &cfg.params;
    let mut meta = toml::Table::new();
    meta.insert("code_version".into(), env!("CARGO_PKG_VERSION").into());
    meta.insert("wall_time_s".into(), wall.into());
    meta.insert("time_unit".into(), "1/J (the CSV t column is J t)".into());
    if cfg.n0 > 0 {
        meta.insert("g_c_formula".into(), gc_formula(cfg.n0 as f64, p.j).into());
        meta.insert("g_over_gc".into(), (p.g / gc_formula(cfg.n0 as f64, p.j)).into());
    }
    meta.insert("diagnostics".into(), diagnostics.into());
    if let Some(mhz) = cfg.unit_j_mhz {
        let mut abs = toml::Table::new();
        for (k, v) in [("J_MHz", p.j), ("g_MHz", p.g), ("kappa_MHz", p.kappa), ("gamma_MHz", p.gamma)] {
            abs.insert(k.into(), (v / p.j * mhz).into());
        }
        abs.insert("t_max_us".into(), (cfg.t_max / mhz).into());
        meta.insert("absolute_units".into(), abs.into());
    }
    meta
}

fn write(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// Run a parsed configuration and write `<stem>.csv` and `<stem>.meta.toml`
/// into `dir`. On a solver failure `<stem>.diagnostics.txt` is written and
/// the error returned.
pub fn run_to_dir(cfg: &RunConfig, dir: &Path, stem: &str) -> CliResult<RunFiles> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let start = Instant::now();
    let output = match execute(cfg) {
        Ok(o) => o,
        Err(e) => {
            let path = dir.join(format!("{stem}.diagnostics.txt"));
            let mut text = format!("error: {e}\nelapsed_s = {}\n\n# resolved configuration\n", start.elapsed().as_secs_f64());
            text.push_str(&cfg.to_toml().unwrap_or_default());
            write(&path, &text)?;
            return Err(e);
        }
    };
    let wall = start.elapsed().as_secs_f64();
    let csv = dir.join(format!("{stem}.csv"));
    write(&csv, &output.csv)?;
    let mut sidecar = cfg.to_toml()?;
    let mut wrapper = toml::Table::new();
    wrapper.insert("metadata".into(), metadata_table(cfg, wall, output.diagnostics).into());
    sidecar.push('\n');
    sidecar.push_str(&toml::to_string(&wrapper)?);
    let metadata = dir.join(format!("{stem}.meta.toml"));
    write(&metadata, &sidecar)?;
    Ok(RunFiles { csv, metadata })
}
