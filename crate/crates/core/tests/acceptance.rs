//! Acceptance checks. Prints one PASS/FAIL line per criterion. Failures are
//! reported, not fatal, unless `ACCEPTANCE_STRICT=1` is set.

use std::f64::consts::PI;
use std::time::Instant;

use jcdsim_core::analysis::{
    estimate_critical_coupling, first_crossing_time, fit_splitting_scaling, gc_formula, oscillation_frequency,
    oscillation_period, reduced_trajectory, rescaled_imbalance_series, sweep_transition_curve,
    analytic_longtime_imbalance, rabi_frequency, tunnel_splitting_exact, CriticalSearch, Period, SweepConfig,
    SweepMode,
};
use jcdsim_core::dynamics::{evolve_density, evolve_density_with, evolve_pure, DensityOptions, Trajectory};
use jcdsim_core::hilbert::{build_space, fock_product_state, SpaceDescriptor};
use jcdsim_core::integrator::{uniform_grid, IntegratorConfig};
use jcdsim_core::model::{dimer_hamiltonian, jump_operators, liouvillian_apply, ModelParams};
use jcdsim_core::semiclassical::{evolve_meanfield, MeanFieldState, MeanFieldSystem, ReducedState};
use jcdsim_core::state::QuantumState;
use jcdsim_core::{Result, C64};
use nalgebra::DMatrix;

struct Outcome {
    id: usize,
    title: &'static str,
    pass: bool,
    detail: String,
}

/// Trace and positivity diagnostics of every density-matrix run.
#[derive(Default)]
struct DensityLog {
    runs: Vec<(String, f64, Option<f64>)>,
}

impl DensityLog {
    fn record(&mut self, label: &str, tr: &Trajectory) {
        self.runs.push((label.to_string(), tr.max_trace_err(), tr.min_eigenvalue()));
    }
}

fn max_dev(a: impl IntoIterator<Item = f64>) -> f64 {
    a.into_iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn fock_n20() -> (SpaceDescriptor, QuantumState) {
    let space = build_space(20, Some(20)).unwrap();
    let psi = fock_product_state(&space, 20, 0, false, false).unwrap();
    (space, psi)
}

fn criterion_1(log: &mut DensityLog) -> Result<Outcome> {
    let p = ModelParams::resonant(0.0, 1.0);
    let (space, psi) = fock_n20();
    let step = IntegratorConfig::default_max_step(0.0, 20, 1.0, 0.0, 0.0, 0.0);
    let cfg = IntegratorConfig::new(uniform_grid(10.0, 1001), step).with_tolerances(1e-10, 1e-13);
    let err = |tr: &Trajectory| max_dev(tr.times.iter().zip(&tr.records).map(|(t, r)| r.z - (2.0 * t).cos()));
    let pure = evolve_pure(&space, &dimer_hamiltonian(&space, &p), &psi, &cfg)?;
    let mixed = evolve_density(&space, &p, &psi, &cfg)?;
    log.record("criterion 1 lindblad", &mixed);
    let s0 = ReducedState::left_loaded(20.0).to_full();
    let full = evolve_meanfield(&s0, &p, &cfg, MeanFieldSystem::Full)?;
    let red = evolve_meanfield(&s0, &p, &cfg, MeanFieldSystem::Reduced)?;
    let errs = [err(&pure), err(&mixed), err(&full), err(&red)];
    Ok(Outcome {
        id: 1,
        title: "linear-limit exactness",
        pass: errs.iter().all(|e| *e < 1e-5),
        detail: format!(
            "max |z - cos 2Jt|: pure {:.1e}, lindblad {:.1e}, mean-field full {:.1e}, reduced {:.1e} (limit 1e-5)",
            errs[0], errs[1], errs[2], errs[3]
        ),
    })
}

fn criterion_2() -> Result<(Outcome, f64)> {
    let search = CriticalSearch::default();
    let g5 = estimate_critical_coupling(5.0, 1.0, &search)?;
    let g20 = estimate_critical_coupling(20.0, 1.0, &search)?;
    let g80 = estimate_critical_coupling(80.0, 1.0, &search)?;
    let g20_j2 = estimate_critical_coupling(20.0, 2.0, &search)?;
    let formula = gc_formula(20.0, 1.0);
    let rel = g20 / formula - 1.0;
    let r1 = g20 / g5;
    let r2 = g80 / g20;
    let rj = g20_j2 / g20;
    let pass = rel.abs() < 0.05 && (r1 / 2.0 - 1.0).abs() < 0.02 && (r2 / 2.0 - 1.0).abs() < 0.02 && (rj / 2.0 - 1.0).abs() < 0.02;
    let detail = format!(
        "g_c(5) = {g5:.4}, g_c(20) = {g20:.4} ({:+.2}% vs 2.8 sqrt(20) = {formula:.4}), g_c(80) = {g80:.4}; \
         g_c(20)/g_c(5) = {r1:.4}, g_c(80)/g_c(20) = {r2:.4} (target 2 +- 2%), g_c(J=2)/g_c(J=1) = {rj:.5}",
        100.0 * rel
    );
    Ok((Outcome { id: 2, title: "semiclassical critical point", pass, detail }, g20))
}

fn criterion_3(gc_numeric: f64) -> Result<Outcome> {
    let period = |frac: f64| -> Result<Period> {
        let p = ModelParams::resonant(frac * gc_numeric, 1.0);
        let tr = reduced_trajectory(20.0, &p, 200.0, 0.005, (1e-10, 1e-12))?;
        Ok(oscillation_period(&tr.z(), &tr.times))
    };
    let grid: Vec<f64> = (0..10).map(|i| 0.1 + 0.89 * i as f64 / 9.0).collect();
    let periods = grid.iter().map(|&f| period(f)).collect::<Result<Vec<_>>>()?;
    let half = period(0.5)?;
    let values: Vec<Option<f64>> = periods.iter().map(|p| p.value()).collect();
    let monotone = values.iter().all(Option::is_some) && values.windows(2).all(|w| w[1] > w[0]);
    let slowing = match (values[9], half.value()) {
        (Some(a), Some(b)) => a > 3.0 * b,
        _ => false,
    };
    let shown: Vec<String> = grid
        .iter()
        .zip(&values)
        .map(|(f, v)| format!("{f:.3}:{}", v.map_or("diverged".into(), |v| format!("{v:.3}"))))
        .collect();
    Ok(Outcome {
        id: 3,
        title: "critical slowing down",
        pass: monotone && slowing,
        detail: format!(
            "g_c = {gc_numeric:.4} (estimated); period(0.5 g_c) = {:.3}, periods [g/g_c:T] {}",
            half.value().unwrap_or(f64::NAN),
            shown.join(" ")
        ),
    })
}

fn criterion_4() -> Outcome {
    let fractions = [0.1, 0.4, 0.6, 0.8, 0.9, 2.0];
    let gc = gc_formula(20.0, 1.0);
    let g_list: Vec<f64> = fractions.iter().map(|f| f * gc).collect();
    let mut q = SweepConfig::new(20, 1.0, SweepMode::Quantum);
    q.rel_tol = 1e-10;
    q.abs_tol = 1e-12;
    q.max_step = Some(0.1);
    let mut s = q.clone();
    s.mode = SweepMode::Semiclassical;
    let quantum = sweep_transition_curve(&g_list, &q);
    let semi = sweep_transition_curve(&g_list, &s);
    let failures: Vec<String> =
        quantum.points.iter().chain(&semi.points).filter_map(|p| p.error.clone()).collect();
    let zq = quantum.z_avg();
    let (cq, cs) = (quantum.crossing(0.5), semi.crossing(0.5));
    let pass = failures.is_empty()
        && zq[0] < 0.2
        && zq[5] > 0.8
        && matches!((cq, cs), (Some(a), Some(b)) if a < b);
    let fmt = |v: &[f64]| v.iter().map(|z| format!("{z:.3}")).collect::<Vec<_>>().join(", ");
    Outcome {
        id: 4,
        title: "quantum transition curve",
        pass,
        detail: format!(
            "g/g_c {:?}: quantum <z> [{}], mean-field <z> [{}]; 0.5-crossing quantum {:.3}, mean-field {:.3}{}",
            fractions,
            fmt(&zq),
            fmt(&semi.z_avg()),
            cq.unwrap_or(f64::NAN),
            cs.unwrap_or(f64::NAN),
            if failures.is_empty() { String::new() } else { format!("; failures: {failures:?}") }
        ),
    }
}

fn criterion_5(log: &mut DensityLog) -> Result<Outcome> {
    let g = 0.9 * gc_formula(20.0, 1.0);
    let (space, psi) = fock_n20();
    let cfg = IntegratorConfig::new(uniform_grid(100.0, 1001), 0.1).with_tolerances(1e-9, 1e-12);
    let lossless = ModelParams::resonant(g, 1.0);
    let lossy = lossless.with_losses(0.05, 0.05);
    let conservative = evolve_pure(&space, &dimer_hamiltonian(&space, &lossless), &psi, &cfg.clone().with_tolerances(1e-10, 1e-12))?;
    let dissipative = evolve_density(&space, &lossy, &psi, &cfg)?;
    log.record("criterion 5 lindblad", &dissipative);
    let hold = |tr: &Trajectory| first_crossing_time(&tr.z(), &tr.times, 0.5);
    let (hc, hd) = (hold(&conservative), hold(&dissipative));
    // None: z stayed above 0.5 over the whole window
    let pass = match (hd, hc) {
        (None, Some(_)) => true,
        (Some(d), Some(c)) => d > c,
        _ => false,
    };
    let show = |h: Option<f64>| h.map_or("> 100 (never in window)".to_string(), |t| format!("{t:.2}"));

    // mean-field comparison, reported only
    let s0 = MeanFieldState::left_loaded(C64::new(20f64.sqrt(), 0.0));
    let mf_cfg = IntegratorConfig::new(uniform_grid(100.0, 10_001), 0.01).with_tolerances(1e-10, 1e-12);
    let mf_c = evolve_meanfield(&s0, &lossless, &mf_cfg, MeanFieldSystem::Full)?;
    let mf_d = evolve_meanfield(&s0, &lossy, &mf_cfg, MeanFieldSystem::Full)?;
    Ok(Outcome {
        id: 5,
        title: "dissipation stabilizes trapping",
        pass,
        detail: format!(
            "quantum N=20 Fock, g=0.9 g_c: first z <= 0.5 at Jt = {} with losses vs {} without; \
             mean-field reference: {} with losses vs {} without",
            show(hd),
            show(hc),
            show(hold(&mf_d)),
            show(hold(&mf_c))
        ),
    })
}

fn criterion_6(log: &mut DensityLog) -> Result<Outcome> {
    let n = 5;
    let g = 3.0 * gc_formula(n as f64, 1.0);
    let p = ModelParams::resonant(g, 1.0);
    let omega_r = rabi_frequency(n as f64, g);
    let rabi_period = 2.0 * PI / omega_r;
    let space = build_space(n, Some(n))?;
    let psi = fock_product_state(&space, n, 0, false, false)?;
    let cfg = IntegratorConfig::new(uniform_grid(5.0 * rabi_period, 1001), rabi_period / 50.0).with_tolerances(1e-10, 1e-13);
    let tr = evolve_density_with(&space, &p, &psi, &cfg, DensityOptions { positivity_samples: usize::MAX })?;
    log.record("criterion 6 lindblad", &tr);
    let zt = rescaled_imbalance_series(&tr)?;
    let freq = oscillation_frequency(&tr.times, &zt).unwrap_or(f64::NAN);
    let (lo, hi) = zt.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &z| (a.min(z), b.max(z)));
    let amplitude = (hi - lo) * n as f64;
    let delta = tunnel_splitting_exact(n, &p)?.delta;
    let dev = max_dev(
        tr.times
            .iter()
            .zip(&zt)
            .filter(|(t, _)| **t <= rabi_period * (1.0 + 1e-12))
            .map(|(t, z)| z - analytic_longtime_imbalance(*t, n as f64, delta, omega_r)),
    );
    let freq_err = freq / omega_r - 1.0;
    let pass = freq_err.abs() < 0.05 && (amplitude - 1.0).abs() < 0.2 && (1.0 - hi) < 0.1 / n as f64 && dev < 0.05;
    Ok(Outcome {
        id: 6,
        title: "deep-trapped fast dynamics",
        pass,
        detail: format!(
            "N=5, g=3 g_c: z~ in [{lo:.4}, {hi:.4}] (peak-to-peak x N = {amplitude:.3}), frequency {freq:.3} vs \
             omega_R {omega_r:.3} ({:+.2}%), Delta = {delta:.3e}, max |z~ - analytic| over one Rabi period {dev:.2e}",
            100.0 * freq_err
        ),
    })
}

fn criterion_7() -> Result<Outcome> {
    let g = 1.0;
    let j_list: Vec<f64> = (0..5).map(|i| 1e-3 * 10f64.powf(i as f64 / 4.0)).collect();
    let mut pass = true;
    let mut parts = Vec::new();
    let mut deltas = Vec::new();
    for n in 2..=4 {
        let fit = fit_splitting_scaling(n, g, &j_list)?;
        let e = fit.fit_exponent.unwrap_or(f64::NAN);
        pass &= (e - n as f64).abs() < 0.1;
        parts.push(format!("N={n}: exponent {e:.4}, c_N {:.4}", fit.c_n.unwrap_or(f64::NAN)));
        deltas.push(
            j_list
                .iter()
                .map(|&j| tunnel_splitting_exact(n, &ModelParams::resonant(g, j)).map(|r| r.period))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    let mut min_ratio = f64::INFINITY;
    for w in deltas.windows(2) {
        for (a, b) in w[0].iter().zip(&w[1]) {
            min_ratio = min_ratio.min(b / a);
        }
    }
    pass &= min_ratio > 10.0;
    Ok(Outcome {
        id: 7,
        title: "splitting power law",
        pass,
        detail: format!("{}; smallest T(N+1)/T(N) over J/g in [1e-3, 1e-2]: {min_ratio:.3e}", parts.join("; ")),
    })
}

fn criterion_8(log: &mut DensityLog) -> Result<Outcome> {
    let (space, psi) = fock_n20();
    let kappa = 0.1;
    let cfg = IntegratorConfig::new(uniform_grid(10.0, 101), 0.01).with_tolerances(1e-10, 1e-13);
    let photons = evolve_density(&space, &ModelParams::resonant(0.0, 1.0).with_losses(kappa, 0.0), &psi, &cfg)?;
    log.record("criterion 8 photon decay", &photons);
    let photon_err = max_dev(photons.times.iter().zip(&photons.records).map(|(t, r)| r.n_total / 20.0 - (-kappa * t).exp()));
    let gamma = 0.1;
    let small = build_space(2, Some(2))?;
    let excited = fock_product_state(&small, 0, 0, true, false)?;
    let qubit = evolve_density(&small, &ModelParams::resonant(0.0, 1.0).with_losses(0.0, gamma), &excited, &cfg)?;
    log.record("criterion 8 qubit decay", &qubit);
    let qubit_err = max_dev(qubit.times.iter().zip(&qubit.records).map(|(t, r)| r.sz_l - (-0.5 + (-gamma * t).exp())));
    let trace = log.runs.iter().map(|r| r.1).fold(0.0, f64::max);
    let (worst, min_eig) = log
        .runs
        .iter()
        .filter_map(|r| r.2.map(|e| (r.0.as_str(), e)))
        .fold(("none", f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    let pass = photon_err < 1e-6 && qubit_err < 1e-6 && trace < 1e-8 && min_eig >= -1e-7;
    Ok(Outcome {
        id: 8,
        title: "channel sanity",
        pass,
        detail: format!(
            "N(t)/N(0) vs e^-kt {photon_err:.1e}, sz_L vs -1/2 + e^-gt {qubit_err:.1e}; over {} density runs: \
             max trace drift {trace:.1e}, min eigenvalue {min_eig:.2e} ({worst})",
            log.runs.len()
        ),
    })
}

/// Column-major superoperator of `i[rho, H] + sum rate (O rho O† - {O†O, rho}/2)`.
fn dense_superoperator(h: &DMatrix<C64>, jumps: &[(DMatrix<C64>, f64)]) -> DMatrix<C64> {
    let d = h.nrows();
    let id = DMatrix::<C64>::identity(d, d);
    let i = C64::new(0.0, 1.0);
    let mut l = (h.transpose().kronecker(&id) - id.kronecker(h)) * i;
    for (o, rate) in jumps {
        let odo = o.adjoint() * o;
        let r = C64::new(*rate, 0.0);
        l += (o.conjugate().kronecker(o) - (id.kronecker(&odo) + odo.transpose().kronecker(&id)) * C64::new(0.5, 0.0)) * r;
    }
    l
}

fn criterion_9() -> Result<Outcome> {
    let p = ModelParams { omega_x: 0.37, ..ModelParams::resonant(0.9, 1.3).with_losses(0.21, 0.08) };
    let mut worst: f64 = 0.0;
    let mut dims = Vec::new();
    for (n_max, cap) in [(1, None), (2, Some(2)), (3, Some(3)), (2, Some(3))] {
        let space = build_space(n_max, cap)?;
        let d = space.dim();
        dims.push(d);
        let h = dimer_hamiltonian(&space, &p);
        let jumps = jump_operators(&space, &p);
        let a = DMatrix::from_fn(d, d, |r, c| C64::new(((r * 31 + c * 17) as f64 * 0.37).sin(), ((r * 7 + c * 13) as f64 * 0.91).cos()));
        let rho = (&a + a.adjoint()) * C64::new(0.5, 0.0);
        let fast = liouvillian_apply(&rho, &h, &jumps)?;
        let dense_jumps: Vec<_> = jumps.iter().map(|(o, r)| (o.to_dense(), *r)).collect();
        let sup = dense_superoperator(&h.to_dense(), &dense_jumps);
        let vec_rho = DMatrix::from_column_slice(d * d, 1, rho.as_slice());
        let brute = sup * vec_rho;
        let brute = DMatrix::from_column_slice(d, d, brute.as_slice());
        worst = worst.max(max_dev((fast - brute).iter().map(|v| v.norm())));
    }
    let p0 = ModelParams::resonant(0.0, 1.0);
    let s0 = ReducedState::left_loaded(20.0).to_full();
    let cfg = IntegratorConfig::new(uniform_grid(10.0, 1001), 0.01);
    let full = evolve_meanfield(&s0, &p0, &cfg, MeanFieldSystem::Full)?;
    let red = evolve_meanfield(&s0, &p0, &cfg, MeanFieldSystem::Reduced)?;
    let dz = max_dev(full.records.iter().zip(&red.records).map(|(a, b)| a.z - b.z));
    Ok(Outcome {
        id: 9,
        title: "oracle equivalence",
        pass: worst < 1e-12 && dz < 1e-7,
        detail: format!("dims {dims:?}: max entrywise |L_fast - L_dense| {worst:.1e}; full vs reduced mean-field max |dz| {dz:.1e}"),
    })
}

fn failed(id: usize, title: &'static str, e: jcdsim_core::Error) -> Outcome {
    Outcome { id, title, pass: false, detail: format!("error: {e}") }
}

fn timed<T>(label: &str, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    eprintln!("[acceptance] {label} done in {:.1} s", start.elapsed().as_secs_f64());
    out
}

fn main() {
    let mut log = DensityLog::default();
    let mut outcomes = Vec::new();
    outcomes.push(timed("criterion 1", || criterion_1(&mut log)).unwrap_or_else(|e| failed(1, "linear-limit exactness", e)));
    let gc_numeric = match timed("criterion 2", criterion_2) {
        Ok((o, gc)) => {
            outcomes.push(o);
            gc
        }
        Err(e) => {
            outcomes.push(failed(2, "semiclassical critical point", e));
            gc_formula(20.0, 1.0)
        }
    };
    outcomes.push(timed("criterion 3", || criterion_3(gc_numeric)).unwrap_or_else(|e| failed(3, "critical slowing down", e)));
    outcomes.push(timed("criterion 4", criterion_4));
    outcomes.push(timed("criterion 5", || criterion_5(&mut log)).unwrap_or_else(|e| failed(5, "dissipation stabilizes trapping", e)));
    outcomes.push(timed("criterion 6", || criterion_6(&mut log)).unwrap_or_else(|e| failed(6, "deep-trapped fast dynamics", e)));
    outcomes.push(timed("criterion 7", criterion_7).unwrap_or_else(|e| failed(7, "splitting power law", e)));
    outcomes.push(timed("criterion 9", criterion_9).unwrap_or_else(|e| failed(9, "oracle equivalence", e)));
    outcomes.push(timed("criterion 8", || criterion_8(&mut log)).unwrap_or_else(|e| failed(8, "channel sanity", e)));
    outcomes.sort_by_key(|o| o.id);
    for o in &outcomes {
        println!("{} criterion {} ({}): {}", if o.pass { "PASS" } else { "FAIL" }, o.id, o.title, o.detail);
    }
    let failures = outcomes.iter().filter(|o| !o.pass).count();
    println!("acceptance: {} passed, {} failed", outcomes.len() - failures, failures);
    if failures > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
