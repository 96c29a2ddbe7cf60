//! Explicit Runge-Kutta integration of `dy/dt = f(t, y)` on a sample grid.
//!
//! Two schemes are provided: the embedded Dormand-Prince 5(4) pair with
//! adaptive step control, and classical fixed-step RK4 for bitwise
//! reproducible output. Both land exactly on every requested sample time
//! and hand the state to an observer there; the integrator never stores the
//! trajectory itself.

use std::ops::{AddAssign, Mul};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Component type of an ODE state vector.
pub trait OdeScalar: Copy + Default + AddAssign + Mul<f64, Output = Self> + Send + Sync {
    fn modulus(self) -> f64;
    fn is_finite(self) -> bool;
}

impl OdeScalar for f64 {
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

impl OdeScalar for C64 {
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn is_finite(self) -> bool {
        C64::is_finite(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Adaptive Dormand-Prince 5(4).
    Dopri45,
    /// Classical RK4 with steps no longer than `max_step`.
    Rk4,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub method: Method,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on the step; also the step length for [`Method::Rk4`].
    pub max_step: f64,
    pub max_steps: usize,
    pub sample_times: Vec<f64>,
}

pub const DEFAULT_REL_TOL: f64 = 1e-8;
pub const DEFAULT_ABS_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_STEPS: usize = 50_000_000;

impl IntegratorConfig {
    pub fn new(sample_times: Vec<f64>, max_step: f64) -> Self {
        Self {
            method: Method::Dopri45,
            rel_tol: DEFAULT_REL_TOL,
            abs_tol: DEFAULT_ABS_TOL,
            max_step,
            max_steps: DEFAULT_MAX_STEPS,
            sample_times,
        }
    }

    /// Default step bound `0.01 / max(g sqrt(n_max), J, kappa, gamma, |delta|)`.
    pub fn default_max_step(g: f64, n_max: usize, j: f64, kappa: f64, gamma: f64, delta: f64) -> f64 {
        let scale = [g * (n_max.max(1) as f64).sqrt(), j, kappa, gamma, delta.abs()]
            .into_iter()
            .fold(0.0, f64::max);
        if scale > 0.0 {
            0.01 / scale
        } else {
            f64::INFINITY
        }
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidParameter("integrator tolerances must be positive".into()));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::InvalidParameter("max_step must be positive".into()));
        }
        if self.method == Method::Rk4 && !self.max_step.is_finite() {
            return Err(Error::InvalidParameter("fixed-step RK4 needs a finite max_step".into()));
        }
        match self.sample_times.first() {
            Some(&t0) if t0 == 0.0 => {}
            _ => return Err(Error::InvalidParameter("sample grid must start at t = 0".into())),
        }
        if self.sample_times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("sample grid must be strictly increasing".into()));
        }
        Ok(())
    }
}

/// Uniform grid of `count` samples on `[0, t_max]`.
pub fn uniform_grid(t_max: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..count).map(|i| t_max * i as f64 / (count - 1) as f64).collect(),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// Integrate from `sample_times[0]` through every sample time. `rhs(t, y,
/// dy)` writes the derivative; `observe(k, t, y)` is called at sample `k`
/// and may abort the run by returning an error.
pub fn integrate<T, F, O>(y0: Vec<T>, cfg: &IntegratorConfig, mut rhs: F, mut observe: O) -> Result<IntegrationStats>
where
    T: OdeScalar,
    F: FnMut(f64, &[T], &mut [T]),
    O: FnMut(usize, f64, &[T]) -> Result<()>,
{
    cfg.validate()?;
    let mut stepper = Stepper::new(y0.len());
    let mut y = y0;
    let mut t = cfg.sample_times[0];
    observe(0, t, &y)?;
    if cfg.sample_times.len() == 1 {
        return Ok(stepper.stats);
    }
    match cfg.method {
        Method::Rk4 => {
            for (k, &target) in cfg.sample_times.iter().enumerate().skip(1) {
                let n = ((target - t) / cfg.max_step).ceil().max(1.0) as usize;
                let h = (target - t) / n as f64;
                for i in 0..n {
                    let ti = t + i as f64 * h;
                    stepper.rk4_step(&mut rhs, ti, &mut y, h);
                }
                t = target;
                check_finite(&y, t)?;
                if stepper.stats.accepted > cfg.max_steps {
                    return Err(Error::TooManySteps { t, max_steps: cfg.max_steps });
                }
                observe(k, t, &y)?;
            }
        }
        Method::Dopri45 => {
            rhs(t, &y, &mut stepper.k[0]);
            stepper.stats.rhs_evals += 1;
            let mut h = stepper.initial_step(&mut rhs, t, &y, cfg);
            for (k, &target) in cfg.sample_times.iter().enumerate().skip(1) {
                while t < target {
                    let remaining = target - t;
                    let clipped = h >= remaining;
                    let h_try = if clipped { remaining } else { h };
                    let (err, h_next) = stepper.dopri_attempt(&mut rhs, t, &y, h_try, cfg);
                    if err <= 1.0 {
                        t = if clipped { target } else { t + h_try };
                        std::mem::swap(&mut y, &mut stepper.y_new);
                        stepper.k.swap(0, 6);
                        stepper.stats.accepted += 1;
                        check_finite(&y, t)?;
                        // a step shortened only to hit the sample keeps the natural size
                        h = if clipped { h.max(h_next.min(cfg.max_step)) } else { h_next.min(cfg.max_step) };
                        h = h.min(cfg.max_step);
                    } else {
                        stepper.stats.rejected += 1;
                        h = h_next.min(cfg.max_step);
                    }
                    if h < 1e-14 * t.abs().max(1.0) {
                        return Err(Error::StepSizeUnderflow { t, h });
                    }
                    if stepper.stats.accepted + stepper.stats.rejected > cfg.max_steps {
                        return Err(Error::TooManySteps { t, max_steps: cfg.max_steps });
                    }
                }
                observe(k, t, &y)?;
            }
        }
    }
    Ok(stepper.stats)
}

fn check_finite<T: OdeScalar>(y: &[T], t: f64) -> Result<()> {
    if y.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { t })
    }
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

struct Stepper<T> {
    k: [Vec<T>; 7],
    y_stage: Vec<T>,
    y_new: Vec<T>,
    stats: IntegrationStats,
}

impl<T: OdeScalar> Stepper<T> {
    fn new(n: usize) -> Self {
        let z = || vec![T::default(); n];
        Self {
            k: [z(), z(), z(), z(), z(), z(), z()],
            y_stage: z(),
            y_new: z(),
            stats: IntegrationStats::default(),
        }
    }

    /// Hairer-Norsett-Wanner starting step heuristic.
    fn initial_step<F: FnMut(f64, &[T], &mut [T])>(&mut self, rhs: &mut F, t: f64, y: &[T], cfg: &IntegratorConfig) -> f64 {
        let sc: Vec<f64> = y.iter().map(|v| cfg.abs_tol + cfg.rel_tol * v.modulus()).collect();
        let rms = |v: &[T]| {
            (v.iter().zip(&sc).map(|(a, s)| (a.modulus() / s).powi(2)).sum::<f64>() / v.len().max(1) as f64).sqrt()
        };
        let d0 = rms(y);
        let d1 = rms(&self.k[0]);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(cfg.max_step);
        for ((ys, yi), ki) in self.y_stage.iter_mut().zip(y).zip(&self.k[0]) {
            *ys = *yi;
            *ys += *ki * h0;
        }
        rhs(t + h0, &self.y_stage, &mut self.k[1]);
        self.stats.rhs_evals += 1;
        let diff: Vec<T> = self.k[1].iter().zip(&self.k[0]).map(|(a, b)| {
            let mut d = *a;
            d += *b * -1.0;
            d
        }).collect();
        let d2 = rms(&diff) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / 5.0)
        };
        (100.0 * h0).min(h1).min(cfg.max_step)
    }

    /// One trial step from `(t, y)` with `k[0] = f(t, y)`. Leaves the
    /// candidate in `y_new` and `f(t+h, y_new)` in `k[6]`. Returns the scaled
    /// error norm and the proposed next step.
    fn dopri_attempt<F: FnMut(f64, &[T], &mut [T])>(
        &mut self,
        rhs: &mut F,
        t: f64,
        y: &[T],
        h: f64,
        cfg: &IntegratorConfig,
    ) -> (f64, f64) {
        for s in 1..7 {
            let (done, rest) = self.k.split_at_mut(s);
            for (i, ys) in self.y_stage.iter_mut().enumerate() {
                let mut acc = y[i];
                for (j, kj) in done.iter().enumerate() {
                    let a = A[s][j];
                    if a != 0.0 {
                        acc += kj[i] * (a * h);
                    }
                }
                *ys = acc;
            }
            rhs(t + C[s] * h, &self.y_stage, &mut rest[0]);
            self.stats.rhs_evals += 1;
            if s == 6 {
                // stage 7 is evaluated at the fifth-order solution (FSAL)
                std::mem::swap(&mut self.y_new, &mut self.y_stage);
            }
        }
        let n = y.len().max(1) as f64;
        let mut sum = 0.0;
        for i in 0..y.len() {
            let mut e = T::default();
            for (s, es) in E.iter().enumerate() {
                if *es != 0.0 {
                    e += self.k[s][i] * (es * h);
                }
            }
            let scale = cfg.abs_tol + cfg.rel_tol * y[i].modulus().max(self.y_new[i].modulus());
            sum += (e.modulus() / scale).powi(2);
        }
        let err = (sum / n).sqrt();
        let fac = if err == 0.0 { FAC_MAX } else { (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, FAC_MAX) };
        let fac = if err > 1.0 { fac.min(1.0) } else { fac };
        (err, h * fac)
    }

    fn rk4_step<F: FnMut(f64, &[T], &mut [T])>(&mut self, rhs: &mut F, t: f64, y: &mut [T], h: f64) {
        rhs(t, y, &mut self.k[0]);
        for (s, (c, w)) in [(0.5, 0.5), (0.5, 0.5), (1.0, 1.0)].into_iter().enumerate() {
            for ((ys, yi), kp) in self.y_stage.iter_mut().zip(y.iter()).zip(&self.k[s]) {
                *ys = *yi;
                *ys += *kp * (w * h);
            }
            let (_, rest) = self.k.split_at_mut(s + 1);
            rhs(t + c * h, &self.y_stage, &mut rest[0]);
        }
        for i in 0..y.len() {
            let incr = self.k[0][i] * (h / 6.0);
            y[i] += incr;
            y[i] += self.k[1][i] * (h / 3.0);
            y[i] += self.k[2][i] * (h / 3.0);
            y[i] += self.k[3][i] * (h / 6.0);
        }
        self.stats.rhs_evals += 4;
        self.stats.accepted += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(method: Method, max_step: f64, times: Vec<f64>) -> Vec<Vec<f64>> {
        let mut cfg = IntegratorConfig::new(times, max_step).with_method(method);
        cfg.rel_tol = 1e-10;
        cfg.abs_tol = 1e-12;
        let mut out = Vec::new();
        integrate(
            vec![1.0, 0.0],
            &cfg,
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -4.0 * y[0];
            },
            |_, _, y| {
                out.push(y.to_vec());
                Ok(())
            },
        )
        .unwrap();
        out
    }

    #[test]
    fn harmonic_oscillator_both_methods() {
        let times = uniform_grid(10.0, 101);
        for (method, step, tol) in [(Method::Dopri45, f64::INFINITY, 1e-8), (Method::Rk4, 1e-3, 1e-9)] {
            let ys = run(method, step, times.clone());
            for (t, y) in times.iter().zip(&ys) {
                assert!((y[0] - (2.0 * t).cos()).abs() < tol, "{method:?} t={t}");
            }
        }
    }

    #[test]
    fn complex_rotation() {
        let times = uniform_grid(5.0, 11);
        let cfg = IntegratorConfig::new(times.clone(), 0.1);
        let mut got = Vec::new();
        integrate(
            vec![C64::new(1.0, 0.0)],
            &cfg,
            |_, y, dy| dy[0] = y[0] * C64::new(0.0, -3.0),
            |_, t, y| {
                got.push((t, y[0]));
                Ok(())
            },
        )
        .unwrap();
        for (t, z) in got {
            assert!((z - C64::new(0.0, -3.0 * t).exp()).norm() < 1e-7);
        }
    }

    #[test]
    fn rk4_is_bitwise_deterministic() {
        let times = uniform_grid(3.0, 31);
        assert_eq!(run(Method::Rk4, 0.01, times.clone()), run(Method::Rk4, 0.01, times));
    }

    #[test]
    fn rk4_fourth_order() {
        let times = vec![0.0, 2.0];
        let err = |h| (run(Method::Rk4, h, times.clone())[1][0] - 4f64.cos()).abs();
        let ratio = err(0.02) / err(0.01);
        assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
    }

    #[test]
    fn rejects_bad_grids() {
        let f = |_: f64, _: &[f64], _: &mut [f64]| {};
        let o = |_: usize, _: f64, _: &[f64]| Ok(());
        assert!(integrate(vec![0.0], &IntegratorConfig::new(vec![0.1, 0.2], 1.0), f, o).is_err());
        assert!(integrate(vec![0.0], &IntegratorConfig::new(vec![0.0, 0.2, 0.2], 1.0), f, o).is_err());
        let cfg = IntegratorConfig::new(vec![0.0, 1.0], f64::INFINITY).with_method(Method::Rk4);
        assert!(integrate(vec![0.0], &cfg, f, o).is_err());
    }

    #[test]
    fn blow_up_is_reported() {
        let cfg = IntegratorConfig::new(vec![0.0, 2.0], 1.0);
        let r = integrate(vec![1.0], &cfg, |_, y, dy| dy[0] = y[0] * y[0], |_, _, _| Ok(()));
        assert!(matches!(r, Err(Error::StepSizeUnderflow { .. }) | Err(Error::NonFinite { .. }) | Err(Error::TooManySteps { .. })));
    }

    #[test]
    fn default_step_bound() {
        let h = IntegratorConfig::default_max_step(2.0, 25, 1.0, 0.05, 0.05, 0.0);
        assert!((h - 0.001).abs() < 1e-15);
        assert!(IntegratorConfig::default_max_step(0.0, 3, 0.0, 0.0, 0.0, 0.0).is_infinite());
    }
}
