//! Run configuration in TOML.
//!
//! All rates are in units of `J` and all times in units of `1/J`. A
//! minimal configuration:
//!
//! ```toml
//! mode = "quantum-lindblad"
//! N0 = 20
//!
//! [params]
//! g_over_gc = 0.8
//! kappa = 0.05
//! gamma = 0.05
//! ```
//!
//! The `[metadata]` table is reserved for the sidecar written next to every
//! output and is ignored when parsing, so a sidecar is itself a valid
//! configuration that reproduces its run.

use std::path::PathBuf;

use jcdsim_core::analysis::{gc_formula, SweepMode};
use jcdsim_core::integrator::{Method, DEFAULT_ABS_TOL, DEFAULT_MAX_STEPS, DEFAULT_REL_TOL};
use jcdsim_core::model::ModelParams;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Semiclassical,
    QuantumPure,
    QuantumLindblad,
    Sweep,
    Splitting,
    Spectrum,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialState {
    Fock,
    Coherent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SemiclassicalSystem {
    Full,
    Reduced,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegratorSettings {
    pub method: Method,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// In units of `1/J`; the `0.01 / max(...)` rule when `None`.
    pub max_step: Option<f64>,
    pub max_steps: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSettings {
    /// Absolute couplings.
    pub g_list: Vec<f64>,
    pub mode: SweepMode,
    /// Averaging window in units of `1/J`.
    pub window: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplittingSettings {
    pub n_list: Vec<usize>,
    /// Tunneling rates for the power-law fit; no fit when empty.
    pub j_list: Vec<f64>,
}

/// Validated configuration with every default resolved.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub params: ModelParams,
    pub n0: usize,
    pub initial_state: InitialState,
    pub n_max: usize,
    pub excitation_cap: Option<usize>,
    pub t_max: f64,
    pub sample_count: usize,
    pub integrator: IntegratorSettings,
    pub system: SemiclassicalSystem,
    pub sweep: Option<SweepSettings>,
    pub splitting: Option<SplittingSettings>,
    pub spectrum_m_max: usize,
    pub output: Option<PathBuf>,
    /// `J` in MHz, used only to report absolute units in the metadata.
    pub unit_j_mhz: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct ConfigFile {
    pub mode: Option<Mode>,
    #[serde(rename = "N0", skip_serializing_if = "Option::is_none")]
    pub n0: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<InitialState>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excitation_cap: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(rename = "unit_J_MHz", skip_serializing_if = "Option::is_none")]
    pub unit_j_mhz: Option<f64>,
    #[serde(default)]
    pub params: ParamsFile,
    #[serde(default)]
    pub integrator: IntegratorFile,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub semiclassical: Option<SemiclassicalFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub splitting: Option<SplittingFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumFile>,
    /// Run metadata of a sidecar file; accepted and ignored.
    #[serde(rename = "metadata", skip_serializing)]
    pub _metadata: Option<toml::Table>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct ParamsFile {
    #[serde(rename = "J", skip_serializing_if = "Option::is_none")]
    pub j: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_over_gc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_x: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct IntegratorFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abs_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct SemiclassicalFile {
    pub system: Option<SemiclassicalSystem>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct SweepFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_list: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_over_gc_list: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<SweepMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct SplittingFile {
    #[serde(rename = "N_list", skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    #[serde(rename = "J_list", skip_serializing_if = "Option::is_none")]
    pub j_list: Option<Vec<f64>>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct SpectrumFile {
    #[serde(rename = "M_max")]
    pub m_max: Option<usize>,
}

/// 1-based line of `key = ...` inside `[table]` (top level when `None`);
/// falls back to the table header, then to line 1.
fn key_line(text: &str, table: Option<&str>, key: &str) -> usize {
    let mut current: Option<String> = None;
    let mut header = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.split(']').next()) {
            current = Some(name.trim().to_string());
            if table == current.as_deref() {
                header = Some(i + 1);
            }
            continue;
        }
        if current.as_deref() != table {
            continue;
        }
        if let Some(rest) = line.strip_prefix(key) {
            if rest.trim_start().starts_with('=') {
                return i + 1;
            }
        }
    }
    header.unwrap_or(1)
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Parse and validate a configuration, applying defaults.
pub fn parse_config(text: &str) -> CliResult<RunConfig> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| {
        let line = e.span().map_or(1, |s| line_of_offset(text, s.start));
        CliError::config(line, e.message().trim().to_string())
    })?;
    resolve(file, text)
}

fn resolve(file: ConfigFile, text: &str) -> CliResult<RunConfig> {
    let at = |table: Option<&str>, key: &str, msg: String| CliError::config(key_line(text, table, key), msg);
    let mode = file.mode.ok_or_else(|| CliError::config(1, "missing required key mode"))?;
    let p = &file.params;
    let j = p.j.unwrap_or(1.0);
    for (key, v) in [("J", Some(j)), ("kappa", p.kappa), ("gamma", p.gamma), ("g", p.g), ("g_over_gc", p.g_over_gc)] {
        if let Some(v) = v {
            if !v.is_finite() {
                return Err(at(Some("params"), key, format!("{key} must be finite")));
            }
            if v < 0.0 {
                return Err(at(Some("params"), key, format!("negative rate: {key} = {v}")));
            }
        }
    }
    if j == 0.0 {
        return Err(at(Some("params"), "J", "J sets the rate unit and must be positive".into()));
    }
    let needs_n0 = matches!(mode, Mode::Semiclassical | Mode::QuantumPure | Mode::QuantumLindblad | Mode::Sweep);
    let n0 = match file.n0 {
        Some(n) => n,
        None if needs_n0 => return Err(CliError::config(1, "missing required key N0")),
        None => 0,
    };
    if needs_n0 && n0 == 0 {
        return Err(at(None, "N0", "N0 must be at least 1".into()));
    }
    let g = match (p.g, p.g_over_gc) {
        (Some(_), Some(_)) => return Err(at(Some("params"), "g_over_gc", "give either g or g_over_gc, not both".into())),
        (Some(g), None) => Some(g),
        (None, Some(f)) => {
            if n0 == 0 {
                return Err(at(Some("params"), "g_over_gc", "g_over_gc needs N0 to fix g_c".into()));
            }
            Some(f * gc_formula(n0 as f64, j))
        }
        (None, None) => None,
    };
    let g = match (g, mode) {
        (Some(g), _) => g,
        (None, Mode::Sweep) => 0.0,
        (None, _) => return Err(CliError::config(key_line(text, Some("params"), "g"), "missing required key g (or g_over_gc)")),
    };
    let params = ModelParams {
        omega_c: p.omega_c.unwrap_or(0.0),
        omega_x: p.omega_x.unwrap_or(0.0),
        g,
        j,
        kappa: p.kappa.unwrap_or(0.0),
        gamma: p.gamma.unwrap_or(0.0),
    };
    if mode == Mode::QuantumPure && !params.is_conservative() {
        let key = if params.kappa != 0.0 { "kappa" } else { "gamma" };
        return Err(at(Some("params"), key, "quantum-pure requires kappa = gamma = 0".into()));
    }

    let default_initial = if mode == Mode::Semiclassical { InitialState::Coherent } else { InitialState::Fock };
    let initial_state = file.initial_state.unwrap_or(default_initial);
    if mode == Mode::Semiclassical && initial_state == InitialState::Fock {
        return Err(at(None, "initial_state", "the mean-field run starts from a coherent amplitude; use initial_state = \"coherent\"".into()));
    }
    let (n_max, excitation_cap) = match initial_state {
        InitialState::Fock => (file.n_max.unwrap_or(n0), file.excitation_cap.or(file.n_max.map_or(Some(n0), |_| None))),
        InitialState::Coherent => {
            let n = n0 as f64;
            (file.n_max.unwrap_or((n + 5.0 * n.sqrt()).ceil() as usize), file.excitation_cap)
        }
    };

    let t_max = file.t_max.unwrap_or(100.0);
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(at(None, "t_max", format!("t_max must be positive, got {t_max}")));
    }
    let sample_count = file.sample_count.unwrap_or(1001);
    if sample_count < 2 {
        return Err(at(None, "sample_count", "sample_count must be at least 2".into()));
    }

    let it = &file.integrator;
    let integrator = IntegratorSettings {
        method: it.method.unwrap_or(Method::Dopri45),
        rel_tol: it.rel_tol.unwrap_or(DEFAULT_REL_TOL),
        abs_tol: it.abs_tol.unwrap_or(DEFAULT_ABS_TOL),
        max_step: it.max_step,
        max_steps: it.max_steps.unwrap_or(DEFAULT_MAX_STEPS),
    };
    for (key, v) in [("rel_tol", Some(integrator.rel_tol)), ("abs_tol", Some(integrator.abs_tol)), ("max_step", integrator.max_step)] {
        if let Some(v) = v {
            if !(v > 0.0) {
                return Err(at(Some("integrator"), key, format!("{key} must be positive")));
            }
        }
    }

    let default_system = if params.is_conservative() && params.detuning() == 0.0 {
        SemiclassicalSystem::Reduced
    } else {
        SemiclassicalSystem::Full
    };
    let system = file.semiclassical.as_ref().and_then(|s| s.system).unwrap_or(default_system);
    if system == SemiclassicalSystem::Reduced && !params.is_conservative() {
        return Err(at(Some("semiclassical"), "system", "reduced system is conservative-only".into()));
    }

    let sweep = if mode == Mode::Sweep {
        let s = file.sweep.as_ref();
        let gc = gc_formula(n0 as f64, j);
        let g_list = match (s.and_then(|s| s.g_list.clone()), s.and_then(|s| s.g_over_gc_list.clone())) {
            (Some(_), Some(_)) => return Err(at(Some("sweep"), "g_over_gc_list", "give either g_list or g_over_gc_list, not both".into())),
            (Some(l), None) => l,
            (None, Some(l)) => l.iter().map(|f| f * gc).collect(),
            (None, None) => return Err(CliError::config(key_line(text, Some("sweep"), "g_list"), "missing g_list")),
        };
        if g_list.is_empty() {
            return Err(at(Some("sweep"), "g_list", "missing g_list (empty)".into()));
        }
        if let Some(bad) = g_list.iter().find(|g| !(**g >= 0.0)) {
            return Err(at(Some("sweep"), "g_list", format!("negative rate: g = {bad}")));
        }
        let window = s.and_then(|s| s.window).unwrap_or([0.0, 100.0]);
        if !(window[0] >= 0.0 && window[1] > window[0] && window[1] <= t_max) {
            return Err(at(Some("sweep"), "window", format!("window {window:?} must lie inside [0, t_max = {t_max}]")));
        }
        Some(SweepSettings { g_list, mode: s.and_then(|s| s.mode).unwrap_or(SweepMode::Quantum), window })
    } else {
        None
    };

    let splitting = if mode == Mode::Splitting {
        let s = file.splitting.as_ref();
        let n_list = s.and_then(|s| s.n_list.clone()).unwrap_or_else(|| (1..=5).collect());
        if n_list.is_empty() || n_list.contains(&0) {
            return Err(at(Some("splitting"), "N_list", "N_list entries must be at least 1".into()));
        }
        if !params.is_conservative() {
            return Err(at(Some("params"), "kappa", "splitting mode requires kappa = gamma = 0".into()));
        }
        Some(SplittingSettings { n_list, j_list: s.and_then(|s| s.j_list.clone()).unwrap_or_default() })
    } else {
        None
    };

    Ok(RunConfig {
        mode,
        params,
        n0,
        initial_state,
        n_max,
        excitation_cap,
        t_max,
        sample_count,
        integrator,
        system,
        sweep,
        splitting,
        spectrum_m_max: file.spectrum.and_then(|s| s.m_max).unwrap_or(5),
        output: file.output.map(PathBuf::from),
        unit_j_mhz: file.unit_j_mhz,
    })
}

impl RunConfig {
    /// Configuration file that parses back into `self`.
    pub(crate) fn to_file(&self) -> ConfigFile {
        let p = &self.params;
        ConfigFile {
            mode: Some(self.mode),
            n0: Some(self.n0),
            initial_state: Some(self.initial_state),
            n_max: Some(self.n_max),
            excitation_cap: self.excitation_cap,
            t_max: Some(self.t_max),
            sample_count: Some(self.sample_count),
            output: self.output.as_ref().map(|o| o.display().to_string()),
            unit_j_mhz: self.unit_j_mhz,
            params: ParamsFile {
                j: Some(p.j),
                g: Some(p.g),
                g_over_gc: None,
                kappa: Some(p.kappa),
                gamma: Some(p.gamma),
                omega_c: Some(p.omega_c),
                omega_x: Some(p.omega_x),
            },
            integrator: IntegratorFile {
                method: Some(self.integrator.method),
                rel_tol: Some(self.integrator.rel_tol),
                abs_tol: Some(self.integrator.abs_tol),
                max_step: self.integrator.max_step,
                max_steps: Some(self.integrator.max_steps),
            },
            semiclassical: Some(SemiclassicalFile { system: Some(self.system) }),
            sweep: self.sweep.as_ref().map(|s| SweepFile {
                g_list: Some(s.g_list.clone()),
                g_over_gc_list: None,
                mode: Some(s.mode),
                window: Some(s.window),
            }),
            splitting: self.splitting.as_ref().map(|s| SplittingFile {
                n_list: Some(s.n_list.clone()),
                j_list: Some(s.j_list.clone()),
            }),
            spectrum: Some(SpectrumFile { m_max: Some(self.spectrum_m_max) }),
            _metadata: None,
        }
    }

    /// Serialized form of [`RunConfig::to_file`].
    pub fn to_toml(&self) -> CliResult<String> {
        Ok(toml::to_string(&self.to_file())?)
    }
}
