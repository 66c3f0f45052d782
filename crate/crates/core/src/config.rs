//! Run configuration: a single declarative TOML file. Every default is
//! resolved at load time and echoed into the output metadata so runs are
//! self-describing.

use crate::error::{KamError, Result};
use crate::iterate::{ScheduleParams, StopRule};
use crate::kamstep::StepOptions;
use crate::pde::{PdeKind, PdeSetup};
use crate::series::Site;
use crate::spectra::{minimal_tau, DiophantineParams, LatticeKind, Precision, SpectrumModel};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// rho = 1 with c(rho) = 5/2 and no special-form requirement.
    TheoremA,
    /// General rho with the special form A4)' enforced.
    #[default]
    TheoremAPrime,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: String,
    #[serde(default)]
    pub spatial_dim: u32,
    #[serde(default)]
    pub tangential_sites: Vec<Vec<i64>>,
    #[serde(default)]
    pub mode_cutoff: i64,
    #[serde(default)]
    pub nonlinearity: Vec<f64>,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default = "default_truncation")]
    pub series_truncation: u32,
    #[serde(default)]
    pub amplitudes: Vec<f64>,
    /// For kind = "series": path to a series text file.
    #[serde(default)]
    pub path: String,
}

fn default_truncation() -> u32 {
    4
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    /// Site -> additive o(|i|^d) correction.
    #[serde(default)]
    pub principal: BTreeMap<String, f64>,
    /// Site -> coefficient list of the xi-linear o(|i|^delta) tail.
    #[serde(default)]
    pub tail: BTreeMap<String, Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub mu0: f64,
    #[serde(default = "default_r0")]
    pub r0: f64,
    #[serde(default = "default_a0")]
    pub a0: f64,
    #[serde(default = "default_gamma0")]
    pub gamma0: f64,
    /// 0 = derive from the frequency-map and spectrum Lipschitz constants.
    #[serde(default)]
    pub m0: f64,
    /// 0 = use the minimal admissible tau = n + (c(rho)+2)/d + 4.
    #[serde(default)]
    pub tau: f64,
    #[serde(default = "default_c_rho")]
    pub c_rho: f64,
    /// 0 = use c1(rho) = rho, the lattice-counting exponent.
    #[serde(default)]
    pub c1_rho: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_nu_max")]
    pub nu_max: usize,
    #[serde(default)]
    pub p: f64,
    #[serde(default)]
    pub p_bar: f64,
    #[serde(default = "default_norm_floor")]
    pub norm_floor: f64,
    #[serde(default = "default_prune_floor")]
    pub prune_floor: f64,
    #[serde(default = "default_max_fourier")]
    pub max_fourier: i64,
    #[serde(default = "default_scan_k_cap")]
    pub scan_k_cap: i64,
    /// 0 = per-lattice default (16 for rho = 1, 6 above).
    #[serde(default)]
    pub scan_site_cap: i64,
    /// Base of [log(1/mu)] in the cutoff formulas; 0 = natural.
    #[serde(default)]
    pub log_base: f64,
}

fn default_r0() -> f64 {
    1.0
}
fn default_a0() -> f64 {
    1.0
}
fn default_gamma0() -> f64 {
    1.0
}
fn default_c_rho() -> f64 {
    2.5
}
fn default_sigma() -> f64 {
    0.75
}
fn default_nu_max() -> usize {
    6
}
fn default_norm_floor() -> f64 {
    1e-13
}
fn default_prune_floor() -> f64 {
    1e-18
}
fn default_max_fourier() -> i64 {
    32
}
fn default_scan_k_cap() -> i64 {
    64
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default)]
    pub jitter: f64,
}

fn default_resolution() -> usize {
    100
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { resolution: default_resolution(), jitter: 0.0 }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Parameter samples; empty = the box center.
    #[serde(default)]
    pub xi: Vec<Vec<f64>>,
    /// Offset of the finite-difference partner sample used by `check`.
    #[serde(default = "default_lip_step")]
    pub lip_step: f64,
}

fn default_lip_step() -> f64 {
    1e-3
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub precision: Precision,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(rename = "box")]
    pub param_box: BoxConfig,
    pub scheme: SchemeConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_seed() -> u64 {
    1
}
fn default_workers() -> usize {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: String,
}

/// Everything a command needs, resolved and validated.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub config: RunConfig,
    pub setup: Option<PdeSetup>,
    pub schedule_params: ScheduleParams,
    pub dio: DiophantineParams,
    pub step_options: StepOptions,
    pub stop: StopRule,
    pub special_form: bool,
    pub n: usize,
    pub lattice: LatticeKind,
    pub notes: Vec<String>,
}

pub fn load(path: &Path) -> Result<Resolved> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| KamError::Config(format!("cannot read {}: {e}", path.display())))?;
    let config: RunConfig =
        toml::from_str(&text).map_err(|e| KamError::Config(format!("bad config: {e}")))?;
    resolve(config)
}

pub fn resolve(mut config: RunConfig) -> Result<Resolved> {
    let mut notes = Vec::new();

    let setup = match config.problem.kind.as_str() {
        "nls" => Some(PdeSetup {
            kind: PdeKind::Nls,
            spatial_dim: config.problem.spatial_dim,
            tangential_sites: config
                .problem
                .tangential_sites
                .iter()
                .map(|v| Site::new(v.clone()))
                .collect(),
            mode_cutoff: config.problem.mode_cutoff,
            nonlinearity: config.problem.nonlinearity.clone(),
            alpha: 0.0,
            series_truncation: config.problem.series_truncation,
            amplitudes: config.problem.amplitudes.clone(),
        }),
        "klein_gordon" => Some(PdeSetup {
            kind: PdeKind::KleinGordon,
            spatial_dim: config.problem.spatial_dim,
            tangential_sites: config
                .problem
                .tangential_sites
                .iter()
                .map(|v| Site::new(v.clone()))
                .collect(),
            mode_cutoff: config.problem.mode_cutoff,
            nonlinearity: Vec::new(),
            alpha: config.problem.alpha,
            series_truncation: config.problem.series_truncation,
            amplitudes: config.problem.amplitudes.clone(),
        }),
        "series" => None,
        other => {
            return Err(KamError::Config(format!(
                "unknown problem kind `{other}` (nls | klein_gordon | series)"
            )))
        }
    };
    if let Some(s) = &setup {
        s.validate()?;
    }

    let (n, lattice, d) = match &setup {
        Some(s) => (s.n(), s.lattice(), s.weyl_exponent()),
        None => {
            return Err(KamError::Config(
                "problem kind `series` needs explicit model tables; use a pde kind".into(),
            ))
        }
    };
    if config.param_box.lo.len() != n || config.param_box.hi.len() != n {
        return Err(KamError::Config(format!(
            "parameter box must have dimension n = {n}"
        )));
    }
    if config
        .param_box
        .lo
        .iter()
        .zip(&config.param_box.hi)
        .any(|(l, h)| h <= l)
    {
        return Err(KamError::Config("parameter box must have positive volume".into()));
    }

    let rho = lattice.rho();
    let sch = &mut config.scheme;
    if sch.c1_rho == 0.0 {
        sch.c1_rho = rho as f64;
        notes.push(format!("c1(rho) defaulted to rho = {rho}"));
    }
    if sch.c_rho < sch.c1_rho + rho as f64 {
        return Err(KamError::Config(format!(
            "c(rho) = {} violates c(rho) >= c1(rho) + rho = {}",
            sch.c_rho,
            sch.c1_rho + rho as f64
        )));
    }
    let tau_min = minimal_tau(n, sch.c_rho, d);
    if sch.tau == 0.0 {
        sch.tau = tau_min;
        notes.push(format!("tau defaulted to the minimal admissible {tau_min}"));
    } else if sch.tau < tau_min {
        return Err(KamError::Config(format!(
            "tau = {} below the admissible minimum {tau_min}",
            sch.tau
        )));
    }
    if sch.log_base == 0.0 {
        sch.log_base = std::f64::consts::E;
        notes.push("cutoff logarithm base defaulted to e".into());
    }
    if sch.scan_site_cap == 0 {
        sch.scan_site_cap = if rho == 1 { 16 } else { 6 };
    }
    for key in [sch.mu0, sch.r0, sch.a0, sch.gamma0, sch.sigma] {
        if key <= 0.0 {
            return Err(KamError::Config("scheme scalars must be positive".into()));
        }
    }
    notes.push("M_nu uses M0 (2 - 2^{-nu}); the printed 2 - 2^{nu+1} is negative".into());

    let special_form = config.mode == Mode::TheoremAPrime;
    let m0 = sch.m0; // resolved against the model in `models_for`
    let schedule_params = ScheduleParams {
        mu0: sch.mu0,
        r0: sch.r0,
        a0: sch.a0,
        gamma0: sch.gamma0,
        m0,
        tau: sch.tau,
        c_rho: sch.c_rho,
        c1_rho: sch.c1_rho,
        sigma: sch.sigma,
        n,
        lattice,
        d,
        delta: -1.0,
        nu_max: sch.nu_max,
        log_base: sch.log_base,
    };
    let dio = DiophantineParams {
        gamma: sch.gamma0,
        tau: sch.tau,
        d,
        c_rho: sch.c_rho,
    };
    let step_options = StepOptions {
        dio,
        special_form,
        max_degree: config.problem.series_truncation.max(4),
        max_fourier: sch.max_fourier,
        prune_floor: sch.prune_floor,
        scan_k_cap: sch.scan_k_cap,
        scan_site_cap: sch.scan_site_cap,
    };
    let stop = StopRule { nu_max: sch.nu_max, norm_floor: sch.norm_floor };

    Ok(Resolved {
        n,
        lattice,
        special_form,
        setup,
        schedule_params,
        dio,
        step_options,
        stop,
        notes,
        config,
    })
}

impl Resolved {
    /// Applies the spectrum correction tables to a built model.
    pub fn apply_spectrum_overrides(&self, sm: &mut SpectrumModel) -> Result<()> {
        for (key, v) in &self.config.spectrum.principal {
            let site = parse_site(key)?;
            sm.set_principal(&site, *v);
        }
        for (key, coeffs) in &self.config.spectrum.tail {
            let site = parse_site(key)?;
            if coeffs.len() != self.n {
                return Err(KamError::Config(format!(
                    "tail table for {key} must have n = {} coefficients",
                    self.n
                )));
            }
            sm.set_tail(&site, coeffs.clone());
        }
        Ok(())
    }

    /// M0: configured value, or the model's |omega|^L + |Omega|^L_{-delta}.
    pub fn m0_for(&self, fm: &crate::spectra::FrequencyMap, sm: &SpectrumModel) -> f64 {
        if self.config.scheme.m0 > 0.0 {
            self.config.scheme.m0
        } else {
            fm.lipschitz() + sm.lipschitz_mdelta()
        }
    }

    pub fn box_center(&self) -> Vec<f64> {
        self.config
            .param_box
            .lo
            .iter()
            .zip(&self.config.param_box.hi)
            .map(|(l, h)| 0.5 * (l + h))
            .collect()
    }

    pub fn xi_samples(&self) -> Vec<Vec<f64>> {
        if self.config.run.xi.is_empty() {
            vec![self.box_center()]
        } else {
            self.config.run.xi.clone()
        }
    }
}

/// Parses a site key of the form "(1,-2)" or "3".
pub fn parse_site(text: &str) -> Result<Site> {
    let inner = text
        .trim()
        .strip_prefix('(')
        .and_then(|t| t.strip_suffix(')'))
        .unwrap_or(text.trim());
    let coords: std::result::Result<Vec<i64>, _> =
        inner.split(',').map(|t| t.trim().parse::<i64>()).collect();
    coords
        .map(Site::new)
        .map_err(|_| KamError::Config(format!("bad site key `{text}`")))
}
