//! Run configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use unravel::model::{DuffingParams, HoParams};
use unravel::poincare::steps_per_period;
use unravel::trajectories::DEFAULT_BREACH_THRESHOLD;
use unravel::{RunOptions, Scheme, Unraveling};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    DampedHo,
    Duffing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DampedHoConfig {
    pub omega: f64,
    pub gamma: f64,
    pub nbar: f64,
    pub dim: usize,
}

impl Default for DampedHoConfig {
    fn default() -> Self {
        Self {
            omega: 1.0,
            gamma: 1.0,
            nbar: 0.5,
            dim: 15,
        }
    }
}

impl DampedHoConfig {
    pub fn params(&self) -> HoParams {
        HoParams {
            omega: self.omega,
            gamma: self.gamma,
            nbar: self.nbar,
            dim: self.dim,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DuffingConfig {
    pub gamma: f64,
    pub g: f64,
    pub beta: f64,
    pub dim: usize,
    /// Coefficient of `QP + PQ`; `√gamma` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ansatz_coeff: Option<f64>,
}

impl Default for DuffingConfig {
    fn default() -> Self {
        Self {
            gamma: 0.125,
            g: 0.3,
            beta: 1.0,
            dim: 64,
            ansatz_coeff: None,
        }
    }
}

impl DuffingConfig {
    pub fn params(&self) -> DuffingParams {
        let mut p = DuffingParams::new(self.gamma, self.g, self.beta, self.dim);
        if let Some(c) = self.ansatz_coeff {
            p.ansatz_coeff = c;
        }
        p
    }
}

/// Initial state for ensemble and oracle workloads.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialState {
    Fock { n: usize },
    Coherent { re: f64, im: f64 },
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState::Fock { n: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub unraveling: Unraveling,
    pub scheme: Scheme,
    pub dt: f64,
    pub t_final: f64,
    pub n_trajectories: usize,
    pub sample_every: usize,
    /// Leakage abort level. Unset: 1e-3 for single trajectories, disabled for
    /// oracle comparisons, which are truncated identically.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub breach_threshold: Option<f64>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            unraveling: Unraveling::Qsd,
            scheme: Scheme::default(),
            dt: 1e-3,
            t_final: 2.0,
            n_trajectories: 1000,
            sample_every: 1,
            breach_threshold: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SectionConfig {
    /// Starting phase point; the quantum run starts in the coherent state
    /// centred on `β(x0, p0)`.
    pub x0: f64,
    pub p0: f64,
    pub n_skip: u64,
    pub n_points: u64,
    pub normalize_by_beta: bool,
}

impl Default for SectionConfig {
    fn default() -> Self {
        Self {
            x0: 0.5,
            p0: 0.0,
            n_skip: 0,
            n_points: 300,
            normalize_by_beta: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleCompareConfig {
    pub tolerance: f64,
}

impl Default for OracleCompareConfig {
    fn default() -> Self {
        Self { tolerance: 0.05 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub n_trajectories: Vec<usize>,
    /// Independent ensembles per level; the level error is their mean.
    pub replicates: usize,
    pub ratio_min: f64,
    pub ratio_max: f64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            n_trajectories: vec![250, 1000, 4000],
            replicates: 16,
            ratio_min: 1.4,
            ratio_max: 2.9,
        }
    }
}

/// Damped-oscillator checks. `omega` and `gamma` come from `[damped_ho]`;
/// the thermal checks use its `nbar`, the others run at zero temperature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HoValidateConfig {
    pub oracle_alpha0: f64,
    pub oracle_dim: usize,
    pub oracle_amplitude_t: f64,
    pub oracle_amplitude_tolerance: f64,
    /// In units of `1/gamma`.
    pub oracle_occupation_t: f64,
    pub oracle_occupation_tolerance: f64,

    pub localization_fock: usize,
    pub localization_t: f64,
    pub localization_dim: usize,
    pub variance_min: f64,
    pub variance_max: f64,

    pub coherent_alpha0: f64,
    pub coherent_t: f64,
    pub coherent_dt: f64,
    pub coherent_dim: usize,
    /// Bound on `|⟨a⟩ - α|` relative to `|α0|`.
    pub coherent_tolerance: f64,
    pub coherent_paths: usize,
    pub coherent_variance_tolerance: f64,

    pub jump_fock: usize,
    pub jump_t: f64,
    pub jump_dim: usize,
    pub jump_trajectories: usize,
}

impl Default for HoValidateConfig {
    fn default() -> Self {
        Self {
            oracle_alpha0: 1.0,
            oracle_dim: 30,
            oracle_amplitude_t: 1.0,
            oracle_amplitude_tolerance: 1e-6,
            oracle_occupation_t: 15.0,
            oracle_occupation_tolerance: 1e-3,
            localization_fock: 2,
            localization_t: 10.0,
            localization_dim: 30,
            variance_min: 0.45,
            variance_max: 0.55,
            coherent_alpha0: 2.0,
            coherent_t: 2.0,
            coherent_dt: 1e-4,
            coherent_dim: 30,
            coherent_tolerance: 0.01,
            coherent_paths: 10_000,
            coherent_variance_tolerance: 0.05,
            jump_fock: 3,
            jump_t: 5.0,
            jump_dim: 10,
            jump_trajectories: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub base_seed: u64,
    pub output: PathBuf,
    /// Model used by `oracle-compare` and `convergence-study`. Section
    /// commands always use `[duffing]`, `ho-validate` always `[damped_ho]`.
    pub model: ModelKind,
    pub damped_ho: DampedHoConfig,
    pub duffing: DuffingConfig,
    pub initial: InitialState,
    pub run: RunSection,
    pub section: SectionConfig,
    pub oracle_compare: OracleCompareConfig,
    pub convergence: ConvergenceConfig,
    pub ho_validate: HoValidateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            base_seed: 20240101,
            output: PathBuf::from("out"),
            model: ModelKind::DampedHo,
            damped_ho: DampedHoConfig::default(),
            duffing: DuffingConfig::default(),
            initial: InitialState::default(),
            run: RunSection::default(),
            section: SectionConfig::default(),
            oracle_compare: OracleCompareConfig::default(),
            convergence: ConvergenceConfig::default(),
            ho_validate: HoValidateConfig::default(),
        }
    }
}

fn invalid(path: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{path}: {reason}"))
}

fn positive(path: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(path, format!("must be positive and finite, got {v}")))
    }
}

fn core_check(prefix: &str, r: unravel::Result<()>) -> Result<(), CliError> {
    r.map_err(|e| match e {
        unravel::Error::Validation { field, reason } => invalid(&format!("{prefix}.{field}"), reason),
        other => invalid(prefix, other),
    })
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate_damped_ho(&self) -> Result<(), CliError> {
        core_check("damped_ho", self.damped_ho.params().validate())
    }

    pub fn validate_duffing(&self) -> Result<(), CliError> {
        core_check("duffing", self.duffing.params().validate())
    }

    pub fn validate_run(&self) -> Result<(), CliError> {
        positive("run.dt", self.run.dt)?;
        if !(self.run.t_final.is_finite() && self.run.t_final >= 0.0) {
            return Err(invalid("run.t_final", format!("must be ≥ 0, got {}", self.run.t_final)));
        }
        if self.run.n_trajectories == 0 {
            return Err(invalid("run.n_trajectories", "must be ≥ 1"));
        }
        if self.run.sample_every == 0 {
            return Err(invalid("run.sample_every", "must be ≥ 1"));
        }
        if let Some(b) = self.run.breach_threshold {
            if !(b > 0.0 && b <= 1.0) {
                return Err(invalid("run.breach_threshold", format!("must lie in (0, 1], got {b}")));
            }
        }
        core_check("run", self.trajectory_options(1.0).validate().map(|_| ()))
    }

    pub fn validate_section(&self) -> Result<(), CliError> {
        let s = &self.section;
        if !(s.x0.is_finite() && s.p0.is_finite()) {
            return Err(invalid("section.x0", "starting point must be finite"));
        }
        if s.n_points == 0 {
            return Err(invalid("section.n_points", "must be ≥ 1"));
        }
        positive("run.dt", self.run.dt)?;
        let per = steps_per_period(self.run.dt).map_err(|e| invalid("run.dt", e))?;
        if per % self.run.sample_every as u64 != 0 {
            return Err(invalid(
                "run.sample_every",
                format!("must divide the {per} steps per forcing period"),
            ));
        }
        Ok(())
    }

    /// Checks the model selected by `model` and the initial state against it.
    pub fn validate_ensemble(&self) -> Result<(), CliError> {
        let dim = match self.model {
            ModelKind::DampedHo => {
                self.validate_damped_ho()?;
                self.damped_ho.dim
            }
            ModelKind::Duffing => {
                self.validate_duffing()?;
                self.duffing.dim
            }
        };
        if dim > unravel::oracle::ORACLE_MAX_DIM {
            return Err(invalid(
                "dim",
                format!("oracle comparisons are limited to dim ≤ {}", unravel::oracle::ORACLE_MAX_DIM),
            ));
        }
        match self.initial {
            InitialState::Fock { n } if n >= dim => {
                Err(invalid("initial.n", format!("Fock level {n} does not fit in dim {dim}")))
            }
            InitialState::Coherent { re, im } if !(re.is_finite() && im.is_finite()) => {
                Err(invalid("initial", "coherent amplitude must be finite"))
            }
            _ => self.validate_run(),
        }
    }

    pub fn validate_convergence(&self) -> Result<(), CliError> {
        let c = &self.convergence;
        if c.n_trajectories.len() < 2 {
            return Err(invalid("convergence.n_trajectories", "needs at least two levels"));
        }
        if c.n_trajectories.windows(2).any(|w| w[1] <= w[0]) || c.n_trajectories[0] == 0 {
            return Err(invalid("convergence.n_trajectories", "must be positive and strictly increasing"));
        }
        if c.replicates == 0 {
            return Err(invalid("convergence.replicates", "must be ≥ 1"));
        }
        if !(c.ratio_min > 0.0 && c.ratio_min <= c.ratio_max) {
            return Err(invalid("convergence.ratio_min", "must satisfy 0 < ratio_min ≤ ratio_max"));
        }
        self.validate_ensemble()
    }

    pub fn validate_ho(&self) -> Result<(), CliError> {
        self.validate_damped_ho()?;
        let h = &self.ho_validate;
        positive("damped_ho.gamma", self.damped_ho.gamma)?;
        for (path, v) in [
            ("ho_validate.oracle_amplitude_t", h.oracle_amplitude_t),
            ("ho_validate.oracle_occupation_t", h.oracle_occupation_t),
            ("ho_validate.oracle_amplitude_tolerance", h.oracle_amplitude_tolerance),
            ("ho_validate.oracle_occupation_tolerance", h.oracle_occupation_tolerance),
            ("ho_validate.localization_t", h.localization_t),
            ("ho_validate.coherent_alpha0", h.coherent_alpha0),
            ("ho_validate.coherent_t", h.coherent_t),
            ("ho_validate.coherent_dt", h.coherent_dt),
            ("ho_validate.coherent_tolerance", h.coherent_tolerance),
            ("ho_validate.coherent_variance_tolerance", h.coherent_variance_tolerance),
            ("ho_validate.jump_t", h.jump_t),
        ] {
            positive(path, v)?;
        }
        for (path, dim, level) in [
            ("ho_validate.oracle_dim", h.oracle_dim, 0),
            ("ho_validate.localization_dim", h.localization_dim, h.localization_fock),
            ("ho_validate.coherent_dim", h.coherent_dim, 0),
            ("ho_validate.jump_dim", h.jump_dim, h.jump_fock),
        ] {
            if !(unravel::fock::MIN_DIM..=unravel::oracle::ORACLE_MAX_DIM).contains(&dim) || level >= dim {
                return Err(invalid(
                    path,
                    format!("must lie in [2, {}] and exceed the Fock level used", unravel::oracle::ORACLE_MAX_DIM),
                ));
            }
        }
        if h.coherent_paths < 2 || h.jump_trajectories == 0 {
            return Err(invalid("ho_validate.coherent_paths", "need at least two paths and one jump trajectory"));
        }
        if h.variance_min > h.variance_max {
            return Err(invalid("ho_validate.variance_min", "must not exceed variance_max"));
        }
        positive("run.dt", self.run.dt)
    }

    /// Trajectory options for single runs or ensembles; `default_breach` is
    /// used when no threshold is configured.
    pub fn trajectory_options(&self, default_breach: f64) -> RunOptions {
        RunOptions {
            dt: self.run.dt,
            t_final: self.run.t_final,
            unraveling: self.run.unraveling,
            scheme: self.run.scheme,
            sample_every: self.run.sample_every,
            breach_threshold: self.run.breach_threshold.unwrap_or(default_breach),
        }
    }

    pub fn single_trajectory_options(&self) -> RunOptions {
        self.trajectory_options(DEFAULT_BREACH_THRESHOLD)
    }
}

/// Annotated default configuration, as printed by `unravel defaults`.
pub const DEFAULT_CONFIG_TOML: &str = r#"# unravel run configuration. Every key is optional; shown values are defaults.

# Seed for every random stream; trajectory i of an ensemble uses stream i.
base_seed = 20240101
# Directory for CSV files and manifests (overridden by --out).
output = "out"
# Model for oracle-compare and convergence-study: "damped-ho" or "duffing".
model = "damped-ho"

[damped_ho]
omega = 1.0
gamma = 1.0       # energy relaxation rate
nbar = 0.5        # thermal occupation
dim = 15          # Fock truncation

[duffing]
gamma = 0.125
g = 0.3
beta = 1.0        # classicality scale, >= 1
dim = 64
# ansatz_coeff = 0.3535533905932738   # coefficient of QP + PQ, default sqrt(gamma)

# Initial state for oracle-compare and convergence-study.
[initial]
kind = "fock"     # or "coherent" with re = .., im = ..
n = 1

[run]
unraveling = "qsd"        # or "qj"
scheme = "split-cayley"   # or "euler-maruyama"
dt = 0.001
t_final = 2.0
n_trajectories = 1000
sample_every = 1          # section runs: must divide the steps per period
# breach_threshold = 0.001   # default 1e-3; oracle comparisons disable it

[section]
x0 = 0.5
p0 = 0.0
n_skip = 0
n_points = 300
normalize_by_beta = true

[oracle_compare]
tolerance = 0.05

[convergence]
n_trajectories = [250, 1000, 4000]
replicates = 16
ratio_min = 1.4
ratio_max = 2.9

[ho_validate]
oracle_alpha0 = 1.0
oracle_dim = 30
oracle_amplitude_t = 1.0
oracle_amplitude_tolerance = 1e-6
oracle_occupation_t = 15.0          # in units of 1/gamma
oracle_occupation_tolerance = 1e-3
localization_fock = 2
localization_t = 10.0
localization_dim = 30
variance_min = 0.45
variance_max = 0.55
coherent_alpha0 = 2.0
coherent_t = 2.0
coherent_dt = 1e-4
coherent_dim = 30
coherent_tolerance = 0.01
coherent_paths = 10000
coherent_variance_tolerance = 0.05
jump_fock = 3
jump_t = 5.0
jump_dim = 10
jump_trajectories = 200
"#;
