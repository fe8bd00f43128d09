//! TOML run configuration.
//!
//! ```toml
//! [chain]
//! inertia = 0.0
//! rho = 100.0
//! omega_s = 1.0
//! model = "stribeck"
//!
//! [coupling]
//! matrix = [[1.0, 0.0], [1.0, 1.0]]
//! motor = 0
//!
//! [simulate]
//! seed = 7
//! torque_std = 0.05
//! excitation = { kind = "sinusoid", amplitude = 50.0, frequency = 0.2, duration = 60.0 }
//!
//! [[simulate.truth]]
//! k_c = 0.85
//! k_v = 0.69
//! sigma_plus = 1.27
//! sigma_minus = 1.95
//!
//! [paths]
//! data = "friction.csv"
//! output = "report.toml"
//! ```
//!
//! Relative paths are resolved against the directory holding the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coupling::{CouplingMatrix, DEFAULT_DET_EPS};
use crate::error::{Error, Result};
use crate::identify::{ChainConfig, DecorrelationOptions, DerivativeConstraint, ModelKind};
use crate::model::{FrictionParams, InertiaParams, MotorParams};
use crate::regression::CONDITION_WARN;
use crate::simulator::{ChainTruth, ExcitationProfile, NoiseSpec, Phase2Options};

/// Chain settings; every key is optional so per-motor sections can override
/// only what differs from `[chain]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    pub inertia: Option<f64>,
    pub rho: Option<f64>,
    pub omega_s: Option<f64>,
    /// Defaults to `1e-3 · omega_s`.
    pub omega_dead: Option<f64>,
    pub model: Option<ModelKind>,
    pub constraint: Option<DerivativeConstraint>,
    pub accel_window: Option<usize>,
}

impl ChainSection {
    fn overlay(&self, over: &ChainSection) -> ChainSection {
        ChainSection {
            inertia: over.inertia.or(self.inertia),
            rho: over.rho.or(self.rho),
            omega_s: over.omega_s.or(self.omega_s),
            omega_dead: over.omega_dead.or(self.omega_dead),
            model: over.model.or(self.model),
            constraint: over.constraint.or(self.constraint),
            accel_window: over.accel_window.or(self.accel_window),
        }
    }

    fn resolve(&self) -> Result<ChainConfig> {
        let d = ChainConfig::default();
        let omega_s = self.omega_s.unwrap_or(d.omega_s);
        let c = ChainConfig {
            inertia: InertiaParams::new(self.inertia.unwrap_or(d.inertia.i_reflected))
                .map_err(|e| Error::Config(e.to_string()))?,
            rho: self.rho.unwrap_or(d.rho),
            omega_s,
            omega_dead: self.omega_dead.unwrap_or(1e-3 * omega_s),
            model: self.model.unwrap_or(d.model),
            constraint: self.constraint.unwrap_or(d.constraint),
            accel_window: self.accel_window.unwrap_or(d.accel_window),
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    /// Row-major `T`, mapping motor velocities to joint velocities.
    pub matrix: Vec<Vec<f64>>,
    /// Motor identified by `identify-coupled` when none is given on the
    /// command line, and the moving motor in coupled simulations.
    #[serde(default)]
    pub motor: usize,
    #[serde(default = "default_block_tolerance")]
    pub block_tolerance: f64,
    #[serde(default = "default_max_reject_fraction")]
    pub max_reject_fraction: f64,
    #[serde(default = "default_det_eps")]
    pub det_eps: f64,
}

fn default_block_tolerance() -> f64 {
    DecorrelationOptions::default().block_tolerance
}

fn default_max_reject_fraction() -> f64 {
    DecorrelationOptions::default().max_reject_fraction
}

fn default_det_eps() -> f64 {
    DEFAULT_DET_EPS
}

impl CouplingSection {
    pub fn matrix(&self) -> Result<CouplingMatrix> {
        CouplingMatrix::from_rows_with_eps(&self.matrix, self.det_eps)
    }

    pub fn decorrelation(&self) -> DecorrelationOptions {
        DecorrelationOptions {
            block_tolerance: self.block_tolerance,
            max_reject_fraction: self.max_reject_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSection {
    /// Fits whose `cond(XᵀX)` exceeds this are logged as ill-conditioned.
    #[serde(default = "default_condition_warn")]
    pub condition_warn: f64,
}

fn default_condition_warn() -> f64 {
    CONDITION_WARN
}

impl Default for SolveSection {
    fn default() -> Self {
        Self {
            condition_warn: CONDITION_WARN,
        }
    }
}

/// Generating parameters of one chain. Omitted motor values leave the chain
/// without a phase-2 record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthSection {
    pub k_c: f64,
    pub k_v: f64,
    pub sigma_plus: f64,
    pub sigma_minus: f64,
    pub k_pwm_star: Option<f64>,
    pub tau_0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub torque_std: f64,
    #[serde(default)]
    pub velocity_std: f64,
    /// Velocity profile of the friction record, deg/s.
    pub excitation: ExcitationProfile,
    /// PWM profile of the motor record.
    pub motor_excitation: Option<ExcitationProfile>,
    /// One entry per chain (per motor for coupled groups).
    pub truth: Vec<TruthSection>,
    #[serde(default)]
    pub motor_encoders: bool,
    #[serde(default)]
    pub omega0: f64,
    #[serde(default)]
    pub load_damping: f64,
}

impl SimulateSection {
    pub fn noise(&self) -> NoiseSpec {
        NoiseSpec {
            torque_std: self.torque_std,
            velocity_std: self.velocity_std,
            seed: self.seed,
        }
    }

    /// Noise of the motor record; its stream is independent of the friction
    /// record's.
    pub fn motor_noise(&self) -> NoiseSpec {
        NoiseSpec {
            seed: self.seed.wrapping_add(1),
            ..self.noise()
        }
    }

    pub fn phase2_options(&self, c: &ChainConfig) -> Phase2Options {
        Phase2Options {
            omega0: self.omega0,
            omega_dead: c.omega_dead,
            load_damping: self.load_damping,
            substeps: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    pub data: Option<PathBuf>,
    pub motor_data: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub curve: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub chain: ChainSection,
    /// Per-motor overrides of `[chain]`, by motor index.
    #[serde(default)]
    pub motors: Vec<ChainSection>,
    pub coupling: Option<CouplingSection>,
    #[serde(default)]
    pub solve: SolveSection,
    pub simulate: Option<SimulateSection>,
    #[serde(default)]
    pub paths: PathsSection,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    /// Resolves `p` against the config file's directory.
    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn chain_for(&self, k: usize) -> Result<ChainConfig> {
        match self.motors.get(k) {
            Some(over) => self.chain.overlay(over).resolve(),
            None => self.chain.resolve(),
        }
        .map_err(|e| match e {
            Error::Config(m) if !self.motors.is_empty() => Error::Config(format!("motor {k}: {m}")),
            Error::Domain(m) | Error::Config(m) => Error::Config(m),
            other => other,
        })
    }

    pub fn coupling_matrix(&self) -> Result<Option<CouplingMatrix>> {
        self.coupling.as_ref().map(CouplingSection::matrix).transpose()
    }

    /// Chain count: the coupling dimension, else the number of truth
    /// entries, else one.
    pub fn chain_count(&self) -> usize {
        if let Some(c) = &self.coupling {
            return c.matrix.len();
        }
        self.simulate.as_ref().map_or(1, |s| s.truth.len().max(1))
    }

    pub fn truths(&self) -> Result<Vec<ChainTruth>> {
        let sim = self
            .simulate
            .as_ref()
            .ok_or_else(|| Error::Config("missing [simulate] section".into()))?;
        sim.truth
            .iter()
            .enumerate()
            .map(|(k, t)| {
                let c = self.chain_for(k)?;
                let friction = FrictionParams::new(t.k_c, t.k_v, t.sigma_plus, t.sigma_minus, c.omega_s)
                    .map_err(|e| Error::Config(format!("simulate.truth[{k}]: {e}")))?;
                let motor = MotorParams::new(t.k_pwm_star.unwrap_or(0.0), t.tau_0.unwrap_or(0.0), c.rho)
                    .map_err(|e| Error::Config(format!("simulate.truth[{k}]: {e}")))?;
                Ok(ChainTruth {
                    friction,
                    motor,
                    inertia: c.inertia,
                })
            })
            .collect()
    }

    /// Schema and invertibility checks; touches no data files.
    pub fn validate(&self) -> Result<()> {
        let n = self.chain_count();
        if self.motors.len() > n {
            return Err(Error::Config(format!(
                "{} [[motors]] sections for {n} chains",
                self.motors.len()
            )));
        }
        for k in 0..n {
            self.chain_for(k)?;
        }
        if !(self.solve.condition_warn.is_finite() && self.solve.condition_warn > 0.0) {
            return Err(Error::Config("solve.condition_warn must be positive".into()));
        }
        if let Some(c) = &self.coupling {
            if c.matrix.is_empty() || c.matrix.iter().any(|r| r.len() != c.matrix.len()) {
                return Err(Error::Config("coupling.matrix must be square and non-empty".into()));
            }
            if c.motor >= c.matrix.len() {
                return Err(Error::Config(format!(
                    "coupling.motor = {} out of range for a {}x{} matrix",
                    c.motor,
                    c.matrix.len(),
                    c.matrix.len()
                )));
            }
            if !(c.block_tolerance >= 0.0) || !(0.0..=1.0).contains(&c.max_reject_fraction) {
                return Err(Error::Config(
                    "coupling.block_tolerance must be >= 0 and max_reject_fraction in [0, 1]".into(),
                ));
            }
            c.matrix()?;
        }
        if let Some(s) = &self.simulate {
            s.excitation.validate()?;
            if let Some(m) = &s.motor_excitation {
                m.validate()?;
            }
            if s.truth.is_empty() {
                return Err(Error::Config("simulate.truth needs at least one entry".into()));
            }
            if let Some(c) = &self.coupling {
                if s.truth.len() != c.matrix.len() {
                    return Err(Error::Config(format!(
                        "simulate.truth has {} entries for a {}-motor coupling",
                        s.truth.len(),
                        c.matrix.len()
                    )));
                }
            }
            if s.motor_excitation.is_some() && s.truth.iter().any(|t| t.k_pwm_star.is_none()) {
                return Err(Error::Config("motor_excitation requires k_pwm_star in every truth entry".into()));
            }
            if !(s.torque_std >= 0.0 && s.velocity_std >= 0.0) {
                return Err(Error::Config("noise standard deviations must be >= 0".into()));
            }
            self.truths()?;
        }
        Ok(())
    }

    /// Existing input file, from an explicit override or the config.
    pub fn input(&self, explicit: Option<&Path>, configured: Option<&PathBuf>, what: &str) -> Result<Option<PathBuf>> {
        let path = match (explicit, configured) {
            (Some(p), _) => p.to_path_buf(),
            (None, Some(p)) => self.resolve_path(p),
            (None, None) => return Ok(None),
        };
        if !path.is_file() {
            return Err(Error::Config(format!("{what} file {} does not exist", path.display())));
        }
        Ok(Some(path))
    }
}
