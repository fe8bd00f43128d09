//! Synthetic data with known ground truth, for closing the loop on the
//! identification pipeline.
//!
//! Phase-1 data uses a prescribed velocity (the joint is driven externally).
//! Phase-2 data integrates the shaft under PWM drive with explicit Euler.
//! Coupled data embeds one active motor chain into joint space while the
//! sibling motors are held still.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::coupling::CouplingMatrix;
use crate::dataset::{CoupledDataset, CoupledSample, Dataset, DatasetMeta, Sample};
use crate::error::{Error, Result};
use crate::model::{joint_torque, FrictionParams, InertiaParams, MotorParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    Sinusoid,
    Triangle,
    /// Three harmonics `f, 2f, 3f` of amplitude `A/3` with Schroeder phases.
    Multisine,
    /// Holds `amplitude` for the whole run.
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcitationProfile {
    pub kind: ProfileKind,
    /// deg/s for velocity profiles, PWM units for PWM profiles.
    pub amplitude: f64,
    /// Hz
    pub frequency: f64,
    /// s
    pub duration: f64,
    /// Hz
    #[serde(default = "default_rate")]
    pub sample_rate: f64,
}

fn default_rate() -> f64 {
    100.0
}

impl ExcitationProfile {
    pub fn sinusoid(amplitude: f64, frequency: f64, duration: f64, sample_rate: f64) -> Self {
        Self {
            kind: ProfileKind::Sinusoid,
            amplitude,
            frequency,
            duration,
            sample_rate,
        }
    }

    pub fn constant(level: f64, duration: f64, sample_rate: f64) -> Self {
        Self {
            kind: ProfileKind::Constant,
            amplitude: level,
            frequency: 0.0,
            duration,
            sample_rate,
        }
    }

    fn highest_frequency(&self) -> f64 {
        match self.kind {
            ProfileKind::Multisine => 3.0 * self.frequency,
            ProfileKind::Constant => 0.0,
            _ => self.frequency,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.amplitude, self.frequency, self.duration, self.sample_rate]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidProfile("non-finite field".into()));
        }
        if self.duration <= 0.0 {
            return Err(Error::InvalidProfile(format!("duration must be positive, got {}", self.duration)));
        }
        if self.frequency < 0.0 || (self.kind != ProfileKind::Constant && self.frequency == 0.0) {
            return Err(Error::InvalidProfile(format!("invalid frequency {}", self.frequency)));
        }
        if !(self.sample_rate > 2.0 * self.highest_frequency()) || self.sample_rate <= 0.0 {
            return Err(Error::InvalidProfile(format!(
                "sample rate {} Hz must exceed twice the highest frequency {} Hz",
                self.sample_rate,
                self.highest_frequency()
            )));
        }
        Ok(())
    }

    pub fn sample_count(&self) -> usize {
        (self.duration * self.sample_rate).round() as usize
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.sample_count()).map(move |k| k as f64 / self.sample_rate)
    }

    /// Profile value and time derivative at `t`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let a = self.amplitude;
        let f = self.frequency;
        match self.kind {
            ProfileKind::Constant => (a, 0.0),
            ProfileKind::Sinusoid => {
                let w = 2.0 * PI * f;
                (a * (w * t).sin(), a * w * (w * t).cos())
            }
            ProfileKind::Triangle => {
                let phase = (t * f).rem_euclid(1.0);
                let slope = 4.0 * a * f;
                if phase < 0.25 {
                    (4.0 * a * phase, slope)
                } else if phase < 0.75 {
                    (2.0 * a - 4.0 * a * phase, -slope)
                } else {
                    (4.0 * a * phase - 4.0 * a, slope)
                }
            }
            ProfileKind::Multisine => (1..=3).fold((0.0, 0.0), |(v, d), k| {
                let k = k as f64;
                let w = 2.0 * PI * f * k;
                let phi = -PI * k * (k - 1.0) / 3.0;
                (v + a / 3.0 * (w * t + phi).sin(), d + a / 3.0 * w * (w * t + phi).cos())
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// N·m
    pub torque_std: f64,
    /// deg/s
    pub velocity_std: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            torque_std: 0.05,
            velocity_std: 0.1,
            seed: 0,
        }
    }
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self {
            torque_std: 0.0,
            velocity_std: 0.0,
            seed: 0,
        }
    }

    pub fn torque_only(torque_std: f64, seed: u64) -> Self {
        Self {
            torque_std,
            velocity_std: 0.0,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.torque_std >= 0.0 && self.velocity_std >= 0.0) {
            return Err(Error::InvalidProfile("noise standard deviations must be non-negative".into()));
        }
        Ok(())
    }
}

/// Additive Gaussian noise; draws nothing for a zero deviation.
struct NoiseSource {
    rng: ChaCha8Rng,
    torque: Option<Normal<f64>>,
    velocity: Option<Normal<f64>>,
}

impl NoiseSource {
    fn new(n: &NoiseSpec) -> Result<Self> {
        n.validate()?;
        let normal = |std: f64| (std > 0.0).then(|| Normal::new(0.0, std).expect("validated std"));
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(n.seed),
            torque: normal(n.torque_std),
            velocity: normal(n.velocity_std),
        })
    }

    fn torque(&mut self) -> f64 {
        match &self.torque {
            Some(d) => d.sample(&mut self.rng),
            None => 0.0,
        }
    }

    fn velocity(&mut self) -> f64 {
        match &self.velocity {
            Some(d) => d.sample(&mut self.rng),
            None => 0.0,
        }
    }
}

fn meta(shaft: &str, e: &ExcitationProfile) -> DatasetMeta {
    DatasetMeta {
        shaft: shaft.into(),
        sample_rate: e.sample_rate,
        derived_acceleration: false,
        dropped_rows: 0,
    }
}

/// Phase-1 data: PWM off, velocity prescribed by `e`, torque read at the
/// gearbox output.
pub fn gen_phase1(p: &FrictionParams, i: &InertiaParams, e: &ExcitationProfile, n: &NoiseSpec) -> Result<Dataset> {
    p.validate()?;
    e.validate()?;
    let mut noise = NoiseSource::new(n)?;
    let samples = e
        .times()
        .map(|t| {
            let (omega, omega_dot) = e.eval(t);
            let tau = -i.i_reflected * omega_dot + p.torque(omega);
            Sample {
                t,
                pwm: 0.0,
                omega: omega + noise.velocity(),
                omega_dot,
                tau: tau + noise.torque(),
            }
        })
        .collect();
    Dataset::new(samples, meta("phase1", e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phase2Options {
    pub omega0: f64,
    /// Velocities below this magnitude may stick.
    pub omega_dead: f64,
    /// External viscous load `τ_load = c·ω` (N·m·s/deg).
    pub load_damping: f64,
    /// Euler sub-steps per sample; `None` picks a stable count from the
    /// shaft's time constant.
    pub substeps: Option<usize>,
}

impl Phase2Options {
    pub fn for_friction(p: &FrictionParams) -> Self {
        Self {
            omega0: 0.0,
            omega_dead: 1e-3 * p.omega_s,
            load_damping: 0.0,
            substeps: None,
        }
    }
}

const MAX_SUBSTEPS: usize = 1_000_000;

struct Shaft<'a> {
    m: &'a MotorParams,
    p: &'a FrictionParams,
    i: f64,
    opts: &'a Phase2Options,
    breakaway: f64,
}

impl Shaft<'_> {
    fn stuck(&self, omega: f64, drive: f64) -> bool {
        omega.abs() < self.opts.omega_dead && drive.abs() < self.breakaway
    }

    /// Acceleration at `omega` under `pwm`, and whether the shaft sticks.
    fn accel(&self, omega: f64, pwm: f64) -> (f64, bool) {
        let drive = self.m.torque(pwm);
        if self.stuck(omega, drive) {
            return (0.0, true);
        }
        let load = self.opts.load_damping * omega;
        ((drive + self.p.torque(omega) - load) / self.i, false)
    }
}

pub fn gen_phase2(
    m: &MotorParams,
    p: &FrictionParams,
    i: &InertiaParams,
    pwm_profile: &ExcitationProfile,
    n: &NoiseSpec,
) -> Result<Dataset> {
    gen_phase2_with(m, p, i, pwm_profile, n, &Phase2Options::for_friction(p))
}

/// Phase-2 data: PWM prescribed by `pwm_profile`, shaft velocity integrated.
/// Recorded accelerations are the model accelerations at each sample, so a
/// noiseless record satisfies the forward model exactly.
pub fn gen_phase2_with(
    m: &MotorParams,
    p: &FrictionParams,
    i: &InertiaParams,
    pwm_profile: &ExcitationProfile,
    n: &NoiseSpec,
    opts: &Phase2Options,
) -> Result<Dataset> {
    m.validate()?;
    p.validate()?;
    pwm_profile.validate()?;
    if i.i_reflected <= 0.0 {
        return Err(Error::DegenerateIntegration(
            "zero reflected inertia; use a prescribed-velocity record instead".into(),
        ));
    }
    let mut noise = NoiseSource::new(n)?;
    let dt = 1.0 / pwm_profile.sample_rate;
    let stiffness = p.k_v + (p.sigma_plus.max(p.sigma_minus) - p.k_c).max(0.0) / p.omega_s + opts.load_damping;
    let substeps = match opts.substeps {
        Some(s) => s.max(1),
        None => ((dt * stiffness / i.i_reflected / 0.05).ceil() as usize).max(1),
    };
    if substeps > MAX_SUBSTEPS {
        return Err(Error::DegenerateIntegration(format!(
            "{substeps} Euler sub-steps per sample required; inertia too small for this rate"
        )));
    }
    let h = dt / substeps as f64;
    let shaft = Shaft {
        m,
        p,
        i: i.i_reflected,
        opts,
        breakaway: p.sigma_plus.max(p.sigma_minus).max(p.k_c),
    };

    let mut omega = opts.omega0;
    let mut samples = Vec::with_capacity(pwm_profile.sample_count());
    for (k, t) in pwm_profile.times().enumerate() {
        let (pwm, _) = pwm_profile.eval(t);
        let (omega_dot, stuck) = shaft.accel(omega, pwm);
        if stuck {
            omega = 0.0;
        }
        let tau = joint_torque(m, p, i, pwm, omega, omega_dot);
        samples.push(Sample {
            t,
            pwm,
            omega: omega + noise.velocity(),
            omega_dot,
            tau: tau + noise.torque(),
        });
        for s in 0..substeps {
            let ts = k as f64 * dt + s as f64 * h;
            let (pwm_s, _) = pwm_profile.eval(ts);
            let (acc, stuck) = shaft.accel(omega, pwm_s);
            if stuck {
                omega = 0.0;
                continue;
            }
            let next = omega + h * acc;
            // friction cannot reverse the motion on its own
            if next * omega < 0.0 && m.torque(pwm_s).abs() < shaft.breakaway {
                omega = 0.0;
            } else {
                omega = next;
            }
        }
    }
    Dataset::new(samples, meta("phase2", pwm_profile))
}

/// Ground truth of one motor chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainTruth {
    pub friction: FrictionParams,
    pub motor: MotorParams,
    pub inertia: InertiaParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoupledPhase {
    /// PWM off, active motor shaft driven externally.
    Friction,
    /// Active motor driven by PWM.
    Motor,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledOptions {
    pub phase: CoupledPhase,
    /// Also record motor-encoder velocities.
    pub motor_encoders: bool,
}

/// Joint torques produced by torque `tau_k` on motor `k` while the siblings
/// are blocked: the minimum-norm joint torque whose projection on chain `k`
/// is `tau_k`. The sibling reaction torques are then `T^⊤ τ_j`.
pub fn blocked_joint_torque(t: &CouplingMatrix, k: usize, tau_k: f64) -> Vec<f64> {
    let col = t.matrix().column(k);
    let norm2 = col.norm_squared();
    col.iter().map(|c| c * tau_k / norm2).collect()
}

/// Coupled-group record with only motor `k` moving. Joint quantities are
/// mapped through `T`; noise is added in joint space.
pub fn gen_coupled(
    t: &CouplingMatrix,
    chains: &[ChainTruth],
    k: usize,
    e: &ExcitationProfile,
    n: &NoiseSpec,
    opts: &CoupledOptions,
) -> Result<CoupledDataset> {
    let dim = t.dim();
    if k >= dim {
        return Err(Error::IndexOutOfRange { index: k, n: dim });
    }
    if chains.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: chains.len(),
        });
    }
    let chain = &chains[k];
    let clean = match opts.phase {
        CoupledPhase::Friction => gen_phase1(&chain.friction, &chain.inertia, e, &NoiseSpec::none())?,
        CoupledPhase::Motor => gen_phase2(&chain.motor, &chain.friction, &chain.inertia, e, &NoiseSpec::none())?,
    };
    let mut noise = NoiseSource::new(n)?;
    let unit = |v: f64| {
        let mut x = vec![0.0; dim];
        x[k] = v;
        x
    };
    let mut samples = Vec::with_capacity(clean.len());
    for s in clean.iter() {
        let omega_m = unit(s.omega);
        let mut omega_j = t.motor_to_joint_velocity(&omega_m)?;
        let omega_dot_j = t.motor_to_joint_velocity(&unit(s.omega_dot))?;
        let mut tau_j = blocked_joint_torque(t, k, s.tau);
        for w in omega_j.iter_mut() {
            *w += noise.velocity();
        }
        for tau in tau_j.iter_mut() {
            *tau += noise.torque();
        }
        let omega_m = opts
            .motor_encoders
            .then(|| omega_m.iter().map(|w| w + noise.velocity()).collect());
        samples.push(CoupledSample {
            t: s.t,
            pwm: unit(s.pwm),
            omega_j,
            tau_j,
            omega_dot_j: Some(omega_dot_j),
            omega_m,
        });
    }
    CoupledDataset::new(dim, samples, meta(&format!("coupled-motor-{k}"), e))
}
