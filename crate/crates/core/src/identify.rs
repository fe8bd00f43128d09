//! Two-phase identification: friction with the motor off, then the PWM gain
//! and offset with friction compensated. Coupled groups are handled motor by
//! motor after projecting joint measurements onto one transmission chain.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::coupling::CouplingMatrix;
use crate::dataset::{CoupledDataset, Dataset, DatasetMeta, Sample};
use crate::error::{Error, Result};
use crate::model::{FrictionParams, InertiaParams, MotorParams};
use crate::regression::{
    build_cv_design, build_pwm_design, build_stribeck_design, solve_constrained_lsq, solve_lsq, DesignSystem,
    FitResult,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    CoulombViscous,
    Stribeck,
    StribeckConstrained,
}

/// Which one-sided slopes of the friction magnitude are forced to zero at
/// zero velocity in the constrained Stribeck fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeConstraint {
    #[default]
    Right,
    Left,
    Both,
}

impl DerivativeConstraint {
    /// Rows over physical `(K_c, K_v, σ⁺, σ⁻)`.
    ///
    /// For `ω > 0`, `d|τ_f|/dω = K_v - (σ⁺ - K_c)/ω_s · e^{-ω/ω_s}`; at `0⁺`
    /// this vanishes when `K_c/ω_s + K_v - σ⁺/ω_s = 0`. The left side is the
    /// mirror image with `σ⁻`.
    pub fn rows(self, omega_s: f64) -> DMatrix<f64> {
        let right = [1.0 / omega_s, 1.0, -1.0 / omega_s, 0.0];
        let left = [1.0 / omega_s, 1.0, 0.0, -1.0 / omega_s];
        let rows: Vec<[f64; 4]> = match self {
            Self::Right => vec![right],
            Self::Left => vec![left],
            Self::Both => vec![right, left],
        };
        DMatrix::from_row_iterator(rows.len(), 4, rows.into_iter().flatten())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub inertia: InertiaParams,
    pub rho: f64,
    pub omega_s: f64,
    pub omega_dead: f64,
    pub model: ModelKind,
    pub constraint: DerivativeConstraint,
    /// Moving-average window used when accelerations must be derived.
    pub accel_window: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            inertia: InertiaParams::default(),
            rho: 1.0,
            omega_s: 1.0,
            omega_dead: 1e-3,
            model: ModelKind::Stribeck,
            constraint: DerivativeConstraint::Right,
            accel_window: 5,
        }
    }
}

impl ChainConfig {
    pub fn with_model(model: ModelKind) -> Self {
        Self {
            model,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_s.is_finite() && self.omega_s > 0.0) {
            return Err(Error::Config(format!("omega_s must be positive, got {}", self.omega_s)));
        }
        if !(self.omega_dead.is_finite() && self.omega_dead >= 0.0) {
            return Err(Error::Config(format!("omega_dead must be non-negative, got {}", self.omega_dead)));
        }
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(Error::Config(format!("rho must be positive, got {}", self.rho)));
        }
        InertiaParams::new(self.inertia.i_reflected).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrictionReport {
    pub model: ModelKind,
    pub params: FrictionParams,
    /// Static levels at or above the Coulomb level.
    pub physical: bool,
    pub fit: FitResult,
    /// Model curve `(ω, τ_f)` over the excited velocity range.
    pub fitted_curve: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotorReport {
    pub params: MotorParams,
    pub fit: FitResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub motor_index: usize,
    pub condition: f64,
    pub rejected_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationReport {
    pub shaft: String,
    pub friction: FrictionReport,
    pub motor: Option<MotorReport>,
    pub coupling: Option<CouplingReport>,
}

/// One retained sample of a friction fit, for plotting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub omega: f64,
    pub tau_model: f64,
    pub tau_measured: f64,
}

const CURVE_POINTS: usize = 201;

fn friction_design(d: &Dataset, c: &ChainConfig) -> Result<DesignSystem> {
    match c.model {
        ModelKind::CoulombViscous => build_cv_design(d, &c.inertia, c.omega_dead),
        ModelKind::Stribeck | ModelKind::StribeckConstrained => {
            build_stribeck_design(d, &c.inertia, c.omega_s, c.omega_dead)
        }
    }
}

fn curve(p: &FrictionParams, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    if !(hi > lo) {
        return Vec::new();
    }
    (0..CURVE_POINTS)
        .map(|k| lo + (hi - lo) * k as f64 / (CURVE_POINTS - 1) as f64)
        .filter(|w| *w != 0.0)
        .map(|w| (w, p.torque(w)))
        .collect()
}

/// Phase 1. The record must have the motor switched off.
pub fn identify_friction(d: &Dataset, c: &ChainConfig) -> Result<FrictionReport> {
    c.validate()?;
    if d.is_empty() {
        return Err(Error::EmptyDesign);
    }
    let driven: Vec<&Sample> = d.iter().filter(|s| s.pwm != 0.0).collect();
    if let Some(first) = driven.first() {
        return Err(Error::NonZeroPwm {
            count: driven.len(),
            first_time: first.t,
        });
    }
    let moving = d.iter().filter(|s| s.omega.abs() >= c.omega_dead && s.omega != 0.0);
    let (pos, neg) = moving.fold((0usize, 0usize), |(p, n), s| {
        if s.omega > 0.0 {
            (p + 1, n)
        } else {
            (p, n + 1)
        }
    });
    if pos == 0 || neg == 0 {
        return Err(Error::SignCoverage(format!(
            "{pos} samples with positive and {neg} with negative velocity"
        )));
    }

    let design = friction_design(d, c)?;
    let fit = match c.model {
        ModelKind::StribeckConstrained => {
            let a = design.constraint_from_physical(&c.constraint.rows(c.omega_s));
            let b = DVector::zeros(a.nrows());
            solve_constrained_lsq(&design, &a, &b)?
        }
        _ => solve_lsq(&design)?,
    };
    let params = match c.model {
        ModelKind::CoulombViscous => {
            let (k_c, k_v) = (fit.params[0], fit.params[1]);
            FrictionParams {
                k_c,
                k_v,
                sigma_plus: k_c,
                sigma_minus: k_c,
                omega_s: c.omega_s,
            }
        }
        _ => FrictionParams {
            k_c: fit.params[0],
            k_v: fit.params[1],
            sigma_plus: fit.params[2],
            sigma_minus: fit.params[3],
            omega_s: c.omega_s,
        },
    };
    let (lo, hi) = design
        .source_rows()
        .iter()
        .map(|&r| d.samples()[r].omega)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), w| (lo.min(w), hi.max(w)));
    Ok(FrictionReport {
        model: c.model,
        physical: params.is_physical(),
        fitted_curve: curve(&params, lo, hi),
        params,
        fit,
    })
}

/// Phase 2, given friction from phase 1.
pub fn identify_motor(d: &Dataset, p: &FrictionParams, c: &ChainConfig) -> Result<MotorReport> {
    c.validate()?;
    if d.is_empty() {
        return Err(Error::EmptyDesign);
    }
    let design = build_pwm_design(d, p, &c.inertia, c.omega_dead)?;
    let fit = solve_lsq(&design)?;
    let params = MotorParams {
        tau_0: fit.params[0],
        k_pwm_star: fit.params[1],
        rho: c.rho,
    };
    Ok(MotorReport { params, fit })
}

/// Friction phase and, when a driven record is supplied, the motor phase.
pub fn identify_chain(friction_data: &Dataset, motor_data: Option<&Dataset>, c: &ChainConfig) -> Result<IdentificationReport> {
    let friction = identify_friction(friction_data, c)?;
    let motor = motor_data
        .map(|d| identify_motor(d, &friction.params, c))
        .transpose()?;
    Ok(IdentificationReport {
        shaft: friction_data.meta.shaft.clone(),
        friction,
        motor,
        coupling: None,
    })
}

/// Retained samples of a friction fit with the model and measured torques.
pub fn friction_points(d: &Dataset, report: &FrictionReport, c: &ChainConfig) -> Vec<CurvePoint> {
    d.iter()
        .filter(|s| s.omega != 0.0 && s.omega.abs() >= c.omega_dead)
        .map(|s| CurvePoint {
            omega: s.omega,
            tau_model: report.params.torque(s.omega),
            tau_measured: s.tau + c.inertia.i_reflected * s.omega_dot,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecorrelationOptions {
    /// Largest sibling motor speed (deg/s) still considered blocked.
    pub block_tolerance: f64,
    /// Fraction of rejected samples above which the record is refused.
    pub max_reject_fraction: f64,
}

impl Default for DecorrelationOptions {
    fn default() -> Self {
        Self {
            block_tolerance: 0.1,
            max_reject_fraction: 0.05,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Decorrelated {
    pub dataset: Dataset,
    pub rejected: usize,
    pub rejected_spans: Vec<(f64, f64)>,
}

fn spans(times: &[f64], rejected: &[bool]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, &r) in rejected.iter().enumerate() {
        match (r, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((times[s], times[i - 1]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((times[s], times[times.len() - 1]));
    }
    out
}

/// Single-shaft record of motor `k`: velocity from the motor encoder when
/// present (else `T⁻¹ ω_j`), torque as the joint torques projected on column
/// `k` of `T`. Samples where a sibling motor moves are rejected.
pub fn decorrelate(
    joint_data: &CoupledDataset,
    t: &CouplingMatrix,
    k: usize,
    window: usize,
    opts: &DecorrelationOptions,
) -> Result<Decorrelated> {
    let n = t.dim();
    if joint_data.channels() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: joint_data.channels(),
        });
    }
    if k >= n {
        return Err(Error::IndexOutOfRange { index: k, n });
    }
    let mut samples = Vec::with_capacity(joint_data.len());
    let mut rejected = Vec::with_capacity(joint_data.len());
    for s in joint_data.samples() {
        let omega_m = match &s.omega_m {
            Some(w) => w.clone(),
            None => t.motor_velocity_from_joints(&s.omega_j)?,
        };
        let omega_dot = match &s.omega_dot_j {
            Some(a) => t.motor_velocity_from_joints(a)?[k],
            None => 0.0,
        };
        let blocked = omega_m
            .iter()
            .enumerate()
            .all(|(j, w)| j == k || w.abs() <= opts.block_tolerance);
        rejected.push(!blocked);
        samples.push(Sample {
            t: s.t,
            pwm: s.pwm[k],
            omega: omega_m[k],
            omega_dot,
            tau: t.project_joint_torque_to_motor(k, &s.tau_j)?,
        });
    }
    let meta = DatasetMeta {
        shaft: format!("motor-{k}"),
        sample_rate: joint_data.meta.sample_rate,
        derived_acceleration: false,
        dropped_rows: 0,
    };
    let mut dataset = Dataset::new(samples, meta)?;
    if !joint_data.has_acceleration() {
        dataset = dataset.with_derived_acceleration(window);
    }
    let total = rejected.len();
    let count = rejected.iter().filter(|r| **r).count();
    let times: Vec<f64> = dataset.iter().map(|s| s.t).collect();
    let rejected_spans = spans(&times, &rejected);
    if total > 0 && count as f64 > opts.max_reject_fraction * total as f64 {
        return Err(Error::BlockedMotorViolation {
            rejected: count,
            total,
            limit: 100.0 * opts.max_reject_fraction,
            spans: rejected_spans,
        });
    }
    if count > 0 {
        let meta = dataset.meta.clone();
        let kept = dataset
            .iter()
            .zip(&rejected)
            .filter(|(_, r)| !**r)
            .map(|(s, _)| *s)
            .collect();
        dataset = Dataset::new(kept, meta)?;
    }
    Ok(Decorrelated {
        dataset,
        rejected: count,
        rejected_spans,
    })
}

/// Motor-wise identification of chain `k` in a coupled group. The friction
/// record has every motor unpowered and only motor `k` moving; the optional
/// motor record drives motor `k` with its siblings blocked.
pub fn identify_coupled_motor(
    friction_data: &CoupledDataset,
    motor_data: Option<&CoupledDataset>,
    t: &CouplingMatrix,
    k: usize,
    c: &ChainConfig,
    opts: &DecorrelationOptions,
) -> Result<IdentificationReport> {
    let phase1 = decorrelate(friction_data, t, k, c.accel_window, opts)?;
    let phase2 = motor_data
        .map(|d| decorrelate(d, t, k, c.accel_window, opts))
        .transpose()?;
    let mut report = identify_chain(&phase1.dataset, phase2.as_ref().map(|p| &p.dataset), c)?;
    report.coupling = Some(CouplingReport {
        motor_index: k,
        condition: t.condition(),
        rejected_samples: phase1.rejected + phase2.map_or(0, |p| p.rejected),
    });
    Ok(report)
}
