//! Browser demo over `jointid`. The plain functions below are what the page
//! calls through the wasm wrappers; they return serializable structs so the
//! native tests can check them directly.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use serde::Serialize;

use jointid::coupling::CouplingMatrix;
use jointid::identify::{friction_points, identify_friction, ChainConfig, ModelKind};
use jointid::model::{FrictionParams, InertiaParams};
use jointid::simulator::{gen_phase1, ExcitationProfile, NoiseSpec};

#[derive(Debug, Clone, Serialize)]
pub struct Curve {
    pub omega: Vec<f64>,
    pub tau: Vec<f64>,
}

/// Friction torque sampled at `n` evenly spaced velocities in `[lo, hi]`.
pub fn friction_curve(p: &FrictionParams, lo: f64, hi: f64, n: usize) -> Result<Curve, String> {
    p.validate().map_err(|e| e.to_string())?;
    if !(hi > lo) || n < 2 {
        return Err("need hi > lo and at least two points".into());
    }
    let omega: Vec<f64> = (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect();
    let tau = omega.iter().map(|w| p.torque(*w)).collect();
    Ok(Curve { omega, tau })
}

#[derive(Debug, Clone, Serialize)]
pub struct FitSummary {
    pub model: ModelKind,
    pub k_c: f64,
    pub k_v: f64,
    pub sigma_plus: f64,
    pub sigma_minus: f64,
    pub residual_rms: f64,
    pub condition_number: f64,
    pub physical: bool,
    pub curve: Curve,
}

#[derive(Debug, Clone, Serialize)]
pub struct Identification {
    /// Retained samples, thinned for plotting: velocity and measured friction.
    pub points: Curve,
    pub fits: Vec<FitSummary>,
}

const MAX_POINTS: usize = 1500;

/// Simulates a friction sweep of `truth` with torque noise and fits every
/// model kind to it.
pub fn simulate_and_identify(
    truth: &FrictionParams,
    amplitude: f64,
    torque_std: f64,
    seed: u64,
) -> Result<Identification, String> {
    let e = ExcitationProfile::sinusoid(amplitude, 0.2, 50.0, 100.0);
    let noise = NoiseSpec::torque_only(torque_std, seed);
    let d = gen_phase1(truth, &InertiaParams::default(), &e, &noise).map_err(|e| e.to_string())?;
    let mut fits = Vec::new();
    let mut points = None;
    for model in [ModelKind::CoulombViscous, ModelKind::Stribeck, ModelKind::StribeckConstrained] {
        let c = ChainConfig {
            omega_s: truth.omega_s,
            omega_dead: 1e-3 * truth.omega_s,
            ..ChainConfig::with_model(model)
        };
        let r = identify_friction(&d, &c).map_err(|e| e.to_string())?;
        if points.is_none() {
            let all = friction_points(&d, &r, &c);
            let step = all.len().div_ceil(MAX_POINTS).max(1);
            let kept: Vec<_> = all.iter().step_by(step).collect();
            points = Some(Curve {
                omega: kept.iter().map(|p| p.omega).collect(),
                tau: kept.iter().map(|p| p.tau_measured).collect(),
            });
        }
        let (omega, tau) = r.fitted_curve.iter().copied().unzip();
        fits.push(FitSummary {
            model,
            k_c: r.params.k_c,
            k_v: r.params.k_v,
            sigma_plus: r.params.sigma_plus,
            sigma_minus: r.params.sigma_minus,
            residual_rms: r.fit.residual_rms,
            condition_number: r.fit.condition_number,
            physical: r.physical,
            curve: Curve { omega, tau },
        });
    }
    Ok(Identification {
        points: points.unwrap_or(Curve {
            omega: vec![],
            tau: vec![],
        }),
        fits,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Transform {
    pub omega_j: Vec<f64>,
    pub tau_j: Vec<f64>,
    /// `τ_m · ω_m` and `τ_j · ω_j`.
    pub power_motor: f64,
    pub power_joint: f64,
    pub condition: f64,
}

/// Maps motor velocities and torques to joint space through row-major `t`.
pub fn coupling_transform(t: &[f64], omega_m: &[f64], tau_m: &[f64]) -> Result<Transform, String> {
    let n = omega_m.len();
    if t.len() != n * n || tau_m.len() != n {
        return Err(format!("expected a {n}x{n} matrix and {n} torques"));
    }
    let rows: Vec<Vec<f64>> = t.chunks(n).map(<[f64]>::to_vec).collect();
    let cm = CouplingMatrix::from_rows(&rows).map_err(|e| e.to_string())?;
    let omega_j = cm.motor_to_joint_velocity(omega_m).map_err(|e| e.to_string())?;
    let tau_j = cm.motor_to_joint_torque(tau_m).map_err(|e| e.to_string())?;
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok(Transform {
        power_motor: dot(tau_m, omega_m),
        power_joint: dot(&tau_j, &omega_j),
        omega_j,
        tau_j,
        condition: cm.condition(),
    })
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data serializes")
}

#[cfg(target_arch = "wasm32")]
mod wasm {
    use wasm_bindgen::prelude::*;

    use jointid::model::FrictionParams;

    fn params(k_c: f64, k_v: f64, sigma_plus: f64, sigma_minus: f64, omega_s: f64) -> Result<FrictionParams, JsError> {
        FrictionParams::new(k_c, k_v, sigma_plus, sigma_minus, omega_s).map_err(|e| JsError::new(&e.to_string()))
    }

    /// JSON `{omega, tau}`.
    #[wasm_bindgen]
    #[allow(clippy::too_many_arguments)]
    pub fn friction_curve(
        k_c: f64,
        k_v: f64,
        sigma_plus: f64,
        sigma_minus: f64,
        omega_s: f64,
        lo: f64,
        hi: f64,
        n: usize,
    ) -> Result<String, JsError> {
        let p = params(k_c, k_v, sigma_plus, sigma_minus, omega_s)?;
        super::friction_curve(&p, lo, hi, n)
            .map(|c| super::to_json(&c))
            .map_err(|e| JsError::new(&e))
    }

    /// JSON `{points, fits}`.
    #[wasm_bindgen]
    #[allow(clippy::too_many_arguments)]
    pub fn simulate_and_identify(
        k_c: f64,
        k_v: f64,
        sigma_plus: f64,
        sigma_minus: f64,
        omega_s: f64,
        amplitude: f64,
        torque_std: f64,
        seed: u32,
    ) -> Result<String, JsError> {
        let p = params(k_c, k_v, sigma_plus, sigma_minus, omega_s)?;
        super::simulate_and_identify(&p, amplitude, torque_std, seed as u64)
            .map(|r| super::to_json(&r))
            .map_err(|e| JsError::new(&e))
    }

    /// JSON `{omega_j, tau_j, power_motor, power_joint, condition}`.
    #[wasm_bindgen]
    pub fn coupling_transform(t: &[f64], omega_m: &[f64], tau_m: &[f64]) -> Result<String, JsError> {
        super::coupling_transform(t, omega_m, tau_m)
            .map(|r| super::to_json(&r))
            .map_err(|e| JsError::new(&e))
    }
}
