//! Forward model of a single actuation chain: motor, reduction drive and
//! equivalent joint friction, all expressed at the gearbox output shaft.
//!
//! Units are fixed: velocities in deg/s, accelerations in deg/s², torques in
//! N·m. Datasets recorded in radians must be converted at ingestion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `sign(0) = 0`.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Equivalent friction of the chain (Coulomb, viscous, and a Stribeck
/// exponential blending towards the static levels near zero velocity).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrictionParams {
    pub k_c: f64,
    pub k_v: f64,
    pub sigma_plus: f64,
    pub sigma_minus: f64,
    /// Stribeck rate velocity. Fixed per fit, never estimated.
    pub omega_s: f64,
}

impl FrictionParams {
    pub fn new(k_c: f64, k_v: f64, sigma_plus: f64, sigma_minus: f64, omega_s: f64) -> Result<Self> {
        let p = Self {
            k_c,
            k_v,
            sigma_plus,
            sigma_minus,
            omega_s,
        };
        p.validate()?;
        Ok(p)
    }

    /// Pure Coulomb/viscous friction: the static levels collapse onto `k_c`.
    pub fn coulomb_viscous(k_c: f64, k_v: f64) -> Self {
        Self {
            k_c,
            k_v,
            sigma_plus: k_c,
            sigma_minus: k_c,
            omega_s: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.k_c, self.k_v, self.sigma_plus, self.sigma_minus, self.omega_s];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("friction parameters must be finite".into()));
        }
        if self.k_c < 0.0 || self.k_v < 0.0 {
            return Err(Error::Domain(format!(
                "k_c and k_v must be non-negative (k_c = {}, k_v = {})",
                self.k_c, self.k_v
            )));
        }
        if self.omega_s <= 0.0 {
            return Err(Error::Domain(format!("omega_s must be positive, got {}", self.omega_s)));
        }
        Ok(())
    }

    /// Static levels at least as large as the Coulomb level. A fit can violate
    /// this and still be reported; this is a flag, not a constructor check.
    pub fn is_physical(&self) -> bool {
        self.k_c >= 0.0
            && self.k_v >= 0.0
            && self.sigma_plus >= self.k_c
            && self.sigma_minus >= self.k_c
    }

    /// Friction torque at `omega`, opposing the motion. Zero at `omega == 0`:
    /// in the stick phase the torque is a reaction, not a model output.
    pub fn torque(&self, omega: f64) -> f64 {
        if omega > 0.0 {
            -(self.k_c + (self.sigma_plus - self.k_c) * (-omega / self.omega_s).exp() + self.k_v * omega)
        } else if omega < 0.0 {
            self.k_c + (self.sigma_minus - self.k_c) * (omega / self.omega_s).exp() - self.k_v * omega
        } else {
            0.0
        }
    }

    /// Limit of `torque` as the velocity approaches zero from the side of `direction`.
    pub fn breakaway(&self, direction: f64) -> f64 {
        match sign(direction) {
            s if s > 0.0 => -self.sigma_plus,
            s if s < 0.0 => self.sigma_minus,
            _ => 0.0,
        }
    }
}

/// Equivalent PWM drive of `[motor + reduction drive]` seen at the output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotorParams {
    /// N·m per PWM unit, already scaled by the gear ratio.
    pub k_pwm_star: f64,
    pub tau_0: f64,
    pub rho: f64,
}

impl MotorParams {
    pub fn new(k_pwm_star: f64, tau_0: f64, rho: f64) -> Result<Self> {
        let m = Self {
            k_pwm_star,
            tau_0,
            rho,
        };
        m.validate()?;
        Ok(m)
    }

    /// Builds the output-side gain from the motor-side PWM-to-torque gain.
    pub fn from_motor_side(k_pwm_motor: f64, tau_0: f64, rho: f64) -> Result<Self> {
        check_ratio(rho)?;
        Self::new(rho * k_pwm_motor, tau_0, rho)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_pwm_star.is_finite() && self.tau_0.is_finite() && self.rho.is_finite()) {
            return Err(Error::Domain("motor parameters must be finite".into()));
        }
        check_ratio(self.rho)
    }

    pub fn torque(&self, pwm: f64) -> f64 {
        self.k_pwm_star * pwm + self.tau_0
    }

    /// PWM input that cancels the offset torque.
    pub fn null_torque_pwm(&self) -> f64 {
        -self.tau_0 / self.k_pwm_star
    }
}

/// Rotor plus gearbox inertia reflected at the gearbox output (N·m·s²/deg).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct InertiaParams {
    pub i_reflected: f64,
}

impl InertiaParams {
    pub fn new(i_reflected: f64) -> Result<Self> {
        if !i_reflected.is_finite() || i_reflected < 0.0 {
            return Err(Error::Domain(format!(
                "reflected inertia must be finite and non-negative, got {i_reflected}"
            )));
        }
        Ok(Self { i_reflected })
    }

    pub fn from_motor_side(rho: f64, i_motor: f64) -> Result<Self> {
        Self::new(reflect_inertia(rho, i_motor)?)
    }
}

fn check_ratio(rho: f64) -> Result<()> {
    if rho.is_finite() && rho > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("gear ratio must be positive, got {rho}")))
    }
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be finite, got {v}")))
    }
}

pub fn friction_torque(p: &FrictionParams, omega: f64) -> Result<f64> {
    p.validate()?;
    check_finite("omega", omega)?;
    Ok(p.torque(omega))
}

pub fn motor_pwm_torque(m: &MotorParams, pwm: f64) -> Result<f64> {
    check_finite("pwm", pwm)?;
    Ok(m.torque(pwm))
}

/// Output joint torque: PWM drive minus the reflected inertial term plus
/// friction. This is the ground-truth relation used by the simulator.
pub fn joint_torque_forward(
    m: &MotorParams,
    p: &FrictionParams,
    i: &InertiaParams,
    pwm: f64,
    omega: f64,
    omega_dot: f64,
) -> Result<f64> {
    check_finite("pwm", pwm)?;
    check_finite("omega", omega)?;
    check_finite("omega_dot", omega_dot)?;
    Ok(joint_torque(m, p, i, pwm, omega, omega_dot))
}

pub(crate) fn joint_torque(
    m: &MotorParams,
    p: &FrictionParams,
    i: &InertiaParams,
    pwm: f64,
    omega: f64,
    omega_dot: f64,
) -> f64 {
    m.torque(pwm) - i.i_reflected * omega_dot + p.torque(omega)
}

/// Motor-side inertia seen at the output: `rho² · i`.
pub fn reflect_inertia(rho: f64, i_motor_side: f64) -> Result<f64> {
    check_ratio(rho)?;
    if !i_motor_side.is_finite() || i_motor_side < 0.0 {
        return Err(Error::Domain(format!("inertia must be non-negative, got {i_motor_side}")));
    }
    Ok(rho * rho * i_motor_side)
}

pub fn reflect_velocity(rho: f64, omega_motor_side: f64) -> Result<f64> {
    check_ratio(rho)?;
    Ok(omega_motor_side / rho)
}

/// `rho · tau_motor + tau_friction_output`; the friction term is already
/// expressed on the output side.
pub fn reflect_torque(rho: f64, tau_motor_side: f64, tau_friction_output: f64) -> Result<f64> {
    check_ratio(rho)?;
    Ok(rho * tau_motor_side + tau_friction_output)
}
