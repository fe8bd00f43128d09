//! Velocity and torque maps between motor shafts and coupled joints.
//!
//! Joint velocities are `T · ω_m`. Power is conserved through the coupling,
//! so joint torques are `T^{-⊤} · τ_m`. Motor quantities are taken at the
//! gearbox output of each motor group.

use nalgebra::{DMatrix, DVector, LU};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default threshold on `|det T| / ‖T‖₂ⁿ` below which `T` is treated as singular.
pub const DEFAULT_DET_EPS: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct CouplingMatrix {
    t: DMatrix<f64>,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    lu_t: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    condition: f64,
}

/// Serialized form: row-major nested rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CouplingRows(pub Vec<Vec<f64>>);

impl CouplingMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::from_rows_with_eps(rows, DEFAULT_DET_EPS)
    }

    pub fn from_rows_with_eps(rows: &[Vec<f64>], det_eps: f64) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Config("coupling matrix must have at least one row".into()));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: r.len(),
            });
        }
        let t = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::from_matrix_with_eps(t, det_eps)
    }

    pub fn from_matrix(t: DMatrix<f64>) -> Result<Self> {
        Self::from_matrix_with_eps(t, DEFAULT_DET_EPS)
    }

    pub fn from_matrix_with_eps(t: DMatrix<f64>, det_eps: f64) -> Result<Self> {
        if !t.is_square() || t.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: t.nrows(),
                found: t.ncols(),
            });
        }
        if t.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("coupling matrix entries must be finite".into()));
        }
        let n = t.nrows();
        let sv = t.singular_values();
        let s_max = sv.max();
        let s_min = sv.min();
        let condition = if s_min > 0.0 { s_max / s_min } else { f64::INFINITY };
        let lu = t.clone().lu();
        let det = lu.determinant();
        let det_ratio = if s_max > 0.0 {
            det.abs() / s_max.powi(n as i32)
        } else {
            0.0
        };
        if !(det_ratio > det_eps) {
            return Err(Error::SingularCoupling {
                det_ratio,
                condition,
            });
        }
        let lu_t = t.transpose().lu();
        Ok(Self {
            t,
            lu,
            lu_t,
            condition,
        })
    }

    /// Single-joint chain: the scalar velocity ratio `1/rho`.
    pub fn scalar(ratio: f64) -> Result<Self> {
        Self::from_rows(&[vec![ratio]])
    }

    pub fn identity(n: usize) -> Self {
        Self::from_matrix(DMatrix::identity(n, n)).expect("identity is invertible")
    }

    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.t
    }

    pub fn rows(&self) -> CouplingRows {
        CouplingRows(
            (0..self.dim())
                .map(|i| self.t.row(i).iter().copied().collect())
                .collect(),
        )
    }

    /// Two-norm condition number of `T`.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    fn vector(&self, v: &[f64]) -> Result<DVector<f64>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: v.len(),
            });
        }
        Ok(DVector::from_column_slice(v))
    }

    fn solve(lu: &LU<f64, nalgebra::Dyn, nalgebra::Dyn>, b: DVector<f64>, condition: f64) -> Result<Vec<f64>> {
        lu.solve(&b)
            .map(|x| x.iter().copied().collect())
            .ok_or(Error::SingularCoupling {
                det_ratio: 0.0,
                condition,
            })
    }

    pub fn motor_to_joint_velocity(&self, omega_m: &[f64]) -> Result<Vec<f64>> {
        let w = self.vector(omega_m)?;
        Ok((&self.t * w).iter().copied().collect())
    }

    pub fn motor_velocity_from_joints(&self, omega_j: &[f64]) -> Result<Vec<f64>> {
        let w = self.vector(omega_j)?;
        Self::solve(&self.lu, w, self.condition)
    }

    pub fn motor_to_joint_torque(&self, tau_m: &[f64]) -> Result<Vec<f64>> {
        let tau = self.vector(tau_m)?;
        Self::solve(&self.lu_t, tau, self.condition)
    }

    /// Inverse of [`motor_to_joint_torque`](Self::motor_to_joint_torque): `T^⊤ τ_j`.
    pub fn joint_to_motor_torque(&self, tau_j: &[f64]) -> Result<Vec<f64>> {
        let tau = self.vector(tau_j)?;
        Ok((self.t.transpose() * tau).iter().copied().collect())
    }

    /// Joint torques projected onto the transmission chain of motor `k`:
    /// the dot product with column `k` of `T`.
    pub fn project_joint_torque_to_motor(&self, k: usize, tau_j: &[f64]) -> Result<f64> {
        if k >= self.dim() {
            return Err(Error::IndexOutOfRange { index: k, n: self.dim() });
        }
        let tau = self.vector(tau_j)?;
        Ok(self.t.column(k).dot(&tau))
    }
}
