//! Linear regressors for the friction and PWM models, and the least-squares
//! solvers (plain and equality-constrained) with conditioning diagnostics.
//!
//! Friction designs keep the negated-parameter convention `Θ = -[K_c, K_v, ...]`
//! internally; [`FitResult::params`] always reports the positive physical values.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::{sign, FrictionParams, InertiaParams};

/// Relative singular-value threshold for declaring a design rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;
/// `cond(XᵀX)` above which a warning is logged.
pub const CONDITION_WARN: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct DesignSystem {
    x: DMatrix<f64>,
    y: DVector<f64>,
    labels: Vec<String>,
    /// Maps internal coefficients to physical ones, entry-wise.
    physical_sign: Vec<f64>,
    /// Dataset row of each design row.
    rows: Vec<usize>,
    excluded: usize,
}

impl DesignSystem {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, labels: Vec<String>) -> Result<Self> {
        let p = x.ncols();
        Self::with_signs(x, y, labels, vec![1.0; p], None, 0)
    }

    fn with_signs(
        x: DMatrix<f64>,
        y: DVector<f64>,
        labels: Vec<String>,
        physical_sign: Vec<f64>,
        rows: Option<Vec<usize>>,
        excluded: usize,
    ) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                found: y.len(),
            });
        }
        if labels.len() != x.ncols() || physical_sign.len() != x.ncols() {
            return Err(Error::DimensionMismatch {
                expected: x.ncols(),
                found: labels.len(),
            });
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Data("design contains non-finite entries".into()));
        }
        let rows = rows.unwrap_or_else(|| (0..x.nrows()).collect());
        Ok(Self {
            x,
            y,
            labels,
            physical_sign,
            rows,
            excluded,
        })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn source_rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn excluded_count(&self) -> usize {
        self.excluded
    }

    pub fn nrows(&self) -> usize {
        self.x.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.x.ncols()
    }

    /// Converts physical parameters to the internal coefficient vector.
    pub fn theta_from_physical(&self, physical: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            physical.len(),
            physical.iter().zip(&self.physical_sign).map(|(p, s)| p * s),
        )
    }

    /// Re-expresses a constraint `A · params = b` written over physical
    /// parameters in terms of the internal coefficients.
    pub fn constraint_from_physical(&self, a_physical: &DMatrix<f64>) -> DMatrix<f64> {
        let mut a = a_physical.clone();
        for (j, s) in self.physical_sign.iter().enumerate() {
            a.column_mut(j).scale_mut(*s);
        }
        a
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Coefficients in the design's internal convention.
    pub theta: Vec<f64>,
    pub labels: Vec<String>,
    /// Physical parameter values, same order as `labels`.
    pub params: Vec<f64>,
    pub residual_rms: f64,
    /// `cond₂(XᵀX)` of the full design.
    pub condition_number: f64,
    pub rank_ok: bool,
    pub sample_count: usize,
    pub excluded_count: usize,
}

impl FitResult {
    pub fn param(&self, label: &str) -> Option<f64> {
        self.labels.iter().position(|l| l == label).map(|i| self.params[i])
    }
}

fn is_stick(omega: f64, omega_dead: f64) -> bool {
    omega == 0.0 || omega.abs() < omega_dead
}

struct Retained {
    rows: Vec<usize>,
    excluded: usize,
}

fn retain(d: &Dataset, omega_dead: f64) -> Result<Retained> {
    let rows: Vec<usize> = d
        .iter()
        .enumerate()
        .filter(|(_, s)| !is_stick(s.omega, omega_dead))
        .map(|(i, _)| i)
        .collect();
    if rows.is_empty() {
        return Err(Error::EmptyDesign);
    }
    let positive = rows.iter().any(|&i| d.samples()[i].omega > 0.0);
    let negative = rows.iter().any(|&i| d.samples()[i].omega < 0.0);
    if !(positive && negative) {
        warn!("design uses velocities of one sign only");
    }
    Ok(Retained {
        excluded: d.len() - rows.len(),
        rows,
    })
}

fn friction_target(d: &Dataset, i: &InertiaParams, rows: &[usize]) -> DVector<f64> {
    DVector::from_iterator(
        rows.len(),
        rows.iter().map(|&r| {
            let s = d.samples()[r];
            s.tau + i.i_reflected * s.omega_dot
        }),
    )
}

/// Coulomb/viscous regressors `[sign(ω), ω]` against `τ + I·ω̇`.
pub fn build_cv_design(d: &Dataset, i: &InertiaParams, omega_dead: f64) -> Result<DesignSystem> {
    let kept = retain(d, omega_dead)?;
    let x = DMatrix::from_fn(kept.rows.len(), 2, |r, c| {
        let w = d.samples()[kept.rows[r]].omega;
        match c {
            0 => sign(w),
            _ => w,
        }
    });
    let y = friction_target(d, i, &kept.rows);
    DesignSystem::with_signs(
        x,
        y,
        vec!["k_c".into(), "k_v".into()],
        vec![-1.0; 2],
        Some(kept.rows),
        kept.excluded,
    )
}

/// One Stribeck regressor row; `row · (-K_c, -K_v, -σ⁺, -σ⁻)` is the friction torque.
pub fn stribeck_row(omega: f64, omega_s: f64) -> [f64; 4] {
    let decay = (-omega.abs() / omega_s).exp();
    let mut row = [sign(omega) * (1.0 - decay), omega, 0.0, 0.0];
    if omega > 0.0 {
        row[2] = decay;
    } else if omega < 0.0 {
        row[3] = -decay;
    }
    row
}

pub fn build_stribeck_design(
    d: &Dataset,
    i: &InertiaParams,
    omega_s: f64,
    omega_dead: f64,
) -> Result<DesignSystem> {
    if !(omega_s.is_finite() && omega_s > 0.0) {
        return Err(Error::Domain(format!("omega_s must be positive, got {omega_s}")));
    }
    let kept = retain(d, omega_dead)?;
    let x = DMatrix::from_fn(kept.rows.len(), 4, |r, c| {
        stribeck_row(d.samples()[kept.rows[r]].omega, omega_s)[c]
    });
    let y = friction_target(d, i, &kept.rows);
    DesignSystem::with_signs(
        x,
        y,
        vec!["k_c".into(), "k_v".into(), "sigma_plus".into(), "sigma_minus".into()],
        vec![-1.0; 4],
        Some(kept.rows),
        kept.excluded,
    )
}

/// Regressors `[1, PWM]` against the torque with inertia and friction removed.
pub fn build_pwm_design(
    d: &Dataset,
    p: &FrictionParams,
    i: &InertiaParams,
    omega_dead: f64,
) -> Result<DesignSystem> {
    p.validate()?;
    let kept = retain(d, omega_dead)?;
    let pwm: Vec<f64> = kept.rows.iter().map(|&r| d.samples()[r].pwm).collect();
    let first = pwm[0];
    if pwm.iter().all(|&v| v == first) {
        return Err(Error::RankDeficient {
            dependent: vec!["k_pwm_star".into()],
        });
    }
    if !(pwm.iter().any(|&v| v > 0.0) && pwm.iter().any(|&v| v < 0.0)) {
        warn!("PWM excitation does not span both signs");
    }
    let x = DMatrix::from_fn(pwm.len(), 2, |r, c| if c == 0 { 1.0 } else { pwm[r] });
    let y = DVector::from_iterator(
        kept.rows.len(),
        kept.rows.iter().map(|&r| {
            let s = d.samples()[r];
            s.tau + i.i_reflected * s.omega_dot - p.torque(s.omega)
        }),
    );
    DesignSystem::with_signs(
        x,
        y,
        vec!["tau_0".into(), "k_pwm_star".into()],
        vec![1.0; 2],
        Some(kept.rows),
        kept.excluded,
    )
}

/// `cond₂(XᵀX) = cond₂(X)²`; `+∞` when `X` is numerically singular.
pub fn condition_number(x: &DMatrix<f64>) -> f64 {
    if x.is_empty() {
        return f64::INFINITY;
    }
    let sv = x.singular_values();
    let (s_max, s_min) = (sv.max(), sv.min());
    let tol = s_max * x.nrows().max(x.ncols()) as f64 * f64::EPSILON;
    if x.nrows() < x.ncols() || s_min <= tol {
        f64::INFINITY
    } else {
        let c = s_max / s_min;
        c * c
    }
}

/// Columns that are (numerically) combinations of earlier columns.
fn dependent_columns(xs: &DMatrix<f64>) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut dependent = Vec::new();
    for j in 0..xs.ncols() {
        let col = xs.column(j).into_owned();
        let norm = col.norm();
        if norm == 0.0 {
            dependent.push(j);
            continue;
        }
        let mut v = col.clone();
        // two passes of Gram-Schmidt
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&v);
                v.axpy(-c, q, 1.0);
            }
        }
        let r = v.norm();
        if r <= norm * RANK_TOLERANCE.sqrt() {
            dependent.push(j);
        } else {
            basis.push(v / r);
        }
    }
    dependent
}

pub fn solve_lsq(s: &DesignSystem) -> Result<FitResult> {
    let theta = solve_theta(&s.x, &s.y, &s.labels)?;
    Ok(finish(s, theta))
}

fn solve_theta(x: &DMatrix<f64>, y: &DVector<f64>, labels: &[String]) -> Result<DVector<f64>> {
    let (m, p) = (x.nrows(), x.ncols());
    if m == 0 {
        return Err(Error::EmptyDesign);
    }
    if m < p {
        return Err(Error::Underdetermined { rows: m, params: p });
    }
    // column equilibration before the QR
    let norms: Vec<f64> = (0..p).map(|j| x.column(j).norm()).collect();
    let name = |j: usize| labels.get(j).cloned().unwrap_or_else(|| format!("col{j}"));
    if let Some(j) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::RankDeficient {
            dependent: vec![name(j)],
        });
    }
    let mut xs = x.clone();
    for (j, n) in norms.iter().enumerate() {
        xs.column_mut(j).unscale_mut(*n);
    }
    let qr = xs.clone().qr();
    let r = qr.r();
    let sv = r.singular_values();
    if sv.min() <= sv.max() * RANK_TOLERANCE {
        let mut dep = dependent_columns(&xs);
        if dep.is_empty() {
            dep.push(p - 1);
        }
        return Err(Error::RankDeficient {
            dependent: dep.into_iter().map(name).collect(),
        });
    }
    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let rhs = qty.rows(0, p).into_owned();
    let z = r
        .solve_upper_triangular(&rhs)
        .ok_or_else(|| Error::RankDeficient {
            dependent: vec![name(p - 1)],
        })?;
    Ok(DVector::from_iterator(p, z.iter().zip(&norms).map(|(z, n)| z / n)))
}

fn finish(s: &DesignSystem, theta: DVector<f64>) -> FitResult {
    let resid = &s.x * &theta - &s.y;
    let m = s.nrows().max(1) as f64;
    let condition = condition_number(&s.x);
    if condition > CONDITION_WARN {
        warn!("ill-conditioned design: cond(XᵀX) = {condition:.3e}");
    }
    FitResult {
        params: theta.iter().zip(&s.physical_sign).map(|(t, s)| t * s).collect(),
        theta: theta.iter().copied().collect(),
        labels: s.labels.clone(),
        residual_rms: (resid.norm_squared() / m).sqrt(),
        condition_number: condition,
        rank_ok: condition.is_finite(),
        sample_count: s.nrows(),
        excluded_count: s.excluded,
    }
}

/// Least squares subject to `A Θ = b` (over internal coefficients), by
/// eliminating the constraint through its null space.
pub fn solve_constrained_lsq(s: &DesignSystem, a: &DMatrix<f64>, b: &DVector<f64>) -> Result<FitResult> {
    let p = s.ncols();
    let q = a.nrows();
    if q == 0 {
        return solve_lsq(s);
    }
    if a.ncols() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: a.ncols(),
        });
    }
    if b.len() != q {
        return Err(Error::DimensionMismatch {
            expected: q,
            found: b.len(),
        });
    }
    if q >= p {
        return Err(Error::InfeasibleConstraint(format!(
            "{q} constraints leave no freedom over {p} parameters"
        )));
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InfeasibleConstraint("non-finite constraint entries".into()));
    }
    // pad to square so the SVD yields a complete right basis
    let mut padded = DMatrix::zeros(p, p);
    padded.view_mut((0, 0), (q, p)).copy_from(a);
    let svd = padded.svd(true, true);
    let v_t = svd.v_t.as_ref().expect("requested V");
    let u = svd.u.as_ref().expect("requested U");
    let s_max = svd.singular_values.max();
    if s_max == 0.0 {
        return Err(Error::InfeasibleConstraint("constraint matrix is zero".into()));
    }
    let tol = s_max * RANK_TOLERANCE;
    let (range, null): (Vec<usize>, Vec<usize>) = (0..p).partition(|&k| svd.singular_values[k] > tol);
    if range.len() < q {
        return Err(Error::InfeasibleConstraint("constraint rows are linearly dependent".into()));
    }
    // minimum-norm particular solution A⁺ b
    let mut b_pad = DVector::zeros(p);
    b_pad.rows_mut(0, q).copy_from(b);
    let mut theta_p = DVector::zeros(p);
    for &k in &range {
        let coef = u.column(k).dot(&b_pad) / svd.singular_values[k];
        theta_p.axpy(coef, &v_t.row(k).transpose(), 1.0);
    }
    let z = DMatrix::from_fn(p, null.len(), |i, j| v_t[(null[j], i)]);
    let xz = &s.x * &z;
    let y_red = &s.y - &s.x * &theta_p;
    let labels: Vec<String> = (0..null.len()).map(|k| format!("null{k}")).collect();
    let w = solve_theta(&xz, &y_red, &labels).map_err(|e| match e {
        Error::RankDeficient { .. } => Error::InfeasibleConstraint(
            "design and constraint are not jointly full rank".into(),
        ),
        other => other,
    })?;
    let theta = theta_p + z * w;
    Ok(finish(s, theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Sample;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sample(omega: f64, omega_dot: f64, tau: f64, pwm: f64) -> Sample {
        Sample {
            t: 0.0,
            pwm,
            omega,
            omega_dot,
            tau,
        }
    }

    fn dataset(samples: Vec<Sample>) -> Dataset {
        let samples = samples
            .into_iter()
            .enumerate()
            .map(|(k, s)| Sample { t: k as f64 * 0.01, ..s })
            .collect();
        Dataset::from_samples(samples).unwrap()
    }

    fn no_inertia() -> InertiaParams {
        InertiaParams::default()
    }

    #[test]
    fn cv_rows() {
        let d = dataset(vec![sample(3.0, 0.0, -2.0, 0.0)]);
        let s = build_cv_design(&d, &no_inertia(), 1e-3).unwrap();
        assert_eq!(s.x().row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 3.0]);
        assert_eq!(s.y()[0], -2.0);

        let d = dataset(vec![sample(-3.0, 2.0, 1.0, 0.0)]);
        let s = build_cv_design(&d, &InertiaParams::new(0.5).unwrap(), 1e-3).unwrap();
        assert_eq!(s.x().row(0).iter().copied().collect::<Vec<_>>(), vec![-1.0, -3.0]);
        assert_eq!(s.y()[0], 2.0);
    }

    #[test]
    fn deadband_excludes_stick_samples() {
        let d = dataset(vec![sample(0.0, 0.0, 0.0, 0.0), sample(5e-4, 0.0, 0.0, 0.0), sample(1.0, 0.0, -1.0, 0.0)]);
        let s = build_cv_design(&d, &no_inertia(), 1e-3).unwrap();
        assert_eq!(s.nrows(), 1);
        assert_eq!(s.excluded_count(), 2);
        assert_eq!(s.source_rows(), &[2]);
        let all_stuck = dataset(vec![sample(0.0, 0.0, 0.0, 0.0)]);
        assert!(matches!(build_cv_design(&all_stuck, &no_inertia(), 1e-3), Err(Error::EmptyDesign)));
    }

    #[test]
    fn cv_recovers_noiseless_parameters() {
        let p = FrictionParams::coulomb_viscous(1.0, 0.3);
        let d = dataset(
            (-50..=50)
                .filter(|&k| k != 0)
                .map(|k| {
                    let w = k as f64 * 0.7;
                    sample(w, 0.0, p.torque(w), 0.0)
                })
                .collect(),
        );
        let fit = solve_lsq(&build_cv_design(&d, &no_inertia(), 1e-3).unwrap()).unwrap();
        assert_relative_eq!(fit.param("k_c").unwrap(), 1.0, max_relative = 1e-9);
        assert_relative_eq!(fit.param("k_v").unwrap(), 0.3, max_relative = 1e-9);
        assert_relative_eq!(fit.theta[0], -1.0, max_relative = 1e-9);
        assert!(fit.rank_ok);
        assert!(fit.residual_rms < 1e-12);
    }

    #[test]
    fn stribeck_row_limit() {
        let row = stribeck_row(1e-300, 1.0);
        assert_eq!(row, [0.0, 1e-300, 1.0, 0.0]);
        let p = FrictionParams::new(0.85, 0.31, 1.27, 1.95, 1.0).unwrap();
        let theta = [-p.k_c, -p.k_v, -p.sigma_plus, -p.sigma_minus];
        let v: f64 = row.iter().zip(theta).map(|(a, b)| a * b).sum();
        assert_relative_eq!(v, -1.27, epsilon = 1e-15);
    }

    #[test]
    fn stribeck_recovers_knee_parameters() {
        let p = FrictionParams::new(0.85, 0.31, 1.27, 1.95, 1.0).unwrap();
        let d = dataset(
            (0..2000)
                .map(|k| {
                    let w = 20.0 * (k as f64 * 0.0123).sin();
                    sample(w, 0.0, p.torque(w), 0.0)
                })
                .collect(),
        );
        let fit = solve_lsq(&build_stribeck_design(&d, &no_inertia(), 1.0, 1e-3).unwrap()).unwrap();
        for (label, truth) in [("k_c", 0.85), ("k_v", 0.31), ("sigma_plus", 1.27), ("sigma_minus", 1.95)] {
            assert_relative_eq!(fit.param(label).unwrap(), truth, max_relative = 1e-6);
        }
    }

    #[test]
    fn pwm_design_rows_and_rank() {
        // friction torque at omega is -0.5 -> y = 1 + 0.5
        let p = FrictionParams::coulomb_viscous(0.5, 0.0);
        let d = dataset(vec![sample(2.0, 0.0, 1.0, 25.0), sample(3.0, 0.0, 1.0, 30.0)]);
        let s = build_pwm_design(&d, &p, &no_inertia(), 1e-3).unwrap();
        assert_eq!(s.x().row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 25.0]);
        assert_relative_eq!(s.y()[0], 1.5, epsilon = 1e-15);

        let flat = dataset(vec![sample(2.0, 0.0, 1.0, 0.0), sample(-3.0, 0.0, 1.0, 0.0)]);
        assert!(matches!(
            build_pwm_design(&flat, &p, &no_inertia(), 1e-3),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn pwm_recovers_noiseless() {
        let p = FrictionParams::new(0.85, 0.31, 1.27, 1.95, 1.0).unwrap();
        let m = crate::model::MotorParams::new(0.02, 0.1, 100.0).unwrap();
        let i = InertiaParams::new(0.01).unwrap();
        let d = dataset(
            (0..500)
                .map(|k| {
                    let t = k as f64 * 0.01;
                    let (pwm, w, wd) = (200.0 * (0.7 * t).sin(), 15.0 * (0.3 * t).cos(), -4.5 * (0.3 * t).sin());
                    sample(w, wd, crate::model::joint_torque(&m, &p, &i, pwm, w, wd), pwm)
                })
                .collect(),
        );
        let fit = solve_lsq(&build_pwm_design(&d, &p, &i, 1e-3).unwrap()).unwrap();
        assert_relative_eq!(fit.param("k_pwm_star").unwrap(), 0.02, max_relative = 1e-9);
        assert_relative_eq!(fit.param("tau_0").unwrap(), 0.1, max_relative = 1e-9);
    }

    #[test]
    fn solve_mean() {
        let s = DesignSystem::new(DMatrix::from_row_slice(2, 1, &[1.0, 1.0]), DVector::from_vec(vec![2.0, 4.0]), vec!["a".into()]).unwrap();
        let fit = solve_lsq(&s).unwrap();
        assert_relative_eq!(fit.theta[0], 3.0, epsilon = 1e-14);
        assert_relative_eq!(fit.residual_rms, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn solve_square_matches_direct_inverse() {
        let x = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, -2.0, 5.0]);
        let y = DVector::from_vec(vec![0.7, -1.3]);
        let direct = x.clone().try_inverse().unwrap() * &y;
        let fit = solve_lsq(&DesignSystem::new(x, y, vec!["a".into(), "b".into()]).unwrap()).unwrap();
        for (a, b) in fit.theta.iter().zip(direct.iter()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn duplicate_column_is_rank_error() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        let s = DesignSystem::new(x.clone(), DVector::from_vec(vec![1.0, 2.0, 3.0]), vec!["a".into(), "b".into()]).unwrap();
        match solve_lsq(&s) {
            Err(Error::RankDeficient { dependent }) => assert_eq!(dependent, vec!["b".to_string()]),
            other => panic!("expected rank error, got {other:?}"),
        }
        assert_eq!(condition_number(&x), f64::INFINITY);
    }

    #[test]
    fn underdetermined_rejected() {
        let s = DesignSystem::new(DMatrix::from_row_slice(1, 2, &[1.0, 2.0]), DVector::from_vec(vec![1.0]), vec!["a".into(), "b".into()]).unwrap();
        assert!(matches!(solve_lsq(&s), Err(Error::Underdetermined { .. })));
    }

    #[test]
    fn condition_number_examples() {
        assert_relative_eq!(condition_number(&DMatrix::identity(3, 3)), 1.0, epsilon = 1e-14);
        // cond₂(X) = 10 for diag(1, 10), so cond₂(XᵀX) = 100
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 10.0]));
        assert_relative_eq!(condition_number(&d), 100.0, max_relative = 1e-12);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 100.0]));
        assert_relative_eq!(condition_number(&d), 1e4, max_relative = 1e-12);
    }

    fn knee_design(omega_s: f64) -> (DesignSystem, FrictionParams) {
        let p = FrictionParams::new(0.85, 0.69, 1.27, 1.95, omega_s).unwrap();
        let d = dataset(
            (0..3000)
                .map(|k| {
                    let w = 30.0 * (k as f64 * 0.005).sin();
                    // deterministic pseudo-noise
                    let noise = 0.05 * ((k as f64 * 12.9898).sin() * 43758.5453).fract();
                    sample(w, 0.0, p.torque(w) + noise, 0.0)
                })
                .collect(),
        );
        (build_stribeck_design(&d, &no_inertia(), omega_s, 1e-3).unwrap(), p)
    }

    #[test]
    fn empty_constraint_equals_unconstrained() {
        let (s, _) = knee_design(1.0);
        let a = DMatrix::zeros(0, 4);
        let b = DVector::zeros(0);
        assert_eq!(solve_constrained_lsq(&s, &a, &b).unwrap(), solve_lsq(&s).unwrap());
    }

    #[test]
    fn right_derivative_constraint_holds() {
        let omega_s = 2.0;
        let (s, _) = knee_design(omega_s);
        // d|τ_f|/dω at 0⁺: k_v - (σ⁺ - k_c)/ω_s = 0
        let a_phys = DMatrix::from_row_slice(1, 4, &[1.0 / omega_s, 1.0, -1.0 / omega_s, 0.0]);
        let a = s.constraint_from_physical(&a_phys);
        let fit = solve_constrained_lsq(&s, &a, &DVector::zeros(1)).unwrap();
        let theta = DVector::from_vec(fit.theta.clone());
        assert!((&a * &theta)[0].abs() <= 1e-10);
        let free = solve_lsq(&s).unwrap();
        assert!(fit.residual_rms >= free.residual_rms);

        // finite-difference check of the fitted curve at 0⁺
        let fitted = FrictionParams {
            k_c: fit.params[0],
            k_v: fit.params[1],
            sigma_plus: fit.params[2],
            sigma_minus: fit.params[3],
            omega_s,
        };
        let h = 1e-6 * omega_s;
        let f = |w: f64| fitted.torque(w).abs();
        let slope = (-3.0 * fitted.sigma_plus + 4.0 * f(h) - f(2.0 * h)) / (2.0 * h);
        assert!(slope.abs() <= 1e-8, "slope {slope}");
    }

    #[test]
    fn zero_viscous_constraint_matches_unconstrained_on_zero_viscous_data() {
        let p = FrictionParams::new(0.85, 0.0, 1.27, 1.95, 1.0).unwrap();
        let d = dataset(
            (0..1500)
                .map(|k| {
                    let w = 25.0 * (k as f64 * 0.004).sin();
                    sample(w, 0.0, p.torque(w), 0.0)
                })
                .collect(),
        );
        let s = build_stribeck_design(&d, &no_inertia(), 1.0, 1e-3).unwrap();
        let a = DMatrix::from_row_slice(1, 4, &[0.0, 1.0, 0.0, 0.0]);
        let c = solve_constrained_lsq(&s, &a, &DVector::zeros(1)).unwrap();
        let u = solve_lsq(&s).unwrap();
        for (x, y) in c.params.iter().zip(&u.params) {
            assert!((x - y).abs() <= 1e-9, "{x} vs {y}");
        }
        assert_eq!(c.params[1], 0.0);
    }

    #[test]
    fn degenerate_constraints_rejected() {
        let (s, _) = knee_design(1.0);
        let a = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            solve_constrained_lsq(&s, &a, &DVector::from_vec(vec![1.0, 3.0])),
            Err(Error::InfeasibleConstraint(_))
        ));
        let a = DMatrix::identity(4, 4);
        assert!(solve_constrained_lsq(&s, &a, &DVector::zeros(4)).is_err());
    }

    proptest! {
        #[test]
        fn stribeck_design_reproduces_model(
            k_c in 0.0..3.0f64, k_v in 0.0..2.0f64, dp in 0.0..2.0f64, dm in 0.0..2.0f64,
            omega_s in 0.1..10.0f64, w in -200.0..200.0f64,
        ) {
            prop_assume!(w != 0.0);
            let p = FrictionParams { k_c, k_v, sigma_plus: k_c + dp, sigma_minus: k_c + dm, omega_s };
            let row = stribeck_row(w, omega_s);
            let theta = [-k_c, -k_v, -p.sigma_plus, -p.sigma_minus];
            let v: f64 = row.iter().zip(theta).map(|(a, b)| a * b).sum();
            prop_assert!((v - p.torque(w)).abs() <= 1e-12);
        }

        #[test]
        fn cv_full_rank_with_two_distinct_speeds(a in 0.01..100.0f64, b in 0.01..100.0f64, neg in any::<bool>()) {
            prop_assume!((a - b).abs() > 1e-3 * a.max(b));
            let s = if neg { -1.0 } else { 1.0 };
            let d = dataset(vec![sample(s * a, 0.0, 0.0, 0.0), sample(s * b, 0.0, 0.0, 0.0)]);
            let design = build_cv_design(&d, &no_inertia(), 1e-3).unwrap();
            prop_assert!(condition_number(design.x()).is_finite());
        }
    }
}
