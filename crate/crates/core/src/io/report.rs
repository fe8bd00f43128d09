//! Identification report as a TOML document.
//!
//! The `[parameters]` block uses the names `sigma_plus`, `sigma_minus`,
//! `k_v`, `k_c`, `k_pwm_star` and `tau_0`. Each executed phase gets a fit
//! section with its conditioning, residual and sample counts.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::identify::{CouplingReport, IdentificationReport, ModelKind};
use crate::regression::FitResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub shaft: String,
    pub friction_model: ModelKind,
    /// Static friction levels at or above the Coulomb level.
    pub physical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterBlock {
    pub sigma_plus: f64,
    pub sigma_minus: f64,
    pub k_v: f64,
    pub k_c: f64,
    pub omega_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_pwm_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub residual_rms: f64,
    pub condition_number: f64,
    pub rank_ok: bool,
    pub sample_count: usize,
    pub excluded_count: usize,
    pub labels: Vec<String>,
    pub estimates: Vec<f64>,
}

impl From<&FitResult> for FitSummary {
    fn from(f: &FitResult) -> Self {
        Self {
            residual_rms: f.residual_rms,
            condition_number: f.condition_number,
            rank_ok: f.rank_ok,
            sample_count: f.sample_count,
            excluded_count: f.excluded_count,
            labels: f.labels.clone(),
            estimates: f.params.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CurveBlock {
    pub omega: Vec<f64>,
    pub tau: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub report: ReportHeader,
    pub parameters: ParameterBlock,
    pub friction_fit: FitSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub motor_fit: Option<FitSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingReport>,
    #[serde(default)]
    pub fitted_curve: CurveBlock,
}

impl From<&IdentificationReport> for ReportDocument {
    fn from(r: &IdentificationReport) -> Self {
        let f = &r.friction.params;
        let m = r.motor.as_ref().map(|m| m.params);
        Self {
            report: ReportHeader {
                shaft: r.shaft.clone(),
                friction_model: r.friction.model,
                physical: r.friction.physical,
            },
            parameters: ParameterBlock {
                sigma_plus: f.sigma_plus,
                sigma_minus: f.sigma_minus,
                k_v: f.k_v,
                k_c: f.k_c,
                omega_s: f.omega_s,
                k_pwm_star: m.map(|m| m.k_pwm_star),
                tau_0: m.map(|m| m.tau_0),
                rho: m.map(|m| m.rho),
            },
            friction_fit: FitSummary::from(&r.friction.fit),
            motor_fit: r.motor.as_ref().map(|m| FitSummary::from(&m.fit)),
            coupling: r.coupling.clone(),
            fitted_curve: CurveBlock {
                omega: r.friction.fitted_curve.iter().map(|p| p.0).collect(),
                tau: r.friction.fitted_curve.iter().map(|p| p.1).collect(),
            },
        }
    }
}

fn model_name(m: ModelKind) -> &'static str {
    match m {
        ModelKind::CoulombViscous => "coulomb-viscous",
        ModelKind::Stribeck => "stribeck",
        ModelKind::StribeckConstrained => "stribeck-constrained",
    }
}

fn fit_lines(out: &mut String, title: &str, f: &FitSummary) {
    let _ = writeln!(out, "{title}");
    for (l, v) in f.labels.iter().zip(&f.estimates) {
        let _ = writeln!(out, "  {l:<16}{v:>14.6}");
    }
    let _ = writeln!(out, "  {:<16}{:>14.6e}", "residual_rms", f.residual_rms);
    let _ = writeln!(out, "  {:<16}{:>14.6e}", "condition", f.condition_number);
    let _ = writeln!(out, "  {:<16}{:>14}", "rank_ok", f.rank_ok);
    let _ = writeln!(
        out,
        "  {:<16}{:>14}",
        "samples",
        format!("{} (+{} excluded)", f.sample_count, f.excluded_count)
    );
}

impl ReportDocument {
    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        super::write_atomic(path, self.to_toml()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Plain-text summary for terminals.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let p = &self.parameters;
        let _ = writeln!(
            out,
            "shaft {}  model {}{}",
            self.report.shaft,
            model_name(self.report.friction_model),
            if self.report.physical { "" } else { "  [non-physical: sigma < k_c]" }
        );
        let _ = writeln!(out, "parameters");
        let mut row = |name: &str, v: Option<f64>| {
            if let Some(v) = v {
                let _ = writeln!(out, "  {name:<16}{v:>14.6}");
            }
        };
        row("sigma_plus", Some(p.sigma_plus));
        row("sigma_minus", Some(p.sigma_minus));
        row("k_v", Some(p.k_v));
        row("k_c", Some(p.k_c));
        row("omega_s", Some(p.omega_s));
        row("k_pwm_star", p.k_pwm_star);
        row("tau_0", p.tau_0);
        row("rho", p.rho);
        fit_lines(&mut out, "friction fit", &self.friction_fit);
        if let Some(m) = &self.motor_fit {
            fit_lines(&mut out, "motor fit", m);
        }
        if let Some(c) = &self.coupling {
            let _ = writeln!(out, "coupling");
            let _ = writeln!(out, "  {:<16}{:>14}", "motor", c.motor_index);
            let _ = writeln!(out, "  {:<16}{:>14.6e}", "condition", c.condition);
            let _ = writeln!(out, "  {:<16}{:>14}", "rejected", c.rejected_samples);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identify::{identify_chain, ChainConfig};
    use crate::model::{FrictionParams, InertiaParams, MotorParams};
    use crate::simulator::{gen_phase1, gen_phase2, ExcitationProfile, NoiseSpec};

    fn report() -> IdentificationReport {
        let p = FrictionParams::new(0.85, 0.69, 1.27, 1.95, 1.0).unwrap();
        let m = MotorParams::new(0.02, 0.1, 100.0).unwrap();
        let i = InertiaParams::new(0.01).unwrap();
        let d1 = gen_phase1(
            &p,
            &i,
            &ExcitationProfile::sinusoid(50.0, 0.2, 20.0, 100.0),
            &NoiseSpec::torque_only(0.05, 1),
        )
        .unwrap();
        let d2 = gen_phase2(
            &m,
            &p,
            &i,
            &ExcitationProfile::sinusoid(300.0, 0.1, 20.0, 100.0),
            &NoiseSpec::torque_only(0.05, 2),
        )
        .unwrap();
        let c = ChainConfig {
            inertia: i,
            rho: 100.0,
            ..ChainConfig::default()
        };
        identify_chain(&d1, Some(&d2), &c).unwrap()
    }

    #[test]
    fn document_round_trips() {
        let doc = ReportDocument::from(&report());
        let text = doc.to_toml().unwrap();
        for key in ["sigma_plus", "sigma_minus", "k_v", "k_c", "k_pwm_star", "tau_0", "condition_number", "residual_rms"] {
            assert!(text.contains(key), "missing {key}");
        }
        let back = ReportDocument::from_toml(&text).unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.to_toml().unwrap(), text);
    }

    #[test]
    fn text_render_lists_diagnostics() {
        let text = ReportDocument::from(&report()).render_text();
        assert!(text.contains("friction fit"));
        assert!(text.contains("motor fit"));
        assert!(text.contains("condition"));
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.toml");
        let doc = ReportDocument::from(&report());
        doc.save(&path).unwrap();
        assert_eq!(ReportDocument::load(&path).unwrap(), doc);
    }
}
