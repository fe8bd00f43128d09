//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use jointid::coupling::CouplingMatrix;
use jointid::dataset::Dataset;
use jointid::error::Error;
use jointid::identify::{
    identify_chain, identify_coupled_motor, identify_friction, ChainConfig, DecorrelationOptions, DerivativeConstraint,
    FrictionReport, IdentificationReport, ModelKind,
};
use jointid::io::csv::write_dataset;
use jointid::io::report::ReportDocument;
use jointid::model::{friction_torque, reflect_inertia, FrictionParams, InertiaParams, MotorParams};
use jointid::regression::{build_cv_design, solve_lsq, stribeck_row, DesignSystem};
use jointid::simulator::{
    gen_coupled, gen_phase1, gen_phase2, ChainTruth, CoupledOptions, CoupledPhase, ExcitationProfile, NoiseSpec,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel(got: f64, want: f64) -> f64 {
    ((got - want) / want).abs()
}

/// Right-knee values used as fixture ground truth; `K_c` is a chosen value
/// below both static levels.
fn knee() -> FrictionParams {
    FrictionParams::new(0.85, 0.69, 1.27, 1.95, 1.0).unwrap()
}

fn motor() -> MotorParams {
    MotorParams::new(0.02, 0.1, 100.0).unwrap()
}

fn inertia() -> InertiaParams {
    InertiaParams::new(0.01).unwrap()
}

fn chain(model: ModelKind) -> ChainConfig {
    ChainConfig {
        inertia: inertia(),
        rho: 100.0,
        model,
        ..ChainConfig::default()
    }
}

/// ±50 deg/s sinusoid; 100 Hz for `duration` seconds.
fn sweep(duration: f64) -> ExcitationProfile {
    ExcitationProfile::sinusoid(50.0, 0.2, duration, 100.0)
}

fn pwm_sweep(duration: f64) -> ExcitationProfile {
    ExcitationProfile::sinusoid(300.0, 0.1, duration, 100.0)
}

fn friction_errors(got: &FrictionParams, want: &FrictionParams, cv: bool) -> f64 {
    let mut e = rel(got.k_c, want.k_c).max(rel(got.k_v, want.k_v));
    if !cv {
        e = e.max(rel(got.sigma_plus, want.sigma_plus)).max(rel(got.sigma_minus, want.sigma_minus));
    }
    e
}

/// Independent evaluation of the friction law.
fn friction_oracle(k_c: f64, k_v: f64, sp: f64, sm: f64, ws: f64, w: f64) -> f64 {
    if w > 0.0 {
        -(k_c + (sp - k_c) * (-w / ws).exp() + k_v * w)
    } else if w < 0.0 {
        k_c + (sm - k_c) * (w / ws).exp() - k_v * w
    } else {
        0.0
    }
}

fn c1_design_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut worst_oracle: f64 = 0.0;
    for _ in 0..10_000 {
        let k_c = rng.gen_range(0.0..2.0);
        let k_v = rng.gen_range(0.0..2.0);
        let sp = rng.gen_range(0.0..3.0);
        let sm = rng.gen_range(0.0..3.0);
        let ws = rng.gen_range(0.1..5.0);
        let w = rng.gen_range(-100.0..100.0);
        let p = FrictionParams::new(k_c, k_v, sp, sm, ws).unwrap();
        let row = stribeck_row(w, ws);
        let theta = [-k_c, -k_v, -sp, -sm];
        let dot: f64 = row.iter().zip(theta).map(|(a, b)| a * b).sum();
        let model = friction_torque(&p, w).unwrap();
        worst = worst.max((dot - model).abs());
        worst_oracle = worst_oracle.max((model - friction_oracle(k_c, k_v, sp, sm, ws, w)).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-12 && worst_oracle <= 1e-12 && secs < 1.0,
        format!("max |row·Θ - τ_f| = {worst:.2e}, max |τ_f - oracle| = {worst_oracle:.2e}, {secs:.3} s"),
    )
}

fn c2_noiseless_recovery() -> Outcome {
    let start = Instant::now();
    let e = sweep(60.0);
    let cv_truth = FrictionParams::coulomb_viscous(0.85, 0.69);
    let d_cv = gen_phase1(&cv_truth, &inertia(), &e, &NoiseSpec::none()).unwrap();
    let cv = identify_friction(&d_cv, &chain(ModelKind::CoulombViscous)).unwrap();
    let cv_err = friction_errors(&cv.params, &cv_truth, true);

    let d_st = gen_phase1(&knee(), &inertia(), &e, &NoiseSpec::none()).unwrap();
    let d_m = gen_phase2(&motor(), &knee(), &inertia(), &pwm_sweep(60.0), &NoiseSpec::none()).unwrap();
    let r = identify_chain(&d_st, Some(&d_m), &chain(ModelKind::Stribeck)).unwrap();
    let st_err = friction_errors(&r.friction.params, &knee(), false);
    let m = r.motor.as_ref().unwrap().params;
    let m_err = rel(m.k_pwm_star, motor().k_pwm_star).max(rel(m.tau_0, motor().tau_0));
    let secs = start.elapsed().as_secs_f64();
    outcome(
        d_st.len() >= 5000 && cv_err <= 1e-6 && st_err <= 1e-6 && m_err <= 1e-4 && secs < 5.0,
        format!(
            "{} samples; CV {cv_err:.2e}, Stribeck {st_err:.2e}, (K*, τ0) {m_err:.2e}, {secs:.2} s",
            d_st.len()
        ),
    )
}

/// Friction plus motor records of the noisy fixture for one seed.
fn noisy_fixture(seed: u64) -> (Dataset, Dataset) {
    let d1 = gen_phase1(&knee(), &inertia(), &sweep(100.0), &NoiseSpec::torque_only(0.05, seed)).unwrap();
    let d2 = gen_phase2(
        &motor(),
        &knee(),
        &inertia(),
        &pwm_sweep(100.0),
        &NoiseSpec::torque_only(0.05, seed + 1_000_000),
    )
    .unwrap();
    (d1, d2)
}

fn c3_noisy_recovery() -> Outcome {
    let start = Instant::now();
    let mut good = 0;
    let mut worst: f64 = 0.0;
    let mut samples = 0;
    for seed in 0..100 {
        let (d1, d2) = noisy_fixture(seed);
        samples = d1.len();
        let r = identify_chain(&d1, Some(&d2), &chain(ModelKind::Stribeck)).unwrap();
        let m = r.motor.unwrap().params;
        let err = friction_errors(&r.friction.params, &knee(), false)
            .max(rel(m.k_pwm_star, motor().k_pwm_star))
            .max(rel(m.tau_0, motor().tau_0));
        worst = worst.max(err);
        if err <= 0.05 {
            good += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        samples == 10_000 && good >= 95 && secs < 60.0,
        format!("{good}/100 trials within 5% (worst {:.2}%), {samples} samples, {secs:.1} s", 100.0 * worst),
    )
}

fn random_coupling(rng: &mut ChaCha8Rng) -> CouplingMatrix {
    loop {
        let rows: Vec<Vec<f64>> = (0..3).map(|_| (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        if let Ok(t) = CouplingMatrix::from_rows(&rows) {
            return t;
        }
    }
}

fn random_vec(rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..3).map(|_| rng.gen_range(-10.0..10.0)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn c4_power_conservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut worst_cond: f64 = 0.0;
    let mut failures = 0;
    for _ in 0..1000 {
        let t = random_coupling(&mut rng);
        let omega_m = random_vec(&mut rng);
        let tau_m = random_vec(&mut rng);
        let omega_j = t.motor_to_joint_velocity(&omega_m).unwrap();
        let tau_j = t.motor_to_joint_torque(&tau_m).unwrap();
        let p_m = dot(&tau_m, &omega_m);
        let err = (dot(&tau_j, &omega_j) - p_m).abs() / p_m.abs();
        if err > 1e-12 {
            failures += 1;
        }
        if err > worst {
            worst = err;
            worst_cond = t.condition();
        }
    }
    outcome(
        failures == 0,
        format!("1000 random T; max relative power error {worst:.2e} (cond(T) {worst_cond:.1e}); {failures} above 1e-12"),
    )
}

fn blocked_chains() -> Vec<ChainTruth> {
    let other = |k_c, k_v, sp, sm| ChainTruth {
        friction: FrictionParams::new(k_c, k_v, sp, sm, 1.0).unwrap(),
        motor: MotorParams::new(0.03, -0.05, 100.0).unwrap(),
        inertia: inertia(),
    };
    vec![
        other(0.5, 0.3, 0.9, 0.8),
        ChainTruth {
            friction: knee(),
            motor: motor(),
            inertia: inertia(),
        },
        other(0.4, 0.2, 0.6, 0.7),
    ]
}

fn coupled_vs_uncoupled(noise: NoiseSpec, duration: f64) -> (IdentificationReport, IdentificationReport) {
    let t = CouplingMatrix::from_rows(&[
        vec![1.0, 0.0, 0.0],
        vec![-1.0, 1.6, 0.0],
        vec![0.0, -1.0, 1.6],
    ])
    .unwrap();
    let chains = blocked_chains();
    let c = chain(ModelKind::Stribeck);
    let opts = CoupledOptions {
        phase: CoupledPhase::Friction,
        motor_encoders: false,
    };
    let motor_noise = NoiseSpec {
        seed: noise.seed + 1,
        ..noise
    };
    let j1 = gen_coupled(&t, &chains, 1, &sweep(duration), &noise, &opts).unwrap();
    let j2 = gen_coupled(
        &t,
        &chains,
        1,
        &pwm_sweep(duration),
        &motor_noise,
        &CoupledOptions {
            phase: CoupledPhase::Motor,
            ..opts
        },
    )
    .unwrap();
    let coupled = identify_coupled_motor(&j1, Some(&j2), &t, 1, &c, &DecorrelationOptions::default()).unwrap();

    let d1 = gen_phase1(&knee(), &inertia(), &sweep(duration), &noise).unwrap();
    let d2 = gen_phase2(&motor(), &knee(), &inertia(), &pwm_sweep(duration), &motor_noise).unwrap();
    let single = identify_chain(&d1, Some(&d2), &c).unwrap();
    (coupled, single)
}

fn all_errors(r: &IdentificationReport) -> f64 {
    let m = r.motor.as_ref().unwrap().params;
    friction_errors(&r.friction.params, &knee(), false)
        .max(rel(m.k_pwm_star, motor().k_pwm_star))
        .max(rel(m.tau_0, motor().tau_0))
}

fn c5_decorrelation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let t = random_coupling(&mut rng);
        let tau_m = random_vec(&mut rng);
        let k = rng.gen_range(0..3);
        let tau_j = t.motor_to_joint_torque(&tau_m).unwrap();
        worst = worst.max((t.project_joint_torque_to_motor(k, &tau_j).unwrap() - tau_m[k]).abs());
    }

    let (coupled, single) = coupled_vs_uncoupled(NoiseSpec::none(), 60.0);
    let clean_f = friction_errors(&coupled.friction.params, &knee(), false);
    let cm = coupled.motor.as_ref().unwrap().params;
    let clean_m = rel(cm.k_pwm_star, motor().k_pwm_star).max(rel(cm.tau_0, motor().tau_0));
    let sm = single.motor.as_ref().unwrap().params;
    let agree = friction_errors(&coupled.friction.params, &single.friction.params, false)
        .max(rel(cm.k_pwm_star, sm.k_pwm_star))
        .max(rel(cm.tau_0, sm.tau_0));

    let (noisy_c, noisy_s) = coupled_vs_uncoupled(NoiseSpec::torque_only(0.05, 11), 100.0);
    let noisy = all_errors(&noisy_c).max(all_errors(&noisy_s));

    outcome(
        worst <= 1e-10 && clean_f <= 1e-6 && clean_m <= 1e-4 && agree <= 1e-6 && noisy <= 0.05,
        format!(
            "projection {worst:.2e}; noiseless coupled friction {clean_f:.2e}, motor {clean_m:.2e}, \
             coupled vs single {agree:.2e}; noisy worst {:.2}%",
            100.0 * noisy
        ),
    )
}

fn magnitude(p: &FrictionParams, w: f64) -> f64 {
    p.torque(w).abs()
}

fn c6_constrained_fit() -> Outcome {
    let (d1, _) = noisy_fixture(0);
    let free = identify_friction(&d1, &chain(ModelKind::Stribeck)).unwrap();
    let c = ChainConfig {
        constraint: DerivativeConstraint::Right,
        ..chain(ModelKind::StribeckConstrained)
    };
    let con = identify_friction(&d1, &c).unwrap();
    let p = con.params;
    // |τ_f| at 0⁺ is σ⁺; one-sided second-order difference from there.
    let h = 1e-6 * p.omega_s;
    let slope = (-3.0 * p.sigma_plus + 4.0 * magnitude(&p, h) - magnitude(&p, 2.0 * h)) / (2.0 * h);
    let ordered = con.fit.residual_rms >= free.fit.residual_rms;
    outcome(
        slope.abs() <= 1e-8 && ordered,
        format!(
            "slope at 0+ {slope:.2e}; residual constrained {:.6e} >= unconstrained {:.6e}",
            con.fit.residual_rms, free.fit.residual_rms
        ),
    )
}

fn c7_inertia_reflection() -> Outcome {
    let factor = reflect_inertia(100.0, 1.0).unwrap();
    let i_m = 3.7e-6;
    let scaled = InertiaParams::from_motor_side(100.0, i_m).unwrap().i_reflected;
    outcome(
        factor == 1e4 && scaled == 1e4 * i_m,
        format!("factor {factor}, {i_m:e} -> {scaled:e}"),
    )
}

fn c8_diagnostics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (d1, d2) = noisy_fixture(3);
    let r = identify_chain(&d1, Some(&d2), &chain(ModelKind::Stribeck)).unwrap();
    let cv = identify_friction(&d1, &chain(ModelKind::CoulombViscous)).unwrap();
    let reported = [&r.friction.fit, &r.motor.as_ref().unwrap().fit, &cv.fit]
        .iter()
        .all(|f| f.condition_number.is_finite() && f.condition_number >= 1.0);

    let mut full_rank = 0;
    for _ in 0..200 {
        let n = rng.gen_range(2..50);
        let mut omegas: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..50.0)).collect();
        let flip = rng.gen_range(1..n);
        for w in omegas.iter_mut().skip(flip) {
            *w = -*w;
        }
        let d = Dataset::from_samples(
            omegas
                .iter()
                .enumerate()
                .map(|(i, &w)| jointid::dataset::Sample {
                    t: i as f64,
                    pwm: 0.0,
                    omega: w,
                    omega_dot: 0.0,
                    tau: rng.gen_range(-1.0..1.0),
                })
                .collect(),
        )
        .unwrap();
        let fit = solve_lsq(&build_cv_design(&d, &InertiaParams::default(), 1e-3).unwrap()).unwrap();
        if fit.rank_ok && fit.condition_number.is_finite() {
            full_rank += 1;
        }
    }

    let col: Vec<f64> = (0..20).map(|i| i as f64 * 0.5 - 3.0).collect();
    let x = DMatrix::from_fn(20, 3, |r, c| if c == 0 { 1.0 } else { col[r] });
    let y = DVector::from_fn(20, |r, _| col[r] * 2.0);
    let s = DesignSystem::new(x, y, vec!["a".into(), "b".into(), "b_copy".into()]).unwrap();
    let dup = matches!(solve_lsq(&s), Err(Error::RankDeficient { .. }));

    outcome(
        reported && full_rank == 200 && dup,
        format!("condition reported on every fit: {reported}; CV full rank {full_rank}/200; duplicated column rejected: {dup}"),
    )
}

/// A strict decrease followed by a strict increase along `values`.
fn has_dip(values: &[f64]) -> bool {
    let mut fell = false;
    for w in values.windows(2) {
        if w[1] < w[0] {
            fell = true;
        } else if fell && w[1] > w[0] {
            return true;
        }
    }
    false
}

fn dip(p: &FrictionParams) -> (bool, bool) {
    let grid: Vec<f64> = (1..5000).map(|i| i as f64 * 1e-3 * p.omega_s).collect();
    let right: Vec<f64> = grid.iter().map(|w| magnitude(p, *w)).collect();
    let left: Vec<f64> = grid.iter().map(|w| magnitude(p, -*w)).collect();
    (has_dip(&right), has_dip(&left))
}

fn c9_qualitative_shape() -> Outcome {
    let (d1, _) = noisy_fixture(0);
    let st: FrictionReport = identify_friction(&d1, &chain(ModelKind::Stribeck)).unwrap();
    let cv = identify_friction(&d1, &chain(ModelKind::CoulombViscous)).unwrap();
    let (right, left) = dip(&st.params);
    outcome(
        st.fit.residual_rms < cv.fit.residual_rms && (right || left),
        format!(
            "residual Stribeck {:.4e} < CV {:.4e}; dip on ω>0: {right}, on ω<0: {left}",
            st.fit.residual_rms, cv.fit.residual_rms
        ),
    )
}

fn pipeline_bytes(seed: u64) -> (Vec<u8>, String) {
    let (d1, d2) = noisy_fixture(seed);
    let mut csv = Vec::new();
    write_dataset(&d1, &mut csv).unwrap();
    write_dataset(&d2, &mut csv).unwrap();
    let r = identify_chain(&d1, Some(&d2), &chain(ModelKind::StribeckConstrained)).unwrap();
    (csv, ReportDocument::from(&r).to_toml().unwrap())
}

fn c10_determinism() -> Outcome {
    let (csv_a, rep_a) = pipeline_bytes(17);
    let (csv_b, rep_b) = pipeline_bytes(17);
    let (_, rep_c) = pipeline_bytes(18);
    outcome(
        csv_a == csv_b && rep_a == rep_b && rep_a != rep_c,
        format!(
            "datasets {} bytes identical: {}; reports {} bytes identical: {}",
            csv_a.len(),
            csv_a == csv_b,
            rep_a.len(),
            rep_a == rep_b
        ),
    )
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "design/model identity", c1_design_identity),
        (2, "noiseless recovery", c2_noiseless_recovery),
        (3, "noisy recovery", c3_noisy_recovery),
        (4, "coupling power conservation", c4_power_conservation),
        (5, "decorrelation correctness", c5_decorrelation),
        (6, "constrained fit", c6_constrained_fit),
        (7, "inertia reflection", c7_inertia_reflection),
        (8, "diagnostics", c8_diagnostics),
        (9, "Stribeck vs Coulomb-viscous shape", c9_qualitative_shape),
        (10, "determinism", c10_determinism),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        let o = run();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {id:>2} {name}: {}", o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
