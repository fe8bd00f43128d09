use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};

use jointid::coupling::CouplingMatrix;
use jointid::error::{Error, Result};
use jointid::identify::{decorrelate, friction_points, identify_chain, identify_coupled_motor, IdentificationReport};
use jointid::io::config::RunConfig;
use jointid::io::csv::{load_coupled_dataset, load_dataset, save_coupled_dataset, save_curve, save_dataset};
use jointid::io::report::ReportDocument;
use jointid::simulator::{gen_coupled, gen_phase1, gen_phase2_with, CoupledOptions, CoupledPhase};

#[derive(Parser)]
#[command(name = "jointid", version, about = "Friction and motor identification for actuated joints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic records from the [simulate] section.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Friction record path; overrides paths.data.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Motor record path; overrides paths.motor_data.
        #[arg(long)]
        motor_data: Option<PathBuf>,
    },
    /// Identify one transmission chain.
    Identify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        motor_data: Option<PathBuf>,
        /// Report path; overrides paths.output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fitted-curve CSV path; overrides paths.curve.
        #[arg(long)]
        curve: Option<PathBuf>,
        /// Which [[motors]] override applies.
        #[arg(long, default_value_t = 0)]
        chain: usize,
    },
    /// Identify motors of a coupled group, one report per motor.
    IdentifyCoupled {
        #[arg(long)]
        config: PathBuf,
        /// Motor index; repeat for several. Defaults to coupling.motor.
        #[arg(long = "motor")]
        motors: Vec<usize>,
        /// `{k}` in a path is replaced by the motor index.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        motor_data: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Print a stored report.
    Report {
        path: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Check a configuration file without touching data.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Toml,
}

fn per_motor(p: &Path, k: usize) -> PathBuf {
    PathBuf::from(p.to_string_lossy().replace("{k}", &k.to_string()))
}

fn required(cfg: &RunConfig, explicit: Option<PathBuf>, configured: Option<&PathBuf>, key: &str) -> Result<PathBuf> {
    explicit
        .or_else(|| configured.map(|p| cfg.resolve_path(p)))
        .ok_or_else(|| Error::Config(format!("no {key} path given")))
}

fn optional(cfg: &RunConfig, explicit: Option<PathBuf>, configured: Option<&PathBuf>) -> Option<PathBuf> {
    explicit.or_else(|| configured.map(|p| cfg.resolve_path(p)))
}

fn load_config(path: &Path) -> Result<RunConfig> {
    let cfg = RunConfig::load(path)?;
    cfg.validate()?;
    Ok(cfg)
}

fn simulate(config: &Path, data: Option<PathBuf>, motor_data: Option<PathBuf>) -> Result<()> {
    let cfg = load_config(config)?;
    let sim = cfg
        .simulate
        .as_ref()
        .ok_or_else(|| Error::Config("missing [simulate] section".into()))?;
    let truths = cfg.truths()?;
    let data = required(&cfg, data, cfg.paths.data.as_ref(), "paths.data")?;
    let motor_data = optional(&cfg, motor_data, cfg.paths.motor_data.as_ref());
    if sim.motor_excitation.is_some() && motor_data.is_none() {
        return Err(Error::Config("motor_excitation set but no paths.motor_data".into()));
    }

    match (cfg.coupling_matrix()?, &cfg.coupling) {
        (Some(t), Some(section)) => {
            let templated = data.to_string_lossy().contains("{k}");
            let motors: Vec<usize> = if templated { (0..t.dim()).collect() } else { vec![section.motor] };
            for k in motors {
                let opts = CoupledOptions {
                    phase: CoupledPhase::Friction,
                    motor_encoders: sim.motor_encoders,
                };
                let mut noise = sim.noise();
                noise.seed = noise.seed.wrapping_add(2 * k as u64);
                let d = gen_coupled(&t, &truths, k, &sim.excitation, &noise, &opts)?;
                let path = per_motor(&data, k);
                save_coupled_dataset(&d, &path)?;
                info!("wrote {} ({} samples)", path.display(), d.len());
                if let (Some(e), Some(mp)) = (&sim.motor_excitation, &motor_data) {
                    let opts = CoupledOptions {
                        phase: CoupledPhase::Motor,
                        ..opts
                    };
                    noise.seed = noise.seed.wrapping_add(1);
                    let d = gen_coupled(&t, &truths, k, e, &noise, &opts)?;
                    let path = per_motor(mp, k);
                    save_coupled_dataset(&d, &path)?;
                    info!("wrote {} ({} samples)", path.display(), d.len());
                }
            }
        }
        _ => {
            let truth = &truths[0];
            let d = gen_phase1(&truth.friction, &truth.inertia, &sim.excitation, &sim.noise())?;
            save_dataset(&d, &data)?;
            info!("wrote {} ({} samples)", data.display(), d.len());
            if let (Some(e), Some(mp)) = (&sim.motor_excitation, &motor_data) {
                let opts = sim.phase2_options(&cfg.chain_for(0)?);
                let d = gen_phase2_with(&truth.motor, &truth.friction, &truth.inertia, e, &sim.motor_noise(), &opts)?;
                save_dataset(&d, mp)?;
                info!("wrote {} ({} samples)", mp.display(), d.len());
            }
        }
    }
    Ok(())
}

fn warn_conditioning(cfg: &RunConfig, r: &IdentificationReport) {
    let limit = cfg.solve.condition_warn;
    let fits = std::iter::once(("friction", &r.friction.fit)).chain(r.motor.as_ref().map(|m| ("motor", &m.fit)));
    for (phase, fit) in fits {
        if fit.condition_number > limit {
            warn!("{} {phase} fit is ill-conditioned: cond = {:.3e}", r.shaft, fit.condition_number);
        }
    }
}

fn emit(doc: &ReportDocument, out: Option<&Path>) -> Result<()> {
    if let Some(out) = out {
        doc.save(out)?;
        info!("wrote {}", out.display());
    }
    print!("{}", doc.render_text());
    Ok(())
}

fn identify(
    config: &Path,
    data: Option<PathBuf>,
    motor_data: Option<PathBuf>,
    out: Option<PathBuf>,
    curve: Option<PathBuf>,
    chain: usize,
) -> Result<()> {
    let cfg = load_config(config)?;
    let c = cfg.chain_for(chain)?;
    let data = cfg
        .input(data.as_deref(), cfg.paths.data.as_ref(), "data")?
        .ok_or_else(|| Error::Config("no data path given".into()))?;
    let motor_data = cfg.input(motor_data.as_deref(), cfg.paths.motor_data.as_ref(), "motor data")?;
    let d1 = load_dataset(&data)?;
    let d2 = motor_data.as_deref().map(load_dataset).transpose()?;
    let report = identify_chain(&d1, d2.as_ref(), &c)?;
    warn_conditioning(&cfg, &report);
    if let Some(curve) = optional(&cfg, curve, cfg.paths.curve.as_ref()) {
        save_curve(&friction_points(&d1, &report.friction, &c), &curve)?;
    }
    let out = optional(&cfg, out, cfg.paths.output.as_ref());
    emit(&ReportDocument::from(&report), out.as_deref())
}

fn identify_coupled(
    config: &Path,
    motors: Vec<usize>,
    data: Option<PathBuf>,
    motor_data: Option<PathBuf>,
    out_dir: Option<PathBuf>,
) -> Result<()> {
    let cfg = load_config(config)?;
    let section = cfg
        .coupling
        .as_ref()
        .ok_or_else(|| Error::Config("identify-coupled needs a [coupling] section".into()))?;
    let t: CouplingMatrix = section.matrix()?;
    let opts = section.decorrelation();
    let motors = if motors.is_empty() { vec![section.motor] } else { motors };
    let data = required(&cfg, data, cfg.paths.data.as_ref(), "paths.data")?;
    let motor_data = optional(&cfg, motor_data, cfg.paths.motor_data.as_ref());
    let out_dir = optional(&cfg, out_dir, cfg.paths.out_dir.as_ref());
    if let Some(dir) = &out_dir {
        std::fs::create_dir_all(dir)?;
    }
    for k in motors {
        if k >= t.dim() {
            return Err(Error::IndexOutOfRange { index: k, n: t.dim() });
        }
        let c = cfg.chain_for(k)?;
        let d1_path = cfg
            .input(Some(&per_motor(&data, k)), None, "data")?
            .expect("explicit path");
        let d1 = load_coupled_dataset(&d1_path)?;
        let d2 = match &motor_data {
            Some(p) => Some(load_coupled_dataset(
                &cfg.input(Some(&per_motor(p, k)), None, "motor data")?.expect("explicit path"),
            )?),
            None => None,
        };
        let report = identify_coupled_motor(&d1, d2.as_ref(), &t, k, &c, &opts)?;
        warn_conditioning(&cfg, &report);
        if let Some(cp) = &report.coupling {
            if cp.rejected_samples > 0 {
                warn!("motor {k}: {} samples rejected with moving siblings", cp.rejected_samples);
            }
        }
        let out = out_dir.as_ref().map(|d| d.join(format!("report_motor_{k}.toml")));
        if let Some(dir) = &out_dir {
            let projected = decorrelate(&d1, &t, k, c.accel_window, &opts)?;
            save_curve(
                &friction_points(&projected.dataset, &report.friction, &c),
                &dir.join(format!("curve_motor_{k}.csv")),
            )?;
        }
        emit(&ReportDocument::from(&report), out.as_deref())?;
    }
    Ok(())
}

fn report(path: &Path, format: Format) -> Result<()> {
    let doc = ReportDocument::load(path)?;
    match format {
        Format::Text => print!("{}", doc.render_text()),
        Format::Toml => print!("{}", doc.to_toml()?),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            data,
            motor_data,
        } => simulate(&config, data, motor_data),
        Command::Identify {
            config,
            data,
            motor_data,
            out,
            curve,
            chain,
        } => identify(&config, data, motor_data, out, curve, chain),
        Command::IdentifyCoupled {
            config,
            motors,
            data,
            motor_data,
            out_dir,
        } => identify_coupled(&config, motors, data, motor_data, out_dir),
        Command::Report { path, format } => report(&path, format),
        Command::ValidateConfig { config } => {
            load_config(&config)?;
            println!("ok");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
