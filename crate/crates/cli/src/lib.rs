//! `jamleg`: runs tendon calibration, rig scenarios and GRF analysis from a
//! JSON configuration and writes a checksummed result bundle.

pub mod bundle;
pub mod config;
pub mod error;
pub mod jobs;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use jamleg_core::scenarios::{checks_csv, Check, RunSettings};

use crate::bundle::{sha256_hex, timestamp, Bundle, Manifest};
use crate::config::{ConfigFile, TendonState};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "jamleg",
    version,
    about = "Fibre-jammed tendon leg: calibration, rig scenarios and GRF analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON configuration; every section is optional.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Bundle directory, replaced atomically on success.
    #[arg(long, global = true, value_name = "DIR", default_value = "jamleg-out")]
    out: PathBuf,
    #[arg(long, global = true, value_name = "N", default_value_t = 0)]
    seed: u64,
    /// Integration step for simulated scenarios, s.
    #[arg(long, global = true, value_name = "S")]
    dt: Option<f64>,
    /// Worker threads for independent trials.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
    /// Evaluate the property checks and exit 3 if any fails.
    #[arg(long, global = true)]
    check: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Calibrate a tendon against its tensile targets and cycle it.
    Tendon {
        /// Bundle id, e.g. 2.0mm_hex4.
        #[arg(long)]
        spec: Option<String>,
        #[arg(long, value_enum)]
        state: Option<TendonState>,
    },
    /// Drop the single-joint rig onto the perturbator.
    Drop,
    /// Drop the leg onto an obstacle under each jamming configuration.
    Collide,
    /// Rotational perturbation sweep and per-tendon contributions.
    Perturb {
        /// Analyse the fixture table instead of simulating.
        #[arg(long)]
        analysis_only: bool,
    },
    /// Walk the four jamming cases.
    Walk,
    /// Filter and segment recorded walking trials.
    Analyze {
        /// Walking record CSVs, added to those in the config.
        inputs: Vec<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Tendon { .. } => "tendon",
            Command::Drop => "drop",
            Command::Collide => "collide",
            Command::Perturb { .. } => "perturb",
            Command::Walk => "walk",
            Command::Analyze { .. } => "analyze",
        }
    }
}

/// Applies flags to the config.
fn effective(cli: &Cli, mut cfg: ConfigFile) -> CliResult<ConfigFile> {
    if let Some(dt) = cli.dt {
        if matches!(cli.command, Command::Tendon { .. } | Command::Analyze { .. }) {
            return Err(CliError::Usage(format!(
                "--dt has no effect on `{}`",
                cli.command.name()
            )));
        }
        RunSettings { dt }.validate()?;
        cfg.drop.rig.run.dt = dt;
        cfg.collide.rig.run.dt = dt;
        cfg.perturb.rig.run.dt = dt;
        cfg.walk.rig.run.dt = dt;
    }
    match &cli.command {
        Command::Tendon { spec, state } => {
            if let Some(s) = spec {
                cfg.tendon.spec = s.clone();
            }
            if let Some(s) = state {
                cfg.tendon.states = vec![*s];
            }
        }
        Command::Perturb { analysis_only } => cfg.perturb.analysis_only |= analysis_only,
        Command::Analyze { inputs } => cfg.analyze.inputs.extend(inputs.iter().cloned()),
        _ => {}
    }
    Ok(cfg)
}

/// The section that will run, as recorded in the bundle.
fn section_json(cmd: &Command, cfg: &ConfigFile) -> CliResult<String> {
    let v = match cmd {
        Command::Tendon { .. } => serde_json::to_string_pretty(&cfg.tendon),
        Command::Drop => serde_json::to_string_pretty(&cfg.drop),
        Command::Collide => serde_json::to_string_pretty(&cfg.collide),
        Command::Perturb { .. } => serde_json::to_string_pretty(&cfg.perturb),
        Command::Walk => serde_json::to_string_pretty(&cfg.walk),
        Command::Analyze { .. } => serde_json::to_string_pretty(&cfg.analyze),
    };
    Ok(v.map_err(|e| CliError::Invalid(e.into()))? + "\n")
}

fn dispatch(cli: &Cli, cfg: &ConfigFile, bundle: &mut Bundle) -> CliResult<Vec<Check>> {
    match cli.command {
        Command::Tendon { .. } => jobs::tendon(&cfg.tendon, bundle),
        Command::Drop => jobs::drop(&cfg.drop, bundle),
        Command::Collide => jobs::collide(&cfg.collide, bundle),
        Command::Perturb { .. } => jobs::perturb(&cfg.perturb, cli.seed, bundle),
        Command::Walk => jobs::walk(&cfg.walk, bundle),
        Command::Analyze { .. } => jobs::analyze(&cfg.analyze, bundle),
    }
}

fn run(cli: &Cli) -> CliResult<bool> {
    let started = timestamp();
    let cfg = config::load(cli.config.as_deref())?;
    let cfg = effective(cli, cfg)?;
    let config_json = section_json(&cli.command, &cfg)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Usage(e.to_string()))?;
    let mut bundle = Bundle::default();
    let checks = pool.install(|| dispatch(cli, &cfg, &mut bundle))?;
    if cli.check {
        bundle.add("checks.csv", checks_csv(&checks));
        for c in &checks {
            eprintln!("{} {}: {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail);
        }
    }
    bundle.add("config.json", config_json.clone());
    let manifest = Manifest {
        tool: "jamleg".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cli.command.name().into(),
        seed: cli.seed,
        dt: cli.dt,
        config_sha256: sha256_hex(config_json.as_bytes()),
        started,
        finished: timestamp(),
        files: Vec::new(),
    };
    bundle.promote(&cli.out, manifest)?;
    Ok(!cli.check || checks.iter().all(|c| c.passed))
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return u8::from(e.use_stderr());
        }
    };
    match run(&cli) {
        Ok(true) => 0,
        Ok(false) => 3,
        Err(e) => {
            eprintln!("error: {e}");
            bundle::write_error_log(&cli.out, &e.to_string());
            e.exit_code() as u8
        }
    }
}
