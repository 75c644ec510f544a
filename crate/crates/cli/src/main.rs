use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wavepart_cli::config::{validate_config, Experiment, RunConfig};
use wavepart_cli::run::{is_config_error, run, write_outputs};

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

/// Numerical experiments for a wave field coupled to a charged particle.
///
/// Exit status: 0 when every criterion passes, 1 when one fails, 2 for an
/// invalid configuration.
#[derive(Parser, Debug)]
#[command(name = "wavepart", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration with dotted keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; one subdirectory per experiment.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Seed for the initial data; overrides `seed` in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for grid transforms.
    #[arg(long, global = true, env = "WAVEPART_WORKERS")]
    workers: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Scan |rho_hat(k)| for zeros.
    WienerScan,
    /// Scan b(i nu + 0) on the imaginary axis.
    StabilityScan,
    /// Weighted decay of the free wave group.
    FreeDecay,
    /// Decay of the linearized dynamics.
    LinearDecay,
    /// Decay of the full dynamics toward the stationary state.
    NonlinearDecay,
    /// Scattering state and remainder decay.
    Scattering,
    /// Every experiment in turn.
    All,
}

impl Command {
    fn experiments(self) -> Vec<Experiment> {
        match self {
            Command::WienerScan => vec![Experiment::WienerScan],
            Command::StabilityScan => vec![Experiment::StabilityScan],
            Command::FreeDecay => vec![Experiment::FreeDecay],
            Command::LinearDecay => vec![Experiment::LinearDecay],
            Command::NonlinearDecay => vec![Experiment::NonlinearDecay],
            Command::Scattering => vec![Experiment::Scattering],
            Command::All => Experiment::ALL.to_vec(),
        }
    }
}

fn config_error(msg: &str) -> ExitCode {
    eprintln!("config error: {msg}");
    ExitCode::from(EXIT_CONFIG)
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let workers = match cli.workers {
        Some(0) => return config_error("WAVEPART_WORKERS must be at least 1"),
        Some(n) => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                return config_error(&e.to_string());
            }
            n
        }
        None => rayon::current_num_threads(),
    };

    let text = match &cli.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => Some(t),
            Err(e) => return config_error(&format!("cannot read {}: {e}", path.display())),
        },
        None => None,
    };
    let mut cfg = match text.as_deref().map(RunConfig::from_toml) {
        Some(Ok(c)) => c,
        Some(Err(e)) => return config_error(&e),
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(name) = &cfg.experiment {
        if Experiment::parse(name).is_none() {
            return config_error(&format!("unknown experiment {name:?}"));
        }
    }
    let root = cli
        .output
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("wavepart-out"));

    let experiments = cli.command.experiments();
    let mut invalid = false;
    for &exp in &experiments {
        for v in validate_config(&cfg, exp) {
            eprintln!("config error ({}): {v}", exp.name());
            invalid = true;
        }
    }
    if invalid {
        return ExitCode::from(EXIT_CONFIG);
    }

    let mut status = 0u8;
    for exp in experiments {
        match run(&cfg, exp) {
            Ok(out) => {
                for c in &out.criteria {
                    let tag = if c.pass { "PASS" } else { "FAIL" };
                    println!("{tag} {}: {}: {}", exp.name(), c.name, c.detail);
                }
                if !out.passed() {
                    status = status.max(EXIT_FAIL);
                }
                let dir = root.join(exp.name());
                if let Err(e) = write_outputs(&dir, &cfg, text.as_deref(), &out, workers) {
                    eprintln!("FAIL {}: cannot write outputs to {}: {e}", exp.name(), dir.display());
                    status = status.max(EXIT_FAIL);
                }
            }
            Err(e) if is_config_error(&e) => {
                eprintln!("config error ({}): {e}", exp.name());
                status = status.max(EXIT_CONFIG);
            }
            Err(e) => {
                println!("FAIL {}: run aborted: {e}", exp.name());
                status = status.max(EXIT_FAIL);
            }
        }
    }
    ExitCode::from(status)
}
