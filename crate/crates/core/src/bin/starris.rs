use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use starris::bcd::Scheme;
use starris::config::{load_config, ConfigError, Preset};
use starris::experiment::{
    convergence_trace, run_sweep, simulate, write_convergence, write_rows, ExperimentError, SweepParam, SweepSpec,
};
use starris::scenario::SystemConfig;

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "starris", version, about = "STAR-RIS uplink sum-rate experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; omitted keys come from the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base parameter set (desk: N = 16, 200 iterations; paper: N = 64, 1000 iterations).
    #[arg(long)]
    preset: Option<Preset>,
    /// Record wall-clock runtimes (makes outputs non-reproducible).
    #[arg(long)]
    timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one channel draw and write per-scheme JSON reports.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Trial index under the configured key.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "proposed,rabm,rsv,rabm_rsv,fstar")]
        schemes: Vec<Scheme>,
    },
    /// Sum rate per iteration of the proposed scheme.
    Convergence {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mean-over-trials experiment along one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value_t = 20)]
        trials: u64,
        #[arg(long, value_delimiter = ',', default_value = "proposed,rabm,rsv,rabm_rsv,fstar")]
        schemes: Vec<Scheme>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure {
            code: EXIT_CONFIG,
            error: e.into(),
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        let code = if e.is_config() { EXIT_CONFIG } else { EXIT_RUNTIME };
        Failure { code, error: e.into() }
    }
}

fn config(common: &Common, fallback: Preset) -> Result<SystemConfig, Failure> {
    let preset = common.preset.unwrap_or(fallback);
    match &common.config {
        Some(path) => Ok(load_config(path, preset)?),
        None => Ok(preset.base()),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate {
            common,
            seed,
            out,
            schemes,
        } => {
            let cfg = config(&common, Preset::Paper)?;
            simulate(&cfg, seed, &schemes, &out, common.timing)?;
        }
        Command::Convergence { common, seed, out } => {
            let cfg = config(&common, Preset::Paper)?;
            let trace = convergence_trace(&cfg, seed)?;
            write_convergence(&out, &trace)?;
        }
        Command::Sweep {
            common,
            param,
            values,
            trials,
            schemes,
            out,
            threads,
        } => {
            let cfg = config(&common, Preset::Desk)?;
            let spec = SweepSpec {
                param,
                values,
                trials,
                schemes,
            };
            let rows = run_sweep(&cfg, &spec, threads, common.timing)?;
            write_rows(&out, &rows)?;
            let expected = spec.values.len() as u64 * trials * {
                let mut s = spec.schemes.clone();
                s.sort();
                s.dedup();
                s.len() as u64
            };
            if rows.len() as u64 != expected {
                return Err(Failure {
                    code: EXIT_RUNTIME,
                    error: anyhow::anyhow!("wrote {} rows, expected {expected}", rows.len()),
                });
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
