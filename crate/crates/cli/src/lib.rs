//! Command-line front end: configuration, workloads and artifact output.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::RunConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "unravel", version, about = "Quantum trajectory unravelings and Duffing surfaces of section")]
pub struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Overrides `base_seed`.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,

    /// Overrides the output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Worker threads for ensembles (default: all processing units).
    #[arg(long, global = true, value_name = "N", env = "UNRAVEL_WORKERS")]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Surface of section of the classical Duffing oscillator.
    ClassicalSection,
    /// Surface of section of one quantum Duffing trajectory.
    QuantumSection,
    /// Trajectory ensemble against the density-matrix oracle.
    OracleCompare,
    /// Damped-oscillator checks: oracle moments, localization, coherent-state reduction, jump rate.
    HoValidate,
    /// Ensemble error scaling with the number of trajectories.
    ConvergenceStudy,
    /// Print the annotated default configuration.
    Defaults,
}

/// Loads the configuration and applies command-line overrides.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.base_seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output = out.clone();
    }
    Ok(cfg)
}

/// Runs one command, writing its report lines to `out`. Returns whether every
/// check passed.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<bool, CliError> {
    let stdout_err = |e| CliError::io(std::path::Path::new("<stdout>"), e);
    if cli.command == Command::Defaults {
        out.write_all(config::DEFAULT_CONFIG_TOML.as_bytes()).map_err(stdout_err)?;
        return Ok(true);
    }
    if cli.workers == Some(0) {
        return Err(CliError::Validation("--workers: must be ≥ 1".into()));
    }
    let cfg = resolve_config(cli)?;
    let workers = cli.workers;
    let (lines, pass) = match cli.command {
        Command::ClassicalSection => {
            let r = commands::classical_section_cmd(&cfg)?;
            (
                vec![format!(
                    "classical section: {} points, std(x) = {:.4}, max |x|,|p| = {:.4} -> {}",
                    r.points,
                    r.x_std,
                    r.max_abs,
                    r.csv.display()
                )],
                true,
            )
        }
        Command::QuantumSection => {
            let r = commands::quantum_section_cmd(&cfg)?;
            let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"));
            (
                vec![
                    format!("quantum section beta = {}: {} points -> {}", r.beta, r.points, r.csv.display()),
                    format!(
                        "  strobe displacement rms: {} (model map), {} (classical map)",
                        fmt(r.displacement_mean_field),
                        fmt(r.displacement_classical)
                    ),
                    format!(
                        "  ehrenfest defect rms / beta: q {:.4e}, p {:.4e}",
                        r.ehrenfest_defect_q, r.ehrenfest_defect_p
                    ),
                    format!(
                        "  std(x) = {:.4}, max boundary population = {:.3e}",
                        r.x_std, r.max_boundary_population
                    ),
                ],
                true,
            )
        }
        Command::OracleCompare => {
            let r = commands::oracle_compare_cmd(&cfg, workers)?;
            (r.lines(), r.pass)
        }
        Command::HoValidate => {
            let r = commands::ho_validate_cmd(&cfg, workers)?;
            (r.checks.iter().map(|c| c.line()).collect(), r.pass())
        }
        Command::ConvergenceStudy => {
            let r = commands::convergence_study_cmd(&cfg, workers)?;
            (r.lines(), r.pass)
        }
        Command::Defaults => unreachable!("handled above"),
    };
    for l in lines {
        writeln!(out, "{l}").map_err(stdout_err)?;
    }
    Ok(pass)
}

/// Parses `args`, runs the command and maps the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match execute(&cli, &mut lock) {
        Ok(true) => 0,
        Ok(false) => {
            eprintln!("error: one or more checks failed");
            3
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let Some(h) = e.hint() {
                eprintln!("hint: {h}");
            }
            e.exit_code()
        }
    }
}
