//! `mpopf` command-line driver.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mpopf_core::relax::{Model, DEFAULT_THRESHOLD};

pub mod batch;
pub mod commands;
pub mod error;
pub mod table;

use commands::{NetSource, OpfArgs, Report};
use error::CliError;
use table::{write_table, RunRecord};

#[derive(Debug, Parser)]
#[command(
    name = "mpopf",
    version,
    about = "Power flow, linear approximation and OPF relaxations for multiphase radial feeders"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Directory for output files
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Use a synthetic feeder generated from this seed instead of a file
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Relative duality gap tolerance of the conic solver
    #[arg(long, global = true)]
    pub solver_gap: Option<f64>,
    /// Feasibility tolerance of the conic solver
    #[arg(long, global = true)]
    pub solver_feas: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Forward-backward sweep power flow
    Pf {
        network: Option<PathBuf>,
        injections: Option<PathBuf>,
    },
    /// Linear power flow approximation
    Lpf {
        network: Option<PathBuf>,
        injections: Option<PathBuf>,
    },
    /// Solve a relaxation of the loss-minimizing OPF
    Opf {
        network: Option<PathBuf>,
        #[arg(long, default_value = "bfm", value_parser = parse_model)]
        model: Model,
        /// Replace the bounds of every branch bus with [1 - x, 1 + x]
        #[arg(long)]
        vband: Option<f64>,
        /// Largest second-to-first eigenvalue ratio accepted as rank one
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        /// Recover voltages even when the solution is not rank one
        #[arg(long)]
        force_recover: bool,
    },
    /// Power flow against the linear approximation
    Compare {
        network: Option<PathBuf>,
        injections: Option<PathBuf>,
    },
    /// Validate a network file
    Check { network: PathBuf },
    /// Run a manifest of independent jobs
    Batch {
        manifest: PathBuf,
        /// Worker threads (default: available parallelism)
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn parse_model(s: &str) -> Result<Model, String> {
    s.parse().map_err(|e: mpopf_core::Error| e.to_string())
}

fn print_records(records: &[RunRecord]) {
    let mut out = std::io::stdout().lock();
    if let Err(e) = write_table(&mut out, records) {
        eprintln!("error: {e}");
    }
    let _ = out.flush();
}

fn finish(rep: Report) -> u8 {
    print_records(std::slice::from_ref(&rep.record));
    for n in &rep.notes {
        eprintln!("{n}");
    }
    rep.code
}

pub fn run(cli: Cli) -> Result<u8, CliError> {
    let settings = commands::solver_settings(cli.solver_gap, cli.solver_feas);
    let out = cli.out.as_path();
    match cli.command {
        Command::Pf {
            network,
            injections,
        } => {
            let src = NetSource::resolve(network, cli.seed)?;
            Ok(finish(commands::cmd_pf(&src, injections.as_deref(), out)?))
        }
        Command::Lpf {
            network,
            injections,
        } => {
            let src = NetSource::resolve(network, cli.seed)?;
            Ok(finish(commands::cmd_lpf(&src, injections.as_deref(), out)?))
        }
        Command::Compare {
            network,
            injections,
        } => {
            let src = NetSource::resolve(network, cli.seed)?;
            Ok(finish(commands::cmd_compare(
                &src,
                injections.as_deref(),
                out,
            )?))
        }
        Command::Opf {
            network,
            model,
            vband,
            threshold,
            force_recover,
        } => {
            let src = NetSource::resolve(network, cli.seed)?;
            let args = OpfArgs {
                model,
                vband,
                threshold,
                force_recover,
                settings,
            };
            Ok(finish(commands::cmd_opf(&src, &args, out)?))
        }
        Command::Check { network } => {
            let (ok, lines) = commands::cmd_check(&network)?;
            for l in lines {
                println!("{l}");
            }
            Ok(if ok { 0 } else { 1 })
        }
        Command::Batch { manifest, jobs } => {
            let jobs =
                jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let (records, code) = batch::cmd_batch(&manifest, &settings, out, jobs)?;
            print_records(&records);
            Ok(code)
        }
    }
}

pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
