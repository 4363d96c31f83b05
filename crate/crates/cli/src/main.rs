use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use curveflow::driver::{run_with, Mode};
use curveflow_cli::config::parse_config;
use curveflow_cli::output::write_run;
use curveflow_cli::table::cmd_table;
use curveflow_cli::validate::{cmd_validate, ValidateOptions};

#[derive(Parser)]
#[command(name = "curveflow", version, about = "Multiphase curvature flow by vector-valued thresholding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation described by a key = value config file.
    Run {
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write one SVG per output frame.
        #[arg(long)]
        svg: bool,
    },
    /// Print the shrinking-disk error table.
    Table {
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Large sweep (5..160 cells, subdivisions up to 256).
        #[arg(long)]
        full: bool,
    },
    /// Run the oracle cross-checks.
    Validate {
        /// Only run checks whose name contains this string.
        #[arg(long)]
        filter: Option<String>,
        #[arg(long, hide = true)]
        inject_frame_fault: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Bmo,
    #[value(name = "bmo_star")]
    BmoStar,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, out, svg } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", config.display());
                    return ExitCode::from(2);
                }
            };
            let cfg = match parse_config(&text) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("usage error in {}: {e}", config.display());
                    return ExitCode::from(2);
                }
            };
            let start = Instant::now();
            let every = cfg.output_every;
            let traj = match run_with(&cfg, |r| {
                if r.step % every == 0 {
                    eprintln!("step {:>6}  t = {:.6}  length = {:.6}", r.step, r.time, r.interface_length);
                }
            }) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::FAILURE;
                }
            };
            if let Err(e) = write_run(&out, &traj, svg, start.elapsed()) {
                eprintln!("error: writing {}: {e}", out.display());
                return ExitCode::FAILURE;
            }
            println!("wrote {}", out.display());
            ExitCode::SUCCESS
        }
        Command::Table { mode, full } => {
            let mode = match mode {
                ModeArg::Bmo => Mode::Bmo,
                ModeArg::BmoStar => Mode::BmoStar,
            };
            match cmd_table(mode, full) {
                Ok(t) => {
                    print!("{t}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
        Command::Validate {
            filter,
            inject_frame_fault,
        } => {
            let opts = ValidateOptions {
                filter,
                perturb_frame: inject_frame_fault,
            };
            let results = cmd_validate(&opts, |r| println!("{r}"));
            let failed = results.iter().filter(|r| !r.pass).count();
            if results.is_empty() {
                eprintln!("no check matches the filter");
                return ExitCode::FAILURE;
            }
            println!("{} checks, {failed} failed", results.len());
            if failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
