use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use protoclone_cli::{execute, CommandKind, RunOptions};

#[derive(Parser)]
#[command(name = "protoclone", version, about = "Protective-measurement spin state estimation")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// JSON run configuration; the bundled demo config when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (PROTOCLONE_OUT takes precedence).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 1 runs sequentially.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Bound-level table of the double well.
    Spectrum,
    /// Probe momentum against the polar angle.
    KickCurve,
    /// Reconstruct a hidden state and run the Monte Carlo batch.
    Clone,
    /// Tell |0> from |+> with single probe readouts.
    Discriminate,
    /// Brute-force propagation checks.
    Oracle,
    /// Batch runs over config axes.
    Sweep,
}

impl From<Cmd> for CommandKind {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Spectrum => CommandKind::Spectrum,
            Cmd::KickCurve => CommandKind::KickCurve,
            Cmd::Clone => CommandKind::Clone,
            Cmd::Discriminate => CommandKind::Discriminate,
            Cmd::Oracle => CommandKind::Oracle,
            Cmd::Sweep => CommandKind::Sweep,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = RunOptions {
        config: cli.config,
        out: cli.out,
        seed: cli.seed,
        jobs: cli.jobs,
    };
    match execute(cli.command.into(), &opts) {
        Ok(report) => {
            if !cli.quiet {
                for line in &report.output.lines {
                    println!("{line}");
                }
                println!("wrote {}", report.out_dir.display());
            }
            for w in &report.output.warnings {
                eprintln!("warning: {w}");
            }
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("protoclone: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
