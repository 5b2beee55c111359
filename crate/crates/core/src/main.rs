use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hopbound::bench::{run_command, Command, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "hopbound",
    version,
    about = "Sampling envelopes, provisioning plans and orchestration cost simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Per-iteration sampled sizes, histogram and spread.
    SampleStats(Common),
    /// Envelope against Monte-Carlo coverage and spread.
    EnvelopeCheck(Common),
    /// Strategy by batch cost simulation, plus strong scaling.
    ExecSim(Common),
    /// MaxSG, exact and envelope buffer plans over hop depths.
    MemoryCompare(Common),
    /// All of the above plus a manifest.
    Sweep(Common),
    /// Refit device coefficients to the host-mediated fraction anchor.
    Calibrate(Common),
    /// Print the default experiment configuration.
    DefaultConfig,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    iterations: Option<u64>,
}

impl Common {
    fn resolve(&self) -> hopbound::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output = o.clone();
        }
        if let Some(n) = self.iterations {
            cfg.iterations = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> hopbound::Result<()> {
    let (cmd, common) = match cli.command {
        Cmd::SampleStats(c) => (Command::SampleStats, c),
        Cmd::EnvelopeCheck(c) => (Command::EnvelopeCheck, c),
        Cmd::ExecSim(c) => (Command::ExecSim, c),
        Cmd::MemoryCompare(c) => (Command::MemoryCompare, c),
        Cmd::Sweep(c) => (Command::Sweep, c),
        Cmd::Calibrate(c) => (Command::Calibrate, c),
        Cmd::DefaultConfig => {
            println!("{}", ExperimentConfig::default().to_json()?);
            return Ok(());
        }
    };
    let cfg = common.resolve()?;
    for f in run_command(cmd, &cfg)? {
        println!("{}", cfg.output.join(&f.file).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
