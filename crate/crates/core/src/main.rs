use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use chipgate::conductor::config::Time;
use chipgate::conductor::{run_pipeline, run_sweep, Manifest, RunConfig, RunOptions, Stage, StageStatus};

#[derive(Parser)]
#[command(name = "chipgate", version, about = "Atom-chip double-well phase gate simulator")]
struct Cli {
    command: Command,
    /// JSON run configuration; gauss/kHz/nm suffixed strings are accepted
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Grid points: the 1D spectrum grid for trap/spectrum/raman, points per
    /// axis of the 2D grid for gate/sweep
    #[arg(long)]
    grid_n: Option<usize>,
    /// Time step in seconds, or with a unit such as "0.25 us"
    #[arg(long, value_parser = parse_time)]
    dt: Option<f64>,
    /// Number of propagation steps (overrides the configured duration)
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    no_plots: bool,
    /// Run gate trajectories and sweep rows on the calling thread
    #[arg(long)]
    serial: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Command {
    Trap,
    Spectrum,
    Gate,
    Raman,
    Scheme,
    Sweep,
}

fn parse_time(s: &str) -> Result<f64, String> {
    Time::parse(s).map(|t| t.0)
}

fn apply_overrides(cli: &Cli, cfg: &mut RunConfig) {
    if let Some(n) = cli.grid_n {
        match cli.command {
            Command::Gate | Command::Sweep => cfg.dynamics.grid_n = n,
            _ => cfg.spectrum.grid_n = n,
        }
    }
    if let Some(dt) = cli.dt {
        cfg.dynamics.dt = Time(dt);
    }
    if let Some(steps) = cli.steps {
        cfg.dynamics.n_steps = Some(steps);
    }
}

fn report(manifest: &Manifest) {
    for r in &manifest.stages {
        let status = match r.status {
            StageStatus::Ok => "ok",
            StageStatus::Failed => "FAILED",
            StageStatus::Skipped => "skipped",
        };
        match &r.error {
            Some(e) => eprintln!("{:>9}: {status} ({e})", r.stage.name()),
            None => eprintln!("{:>9}: {status}", r.stage.name()),
        }
    }
    for f in &manifest.files {
        eprintln!("  wrote {} ({} bytes)", f.name, f.bytes);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match RunConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    apply_overrides(&cli, &mut cfg);
    let opts = RunOptions { concurrent: !cli.serial, plots: !cli.no_plots };
    let stage = match cli.command {
        Command::Trap => Stage::Trap,
        Command::Spectrum => Stage::Spectrum,
        Command::Gate => Stage::Gate,
        Command::Raman => Stage::Raman,
        Command::Scheme => Stage::Scheme,
        Command::Sweep => {
            return match run_sweep(&cfg, &cli.out, &opts) {
                Ok((manifest, rows)) => {
                    report(&manifest);
                    let failed = rows.iter().filter(|r| !r.ok).count();
                    eprintln!("sweep: {} rows, {failed} failed", rows.len());
                    if manifest.complete { ExitCode::SUCCESS } else { ExitCode::FAILURE }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            };
        }
    };
    match run_pipeline(&cfg, &[stage], &cli.out, &opts) {
        Ok(manifest) => {
            report(&manifest);
            if manifest.complete {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
