use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mlosim::metrics::to_csv;
use mlosim::scenario::{preset, sweep, ScenarioConfig, PRESET_NAMES};
use mlosim::{ConfigError, SweepError};

#[derive(Parser)]
#[command(name = "mlosim", version, about = "Wi-Fi 7 multi-link operation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write a single CSV row.
    Run(Box<RunArgs>),
    /// Run a preset λ sweep and write <out>/<preset>.csv.
    Sweep(SweepArgs),
    /// List preset names.
    Presets,
}

#[derive(Args)]
struct RunArgs {
    /// key=value file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long = "nStations")]
    n_stations: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long = "lambdaSld")]
    lambda_sld: Option<String>,
    #[arg(long)]
    mcs1: Option<String>,
    #[arg(long)]
    mcs2: Option<String>,
    #[arg(long)]
    width1: Option<String>,
    #[arg(long)]
    width2: Option<String>,
    #[arg(long = "nSldLink1")]
    n_sld_link1: Option<String>,
    #[arg(long = "nSldLink2")]
    n_sld_link2: Option<String>,
    #[arg(long)]
    payload: Option<String>,
    #[arg(long)]
    duration: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long = "switchDelayUs")]
    switch_delay_us: Option<String>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn flags(&self) -> [(&'static str, &Option<String>); 14] {
        [
            ("mode", &self.mode),
            ("nStations", &self.n_stations),
            ("lambda", &self.lambda),
            ("lambdaSld", &self.lambda_sld),
            ("mcs1", &self.mcs1),
            ("mcs2", &self.mcs2),
            ("width1", &self.width1),
            ("width2", &self.width2),
            ("nSldLink1", &self.n_sld_link1),
            ("nSldLink2", &self.n_sld_link2),
            ("payload", &self.payload),
            ("duration", &self.duration),
            ("seed", &self.seed),
            ("switchDelayUs", &self.switch_delay_us),
        ]
    }
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    preset: String,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Simulated seconds per run.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

enum Failure {
    Config(String),
    Io(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<SweepError> for Failure {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::Io(e) => Failure::Io(e.to_string()),
            other => Failure::Config(other.to_string()),
        }
    }
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let mut cfg = ScenarioConfig::default();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
    }
    for (key, value) in args.flags() {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    let row = mlosim::run_scenario(&cfg)?;
    let csv = to_csv(&[row]);
    match &args.out {
        Some(path) => fs::write(path, csv).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn run_sweep(args: SweepArgs) -> Result<(), Failure> {
    let mut p = preset(&args.preset)?;
    if let Some(d) = args.duration {
        p = p.with_duration(d);
    }
    if let Some(s) = args.seed {
        p = p.with_seed(s);
    }
    let path = sweep(&p, &args.out)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(*a),
        Command::Sweep(a) => run_sweep(a),
        Command::Presets => {
            for n in PRESET_NAMES {
                println!("{n}");
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
