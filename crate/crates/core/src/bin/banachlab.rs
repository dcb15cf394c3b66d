use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use banachlab::suite::{Command, Suite, SuiteConfig};
use banachlab::Error;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    Moduli,
    Sets,
    Hypo,
    All,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Budget {
    Low,
    Default,
    High,
}

/// Numerical checks for moduli of normed planes, proximally smooth sets and
/// hypomonotone normal cones.
#[derive(Debug, Parser)]
#[command(name = "banachlab", version)]
struct Args {
    #[arg(value_enum)]
    command: Cmd,
    /// Suite configuration (JSON); defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for CSV curves and report.json.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    budget: Option<Budget>,
}

fn run(args: Args) -> Result<bool, Error> {
    let mut cfg = match &args.config {
        Some(p) => SuiteConfig::from_path(p)?,
        None => SuiteConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(b) = args.budget {
        cfg.budget = format!("{b:?}").to_lowercase();
    }
    let command = match args.command {
        Cmd::Moduli => Command::Moduli,
        Cmd::Sets => Command::Sets,
        Cmd::Hypo => Command::Hypo,
        Cmd::All => Command::All,
    };
    let report = Suite::new(cfg, &args.out)?.run(command)?;
    for r in &report.records {
        let margin = r.margin.map_or_else(|| "-".to_string(), |m| format!("{m:.3e}"));
        println!("{:<8} {:<52} {margin}", format!("{:?}", r.verdict).to_lowercase(), r.id);
    }
    Ok(!report.any_fail())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("banachlab: {e}");
            ExitCode::from(2)
        }
    }
}
