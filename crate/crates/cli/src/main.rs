use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use resonet_core::format::fmt_sig;
use resonet_cli::{
    apply_overrides, config, configure_threads, failed_checks, read_document, run_experiment, sweep,
    CliError, Overrides, Result, Scenario,
};

fn commands() -> Vec<&'static str> {
    let mut v: Vec<_> = Scenario::ALL.iter().map(|s| s.name()).collect();
    v.push("sweep");
    v
}

/// Runs the named experiment, or a sweep of one over a configuration field.
#[derive(Debug, Parser)]
#[command(name = "resonet", version)]
struct Cli {
    /// Scenario name, or `sweep`.
    #[arg(value_parser = clap::builder::PossibleValuesParser::new(commands()))]
    command: String,
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Writes one SVG per tracked series.
    #[arg(long)]
    plot: bool,
    /// Field to sweep (sweep only).
    #[arg(long)]
    axis: Option<String>,
    /// Comma-separated values of the swept field (sweep only).
    #[arg(long)]
    values: Option<String>,
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    let mut doc = read_document(&cli.config)?;
    let scenario = if cli.command == "sweep" {
        None
    } else {
        Some(cli.command.parse::<Scenario>().map_err(|e| CliError::config("scenario", e))?)
    };
    apply_overrides(&mut doc, &Overrides { scenario, seed: cli.seed, out: cli.out.clone(), plot: cli.plot })?;

    if cli.command == "sweep" {
        let axis = cli.axis.ok_or_else(|| CliError::config("--axis", "sweep needs --axis"))?;
        let values = sweep::parse_values(cli.values.as_deref().unwrap_or(""))?;
        let base = config::parse_value(doc.clone())?;
        let scenario = base.scenario()?;
        let out_dir = base.output.dir.clone();
        let result = sweep::run_sweep(&doc, &axis, &values, &out_dir)?;
        for path in sweep::write_sweep(&out_dir, scenario.name(), &axis, &result)? {
            println!("wrote {}", path.display());
        }
        for c in &result.cells {
            if let Some(e) = &c.error {
                eprintln!("cell {} failed: {e}", c.value);
            }
        }
        print!("{}", result.medians.text);
        return Ok(());
    }
    if cli.axis.is_some() || cli.values.is_some() {
        return Err(CliError::config("--axis", "--axis and --values apply to sweep only"));
    }

    let cfg = config::parse_value(doc)?;
    let (outcome, written) = run_experiment(&cfg)?;
    for path in &written {
        println!("wrote {}", path.display());
    }
    for c in &outcome.checks {
        println!(
            "{} {}: {} (threshold {})",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            fmt_sig(c.value),
            fmt_sig(c.threshold)
        );
    }
    match failed_checks(&outcome) {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
