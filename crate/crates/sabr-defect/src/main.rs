//! Command-line front end for the calibration pipeline.
//!
//! Exit codes: 0 success, 1 configuration problem (missing files, bad
//! columns, schedule mismatches), 2 input validation failure or failed
//! self-checks, 3 batch finished but at least one slice failed to calibrate.

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use sabr_defect::bayes::{ChainConfig, MapOptions};
use sabr_defect::market::{
    quotes_to_slice, read_quote_rows, AtmStyle, DeltaStyle, QuoteConvention, Tenor,
};
use sabr_defect::pipeline::{
    calibrate_slice, posterior_json, quote_rows_to_csv, read_synth_spec, run_fever_curve,
    run_validation, synth_from_spec, FeverPoint, RunConfig, ValidationConfig,
};
use sabr_defect::{Error, Result};

#[derive(Parser)]
#[command(
    name = "sabr-defect",
    version,
    about = "Bayesian SABR smile calibration and martingale-defect monitoring"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate every scheduled slice and write the fever-curve outputs.
    Fever(FeverArgs),
    /// Calibrate one date|tenor slice and print its posterior summary.
    Slice(SliceArgs),
    /// Generate synthetic quote rows around known parameters.
    Synth(SynthArgs),
    /// Run internal consistency checks against simulation.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct ConventionArgs {
    /// Quote deltas as spot deltas instead of forward deltas.
    #[arg(long)]
    spot_delta: bool,
    /// Premium-adjusted deltas.
    #[arg(long)]
    premium_adjusted: bool,
    /// ATM quoted at the forward instead of the delta-neutral straddle.
    #[arg(long)]
    atm_forward: bool,
}

impl ConventionArgs {
    fn convention(&self) -> QuoteConvention {
        QuoteConvention {
            delta_style: if self.spot_delta { DeltaStyle::Spot } else { DeltaStyle::Forward },
            premium_adjusted: self.premium_adjusted,
            atm_style: if self.atm_forward {
                AtmStyle::AtTheForward
            } else {
                AtmStyle::DeltaNeutralStraddle
            },
            ..QuoteConvention::default()
        }
    }
}

#[derive(Args)]
struct EngineArgs {
    /// Recorded chain length per slice.
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    /// Fraction of each chain discarded as burn-in.
    #[arg(long, default_value_t = 0.25)]
    burn_in: f64,
    /// Master seed; every slice derives its own streams from it.
    #[arg(long, default_value_t = 20190102)]
    seed: u64,
    /// Credible-interval mass for the defect indicator.
    #[arg(long, default_value_t = 0.90)]
    level: f64,
    /// Replace the hard bid-ask window with a steep quadratic penalty.
    #[arg(long)]
    soft: bool,
}

#[derive(Args)]
struct FeverArgs {
    /// Quote CSV (per-delta or ATM/RR/strangle columns).
    #[arg(long)]
    quotes: PathBuf,
    /// Schedule CSV with date,tenor rows; defaults to every quote row.
    #[arg(long)]
    schedule: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[command(flatten)]
    engine: EngineArgs,
    #[command(flatten)]
    convention: ConventionArgs,
}

#[derive(Args)]
struct SliceArgs {
    /// Quote CSV.
    #[arg(long)]
    quotes: PathBuf,
    /// Slice date, YYYY-MM-DD.
    #[arg(long)]
    date: NaiveDate,
    /// Slice tenor, e.g. 6M.
    #[arg(long)]
    tenor: Tenor,
    #[command(flatten)]
    engine: EngineArgs,
    #[command(flatten)]
    convention: ConventionArgs,
}

#[derive(Args)]
struct SynthArgs {
    /// Generation spec CSV: date,tenor,T,spot,r_dom,r_for,alpha,nu,rho.
    #[arg(long)]
    spec: PathBuf,
    /// Output quote CSV.
    #[arg(long)]
    out: PathBuf,
    /// Half-width of the uniform mid-vol noise, in vol points.
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    /// Bid-ask widths in vol points, order 10p,25p,atm,25c,10c.
    #[arg(long, default_value = "1.0,0.5,0.3,0.5,1.0")]
    spreads: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct ValidateArgs {
    /// Simulation paths per check.
    #[arg(long, default_value_t = 20_000)]
    paths: usize,
    #[arg(long, default_value_t = 77)]
    seed: u64,
}

fn engine_config(
    quotes: PathBuf,
    schedule: Option<PathBuf>,
    out: PathBuf,
    engine: &EngineArgs,
    convention: &ConventionArgs,
) -> RunConfig {
    RunConfig {
        quotes,
        schedule,
        output_dir: out,
        convention: convention.convention(),
        chain: ChainConfig {
            n_samples: engine.samples,
            burn_in_fraction: engine.burn_in,
            ..ChainConfig::default()
        },
        map: MapOptions::default(),
        interval_level: engine.level,
        master_seed: engine.seed,
        soft_constraint: engine.soft,
    }
}

fn cmd_fever(args: FeverArgs) -> Result<ExitCode> {
    let config = engine_config(
        args.quotes,
        args.schedule,
        args.out,
        &args.engine,
        &args.convention,
    );
    let outcome = run_fever_curve(&config)?;
    for entry in &outcome.entries {
        match &entry.result {
            Ok(p) => {
                let s = &p.summary;
                println!(
                    "{}|{}: cm defect {:.4} [{:.4}, {:.4}], map {:.4}, acceptance {:.2}",
                    entry.date,
                    entry.tenor,
                    s.mean_defect,
                    s.defect_interval.lo,
                    s.defect_interval.hi,
                    s.map_defect,
                    s.acceptance_rate
                );
                for w in &s.warnings {
                    println!("  warning: {w}");
                }
            }
            Err(msg) => println!("{}|{}: FAILED: {msg}", entry.date, entry.tenor),
        }
    }
    let failed = outcome.n_failed();
    println!(
        "wrote {} of {} slices to {}{}",
        outcome.entries.len() - failed,
        outcome.entries.len(),
        config.output_dir.display(),
        if failed > 0 { format!(" ({failed} failed)") } else { String::new() }
    );
    Ok(if failed > 0 { ExitCode::from(3) } else { ExitCode::SUCCESS })
}

fn cmd_slice(args: SliceArgs) -> Result<ExitCode> {
    let config = engine_config(
        args.quotes.clone(),
        None,
        PathBuf::new(),
        &args.engine,
        &args.convention,
    );
    let rows = read_quote_rows(&args.quotes)?;
    let row = rows
        .iter()
        .find(|r| r.date == args.date && r.tenor == args.tenor)
        .ok_or_else(|| {
            Error::config(format!("no quote row for {}|{}", args.date, args.tenor))
        })?;
    let slice = quotes_to_slice(row, &config.convention)?;
    let summary = calibrate_slice(&slice, &config)?;
    let point = FeverPoint {
        date: args.date,
        tenor: args.tenor,
        expiry: slice.expiry(),
        forward: slice.forward(),
        summary,
    };
    println!("{}", serde_json::to_string_pretty(&posterior_json(&point)).expect("static json"));
    Ok(ExitCode::SUCCESS)
}

fn parse_spreads(text: &str) -> Result<[f64; 5]> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 5 {
        return Err(Error::invalid_input(format!(
            "--spreads needs five comma-separated vol points, got {text:?}"
        )));
    }
    let mut out = [0.0; 5];
    for (slot, part) in out.iter_mut().zip(parts) {
        let points: f64 = part
            .parse()
            .map_err(|_| Error::invalid_input(format!("bad spread value {part:?}")))?;
        *slot = points / 100.0;
    }
    Ok(out)
}

fn cmd_synth(args: SynthArgs) -> Result<ExitCode> {
    let spec = read_synth_spec(&args.spec)?;
    let spreads = parse_spreads(&args.spreads)?;
    let rows = synth_from_spec(&spec, args.noise / 100.0, spreads, args.seed)?;
    let csv_text = quote_rows_to_csv(&rows)?;
    std::fs::write(&args.out, csv_text).map_err(|e| Error::io(&args.out, e))?;
    println!("wrote {} quote rows to {}", rows.len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(args: ValidateArgs) -> Result<ExitCode> {
    let report = run_validation(&ValidationConfig { n_paths: args.paths, seed: args.seed });
    for check in &report.checks {
        println!(
            "{} {}: {}",
            if check.passed { "PASS" } else { "FAIL" },
            check.name,
            check.detail
        );
    }
    if report.all_passed() {
        println!("all checks passed");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("validation FAILED");
        Ok(ExitCode::from(2))
    }
}

fn exit_code_for(error: &Error) -> u8 {
    match error {
        Error::Config { .. } | Error::Io { .. } => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fever(args) => cmd_fever(args),
        Command::Slice(args) => cmd_slice(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Validate(args) => cmd_validate(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
