//! Batch calibration pipeline: drive the Bayesian engine over a quote file,
//! assemble the martingale-defect "fever curve" across dates, and write
//! deterministic reports.
//!
//! Reproducibility contract: with the same inputs, configuration and master
//! seed, every output file is byte-identical across runs and thread counts.
//! Per-slice randomness is derived as
//!
//! ```text
//!     slice_seed = splitmix64(master_seed XOR fnv1a("date|tenor"))
//! ```
//!
//! so adding, removing or reordering slices never perturbs the others.
//! Floating-point values are written with nine significant digits.
//!
//! Outputs per run: `fever_curve.csv` (one row per successfully calibrated
//! slice, schedule order), `posterior_<date>.json` per slice (tenor appended
//! when a date occurs more than once), and `run_report.json` covering every
//! scheduled slice including failures. A failed slice never aborts the batch.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde_json::json;

use crate::bayes::{
    adaptive_metropolis, nelder_mead_map, summarize, ChainConfig, MapOptions, PosteriorSpec,
    PosteriorSummary,
};
use crate::error::{Error, Result};
use crate::kde::DensityCurve;
use crate::market::{
    atm_strike, bsm_delta, compute_forward, delta_to_strike, quotes_to_slice, read_quote_rows,
    read_schedule, MarketSlice, Quote, QuoteConvention, QuotePayload, RateCurvePoint,
    ScheduleEntry, SmileQuoteRow, Tenor,
};
use crate::mc::{derive_seed, mc_defect, mc_explosion_probability, mc_implied_vol, PathConfig};
use crate::sabr::{
    bsm_implied_vol, bsm_price, defect_indicator, sabr_implied_vol, OptionType, SabrParams,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Full configuration of a batch run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub quotes: PathBuf,
    /// Slice selection; `None` calibrates every quote row in file order.
    pub schedule: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub convention: QuoteConvention,
    /// Chain template. Its `seed` field is ignored: per-slice seeds are
    /// derived from `master_seed` and the slice label.
    pub chain: ChainConfig,
    /// MAP search template; its `seed` field is likewise derived per slice.
    pub map: MapOptions,
    pub interval_level: f64,
    pub master_seed: u64,
    pub soft_constraint: bool,
}

impl RunConfig {
    pub fn new(quotes: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            quotes: quotes.into(),
            schedule: None,
            output_dir: output_dir.into(),
            convention: QuoteConvention::default(),
            chain: ChainConfig::default(),
            map: MapOptions::default(),
            interval_level: 0.90,
            master_seed: 20190102,
            soft_constraint: false,
        }
    }
}

/// One successfully calibrated slice.
#[derive(Debug, Clone)]
pub struct FeverPoint {
    pub date: NaiveDate,
    pub tenor: Tenor,
    pub expiry: f64,
    pub forward: f64,
    pub summary: PosteriorSummary,
}

/// Outcome for one scheduled slice: a fever point or an error message.
#[derive(Debug, Clone)]
pub struct SliceOutcome {
    pub date: NaiveDate,
    pub tenor: Tenor,
    pub result: std::result::Result<FeverPoint, String>,
}

/// Outcome of a whole batch, in schedule order.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub entries: Vec<SliceOutcome>,
}

impl RunOutcome {
    pub fn points(&self) -> impl Iterator<Item = &FeverPoint> {
        self.entries.iter().filter_map(|e| e.result.as_ref().ok())
    }

    pub fn n_failed(&self) -> usize {
        self.entries.iter().filter(|e| e.result.is_err()).count()
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h
}

/// Deterministic per-slice seed from the master seed and the "date|tenor"
/// label.
pub fn slice_seed(master_seed: u64, label: &str) -> u64 {
    derive_seed(master_seed, fnv1a(label.as_bytes()))
}

/// Format with nine significant digits, fixed-point. Stable across runs and
/// platforms; used for every floating-point value that reaches an output
/// file.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        // Never expected in outputs; keep the representation unambiguous.
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (8 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Nine-significant-digit rounding for values embedded in JSON.
fn sig9(x: f64) -> f64 {
    format_sig9(x).parse().unwrap_or(x)
}

/// Calibrate one slice end to end: posterior spec, MAP, chain, summary.
/// Randomness depends only on the master seed and the slice label.
pub fn calibrate_slice(slice: &MarketSlice, config: &RunConfig) -> Result<PosteriorSummary> {
    let seed = slice_seed(config.master_seed, &slice.label());
    let mut spec = PosteriorSpec::new(slice.clone());
    if config.soft_constraint {
        spec = spec.soft_constrained();
    }
    let map_opts = MapOptions { seed: derive_seed(seed, 1), ..config.map };
    let map = nelder_mead_map(&spec, &map_opts)?;
    let chain_cfg = ChainConfig { seed: derive_seed(seed, 2), ..config.chain };
    let chain = adaptive_metropolis(&spec, map.params, &chain_cfg)?;
    summarize(&map, &chain, chain_cfg.burn_in_fraction, config.interval_level)
}

/// Run the batch: load quotes, resolve the schedule, calibrate each slice
/// and write `fever_curve.csv`, the per-slice posterior JSON files and
/// `run_report.json` into the output directory.
///
/// Input problems (unreadable files, missing columns, malformed rows,
/// schedule entries without a quote row) abort the run with an error;
/// per-slice calibration failures are recorded in the outcome and the run
/// continues.
pub fn run_fever_curve(config: &RunConfig) -> Result<RunOutcome> {
    config.chain.validate()?;
    if !(config.interval_level > 0.0 && config.interval_level < 1.0) {
        return Err(Error::config(format!(
            "interval level must lie in (0, 1), got {}",
            config.interval_level
        )));
    }
    let rows = read_quote_rows(&config.quotes)?;
    let schedule: Vec<ScheduleEntry> = match &config.schedule {
        Some(path) => read_schedule(path)?,
        None => rows.iter().map(|r| ScheduleEntry { date: r.date, tenor: r.tenor }).collect(),
    };
    if schedule.is_empty() {
        return Err(Error::config("nothing to calibrate: schedule is empty"));
    }

    let by_key: HashMap<(NaiveDate, Tenor), &SmileQuoteRow> =
        rows.iter().map(|r| ((r.date, r.tenor), r)).collect();

    let mut entries = Vec::with_capacity(schedule.len());
    for entry in &schedule {
        let row = by_key.get(&(entry.date, entry.tenor)).ok_or_else(|| {
            Error::config(format!(
                "schedule entry {}|{} has no matching quote row",
                entry.date, entry.tenor
            ))
        })?;
        let slice = quotes_to_slice(row, &config.convention)?;
        let result = match calibrate_slice(&slice, config) {
            Ok(summary) => Ok(FeverPoint {
                date: entry.date,
                tenor: entry.tenor,
                expiry: slice.expiry(),
                forward: slice.forward(),
                summary,
            }),
            Err(e) => Err(e.to_string()),
        };
        entries.push(SliceOutcome { date: entry.date, tenor: entry.tenor, result });
    }
    let outcome = RunOutcome { entries };
    write_outputs(&outcome, config)?;
    Ok(outcome)
}

/// Render the fever-curve CSV (successful slices only, schedule order).
pub fn fever_curve_csv(outcome: &RunOutcome) -> String {
    let mut out = String::from("date,tenor,cm_defect,lo,hi,map_defect,acceptance,n_retained\n");
    for p in outcome.points() {
        let s = &p.summary;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            p.date.format("%Y-%m-%d"),
            p.tenor,
            format_sig9(s.mean_defect),
            format_sig9(s.defect_interval.lo),
            format_sig9(s.defect_interval.hi),
            format_sig9(s.map_defect),
            format_sig9(s.acceptance_rate),
            s.n_retained,
        ));
    }
    out
}

fn density_json(curve: &Option<DensityCurve>) -> serde_json::Value {
    match curve {
        None => serde_json::Value::Null,
        Some(c) => json!({
            "grid": c.grid.iter().map(|x| sig9(*x)).collect::<Vec<_>>(),
            "density": c.density.iter().map(|x| sig9(*x)).collect::<Vec<_>>(),
        }),
    }
}

fn params_json(p: &SabrParams) -> serde_json::Value {
    json!({ "alpha": sig9(p.alpha()), "nu": sig9(p.nu()), "rho": sig9(p.rho()) })
}

/// Per-slice posterior report.
pub fn posterior_json(point: &FeverPoint) -> serde_json::Value {
    let s = &point.summary;
    json!({
        "date": point.date.format("%Y-%m-%d").to_string(),
        "tenor": point.tenor.to_string(),
        "expiry": sig9(point.expiry),
        "forward": sig9(point.forward),
        "map": params_json(&s.map),
        "map_defect": sig9(s.map_defect),
        "posterior_mean": params_json(&s.posterior_mean),
        "mean_defect": sig9(s.mean_defect),
        "defect_interval": {
            "lo": sig9(s.defect_interval.lo),
            "hi": sig9(s.defect_interval.hi),
            "level": s.defect_interval.level,
        },
        "n_retained": s.n_retained,
        "acceptance_rate": sig9(s.acceptance_rate),
        "marginals": {
            "alpha": density_json(&s.marginal_alpha),
            "nu": density_json(&s.marginal_nu),
            "rho": density_json(&s.marginal_rho),
            "defect": density_json(&s.marginal_defect),
        },
        "warnings": s.warnings,
    })
}

/// Posterior file name for a point; the tenor is appended when the same date
/// occurs more than once in the run.
fn posterior_file_name(point: &FeverPoint, date_count: usize) -> String {
    if date_count > 1 {
        format!("posterior_{}_{}.json", point.date.format("%Y-%m-%d"), point.tenor)
    } else {
        format!("posterior_{}.json", point.date.format("%Y-%m-%d"))
    }
}

/// Whole-run report: configuration echo plus per-slice status. Contains no
/// timestamps or absolute paths, so reruns are byte-identical.
pub fn run_report_json(config: &RunConfig, outcome: &RunOutcome) -> serde_json::Value {
    let date_counts = date_counts(outcome);
    let slices: Vec<serde_json::Value> = outcome
        .entries
        .iter()
        .map(|e| match &e.result {
            Ok(p) => json!({
                "date": e.date.format("%Y-%m-%d").to_string(),
                "tenor": e.tenor.to_string(),
                "status": "ok",
                "output": posterior_file_name(p, date_counts[&p.date]),
            }),
            Err(msg) => json!({
                "date": e.date.format("%Y-%m-%d").to_string(),
                "tenor": e.tenor.to_string(),
                "status": "failed",
                "error": msg,
            }),
        })
        .collect();
    let file_name = |p: &Path| {
        p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
    };
    json!({
        "quotes_file": file_name(&config.quotes),
        "schedule_file": config.schedule.as_deref().map(file_name),
        "master_seed": config.master_seed,
        "soft_constraint": config.soft_constraint,
        "interval_level": config.interval_level,
        "chain": {
            "n_samples": config.chain.n_samples,
            "burn_in_fraction": config.chain.burn_in_fraction,
            "adaptation_start": config.chain.adaptation_start,
            "epsilon": config.chain.epsilon,
        },
        "n_slices": outcome.entries.len(),
        "n_succeeded": outcome.entries.len() - outcome.n_failed(),
        "n_failed": outcome.n_failed(),
        "slices": slices,
    })
}

fn date_counts(outcome: &RunOutcome) -> HashMap<NaiveDate, usize> {
    let mut counts = HashMap::new();
    for p in outcome.points() {
        *counts.entry(p.date).or_insert(0) += 1;
    }
    counts
}

/// Write the three output artifacts into `config.output_dir`.
pub fn write_outputs(outcome: &RunOutcome, config: &RunConfig) -> Result<()> {
    fs::create_dir_all(&config.output_dir).map_err(|e| Error::io(&config.output_dir, e))?;
    let write = |name: &str, content: String| -> Result<()> {
        let path = config.output_dir.join(name);
        fs::write(&path, content).map_err(|e| Error::io(&path, e))
    };
    write("fever_curve.csv", fever_curve_csv(outcome))?;
    let counts = date_counts(outcome);
    for p in outcome.points() {
        let name = posterior_file_name(p, counts[&p.date]);
        let body = serde_json::to_string_pretty(&posterior_json(p)).expect("static json shape");
        write(&name, body + "\n")?;
    }
    let report = serde_json::to_string_pretty(&run_report_json(config, outcome)).expect("static json shape");
    write("run_report.json", report + "\n")?;
    Ok(())
}

// --- synthetic quote generation ---

/// Recipe for one synthetic quote row around known parameters.
#[derive(Debug, Clone, Copy)]
pub struct SyntheticConfig {
    pub truth: SabrParams,
    pub date: NaiveDate,
    pub tenor: Tenor,
    /// Year-fraction override; `None` resolves the tenor ACT/365.
    pub expiry: Option<f64>,
    pub spot: f64,
    pub rates: RateCurvePoint,
    pub convention: QuoteConvention,
    /// Full bid-ask widths per pillar in decimal vol, strike order.
    pub spreads: [f64; 5],
    /// Half-width of the uniform mid-vol noise in decimal vol.
    pub noise_half_width: f64,
    pub seed: u64,
}

impl SyntheticConfig {
    pub fn new(truth: SabrParams, date: NaiveDate, tenor: Tenor) -> Self {
        SyntheticConfig {
            truth,
            date,
            tenor,
            expiry: None,
            spot: 1.0,
            rates: RateCurvePoint { r_dom: 0.0, r_for: 0.0 },
            convention: QuoteConvention::default(),
            // One vol point on the 10d wings, half on the 25d, 0.3 ATM.
            spreads: [0.010, 0.005, 0.003, 0.005, 0.010],
            noise_half_width: 0.001,
            seed: 1,
        }
    }
}

/// A generated quote row together with the clean smile it was built from.
#[derive(Debug, Clone)]
pub struct SyntheticQuote {
    pub row: SmileQuoteRow,
    pub strikes: [f64; 5],
    pub clean_vols: [f64; 5],
}

/// Self-consistent strike for a delta pillar on the clean model smile: the
/// fixed point of strike -> model vol -> strike-from-delta.
fn fixed_point_strike(
    delta: f64,
    option_type: OptionType,
    forward: f64,
    tau: f64,
    truth: &SabrParams,
    convention: &QuoteConvention,
    rates: RateCurvePoint,
) -> Result<f64> {
    let mut sigma = sabr_implied_vol(forward, forward, tau, truth);
    let mut strike = forward;
    for _ in 0..100 {
        let next = delta_to_strike(delta, forward, sigma, tau, option_type, convention, rates)?;
        let moved = (next - strike).abs();
        strike = next;
        sigma = sabr_implied_vol(forward, strike, tau, truth);
        if moved <= 1e-13 * forward {
            break;
        }
    }
    Ok(strike)
}

/// Self-consistent ATM strike on the clean smile.
fn fixed_point_atm(
    forward: f64,
    tau: f64,
    truth: &SabrParams,
    convention: &QuoteConvention,
) -> f64 {
    let mut strike = forward;
    for _ in 0..100 {
        let sigma = sabr_implied_vol(forward, strike, tau, truth);
        let next = atm_strike(forward, sigma, tau, convention);
        let moved = (next - strike).abs();
        strike = next;
        if moved <= 1e-13 * forward {
            break;
        }
    }
    strike
}

/// Generate one quote row: place the five convention strikes on the clean
/// smile, perturb each pillar mid by uniform noise, and wrap the configured
/// bid-ask width around the noisy mid. The noise is redrawn whenever it
/// exceeds half the width, so the clean vol always stays inside the band.
pub fn synthesize_row(config: &SyntheticConfig) -> Result<SyntheticQuote> {
    let tau = match config.expiry {
        Some(t) if t > 0.0 && t.is_finite() => t,
        Some(t) => return Err(Error::invalid_input(format!("expiry override must be > 0, got {t}"))),
        None => config.tenor.year_fraction(config.date)?,
    };
    for (i, w) in config.spreads.iter().enumerate() {
        if !(w.is_finite() && *w > 0.0) {
            return Err(Error::invalid_input(format!("spread {i} must be positive, got {w}")));
        }
        if config.noise_half_width > 0.5 * w {
            return Err(Error::invalid_input(format!(
                "noise half-width {} exceeds half the bid-ask width {} of pillar {i}; \
                 the clean smile could leave the band",
                config.noise_half_width, w
            )));
        }
    }
    if config.noise_half_width < 0.0 || !config.noise_half_width.is_finite() {
        return Err(Error::invalid_input("noise half-width must be >= 0"));
    }
    let forward = compute_forward(config.spot, config.rates, tau);
    let conv = &config.convention;
    let strikes = [
        fixed_point_strike(-0.10, OptionType::Put, forward, tau, &config.truth, conv, config.rates)?,
        fixed_point_strike(-0.25, OptionType::Put, forward, tau, &config.truth, conv, config.rates)?,
        fixed_point_atm(forward, tau, &config.truth, conv),
        fixed_point_strike(0.25, OptionType::Call, forward, tau, &config.truth, conv, config.rates)?,
        fixed_point_strike(0.10, OptionType::Call, forward, tau, &config.truth, conv, config.rates)?,
    ];
    if !strikes.windows(2).all(|p| p[0] < p[1]) {
        return Err(Error::invalid_input(format!(
            "generated strikes are not increasing: {strikes:?}"
        )));
    }
    let mut clean = [0.0; 5];
    for (c, k) in clean.iter_mut().zip(strikes) {
        *c = sabr_implied_vol(forward, k, tau, &config.truth);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut quotes = [Quote::new(0.0, 0.0).unwrap(); 5];
    for i in 0..5 {
        let half = config.noise_half_width;
        let mid = loop {
            let noise = if half > 0.0 { rng.gen_range(-half..=half) } else { 0.0 };
            if noise.abs() <= 0.5 * config.spreads[i] {
                break clean[i] + noise;
            }
        };
        quotes[i] = Quote::new(mid - 0.5 * config.spreads[i], mid + 0.5 * config.spreads[i])?;
    }

    let row = SmileQuoteRow {
        date: config.date,
        tenor: config.tenor,
        expiry: config.expiry,
        spot: config.spot,
        rates: config.rates,
        payload: QuotePayload::PerDelta {
            vol_10p: quotes[0],
            vol_25p: quotes[1],
            vol_atm: quotes[2],
            vol_25c: quotes[3],
            vol_10c: quotes[4],
        },
    };
    Ok(SyntheticQuote { row, strikes, clean_vols: clean })
}

/// Render per-delta quote rows as a CSV the pipeline can read back.
pub fn quote_rows_to_csv(rows: &[SmileQuoteRow]) -> Result<String> {
    let mut out = String::from(
        "date,tenor,T,spot,r_dom,r_for,\
         vol_10p_bid,vol_10p_ask,vol_25p_bid,vol_25p_ask,vol_atm_bid,vol_atm_ask,\
         vol_25c_bid,vol_25c_ask,vol_10c_bid,vol_10c_ask\n",
    );
    for row in rows {
        let quotes = match &row.payload {
            QuotePayload::PerDelta { vol_10p, vol_25p, vol_atm, vol_25c, vol_10c } => {
                [vol_10p, vol_25p, vol_atm, vol_25c, vol_10c]
            }
            QuotePayload::AtmRrStr { .. } => {
                return Err(Error::invalid_input(
                    "only per-delta payloads can be rendered to CSV",
                ))
            }
        };
        out.push_str(&format!(
            "{},{},{},{},{},{}",
            row.date.format("%Y-%m-%d"),
            row.tenor,
            row.expiry.map(format_sig9).unwrap_or_default(),
            format_sig9(row.spot),
            format_sig9(row.rates.r_dom),
            format_sig9(row.rates.r_for),
        ));
        for q in quotes {
            out.push_str(&format!(",{},{}", format_sig9(q.bid()), format_sig9(q.ask())));
        }
        out.push('\n');
    }
    Ok(out)
}

/// One row of a synthetic-generation spec file: market identifiers plus the
/// generating parameters.
#[derive(Debug, Clone, Copy)]
pub struct SynthSpecRow {
    pub date: NaiveDate,
    pub tenor: Tenor,
    pub expiry: Option<f64>,
    pub spot: f64,
    pub rates: RateCurvePoint,
    pub truth: SabrParams,
}

/// Read a generation spec CSV with columns
/// `date,tenor,T,spot,r_dom,r_for,alpha,nu,rho` (empty `T` resolves the
/// tenor ACT/365).
pub fn read_synth_spec(path: &Path) -> Result<Vec<SynthSpecRow>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::malformed_quote(format!("{}: {e}", path.display())))?
        .clone();
    let col = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::config(format!("{}: missing column {name:?}", path.display()))
        })
    };
    let cols = [
        col("date")?, col("tenor")?, col("T")?, col("spot")?, col("r_dom")?, col("r_for")?,
        col("alpha")?, col("nu")?, col("rho")?,
    ];

    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::malformed_quote(format!("{}: {e}", path.display())))?;
        let context = format!("{} row {}", path.display(), line + 2);
        let get = |slot: usize| record.get(cols[slot]).unwrap_or("");
        let num = |slot: usize, name: &str| -> Result<f64> {
            get(slot)
                .parse()
                .map_err(|_| Error::malformed_quote(format!("{context}: bad {name} value {:?}", get(slot))))
        };
        let date = NaiveDate::parse_from_str(get(0), "%Y-%m-%d")
            .map_err(|_| Error::malformed_quote(format!("{context}: bad date {:?}", get(0))))?;
        let tenor: Tenor = get(1)
            .parse()
            .map_err(|e| Error::malformed_quote(format!("{context}: {e}")))?;
        let expiry = match get(2) {
            "" => None,
            _ => Some(num(2, "T")?),
        };
        rows.push(SynthSpecRow {
            date,
            tenor,
            expiry,
            spot: num(3, "spot")?,
            rates: RateCurvePoint { r_dom: num(4, "r_dom")?, r_for: num(5, "r_for")? },
            truth: SabrParams::new(num(6, "alpha")?, num(7, "nu")?, num(8, "rho")?)?,
        });
    }
    Ok(rows)
}

/// Generate quote rows for every spec row. Each row's noise stream is seeded
/// from the master seed and its own label, mirroring the calibration side.
pub fn synth_from_spec(
    spec_rows: &[SynthSpecRow],
    noise_half_width: f64,
    spreads: [f64; 5],
    master_seed: u64,
) -> Result<Vec<SmileQuoteRow>> {
    let mut out = Vec::with_capacity(spec_rows.len());
    for s in spec_rows {
        let label = format!("{}|{}", s.date.format("%Y-%m-%d"), s.tenor);
        let cfg = SyntheticConfig {
            truth: s.truth,
            date: s.date,
            tenor: s.tenor,
            expiry: s.expiry,
            spot: s.spot,
            rates: s.rates,
            convention: QuoteConvention::default(),
            spreads,
            noise_half_width,
            seed: slice_seed(master_seed, &label),
        };
        out.push(synthesize_row(&cfg)?.row);
    }
    Ok(out)
}

// --- self-validation ---

/// Controls for the self-validation run.
#[derive(Debug, Clone, Copy)]
pub struct ValidationConfig {
    pub n_paths: usize,
    pub seed: u64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig { n_paths: 20_000, seed: 77 }
    }
}

/// One named check with its verdict and measured numbers.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Collection of validation checks.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub checks: Vec<CheckOutcome>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Smoke-level internal consistency checks, printable from the CLI.
///
/// The simulation comparisons run on a moderate parameter range (vol of vol
/// up to about unity) where the estimators and the vol expansion are both
/// inside their comfort zones; the full stress grid lives in the acceptance
/// test suite and takes far longer.
pub fn run_validation(config: &ValidationConfig) -> ValidationReport {
    let mut checks = Vec::new();
    let path_cfg = PathConfig {
        n_paths: config.n_paths,
        steps_per_year: 50.0,
        seed: config.seed,
        ..PathConfig::default()
    };

    // Long-horizon defect against the closed-form limit.
    {
        let mut passed = true;
        let mut details = Vec::new();
        for &(a, n, r) in &[(0.12, 0.9, 0.55), (0.10, 1.3, 0.75)] {
            let p = SabrParams::new(a, n, r).unwrap();
            let limit = defect_indicator(&p);
            match mc_defect(&p, 50.0, &path_cfg) {
                Ok(est) => {
                    let tol = 3.0 * est.std_error + 0.005;
                    let ok = (est.value - limit).abs() <= tol;
                    passed &= ok;
                    details.push(format!(
                        "theta=({a},{n},{r}): sim {:.4} vs limit {:.4} (tol {:.4})",
                        est.value, limit, tol
                    ));
                }
                Err(e) => {
                    passed = false;
                    details.push(format!("theta=({a},{n},{r}): {e}"));
                }
            }
        }
        checks.push(CheckOutcome {
            name: "defect limit at long horizon".into(),
            passed,
            detail: details.join("; "),
        });
    }

    // Finite-horizon defect against the explosion probability.
    {
        let p = SabrParams::new(0.10, 1.0, 0.5).unwrap();
        let (passed, detail) = match (
            mc_defect(&p, 10.0, &path_cfg),
            mc_explosion_probability(&p, 10.0, &PathConfig { seed: config.seed ^ 1, ..path_cfg }),
        ) {
            (Ok(d), Ok(e)) => {
                let tol = 3.0 * d.std_error.hypot(e.std_error) + 0.01;
                (
                    (d.value - e.value).abs() <= tol,
                    format!("defect {:.4} vs explosion {:.4} (tol {:.4})", d.value, e.value, tol),
                )
            }
            (Err(e), _) | (_, Err(e)) => (false, e.to_string()),
        };
        checks.push(CheckOutcome {
            name: "defect vs explosion probability (10y)".into(),
            passed,
            detail,
        });
    }

    // Vol expansion against the simulated smile at a 3-month horizon.
    {
        let p = SabrParams::new(0.10, 0.8, 0.30).unwrap();
        let tau = 0.25;
        let mut passed = true;
        let mut details = Vec::new();
        for &k in &[0.95, 1.0, 1.05] {
            let expansion = sabr_implied_vol(1.0, k, tau, &p);
            match mc_implied_vol(1.0, k, tau, &p, &path_cfg) {
                Ok(sim) => {
                    let diff = (expansion - sim.vol).abs();
                    // Expansion bias budget 0.15 vol points plus sampling noise.
                    let tol = 3.0 * sim.std_error + 0.0015;
                    let ok = diff <= tol;
                    passed &= ok;
                    details.push(format!(
                        "K={k}: |{:.4} - {:.4}| = {:.4} (tol {:.4})",
                        expansion, sim.vol, diff, tol
                    ));
                }
                Err(e) => {
                    passed = false;
                    details.push(format!("K={k}: {e}"));
                }
            }
        }
        checks.push(CheckOutcome {
            name: "vol expansion vs simulation (3m)".into(),
            passed,
            detail: details.join("; "),
        });
    }

    // Conversion round trips at 1e-10.
    {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0xC0FFEE);
        let rates = RateCurvePoint { r_dom: 0.02, r_for: 0.01 };
        let mut worst_delta = 0.0f64;
        let mut worst_vol = 0.0f64;
        let mut failures = 0usize;
        for i in 0..1000 {
            let sigma = rng.gen_range(0.05..0.30);
            let tau = rng.gen_range(0.02..1.0);
            let p = rng.gen_range(0.05..0.45);
            let call = i % 2 == 0;
            let conv = QuoteConvention {
                premium_adjusted: i % 3 == 0,
                delta_style: if i % 4 < 2 {
                    crate::market::DeltaStyle::Forward
                } else {
                    crate::market::DeltaStyle::Spot
                },
                ..QuoteConvention::default()
            };
            let (target, ot) = if call { (p, OptionType::Call) } else { (-p, OptionType::Put) };
            match delta_to_strike(target, 1.0, sigma, tau, ot, &conv, rates) {
                Ok(k) => {
                    let back = bsm_delta(1.0, k, sigma, tau, ot, &conv, rates);
                    worst_delta = worst_delta.max((back - target).abs());
                    // Price the OTM side and invert.
                    let otm = if k >= 1.0 { OptionType::Call } else { OptionType::Put };
                    let price = bsm_price(1.0, k, sigma, tau, 1.0, otm).unwrap();
                    match bsm_implied_vol(price, 1.0, k, tau, 1.0, otm) {
                        Ok(iv) => worst_vol = worst_vol.max((iv - sigma).abs() / sigma),
                        Err(_) => failures += 1,
                    }
                }
                Err(_) => failures += 1,
            }
        }
        let passed = failures == 0 && worst_delta <= 1e-10 && worst_vol <= 1e-10;
        checks.push(CheckOutcome {
            name: "conversion round trips (1e-10)".into(),
            passed,
            detail: format!(
                "worst delta residual {worst_delta:.3e}, worst vol relative {worst_vol:.3e}, \
                 {failures} failures"
            ),
        });
    }

    // A quick end-to-end inversion: synthetic slice, MAP close to truth.
    {
        let truth = SabrParams::new(0.10, 0.9, 0.45).unwrap();
        let date = NaiveDate::from_ymd_opt(2019, 6, 3).unwrap();
        let tenor: Tenor = "1Y".parse().unwrap();
        let synth_cfg = SyntheticConfig {
            seed: config.seed ^ 0xBEE,
            ..SyntheticConfig::new(truth, date, tenor)
        };
        let (passed, detail) = match synthesize_row(&synth_cfg)
            .and_then(|sq| quotes_to_slice(&sq.row, &QuoteConvention::default()))
            .and_then(|slice| {
                let spec = PosteriorSpec::new(slice);
                nelder_mead_map(&spec, &MapOptions { seed: config.seed ^ 0xFACE, ..MapOptions::default() })
            }) {
            Ok(map) => {
                let got = map.params.as_array();
                let want = truth.as_array();
                let rel: Vec<f64> = got
                    .iter()
                    .zip(&want)
                    .map(|(g, w)| (g - w).abs() / w.abs())
                    .collect();
                let ok = rel.iter().all(|r| *r <= 0.10);
                (
                    ok,
                    format!(
                        "map ({:.4}, {:.4}, {:.4}) vs truth ({:.2}, {:.2}, {:.2}), \
                         relative errors ({:.3}, {:.3}, {:.3})",
                        got[0], got[1], got[2], want[0], want[1], want[2], rel[0], rel[1], rel[2]
                    ),
                )
            }
            Err(e) => (false, e.to_string()),
        };
        checks.push(CheckOutcome {
            name: "synthetic smile inversion (map within 10%)".into(),
            passed,
            detail,
        });
    }

    ValidationReport { checks }
}
