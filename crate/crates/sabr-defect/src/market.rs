//! FX market data: quote parsing, delta/ATM conventions, strike solving and
//! assembly of calibration-ready smile slices.
//!
//! A quote row carries five two-sided vol quotes for one (date, tenor) pair,
//! either directly per delta pillar
//!
//! ```text
//!     10d put   25d put   ATM   25d call   10d call
//! ```
//!
//! or as ATM / risk-reversal / strangle packages that are unpacked with the
//! smile-strangle identities
//!
//! ```text
//!     sigma_25c/p = atm + str25 +/- rr25 / 2
//!     sigma_10c/p = atm + str10 +/- rr10 / 2
//! ```
//!
//! Strikes are recovered from the convention in force (spot or forward delta,
//! premium-adjusted or not, delta-neutral-straddle or at-the-forward ATM) and
//! every constructed [`MarketSlice`] guarantees strictly increasing strikes
//! and positive vols.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::path::Path;
use std::str::FromStr;

use chrono::{Months, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{norm_cdf, norm_pdf, norm_quantile};
use crate::sabr::OptionType;

/// Continuously compounded zero rates for one expiry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateCurvePoint {
    pub r_dom: f64,
    pub r_for: f64,
}

/// Whether deltas are quoted against spot or forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeltaStyle {
    Spot,
    Forward,
}

/// ATM quotation convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AtmStyle {
    /// Strike at which call and put deltas cancel.
    DeltaNeutralStraddle,
    /// Strike pinned to the outright forward.
    AtTheForward,
}

/// Strangle quotation convention. Only the smile (vol-offset) strangle is
/// supported; the enum leaves room for the market strangle should it ever be
/// needed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StrangleStyle {
    SmileStrangle,
}

/// Full quoting convention for one currency pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuoteConvention {
    pub delta_style: DeltaStyle,
    pub premium_adjusted: bool,
    pub atm_style: AtmStyle,
    pub strangle_style: StrangleStyle,
}

impl Default for QuoteConvention {
    fn default() -> Self {
        QuoteConvention {
            delta_style: DeltaStyle::Forward,
            premium_adjusted: false,
            atm_style: AtmStyle::DeltaNeutralStraddle,
            strangle_style: StrangleStyle::SmileStrangle,
        }
    }
}

/// A two-sided quote. Values may be negative (risk reversals usually are);
/// only bid <= ask is enforced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quote {
    bid: f64,
    ask: f64,
}

impl Quote {
    pub fn new(bid: f64, ask: f64) -> Result<Self> {
        if !(bid.is_finite() && ask.is_finite()) {
            return Err(Error::malformed_quote(format!("quote sides must be finite, got [{bid}, {ask}]")));
        }
        if bid > ask {
            return Err(Error::malformed_quote(format!("bid {bid} exceeds ask {ask}")));
        }
        Ok(Quote { bid, ask })
    }

    pub fn bid(&self) -> f64 {
        self.bid
    }

    pub fn ask(&self) -> f64 {
        self.ask
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.bid + self.ask)
    }

    /// Full bid-ask width (ask minus bid).
    pub fn width(&self) -> f64 {
        self.ask - self.bid
    }
}

/// Quote tenor such as 1D, 2W, 6M or 10Y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tenor {
    count: u32,
    unit: TenorUnit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TenorUnit {
    Days,
    Weeks,
    Months,
    Years,
}

impl Tenor {
    pub fn new(count: u32, unit: TenorUnit) -> Result<Self> {
        if count == 0 {
            return Err(Error::invalid_input("tenor count must be positive"));
        }
        Ok(Tenor { count, unit })
    }

    /// Calendar expiry date for a quote observed on `start`. Months and years
    /// use calendar arithmetic with the usual end-of-month clamping.
    pub fn expiry_date(&self, start: NaiveDate) -> Result<NaiveDate> {
        let out = match self.unit {
            TenorUnit::Days => start.checked_add_days(chrono::Days::new(self.count as u64)),
            TenorUnit::Weeks => start.checked_add_days(chrono::Days::new(7 * self.count as u64)),
            TenorUnit::Months => start.checked_add_months(Months::new(self.count)),
            TenorUnit::Years => start.checked_add_months(Months::new(12 * self.count)),
        };
        out.ok_or_else(|| Error::invalid_input(format!("tenor {self} overflows the calendar from {start}")))
    }

    /// ACT/365 year fraction from `start` to the tenor expiry.
    pub fn year_fraction(&self, start: NaiveDate) -> Result<f64> {
        let end = self.expiry_date(start)?;
        Ok((end - start).num_days() as f64 / 365.0)
    }
}

impl fmt::Display for Tenor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let u = match self.unit {
            TenorUnit::Days => 'D',
            TenorUnit::Weeks => 'W',
            TenorUnit::Months => 'M',
            TenorUnit::Years => 'Y',
        };
        write!(f, "{}{}", self.count, u)
    }
}

impl FromStr for Tenor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.len() < 2 {
            return Err(Error::invalid_input(format!("unrecognized tenor {s:?}")));
        }
        let (num, unit) = s.split_at(s.len() - 1);
        let count: u32 = num
            .parse()
            .map_err(|_| Error::invalid_input(format!("unrecognized tenor {s:?}")))?;
        let unit = match unit.chars().next().unwrap().to_ascii_uppercase() {
            'D' => TenorUnit::Days,
            'W' => TenorUnit::Weeks,
            'M' => TenorUnit::Months,
            'Y' => TenorUnit::Years,
            _ => return Err(Error::invalid_input(format!("unrecognized tenor unit in {s:?}"))),
        };
        Tenor::new(count, unit)
    }
}

/// Five two-sided quotes in one of the two supported packagings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuotePayload {
    /// Direct vols at the 10d put / 25d put / ATM / 25d call / 10d call pillars.
    PerDelta {
        vol_10p: Quote,
        vol_25p: Quote,
        vol_atm: Quote,
        vol_25c: Quote,
        vol_10c: Quote,
    },
    /// ATM, risk reversals and smile strangles at the 25d and 10d pillars.
    AtmRrStr {
        atm: Quote,
        rr25: Quote,
        rr10: Quote,
        str25: Quote,
        str10: Quote,
    },
}

/// One parsed input row: market identifiers plus the five-quote payload.
#[derive(Debug, Clone, PartialEq)]
pub struct SmileQuoteRow {
    pub date: NaiveDate,
    pub tenor: Tenor,
    /// Year fraction override; when absent the tenor is resolved on an
    /// ACT/365 basis from `date`.
    pub expiry: Option<f64>,
    pub spot: f64,
    pub rates: RateCurvePoint,
    pub payload: QuotePayload,
}

/// A calibration-ready smile slice: five strikes in strictly increasing
/// order with mid vols and bid-ask widths, plus the pricing inputs they were
/// built from.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketSlice {
    date: NaiveDate,
    tenor: Tenor,
    expiry: f64,
    spot: f64,
    rates: RateCurvePoint,
    forward: f64,
    convention: QuoteConvention,
    strikes: [f64; 5],
    mid_vols: [f64; 5],
    widths: [f64; 5],
}

impl MarketSlice {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        date: NaiveDate,
        tenor: Tenor,
        expiry: f64,
        spot: f64,
        rates: RateCurvePoint,
        convention: QuoteConvention,
        strikes: [f64; 5],
        mid_vols: [f64; 5],
        widths: [f64; 5],
    ) -> Result<Self> {
        if !(expiry.is_finite() && expiry > 0.0) {
            return Err(Error::invalid_input(format!("expiry must be finite and > 0, got {expiry}")));
        }
        if !(spot.is_finite() && spot > 0.0) {
            return Err(Error::invalid_input(format!("spot must be finite and > 0, got {spot}")));
        }
        if !(rates.r_dom.is_finite() && rates.r_for.is_finite()) {
            return Err(Error::invalid_input("rates must be finite"));
        }
        for (i, v) in mid_vols.iter().enumerate() {
            if !(v.is_finite() && *v > 0.0) {
                return Err(Error::malformed_quote(format!("mid vol {i} must be positive, got {v}")));
            }
        }
        for (i, w) in widths.iter().enumerate() {
            if !(w.is_finite() && *w >= 0.0) {
                return Err(Error::malformed_quote(format!("bid-ask width {i} must be >= 0, got {w}")));
            }
        }
        if !strikes.windows(2).all(|p| p[0] < p[1]) || strikes[0] <= 0.0 {
            return Err(Error::malformed_quote(format!(
                "strikes must be positive and strictly increasing, got {strikes:?}"
            )));
        }
        let forward = compute_forward(spot, rates, expiry);
        Ok(MarketSlice {
            date,
            tenor,
            expiry,
            spot,
            rates,
            forward,
            convention,
            strikes,
            mid_vols,
            widths,
        })
    }

    pub fn date(&self) -> NaiveDate {
        self.date
    }

    pub fn tenor(&self) -> Tenor {
        self.tenor
    }

    pub fn expiry(&self) -> f64 {
        self.expiry
    }

    pub fn spot(&self) -> f64 {
        self.spot
    }

    pub fn rates(&self) -> RateCurvePoint {
        self.rates
    }

    pub fn forward(&self) -> f64 {
        self.forward
    }

    pub fn convention(&self) -> QuoteConvention {
        self.convention
    }

    pub fn strikes(&self) -> &[f64; 5] {
        &self.strikes
    }

    pub fn mid_vols(&self) -> &[f64; 5] {
        &self.mid_vols
    }

    /// Full bid-ask widths per pillar, same order as [`Self::strikes`].
    pub fn bid_ask_widths(&self) -> &[f64; 5] {
        &self.widths
    }

    /// Domestic discount factor to expiry.
    pub fn discount_dom(&self) -> f64 {
        (-self.rates.r_dom * self.expiry).exp()
    }

    /// Stable identifier "date|tenor" used for reporting and seed derivation.
    pub fn label(&self) -> String {
        format!("{}|{}", self.date.format("%Y-%m-%d"), self.tenor)
    }
}

/// Covered-interest-parity forward: spot * exp((r_dom - r_for) tau).
pub fn compute_forward(spot: f64, rates: RateCurvePoint, tau: f64) -> f64 {
    spot * ((rates.r_dom - rates.r_for) * tau).exp()
}

/// Black-Scholes delta under the given convention. Spot-delta styles discount
/// by the foreign rate; forward styles ignore the curve (the argument is kept
/// so every style shares one signature). Premium-adjusted deltas subtract the
/// premium expressed in foreign units, which collapses to the
/// (K/F) N(phi d2) form.
pub fn bsm_delta(
    forward: f64,
    strike: f64,
    sigma: f64,
    tau: f64,
    option_type: OptionType,
    convention: &QuoteConvention,
    rates: RateCurvePoint,
) -> f64 {
    let phi = option_type.sign();
    let s = sigma * tau.sqrt();
    let d1 = (forward / strike).ln() / s + 0.5 * s;
    let d2 = d1 - s;
    let core = if convention.premium_adjusted {
        phi * (strike / forward) * norm_cdf(phi * d2)
    } else {
        phi * norm_cdf(phi * d1)
    };
    match convention.delta_style {
        DeltaStyle::Forward => core,
        DeltaStyle::Spot => (-rates.r_for * tau).exp() * core,
    }
}

/// ATM strike under the convention: the forward itself, or the delta-neutral
/// straddle strike F exp(+sigma^2 tau / 2) (non-adjusted) /
/// F exp(-sigma^2 tau / 2) (premium-adjusted).
pub fn atm_strike(forward: f64, sigma: f64, tau: f64, convention: &QuoteConvention) -> f64 {
    match convention.atm_style {
        AtmStyle::AtTheForward => forward,
        AtmStyle::DeltaNeutralStraddle => {
            let half_var = 0.5 * sigma * sigma * tau;
            if convention.premium_adjusted {
                forward * (-half_var).exp()
            } else {
                forward * half_var.exp()
            }
        }
    }
}

/// Strike with the requested signed delta (e.g. +0.25 for a 25d call, -0.25
/// for a 25d put). Non-adjusted styles invert in closed form; premium-adjusted
/// styles bisect in log-strike, taking the larger-strike root for calls as
/// market practice dictates. The result reproduces the target delta to 1e-10.
pub fn delta_to_strike(
    target_delta: f64,
    forward: f64,
    sigma: f64,
    tau: f64,
    option_type: OptionType,
    convention: &QuoteConvention,
    rates: RateCurvePoint,
) -> Result<f64> {
    let phi = option_type.sign();
    if !(target_delta.is_finite() && phi * target_delta > 0.0) {
        return Err(Error::invalid_input(format!(
            "target delta {target_delta} inconsistent with option sign {phi}"
        )));
    }
    if !(sigma.is_finite() && sigma > 0.0) || !(tau.is_finite() && tau > 0.0) {
        return Err(Error::invalid_input(format!("need sigma > 0 and tau > 0, got {sigma}, {tau}")));
    }
    let s = sigma * tau.sqrt();
    let df_for = match convention.delta_style {
        DeltaStyle::Forward => 1.0,
        DeltaStyle::Spot => (-rates.r_for * tau).exp(),
    };

    let strike = if !convention.premium_adjusted {
        let p = target_delta.abs() / df_for;
        if p >= 1.0 {
            return Err(Error::ConversionFailure {
                message: format!("unadjusted delta magnitude {} must stay below {df_for}", target_delta.abs()),
                lo: 0.0,
                hi: df_for,
            });
        }
        // phi d1 = Phi^{-1}(p)  =>  K = F exp(s^2/2 - phi s Phi^{-1}(p)).
        forward * (0.5 * s * s - phi * s * norm_quantile(p)?).exp()
    } else {
        solve_premium_adjusted_strike(target_delta, forward, s, option_type, df_for)?
    };

    let achieved = bsm_delta(forward, strike, sigma, tau, option_type, convention, rates);
    if (achieved - target_delta).abs() > 1e-10 {
        return Err(Error::ConversionFailure {
            message: format!(
                "strike solver left residual {:.3e} at delta {target_delta}",
                achieved - target_delta
            ),
            lo: achieved,
            hi: target_delta,
        });
    }
    Ok(strike)
}

/// Premium-adjusted strike search. The adjusted call delta
/// df (K/F) N(d2) rises to a peak and then decays, so the market-standard
/// root is the one beyond the peak; the adjusted put delta magnitude is
/// strictly increasing in strike, so plain bisection applies.
fn solve_premium_adjusted_strike(
    target_delta: f64,
    forward: f64,
    s: f64,
    option_type: OptionType,
    df_for: f64,
) -> Result<f64> {
    let phi = option_type.sign();
    let delta_at = |k: f64| -> f64 {
        let d2 = (forward / k).ln() / s - 0.5 * s;
        df_for * phi * (k / forward) * norm_cdf(phi * d2)
    };

    let (mut lo, mut hi) = match option_type {
        OptionType::Call => {
            // Peak of K N(d2): d2 = y* solving N(y) s = pdf(y); the root is
            // unique and lies above -s where the derivative changes sign.
            let (mut ylo, mut yhi) = (-s, s.max(1.0) + 20.0);
            for _ in 0..200 {
                let y = 0.5 * (ylo + yhi);
                if s * norm_cdf(y) - norm_pdf(y) > 0.0 {
                    yhi = y;
                } else {
                    ylo = y;
                }
            }
            let y = 0.5 * (ylo + yhi);
            let k_peak = forward * (-y * s - 0.5 * s * s).exp();
            let peak = delta_at(k_peak);
            if target_delta >= peak {
                return Err(Error::ConversionFailure {
                    message: format!(
                        "premium-adjusted call delta {target_delta} unattainable; maximum is {peak:.6}"
                    ),
                    lo: 0.0,
                    hi: peak,
                });
            }
            let mut hi = (forward * (6.0 * s).exp()).max(k_peak * 2.0);
            let mut guard = 0;
            while delta_at(hi) > target_delta && guard < 60 {
                hi *= 2.0;
                guard += 1;
            }
            (k_peak, hi)
        }
        OptionType::Put => {
            let mut lo = forward * (-6.0 * s - 0.5 * s * s).exp();
            let mut hi = forward * (6.0 * s).exp();
            let mut guard = 0;
            while delta_at(lo).abs() > target_delta.abs() && guard < 60 {
                lo *= 0.5;
                guard += 1;
            }
            guard = 0;
            while delta_at(hi).abs() < target_delta.abs() && guard < 60 {
                hi *= 2.0;
                guard += 1;
            }
            (lo, hi)
        }
    };

    // Bisect in log-strike. On the call branch delta decreases with strike;
    // on the put branch |delta| increases with strike.
    let increasing = matches!(option_type, OptionType::Put);
    let target_abs = target_delta.abs();
    for _ in 0..200 {
        let mid = (lo.ln() + 0.5 * (hi.ln() - lo.ln())).exp();
        let below = delta_at(mid).abs() < target_abs;
        if below == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo.ln() + hi.ln())).exp())
}

/// Resolve a quote row into a [`MarketSlice`]: unpack the payload to five
/// (mid, width) pairs, solve the convention strikes at the corresponding mid
/// vols and validate ordering.
///
/// For packaged quotes the wing widths combine the package widths as
/// w_wing = w_atm + w_str + w_rr / 2, matching how the wing mid is assembled
/// from the three package mids.
pub fn quotes_to_slice(row: &SmileQuoteRow, convention: &QuoteConvention) -> Result<MarketSlice> {
    let tau = match row.expiry {
        Some(t) if t.is_finite() && t > 0.0 => t,
        Some(t) => {
            return Err(Error::malformed_quote(format!("explicit year fraction must be > 0, got {t}")))
        }
        None => row.tenor.year_fraction(row.date)?,
    };
    let (mids, widths) = unpack_payload(&row.payload)?;
    for (i, m) in mids.iter().enumerate() {
        if !(m.is_finite() && *m > 0.0) {
            return Err(Error::malformed_quote(format!(
                "pillar {i} mid vol must be positive after unpacking, got {m}"
            )));
        }
    }

    let forward = compute_forward(row.spot, row.rates, tau);
    let k_atm = atm_strike(forward, mids[2], tau, convention);
    let solve = |delta: f64, sigma: f64, ot: OptionType| -> Result<f64> {
        delta_to_strike(delta, forward, sigma, tau, ot, convention, row.rates)
    };
    let strikes = [
        solve(-0.10, mids[0], OptionType::Put)?,
        solve(-0.25, mids[1], OptionType::Put)?,
        k_atm,
        solve(0.25, mids[3], OptionType::Call)?,
        solve(0.10, mids[4], OptionType::Call)?,
    ];
    if !strikes.windows(2).all(|p| p[0] < p[1]) {
        return Err(Error::malformed_quote(format!(
            "smile for {}|{} produced non-monotone strikes {strikes:?}",
            row.date, row.tenor
        )));
    }
    MarketSlice::new(
        row.date,
        row.tenor,
        tau,
        row.spot,
        row.rates,
        *convention,
        strikes,
        mids,
        widths,
    )
}

/// Mid vols and bid-ask widths at the five pillars, in strike order
/// (10d put, 25d put, ATM, 25d call, 10d call).
fn unpack_payload(payload: &QuotePayload) -> Result<([f64; 5], [f64; 5])> {
    match payload {
        QuotePayload::PerDelta {
            vol_10p,
            vol_25p,
            vol_atm,
            vol_25c,
            vol_10c,
        } => {
            let qs = [vol_10p, vol_25p, vol_atm, vol_25c, vol_10c];
            Ok((qs.map(|q| q.mid()), qs.map(|q| q.width())))
        }
        QuotePayload::AtmRrStr {
            atm,
            rr25,
            rr10,
            str25,
            str10,
        } => {
            let mids = [
                atm.mid() + str10.mid() - 0.5 * rr10.mid(),
                atm.mid() + str25.mid() - 0.5 * rr25.mid(),
                atm.mid(),
                atm.mid() + str25.mid() + 0.5 * rr25.mid(),
                atm.mid() + str10.mid() + 0.5 * rr10.mid(),
            ];
            let wing25 = atm.width() + str25.width() + 0.5 * rr25.width();
            let wing10 = atm.width() + str10.width() + 0.5 * rr10.width();
            let widths = [wing10, wing25, atm.width(), wing25, wing10];
            Ok((mids, widths))
        }
    }
}

/// One requested calibration run: which slice of the quote file to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleEntry {
    pub date: NaiveDate,
    pub tenor: Tenor,
}

const BASE_COLUMNS: [&str; 6] = ["date", "tenor", "T", "spot", "r_dom", "r_for"];
const PER_DELTA_COLUMNS: [&str; 10] = [
    "vol_10p_bid",
    "vol_10p_ask",
    "vol_25p_bid",
    "vol_25p_ask",
    "vol_atm_bid",
    "vol_atm_ask",
    "vol_25c_bid",
    "vol_25c_ask",
    "vol_10c_bid",
    "vol_10c_ask",
];
const PACKAGE_COLUMNS: [&str; 10] = [
    "atm_bid",
    "atm_ask",
    "rr25_bid",
    "rr25_ask",
    "rr10_bid",
    "rr10_ask",
    "str25_bid",
    "str25_ask",
    "str10_bid",
    "str10_ask",
];

struct HeaderIndex {
    positions: Vec<usize>,
    per_delta: bool,
}

fn index_headers(headers: &csv::StringRecord, path: &Path) -> Result<HeaderIndex> {
    let find = |name: &str| -> Option<usize> {
        headers.iter().position(|h| h.trim() == name)
    };
    let per_delta = find("vol_atm_bid").is_some();
    let payload_cols: &[&str] = if per_delta { &PER_DELTA_COLUMNS } else { &PACKAGE_COLUMNS };
    let mut positions = Vec::with_capacity(16);
    for name in BASE_COLUMNS.iter().chain(payload_cols) {
        match find(name) {
            Some(i) => positions.push(i),
            None => {
                return Err(Error::config(format!(
                    "{}: missing column {name:?} (expected {} plus either per-delta vol_* or atm/rr/str columns)",
                    path.display(),
                    BASE_COLUMNS.join(",")
                )))
            }
        }
    }
    Ok(HeaderIndex { positions, per_delta })
}

fn parse_date(s: &str, context: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
        .map_err(|_| Error::malformed_quote(format!("{context}: bad date {s:?}, expected YYYY-MM-DD")))
}

fn parse_f64(s: &str, name: &str, context: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::malformed_quote(format!("{context}: bad {name} value {s:?}")))
}

/// Read a smile quote CSV. The file must carry the base columns
/// `date,tenor,T,spot,r_dom,r_for` plus one complete payload set, either
/// per-delta bid/ask vols or ATM/RR/STR bid/ask packages. An empty `T` cell
/// resolves the tenor on an ACT/365 basis. Duplicate (date, tenor) pairs are
/// rejected.
pub fn read_quote_rows(path: &Path) -> Result<Vec<SmileQuoteRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::malformed_quote(format!("{}: {e}", path.display())))?
        .clone();
    let index = index_headers(&headers, path)?;

    let mut rows = Vec::new();
    let mut seen: HashSet<(NaiveDate, Tenor)> = HashSet::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::malformed_quote(format!("{}: {e}", path.display())))?;
        let context = format!("{} row {}", path.display(), line + 2);
        let field = |slot: usize| -> &str { record.get(index.positions[slot]).unwrap_or("") };

        let date = parse_date(field(0), &context)?;
        let tenor: Tenor = field(1)
            .parse()
            .map_err(|e| Error::malformed_quote(format!("{context}: {e}")))?;
        let expiry = match field(2) {
            "" => None,
            s => Some(parse_f64(s, "T", &context)?),
        };
        let spot = parse_f64(field(3), "spot", &context)?;
        let rates = RateCurvePoint {
            r_dom: parse_f64(field(4), "r_dom", &context)?,
            r_for: parse_f64(field(5), "r_for", &context)?,
        };

        let mut q = [Quote { bid: 0.0, ask: 0.0 }; 5];
        for (j, slot) in q.iter_mut().enumerate() {
            let bid = parse_f64(field(6 + 2 * j), "bid", &context)?;
            let ask = parse_f64(field(7 + 2 * j), "ask", &context)?;
            *slot = Quote::new(bid, ask).map_err(|e| Error::malformed_quote(format!("{context}: {e}")))?;
        }
        let payload = if index.per_delta {
            QuotePayload::PerDelta {
                vol_10p: q[0],
                vol_25p: q[1],
                vol_atm: q[2],
                vol_25c: q[3],
                vol_10c: q[4],
            }
        } else {
            QuotePayload::AtmRrStr {
                atm: q[0],
                rr25: q[1],
                rr10: q[2],
                str25: q[3],
                str10: q[4],
            }
        };

        if !seen.insert((date, tenor)) {
            return Err(Error::config(format!("{context}: duplicate slice {date}|{tenor}")));
        }
        rows.push(SmileQuoteRow {
            date,
            tenor,
            expiry,
            spot,
            rates,
            payload,
        });
    }
    Ok(rows)
}

/// Read a calibration schedule CSV with columns `date,tenor`. Duplicate
/// entries are rejected.
pub fn read_schedule(path: &Path) -> Result<Vec<ScheduleEntry>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::malformed_quote(format!("{}: {e}", path.display())))?
        .clone();
    let date_col = headers.iter().position(|h| h == "date");
    let tenor_col = headers.iter().position(|h| h == "tenor");
    let (date_col, tenor_col) = match (date_col, tenor_col) {
        (Some(d), Some(t)) => (d, t),
        _ => {
            return Err(Error::config(format!(
                "{}: schedule must have columns date,tenor",
                path.display()
            )))
        }
    };

    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::malformed_quote(format!("{}: {e}", path.display())))?;
        let context = format!("{} row {}", path.display(), line + 2);
        let date = parse_date(record.get(date_col).unwrap_or(""), &context)?;
        let tenor: Tenor = record
            .get(tenor_col)
            .unwrap_or("")
            .parse()
            .map_err(|e| Error::malformed_quote(format!("{context}: {e}")))?;
        if !seen.insert((date, tenor)) {
            return Err(Error::config(format!("{context}: duplicate schedule entry {date}|{tenor}")));
        }
        entries.push(ScheduleEntry { date, tenor });
    }
    Ok(entries)
}
