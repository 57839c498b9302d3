//! Lognormal SABR (beta = 1) model: Black-Scholes pricing on forwards, the
//! second-order small-time implied-volatility expansion, and the martingale
//! defect indicator.
//!
//! Model dynamics under the domestic pricing measure:
//!
//! ```text
//!     dF_t     = alpha_t F_t dW(1)
//!     dalpha_t = nu alpha_t dW(2),      d<W(1), W(2)>_t = rho dt
//! ```
//!
//! The implied vol is evaluated as sigma_0 (1 + c1 T + c2 T^2) where sigma_0
//! is the exact zeroth-order lognormal SABR vol (the z/x(z) closed form of
//! Hagan et al. 2002 at beta = 1) and c1 = rho nu alpha / 4 +
//! (2 - 3 rho^2) nu^2 / 24 is the standard first-order time correction, which
//! for beta = 1 carries no strike dependence. The second-order coefficient c2
//! is pluggable and defaults to 0; its accuracy is checked against the Monte
//! Carlo oracle in `mc` rather than asserted.
//!
//! For rho > 0 the forward is a strict local martingale (Jourdain 2004, Sin
//! 1998 give the classical argument) and E[F_T]/F_0 falls short of 1 by the
//! probability that an auxiliary vol process explodes by T. The limiting
//! shortfall has the closed form 1 - exp(-2 rho alpha / nu), exposed here as
//! [`defect_indicator`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::MarketSlice;
use crate::math::{norm_cdf, norm_pdf};

/// Call/put flag. `sign()` is +1 for calls, -1 for puts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptionType {
    Call,
    Put,
}

impl OptionType {
    pub fn sign(self) -> f64 {
        match self {
            OptionType::Call => 1.0,
            OptionType::Put => -1.0,
        }
    }

    /// Build from a +1/-1 sign convention.
    pub fn from_sign(phi: i32) -> Result<Self> {
        match phi {
            1 => Ok(OptionType::Call),
            -1 => Ok(OptionType::Put),
            other => Err(Error::invalid_input(format!("option sign must be +1 or -1, got {other}"))),
        }
    }
}

/// A plain vanilla contract on the forward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VanillaSpec {
    pub strike: f64,
    pub expiry: f64,
    pub option_type: OptionType,
}

/// SABR parameters theta = (alpha, nu, rho) with alpha > 0, nu > 0 and
/// |rho| <= 1. Constructed through [`SabrParams::new`] so every instance
/// satisfies the invariants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SabrParams {
    alpha: f64,
    nu: f64,
    rho: f64,
}

impl SabrParams {
    pub fn new(alpha: f64, nu: f64, rho: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::invalid_input(format!("alpha must be finite and > 0, got {alpha}")));
        }
        if !(nu.is_finite() && nu > 0.0) {
            return Err(Error::invalid_input(format!("nu must be finite and > 0, got {nu}")));
        }
        if !(rho.is_finite() && (-1.0..=1.0).contains(&rho)) {
            return Err(Error::invalid_input(format!("rho must lie in [-1, 1], got {rho}")));
        }
        Ok(SabrParams { alpha, nu, rho })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.alpha, self.nu, self.rho]
    }

    pub fn from_array(theta: [f64; 3]) -> Result<Self> {
        SabrParams::new(theta[0], theta[1], theta[2])
    }
}

/// Undiscounted-forward Black-Scholes price times a discount factor:
/// V = phi df { F N(phi d+) - K N(phi d-) }, d+/- = ln(F/K)/s +/- s/2 with
/// s = sigma sqrt(tau).
///
/// The sigma sqrt(tau) -> 0 limit returns discounted intrinsic value.
pub fn bsm_price(
    forward: f64,
    strike: f64,
    sigma: f64,
    tau: f64,
    discount: f64,
    option_type: OptionType,
) -> Result<f64> {
    validate_positive(forward, "forward")?;
    validate_positive(strike, "strike")?;
    validate_positive(discount, "discount factor")?;
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::invalid_input(format!("sigma must be finite and >= 0, got {sigma}")));
    }
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::invalid_input(format!("tau must be finite and > 0, got {tau}")));
    }
    let phi = option_type.sign();
    let s = sigma * tau.sqrt();
    if s < 1e-14 {
        return Ok(discount * (phi * (forward - strike)).max(0.0));
    }
    let d1 = (forward / strike).ln() / s + 0.5 * s;
    let d2 = d1 - s;
    Ok(discount * phi * (forward * norm_cdf(phi * d1) - strike * norm_cdf(phi * d2)))
}

/// Black-Scholes vega, d price / d sigma (shares the discounting convention
/// of [`bsm_price`]).
pub fn bsm_vega(forward: f64, strike: f64, sigma: f64, tau: f64, discount: f64) -> f64 {
    let s = sigma * tau.sqrt();
    if s < 1e-14 {
        return 0.0;
    }
    let d1 = (forward / strike).ln() / s + 0.5 * s;
    discount * forward * norm_pdf(d1) * tau.sqrt()
}

/// Invert [`bsm_price`] for the volatility. Bisection bracket plus Newton
/// polish; the returned sigma reproduces the price to 1e-12 relative.
///
/// Prices at or below intrinsic, or at or above the absolute upper bound
/// (df F for calls, df K for puts), have no solution.
pub fn bsm_implied_vol(
    price: f64,
    forward: f64,
    strike: f64,
    tau: f64,
    discount: f64,
    option_type: OptionType,
) -> Result<f64> {
    validate_positive(forward, "forward")?;
    validate_positive(strike, "strike")?;
    validate_positive(discount, "discount factor")?;
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::invalid_input(format!("tau must be finite and > 0, got {tau}")));
    }
    if !price.is_finite() {
        return Err(Error::invalid_input("price must be finite"));
    }
    let phi = option_type.sign();
    let target = price / discount;
    let intrinsic = (phi * (forward - strike)).max(0.0);
    let upper = match option_type {
        OptionType::Call => forward,
        OptionType::Put => strike,
    };
    if target <= intrinsic {
        return Err(Error::no_solution(format!(
            "price {price:.6e} at or below intrinsic {:.6e}",
            discount * intrinsic
        )));
    }
    if target >= upper {
        return Err(Error::no_solution(format!(
            "price {price:.6e} at or above upper bound {:.6e}",
            discount * upper
        )));
    }

    let value = |sig: f64| -> f64 {
        // Safe unwrap: inputs validated above, sigma kept positive below.
        bsm_price(forward, strike, sig, tau, 1.0, option_type).unwrap()
    };
    let (mut lo, mut hi) = (1e-9, 10.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if value(mid) > target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut sigma = 0.5 * (lo + hi);
    // Newton polish; falls back to the bisection estimate if vega degenerates.
    for _ in 0..8 {
        let diff = value(sigma) - target;
        if diff.abs() <= 1e-14 * target.max(1e-300) {
            break;
        }
        let vega = bsm_vega(forward, strike, sigma, tau, 1.0);
        if vega <= f64::MIN_POSITIVE {
            break;
        }
        let next = sigma - diff / vega;
        if next <= 0.0 || !next.is_finite() {
            break;
        }
        sigma = next;
    }
    Ok(sigma)
}

/// z / x(z) factor of the zeroth-order lognormal SABR vol, with
/// x(z) = ln[(sqrt(1 - 2 rho z + z^2) + z - rho) / (1 - rho)].
///
/// A Taylor branch covers |z| < 1e-6 and the general branch picks the
/// algebraically equivalent form that avoids cancellation for the given signs
/// of z and rho, so values stay accurate out to |rho| -> 1.
fn z_over_x(z: f64, rho: f64) -> f64 {
    if z.abs() < 1e-6 {
        return 1.0 - 0.5 * rho * z + (2.0 - 3.0 * rho * rho) * z * z / 12.0;
    }
    // x is antisymmetric under (z, rho) -> (-z, -rho), and z/x is invariant.
    let (z, rho) = if z > 0.0 { (z, rho) } else { (-z, -rho) };
    let disc = (1.0 - 2.0 * rho * z + z * z).sqrt();
    let x = if rho >= 0.0 {
        ((1.0 + rho) / (disc - z + rho)).ln()
    } else {
        ((disc + z - rho) / (1.0 - rho)).ln()
    };
    z / x
}

/// SABR implied volatility with an explicit second-order coefficient:
/// sigma_0(K) (1 + c1 tau + c2 tau^2).
///
/// Degenerate corners (|rho| = 1 with the strike beyond the singular
/// moneyness, or a correction factor driven non-positive) fall back first to
/// the zeroth-order vol and ultimately to alpha instead of failing; the
/// function always returns a positive, finite volatility.
pub fn sabr_implied_vol_with(
    forward: f64,
    strike: f64,
    tau: f64,
    params: &SabrParams,
    c2: f64,
) -> f64 {
    debug_assert!(forward > 0.0 && strike > 0.0 && tau > 0.0);
    let z = (params.nu / params.alpha) * (forward / strike).ln();
    let sigma0 = params.alpha * z_over_x(z, params.rho);
    if !(sigma0.is_finite() && sigma0 > 0.0) {
        return params.alpha;
    }
    let c1 = 0.25 * params.rho * params.nu * params.alpha
        + (2.0 - 3.0 * params.rho * params.rho) * params.nu * params.nu / 24.0;
    let full = sigma0 * (1.0 + (c1 + c2 * tau) * tau);
    if full.is_finite() && full > 0.0 {
        full
    } else {
        sigma0
    }
}

/// SABR implied volatility with the default second-order coefficient c2 = 0.
pub fn sabr_implied_vol(forward: f64, strike: f64, tau: f64, params: &SabrParams) -> f64 {
    sabr_implied_vol_with(forward, strike, tau, params, 0.0)
}

/// Model smile: implied vol at each of the five strikes of a market slice.
pub fn model_smile(slice: &MarketSlice, params: &SabrParams) -> [f64; 5] {
    let f = slice.forward();
    let tau = slice.expiry();
    let mut vols = [0.0; 5];
    for (v, k) in vols.iter_mut().zip(slice.strikes()) {
        *v = sabr_implied_vol(f, *k, tau, params);
    }
    vols
}

/// Martingale defect indicator A(theta) = 1 - exp(-2 rho alpha / nu) for
/// rho > 0, and exactly 0 for rho <= 0 (the forward is a true martingale
/// there, so no mass is lost at any horizon).
pub fn defect_indicator(params: &SabrParams) -> f64 {
    if params.rho <= 0.0 {
        0.0
    } else {
        -(-2.0 * params.rho * params.alpha / params.nu).exp_m1()
    }
}

fn validate_positive(x: f64, name: &str) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid_input(format!("{name} must be finite and > 0, got {x}")))
    }
}
