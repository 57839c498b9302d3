//! Bayesian calibration of the lognormal SABR model to FX volatility smiles,
//! with a martingale-defect tail-risk indicator.
//!
//! Under the domestic pricing measure the model reads
//!
//! ```text
//!     dF_t     = alpha_t F_t dW(1),
//!     dalpha_t = nu alpha_t dW(2),    d<W(1), W(2)>_t = rho dt,
//! ```
//!
//! with beta fixed at 1 (the usual FX choice). For rho > 0 the forward is a
//! strict local martingale: E[F_T] < F_0, and the shortfall grows towards
//!
//! ```text
//!     A(theta) = 1 - exp(-2 rho alpha / nu)
//! ```
//!
//! as T -> infinity. The crate calibrates theta = (alpha, nu, rho) to a
//! five-point smile by MAP optimization plus adaptive Metropolis sampling and
//! reports the posterior distribution of this defect indicator, which serves
//! as a market-implied bubble or tail-risk gauge.
//!
//! Module map:
//! - [`market`]: FX quote conventions, delta/strike conversions, smile assembly
//! - [`sabr`]: Black-Scholes pricing and the SABR implied-vol expansion
//! - [`optim`]: generic Nelder-Mead simplex minimizer
//! - [`kde`]: Epanechnikov kernel density estimation
//! - [`bayes`]: posterior evaluation, MAP search, adaptive Metropolis, summaries
//! - [`mc`]: Monte Carlo oracles for the defect and the vol expansion
//! - [`pipeline`]: batch fever-curve runs, file outputs, synthetic data

pub mod bayes;
pub mod error;
pub mod kde;
pub mod market;
pub mod math;
pub mod mc;
pub mod optim;
pub mod pipeline;
pub mod sabr;

pub use error::{Error, Result};
