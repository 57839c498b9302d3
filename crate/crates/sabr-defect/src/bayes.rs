//! Bayesian smile inversion: posterior specification, MAP search and an
//! adaptive Metropolis sampler over theta = (alpha, nu, rho).
//!
//! The posterior combines a flat prior on the admissible parameter box
//! (alpha > 0, nu > 0, |rho| <= 1) with a Gaussian quote likelihood
//! -1/2 r' Sigma^{-1} r, r_i = model vol - mid vol, truncated by a hard
//! bid-ask window: any parameter point whose model smile leaves a quoted
//! bid-ask band has posterior mass zero. A soft variant replaces the hard
//! wall with a steep quadratic penalty on the excursion; it is useful for
//! diagnosing infeasible-window data but is not the reference posterior.
//!
//! The sampler is the adaptive Metropolis scheme of Haario, Saksman and
//! Tamminen (2001): a Gaussian random walk whose proposal covariance is
//! s_d Cov(history) + s_d eps I with s_d = 2.4^2 / d, re-estimated from the
//! whole chain history at every step once adaptation begins. The generic
//! core accepts any log-target on R^3, which keeps it testable against
//! known distributions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::kde::DensityCurve;
use crate::market::MarketSlice;
use crate::math::{cholesky, cholesky_solve, mean, quantile_sorted};
use crate::optim::{nelder_mead, NelderMeadConfig};
use crate::sabr::{defect_indicator, model_smile, SabrParams};

/// Scale of the quadratic penalty per unit of band excursion in the soft
/// variant: an excursion of one vol point costs 0.5 (0.01 / 1e-4)^2 = 5000
/// log-posterior units, so the soft wall is steep enough to act as a
/// constraint while staying differentiable for the optimizer.
const SOFT_WALL_SCALE: f64 = 1e-4;

/// Posterior density specification for one market slice.
#[derive(Debug, Clone)]
pub struct PosteriorSpec {
    slice: MarketSlice,
    sigma_chol: [[f64; 5]; 5],
    soft_constraint: bool,
}

impl PosteriorSpec {
    /// Default measurement model: independent quote errors with standard
    /// deviation 0.01 (one vol point) per pillar.
    pub fn new(slice: MarketSlice) -> Self {
        let mut cov = [[0.0; 5]; 5];
        for (i, row) in cov.iter_mut().enumerate() {
            row[i] = 1e-4;
        }
        // Identity-scaled covariance is trivially positive definite.
        let sigma_chol = cholesky(&cov).unwrap();
        PosteriorSpec { slice, sigma_chol, soft_constraint: false }
    }

    /// Use an explicit 5x5 measurement covariance (must be symmetric
    /// positive definite).
    pub fn with_covariance(slice: MarketSlice, covariance: [[f64; 5]; 5]) -> Result<Self> {
        let sigma_chol = cholesky(&covariance)?;
        Ok(PosteriorSpec { slice, sigma_chol, soft_constraint: false })
    }

    /// Switch the hard bid-ask wall to the steep quadratic penalty.
    pub fn soft_constrained(mut self) -> Self {
        self.soft_constraint = true;
        self
    }

    pub fn slice(&self) -> &MarketSlice {
        &self.slice
    }

    pub fn is_soft(&self) -> bool {
        self.soft_constraint
    }

    /// Log posterior density (up to an additive constant) at a raw parameter
    /// point. Returns -infinity outside the admissible box, and under the
    /// hard constraint also whenever the model smile leaves any bid-ask band.
    pub fn log_posterior(&self, theta: &[f64; 3]) -> f64 {
        let params = match SabrParams::from_array(*theta) {
            Ok(p) => p,
            Err(_) => return f64::NEG_INFINITY,
        };
        let model = model_smile(&self.slice, &params);
        let mids = self.slice.mid_vols();
        let widths = self.slice.bid_ask_widths();

        let mut r = [0.0; 5];
        let mut penalty = 0.0;
        for i in 0..5 {
            r[i] = model[i] - mids[i];
            let excess = r[i].abs() - 0.5 * widths[i];
            if excess > 0.0 {
                if !self.soft_constraint {
                    return f64::NEG_INFINITY;
                }
                penalty += 0.5 * (excess / SOFT_WALL_SCALE).powi(2);
            }
        }
        let x = cholesky_solve(&self.sigma_chol, &r);
        let quad: f64 = r.iter().zip(&x).map(|(ri, xi)| ri * xi).sum();
        -0.5 * quad - penalty
    }

    /// Largest violation of the bid-ask windows at a raw parameter point:
    /// max_i(|r_i| - width_i / 2), negative when every pillar sits strictly
    /// inside its band, +infinity outside the admissible box.
    pub fn worst_band_excess(&self, theta: &[f64; 3]) -> f64 {
        let params = match SabrParams::from_array(*theta) {
            Ok(p) => p,
            Err(_) => return f64::INFINITY,
        };
        let model = model_smile(&self.slice, &params);
        let mids = self.slice.mid_vols();
        let widths = self.slice.bid_ask_widths();
        (0..5)
            .map(|i| (model[i] - mids[i]).abs() - 0.5 * widths[i])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// MAP search controls.
#[derive(Debug, Clone, Copy)]
pub struct MapOptions {
    /// Simplex iteration budget per stage.
    pub max_iter: usize,
    /// Shrinking-step polish restarts after the first simplex run.
    pub restarts: usize,
    /// Random-search draws used to find a feasible start when the
    /// deterministic start has zero posterior mass.
    pub feasibility_attempts: usize,
    pub seed: u64,
}

impl Default for MapOptions {
    fn default() -> Self {
        MapOptions { max_iter: 4000, restarts: 2, feasibility_attempts: 2000, seed: 12345 }
    }
}

/// A maximum a posteriori point with its log posterior.
#[derive(Debug, Clone, Copy)]
pub struct MapEstimate {
    pub params: SabrParams,
    pub log_posterior: f64,
}

/// Deterministic starting point: ATM mid for alpha, unit vol of vol, and a
/// correlation leaning the same way as the 25d skew.
fn default_start(slice: &MarketSlice) -> [f64; 3] {
    let mids = slice.mid_vols();
    let rho = if mids[3] >= mids[1] { 0.1 } else { -0.1 };
    [mids[2], 1.0, rho]
}

/// Simplex run plus shrinking-step polish restarts on one posterior.
fn simplex_stages(
    spec: &PosteriorSpec,
    start: [f64; 3],
    options: &MapOptions,
) -> crate::optim::NelderMeadResult<3> {
    let objective = |x: &[f64; 3]| -spec.log_posterior(x);
    let nm_cfg = NelderMeadConfig {
        max_iter: options.max_iter,
        x_tol: 1e-9,
        f_tol: 1e-12,
    };
    let mut steps = [0.25 * start[0].max(1e-3), 0.3, 0.2];
    let mut incumbent = nelder_mead(objective, start, steps, &nm_cfg);
    for _ in 0..options.restarts {
        for s in &mut steps {
            *s *= 0.2;
        }
        let polished = nelder_mead(objective, incumbent.x, steps, &nm_cfg);
        if polished.fx < incumbent.fx {
            incumbent = polished;
        }
    }
    incumbent
}

/// Maximize the posterior with Nelder-Mead.
///
/// The simplex always runs first on the soft-walled objective, which is
/// finite across the whole parameter box, so it can travel through
/// band-violating territory toward the data; starts far outside the bid-ask
/// windows (the usual situation with real quotes) are no problem. Under the
/// hard-window posterior the soft optimum is then checked for feasibility.
/// If it violates a band, two rescue stages follow: a simplex minimizing the
/// worst band excess directly (finds slivers of feasibility next to the soft
/// optimum), then a seeded random search over alpha = atm exp(N(0, 0.3)),
/// nu ~ U(0.05, 2.5), rho ~ U(-0.95, 0.95). Only when all of that misses is
/// the data window declared infeasible.
pub fn nelder_mead_map(spec: &PosteriorSpec, options: &MapOptions) -> Result<MapEstimate> {
    let start = default_start(spec.slice());
    let relaxed = if spec.is_soft() { spec.clone() } else { spec.clone().soft_constrained() };
    let soft_best = simplex_stages(&relaxed, start, options);

    // Inside the bands the soft and hard densities agree, so a feasible soft
    // optimum is the hard optimum as well.
    let lp = spec.log_posterior(&soft_best.x);
    if lp.is_finite() {
        return Ok(MapEstimate { params: SabrParams::from_array(soft_best.x)?, log_posterior: lp });
    }

    let nm_cfg = NelderMeadConfig { max_iter: options.max_iter, x_tol: 1e-12, f_tol: 1e-14 };
    let feas = nelder_mead(
        |x: &[f64; 3]| spec.worst_band_excess(x),
        soft_best.x,
        [0.05 * soft_best.x[0].max(1e-3), 0.05, 0.05],
        &nm_cfg,
    );
    let start = if feas.fx < 0.0 {
        feas.x
    } else {
        // Final resort: random draws across the box.
        let atm = spec.slice().mid_vols()[2];
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        let mut best: Option<([f64; 3], f64)> = None;
        for _ in 0..options.feasibility_attempts {
            let g: f64 = rng.sample(StandardNormal);
            let cand = [
                atm * (0.3 * g).exp(),
                rng.gen_range(0.05..2.5),
                rng.gen_range(-0.95..0.95),
            ];
            let lp = spec.log_posterior(&cand);
            if lp > f64::NEG_INFINITY && best.map_or(true, |(_, b)| lp > b) {
                best = Some((cand, lp));
            }
        }
        match best {
            Some((cand, _)) => cand,
            None => {
                return Err(Error::CalibrationInfeasible {
                    message: format!(
                        "no parameter point found whose smile stays inside every bid-ask band \
                         (simplex descent plus {} random draws); widen the bands or use the \
                         soft constraint",
                        options.feasibility_attempts
                    ),
                })
            }
        }
    };

    let incumbent = simplex_stages(spec, start, options);
    if !incumbent.fx.is_finite() {
        // Unreachable in practice: the start was feasible and the simplex
        // never swaps its incumbent for a worse point.
        return Err(Error::CalibrationInfeasible {
            message: format!("optimizer lost posterior support from start {start:?}"),
        });
    }
    Ok(MapEstimate {
        params: SabrParams::from_array(incumbent.x)?,
        log_posterior: -incumbent.fx,
    })
}

/// Adaptive Metropolis chain controls.
#[derive(Debug, Clone, Copy)]
pub struct ChainConfig {
    /// Number of recorded states (the start is not recorded).
    pub n_samples: usize,
    /// Fraction dropped from the front when summarizing.
    pub burn_in_fraction: f64,
    /// Step index at which covariance adaptation switches on.
    pub adaptation_start: usize,
    /// Ridge added to the adapted covariance, Haario's epsilon.
    pub epsilon: f64,
    pub seed: u64,
    /// Pre-adaptation proposal standard deviations per coordinate.
    pub initial_step: [f64; 3],
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            n_samples: 100_000,
            burn_in_fraction: 0.25,
            adaptation_start: 1000,
            epsilon: 1e-10,
            seed: 0,
            initial_step: [0.01, 0.05, 0.05],
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 1000 {
            return Err(Error::invalid_input(format!(
                "chain needs at least 1000 samples, got {}",
                self.n_samples
            )));
        }
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            return Err(Error::invalid_input(format!(
                "burn-in fraction must lie in [0, 1), got {}",
                self.burn_in_fraction
            )));
        }
        if self.adaptation_start < 10 {
            return Err(Error::invalid_input("adaptation must not start before step 10"));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::invalid_input(format!("epsilon must be finite and > 0, got {}", self.epsilon)));
        }
        if self.initial_step.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::invalid_input(format!(
                "initial proposal steps must be positive, got {:?}",
                self.initial_step
            )));
        }
        Ok(())
    }
}

/// Raw chain output from the generic sampler core.
#[derive(Debug, Clone)]
pub struct CoreChain {
    pub samples: Vec<[f64; 3]>,
    pub log_posterior: Vec<f64>,
    pub acceptance_rate: f64,
}

/// Running mean and scatter for the chain history (Welford's algorithm in
/// three dimensions).
struct RunningCovariance {
    count: f64,
    mean: [f64; 3],
    scatter: [[f64; 3]; 3],
}

impl RunningCovariance {
    fn seeded(x: &[f64; 3]) -> Self {
        RunningCovariance { count: 1.0, mean: *x, scatter: [[0.0; 3]; 3] }
    }

    fn push(&mut self, x: &[f64; 3]) {
        self.count += 1.0;
        let mut delta = [0.0; 3];
        for i in 0..3 {
            delta[i] = x[i] - self.mean[i];
            self.mean[i] += delta[i] / self.count;
        }
        for i in 0..3 {
            let delta2 = x[i] - self.mean[i];
            for j in 0..3 {
                self.scatter[i][j] += delta[j] * delta2;
            }
        }
    }

    fn covariance(&self) -> [[f64; 3]; 3] {
        let mut c = [[0.0; 3]; 3];
        if self.count > 1.5 {
            for i in 0..3 {
                for j in 0..3 {
                    c[i][j] = self.scatter[i][j] / (self.count - 1.0);
                }
            }
        }
        c
    }
}

/// Adaptive Metropolis over an arbitrary log-target on R^3.
///
/// Proposals are x + L z with z three standard normals and L the Cholesky
/// factor of the current proposal covariance: diag(initial_step)^2 before
/// `adaptation_start`, s_d Cov(history) + s_d eps I afterwards with
/// s_d = 2.4^2 / 3. Exactly three normals and one uniform are consumed per
/// step whatever the accept/reject outcome, so chains with the same seed are
/// reproducible sample for sample. Rejected steps record the incumbent
/// again, and the history driving adaptation includes the start and every
/// recorded state.
pub fn adaptive_metropolis_core(
    log_target: impl Fn(&[f64; 3]) -> f64,
    start: [f64; 3],
    config: &ChainConfig,
) -> Result<CoreChain> {
    config.validate()?;
    let mut logp_current = log_target(&start);
    if !logp_current.is_finite() {
        return Err(Error::CalibrationInfeasible {
            message: format!("chain start {start:?} has zero posterior mass"),
        });
    }

    const S_D: f64 = 2.4 * 2.4 / 3.0;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut history = RunningCovariance::seeded(&start);

    let mut init_chol = [[0.0; 3]; 3];
    for i in 0..3 {
        init_chol[i][i] = config.initial_step[i];
    }

    let mut current = start;
    let mut samples = Vec::with_capacity(config.n_samples);
    let mut trace = Vec::with_capacity(config.n_samples);
    let mut accepted = 0usize;

    for step in 0..config.n_samples {
        let chol = if step < config.adaptation_start {
            init_chol
        } else {
            let cov = history.covariance();
            let mut c = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    c[i][j] = S_D * cov[i][j];
                }
                c[i][i] += S_D * config.epsilon;
            }
            // The ridge keeps this positive definite; keep the safety net
            // anyway so a pathological target cannot poison the run.
            cholesky(&c).unwrap_or(init_chol)
        };

        let z: [f64; 3] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let u: f64 = rng.gen();

        let mut proposal = current;
        for i in 0..3 {
            for j in 0..=i {
                proposal[i] += chol[i][j] * z[j];
            }
        }

        let logp_proposal = log_target(&proposal);
        if u.ln() < logp_proposal - logp_current {
            current = proposal;
            logp_current = logp_proposal;
            accepted += 1;
        }

        history.push(&current);
        samples.push(current);
        trace.push(logp_current);
    }

    Ok(CoreChain {
        samples,
        log_posterior: trace,
        acceptance_rate: accepted as f64 / config.n_samples as f64,
    })
}

/// A posterior chain over SABR parameters.
#[derive(Debug, Clone)]
pub struct ChainResult {
    pub samples: Vec<SabrParams>,
    pub log_posterior: Vec<f64>,
    pub acceptance_rate: f64,
    pub start: SabrParams,
}

/// Run the adaptive Metropolis sampler on a slice posterior, starting from
/// `start` (normally the MAP point).
pub fn adaptive_metropolis(
    spec: &PosteriorSpec,
    start: SabrParams,
    config: &ChainConfig,
) -> Result<ChainResult> {
    let core = adaptive_metropolis_core(|x| spec.log_posterior(x), start.as_array(), config)?;
    let mut samples = Vec::with_capacity(core.samples.len());
    for raw in &core.samples {
        // Every recorded state has finite posterior mass, hence valid
        // parameters.
        samples.push(SabrParams::from_array(*raw)?);
    }
    Ok(ChainResult {
        samples,
        log_posterior: core.log_posterior,
        acceptance_rate: core.acceptance_rate,
        start,
    })
}

/// Equal-tailed credible interval.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CredibleInterval {
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
}

/// Posterior summary of one calibrated slice.
#[derive(Debug, Clone)]
pub struct PosteriorSummary {
    pub map: SabrParams,
    pub map_defect: f64,
    /// Componentwise posterior mean of theta.
    pub posterior_mean: SabrParams,
    /// Posterior mean of the defect indicator. This averages the indicator
    /// over samples and is NOT the indicator at the mean parameters; the
    /// map is convex in none of the coordinates so the two differ by a
    /// Jensen gap.
    pub mean_defect: f64,
    pub defect_interval: CredibleInterval,
    pub n_retained: usize,
    pub acceptance_rate: f64,
    pub marginal_alpha: Option<DensityCurve>,
    pub marginal_nu: Option<DensityCurve>,
    pub marginal_rho: Option<DensityCurve>,
    pub marginal_defect: Option<DensityCurve>,
    pub warnings: Vec<String>,
}

const DENSITY_GRID_POINTS: usize = 201;
const MIN_RETAINED: usize = 100;

/// Reduce a chain to point estimates, a defect credible interval and KDE
/// marginals. `burn_in_fraction` of the chain is dropped from the front;
/// at least 100 retained samples are required.
pub fn summarize(
    map: &MapEstimate,
    chain: &ChainResult,
    burn_in_fraction: f64,
    interval_level: f64,
) -> Result<PosteriorSummary> {
    if !(0.0..1.0).contains(&burn_in_fraction) {
        return Err(Error::invalid_input(format!(
            "burn-in fraction must lie in [0, 1), got {burn_in_fraction}"
        )));
    }
    if !(interval_level > 0.0 && interval_level < 1.0) {
        return Err(Error::invalid_input(format!(
            "interval level must lie in (0, 1), got {interval_level}"
        )));
    }
    let n = chain.samples.len();
    let burn = (n as f64 * burn_in_fraction).floor() as usize;
    let retained = &chain.samples[burn..];
    if retained.len() < MIN_RETAINED {
        return Err(Error::InsufficientSamples { needed: MIN_RETAINED, got: retained.len() });
    }

    let alphas: Vec<f64> = retained.iter().map(|p| p.alpha()).collect();
    let nus: Vec<f64> = retained.iter().map(|p| p.nu()).collect();
    let rhos: Vec<f64> = retained.iter().map(|p| p.rho()).collect();
    let defects: Vec<f64> = retained.iter().map(defect_indicator).collect();

    let posterior_mean = SabrParams::new(mean(&alphas), mean(&nus), mean(&rhos))?;
    let mean_defect = mean(&defects);

    let mut sorted_defects = defects.clone();
    sorted_defects.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let tail = 0.5 * (1.0 - interval_level);
    let defect_interval = CredibleInterval {
        lo: quantile_sorted(&sorted_defects, tail)?,
        hi: quantile_sorted(&sorted_defects, 1.0 - tail)?,
        level: interval_level,
    };

    let mut warnings = Vec::new();
    let mut marginal = |name: &str, xs: &[f64]| -> Option<DensityCurve> {
        match DensityCurve::from_samples(xs, DENSITY_GRID_POINTS) {
            Ok(c) => Some(c),
            Err(_) => {
                warnings.push(format!("{name} marginal omitted: retained samples have no spread"));
                None
            }
        }
    };
    let marginal_alpha = marginal("alpha", &alphas);
    let marginal_nu = marginal("nu", &nus);
    let marginal_rho = marginal("rho", &rhos);
    let marginal_defect = marginal("defect", &defects);

    if mean_defect < defect_interval.lo || mean_defect > defect_interval.hi {
        warnings.push(format!(
            "posterior mean defect {mean_defect:.6} lies outside the {:.0}% credible interval \
             [{:.6}, {:.6}]; the posterior is strongly skewed",
            100.0 * interval_level,
            defect_interval.lo,
            defect_interval.hi
        ));
    }

    Ok(PosteriorSummary {
        map: map.params,
        map_defect: defect_indicator(&map.params),
        posterior_mean,
        mean_defect,
        defect_interval,
        n_retained: retained.len(),
        acceptance_rate: chain.acceptance_rate,
        marginal_alpha,
        marginal_nu,
        marginal_rho,
        marginal_defect,
        warnings,
    })
}
