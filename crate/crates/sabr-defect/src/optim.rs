//! Derivative-free minimization: the Nelder-Mead downhill simplex in fixed
//! dimension.
//!
//! The implementation is the textbook variant (reflection 1, expansion 2,
//! contraction 1/2, shrink 1/2) with two practical hardenings for rough
//! objectives such as hard-constrained posteriors:
//!
//!  - NaN objective values are treated as +infinity, so excursions into an
//!    undefined region are simply ranked worst instead of poisoning the
//!    simplex ordering;
//!  - convergence requires either the simplex diameter or the spread of
//!    function values across the simplex to fall under its tolerance, and
//!    callers are expected to restart from the incumbent with fresh steps
//!    when they need protection against premature collapse.

/// Tuning knobs for [`nelder_mead`].
#[derive(Debug, Clone, Copy)]
pub struct NelderMeadConfig {
    pub max_iter: usize,
    /// Converged when the largest vertex distance from the best point drops
    /// below this.
    pub x_tol: f64,
    /// Converged when max f - min f across the simplex drops below this.
    pub f_tol: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        NelderMeadConfig { max_iter: 4000, x_tol: 1e-9, f_tol: 1e-12 }
    }
}

/// Outcome of a simplex run. `converged` reports whether a tolerance was met
/// within the iteration budget; the incumbent is returned either way.
#[derive(Debug, Clone, Copy)]
pub struct NelderMeadResult<const N: usize> {
    pub x: [f64; N],
    pub fx: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Minimize `f` from `start`, building the initial simplex by stepping each
/// coordinate by the corresponding entry of `steps` (entries must be
/// non-zero).
pub fn nelder_mead<const N: usize>(
    mut f: impl FnMut(&[f64; N]) -> f64,
    start: [f64; N],
    steps: [f64; N],
    config: &NelderMeadConfig,
) -> NelderMeadResult<N> {
    let mut eval = |x: &[f64; N]| sanitize(f(x));

    let mut simplex: Vec<[f64; N]> = Vec::with_capacity(N + 1);
    simplex.push(start);
    for i in 0..N {
        let mut v = start;
        v[i] += if steps[i] != 0.0 { steps[i] } else { 1e-4 };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(&mut eval).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iter {
        iterations += 1;

        // Order vertices best to worst.
        let mut order: Vec<usize> = (0..=N).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        let best = order[0];
        let worst = order[N];
        let second_worst = order[N - 1];

        let diam = simplex
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&simplex[best])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        let spread = values[worst] - values[best];
        if diam <= config.x_tol || spread <= config.f_tol {
            converged = true;
            break;
        }

        // Centroid of all vertices except the worst.
        let mut centroid = [0.0; N];
        for (i, v) in simplex.iter().enumerate() {
            if i == worst {
                continue;
            }
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / N as f64;
            }
        }

        let blend = |towards: &[f64; N], coeff: f64| -> [f64; N] {
            let mut out = [0.0; N];
            for i in 0..N {
                out[i] = centroid[i] + coeff * (towards[i] - centroid[i]);
            }
            out
        };

        let reflected = blend(&simplex[worst], -1.0);
        let f_reflected = eval(&reflected);
        if f_reflected < values[best] {
            let expanded = blend(&simplex[worst], -2.0);
            let f_expanded = eval(&expanded);
            if f_expanded < f_reflected {
                simplex[worst] = expanded;
                values[worst] = f_expanded;
            } else {
                simplex[worst] = reflected;
                values[worst] = f_reflected;
            }
            continue;
        }
        if f_reflected < values[second_worst] {
            simplex[worst] = reflected;
            values[worst] = f_reflected;
            continue;
        }
        let contracted = if f_reflected < values[worst] {
            blend(&simplex[worst], -0.5)
        } else {
            blend(&simplex[worst], 0.5)
        };
        let f_contracted = eval(&contracted);
        if f_contracted < values[worst].min(f_reflected) {
            simplex[worst] = contracted;
            values[worst] = f_contracted;
            continue;
        }
        // Shrink towards the best vertex.
        let anchor = simplex[best];
        for i in 0..=N {
            if i == best {
                continue;
            }
            for (x, a) in simplex[i].iter_mut().zip(&anchor) {
                *x = a + 0.5 * (*x - a);
            }
            values[i] = eval(&simplex[i]);
        }
    }

    let mut best = 0;
    for i in 1..=N {
        if values[i] < values[best] {
            best = i;
        }
    }
    NelderMeadResult { x: simplex[best], fx: values[best], iterations, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_shifted_quadratic() {
        let f = |x: &[f64; 3]| {
            (x[0] - 1.0).powi(2) + 2.0 * (x[1] + 2.0).powi(2) + 0.5 * (x[2] - 0.3).powi(2)
        };
        let r = nelder_mead(f, [0.0; 3], [0.5; 3], &NelderMeadConfig::default());
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-6, "{:?}", r.x);
        assert!((r.x[1] + 2.0).abs() < 1e-6, "{:?}", r.x);
        assert!((r.x[2] - 0.3).abs() < 1e-6, "{:?}", r.x);
    }

    #[test]
    fn rosenbrock_3d_with_restarts() {
        let f = |x: &[f64; 3]| {
            (0..2)
                .map(|i| 100.0 * (x[i + 1] - x[i] * x[i]).powi(2) + (1.0 - x[i]).powi(2))
                .sum::<f64>()
        };
        let cfg = NelderMeadConfig { max_iter: 20_000, ..NelderMeadConfig::default() };
        let mut r = nelder_mead(f, [-1.2, 1.0, 0.8], [0.3; 3], &cfg);
        for _ in 0..3 {
            r = nelder_mead(f, r.x, [0.05; 3], &cfg);
        }
        for (got, want) in r.x.iter().zip([1.0; 3]) {
            assert!((got - want).abs() < 1e-4, "{:?}", r.x);
        }
    }

    #[test]
    fn nan_regions_rank_worst() {
        // Objective undefined outside the unit ball; the simplex must stay
        // usable and find the interior minimum.
        let f = |x: &[f64; 2]| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            if r2 > 1.0 {
                f64::NAN
            } else {
                (x[0] - 0.4).powi(2) + (x[1] + 0.2).powi(2)
            }
        };
        let r = nelder_mead(f, [0.0, 0.0], [0.45, 0.45], &NelderMeadConfig::default());
        assert!(r.converged);
        assert!((r.x[0] - 0.4).abs() < 1e-6 && (r.x[1] + 0.2).abs() < 1e-6, "{:?}", r.x);
    }

    #[test]
    fn iteration_budget_is_respected() {
        let f = |x: &[f64; 2]| x[0] * x[0] + x[1] * x[1];
        let cfg = NelderMeadConfig { max_iter: 3, ..NelderMeadConfig::default() };
        let r = nelder_mead(f, [5.0, 5.0], [1.0, 1.0], &cfg);
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
    }
}
