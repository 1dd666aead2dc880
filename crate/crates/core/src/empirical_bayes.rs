//! Empirical-Bayes choice of `(alpha, theta)` by maximizing the Ewens-Pitman
//! probability of the observed partition.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::combinatorics::ln_rising;
use crate::error::{domain, Error, Result};
use crate::model::SampleSummary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryFlag {
    AlphaZero,
    AlphaNearOne,
    ThetaCapped,
}

impl std::fmt::Display for BoundaryFlag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BoundaryFlag::AlphaZero => "alpha_zero",
            BoundaryFlag::AlphaNearOne => "alpha_near_one",
            BoundaryFlag::ThetaCapped => "theta_capped",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub alpha_hat: f64,
    pub theta_hat: f64,
    pub log_likelihood: f64,
    pub converged: bool,
    pub flags: BTreeSet<BoundaryFlag>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub alpha_step: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub refine_iters: usize,
    /// Search `theta` over `(-alpha, theta_max]` instead of `(theta_min, theta_max]`.
    pub allow_negative_theta: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            alpha_step: 0.01,
            theta_min: 1e-4,
            theta_max: 1e6,
            refine_iters: 500,
            allow_negative_theta: false,
        }
    }
}

/// The partition statistics the likelihood depends on: `n`, `j` and the
/// multiplicity of each frequency value.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyProfile {
    n: u64,
    j: u64,
    counts: Vec<(u64, u64)>,
}

impl FrequencyProfile {
    pub fn new(sample: &SampleSummary) -> Result<Self> {
        let freqs = sample
            .freqs()
            .ok_or_else(|| Error::Domain("the likelihood needs per-species frequencies".into()))?;
        let mut counts = BTreeMap::new();
        for &f in freqs {
            *counts.entry(f).or_insert(0u64) += 1;
        }
        Ok(FrequencyProfile {
            n: sample.n(),
            j: sample.j(),
            counts: counts.into_iter().collect(),
        })
    }

    /// Log Ewens-Pitman probability of the partition; `-inf` outside the
    /// admissible region.
    pub fn log_likelihood(&self, alpha: f64, theta: f64) -> f64 {
        if !(0.0..1.0).contains(&alpha)
            || (theta + alpha).is_nan()
            || theta + alpha <= 0.0
            || !theta.is_finite()
        {
            return f64::NEG_INFINITY;
        }
        let j = self.j;
        let new_species = if j == 1 {
            0.0
        } else if alpha == 0.0 {
            (j - 1) as f64 * theta.ln()
        } else {
            (j - 1) as f64 * alpha.ln() + ln_rising(theta / alpha + 1.0, j - 1)
        };
        let blocks: f64 = self
            .counts
            .iter()
            .map(|&(f, c)| c as f64 * ln_rising(1.0 - alpha, f - 1))
            .sum();
        new_species - ln_rising(theta + 1.0, self.n - 1) + blocks
    }
}

pub fn ep_log_likelihood(alpha: f64, theta: f64, sample: &SampleSummary) -> Result<f64> {
    Ok(FrequencyProfile::new(sample)?.log_likelihood(alpha, theta))
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Maximizer of a unimodal `f` on `[lo, hi]`, endpoints included.
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let (a0, b0) = (lo, hi);
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN * (hi - lo);
            f1 = f(x1);
        }
    }
    [(x1, f1), (x2, f2), (a0, f(a0)), (b0, f(b0))]
        .into_iter()
        .fold(
            (x1, f64::NEG_INFINITY),
            |best, c| if c.1 > best.1 { c } else { best },
        )
}

/// Nelder-Mead maximization in two dimensions. Returns the best vertex, its
/// value and whether the simplex collapsed below `tol` before `max_iters`.
fn nelder_mead_max(
    f: impl Fn([f64; 2]) -> f64,
    start: [f64; 2],
    step: [f64; 2],
    tol: f64,
    max_iters: usize,
) -> ([f64; 2], f64, bool) {
    let mut simplex = [
        start,
        [start[0] + step[0], start[1]],
        [start[0], start[1] + step[1]],
    ];
    let mut values = simplex.map(&f);
    let lerp =
        |a: [f64; 2], b: [f64; 2], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
    for _ in 0..max_iters {
        let mut order = [0, 1, 2];
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
        let (best, mid, worst) = (order[0], order[1], order[2]);
        let spread = (values[best] - values[worst]).abs();
        let size = simplex
            .iter()
            .map(|p| {
                (p[0] - simplex[best][0])
                    .abs()
                    .max((p[1] - simplex[best][1]).abs())
            })
            .fold(0.0, f64::max);
        if spread.is_finite() && spread <= tol && size <= tol.sqrt() {
            return (simplex[best], values[best], true);
        }
        let centroid = lerp(simplex[best], simplex[mid], 0.5);
        let reflected = lerp(centroid, simplex[worst], -1.0);
        let fr = f(reflected);
        if fr > values[best] {
            let expanded = lerp(centroid, simplex[worst], -2.0);
            let fe = f(expanded);
            if fe > fr {
                simplex[worst] = expanded;
                values[worst] = fe;
            } else {
                simplex[worst] = reflected;
                values[worst] = fr;
            }
        } else if fr > values[mid] {
            simplex[worst] = reflected;
            values[worst] = fr;
        } else {
            let contracted = if fr > values[worst] {
                lerp(centroid, reflected, 0.5)
            } else {
                lerp(centroid, simplex[worst], 0.5)
            };
            let fc = f(contracted);
            if fc > values[worst].max(fr) {
                simplex[worst] = contracted;
                values[worst] = fc;
            } else {
                for &i in &[mid, worst] {
                    simplex[i] = lerp(simplex[best], simplex[i], 0.5);
                    values[i] = f(simplex[i]);
                }
            }
        }
    }
    let best = (0..3)
        .max_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap();
    (simplex[best], values[best], false)
}

struct Search<'a> {
    profile: &'a FrequencyProfile,
    options: &'a FitOptions,
}

impl Search<'_> {
    fn theta_floor(&self, alpha: f64) -> f64 {
        if self.options.allow_negative_theta {
            -alpha
        } else {
            self.options.theta_min
        }
    }

    /// `theta` is searched as `x = ln(theta + alpha)`.
    fn x_range(&self, alpha: f64) -> (f64, f64) {
        let lo = if self.options.allow_negative_theta {
            self.options.theta_min.ln()
        } else {
            (self.options.theta_min + alpha).ln()
        };
        (lo, (self.options.theta_max + alpha).ln())
    }

    fn loglik_x(&self, alpha: f64, x: f64) -> f64 {
        let theta = x.exp() - alpha;
        if theta < self.theta_floor(alpha) || theta > self.options.theta_max {
            return f64::NEG_INFINITY;
        }
        self.profile.log_likelihood(alpha, theta)
    }

    fn best_theta(&self, alpha: f64) -> (f64, f64) {
        let (lo, hi) = self.x_range(alpha);
        golden_max(|x| self.loglik_x(alpha, x), lo, hi, 1e-10)
    }
}

/// Maximum-likelihood `(alpha, theta)`: a grid over `alpha` with a
/// golden-section search over `ln(theta + alpha)` at each grid value, then a
/// simplex refinement from the best grid point.
pub fn fit_empirical_bayes(sample: &SampleSummary, options: &FitOptions) -> Result<FitResult> {
    if !(options.alpha_step > 0.0 && options.alpha_step < 1.0) {
        return domain(format!("alpha step {} outside (0, 1)", options.alpha_step));
    }
    if !(options.theta_min > 0.0 && options.theta_max > options.theta_min) {
        return domain("need 0 < theta_min < theta_max");
    }
    if sample.n() < 2 {
        return Err(Error::DegenerateSample {
            reason: "a single observation carries no information about (alpha, theta)".into(),
            fit: None,
        });
    }
    let profile = FrequencyProfile::new(sample)?;
    let search = Search {
        profile: &profile,
        options,
    };

    let steps = ((1.0 - 1e-9) / options.alpha_step).floor() as usize;
    let grid: Vec<f64> = (0..=steps)
        .map(|i| i as f64 * options.alpha_step)
        .filter(|&a| a < 1.0)
        .collect();
    let (alpha0, (x0, ll0)) = grid
        .par_iter()
        .map(|&a| (a, search.best_theta(a)))
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0.0, (0.0, f64::NEG_INFINITY)), |best, c| {
            if c.1 .1 > best.1 .1 {
                c
            } else {
                best
            }
        });

    let objective = |p: [f64; 2]| search.loglik_x(p[0], p[1]);
    let (mut point, mut ll, converged) = nelder_mead_max(
        objective,
        [alpha0, x0],
        [0.5 * options.alpha_step, 0.05],
        1e-12,
        options.refine_iters,
    );
    if ll < ll0 {
        (point, ll) = ([alpha0, x0], ll0);
    }
    let (x0_zero, ll_zero) = search.best_theta(0.0);
    if ll_zero >= ll - 1e-9 && point[0] < options.alpha_step {
        point = [0.0, x0_zero];
    }

    let (alpha_hat, theta_hat) = (point[0], point[1].exp() - point[0]);
    let mut flags = BTreeSet::new();
    if alpha_hat == 0.0 {
        flags.insert(BoundaryFlag::AlphaZero);
    }
    if alpha_hat >= 1.0 - options.alpha_step {
        flags.insert(BoundaryFlag::AlphaNearOne);
    }
    if theta_hat >= options.theta_max * (1.0 - 1e-6) {
        flags.insert(BoundaryFlag::ThetaCapped);
    }
    let fit = FitResult {
        alpha_hat,
        theta_hat,
        log_likelihood: profile.log_likelihood(alpha_hat, theta_hat),
        converged,
        flags,
    };
    let (n, j) = (sample.n(), sample.j());
    if j == n {
        let mut fit = fit;
        fit.flags.insert(BoundaryFlag::ThetaCapped);
        return Err(Error::DegenerateSample {
            reason: "every species is a singleton, so theta diverges (theta_capped)".into(),
            fit: Some(Box::new(fit)),
        });
    }
    if j == 1 {
        return Err(Error::DegenerateSample {
            reason: format!(
                "a single species: the likelihood peaks on the boundary ({})",
                flag_list(&fit.flags)
            ),
            fit: Some(Box::new(fit)),
        });
    }
    Ok(fit)
}

fn flag_list(flags: &BTreeSet<BoundaryFlag>) -> String {
    if flags.is_empty() {
        "theta at its lower bound".into()
    } else {
        flags
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(", ")
    }
}
