use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::model::{PyParams, SampleSummary};
use crate::rng::{replicate, RngStream};
use crate::samplers::{sample_k_future, MlLimitParams};

/// Smallest Monte Carlo sample accepted by the simulated intervals.
pub const MIN_MC_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ExactMc,
    MittagLeffler,
    Gaussian,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::ExactMc => "exact_mc",
            Method::MittagLeffler => "mittag_leffler",
            Method::Gaussian => "gaussian",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CredibleInterval {
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
    pub method: Method,
    pub mc_samples: Option<usize>,
}

impl CredibleInterval {
    pub fn new(lo: f64, hi: f64, level: f64, method: Method, mc_samples: Option<usize>) -> Self {
        debug_assert!(lo <= hi, "interval [{lo}, {hi}] is reversed");
        CredibleInterval {
            lo,
            hi,
            level,
            method,
            mc_samples,
        }
    }

    pub fn degenerate(level: f64, method: Method, mc_samples: Option<usize>) -> Self {
        Self::new(0.0, 0.0, level, method, mc_samples)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// One-based ranks of the equal-tailed order statistics for `samples` draws.
pub fn quantile_ranks(samples: usize, level: f64) -> (usize, usize) {
    let delta = 1.0 - level;
    let rank = |p: f64| ((samples as f64 * p - 1e-9).ceil() as usize).clamp(1, samples);
    (rank(delta / 2.0), rank(1.0 - delta / 2.0))
}

fn check_mc(level: f64, samples: usize) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return domain(format!("level = {level} outside (0, 1)"));
    }
    if samples < MIN_MC_SAMPLES {
        return domain(format!(
            "need at least {MIN_MC_SAMPLES} Monte Carlo samples, got {samples}"
        ));
    }
    Ok(())
}

fn equal_tailed(mut draws: Vec<f64>, level: f64) -> (f64, f64) {
    draws.sort_by(f64::total_cmp);
    let (lo, hi) = quantile_ranks(draws.len(), level);
    (draws[lo - 1], draws[hi - 1])
}

/// Equal-tailed interval from `samples` runs of the posterior chain. Replicate
/// `i` uses stream `i` of `rng`'s family; the draws are charged to `rng`.
pub fn exact_interval(
    params: &PyParams,
    sample: &SampleSummary,
    m: u64,
    level: f64,
    samples: usize,
    rng: &mut RngStream,
) -> Result<CredibleInterval> {
    check_mc(level, samples)?;
    let (draws, used) = replicate(rng.family(), samples, |r| {
        sample_k_future(params, sample, m, r) as f64
    });
    rng.charge(used);
    let (lo, hi) = equal_tailed(draws, level);
    Ok(CredibleInterval::new(
        lo,
        hi,
        level,
        Method::ExactMc,
        Some(samples),
    ))
}

/// Equal-tailed interval from `samples` draws of the Mittag-Leffler limit.
pub fn ml_interval(
    params: &PyParams,
    sample: &SampleSummary,
    m: u64,
    level: f64,
    samples: usize,
    rng: &mut RngStream,
) -> Result<CredibleInterval> {
    let sampler = MlLimitParams::new(params, sample, m)?.sampler()?;
    check_mc(level, samples)?;
    let (draws, used) = replicate(rng.family(), samples, |r| sampler.sample(r));
    rng.charge(used);
    let draws = draws.into_iter().collect::<Result<Vec<f64>>>()?;
    let (lo, hi) = equal_tailed(draws, level);
    let cap = m as f64;
    Ok(CredibleInterval::new(
        lo.clamp(0.0, cap),
        hi.clamp(0.0, cap),
        level,
        Method::MittagLeffler,
        Some(samples),
    ))
}

/// Nearest integer, halves rounded up.
pub fn round_half_up(x: f64) -> f64 {
    (x + 0.5).floor()
}

/// Percentage of the rounded exact interval covered by the rounded approximate one.
pub fn coverage(approx: &CredibleInterval, exact: &CredibleInterval) -> f64 {
    let (alo, ahi) = (round_half_up(approx.lo), round_half_up(approx.hi));
    let (elo, ehi) = (round_half_up(exact.lo), round_half_up(exact.hi));
    if ehi == elo {
        return if alo <= elo && elo <= ahi { 100.0 } else { 0.0 };
    }
    let overlap = (ahi.min(ehi) - alo.max(elo)).max(0.0);
    100.0 * overlap / (ehi - elo)
}
