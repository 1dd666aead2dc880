//! Pitman-Yor posterior for the number of new species in a follow-up sample.

use crate::combinatorics::{
    ln_rising, rising_factorial_in, rising_factorial_signed, GfcTable, NoncentralStirlingTable,
    DEFAULT_U_MAX,
};
use crate::error::{domain, Error, Result};
use crate::scalar::{Exact, Scalar};
use crate::signed_log::SignedLog;

/// Largest `m` accepted by [`posterior_pmf_dp`].
pub const DEFAULT_DP_MAX: usize = 20_000;

const CLAMP_TOL: f64 = 1e-12;
const NORMALIZATION_TOL: f64 = 1e-9;

/// Prior parameters `(alpha, theta)` with `0 <= alpha < 1` and `theta > -alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct PitmanYor<T> {
    alpha: T,
    theta: T,
}

pub type PyParams = PitmanYor<f64>;
pub type ExactPyParams = PitmanYor<Exact>;

impl<T: Scalar> PitmanYor<T> {
    pub fn new(alpha: T, theta: T) -> Result<Self> {
        let a = alpha.to_f64();
        let t = theta.to_f64();
        if !a.is_finite() || !t.is_finite() {
            return domain(format!("non-finite parameters alpha={a}, theta={t}"));
        }
        if alpha < T::zero() || alpha >= T::one() {
            return domain(format!("alpha = {a} outside [0, 1)"));
        }
        if theta.clone() + alpha.clone() <= T::zero() {
            return domain(format!("theta = {t} must exceed -alpha = {}", -a));
        }
        Ok(PitmanYor { alpha, theta })
    }

    pub fn alpha(&self) -> &T {
        &self.alpha
    }

    pub fn theta(&self) -> &T {
        &self.theta
    }

    /// `alpha == 0`: the Dirichlet process.
    pub fn is_dirichlet(&self) -> bool {
        self.alpha.is_zero_value()
    }

    pub fn to_f64(&self) -> PyParams {
        PitmanYor {
            alpha: self.alpha.to_f64(),
            theta: self.theta.to_f64(),
        }
    }
}

/// What the posterior needs from an observed sample: its size `n`, the number
/// of distinct species `j`, and (when known) the per-species frequencies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSummary {
    n: u64,
    j: u64,
    freqs: Option<Vec<u64>>,
}

impl SampleSummary {
    pub fn from_freqs(freqs: Vec<u64>) -> Result<Self> {
        if freqs.is_empty() {
            return Err(Error::EmptyInput);
        }
        if freqs.contains(&0) {
            return domain("species frequencies must be positive");
        }
        let n = freqs.iter().sum();
        Ok(SampleSummary {
            n,
            j: freqs.len() as u64,
            freqs: Some(freqs),
        })
    }

    /// A summary with unknown frequencies. Enough for every posterior
    /// quantity, but not for the likelihood.
    pub fn from_counts(n: u64, j: u64) -> Result<Self> {
        if j == 0 || j > n {
            return domain(format!("need 1 <= j <= n, got n={n}, j={j}"));
        }
        Ok(SampleSummary { n, j, freqs: None })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn j(&self) -> u64 {
        self.j
    }

    pub fn freqs(&self) -> Option<&[u64]> {
        self.freqs.as_deref()
    }

    /// Frequencies in decreasing order.
    pub fn sorted_freqs(&self) -> Option<Vec<u64>> {
        self.freqs.as_ref().map(|f| {
            let mut f = f.clone();
            f.sort_unstable_by(|a, b| b.cmp(a));
            f
        })
    }
}

/// Probability mass function on `0..=m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf<T = f64> {
    probs: Vec<T>,
}

impl<T: Scalar> Pmf<T> {
    pub fn point_mass_at_zero() -> Self {
        Pmf {
            probs: vec![T::one()],
        }
    }

    pub fn support_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn get(&self, k: usize) -> T {
        self.probs.get(k).cloned().unwrap_or_else(T::zero)
    }

    pub fn total(&self) -> T {
        self.probs.iter().cloned().fold(T::zero(), |acc, p| acc + p)
    }

    pub fn mean(&self) -> T {
        self.probs
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (k, p)| acc + T::from_usize(k) * p.clone())
    }

    /// Smallest `k` with `P[K <= k] >= p`.
    pub fn quantile(&self, p: &T) -> usize {
        let mut cdf = T::zero();
        for (k, q) in self.probs.iter().enumerate() {
            cdf = cdf + q.clone();
            if cdf >= *p {
                return k;
            }
        }
        self.support_max()
    }

    pub fn to_f64(&self) -> Pmf<f64> {
        Pmf {
            probs: self.probs.iter().map(Scalar::to_f64).collect(),
        }
    }

    pub fn into_probs(self) -> Vec<T> {
        self.probs
    }
}

/// Probability that the next draw is a new species, given `n_current + offset`
/// draws so far containing `k_current` distinct species.
pub fn predictive_new_prob<T: Scalar>(
    params: &PitmanYor<T>,
    n_current: u64,
    k_current: u64,
    offset: u64,
) -> Result<T> {
    let denom = params.theta.clone() + T::from_usize((n_current + offset) as usize);
    if denom <= T::zero() {
        return domain(format!("theta + n = {} is not positive", denom.to_f64()));
    }
    let num = params.theta.clone() + params.alpha.clone() * T::from_usize(k_current as usize);
    let p = num / denom;
    Ok(if p < T::zero() {
        T::zero()
    } else if p > T::one() {
        T::one()
    } else {
        p
    })
}

/// Posterior expected number of new species among `m` further draws.
pub fn posterior_mean(params: &PyParams, sample: &SampleSummary, m: u64) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let (alpha, theta) = (params.alpha, params.theta);
    let n = sample.n as f64;
    if params.is_dirichlet() {
        (0..m).map(|i| theta / (theta + n + i as f64)).sum()
    } else {
        let log_ratio = ln_rising(theta + n + alpha, m) - ln_rising(theta + n, m);
        (sample.j as f64 + theta / alpha) * log_ratio.exp_m1()
    }
}

/// [`posterior_mean`] by literal products; intended for exact arithmetic.
pub fn posterior_mean_in<T: Scalar>(params: &PitmanYor<T>, sample: &SampleSummary, m: usize) -> T {
    let (alpha, theta) = (params.alpha.clone(), params.theta.clone());
    let tn = theta.clone() + T::from_usize(sample.n as usize);
    if params.is_dirichlet() {
        return (0..m).fold(T::zero(), |acc, i| {
            acc + theta.clone() / (tn.clone() + T::from_usize(i))
        });
    }
    let ratio = rising_factorial_in(&(tn.clone() + alpha.clone()), m) / rising_factorial_in(&tn, m);
    (T::from_usize(sample.j as usize) + theta / alpha) * (ratio - T::one())
}

/// Exact posterior pmf of the number of new species by forward recursion over
/// the sequential sampling chain. O(m^2) time, O(m) memory.
pub fn posterior_pmf_dp<T: Scalar>(
    params: &PitmanYor<T>,
    sample: &SampleSummary,
    m: usize,
) -> Result<Pmf<T>> {
    posterior_pmf_dp_capped(params, sample, m, DEFAULT_DP_MAX)
}

pub fn posterior_pmf_dp_capped<T: Scalar>(
    params: &PitmanYor<T>,
    sample: &SampleSummary,
    m: usize,
    dp_max: usize,
) -> Result<Pmf<T>> {
    if m > dp_max {
        return Err(Error::Size {
            what: "m",
            value: m,
            cap: dp_max,
        });
    }
    let mut probs = vec![T::zero(); m + 1];
    probs[0] = T::one();
    for i in 0..m {
        for k in (0..=i).rev() {
            let pk = std::mem::replace(&mut probs[k], T::zero());
            if pk.is_zero_value() {
                continue;
            }
            let q = predictive_new_prob(params, sample.n, sample.j + k as u64, i as u64)?;
            probs[k + 1] = probs[k + 1].clone() + pk.clone() * q.clone();
            probs[k] = probs[k].clone() + pk * (T::one() - q);
        }
    }
    Ok(Pmf { probs })
}

/// Closed-form posterior pmf through generalized factorial coefficients
/// (non-central Stirling numbers when `alpha == 0`), in signed-log arithmetic.
pub fn posterior_pmf_closed(params: &PyParams, sample: &SampleSummary, m: usize) -> Result<Pmf> {
    posterior_pmf_closed_capped(params, sample, m, DEFAULT_U_MAX)
}

pub fn posterior_pmf_closed_capped(
    params: &PyParams,
    sample: &SampleSummary,
    m: usize,
    u_max: usize,
) -> Result<Pmf> {
    if m > u_max {
        return Err(Error::Size {
            what: "m",
            value: m,
            cap: u_max,
        });
    }
    let (alpha, theta) = (params.alpha, params.theta);
    let (n, j) = (sample.n as f64, sample.j as f64);
    let norm = rising_factorial_signed(theta + n, m);
    let terms: Vec<SignedLog> = if params.is_dirichlet() {
        let table = NoncentralStirlingTable::new(m, n)?;
        let ln_theta = SignedLog::from_f64(theta);
        (0..=m)
            .map(|k| {
                let power = SignedLog::new(1, ln_theta.log_abs() * k as f64);
                power * table.get(m, k) / norm
            })
            .collect()
    } else {
        let table = GfcTable::new(m, alpha, -n + j * alpha)?;
        (0..=m)
            .map(|k| rising_factorial_signed(j + theta / alpha, k) * table.get(m, k) / norm)
            .collect()
    };
    clamp_and_normalize(terms.iter().map(SignedLog::to_f64).collect())
}

fn clamp_and_normalize(mut probs: Vec<f64>) -> Result<Pmf> {
    for (k, p) in probs.iter_mut().enumerate() {
        if !p.is_finite() || *p < -CLAMP_TOL {
            return Err(Error::NumericalIntegrity(format!("Pr[{k}] = {p:e}")));
        }
        *p = p.max(0.0);
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::NumericalIntegrity(format!(
            "closed-form pmf sums to {total}"
        )));
    }
    probs.iter_mut().for_each(|p| *p /= total);
    Ok(Pmf { probs })
}

/// [`posterior_pmf_closed`] evaluated literally in any scalar type, for
/// `alpha > 0`. With [`Exact`] it is an exact oracle.
pub fn posterior_pmf_closed_in<T: Scalar>(
    params: &PitmanYor<T>,
    sample: &SampleSummary,
    m: usize,
) -> Pmf<T> {
    let (alpha, theta) = (params.alpha.clone(), params.theta.clone());
    let n = T::from_usize(sample.n as usize);
    let j = T::from_usize(sample.j as usize);
    let norm = rising_factorial_in(&(theta.clone() + n.clone()), m);
    let probs = if params.is_dirichlet() {
        let s = crate::combinatorics::stirling_noncentral_triangle_in(m, &n);
        let mut power = T::one();
        (0..=m)
            .map(|k| {
                let p = power.clone() * s[m][k].clone() / norm.clone();
                power = power.clone() * theta.clone();
                p
            })
            .collect()
    } else {
        let b = -n + j.clone() * alpha.clone();
        let c = crate::combinatorics::gfc_triangle_in(m, &alpha, &b);
        let base = j + theta / alpha;
        (0..=m)
            .map(|k| rising_factorial_in(&base, k) * c[m][k].clone() / norm.clone())
            .collect()
    };
    Pmf { probs }
}
