//! Random variates: the sequential species chains, Beta variates and the
//! Mittag-Leffler law of the large-`m` limit.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{domain, Error, Result};
use crate::model::{PyParams, SampleSummary};
use crate::rng::RngStream;

/// Iteration cap of the rejection loop in [`MittagLeffler::sample`].
pub const REJECTION_CAP: u64 = 1_000_000;

/// Number of new species in `m` draws continuing a chain that has seen
/// `n0` draws and `k0` species, with step-`i` new-species probability
/// `(theta + alpha K) / (theta + n0 + i)`.
///
/// Steps are not visited one by one. Candidate steps are spaced by geometric
/// gaps at the current (largest remaining) probability and thinned to the true
/// one, which gives the same law in time proportional to the number of
/// candidates rather than to `m`.
fn new_species_chain(alpha: f64, theta: f64, n0: u64, k0: u64, m: u64, rng: &mut RngStream) -> u64 {
    let base = theta + n0 as f64;
    let mut k = k0 as f64;
    let mut i = 0u64;
    let mut added = 0u64;
    while i < m {
        let c = theta + alpha * k;
        if c <= 0.0 {
            break;
        }
        let bound = (c / (base + i as f64)).min(1.0);
        if bound < 1.0 {
            let u: f64 = 1.0 - rng.random::<f64>();
            let gap = (u.ln() / (-bound).ln_1p()).floor();
            if gap >= (m - i) as f64 {
                break;
            }
            i += gap as u64;
        }
        let p = (c / (base + i as f64)).min(1.0);
        if p >= bound || rng.random::<f64>() * bound < p {
            k += 1.0;
            added += 1;
        }
        i += 1;
    }
    added
}

/// Draw from the posterior of the number of new species in `m` further draws.
pub fn sample_k_future(
    params: &PyParams,
    sample: &SampleSummary,
    m: u64,
    rng: &mut RngStream,
) -> u64 {
    new_species_chain(
        *params.alpha(),
        *params.theta(),
        sample.n(),
        sample.j(),
        m,
        rng,
    )
}

/// [`sample_k_future`] with one Bernoulli trial per step, kept as a reference.
pub fn sample_k_future_sequential(
    params: &PyParams,
    sample: &SampleSummary,
    m: u64,
    rng: &mut RngStream,
) -> u64 {
    let (alpha, theta) = (*params.alpha(), *params.theta());
    let base = theta + sample.n() as f64;
    let mut k = sample.j() as f64;
    let mut added = 0;
    for i in 0..m {
        if rng.random::<f64>() * (base + i as f64) < theta + alpha * k {
            k += 1.0;
            added += 1;
        }
    }
    added
}

/// Number of distinct species among `m` draws from a fresh Pitman-Yor prior
/// with total mass `theta_total`.
pub fn sample_prior_kstar(
    alpha: f64,
    theta_total: f64,
    m: u64,
    rng: &mut RngStream,
) -> Result<u64> {
    if theta_total.is_nan() || theta_total <= 0.0 || !(0.0..1.0).contains(&alpha) {
        return domain(format!(
            "need 0 <= alpha < 1 and theta > 0, got ({alpha}, {theta_total})"
        ));
    }
    Ok(new_species_chain(alpha, theta_total, 0, 0, m, rng))
}

/// A partition of `n` draws from the Pitman-Yor prior, seated customer by
/// customer. Block sizes are reported in order of first appearance.
pub fn sample_partition(params: &PyParams, n: u64, rng: &mut RngStream) -> Result<SampleSummary> {
    let (alpha, theta) = (*params.alpha(), *params.theta());
    let mut sizes: Vec<u64> = Vec::new();
    let mut owner: Vec<u32> = Vec::with_capacity(n as usize);
    for i in 0..n {
        let open = theta + alpha * sizes.len() as f64;
        if i == 0 || rng.random::<f64>() * (theta + i as f64) < open {
            owner.push(sizes.len() as u32);
            sizes.push(1);
            continue;
        }
        // Block b has weight size_b - alpha: pick a uniform earlier customer
        // (weight size_b) and keep its block with probability 1 - alpha / size_b.
        let block = loop {
            let b = owner[rng.random_range(0..i as usize)] as usize;
            if rng.random::<f64>() * sizes[b] as f64 >= alpha {
                break b;
            }
        };
        sizes[block] += 1;
        owner.push(block as u32);
    }
    SampleSummary::from_freqs(sizes)
}

fn ln_gamma_variate(shape: f64, rng: &mut RngStream) -> f64 {
    if shape < 1.0 {
        // G(a) = G(a + 1) U^(1/a); kept in logs so tiny shapes do not underflow.
        let g = Gamma::new(shape + 1.0, 1.0)
            .expect("valid shape")
            .sample(rng);
        let u: f64 = 1.0 - rng.random::<f64>();
        g.ln() + u.ln() / shape
    } else {
        Gamma::new(shape, 1.0)
            .expect("valid shape")
            .sample(rng)
            .ln()
    }
}

/// Beta(a, b) as `G_a / (G_a + G_b)` computed from the log-Gamma variates.
pub fn sample_beta(a: f64, b: f64, rng: &mut RngStream) -> Result<f64> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return domain(format!("Beta parameters must be positive, got ({a}, {b})"));
    }
    let la = ln_gamma_variate(a, rng);
    let lb = ln_gamma_variate(b, rng);
    Ok(1.0 / (1.0 + (lb - la).exp()))
}

/// `ln(sin x / x)`.
fn ln_sinc(x: f64) -> f64 {
    if x.abs() < 0.1 {
        let x2 = x * x;
        -x2 * (1.0 / 6.0
            + x2 * (1.0 / 180.0 + x2 * (1.0 / 2835.0 + x2 * (1.0 / 37800.0 + x2 / 467775.0))))
    } else {
        (x.sin() / x).ln()
    }
}

/// `cot x - 1/x`, the derivative of [`ln_sinc`].
fn cot_minus_recip(x: f64) -> f64 {
    if x.abs() < 0.1 {
        let x2 = x * x;
        -x * (1.0 / 3.0
            + x2 * (1.0 / 45.0 + x2 * (2.0 / 945.0 + x2 * (1.0 / 4725.0 + x2 * 2.0 / 93555.0))))
    } else {
        x.cos() / x.sin() - 1.0 / x
    }
}

/// Exact sampler for the Mittag-Leffler law `S_{alpha,q}`: the `-alpha` power
/// of a positive `alpha`-stable variable tilted by `t^(-alpha q)`.
///
/// Kanter's representation writes the stable variable as `(A(U)/E)^((1-alpha)/alpha)`
/// with `U ~ Unif(0, pi)`, `E ~ Exp(1)`. The tilt turns `E` into a
/// `Gamma(1 + gamma)` variable, `gamma = q (1 - alpha)`, and gives `U` the density
/// proportional to `exp(-gamma l(u))`, `l = ln A - ln A(0)`, which is sampled by
/// rejection from a flat-then-exponential envelope (`l` is convex and increasing).
#[derive(Debug, Clone)]
pub struct MittagLeffler {
    alpha: f64,
    gamma: f64,
    ln_a0: f64,
    u1: f64,
    slope: f64,
    flat_mass: f64,
    total_mass: f64,
    tail_span: f64,
    shape_e: Gamma<f64>,
}

impl MittagLeffler {
    pub fn new(alpha: f64, q: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return domain(format!("Mittag-Leffler alpha = {alpha} outside (0, 1)"));
        }
        if !(q > 0.0 && q.is_finite()) {
            return domain(format!("Mittag-Leffler q = {q} must be positive"));
        }
        let beta = 1.0 - alpha;
        let gamma = q * beta;
        let ln_a0 = (alpha * alpha.ln() + beta * beta.ln()) / beta;
        let mut s = MittagLeffler {
            alpha,
            gamma,
            ln_a0,
            u1: 0.0,
            slope: 0.0,
            flat_mass: 0.0,
            total_mass: 0.0,
            tail_span: 0.0,
            shape_e: Gamma::new(1.0 + gamma, 1.0).map_err(|e| Error::Domain(e.to_string()))?,
        };
        let (mut lo, mut hi) = (0.0, PI);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if gamma * s.ell(mid) < 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        s.u1 = lo;
        s.slope = gamma * s.ell_prime(lo);
        s.flat_mass = lo;
        s.tail_span = PI - lo;
        let tail_mass = (-1.0f64).exp() * -(-s.slope * s.tail_span).exp_m1() / s.slope;
        s.total_mass = s.flat_mass + tail_mass;
        Ok(s)
    }

    fn ell(&self, u: f64) -> f64 {
        let a = self.alpha;
        let b = 1.0 - a;
        (a * ln_sinc(a * u) + b * ln_sinc(b * u) - ln_sinc(u)) / b
    }

    fn ell_prime(&self, u: f64) -> f64 {
        let a = self.alpha;
        let b = 1.0 - a;
        (a * a * cot_minus_recip(a * u) + b * b * cot_minus_recip(b * u) - cot_minus_recip(u)) / b
    }

    fn sample_angle(&self, rng: &mut RngStream) -> Result<f64> {
        for _ in 0..REJECTION_CAP {
            let v = rng.random::<f64>() * self.total_mass;
            let (u, log_envelope) = if v < self.flat_mass {
                (v, 0.0)
            } else {
                let w: f64 = rng.random();
                let t = -(-w * -(-self.slope * self.tail_span).exp_m1()).ln_1p() / self.slope;
                let u = (self.u1 + t).min(PI * (1.0 - f64::EPSILON));
                (u, -1.0 - self.slope * (u - self.u1))
            };
            if u <= 0.0 {
                continue;
            }
            let log_target = -self.gamma * self.ell(u);
            let accept: f64 = 1.0 - rng.random::<f64>();
            if accept.ln() <= log_target - log_envelope {
                return Ok(u);
            }
        }
        Err(Error::NonConvergence(REJECTION_CAP))
    }

    /// Natural log of one draw.
    pub fn sample_ln(&self, rng: &mut RngStream) -> Result<f64> {
        let u = self.sample_angle(rng)?;
        let e = self.shape_e.sample(rng);
        let ln_a = self.ell(u) + self.ln_a0;
        Ok((1.0 - self.alpha) * (e.ln() - ln_a))
    }

    pub fn sample(&self, rng: &mut RngStream) -> Result<f64> {
        self.sample_ln(rng).map(f64::exp)
    }
}

pub fn sample_mittag_leffler(alpha: f64, q: f64, rng: &mut RngStream) -> Result<f64> {
    MittagLeffler::new(alpha, q)?.sample(rng)
}

/// Parameters of the large-`m` limit `c * Beta(beta_a, beta_b) * S_{alpha, stable_q}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlLimitParams {
    pub alpha: f64,
    pub beta_a: f64,
    pub beta_b: f64,
    pub stable_q: f64,
    pub scale_c: f64,
}

impl MlLimitParams {
    pub fn new(params: &PyParams, sample: &SampleSummary, m: u64) -> Result<Self> {
        let (alpha, theta) = (*params.alpha(), *params.theta());
        if params.is_dirichlet() {
            return Err(Error::MethodUnavailable(
                "the Mittag-Leffler limit needs alpha > 0; at alpha = 0 the scaled count \
                 degenerates to a constant (use the exact or Gaussian interval)"
                    .into(),
            ));
        }
        let (n, j) = (sample.n() as f64, sample.j() as f64);
        let tn = theta + n;
        Ok(MlLimitParams {
            alpha,
            beta_a: j + theta / alpha,
            beta_b: n / alpha - j,
            stable_q: tn / alpha,
            scale_c: tn.powf(alpha) * (alpha * (m as f64 / tn).ln_1p()).exp_m1(),
        })
    }

    pub fn sampler(&self) -> Result<MlLimitSampler> {
        Ok(MlLimitSampler {
            params: *self,
            stable: MittagLeffler::new(self.alpha, self.stable_q)?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct MlLimitSampler {
    params: MlLimitParams,
    stable: MittagLeffler,
}

impl MlLimitSampler {
    pub fn params(&self) -> &MlLimitParams {
        &self.params
    }

    pub fn sample(&self, rng: &mut RngStream) -> Result<f64> {
        let p = &self.params;
        if p.scale_c == 0.0 {
            return Ok(0.0);
        }
        let b = sample_beta(p.beta_a, p.beta_b, rng)?;
        let s = self.stable.sample(rng)?;
        Ok(p.scale_c * b * s)
    }
}

/// One draw of the Mittag-Leffler approximation to the posterior count.
pub fn sample_ml_limit(
    params: &PyParams,
    sample: &SampleSummary,
    m: u64,
    rng: &mut RngStream,
) -> Result<f64> {
    MlLimitParams::new(params, sample, m)?
        .sampler()?
        .sample(rng)
}
