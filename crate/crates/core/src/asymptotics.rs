//! Large-`m` constants of the prior and posterior central limit theorems, and
//! the Gaussian credible interval built from them.
//!
//! All constants are written with `exp_m1`/`ln_1p` so that they are continuous
//! at `alpha = 0` to machine precision instead of through cancellation.

use crate::error::{domain, Result};
use crate::intervals::{CredibleInterval, Method};
use crate::model::{PyParams, SampleSummary};
use crate::scalar::{Real, Scalar};

/// The sample in units of the extrapolation size: `tau = theta/m`, `nu = n/m`,
/// `rho = j/m`, `lambda = tau + nu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeRatios<T> {
    pub tau: T,
    pub nu: T,
    pub rho: T,
    pub lambda: T,
}

impl<T: Real> RegimeRatios<T> {
    pub fn new(tau: T, nu: T, rho: T) -> Result<Self> {
        if !(tau > T::zero() && nu > T::zero() && rho > T::zero()) {
            return domain("tau, nu and rho must be positive");
        }
        if rho > nu {
            return domain("rho = j/m cannot exceed nu = n/m");
        }
        Ok(RegimeRatios {
            tau,
            nu,
            rho,
            lambda: tau + nu,
        })
    }

    pub fn from_sample(theta: T, n: u64, j: u64, m: u64) -> Result<Self> {
        let m = T::from_usize(m as usize);
        Self::new(
            theta / m,
            T::from_usize(n as usize) / m,
            T::from_usize(j as usize) / m,
        )
    }
}

/// Normal approximation `N(m M, m S^2)` of the posterior count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianApprox<T> {
    pub mean: T,
    pub variance: T,
}

impl<T: Real> GaussianApprox<T> {
    pub fn new(alpha: T, ratios: &RegimeRatios<T>, m: u64) -> Self {
        let m = T::from_usize(m as usize);
        GaussianApprox {
            mean: m * script_m(alpha, ratios),
            variance: m * script_s_sq(alpha, ratios),
        }
    }
}

fn log_growth<T: Real>(lambda: T) -> T {
    lambda.recip().ln_1p()
}

/// `(1 + 1/lambda)^alpha - 1`, divided by `alpha` (its limit `ln(1 + 1/lambda)` at 0).
fn growth_over_alpha<T: Real>(alpha: T, lambda: T) -> T {
    let l = log_growth(lambda);
    if alpha.is_zero() {
        l
    } else {
        (alpha * l).exp_m1() / alpha
    }
}

/// Per-draw mean growth of the number of species under a fresh prior with total mass `lambda m`.
pub fn m_frak<T: Real>(alpha: T, lambda: T) -> T {
    lambda * growth_over_alpha(alpha, lambda)
}

/// Per-draw variance growth companion of [`m_frak`].
pub fn s_frak_sq<T: Real>(alpha: T, lambda: T) -> T {
    let g = (alpha * log_growth(lambda)).exp();
    lambda * g * growth_over_alpha(alpha, lambda) - lambda * g * g / (T::one() + lambda)
}

/// Posterior mean growth per additional draw.
pub fn script_m<T: Real>(alpha: T, r: &RegimeRatios<T>) -> T {
    (r.tau + r.rho * alpha) * growth_over_alpha(alpha, r.lambda)
}

/// Posterior variance growth per additional draw.
pub fn script_s_sq<T: Real>(alpha: T, r: &RegimeRatios<T>) -> T {
    let lambda = r.lambda;
    let c = r.tau + r.rho * alpha;
    let g = (alpha * log_growth(lambda)).exp();
    (c / lambda) * g * (lambda * growth_over_alpha(alpha, lambda) - c * g / (lambda + T::one()))
}

/// The mixing functions linking the prior and posterior limits. Only the
/// test suite uses them.
#[doc(hidden)]
pub mod identities {
    use super::RegimeRatios;
    use crate::scalar::Real;

    pub fn mu_z<T: Real>(z: T, alpha: T, r: &RegimeRatios<T>) -> T {
        z * (r.tau + r.rho * alpha) / r.lambda
    }

    pub fn mu_prime<T: Real>(alpha: T, r: &RegimeRatios<T>) -> T {
        (r.tau + r.rho * alpha) / r.lambda
    }

    pub fn sigma_sq_z<T: Real>(z: T, alpha: T, r: &RegimeRatios<T>) -> T {
        let l = r.lambda;
        z * (r.tau + r.rho * alpha) * (r.nu - r.rho * alpha) / (l * l) * (T::one() + alpha * z / l)
    }
}

/// Standard normal quantile, Wichura's AS 241 (relative error about 1e-16).
pub fn normal_quantile<T: Real>(p: T) -> T {
    T::from_f64(ppnd16(Scalar::to_f64(&p)))
}

fn poly(coefs: &[f64], x: f64) -> f64 {
    coefs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn ppnd16(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.387_132_872_796_366_5,
        1.331_416_678_917_843_8e2,
        1.971_590_950_306_551_3e3,
        1.373_169_376_550_946e4,
        4.592_195_393_154_987e4,
        6.726_577_092_700_87e4,
        3.343_057_558_358_813e4,
        2.509_080_928_730_122_7e3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.231_333_070_160_091e1,
        6.871_870_074_920_579e2,
        5.394_196_021_424_751e3,
        2.121_379_430_158_659_7e4,
        3.930_789_580_009_271e4,
        2.872_908_573_572_194_3e4,
        5.226_495_278_852_545e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_5,
        4.630_337_846_156_546,
        5.769_497_221_460_691,
        3.647_848_324_763_204_5,
        1.270_458_252_452_368_4,
        2.417_807_251_774_506e-1,
        2.272_384_498_926_918_4e-2,
        7.745_450_142_783_414e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_759,
        1.676_384_830_183_803_8,
        6.897_673_349_851e-1,
        1.481_039_764_274_800_8e-1,
        1.519_866_656_361_645_7e-2,
        5.475_938_084_995_345e-4,
        1.050_750_071_644_416_9e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103,
        5.463_784_911_164_114,
        1.784_826_539_917_291_3,
        2.965_605_718_285_048_7e-1,
        2.653_218_952_657_612_4e-2,
        1.242_660_947_388_078_4e-3,
        2.711_555_568_743_487_6e-5,
        2.010_334_399_292_288_1e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.998_322_065_558_88e-1,
        1.369_298_809_227_358e-1,
        1.487_536_129_085_061_5e-2,
        7.868_691_311_456_133e-4,
        1.846_318_317_510_054_8e-5,
        1.421_511_758_316_446e-7,
        2.044_263_103_389_939_8e-15,
    ];

    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

/// Symmetric Gaussian credible interval for the number of new species,
/// clamped to `[0, m]`.
pub fn gaussian_interval(
    params: &PyParams,
    sample: &SampleSummary,
    m: u64,
    level: f64,
) -> Result<CredibleInterval> {
    if !(level > 0.0 && level < 1.0) {
        return domain(format!("level = {level} outside (0, 1)"));
    }
    if *params.theta() <= 0.0 {
        return domain(format!(
            "Gaussian interval needs theta > 0 (got {}); use the exact Monte Carlo interval",
            params.theta()
        ));
    }
    if m == 0 {
        return Ok(CredibleInterval::degenerate(level, Method::Gaussian, None));
    }
    let ratios = RegimeRatios::from_sample(*params.theta(), sample.n(), sample.j(), m)?;
    let approx = GaussianApprox::new(*params.alpha(), &ratios, m);
    let z = normal_quantile(1.0 - (1.0 - level) / 2.0);
    let half = z * approx.variance.sqrt();
    let cap = m as f64;
    Ok(CredibleInterval::new(
        (approx.mean - half).clamp(0.0, cap),
        (approx.mean + half).clamp(0.0, cap),
        level,
        Method::Gaussian,
        None,
    ))
}
