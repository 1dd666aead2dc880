use std::cmp::Ordering;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// A real number stored as `sign * exp(log_abs)`.
///
/// Used for generalized factorial coefficients and Stirling numbers, whose
/// magnitudes overflow `f64` long before the pmf itself becomes tiny.
/// `sign == 0` is exact zero and `log_abs` is then ignored.
#[derive(Debug, Clone, Copy)]
pub struct SignedLog {
    sign: i8,
    log_abs: f64,
}

impl SignedLog {
    pub const ZERO: SignedLog = SignedLog {
        sign: 0,
        log_abs: f64::NEG_INFINITY,
    };
    pub const ONE: SignedLog = SignedLog {
        sign: 1,
        log_abs: 0.0,
    };

    pub fn new(sign: i8, log_abs: f64) -> Self {
        if sign == 0 || log_abs == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            SignedLog {
                sign: sign.signum(),
                log_abs,
            }
        }
    }

    /// Positive value `exp(log_abs)`.
    pub fn from_ln(log_abs: f64) -> Self {
        Self::new(1, log_abs)
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            Self::new(if x > 0.0 { 1 } else { -1 }, x.abs().ln())
        }
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn log_abs(&self) -> f64 {
        self.log_abs
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    pub fn to_f64(&self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => f64::from(s) * self.log_abs.exp(),
        }
    }

    /// Relative distance `|x - y| / max(|x|, |y|)`, computed without leaving log space.
    pub fn rel_diff(&self, other: &SignedLog) -> f64 {
        if self.is_zero() && other.is_zero() {
            return 0.0;
        }
        let diff = *self - *other;
        if diff.is_zero() {
            return 0.0;
        }
        let scale = self.log_abs.max(other.log_abs);
        (diff.log_abs - scale).exp()
    }
}

impl PartialEq for SignedLog {
    fn eq(&self, other: &Self) -> bool {
        self.sign == other.sign && (self.sign == 0 || self.log_abs == other.log_abs)
    }
}

impl PartialOrd for SignedLog {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.sign.cmp(&other.sign) {
            Ordering::Equal => match self.sign {
                0 => Some(Ordering::Equal),
                1 => self.log_abs.partial_cmp(&other.log_abs),
                _ => other.log_abs.partial_cmp(&self.log_abs),
            },
            ord => Some(ord),
        }
    }
}

impl Neg for SignedLog {
    type Output = SignedLog;
    fn neg(self) -> SignedLog {
        SignedLog {
            sign: -self.sign,
            log_abs: self.log_abs,
        }
    }
}

impl Mul for SignedLog {
    type Output = SignedLog;
    fn mul(self, rhs: SignedLog) -> SignedLog {
        SignedLog::new(self.sign * rhs.sign, self.log_abs + rhs.log_abs)
    }
}

impl Div for SignedLog {
    type Output = SignedLog;
    fn div(self, rhs: SignedLog) -> SignedLog {
        assert!(!rhs.is_zero(), "SignedLog division by zero");
        SignedLog::new(self.sign * rhs.sign, self.log_abs - rhs.log_abs)
    }
}

impl Add for SignedLog {
    type Output = SignedLog;
    fn add(self, rhs: SignedLog) -> SignedLog {
        if self.is_zero() {
            return rhs;
        }
        if rhs.is_zero() {
            return self;
        }
        let (big, small) = if self.log_abs >= rhs.log_abs {
            (self, rhs)
        } else {
            (rhs, self)
        };
        let t = (small.log_abs - big.log_abs).exp();
        if big.sign == small.sign {
            SignedLog::new(big.sign, big.log_abs + t.ln_1p())
        } else if t == 1.0 {
            SignedLog::ZERO
        } else {
            SignedLog::new(big.sign, big.log_abs + (-t).ln_1p())
        }
    }
}

impl Sub for SignedLog {
    type Output = SignedLog;
    fn sub(self, rhs: SignedLog) -> SignedLog {
        self + (-rhs)
    }
}

impl std::iter::Sum for SignedLog {
    fn sum<I: Iterator<Item = SignedLog>>(iter: I) -> SignedLog {
        iter.fold(SignedLog::ZERO, |acc, x| acc + x)
    }
}
