//! Real numbers stored as `sign * exp(ln_abs)`, for tails far below `f64::MIN_POSITIVE`.

use std::ops::{Mul, Neg};

use serde::Serialize;

/// A signed real number in logarithmic magnitude form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignedLog {
    /// `-1`, `0` or `1`.
    pub sign: i8,
    /// Natural log of the magnitude; `-inf` for zero.
    pub ln_abs: f64,
}

impl SignedLog {
    pub const ZERO: SignedLog = SignedLog { sign: 0, ln_abs: f64::NEG_INFINITY };

    pub fn new(sign: i8, ln_abs: f64) -> Self {
        if sign == 0 || ln_abs == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            Self { sign: sign.signum(), ln_abs }
        }
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            Self::new(if x > 0.0 { 1 } else { -1 }, x.abs().ln())
        }
    }

    /// Nearest `f64`; underflows to zero and overflows to infinity.
    pub fn to_f64(self) -> f64 {
        if self.sign == 0 {
            0.0
        } else {
            f64::from(self.sign) * self.ln_abs.exp()
        }
    }

    pub fn is_zero(self) -> bool {
        self.sign == 0
    }

    /// Multiplies by `exp(t)`.
    pub fn scale_exp(self, t: f64) -> Self {
        Self::new(self.sign, self.ln_abs + t)
    }

    /// Sum with correct sign under cancellation.
    pub fn add(self, other: Self) -> Self {
        if self.is_zero() {
            return other;
        }
        if other.is_zero() {
            return self;
        }
        let (big, small) = if self.ln_abs >= other.ln_abs { (self, other) } else { (other, self) };
        let ratio = (small.ln_abs - big.ln_abs).exp();
        if big.sign == small.sign {
            Self::new(big.sign, big.ln_abs + ratio.ln_1p())
        } else if ratio == 1.0 {
            Self::ZERO
        } else {
            Self::new(big.sign, big.ln_abs + (-ratio).ln_1p())
        }
    }

    pub fn sub(self, other: Self) -> Self {
        self.add(-other)
    }
}

impl Mul for SignedLog {
    type Output = SignedLog;

    fn mul(self, rhs: SignedLog) -> SignedLog {
        SignedLog::new(self.sign * rhs.sign, self.ln_abs + rhs.ln_abs)
    }
}

impl Neg for SignedLog {
    type Output = SignedLog;

    fn neg(self) -> SignedLog {
        SignedLog { sign: -self.sign, ln_abs: self.ln_abs }
    }
}
