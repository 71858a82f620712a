//! Sign + log-magnitude scalars for overflow-safe capital arithmetic.
//!
//! Proof-grade constants put capital processes at magnitudes like
//! `exp(kappa * S_n - kappa^2 C / 2)` where the exponent itself can reach
//! 1e4 and beyond, so every capital-bearing quantity in the engine is a
//! [`SignedLogValue`]: a sign in {-1, 0, +1} and the natural log of the
//! magnitude. Addition is sign-aware log-sum-exp.

use serde::{Deserialize, Serialize};

/// A real number stored as `sign * exp(logmag)`.
///
/// Exact zero is canonical: `sign == 0` and `logmag == -inf`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SignedLogValue {
    sign: i8,
    logmag: f64,
}

impl SignedLogValue {
    pub const ZERO: SignedLogValue = SignedLogValue {
        sign: 0,
        logmag: f64::NEG_INFINITY,
    };

    pub const ONE: SignedLogValue = SignedLogValue {
        sign: 1,
        logmag: 0.0,
    };

    pub fn from_f64(v: f64) -> Self {
        if v == 0.0 {
            Self::ZERO
        } else if v > 0.0 {
            Self {
                sign: 1,
                logmag: v.ln(),
            }
        } else {
            Self {
                sign: -1,
                logmag: (-v).ln(),
            }
        }
    }

    /// Builds from an explicit sign and log-magnitude.
    pub fn from_parts(sign: i8, logmag: f64) -> Self {
        if sign == 0 || logmag == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            Self {
                sign: sign.signum(),
                logmag,
            }
        }
    }

    /// Positive value from its natural log (log may be any f64, e.g. 1e6).
    pub fn from_ln(logmag: f64) -> Self {
        Self::from_parts(1, logmag)
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    /// Natural log of |value|; `-inf` for zero.
    pub fn logmag(&self) -> f64 {
        self.logmag
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    pub fn is_positive(&self) -> bool {
        self.sign > 0
    }

    pub fn is_negative(&self) -> bool {
        self.sign < 0
    }

    /// Saturating conversion; magnitudes beyond f64 range become +/-inf.
    pub fn to_f64(&self) -> f64 {
        match self.sign {
            0 => 0.0,
            1 => self.logmag.exp(),
            _ => -self.logmag.exp(),
        }
    }

    pub fn neg(&self) -> Self {
        Self {
            sign: -self.sign,
            logmag: self.logmag,
        }
    }

    pub fn abs(&self) -> Self {
        Self {
            sign: self.sign.abs(),
            logmag: self.logmag,
        }
    }

    pub fn add(&self, other: Self) -> Self {
        if self.sign == 0 {
            return other;
        }
        if other.sign == 0 {
            return *self;
        }
        let (hi, lo) = if self.logmag >= other.logmag {
            (self, &other)
        } else {
            (&other, self)
        };
        let d = lo.logmag - hi.logmag; // <= 0
        if self.sign == other.sign {
            Self {
                sign: self.sign,
                logmag: hi.logmag + d.exp().ln_1p(),
            }
        } else if self.logmag == other.logmag {
            Self::ZERO
        } else {
            // |hi| > |lo|, opposite signs: magnitude hi * (1 - exp(d))
            Self {
                sign: hi.sign,
                logmag: hi.logmag + (-d.exp()).ln_1p(),
            }
        }
    }

    pub fn sub(&self, other: Self) -> Self {
        self.add(other.neg())
    }

    pub fn mul(&self, other: Self) -> Self {
        if self.sign == 0 || other.sign == 0 {
            return Self::ZERO;
        }
        Self {
            sign: self.sign * other.sign,
            logmag: self.logmag + other.logmag,
        }
    }

    /// Multiplies by a plain f64 factor.
    pub fn scale(&self, c: f64) -> Self {
        self.mul(Self::from_f64(c))
    }

    /// Multiplies the magnitude by `exp(log_factor)` keeping the sign.
    pub fn mul_exp(&self, log_factor: f64) -> Self {
        if self.sign == 0 {
            return Self::ZERO;
        }
        Self {
            sign: self.sign,
            logmag: self.logmag + log_factor,
        }
    }

    /// Divides by `exp(log_divisor)`; an infinite divisor yields zero.
    pub fn div_exp(&self, log_divisor: f64) -> Self {
        if self.sign == 0 {
            return Self::ZERO;
        }
        if log_divisor == f64::INFINITY {
            return Self::ZERO;
        }
        Self {
            sign: self.sign,
            logmag: self.logmag - log_divisor,
        }
    }
}

impl PartialEq for SignedLogValue {
    fn eq(&self, other: &Self) -> bool {
        self.sign == other.sign && (self.sign == 0 || self.logmag == other.logmag)
    }
}

impl PartialOrd for SignedLogValue {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        use std::cmp::Ordering::*;
        if self.sign != other.sign {
            return self.sign.partial_cmp(&other.sign);
        }
        match self.sign {
            0 => Some(Equal),
            1 => self.logmag.partial_cmp(&other.logmag),
            _ => other.logmag.partial_cmp(&self.logmag),
        }
    }
}
