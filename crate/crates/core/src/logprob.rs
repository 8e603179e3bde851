//! Natural-log probabilities.
//!
//! Every probability in the crate is carried as its natural logarithm. A
//! probability of zero is `-inf`; IEEE arithmetic propagates it through sums
//! (products of probabilities) and maxima.

use std::fmt;
use std::ops::{Add, Sub};

/// A probability stored as its natural logarithm.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct LogProb(pub f64);

impl LogProb {
    /// Probability one.
    pub const ONE: LogProb = LogProb(0.0);
    /// Probability zero.
    pub const ZERO: LogProb = LogProb(f64::NEG_INFINITY);

    pub fn from_prob(p: f64) -> Self {
        LogProb(p.ln())
    }

    pub fn ln(self) -> f64 {
        self.0
    }

    pub fn prob(self) -> f64 {
        self.0.exp()
    }

    /// Base-2 logarithm.
    pub fn log2(self) -> f64 {
        self.0 / std::f64::consts::LN_2
    }

    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    /// Log of the sum of the two probabilities.
    pub fn log_add(self, other: LogProb) -> LogProb {
        LogProb(log_add_exp(self.0, other.0))
    }
}

impl Add for LogProb {
    type Output = LogProb;

    /// Product of probabilities.
    fn add(self, rhs: LogProb) -> LogProb {
        LogProb(self.0 + rhs.0)
    }
}

impl Sub for LogProb {
    type Output = LogProb;

    /// Ratio of probabilities.
    fn sub(self, rhs: LogProb) -> LogProb {
        LogProb(self.0 - rhs.0)
    }
}

impl fmt::Display for LogProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// `ln(e^a + e^b)` without overflow or underflow.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if hi == f64::INFINITY {
        return f64::INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(sum_i e^{x_i})`; `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}
