//! Exact non-negative dyadic rationals.
//!
//! Every mass in the construction is a finite sum of terms `2^-k`, so a
//! numerator over a power of two represents all of them without rounding.
//! The canonical form keeps the numerator odd (or the value zero with
//! exponent zero), which makes structural equality coincide with numeric
//! equality.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign};
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use thiserror::Error;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct DyadicMass {
    numerator: BigUint,
    exponent: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("malformed dyadic value {0:?}; expected `<numerator>/2^<exponent>`")]
pub struct ParseMassError(pub String);

impl DyadicMass {
    pub fn zero() -> Self {
        Self {
            numerator: BigUint::zero(),
            exponent: 0,
        }
    }

    pub fn one() -> Self {
        Self {
            numerator: BigUint::one(),
            exponent: 0,
        }
    }

    /// Exactly `2^-k`.
    pub fn pow2_neg(k: u64) -> Self {
        Self {
            numerator: BigUint::one(),
            exponent: k,
        }
    }

    /// Exactly `2^x` for any integer `x`.
    pub fn pow2(x: i64) -> Self {
        if x >= 0 {
            Self {
                numerator: BigUint::one() << (x as u64),
                exponent: 0,
            }
        } else {
            Self::pow2_neg(x.unsigned_abs())
        }
    }

    pub fn from_parts(numerator: BigUint, exponent: u64) -> Self {
        let mut m = Self {
            numerator,
            exponent,
        };
        m.normalize();
        m
    }

    pub fn from_integer(n: u64) -> Self {
        Self::from_parts(BigUint::from(n), 0)
    }

    pub fn numerator(&self) -> &BigUint {
        &self.numerator
    }

    pub fn exponent(&self) -> u64 {
        self.exponent
    }

    pub fn is_zero(&self) -> bool {
        self.numerator.is_zero()
    }

    fn normalize(&mut self) {
        if self.numerator.is_zero() {
            self.exponent = 0;
            return;
        }
        let tz = self.numerator.trailing_zeros().unwrap_or(0).min(self.exponent);
        if tz > 0 {
            self.numerator >>= tz;
            self.exponent -= tz;
        }
    }

    /// Numerators of `self` and `other` over the common denominator
    /// `2^max(exponents)`.
    fn aligned(&self, other: &Self) -> (BigUint, BigUint, u64) {
        let e = self.exponent.max(other.exponent);
        let a = &self.numerator << (e - self.exponent);
        let b = &other.numerator << (e - other.exponent);
        (a, b, e)
    }

    pub fn checked_sub(&self, other: &Self) -> Option<Self> {
        let (a, b, e) = self.aligned(other);
        if a < b {
            None
        } else {
            Some(Self::from_parts(a - b, e))
        }
    }

    /// Multiply by `2^k`.
    pub fn shl(&self, k: u64) -> Self {
        if k <= self.exponent {
            Self::from_parts(self.numerator.clone(), self.exponent - k)
        } else {
            Self::from_parts(&self.numerator << (k - self.exponent), 0)
        }
    }

    /// Divide by `2^k`.
    pub fn shr(&self, k: u64) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        Self {
            numerator: self.numerator.clone(),
            exponent: self.exponent + k,
        }
    }

    /// Difference `self - other` as a sign and magnitude.
    pub fn signed_diff(&self, other: &Self) -> (bool, Self) {
        match self.checked_sub(other) {
            Some(d) => (false, d),
            None => (true, other.checked_sub(self).expect("ordered")),
        }
    }
}

impl Default for DyadicMass {
    fn default() -> Self {
        Self::zero()
    }
}

impl Ord for DyadicMass {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b, _) = self.aligned(other);
        a.cmp(&b)
    }
}

impl PartialOrd for DyadicMass {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add<&DyadicMass> for &DyadicMass {
    type Output = DyadicMass;

    fn add(self, rhs: &DyadicMass) -> DyadicMass {
        let (a, b, e) = self.aligned(rhs);
        DyadicMass::from_parts(a + b, e)
    }
}

impl Add for DyadicMass {
    type Output = DyadicMass;

    fn add(self, rhs: DyadicMass) -> DyadicMass {
        &self + &rhs
    }
}

impl AddAssign<&DyadicMass> for DyadicMass {
    fn add_assign(&mut self, rhs: &DyadicMass) {
        if rhs.is_zero() {
            return;
        }
        if self.exponent >= rhs.exponent {
            self.numerator += &rhs.numerator << (self.exponent - rhs.exponent);
        } else {
            self.numerator <<= rhs.exponent - self.exponent;
            self.numerator += &rhs.numerator;
            self.exponent = rhs.exponent;
        }
        self.normalize();
    }
}

impl AddAssign for DyadicMass {
    fn add_assign(&mut self, rhs: DyadicMass) {
        *self += &rhs;
    }
}

impl Sum for DyadicMass {
    fn sum<I: Iterator<Item = DyadicMass>>(iter: I) -> Self {
        iter.fold(DyadicMass::zero(), |mut acc, m| {
            acc += &m;
            acc
        })
    }
}

impl<'a> Sum<&'a DyadicMass> for DyadicMass {
    fn sum<I: Iterator<Item = &'a DyadicMass>>(iter: I) -> Self {
        iter.fold(DyadicMass::zero(), |mut acc, m| {
            acc += m;
            acc
        })
    }
}

/// `<numerator>/2^<exponent>`, the form used in reports.
impl fmt::Display for DyadicMass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/2^{}", self.numerator, self.exponent)
    }
}

impl fmt::Debug for DyadicMass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DyadicMass({self})")
    }
}

impl FromStr for DyadicMass {
    type Err = ParseMassError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseMassError(s.to_string());
        let (num, exp) = s.split_once("/2^").ok_or_else(err)?;
        let numerator = num.parse::<BigUint>().map_err(|_| err())?;
        let exponent = exp.parse::<u64>().map_err(|_| err())?;
        Ok(Self::from_parts(numerator, exponent))
    }
}
