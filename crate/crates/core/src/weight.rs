//! Fixed-point link weights.
//!
//! Weights are monetary flows per year, stored as integer hundredths so that
//! swap arithmetic (splits, merges, strength sums) is exact. Edge-list files
//! serialize weights as decimals with two fractional digits; parsing rejects
//! anything finer.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A non-negative monetary weight in hundredths of a unit.
#[derive(
    Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Weight(u64);

impl Weight {
    pub const ZERO: Weight = Weight(0);
    /// Weight of one unit; every link in an unweighted network carries this.
    pub const UNIT: Weight = Weight(100);

    pub const fn from_hundredths(h: u64) -> Weight {
        Weight(h)
    }

    pub const fn hundredths(self) -> u64 {
        self.0
    }

    /// Whole monetary units, converting through f64 (display, thresholds).
    pub fn to_f64(self) -> f64 {
        self.0 as f64 / 100.0
    }

    /// Builds a weight from a monetary amount, rounding to the nearest
    /// hundredth. Rejects negatives and non-finite values.
    pub fn from_f64(units: f64) -> Result<Weight> {
        if !units.is_finite() || units < 0.0 {
            return Err(Error::Config(format!("invalid weight {units}")));
        }
        let h = (units * 100.0).round();
        if h > u64::MAX as f64 {
            return Err(Error::Config(format!("weight {units} out of range")));
        }
        Ok(Weight(h as u64))
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn checked_add(self, rhs: Weight) -> Option<Weight> {
        self.0.checked_add(rhs.0).map(Weight)
    }

    pub fn checked_sub(self, rhs: Weight) -> Option<Weight> {
        self.0.checked_sub(rhs.0).map(Weight)
    }

    pub fn abs_diff(self, rhs: Weight) -> Weight {
        Weight(self.0.abs_diff(rhs.0))
    }

    /// Parses a decimal like `12`, `12.5` or `12.34`. More than two
    /// fractional digits or any sign is an error.
    pub fn parse(s: &str) -> std::result::Result<Weight, String> {
        let s = s.trim();
        if s.is_empty() {
            return Err("empty weight".into());
        }
        let (int_part, frac_part) = match s.split_once('.') {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        if frac_part.len() > 2 {
            return Err(format!("weight '{s}' has more than 2 decimal places"));
        }
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(format!("malformed weight '{s}'"));
        }
        let digits_ok = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
        if !digits_ok(int_part) || !digits_ok(frac_part) {
            return Err(format!("malformed weight '{s}'"));
        }
        let int: u64 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| format!("weight '{s}' out of range"))?
        };
        let frac: u64 = match frac_part.len() {
            0 => 0,
            1 => frac_part.parse::<u64>().unwrap() * 10,
            _ => frac_part.parse::<u64>().unwrap(),
        };
        int.checked_mul(100)
            .and_then(|v| v.checked_add(frac))
            .map(Weight)
            .ok_or_else(|| format!("weight '{s}' out of range"))
    }
}

impl fmt::Display for Weight {
    /// Fixed two-decimal rendering, e.g. `3000.00`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02}", self.0 / 100, self.0 % 100)
    }
}

impl fmt::Debug for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Weight({self})")
    }
}

impl std::ops::Add for Weight {
    type Output = Weight;
    fn add(self, rhs: Weight) -> Weight {
        Weight(self.0.checked_add(rhs.0).expect("weight overflow"))
    }
}

impl std::ops::AddAssign for Weight {
    fn add_assign(&mut self, rhs: Weight) {
        *self = *self + rhs;
    }
}

impl std::ops::Sub for Weight {
    type Output = Weight;
    fn sub(self, rhs: Weight) -> Weight {
        Weight(self.0.checked_sub(rhs.0).expect("weight underflow"))
    }
}

impl std::ops::SubAssign for Weight {
    fn sub_assign(&mut self, rhs: Weight) {
        *self = *self - rhs;
    }
}

impl std::iter::Sum for Weight {
    fn sum<I: Iterator<Item = Weight>>(iter: I) -> Weight {
        iter.fold(Weight::ZERO, |a, b| a + b)
    }
}
