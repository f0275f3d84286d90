use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A non-negative rational `num / den` used for thresholds and count ratios.
///
/// Thresholds are parsed from their decimal text so that `0.8` means exactly
/// four fifths; comparisons against counts are done in integers.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 {
            return Err(Error::InvalidInput("ratio with zero denominator".into()));
        }
        Ok(Ratio { num, den })
    }

    /// Parses a plain decimal such as `0.8`, `1`, or `.125`.
    pub fn from_decimal(text: &str) -> Result<Self> {
        let t = text.trim();
        let bad = || Error::Config(format!("not a non-negative decimal: {text:?}"));
        let (int_part, frac_part) = match t.split_once('.') {
            Some((i, f)) => (i, f),
            None => (t, ""),
        };
        if (int_part.is_empty() && frac_part.is_empty())
            || !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
            || frac_part.len() > 18
        {
            return Err(bad());
        }
        let den = 10u64.pow(frac_part.len() as u32);
        let int: u64 = if int_part.is_empty() { 0 } else { int_part.parse().map_err(|_| bad())? };
        let frac: u64 = if frac_part.is_empty() { 0 } else { frac_part.parse().map_err(|_| bad())? };
        let num = int
            .checked_mul(den)
            .and_then(|x| x.checked_add(frac))
            .ok_or_else(bad)?;
        Ok(Ratio { num, den }.reduced())
    }

    /// Exact value of the shortest decimal that round-trips to `x`.
    pub fn from_f64(x: f64) -> Result<Self> {
        if !x.is_finite() || x < 0.0 {
            return Err(Error::Config(format!("invalid threshold {x}")));
        }
        let s = format!("{x}");
        if s.contains('e') {
            return Err(Error::Config(format!("threshold {x} needs too many digits")));
        }
        Self::from_decimal(&s)
    }

    fn reduced(self) -> Self {
        let g = gcd(self.num, self.den).max(1);
        Ratio {
            num: self.num / g,
            den: self.den / g,
        }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `count / total >= self`, evaluated in integers.
    pub fn le_fraction(self, count: u64, total: u64) -> bool {
        u128::from(count) * u128::from(self.den) >= u128::from(self.num) * u128::from(total)
    }

    /// `count / total > self`, evaluated in integers.
    pub fn lt_fraction(self, count: u64, total: u64) -> bool {
        u128::from(count) * u128::from(self.den) > u128::from(self.num) * u128::from(total)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl PartialEq for Ratio {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ratio {}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ratio {
    fn cmp(&self, other: &Self) -> Ordering {
        (u128::from(self.num) * u128::from(other.den)).cmp(&(u128::from(other.num) * u128::from(self.den)))
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_parsing_is_exact() {
        let r = Ratio::from_decimal("0.8").unwrap();
        assert_eq!((r.num, r.den), (4, 5));
        assert!(r.le_fraction(4, 5));
        assert!(!r.lt_fraction(4, 5));
        assert!(!r.le_fraction(79, 99));
        assert_eq!(Ratio::from_f64(0.1).unwrap(), Ratio::new(1, 10).unwrap());
        assert_eq!(Ratio::from_decimal("1").unwrap(), Ratio::new(1, 1).unwrap());
        assert!(Ratio::from_decimal("-0.1").is_err());
        assert!(Ratio::from_decimal("abc").is_err());
        assert!(Ratio::from_decimal(".").is_err());
    }

    #[test]
    fn ordering_is_rational() {
        assert_eq!(Ratio::new(2, 6).unwrap(), Ratio::new(1, 3).unwrap());
        assert!(Ratio::new(1, 3).unwrap() < Ratio::new(34, 100).unwrap());
    }
}
