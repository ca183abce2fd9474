//! Exact non-negative rationals for configuration values.
//!
//! Thresholds and rates are compared against integer sums, so they are kept
//! as reduced fractions and never as floats. In configuration files they are
//! written as decimal strings (`"1.3"`) or ratios (`"3/100"`).

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fraction(Ratio<u64>);

impl Fraction {
    pub fn new(numer: u64, denom: u64) -> Self {
        assert!(denom != 0, "fraction with zero denominator");
        Self(Ratio::new(numer, denom))
    }

    pub fn integer(value: u64) -> Self {
        Self(Ratio::from_integer(value))
    }

    pub fn numer(&self) -> u64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> u64 {
        *self.0.denom()
    }

    pub fn as_ratio(&self) -> Ratio<u64> {
        self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }

    /// `floor(value * self)`, exact.
    pub fn floor_mul(&self, value: u64) -> u64 {
        let product = value as u128 * self.numer() as u128 / self.denom() as u128;
        u64::try_from(product).expect("floor_mul overflow")
    }

    /// `ceil(value * self)`, exact.
    pub fn ceil_mul(&self, value: u64) -> u64 {
        let numer = value as u128 * self.numer() as u128;
        let denom = self.denom() as u128;
        u64::try_from(numer.div_ceil(denom)).expect("ceil_mul overflow")
    }

    /// Compares `sum / count` against this fraction without division.
    pub fn cmp_mean(&self, sum: u64, count: u64) -> Ordering {
        assert!(count > 0);
        let lhs = sum as u128 * self.denom() as u128;
        let rhs = self.numer() as u128 * count as u128;
        lhs.cmp(&rhs)
    }
}

impl PartialOrd for Fraction {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Fraction {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.cmp(&other.0)
    }
}

impl From<Ratio<u64>> for Fraction {
    fn from(value: Ratio<u64>) -> Self {
        Self(value)
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (numer, denom) = (self.numer(), self.denom());
        if denom == 1 {
            return write!(f, "{numer}");
        }
        // Terminating decimals print as decimals, everything else as a ratio.
        let mut rest = denom;
        let mut twos = 0u32;
        let mut fives = 0u32;
        while rest % 2 == 0 {
            rest /= 2;
            twos += 1;
        }
        while rest % 5 == 0 {
            rest /= 5;
            fives += 1;
        }
        let digits = twos.max(fives);
        if rest != 1 || digits > 18 {
            return write!(f, "{numer}/{denom}");
        }
        let scale = 10u128.pow(digits);
        let scaled = numer as u128 * scale / denom as u128;
        let whole = scaled / scale;
        let frac = scaled % scale;
        write!(f, "{whole}.{frac:0width$}", width = digits as usize)
    }
}

impl FromStr for Fraction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || format!("invalid fraction `{s}`");
        if let Some((numer, denom)) = s.split_once('/') {
            let numer: u64 = numer.trim().parse().map_err(|_| bad())?;
            let denom: u64 = denom.trim().parse().map_err(|_| bad())?;
            if denom == 0 {
                return Err(bad());
            }
            return Ok(Self::new(numer, denom));
        }
        if let Some((whole, frac)) = s.split_once('.') {
            if frac.is_empty() || frac.len() > 18 || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            let whole: u64 = if whole.is_empty() {
                0
            } else {
                whole.parse().map_err(|_| bad())?
            };
            let denom = 10u64.pow(frac.len() as u32);
            let frac: u64 = frac.parse().map_err(|_| bad())?;
            let numer = whole
                .checked_mul(denom)
                .and_then(|w| w.checked_add(frac))
                .ok_or_else(bad)?;
            return Ok(Self::new(numer, denom));
        }
        s.parse().map(Self::integer).map_err(|_| bad())
    }
}

impl Serialize for Fraction {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Fraction {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_decimals_and_ratios() {
        assert_eq!("1.3".parse::<Fraction>().unwrap(), Fraction::new(13, 10));
        assert_eq!("3/100".parse::<Fraction>().unwrap(), Fraction::new(3, 100));
        assert_eq!("4".parse::<Fraction>().unwrap(), Fraction::integer(4));
        assert_eq!(".5".parse::<Fraction>().unwrap(), Fraction::new(1, 2));
        for bad in ["", "1.", "a", "1/0", "-1", "1.2.3"] {
            assert!(bad.parse::<Fraction>().is_err(), "{bad}");
        }
    }

    #[test]
    fn display() {
        assert_eq!(Fraction::new(13, 10).to_string(), "1.3");
        assert_eq!(Fraction::new(1, 10).to_string(), "0.1");
        assert_eq!(Fraction::new(3, 100).to_string(), "0.03");
        assert_eq!(Fraction::new(1, 3).to_string(), "1/3");
        assert_eq!(Fraction::new(5, 2).to_string(), "2.5");
    }

    #[test]
    fn floor_and_ceil() {
        let tax = Fraction::new(1, 10);
        assert_eq!(tax.floor_mul(100), 10);
        assert_eq!(tax.floor_mul(109), 10);
        let share = Fraction::new(3, 100);
        assert_eq!(share.ceil_mul(30), 1);
        assert_eq!(share.ceil_mul(100), 3);
        assert_eq!(share.ceil_mul(101), 4);
    }

    #[test]
    fn mean_comparison_at_edge() {
        let down = Fraction::new(13, 10);
        assert_eq!(down.cmp_mean(13, 10), Ordering::Equal);
        assert_eq!(down.cmp_mean(14, 10), Ordering::Greater);
    }

    proptest! {
        #[test]
        fn display_round_trips(numer in 0u64..1_000_000, denom in 1u64..10_000) {
            let f = Fraction::new(numer, denom);
            prop_assert_eq!(f.to_string().parse::<Fraction>().unwrap(), f);
        }
    }
}
