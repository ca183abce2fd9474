use serde::{Deserialize, Serialize};

/// Counts over fixed, equal-width bins on `[lo, hi]`. Bins are half-open
/// except the last, which also takes `hi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    /// Values outside `[lo, hi]` or not finite.
    pub out_of_range: u64,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Self {
        assert!(hi > lo && bins > 0);
        Self {
            lo,
            hi,
            counts: vec![0; bins],
            out_of_range: 0,
        }
    }

    pub fn from_values(lo: f64, hi: f64, bins: usize, values: impl IntoIterator<Item = f64>) -> Self {
        let mut h = Self::new(lo, hi, bins);
        for v in values {
            h.add(v);
        }
        h
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn add(&mut self, value: f64) {
        if !value.is_finite() || value < self.lo || value > self.hi {
            self.out_of_range += 1;
            return;
        }
        let bins = self.counts.len();
        let index = (((value - self.lo) / self.width()) as usize).min(bins - 1);
        self.counts[index] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `(lower edge, upper edge, count)` per bin.
    pub fn bins(&self) -> impl Iterator<Item = (f64, f64, u64)> + '_ {
        let w = self.width();
        self.counts
            .iter()
            .enumerate()
            .map(move |(i, &c)| (self.lo + i as f64 * w, self.lo + (i + 1) as f64 * w, c))
    }
}
