//! Summary statistics for timing samples.

use statrs::statistics::{Data, Distribution, Max, Median, Min};

/// Column order of the statistics table.
pub const COLUMNS: [&str; 6] = ["mean", "median", "variance", "stddev", "min", "max"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    /// Sample variance (divisor `n − 1`).
    pub variance: f64,
    pub stddev: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let d = Data::new(samples.to_vec());
        let variance = if samples.len() > 1 { d.variance()? } else { 0.0 };
        Some(Self {
            mean: d.mean()?,
            median: d.median(),
            variance,
            stddev: variance.sqrt(),
            min: d.min(),
            max: d.max(),
        })
    }

    pub fn values(&self) -> [f64; 6] {
        [self.mean, self.median, self.variance, self.stddev, self.min, self.max]
    }
}
