use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name of the generator behind every seeded draw in the crate. Written into
/// output artifacts next to the seed.
pub const RNG_NAME: &str = "ChaCha8Rng";

/// Fixed measurement hyperparameters shared by all families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasurementConfig {
    /// Fraction of final-layer variance the subspace rank must explain.
    pub variance_threshold: f64,
    pub k_nrs: usize,
    pub anchors_max: usize,
    pub anchor_seed: u64,
    pub k_gfmi: usize,
    pub grid_points: usize,
    /// Lower percentile of the filtration grid, in [0, 100].
    pub grid_lo: f64,
    pub grid_hi: f64,
}

impl Default for MeasurementConfig {
    fn default() -> Self {
        Self {
            variance_threshold: 0.95,
            k_nrs: 20,
            anchors_max: 500,
            anchor_seed: 0,
            k_gfmi: 30,
            grid_points: 20,
            grid_lo: 5.0,
            grid_hi: 95.0,
        }
    }
}

impl MeasurementConfig {
    /// Checks the sample-size independent invariants.
    pub fn validate(&self) -> Result<()> {
        if !(self.variance_threshold > 0.0 && self.variance_threshold <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "variance_threshold {} not in (0, 1]",
                self.variance_threshold
            )));
        }
        if self.k_nrs == 0 || self.k_gfmi == 0 {
            return Err(Error::InvalidConfig("k_nrs and k_gfmi must be >= 1".into()));
        }
        if self.anchors_max == 0 {
            return Err(Error::InvalidConfig("anchors_max must be >= 1".into()));
        }
        if !(0.0 <= self.grid_lo && self.grid_lo < self.grid_hi && self.grid_hi <= 100.0) {
            return Err(Error::InvalidConfig(format!(
                "percentile grid [{}, {}] must satisfy 0 <= lo < hi <= 100",
                self.grid_lo, self.grid_hi
            )));
        }
        if self.grid_points < 2 {
            return Err(Error::InvalidConfig("grid_points must be >= 2".into()));
        }
        Ok(())
    }

    /// Checks the invariants that depend on the number of examples `n`.
    pub fn validate_for(&self, n: usize) -> Result<()> {
        self.validate()?;
        for k in [self.k_nrs, self.k_gfmi] {
            if k >= n {
                return Err(Error::KTooLarge { k, n });
            }
        }
        Ok(())
    }

    /// Evenly spaced percentile grid, both endpoints included.
    pub fn grid(&self) -> Vec<f64> {
        let last = (self.grid_points - 1) as f64;
        let step = (self.grid_hi - self.grid_lo) / last;
        (0..self.grid_points)
            .map(|j| {
                if j + 1 == self.grid_points {
                    self.grid_hi
                } else {
                    self.grid_lo + j as f64 * step
                }
            })
            .collect()
    }
}
