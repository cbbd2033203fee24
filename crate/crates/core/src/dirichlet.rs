//! Dirichlet-process posterior predictive point predictor with a discrete
//! uniform base measure over the observed range.

use std::collections::BTreeMap;

use crate::error::{not_ready, param, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DppState {
    mass: f64,
    grid: Option<f64>,
    counts: BTreeMap<i64, u64>,
    n: u64,
    sum: f64,
    f0_min: f64,
    f0_max: f64,
}

impl DppState {
    /// `mass` is the concentration M; `grid`, when set, buckets values to
    /// the nearest multiple of the grid step before counting.
    pub fn new(mass: f64, grid: Option<f64>) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(param("DPP mass must be positive"));
        }
        if let Some(g) = grid {
            if !(g > 0.0 && g.is_finite()) {
                return Err(param("DPP rounding grid must be positive"));
            }
        }
        Ok(Self {
            mass,
            grid,
            counts: BTreeMap::new(),
            n: 0,
            sum: 0.0,
            f0_min: f64::INFINITY,
            f0_max: f64::NEG_INFINITY,
        })
    }

    fn bucket(&self, y: f64) -> (i64, f64) {
        match self.grid {
            Some(g) => {
                let k = (y / g).round() as i64;
                (k, k as f64 * g)
            }
            None => {
                let y = if y == 0.0 { 0.0 } else { y };
                (y.to_bits() as i64, y)
            }
        }
    }

    pub fn update(&mut self, y: f64) {
        let (key, value) = self.bucket(y);
        *self.counts.entry(key).or_insert(0) += 1;
        self.n += 1;
        self.sum += value;
        self.f0_min = self.f0_min.min(value);
        self.f0_max = self.f0_max.max(value);
    }

    /// Distinct atoms with their multiplicities, in key order.
    pub fn atoms(&self) -> Vec<(f64, u64)> {
        self.counts
            .iter()
            .map(|(&k, &c)| {
                let v = match self.grid {
                    Some(g) => k as f64 * g,
                    None => f64::from_bits(k as u64),
                };
                (v, c)
            })
            .collect()
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn range(&self) -> (f64, f64) {
        (self.f0_min, self.f0_max)
    }

    pub fn predict(&self) -> Result<f64> {
        if self.n == 0 {
            return Err(not_ready("DPP predictor has no data"));
        }
        let n = self.n as f64;
        let base_median = 0.5 * (self.f0_min + self.f0_max);
        Ok(self.sum / (self.mass + n) + self.mass / (self.mass + n) * base_median)
    }
}
