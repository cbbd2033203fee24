//! Fixed-size representative subset maintained by sequential K-means.

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepSet {
    capacity: usize,
    centers: Vec<f64>,
    counts: Vec<u64>,
}

impl RepSet {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(param("representative set size must be positive"));
        }
        Ok(Self {
            capacity,
            centers: Vec::with_capacity(capacity),
            counts: Vec::with_capacity(capacity),
        })
    }

    /// Fills empty slots with distinct values; afterwards moves the nearest
    /// center (lowest slot on ties) toward `y`.
    pub fn update(&mut self, y: f64) {
        if !self.is_initialized() {
            if !self.centers.contains(&y) {
                self.centers.push(y);
                self.counts.push(1);
            }
            return;
        }
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (i, &c) in self.centers.iter().enumerate() {
            let d = (y - c).abs();
            if d < best_dist {
                best_dist = d;
                best = i;
            }
        }
        let count = self.counts[best];
        self.centers[best] += (y - self.centers[best]) / (count + 1) as f64;
        self.counts[best] = count + 1;
    }

    pub fn is_initialized(&self) -> bool {
        self.centers.len() == self.capacity
    }

    /// Centers in slot order.
    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }
}
