use super::table::{CountMinTable, IntervalMap};
use crate::error::{not_ready, param, Result};

/// Estimated empirical distribution over sketch intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct Eedf {
    estimates: Vec<u64>,
    n: u64,
    range: IntervalMap,
}

impl Eedf {
    pub fn from_table(table: &CountMinTable) -> Result<Self> {
        let range = *table
            .range()
            .ok_or_else(|| param("EEDF needs a sketch with a value range"))?;
        if table.n() == 0 {
            return Err(not_ready("sketch has no data"));
        }
        Ok(Self {
            estimates: table.estimates(),
            n: table.n(),
            range,
        })
    }

    /// Per-interval weights `a_k / n`; they may sum to more than 1.
    pub fn weights(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.estimates.iter().map(|&a| a as f64 / n).collect()
    }

    pub fn estimates(&self) -> &[u64] {
        &self.estimates
    }

    pub fn midpoints(&self) -> Vec<f64> {
        self.range.midpoints()
    }

    pub fn range(&self) -> &IntervalMap {
        &self.range
    }

    /// Mass of all intervals lying entirely at or below `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        let n = self.n as f64;
        let mut acc = 0u64;
        for (k, &a) in self.estimates.iter().enumerate() {
            if self.range.upper_edge(k) > x {
                break;
            }
            acc += a;
        }
        acc as f64 / n
    }

    /// Cumulative weights at each interval's right edge.
    pub fn cumulative(&self) -> Vec<f64> {
        let n = self.n as f64;
        let mut acc = 0u64;
        self.estimates
            .iter()
            .map(|&a| {
                acc += a;
                acc as f64 / n
            })
            .collect()
    }

    /// Weighted mean of interval midpoints with the raw weights.
    pub fn mean(&self) -> f64 {
        let n = self.n as f64;
        self.estimates
            .iter()
            .enumerate()
            .map(|(k, &a)| self.range.midpoint(k) * a as f64)
            .sum::<f64>()
            / n
    }

    /// Weighted median of the midpoints with normalized weights.
    pub fn median(&self) -> f64 {
        let q = median_index_counts(&self.estimates);
        median_value(q, &self.midpoints())
    }
}

/// Smallest zero-based `q` with at most half the mass strictly before and
/// strictly after it. Exact because it compares integer counts.
pub fn median_index_counts(counts: &[u64]) -> usize {
    let total: u64 = counts.iter().sum();
    let mut before = 0u64;
    for (q, &c) in counts.iter().enumerate() {
        let after = total - before - c;
        if 2 * before <= total && 2 * after <= total {
            return q;
        }
        before += c;
    }
    counts.len().saturating_sub(1)
}

/// Same rule for real weights, normalized by their sum.
pub fn median_index(weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut suffix = vec![0.0; weights.len() + 1];
    for i in (0..weights.len()).rev() {
        suffix[i] = suffix[i + 1] + weights[i];
    }
    let mut before = 0.0;
    for q in 0..weights.len() {
        if before / total <= 0.5 && suffix[q + 1] / total <= 0.5 {
            return q;
        }
        before += weights[q];
    }
    weights.len().saturating_sub(1)
}

/// `(m_{q-1} + m_q) / 2`, or the first midpoint when `q` is the first index.
pub fn median_value(q: usize, midpoints: &[f64]) -> f64 {
    if q == 0 {
        midpoints[0]
    } else {
        0.5 * (midpoints[q - 1] + midpoints[q])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketch::HashFamily;
    use proptest::prelude::*;

    fn identity_table(k: usize) -> CountMinTable {
        // One function mapping every interval to its own bucket: no collisions.
        let h = HashFamily::from_table(k, vec![(0..k).collect()]).unwrap();
        CountMinTable::with_range(h, IntervalMap::new(0.0, k as f64, k).unwrap()).unwrap()
    }

    #[test]
    fn single_interval_mass() {
        let mut t = identity_table(4);
        for _ in 0..5 {
            t.update(0.3).unwrap();
        }
        let e = Eedf::from_table(&t).unwrap();
        assert_eq!(e.weights(), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(e.mean(), 0.5);
        assert_eq!(e.median(), 0.5);
    }

    #[test]
    fn empty_sketch_not_ready() {
        assert!(Eedf::from_table(&identity_table(3)).is_err());
    }

    #[test]
    fn uniform_weights_pick_smallest_valid_index() {
        let w = [0.25; 4];
        assert_eq!(median_index(&w), 1);
        assert_eq!(median_index_counts(&[1, 1, 1, 1]), 1);
        let m = [0.5, 1.5, 2.5, 3.5];
        assert_eq!(median_value(1, &m), 1.0);
        assert_eq!(median_value(0, &m), 0.5);
    }

    #[test]
    fn cdf_steps_at_edges() {
        let mut t = identity_table(4);
        for y in [0.5, 1.5, 1.6, 3.9] {
            t.update(y).unwrap();
        }
        let e = Eedf::from_table(&t).unwrap();
        assert_eq!(e.cdf(0.99), 0.0);
        assert_eq!(e.cdf(1.0), 0.25);
        assert_eq!(e.cdf(2.0), 0.75);
        assert_eq!(e.cdf(4.0), 1.0);
        assert_eq!(e.cumulative(), vec![0.25, 0.75, 0.75, 1.0]);
    }

    fn brute_force_median(w: &[f64]) -> usize {
        let total: f64 = w.iter().sum();
        (0..w.len())
            .find(|&q| {
                let left: f64 = w[..q].iter().sum::<f64>() / total;
                let right: f64 = w[q + 1..].iter().sum::<f64>() / total;
                left <= 0.5 && right <= 0.5
            })
            .unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn median_matches_brute_force(w in prop::collection::vec(0.0f64..1.0, 1..30)) {
            prop_assume!(w.iter().sum::<f64>() > 0.0);
            prop_assert_eq!(median_index(&w), brute_force_median(&w));
        }

        #[test]
        fn integer_median_matches_brute_force(c in prop::collection::vec(0u64..50, 1..30)) {
            prop_assume!(c.iter().sum::<u64>() > 0);
            let w: Vec<f64> = c.iter().map(|&x| x as f64).collect();
            prop_assert_eq!(median_index_counts(&c), brute_force_median(&w));
        }

        #[test]
        fn eedf_overestimates_and_is_monotone(ys in prop::collection::vec(0.0f64..10.0, 1..300), seed in any::<u64>()) {
            let h = HashFamily::sample(2, 5, 40, seed).unwrap();
            let mut t = CountMinTable::with_range(h, IntervalMap::new(0.0, 10.0, 40).unwrap()).unwrap();
            for &y in &ys {
                t.update(y).unwrap();
            }
            let e = Eedf::from_table(&t).unwrap();
            prop_assert!(e.weights().iter().sum::<f64>() >= 1.0 - 1e-12);
            let c = e.cumulative();
            prop_assert!(c.windows(2).all(|p| p[0] <= p[1]));
            let mut last = 0.0;
            for i in 0..=100 {
                let f = e.cdf(i as f64 * 0.1);
                prop_assert!(f >= last);
                last = f;
            }
        }
    }
}
