//! Conformal prediction intervals over a candidate grid.
//!
//! Scores are nonconformities: larger means the point fits the rest of the
//! sample worse. A candidate `c` for the next value is kept when the share of
//! augmented-sample scores at least as large as the candidate's own reaches
//! the level `alpha`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{not_ready, param, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ConformityMeasure {
    /// Distance from each point to the mean of the others.
    Dta,
    /// Distance from each point to the mean of the whole augmented sample.
    DtaStreaming,
    /// Negative log posterior predictive density under a normal model with
    /// conjugate priors.
    BayesPosterior { mu: f64, tau2: f64, a: f64, b: f64 },
}

impl ConformityMeasure {
    pub fn validate(&self) -> Result<()> {
        if let ConformityMeasure::BayesPosterior { mu, tau2, a, b } = *self {
            if !mu.is_finite() || !(tau2 > 0.0 && a > 0.0 && b > 0.0) {
                return Err(param("Bayes conformity needs finite mu and positive tau2, a, b"));
            }
        }
        Ok(())
    }
}

/// Posterior predictive of a normal model with conjugate priors, summarized
/// by the count, sum and sum of squares of the conditioning set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalPosterior {
    pub location: f64,
    pub scale2: f64,
    pub dof: f64,
}

impl NormalPosterior {
    pub fn from_moments(mu: f64, tau2: f64, a: f64, b: f64, m: usize, sum: f64, sum_sq: f64) -> Self {
        let t2 = 1.0 / (1.0 / tau2 + m as f64);
        let loc = (mu / tau2 + sum) * t2;
        let a_s = a + m as f64;
        let b_s = b + sum_sq + mu * mu / tau2 - loc * loc / t2;
        Self {
            location: loc,
            scale2: b_s / a_s * (1.0 + t2),
            dof: 2.0 * a_s,
        }
    }

    pub fn ln_density(&self, x: f64) -> f64 {
        let nu = self.dof;
        let z2 = (x - self.location).powi(2) / self.scale2;
        ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * std::f64::consts::PI).ln()
            - 0.5 * self.scale2.ln()
            - 0.5 * (nu + 1.0) * (z2 / nu).ln_1p()
    }
}

/// Nonconformity of `y_i` against `deleted_set` (the sample without `y_i`).
pub fn conformity_score(measure: &ConformityMeasure, deleted_set: &[f64], y_i: f64) -> Result<f64> {
    if deleted_set.is_empty() {
        return Err(not_ready("conformity needs a nonempty comparison set"));
    }
    let m = deleted_set.len();
    let sum: f64 = deleted_set.iter().sum();
    Ok(match *measure {
        ConformityMeasure::Dta => (sum / m as f64 - y_i).abs(),
        ConformityMeasure::DtaStreaming => ((sum + y_i) / (m + 1) as f64 - y_i).abs(),
        ConformityMeasure::BayesPosterior { mu, tau2, a, b } => {
            let sum_sq: f64 = deleted_set.iter().map(|v| v * v).sum();
            -NormalPosterior::from_moments(mu, tau2, a, b, m, sum, sum_sq).ln_density(y_i)
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConformalResult {
    pub level: f64,
    pub interval: (f64, f64),
    pub point: f64,
    /// False when some grid candidate inside the hull was rejected.
    pub contiguous: bool,
    pub included: usize,
}

/// `points` evenly spaced candidates over `[min - R, max + R]`, `R` the range.
pub fn default_grid(y: &[f64], points: usize) -> Vec<f64> {
    let min = y.iter().copied().fold(f64::INFINITY, f64::min);
    let max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let r = max - min;
    let (lo, hi) = (min - r, max + r);
    if points <= 1 || r == 0.0 {
        return vec![0.5 * (lo + hi)];
    }
    let step = (hi - lo) / (points - 1) as f64;
    (0..points)
        .map(|k| if k + 1 == points { hi } else { lo + k as f64 * step })
        .collect()
}

/// Precomputed sums for scoring many candidates against one sample.
struct Scorer<'a> {
    y: &'a [f64],
    sum: f64,
    sum_sq: f64,
    measure: ConformityMeasure,
    bayes: Option<BayesConst>,
}

#[derive(Clone, Copy)]
struct BayesConst {
    inv_tau2_mu: f64,
    mu2_tau2: f64,
    t2: f64,
    a_s: f64,
    b: f64,
    nu: f64,
}

impl<'a> Scorer<'a> {
    fn new(y: &'a [f64], measure: ConformityMeasure) -> Self {
        let n = y.len();
        let bayes = match measure {
            ConformityMeasure::BayesPosterior { mu, tau2, a, b } => {
                let a_s = a + n as f64;
                Some(BayesConst {
                    inv_tau2_mu: mu / tau2,
                    mu2_tau2: mu * mu / tau2,
                    t2: 1.0 / (1.0 / tau2 + n as f64),
                    a_s,
                    b,
                    nu: 2.0 * a_s,
                })
            }
            _ => None,
        };
        Self {
            y,
            sum: y.iter().sum(),
            sum_sq: y.iter().map(|v| v * v).sum(),
            measure,
            bayes,
        }
    }

    /// Bayes score minus the constant shared by every point: all deleted
    /// sets have the same size, so the gamma-function terms cancel.
    #[inline]
    fn bayes_score(k: &BayesConst, sum: f64, sum_sq: f64, x: f64) -> f64 {
        let loc = (k.inv_tau2_mu + sum) * k.t2;
        let b_s = k.b + sum_sq + k.mu2_tau2 - loc * loc / k.t2;
        let s2 = b_s / k.a_s * (1.0 + k.t2);
        let d = x - loc;
        0.5 * s2.ln() + 0.5 * (k.nu + 1.0) * (d * d / (s2 * k.nu)).ln_1p()
    }

    /// Score of point `i` (or the candidate when `i == n`) in the sample
    /// augmented with candidate `c`.
    #[inline]
    fn score(&self, c: f64, i: usize) -> f64 {
        let n = self.y.len();
        let (x, sum, sum_sq) = if i == n {
            (c, self.sum, self.sum_sq)
        } else {
            let yi = self.y[i];
            (yi, self.sum + c - yi, self.sum_sq + c * c - yi * yi)
        };
        match self.measure {
            ConformityMeasure::Dta => (sum / n as f64 - x).abs(),
            ConformityMeasure::DtaStreaming => ((sum + x) / (n + 1) as f64 - x).abs(),
            ConformityMeasure::BayesPosterior { .. } => {
                Self::bayes_score(self.bayes.as_ref().expect("bayes constants"), sum, sum_sq, x)
            }
        }
    }

    /// Whether at least `need` of the n+1 scores reach the candidate's score.
    fn included(&self, c: f64, need: usize) -> bool {
        let n = self.y.len();
        let own = self.score(c, n);
        // The candidate always counts itself.
        let mut hits = 1;
        let mut left = n;
        for i in 0..n {
            if hits >= need {
                return true;
            }
            if hits + left < need {
                return false;
            }
            if self.score(c, i) >= own {
                hits += 1;
            }
            left -= 1;
        }
        hits >= need
    }
}

fn minimum_hits(n: usize, alpha: f64) -> usize {
    // #{i : s_i >= s_c} / (n + 1) >= alpha, with a small guard against the
    // product landing a hair above an integer.
    let t = alpha * (n + 1) as f64;
    let r = t.round();
    if (t - r).abs() <= 1e-9 * t.max(1.0) {
        r as usize
    } else {
        t.ceil() as usize
    }
}

fn check(y: &[f64], alpha: f64, grid: &[f64]) -> Result<()> {
    if y.len() < 2 {
        return Err(not_ready("conformal intervals need at least two values"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(param(format!("conformal level must lie in (0, 1), got {alpha}")));
    }
    if grid.is_empty() {
        return Err(param("candidate grid is empty"));
    }
    Ok(())
}

/// Full evaluation of every grid candidate.
pub fn conformal_pi(y: &[f64], measure: &ConformityMeasure, alpha: f64, grid: &[f64]) -> Result<ConformalResult> {
    check(y, alpha, grid)?;
    measure.validate()?;
    let scorer = Scorer::new(y, *measure);
    let need = minimum_hits(y.len(), alpha);
    let keep: Vec<bool> = grid.iter().map(|&c| scorer.included(c, need)).collect();
    let first = keep.iter().position(|&k| k);
    let last = keep.iter().rposition(|&k| k);
    let (Some(first), Some(last)) = (first, last) else {
        return Err(Error::Degenerate(format!("no candidate reaches level {alpha}")));
    };
    let included = keep.iter().filter(|&&k| k).count();
    let (lo, hi) = (grid[first], grid[last]);
    Ok(ConformalResult {
        level: alpha,
        interval: (lo, hi),
        point: 0.5 * (lo + hi),
        contiguous: included == last - first + 1,
        included,
    })
}

/// Hull endpoints only, scanning inward from both ends of the grid. Same
/// interval and point as [`conformal_pi`] without scoring interior candidates.
pub fn conformal_hull(y: &[f64], measure: &ConformityMeasure, alpha: f64, grid: &[f64]) -> Result<(f64, f64)> {
    check(y, alpha, grid)?;
    measure.validate()?;
    let scorer = Scorer::new(y, *measure);
    let need = minimum_hits(y.len(), alpha);
    let first = grid
        .iter()
        .position(|&c| scorer.included(c, need))
        .ok_or_else(|| Error::Degenerate(format!("no candidate reaches level {alpha}")))?;
    let last = (first..grid.len())
        .rev()
        .find(|&k| scorer.included(grid[k], need))
        .unwrap_or(first);
    Ok((grid[first], grid[last]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const BAYES: ConformityMeasure = ConformityMeasure::BayesPosterior { mu: 0.0, tau2: 1.0, a: 1.0, b: 1.0 };

    #[test]
    fn dta_examples() {
        assert_eq!(conformity_score(&ConformityMeasure::Dta, &[0.0; 3], 0.0).unwrap(), 0.0);
        assert_eq!(conformity_score(&ConformityMeasure::Dta, &[0.0; 3], 3.0).unwrap(), 3.0);
        assert!(conformity_score(&ConformityMeasure::Dta, &[], 3.0).is_err());
    }

    #[test]
    fn bayes_density_integrates_to_one() {
        let set = [0.4, -1.2, 2.2, 0.9, 1.1];
        let h = 1e-3;
        let total: f64 = (-40_000..40_000)
            .map(|k| {
                let x = k as f64 * h;
                (-conformity_score(&BAYES, &set, x).unwrap()).exp() * h
            })
            .sum();
        assert!((total - 1.0).abs() < 1e-3, "{total}");
    }

    #[test]
    fn scorer_agrees_with_direct_scores() {
        let y = [0.3, 1.4, -0.8, 2.0, 0.1];
        let c = 0.77;
        for measure in [ConformityMeasure::Dta, ConformityMeasure::DtaStreaming, BAYES] {
            let s = Scorer::new(&y, measure);
            let mut aug = y.to_vec();
            aug.push(c);
            for i in 0..=y.len() {
                let mut deleted = aug.clone();
                let yi = deleted.remove(i);
                let direct = conformity_score(&measure, &deleted, yi).unwrap();
                let base = if let ConformityMeasure::BayesPosterior { .. } = measure {
                    // Direct score includes the shared normalizing constant.
                    let p = NormalPosterior::from_moments(0.0, 1.0, 1.0, 1.0, y.len(), 0.0, 0.0);
                    ln_gamma(0.5 * (p.dof + 1.0)) - ln_gamma(0.5 * p.dof) - 0.5 * (p.dof * std::f64::consts::PI).ln()
                } else {
                    0.0
                };
                assert!((s.score(c, i) - (direct + base)).abs() < 1e-10, "{measure:?} {i}");
            }
        }
    }

    #[test]
    fn constant_sample_keeps_its_value() {
        let y = [2.0; 6];
        let r = conformal_pi(&y, &ConformityMeasure::Dta, 0.9, &[2.0]).unwrap();
        assert_eq!(r.interval, (2.0, 2.0));
        assert_eq!(default_grid(&y, 512), vec![2.0]);
    }

    #[test]
    fn grid_shape() {
        let g = default_grid(&[0.0, 1.0], 5);
        assert_eq!(g, vec![-1.0, -0.25, 0.5, 1.25, 2.0]);
    }

    #[test]
    fn impossible_level_is_degenerate() {
        let y = [0.0, 1.0, 2.0, 3.0];
        let grid = [100.0, 200.0];
        assert!(matches!(
            conformal_pi(&y, &ConformityMeasure::Dta, 0.5, &grid),
            Err(Error::Degenerate(_))
        ));
        assert!(conformal_pi(&y, &ConformityMeasure::Dta, 1.0, &grid).is_err());
        assert!(conformal_pi(&[1.0], &ConformityMeasure::Dta, 0.5, &grid).is_err());
    }

    #[test]
    fn hit_threshold() {
        assert_eq!(minimum_hits(200, 0.15), 31);
        assert_eq!(minimum_hits(9, 0.3), 3);
        assert_eq!(minimum_hits(3, 0.5), 2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn nesting_hull_and_permutation(mut y in prop::collection::vec(-5.0f64..5.0, 3..40), bayes in any::<bool>()) {
            let measure = if bayes { BAYES } else { ConformityMeasure::Dta };
            let grid = default_grid(&y, 128);
            let wide = conformal_pi(&y, &measure, 0.1, &grid).unwrap();
            let narrow = conformal_pi(&y, &measure, 0.3, &grid);
            if let Ok(narrow) = narrow {
                prop_assert!(wide.interval.0 <= narrow.interval.0 && narrow.interval.1 <= wide.interval.1);
            }
            prop_assert!(wide.interval.0 <= wide.point && wide.point <= wide.interval.1);
            prop_assert_eq!(conformal_hull(&y, &measure, 0.1, &grid).unwrap(), wide.interval);
            y.reverse();
            let rev = conformal_pi(&y, &measure, 0.1, &grid).unwrap();
            let tol = 1e-9;
            // Sums are order dependent only at rounding level; hulls agree up to one grid step.
            let step = grid[1] - grid[0];
            prop_assert!((rev.interval.0 - wide.interval.0).abs() <= step + tol);
            prop_assert!((rev.interval.1 - wide.interval.1).abs() <= step + tol);
        }

        #[test]
        fn streaming_dta_close_to_exact(y in prop::collection::vec(0.0f64..1.0, 50..120)) {
            let grid = default_grid(&y, 256);
            let a = conformal_pi(&y, &ConformityMeasure::Dta, 0.2, &grid).unwrap();
            let b = conformal_pi(&y, &ConformityMeasure::DtaStreaming, 0.2, &grid).unwrap();
            let range = 1.0;
            let slack = 8.0 * range / y.len() as f64 + 2.0 * (grid[1] - grid[0]);
            prop_assert!((a.interval.0 - b.interval.0).abs() <= slack);
            prop_assert!((a.interval.1 - b.interval.1).abs() <= slack);
        }
    }
}
