//! Shtarkov (normalized maximum likelihood) point predictors.
//!
//! Each family keeps only `n` and a running mean (the binomial family keeps an
//! exact integer sum), so updates are O(1) and predictions depend on the data
//! only through those statistics.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{not_ready, param, Error, Result};

/// Normal-expert variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NormalVariant {
    FreqKnownVar,
    FreqKnownMean { mu: f64 },
    FreqBothUnknown,
    BayesMean { mu0: f64, sigma0_sq: f64, sigma_sq: f64 },
    BayesVar { mu: f64, alpha: f64, beta: f64 },
    BayesBoth { mu0: f64, sigma0_sq: f64, alpha: f64, beta: f64 },
}

impl NormalVariant {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(param(format!("{name} must be positive and finite, got {v}")))
            }
        };
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(param(format!("{name} must be finite")))
            }
        };
        match *self {
            NormalVariant::FreqKnownVar | NormalVariant::FreqBothUnknown => Ok(()),
            NormalVariant::FreqKnownMean { mu } => finite("mu", mu),
            NormalVariant::BayesMean { mu0, sigma0_sq, sigma_sq } => {
                finite("mu0", mu0)?;
                positive("sigma0_sq", sigma0_sq)?;
                positive("sigma_sq", sigma_sq)
            }
            NormalVariant::BayesVar { mu, alpha, beta } => {
                finite("mu", mu)?;
                positive("alpha", alpha)?;
                positive("beta", beta)
            }
            NormalVariant::BayesBoth { mu0, sigma0_sq, alpha, beta } => {
                finite("mu0", mu0)?;
                positive("sigma0_sq", sigma0_sq)?;
                positive("alpha", alpha)?;
                positive("beta", beta)
            }
        }
    }
}

/// Point prediction for a normal variant given `n >= 1` tokens with mean `mean`.
pub fn normal_point(variant: &NormalVariant, n: u64, mean: f64) -> f64 {
    let nf = n as f64;
    match *variant {
        NormalVariant::FreqKnownVar | NormalVariant::FreqBothUnknown => mean,
        NormalVariant::FreqKnownMean { mu } => mu,
        NormalVariant::BayesVar { mu, .. } => mu,
        NormalVariant::BayesMean { mu0, sigma0_sq, sigma_sq } => {
            (mu0 / sigma0_sq + nf * mean / sigma_sq) / (1.0 / sigma0_sq + nf / sigma_sq)
        }
        NormalVariant::BayesBoth { mu0, sigma0_sq, .. } => {
            (nf * mean + mu0 / sigma0_sq) / (nf + 1.0 / sigma0_sq)
        }
    }
}

/// Running statistics for a normal Shtarkov predictor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShtarkovNormalState {
    n: u64,
    mean: f64,
    variant: NormalVariant,
}

impl ShtarkovNormalState {
    pub fn new(variant: NormalVariant) -> Result<Self> {
        variant.validate()?;
        Ok(Self { n: 0, mean: 0.0, variant })
    }

    pub fn push(&mut self, y: f64) {
        self.n += 1;
        self.mean += (y - self.mean) / self.n as f64;
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn predict(&self) -> Result<f64> {
        if self.n == 0 {
            return Err(not_ready("normal Shtarkov predictor has no data"));
        }
        Ok(normal_point(&self.variant, self.n, self.mean))
    }
}

/// Beta prior hyperparameters for the binomial family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaPrior {
    pub alpha: f64,
    pub beta: f64,
}

fn x_ln_x(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if x < 0.0 {
        f64::NEG_INFINITY
    } else {
        x * x.ln()
    }
}

fn ln_choose(n: u32, k: u32) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Log objective maximized over the next token `y` in `0..=trials`.
///
/// `sum` is the total of the first `n` tokens. Candidates that push a log
/// argument negative (possible when a Beta shape is below 1) score `-inf`.
pub fn binomial_objective(trials: u32, n: u64, sum: u64, prior: Option<BetaPrior>, y: u32) -> f64 {
    let total = trials as f64 * (n as f64 + 1.0);
    let s = sum as f64 + y as f64;
    let (a, b) = match prior {
        None => (0.0, 0.0),
        Some(p) => (p.alpha - 1.0, p.beta - 1.0),
    };
    ln_choose(trials, y) + x_ln_x(s + a) + x_ln_x(total - s + b)
}

/// Smallest maximizer of [`binomial_objective`].
pub fn binomial_argmax(trials: u32, n: u64, sum: u64, prior: Option<BetaPrior>) -> u32 {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for y in 0..=trials {
        let v = binomial_objective(trials, n, sum, prior, y);
        if v > best_val {
            best_val = v;
            best = y;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShtarkovBinomialState {
    trials: u32,
    n: u64,
    sum: u64,
    prior: Option<BetaPrior>,
}

impl ShtarkovBinomialState {
    pub fn new(trials: u32, prior: Option<BetaPrior>) -> Result<Self> {
        if trials == 0 {
            return Err(param("binomial trials N must be positive"));
        }
        if let Some(p) = prior {
            if !(p.alpha > 0.0 && p.beta > 0.0 && p.alpha.is_finite() && p.beta.is_finite()) {
                return Err(param("Beta prior shapes must be positive"));
            }
        }
        Ok(Self { trials, n: 0, sum: 0, prior })
    }

    /// Builds a state directly from sufficient statistics.
    pub fn from_stats(trials: u32, n: u64, sum: u64, prior: Option<BetaPrior>) -> Result<Self> {
        let mut s = Self::new(trials, prior)?;
        if sum > trials as u64 * n {
            return Err(param(format!("sum {sum} exceeds N*n")));
        }
        s.n = n;
        s.sum = sum;
        Ok(s)
    }

    /// Accepts a count in `0..=N`; anything else is rejected.
    pub fn push(&mut self, y: f64) -> std::result::Result<(), String> {
        if y < 0.0 || y > self.trials as f64 || y.fract() != 0.0 {
            return Err(format!("binomial token {y} is not an integer in 0..={}", self.trials));
        }
        self.n += 1;
        self.sum += y as u64;
        Ok(())
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn sum(&self) -> u64 {
        self.sum
    }

    pub fn predict(&self) -> Result<u32> {
        if self.n == 0 {
            return Err(not_ready("binomial Shtarkov predictor has no data"));
        }
        Ok(binomial_argmax(self.trials, self.n, self.sum, self.prior))
    }
}

/// Exponential experts: the maximizer is zero for both variants.
pub fn exponential_point() -> f64 {
    0.0
}

/// Gamma prior hyperparameters on the rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaPrior {
    pub alpha0: f64,
    pub beta0: f64,
}

/// Gamma experts with fixed shape `alpha`.
pub fn gamma_point(alpha: f64, prior: Option<GammaPrior>, n: u64, mean: f64) -> f64 {
    if alpha <= 1.0 {
        return 0.0;
    }
    let nf = n as f64;
    match prior {
        None => nf * (alpha - 1.0) * mean / (nf * alpha + 1.0),
        Some(p) => (alpha - 1.0) * (p.beta0 + nf * mean) / (nf * alpha + p.alpha0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShtarkovGammaState {
    alpha: f64,
    n: u64,
    mean: f64,
    prior: Option<GammaPrior>,
}

impl ShtarkovGammaState {
    pub fn new(alpha: f64, prior: Option<GammaPrior>) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(param("gamma shape index must be positive"));
        }
        if let Some(p) = prior {
            if !(p.alpha0 > 0.0 && p.beta0 > 0.0) {
                return Err(param("gamma prior hyperparameters must be positive"));
            }
        }
        Ok(Self { alpha, n: 0, mean: 0.0, prior })
    }

    pub fn push(&mut self, y: f64) -> std::result::Result<(), String> {
        if !(y > 0.0) {
            return Err(format!("gamma token {y} is not positive"));
        }
        self.n += 1;
        self.mean += (y - self.mean) / self.n as f64;
        Ok(())
    }

    pub fn predict(&self) -> Result<f64> {
        if self.n == 0 {
            return Err(not_ready("gamma Shtarkov predictor has no data"));
        }
        Ok(gamma_point(self.alpha, self.prior, self.n, self.mean))
    }
}

/// Expert family selection for the Shtarkov methods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ShtarkovModel {
    Normal {
        #[serde(flatten)]
        variant: NormalVariant,
    },
    Binomial {
        trials: u32,
        #[serde(default)]
        prior: Option<BetaPrior>,
    },
    Exponential {
        /// Gamma prior on the rate; it does not move the maximizer.
        #[serde(default)]
        prior: Option<GammaPrior>,
    },
    Gamma {
        alpha: f64,
        #[serde(default)]
        prior: Option<GammaPrior>,
    },
}

impl Default for ShtarkovModel {
    fn default() -> Self {
        ShtarkovModel::Normal {
            variant: NormalVariant::FreqKnownVar,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Inner {
    Normal(ShtarkovNormalState),
    Binomial(ShtarkovBinomialState),
    Exponential { n: u64 },
    Gamma(ShtarkovGammaState),
}

/// Any Shtarkov family behind one push/predict interface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShtarkovState {
    inner: Inner,
}

impl ShtarkovState {
    pub fn new(model: &ShtarkovModel) -> Result<Self> {
        let inner = match *model {
            ShtarkovModel::Normal { variant } => Inner::Normal(ShtarkovNormalState::new(variant)?),
            ShtarkovModel::Binomial { trials, prior } => {
                Inner::Binomial(ShtarkovBinomialState::new(trials, prior)?)
            }
            ShtarkovModel::Exponential { prior } => {
                if let Some(p) = prior {
                    if !(p.alpha0 > 0.0 && p.beta0 > 0.0) {
                        return Err(param("gamma prior hyperparameters must be positive"));
                    }
                }
                Inner::Exponential { n: 0 }
            }
            ShtarkovModel::Gamma { alpha, prior } => Inner::Gamma(ShtarkovGammaState::new(alpha, prior)?),
        };
        Ok(Self { inner })
    }

    /// Adds a token; `index` is only used for error reporting.
    pub fn push(&mut self, index: u64, y: f64) -> Result<()> {
        let res = match &mut self.inner {
            Inner::Normal(s) => {
                s.push(y);
                Ok(())
            }
            Inner::Binomial(s) => s.push(y),
            Inner::Exponential { n } => {
                if y < 0.0 {
                    Err(format!("exponential token {y} is negative"))
                } else {
                    *n += 1;
                    Ok(())
                }
            }
            Inner::Gamma(s) => s.push(y),
        };
        res.map_err(|reason| Error::Ingestion { index, reason })
    }

    pub fn predict(&self) -> Result<f64> {
        match &self.inner {
            Inner::Normal(s) => s.predict(),
            Inner::Binomial(s) => s.predict().map(f64::from),
            Inner::Exponential { n } => {
                if *n == 0 {
                    Err(not_ready("exponential Shtarkov predictor has no data"))
                } else {
                    Ok(exponential_point())
                }
            }
            Inner::Gamma(s) => s.predict(),
        }
    }
}
