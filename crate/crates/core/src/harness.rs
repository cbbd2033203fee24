//! Prequential evaluation: burn-in, cumulative predictive error (CPE), its
//! running variance, and CPE as a function of added Gaussian noise.
//!
//! Each scored prediction is made before its token is fed to the predictor,
//! so no prediction has seen its own target.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::methods::{build_predictor, MethodParams};
use crate::types::{Diagnostics, Method, Observation, PredictorId, SequentialPredictor};

/// Running mean absolute error plus the sums needed for its running variance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CpeAccumulator {
    n: u64,
    cpe: f64,
    sum: f64,
    sum_sq: f64,
}

impl CpeAccumulator {
    /// Scores one prediction and returns the updated CPE.
    pub fn update(&mut self, y: f64, yhat: f64) -> f64 {
        let n = self.n as f64;
        self.cpe = (n * self.cpe + (y - yhat).abs()) / (n + 1.0);
        self.n += 1;
        self.sum += self.cpe;
        self.sum_sq += self.cpe * self.cpe;
        self.cpe
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn cpe(&self) -> f64 {
        self.cpe
    }

    /// Variance of the CPE trace so far, clamped at 0 against rounding.
    pub fn running_variance(&self) -> Result<f64> {
        if self.n == 0 {
            return Err(Error::NotReady("no predictions scored".into()));
        }
        let n = self.n as f64;
        let mean = self.sum / n;
        Ok((self.sum_sq / n - mean * mean).max(0.0))
    }

    pub fn sigma_rv(&self) -> Result<f64> {
        self.running_variance().map(f64::sqrt)
    }
}

/// Mean absolute error over a batch of pairs.
pub fn batch_cpe(y: &[f64], yhat: &[f64]) -> f64 {
    let total: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum();
    total / y.len() as f64
}

/// Adds independent `N(0, tau^2)` noise to every token. `tau = 0` returns the
/// input unchanged.
pub fn perturb_stream(y: &[f64], tau: f64, seed: u64) -> Result<Vec<f64>> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(param(format!("perturbation sd must be finite and nonnegative, got {tau}")));
    }
    if tau == 0.0 {
        return Ok(y.to_vec());
    }
    let noise = Normal::new(0.0, tau).map_err(|e| param(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(y.iter().map(|&v| v + noise.sample(&mut rng)).collect())
}

/// Burn-in length `max(1, ceil(frac * len))`; the stream must be longer.
pub fn burn_in_len(len: usize, frac: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&frac) {
        return Err(Error::Config(format!("burn-in fraction must lie in [0, 1), got {frac}")));
    }
    let b = ((frac * len as f64).ceil() as usize).max(1);
    if len <= b {
        return Err(Error::Config(format!(
            "stream of {len} tokens leaves nothing after a burn-in of {b}"
        )));
    }
    Ok(b)
}

/// Mixes a master seed with a method index (splitmix64 finalizer).
pub fn method_seed(master: u64, method: Method) -> u64 {
    let idx = Method::ALL.iter().position(|&m| m == method).unwrap_or(0) as u64;
    let mut z = master ^ (idx + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Evenly spaced `points` values over `[0, sigma]`, or `[0]` when `sigma = 0`.
pub fn tau_grid(sigma: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(Error::Config("the perturbation grid needs at least two points".into()));
    }
    if sigma == 0.0 {
        return Ok(vec![0.0]);
    }
    let step = sigma / (points - 1) as f64;
    Ok((0..points)
        .map(|k| if k + 1 == points { sigma } else { k as f64 * step })
        .collect())
}

/// Published sigma_RV and grid spacing for six real-world streams. These
/// datasets are not shipped; the values are carried as run metadata only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceRun {
    pub dataset: &'static str,
    pub sigma_rv: f64,
    pub grid_step: f64,
}

pub const REFERENCE_RUNS: [ReferenceRun; 6] = [
    ReferenceRun { dataset: "walmart-sales", sigma_rv: 154.0, grid_step: 19.0 },
    ReferenceRun { dataset: "customer-shopping", sigma_rv: 890.0, grid_step: 89.0 },
    ReferenceRun { dataset: "accelerometer", sigma_rv: 0.18, grid_step: 0.02 },
    ReferenceRun { dataset: "real-estate", sigma_rv: 630.0, grid_step: 90.0 },
    ReferenceRun { dataset: "parking", sigma_rv: 198.0, grid_step: 33.0 },
    ReferenceRun { dataset: "colombia", sigma_rv: 900.0, grid_step: 100.0 },
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub index: u64,
    pub y: f64,
    pub yhat: f64,
    pub abs_err: f64,
    pub cpe: f64,
}

/// One prequential pass.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub method: Method,
    pub rows: Vec<TraceRow>,
    pub cpe: f64,
    pub sigma_rv: f64,
    pub diagnostics: Diagnostics,
}

fn in_run(method: Method, index: u64) -> impl Fn(Error) -> Error {
    move |e| Error::Run {
        method: method.label().to_string(),
        index,
        source: Box::new(e),
    }
}

/// Feeds `y` through `method`, scoring every prediction after the first
/// `burn_in` tokens. The burn-in prefix also calibrates the predictor.
pub fn run_prequential(method: Method, params: &MethodParams, y: &[f64], burn_in: usize, seed: u64) -> Result<RunTrace> {
    if burn_in == 0 || burn_in >= y.len() {
        return Err(Error::Config(format!(
            "burn-in {burn_in} must be positive and shorter than the stream ({})",
            y.len()
        )));
    }
    let mut p = build_predictor(method, params, &y[..burn_in], seed).map_err(in_run(method, 0))?;
    let mut acc = CpeAccumulator::default();
    let mut rows = Vec::with_capacity(y.len() - burn_in);
    for (i, &v) in y.iter().enumerate() {
        let index = i as u64 + 1;
        let obs = Observation::new(index, v).map_err(in_run(method, index))?;
        if i >= burn_in {
            let yhat = p.predict().map_err(in_run(method, index))?.point;
            let cpe = acc.update(v, yhat);
            rows.push(TraceRow { index, y: v, yhat, abs_err: (v - yhat).abs(), cpe });
        }
        p.update(obs).map_err(in_run(method, index))?;
    }
    Ok(RunTrace {
        method,
        rows,
        cpe: acc.cpe(),
        sigma_rv: acc.sigma_rv()?,
        diagnostics: p.diagnostics(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub burnin_frac: f64,
    pub grid_points: usize,
    pub seed: u64,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self { burnin_frac: 0.1, grid_points: 11, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityCurve {
    pub method: PredictorId,
    pub taus: Vec<f64>,
    pub cpes: Vec<f64>,
    pub sigma_rv: f64,
}

/// Unperturbed run plus the CPE curve over the perturbation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityRun {
    pub base: RunTrace,
    pub curve: SensitivityCurve,
    /// Clamp counters summed over every perturbed rerun.
    pub perturbed_diagnostics: Diagnostics,
}

/// Runs `method` on `y` and on each perturbed copy. Grid point `k` draws its
/// noise from `cfg.seed + k`, so every method sees the same perturbed streams.
pub fn run_sensitivity(method: Method, params: &MethodParams, y: &[f64], cfg: &HarnessConfig) -> Result<SensitivityRun> {
    let burn_in = burn_in_len(y.len(), cfg.burnin_frac)?;
    let seed = method_seed(cfg.seed, method);
    let base = run_prequential(method, params, y, burn_in, seed)?;
    let taus = tau_grid(base.sigma_rv, cfg.grid_points)?;
    let reruns: Vec<(f64, Diagnostics)> = taus[1..]
        .par_iter()
        .enumerate()
        .map(|(k, &tau)| {
            let noisy = perturb_stream(y, tau, cfg.seed.wrapping_add(k as u64 + 1))?;
            let run = run_prequential(method, params, &noisy, burn_in, seed)?;
            Ok((run.cpe, run.diagnostics))
        })
        .collect::<Result<_>>()?;
    let mut cpes = vec![base.cpe];
    let mut perturbed_diagnostics = Diagnostics::default();
    for (cpe, d) in reruns {
        cpes.push(cpe);
        perturbed_diagnostics = perturbed_diagnostics.merge(d);
    }
    let curve = SensitivityCurve {
        method: method.id(),
        taus,
        cpes,
        sigma_rv: base.sigma_rv,
    };
    Ok(SensitivityRun { base, curve, perturbed_diagnostics })
}

/// [`run_sensitivity`] for several methods in parallel; results keep the
/// input order.
pub fn run_all(methods: &[Method], params: &MethodParams, y: &[f64], cfg: &HarnessConfig) -> Vec<Result<SensitivityRun>> {
    methods
        .par_iter()
        .map(|&m| run_sensitivity(m, params, y, cfg))
        .collect()
}
