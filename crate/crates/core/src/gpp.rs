//! Gaussian-process posterior predictive point predictors with an AR(1)
//! kernel: zero mean, IID random additive bias, and independent but
//! non-identical additive bias.
//!
//! The dense functions here take the whole data vector and rebuild every
//! matrix. [`GppWorkspace`] precomputes the data-independent pieces for one
//! `(n, rho, delta2)` so that point predictions cost O(n) or O(n^2).

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::ln_gamma;

use crate::error::{not_ready, param, Error, Result};

/// Floor applied to the inverse-gamma scale when the data carry no spread.
pub const BETA_FLOOR: f64 = 1e-12;

/// AR(1) correlation matrix with entries `rho^|i-j|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ar1Kernel {
    rho: f64,
    n: usize,
}

pub fn build_ar1_kernel(n: usize, rho: f64) -> Result<Ar1Kernel> {
    check_rho(rho)?;
    if n == 0 {
        return Err(param("kernel dimension must be positive"));
    }
    Ok(Ar1Kernel { rho, n })
}

impl Ar1Kernel {
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.rho.powi(i.abs_diff(j) as i32)
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.entry(i, j))
    }

    /// `I + K`.
    pub fn shifted(&self) -> DMatrix<f64> {
        let mut m = self.matrix();
        for i in 0..self.n {
            m[(i, i)] += 1.0;
        }
        m
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho.abs() < 1.0) {
        return Err(param(format!("AR(1) correlation must lie in (-1, 1), got {rho}")));
    }
    Ok(())
}

fn check_delta2(delta2: f64) -> Result<()> {
    if !(delta2 > 0.0 && delta2.is_finite()) {
        return Err(param(format!("delta^2 must be positive, got {delta2}")));
    }
    Ok(())
}

fn spd_inverse(m: DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    m.cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Numerical(format!("{what} is not positive definite")))
}

/// `V = [(I+K)^{-1} + I/delta2]^{-1}` given `(I+K)^{-1}`.
fn v_matrix(a_inv: &DMatrix<f64>, delta2: f64) -> Result<DMatrix<f64>> {
    let mut m = a_inv.clone();
    for i in 0..m.nrows() {
        m[(i, i)] += 1.0 / delta2;
    }
    spd_inverse(m, "posterior bias precision")
}

/// Symmetric inverse square root of `I + K` for one dimension.
#[derive(Debug, Clone)]
pub struct Whitener {
    root: DMatrix<f64>,
}

impl Whitener {
    pub fn new(n: usize, rho: f64) -> Result<Self> {
        let a = build_ar1_kernel(n, rho)?.shifted();
        let eig = a.symmetric_eigen();
        if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::Numerical("I + K is not positive definite".into()));
        }
        let q = &eig.eigenvectors;
        let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
        Ok(Self { root: q * d * q.transpose() })
    }

    pub fn apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.root.nrows() {
            return Err(param("whitener dimension differs from data length"));
        }
        Ok((&self.root * DVector::from_column_slice(y)).iter().copied().collect())
    }
}

/// `(I+K)^{-1/2} y`.
pub fn whiten(y: &[f64], rho: f64) -> Result<Vec<f64>> {
    check_data(y)?;
    Whitener::new(y.len(), rho)?.apply(y)
}

/// Unbiased sample variance.
pub fn sample_variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
}

/// Sample variance `S'_2` of the whitened data.
pub fn whitened_variance(y: &[f64], rho: f64) -> Result<f64> {
    if y.len() < 2 {
        return Err(not_ready("variance needs at least two values"));
    }
    Ok(sample_variance(&whiten(y, rho)?))
}

/// Noise variance estimate for the zero-mean model.
pub fn estimate_sigma2_nobias(y: &[f64], rho: f64) -> Result<f64> {
    whitened_variance(y, rho)
}

/// Conditional mean and variance of the next value under the zero-mean model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoBiasPredictive {
    pub mu_star: f64,
    pub sigma_star: f64,
}

fn check_data(y: &[f64]) -> Result<()> {
    if y.is_empty() {
        return Err(not_ready("no data"));
    }
    Ok(())
}

/// `K12 (K11 + I)^{-1} y`, and `(K11 + I)^{-1} K12` alongside.
fn nobias_parts(y: &[f64], rho: f64) -> Result<(f64, DVector<f64>, DVector<f64>)> {
    check_data(y)?;
    let n = y.len();
    let kernel = build_ar1_kernel(n + 1, rho)?;
    let a_inv = spd_inverse(build_ar1_kernel(n, rho)?.shifted(), "I + K")?;
    let k12 = DVector::from_fn(n, |i, _| kernel.entry(i, n));
    let w = &a_inv * &k12;
    Ok((w.dot(&DVector::from_column_slice(y)), w, k12))
}

pub fn gpp_nobias_mean(y: &[f64], rho: f64) -> Result<f64> {
    nobias_parts(y, rho).map(|(mu, _, _)| mu)
}

pub fn gpp_nobias_predict(y: &[f64], rho: f64) -> Result<NoBiasPredictive> {
    let (mu_star, w, k12) = nobias_parts(y, rho)?;
    let sigma2 = estimate_sigma2_nobias(y, rho)?;
    let sigma_star = sigma2 * (2.0 - k12.dot(&w));
    Ok(NoBiasPredictive { mu_star, sigma_star })
}

/// Location of the additive bias.
#[derive(Debug, Clone, PartialEq)]
pub enum Bias {
    /// One mean shared by every position.
    Iid(f64),
    /// One mean per observed position.
    Inid(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GppHyper {
    pub rho: f64,
    pub delta2: f64,
    pub bias: Bias,
    pub alpha: f64,
    pub beta: f64,
    pub sigma2: f64,
}

/// Student-t predictive with `dof` degrees of freedom. `scale_param` is the
/// half of `beta + A2`; `g1` is the precision weight of the next value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudentPredictive {
    pub location: f64,
    pub scale_param: f64,
    pub dof: f64,
    pub g1: f64,
}

impl StudentPredictive {
    /// Conventional t scale: `sqrt(2 * beta_post / (g1 * dof))`.
    pub fn t_scale(&self) -> f64 {
        (4.0 * self.scale_param / (self.g1 * self.dof)).sqrt()
    }

    pub fn ln_density(&self, x: f64) -> f64 {
        let nu = self.dof;
        let s = self.t_scale();
        let z = (x - self.location) / s;
        ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * std::f64::consts::PI).ln()
            - s.ln()
            - 0.5 * (nu + 1.0) * (z * z / nu).ln_1p()
    }
}

/// Moment-matched inverse-gamma shape and scale from a variance estimate and
/// the mean bias.
fn inverse_gamma_moments(sigma2: f64, gamma_bar: f64, n: usize, delta2: f64) -> (f64, f64) {
    let nf = n as f64;
    let var = 2.0 * sigma2 / ((nf - 1.0) * (nf - 1.0))
        * (sigma2 + 2.0 * nf * gamma_bar * gamma_bar / (1.0 + delta2));
    if !(var > 0.0) {
        return (2.0, BETA_FLOOR);
    }
    let alpha = sigma2 * sigma2 / var + 2.0;
    let beta = (sigma2 * (alpha - 1.0)).max(BETA_FLOOR);
    (alpha, beta)
}

fn check_hyper_inputs(y: &[f64], rho: f64, delta2: f64) -> Result<()> {
    check_rho(rho)?;
    check_delta2(delta2)?;
    if y.len() < 3 {
        return Err(not_ready("hyperparameter estimation needs at least three values"));
    }
    Ok(())
}

/// Weights `w` with shared bias estimate `w . y`, where the estimate is
/// `y'(I+K)^{-1} V 1 / 1'(I - V/delta2) 1`.
pub fn gpp_iid_gamma_weights(n: usize, rho: f64, delta2: f64) -> Result<Vec<f64>> {
    check_rho(rho)?;
    check_delta2(delta2)?;
    let a_inv = spd_inverse(build_ar1_kernel(n, rho)?.shifted(), "I + K")?;
    let v = v_matrix(&a_inv, delta2)?;
    let ones = DVector::from_element(n, 1.0);
    let u = &a_inv * &v * &ones;
    let m = DMatrix::identity(n, n) - &v / delta2;
    let den = ones.dot(&(m * &ones));
    if !(den.abs() > 1e-300) || !den.is_finite() {
        return Err(Error::Degenerate("bias estimate denominator vanishes".into()));
    }
    Ok(u.iter().map(|x| x / den).collect())
}

pub fn gpp_iid_gamma(y: &[f64], rho: f64, delta2: f64) -> Result<f64> {
    check_data(y)?;
    let w = gpp_iid_gamma_weights(y.len(), rho, delta2)?;
    Ok(dot(&w, y))
}

pub fn gpp_iid_hyperparams(y: &[f64], rho: f64, delta2: f64) -> Result<GppHyper> {
    check_hyper_inputs(y, rho, delta2)?;
    let gamma = gpp_iid_gamma(y, rho, delta2)?;
    let sigma2 = whitened_variance(y, rho)? / (1.0 + delta2);
    let (alpha, beta) = inverse_gamma_moments(sigma2, gamma, y.len(), delta2);
    Ok(GppHyper {
        rho,
        delta2,
        bias: Bias::Iid(gamma),
        alpha,
        beta,
        sigma2,
    })
}

/// Per-position bias estimate `(I - V/delta2)^{-1} (I+K)^{-1} V y`.
pub fn gpp_inid_gamma(y: &[f64], rho: f64, delta2: f64) -> Result<Vec<f64>> {
    check_data(y)?;
    check_rho(rho)?;
    check_delta2(delta2)?;
    let m = inid_matrix(y.len(), rho, delta2)?;
    Ok((m * DVector::from_column_slice(y)).iter().copied().collect())
}

fn inid_matrix(n: usize, rho: f64, delta2: f64) -> Result<DMatrix<f64>> {
    let a_inv = spd_inverse(build_ar1_kernel(n, rho)?.shifted(), "I + K")?;
    let v = v_matrix(&a_inv, delta2)?;
    let left = DMatrix::identity(n, n) - &v / delta2;
    let left_inv = left
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Degenerate("I - V/delta^2 is singular".into()))?;
    Ok(left_inv * a_inv * v)
}

pub fn gpp_inid_hyperparams(y: &[f64], rho: f64, delta2: f64) -> Result<GppHyper> {
    check_hyper_inputs(y, rho, delta2)?;
    let gamma = gpp_inid_gamma(y, rho, delta2)?;
    let s2 = whitened_variance(y, rho)?;
    let gamma_bar = gamma.iter().sum::<f64>() / gamma.len() as f64;
    let spread = sample_variance(&gamma);
    let raw = (s2 - spread) / (1.0 + delta2);
    let (sigma2, (alpha, beta)) = if raw > 0.0 {
        (raw, inverse_gamma_moments(raw, gamma_bar, y.len(), delta2))
    } else {
        let fallback = s2 / (1.0 + delta2);
        (0.0, inverse_gamma_moments(fallback, gamma_bar, y.len(), delta2))
    };
    Ok(GppHyper {
        rho,
        delta2,
        bias: Bias::Inid(gamma),
        alpha,
        beta,
        sigma2,
    })
}

/// Builds the `(n+1)`-dimensional quadratic form in the next value and reads
/// off its location, curvature and residual.
fn student_from_bias(
    y: &[f64],
    rho: f64,
    delta2: f64,
    gamma_full: &DVector<f64>,
    alpha: f64,
    beta: f64,
) -> Result<StudentPredictive> {
    let n = y.len();
    let a_inv = spd_inverse(build_ar1_kernel(n + 1, rho)?.shifted(), "I + K")?;
    let v = v_matrix(&a_inv, delta2)?;
    let gamma1 = &a_inv - &a_inv * &v * &a_inv;
    let gamma2 = &a_inv * &v * gamma_full / delta2;
    let delta = 0.5 * (gamma_full.dot(gamma_full) / delta2
        - gamma_full.dot(&(&v * gamma_full)) / (delta2 * delta2));

    let yv = DVector::from_column_slice(y);
    let g1 = gamma1[(n, n)];
    if !(g1 > 0.0) {
        return Err(Error::Numerical(format!("predictive curvature g1 = {g1} is not positive")));
    }
    let g1n = gamma1.view((0, n), (n, 1)).column(0).into_owned();
    let g2 = gamma2[n];
    let block = gamma1.view((0, 0), (n, n));
    let lin = g2 - yv.dot(&g1n);
    let location = lin / g1;
    let a2 = 0.5 * yv.dot(&(block * &yv)) - yv.dot(&gamma2.rows(0, n)) + delta
        - lin * lin / (2.0 * g1);
    let scale_param = 0.5 * (beta + a2.max(0.0));
    Ok(StudentPredictive {
        location,
        scale_param,
        dof: 2.0 * alpha + n as f64,
        g1,
    })
}

fn check_predict_hyper(y: &[f64], hyper: &GppHyper) -> Result<()> {
    check_data(y)?;
    check_rho(hyper.rho)?;
    check_delta2(hyper.delta2)?;
    if !(hyper.alpha > 0.0 && hyper.beta > 0.0) {
        return Err(param("inverse-gamma hyperparameters must be positive"));
    }
    Ok(())
}

pub fn gpp_iid_predict(y: &[f64], hyper: &GppHyper) -> Result<StudentPredictive> {
    check_predict_hyper(y, hyper)?;
    let Bias::Iid(gamma) = hyper.bias else {
        return Err(param("IID predictor needs a shared bias"));
    };
    let full = DVector::from_element(y.len() + 1, gamma);
    student_from_bias(y, hyper.rho, hyper.delta2, &full, hyper.alpha, hyper.beta)
}

/// INID predictive with the next bias set to the mean of the observed ones.
pub fn gpp_inid_predict_from(y: &[f64], hyper: &GppHyper) -> Result<StudentPredictive> {
    check_predict_hyper(y, hyper)?;
    let Bias::Inid(gamma) = &hyper.bias else {
        return Err(param("INID predictor needs per-position biases"));
    };
    if gamma.len() != y.len() {
        return Err(param("bias vector length differs from data length"));
    }
    let full = extend_with_mean(gamma);
    student_from_bias(y, hyper.rho, hyper.delta2, &full, hyper.alpha, hyper.beta)
}

pub fn gpp_inid_predict(y: &[f64], rho: f64, delta2: f64) -> Result<StudentPredictive> {
    let hyper = gpp_inid_hyperparams(y, rho, delta2)?;
    gpp_inid_predict_from(y, &hyper)
}

fn extend_with_mean(gamma: &[f64]) -> DVector<f64> {
    let n = gamma.len();
    let mean = gamma.iter().sum::<f64>() / n as f64;
    DVector::from_fn(n + 1, |i, _| if i < n { gamma[i] } else { mean })
}

/// Data-independent quantities for fast point predictions at one size.
#[derive(Debug, Clone)]
pub struct GppWorkspace {
    n: usize,
    nobias_w: DVector<f64>,
    iid_u: DVector<f64>,
    iid_den: f64,
    g1: f64,
    g1n: DVector<f64>,
    g2_row: DVector<f64>,
    inid: DMatrix<f64>,
}

impl GppWorkspace {
    pub fn new(n: usize, rho: f64, delta2: f64) -> Result<Self> {
        check_rho(rho)?;
        check_delta2(delta2)?;
        if n == 0 {
            return Err(not_ready("no data"));
        }
        let kernel = build_ar1_kernel(n + 1, rho)?;
        let a_inv = spd_inverse(build_ar1_kernel(n, rho)?.shifted(), "I + K")?;
        let k12 = DVector::from_fn(n, |i, _| kernel.entry(i, n));
        let nobias_w = &a_inv * k12;

        let v = v_matrix(&a_inv, delta2)?;
        let ones = DVector::from_element(n, 1.0);
        let iid_u = &a_inv * &v * &ones;
        let iid_den = ones.dot(&((DMatrix::identity(n, n) - &v / delta2) * &ones));
        if !(iid_den.abs() > 1e-300) || !iid_den.is_finite() {
            return Err(Error::Degenerate("bias estimate denominator vanishes".into()));
        }

        let a_inv1 = spd_inverse(kernel.shifted(), "I + K")?;
        let v1 = v_matrix(&a_inv1, delta2)?;
        let gamma1 = &a_inv1 - &a_inv1 * &v1 * &a_inv1;
        let g1 = gamma1[(n, n)];
        if !(g1 > 0.0) {
            return Err(Error::Numerical(format!("predictive curvature g1 = {g1} is not positive")));
        }
        let g1n = gamma1.view((0, n), (n, 1)).column(0).into_owned();
        let g2_row = (&a_inv1 * &v1).row(n).transpose() / delta2;

        Ok(Self {
            n,
            nobias_w,
            iid_u,
            iid_den,
            g1,
            g1n,
            g2_row,
            inid: inid_matrix(n, rho, delta2)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn check(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.n {
            return Err(param(format!("workspace built for {} values, got {}", self.n, y.len())));
        }
        Ok(())
    }

    pub fn nobias_point(&self, y: &[f64]) -> Result<f64> {
        self.check(y)?;
        Ok(dot(self.nobias_w.as_slice(), y))
    }

    pub fn iid_gamma(&self, y: &[f64]) -> Result<f64> {
        self.check(y)?;
        Ok(dot(self.iid_u.as_slice(), y) / self.iid_den)
    }

    /// Location with a shared bias `gamma`.
    pub fn iid_point_with(&self, y: &[f64], gamma: f64) -> Result<f64> {
        self.check(y)?;
        let g2 = gamma * self.g2_row.sum();
        Ok((g2 - dot(self.g1n.as_slice(), y)) / self.g1)
    }

    pub fn iid_point(&self, y: &[f64]) -> Result<f64> {
        let gamma = self.iid_gamma(y)?;
        self.iid_point_with(y, gamma)
    }

    pub fn inid_gamma(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check(y)?;
        Ok((&self.inid * DVector::from_column_slice(y)).iter().copied().collect())
    }

    /// Location with per-position biases; the next bias is their mean.
    pub fn inid_point_with(&self, y: &[f64], gamma: &[f64]) -> Result<f64> {
        self.check(y)?;
        self.check(gamma)?;
        let full = extend_with_mean(gamma);
        let g2 = self.g2_row.dot(&full);
        Ok((g2 - dot(self.g1n.as_slice(), y)) / self.g1)
    }

    pub fn inid_point(&self, y: &[f64]) -> Result<f64> {
        let gamma = self.inid_gamma(y)?;
        self.inid_point_with(y, &gamma)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

type WorkspaceKey = (usize, u64, u64);

/// Process-wide cache of workspaces keyed by exact `(n, rho, delta2)`.
pub fn cached_workspace(n: usize, rho: f64, delta2: f64) -> Result<Arc<GppWorkspace>> {
    static CACHE: OnceLock<Mutex<HashMap<WorkspaceKey, Arc<GppWorkspace>>>> = OnceLock::new();
    let key = (n, rho.to_bits(), delta2.to_bits());
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(ws) = cache.lock().expect("workspace cache poisoned").get(&key) {
        return Ok(Arc::clone(ws));
    }
    let ws = Arc::new(GppWorkspace::new(n, rho, delta2)?);
    let mut guard = cache.lock().expect("workspace cache poisoned");
    Ok(Arc::clone(guard.entry(key).or_insert(ws)))
}
