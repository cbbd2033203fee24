//! The twelve benchmark methods behind [`SequentialPredictor`].
//!
//! [`build_predictor`] takes a calibration prefix (the harness passes the
//! burn-in tokens) that fixes data-dependent settings up front: the sketch
//! value range and the default prior mean of the Bayes conformity. The same
//! prefix must still be fed through `update`.

use serde::{Deserialize, Serialize};

use crate::conformal::{conformal_hull, default_grid, ConformityMeasure};
use crate::dirichlet::DppState;
use crate::error::{not_ready, param, Error, Result};
use crate::gpp::cached_workspace;
use crate::repset::RepSet;
use crate::shtarkov::{ShtarkovModel, ShtarkovState};
use crate::sketch::{CountMinTable, Eedf, HashFamily, IntervalMap, Placement};
use crate::types::{Diagnostics, Method, Observation, Prediction, PredictorId, SequentialPredictor, Sequencer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GppParams {
    pub rho: f64,
    /// Bias prior scale; the prior variance factor is `delta^2`.
    pub delta: f64,
}

impl Default for GppParams {
    fn default() -> Self {
        Self { rho: 0.8, delta: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DppParams {
    pub mass: f64,
    pub grid: Option<f64>,
}

impl Default for DppParams {
    fn default() -> Self {
        Self { mass: 1.0, grid: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SketchParams {
    pub d: usize,
    pub v: usize,
    pub k_int: usize,
}

impl Default for SketchParams {
    fn default() -> Self {
        Self { d: 25, v: 50, k_int: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConformityKind {
    Dta,
    DtaStreaming,
    BayesPosterior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConformalParams {
    pub alpha: f64,
    pub grid_points: usize,
    pub kind: ConformityKind,
    /// Prior mean; the calibration mean when unset.
    pub mu: Option<f64>,
    pub tau2: f64,
    pub a: f64,
    pub b: f64,
}

impl Default for ConformalParams {
    fn default() -> Self {
        Self {
            alpha: 0.15,
            grid_points: 512,
            kind: ConformityKind::BayesPosterior,
            mu: None,
            tau2: 1.0,
            a: 1.0,
            b: 1.0,
        }
    }
}

/// Settings for every method; each method reads only its own section.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodParams {
    pub shtarkov: ShtarkovModel,
    pub repset: RepSetParams,
    pub gpp: GppParams,
    pub dpp: DppParams,
    pub sketch: SketchParams,
    pub conformal: ConformalParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RepSetParams {
    pub size: usize,
}

impl Default for RepSetParams {
    fn default() -> Self {
        Self { size: 200 }
    }
}

/// The conformity measure a conformal predictor will use for this prefix.
pub fn resolve_conformity(params: &ConformalParams, calibration: &[f64]) -> Result<ConformityMeasure> {
    let measure = match params.kind {
        ConformityKind::Dta => ConformityMeasure::Dta,
        ConformityKind::DtaStreaming => ConformityMeasure::DtaStreaming,
        ConformityKind::BayesPosterior => {
            let mu = match params.mu {
                Some(mu) => mu,
                None if calibration.is_empty() => {
                    return Err(param("Bayes conformity needs a prior mean or a calibration prefix"))
                }
                None => calibration.iter().sum::<f64>() / calibration.len() as f64,
            };
            ConformityMeasure::BayesPosterior {
                mu,
                tau2: params.tau2,
                a: params.a,
                b: params.b,
            }
        }
    };
    measure.validate()?;
    Ok(measure)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum GppKind {
    NoBias,
    Iid,
    Inid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stat {
    Mean,
    Median,
}

impl Stat {
    fn of(self, table: &CountMinTable) -> Result<f64> {
        let eedf = Eedf::from_table(table)?;
        Ok(match self {
            Stat::Mean => eedf.mean(),
            Stat::Median => eedf.median(),
        })
    }
}

#[derive(Debug, Clone)]
enum Engine {
    Sht(ShtarkovState),
    ShtRep { model: ShtarkovModel, rep: RepSet },
    Gpp { kind: GppKind, rho: f64, delta2: f64, rep: RepSet },
    Dpp(DppState),
    DppRep { mass: f64, grid: Option<f64>, rep: RepSet },
    Sketch { stat: Stat, table: CountMinTable },
    SketchRep { stat: Stat, empty: CountMinTable, rep: RepSet, clamps: Diagnostics },
    Conf { measure: ConformityMeasure, alpha: f64, grid_points: usize, rep: RepSet },
}

/// A configured benchmark method.
#[derive(Debug, Clone)]
pub struct MethodPredictor {
    method: Method,
    seq: Sequencer,
    engine: Engine,
}

/// Builds `method`. `seed` drives the sketch hash draws and nothing else.
pub fn build_predictor(method: Method, params: &MethodParams, calibration: &[f64], seed: u64) -> Result<MethodPredictor> {
    let rep = || RepSet::new(params.repset.size);
    let sketch = || -> Result<CountMinTable> {
        let s = &params.sketch;
        let range = IntervalMap::from_calibration(calibration, s.k_int)?;
        CountMinTable::with_range(HashFamily::sample(s.d, s.v, s.k_int, seed)?, range)
    };
    let gpp = |kind| -> Result<Engine> {
        let GppParams { rho, delta } = params.gpp;
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(param("GPP delta must be positive"));
        }
        if !(rho.abs() < 1.0) {
            return Err(param("GPP rho must lie in (-1, 1)"));
        }
        Ok(Engine::Gpp { kind, rho, delta2: delta * delta, rep: rep()? })
    };
    let engine = match method {
        Method::Sht => Engine::Sht(ShtarkovState::new(&params.shtarkov)?),
        Method::ShtRep => {
            if matches!(params.shtarkov, ShtarkovModel::Binomial { .. }) {
                return Err(param("binomial Shtarkov needs integer tokens and has no representative-set form"));
            }
            ShtarkovState::new(&params.shtarkov)?;
            Engine::ShtRep { model: params.shtarkov, rep: rep()? }
        }
        Method::GppNoRb => gpp(GppKind::NoBias)?,
        Method::GppRb => gpp(GppKind::Iid)?,
        Method::GppInid => gpp(GppKind::Inid)?,
        Method::Dpp => Engine::Dpp(DppState::new(params.dpp.mass, params.dpp.grid)?),
        Method::DppRep => {
            DppState::new(params.dpp.mass, params.dpp.grid)?;
            Engine::DppRep { mass: params.dpp.mass, grid: params.dpp.grid, rep: rep()? }
        }
        Method::Mean => Engine::Sketch { stat: Stat::Mean, table: sketch()? },
        Method::Med => Engine::Sketch { stat: Stat::Median, table: sketch()? },
        Method::MeanRep => Engine::SketchRep {
            stat: Stat::Mean,
            empty: sketch()?,
            rep: rep()?,
            clamps: Diagnostics::default(),
        },
        Method::MedRep => Engine::SketchRep {
            stat: Stat::Median,
            empty: sketch()?,
            rep: rep()?,
            clamps: Diagnostics::default(),
        },
        Method::Conf => {
            let c = &params.conformal;
            if !(c.alpha > 0.0 && c.alpha < 1.0) {
                return Err(param("conformal alpha must lie in (0, 1)"));
            }
            if c.grid_points == 0 {
                return Err(param("conformal grid needs at least one point"));
            }
            Engine::Conf {
                measure: resolve_conformity(c, calibration)?,
                alpha: c.alpha,
                grid_points: c.grid_points,
                rep: rep()?,
            }
        }
    };
    Ok(MethodPredictor {
        method,
        seq: Sequencer::default(),
        engine,
    })
}

fn need_centers(rep: &RepSet, min: usize) -> Result<&[f64]> {
    if rep.len() < min {
        return Err(not_ready(format!(
            "representative set has {} centers, need {min}",
            rep.len()
        )));
    }
    Ok(rep.centers())
}

impl MethodPredictor {
    pub fn method(&self) -> Method {
        self.method
    }

    /// Current representative-set centers, for methods that keep one.
    pub fn centers(&self) -> Option<&[f64]> {
        match &self.engine {
            Engine::ShtRep { rep, .. }
            | Engine::Gpp { rep, .. }
            | Engine::DppRep { rep, .. }
            | Engine::SketchRep { rep, .. }
            | Engine::Conf { rep, .. } => Some(rep.centers()),
            _ => None,
        }
    }

    fn point(&self) -> Result<(f64, Option<(f64, f64)>)> {
        let p = match &self.engine {
            Engine::Sht(s) => s.predict()?,
            Engine::ShtRep { model, rep } => {
                let centers = need_centers(rep, 1)?;
                let mut s = ShtarkovState::new(model)?;
                for (i, &c) in centers.iter().enumerate() {
                    s.push(i as u64 + 1, c)?;
                }
                s.predict()?
            }
            Engine::Gpp { kind, rho, delta2, rep } => {
                let centers = need_centers(rep, 1)?;
                let ws = cached_workspace(centers.len(), *rho, *delta2)?;
                match kind {
                    GppKind::NoBias => ws.nobias_point(centers)?,
                    GppKind::Iid => ws.iid_point(centers)?,
                    GppKind::Inid => ws.inid_point(centers)?,
                }
            }
            Engine::Dpp(s) => s.predict()?,
            Engine::DppRep { mass, grid, rep } => {
                let centers = need_centers(rep, 1)?;
                let mut s = DppState::new(*mass, *grid)?;
                for &c in centers {
                    s.update(c);
                }
                s.predict()?
            }
            Engine::Sketch { stat, table } => stat.of(table)?,
            Engine::SketchRep { stat, empty, rep, .. } => {
                let centers = need_centers(rep, 1)?;
                let mut table = empty.clone();
                for &c in centers {
                    table.update(c)?;
                }
                stat.of(&table)?
            }
            Engine::Conf { measure, alpha, grid_points, rep } => {
                let centers = need_centers(rep, 2)?;
                let grid = default_grid(centers, *grid_points);
                let (lo, hi) = conformal_hull(centers, measure, *alpha, &grid)?;
                return Ok((0.5 * (lo + hi), Some((lo, hi))));
            }
        };
        Ok((p, None))
    }
}

impl SequentialPredictor for MethodPredictor {
    fn id(&self) -> PredictorId {
        self.method.id()
    }

    fn update(&mut self, obs: Observation) -> Result<()> {
        self.seq.check(&obs)?;
        let y = obs.value();
        match &mut self.engine {
            Engine::Sht(s) => s.push(obs.index(), y)?,
            Engine::Dpp(s) => s.update(y),
            Engine::Sketch { table, .. } => {
                table.update(y)?;
            }
            Engine::SketchRep { empty, rep, clamps, .. } => {
                let range = empty.range().ok_or_else(|| param("sketch has no range"))?;
                match range.locate(y).1 {
                    Placement::ClampedLow => clamps.clamped_low += 1,
                    Placement::ClampedHigh => clamps.clamped_high += 1,
                    Placement::Inside => {}
                }
                rep.update(y);
            }
            Engine::ShtRep { rep, .. }
            | Engine::Gpp { rep, .. }
            | Engine::DppRep { rep, .. }
            | Engine::Conf { rep, .. } => rep.update(y),
        }
        self.seq.advance();
        Ok(())
    }

    fn predict(&self) -> Result<Prediction> {
        let target = self.seq.target();
        let (point, interval) = self.point()?;
        if !point.is_finite() {
            return Err(Error::Numerical(format!("{} produced a non-finite prediction", self.method)));
        }
        match interval {
            Some((lo, hi)) => Prediction::with_interval(target, point, lo, hi),
            None => Prediction::point(target, point),
        }
    }

    fn consumed(&self) -> u64 {
        self.seq.consumed()
    }

    fn diagnostics(&self) -> Diagnostics {
        match &self.engine {
            Engine::Sketch { table, .. } => {
                let (clamped_low, clamped_high) = table.clamp_counts();
                Diagnostics { clamped_low, clamped_high }
            }
            Engine::SketchRep { clamps, .. } => *clamps,
            _ => Diagnostics::default(),
        }
    }
}
