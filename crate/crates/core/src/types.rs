//! Stream tokens, predictions and the contract every predictor implements.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single stream token. Construction rejects non-finite values and index 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Observation {
    index: u64,
    value: f64,
}

impl Observation {
    pub fn new(index: u64, value: f64) -> Result<Self> {
        if index == 0 {
            return Err(Error::Ingestion {
                index,
                reason: "indices are 1-based".into(),
            });
        }
        if !value.is_finite() {
            return Err(Error::Ingestion {
                index,
                reason: format!("non-finite value {value}"),
            });
        }
        Ok(Self { index, value })
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn value(&self) -> f64 {
        self.value
    }
}

/// Turns a slice of raw values into observations indexed 1..=n.
pub fn observations(values: &[f64]) -> Result<Vec<Observation>> {
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| Observation::new(i as u64 + 1, v))
        .collect()
}

/// Point forecast for `target_index`, optionally with an interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prediction {
    pub target_index: u64,
    pub point: f64,
    pub interval: Option<(f64, f64)>,
}

impl Prediction {
    pub fn point(target_index: u64, point: f64) -> Result<Self> {
        Self::build(target_index, point, None)
    }

    pub fn with_interval(target_index: u64, point: f64, lower: f64, upper: f64) -> Result<Self> {
        Self::build(target_index, point, Some((lower, upper)))
    }

    fn build(target_index: u64, point: f64, interval: Option<(f64, f64)>) -> Result<Self> {
        if !point.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite prediction for token {target_index}"
            )));
        }
        if let Some((lo, hi)) = interval {
            if !(lo <= hi) {
                return Err(Error::Numerical(format!(
                    "inverted interval ({lo}, {hi}) for token {target_index}"
                )));
            }
        }
        Ok(Self {
            target_index,
            point,
            interval,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Shtarkov,
    GppNobias,
    GppIid,
    GppInid,
    Dpp,
    CmMean,
    CmMedian,
    Conformal,
}

/// Identifies a predictor configuration by family, variant tag and whether it
/// runs on the representative set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct PredictorId {
    pub family: Family,
    pub variant: &'static str,
    pub uses_repset: bool,
}

impl PredictorId {
    /// Validates a combination against the twelve legal methods.
    pub fn new(family: Family, variant: &str, uses_repset: bool) -> Result<Self> {
        Method::ALL
            .iter()
            .map(|m| m.id())
            .find(|id| id.family == family && id.variant == variant && id.uses_repset == uses_repset)
            .ok_or_else(|| {
                Error::Parameter(format!(
                    "no method with family {family:?}, variant {variant:?}, repset {uses_repset}"
                ))
            })
    }

    pub fn method(&self) -> Method {
        *Method::ALL
            .iter()
            .find(|m| m.id() == *self)
            .expect("PredictorId values are only built from the method table")
    }
}

/// The twelve benchmark methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sht,
    ShtRep,
    GppNoRb,
    GppRb,
    GppInid,
    Dpp,
    DppRep,
    Mean,
    MeanRep,
    Med,
    MedRep,
    Conf,
}

impl Method {
    pub const ALL: [Method; 12] = [
        Method::Sht,
        Method::ShtRep,
        Method::GppNoRb,
        Method::GppRb,
        Method::GppInid,
        Method::Dpp,
        Method::DppRep,
        Method::Mean,
        Method::MeanRep,
        Method::Med,
        Method::MedRep,
        Method::Conf,
    ];

    pub fn id(self) -> PredictorId {
        use Family::*;
        let (family, variant, uses_repset) = match self {
            Method::Sht => (Shtarkov, "normal", false),
            Method::ShtRep => (Shtarkov, "normal", true),
            Method::GppNoRb => (GppNobias, "ar1", true),
            Method::GppRb => (GppIid, "ar1", true),
            Method::GppInid => (GppInid, "ar1", true),
            Method::Dpp => (Dpp, "uniform-base", false),
            Method::DppRep => (Dpp, "uniform-base", true),
            Method::Mean => (CmMean, "eedf", false),
            Method::MeanRep => (CmMean, "eedf", true),
            Method::Med => (CmMedian, "eedf", false),
            Method::MedRep => (CmMedian, "eedf", true),
            Method::Conf => (Conformal, "bayes-posterior", true),
        };
        PredictorId {
            family,
            variant,
            uses_repset,
        }
    }

    /// Short label used in output paths.
    pub fn label(self) -> &'static str {
        match self {
            Method::Sht => "Sht",
            Method::ShtRep => "Sht_rep",
            Method::GppNoRb => "GPPnoRB",
            Method::GppRb => "GPPRB",
            Method::GppInid => "GPP_INID",
            Method::Dpp => "DPP",
            Method::DppRep => "DPP_rep",
            Method::Mean => "Mean",
            Method::MeanRep => "Mean_rep",
            Method::Med => "Med",
            Method::MedRep => "Med_rep",
            Method::Conf => "Conf",
        }
    }

    /// Whether per-token cost stays bounded without a representative set.
    pub fn is_one_pass(self) -> bool {
        !self.id().uses_repset
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Method::ALL
            .iter()
            .copied()
            .find(|m| {
                m.label().to_ascii_lowercase() == key
                    || serde_plain_name(*m) == key
            })
            .ok_or_else(|| Error::Parameter(format!("unknown method {s:?}")))
    }
}

fn serde_plain_name(m: Method) -> &'static str {
    match m {
        Method::Sht => "sht",
        Method::ShtRep => "sht_rep",
        Method::GppNoRb => "gpp_no_rb",
        Method::GppRb => "gpp_rb",
        Method::GppInid => "gpp_inid",
        Method::Dpp => "dpp",
        Method::DppRep => "dpp_rep",
        Method::Mean => "mean",
        Method::MeanRep => "mean_rep",
        Method::Med => "med",
        Method::MedRep => "med_rep",
        Method::Conf => "conf",
    }
}

/// Counters a predictor may expose for run manifests.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Diagnostics {
    pub clamped_low: u64,
    pub clamped_high: u64,
}

impl Diagnostics {
    pub fn merge(self, other: Diagnostics) -> Diagnostics {
        Diagnostics {
            clamped_low: self.clamped_low + other.clamped_low,
            clamped_high: self.clamped_high + other.clamped_high,
        }
    }
}

/// One-pass update/predict contract.
///
/// `update` must receive tokens with consecutive indices starting at 1.
/// `predict` never mutates state and forecasts token `consumed() + 1`.
pub trait SequentialPredictor: Send {
    fn id(&self) -> PredictorId;
    fn update(&mut self, obs: Observation) -> Result<()>;
    fn predict(&self) -> Result<Prediction>;
    fn consumed(&self) -> u64;

    fn diagnostics(&self) -> Diagnostics {
        Diagnostics::default()
    }
}

/// Tracks the next expected index for a predictor.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Sequencer {
    consumed: u64,
}

impl Sequencer {
    pub fn check(&self, obs: &Observation) -> Result<()> {
        let expected = self.consumed + 1;
        if obs.index() != expected {
            return Err(Error::Sequencing {
                expected,
                got: obs.index(),
            });
        }
        Ok(())
    }

    pub fn advance(&mut self) {
        self.consumed += 1;
    }

    pub fn consumed(&self) -> u64 {
        self.consumed
    }

    pub fn target(&self) -> u64 {
        self.consumed + 1
    }
}
