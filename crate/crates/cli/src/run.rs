use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::anyhow;
use serde::{Deserialize, Serialize};
use streamcast::conformal::ConformityMeasure;
use streamcast::harness::{burn_in_len, method_seed, run_all, ReferenceRun, SensitivityRun, REFERENCE_RUNS};
use streamcast::methods::resolve_conformity;
use streamcast::{Error, Method};

use crate::config::RunConfig;
use crate::format::num;
use crate::ingest::ingest_csv;

/// Failure classes, each with its own exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Config,
    Data,
    Numeric,
}

impl Kind {
    pub fn exit_code(self) -> i32 {
        match self {
            Kind::Config => 1,
            Kind::Data => 2,
            Kind::Numeric => 3,
        }
    }
}

#[derive(Debug)]
pub struct Failure {
    pub kind: Kind,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn config(error: anyhow::Error) -> Self {
        Self { kind: Kind::Config, error }
    }

    pub fn data(error: anyhow::Error) -> Self {
        Self { kind: Kind::Data, error }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let kind = match e.root() {
            Error::Config(_) | Error::Parameter(_) => Kind::Config,
            Error::Ingestion { .. } | Error::Sequencing { .. } => Kind::Data,
            _ => Kind::Numeric,
        };
        Self { kind, error: e.into() }
    }
}

fn io(e: std::io::Error, path: &Path) -> Failure {
    Failure::data(anyhow!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, Serialize)]
pub struct InputSummary {
    pub rows_read: usize,
    pub truncated: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodSummary {
    pub method: Method,
    pub label: &'static str,
    pub seed: u64,
    pub noise_seeds: Vec<u64>,
    pub cpe: f64,
    pub sigma_rv: f64,
    pub taus: Vec<f64>,
    pub cpes: Vec<f64>,
    pub clamped_low: u64,
    pub clamped_high: u64,
    pub perturbed_clamped_low: u64,
    pub perturbed_clamped_high: u64,
}

/// Everything needed to reproduce a run. Contains no timestamps.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub version: &'static str,
    pub config: RunConfig,
    pub input: InputSummary,
    pub burn_in: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conformity: Option<ConformityMeasure>,
    pub methods: Vec<MethodSummary>,
    pub reference_runs: &'static [ReferenceRun],
}

#[derive(Debug, Deserialize)]
struct ManifestHead {
    config: RunConfig,
}

pub fn read_manifest_config(path: &Path) -> Result<RunConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::config(anyhow!("{}: {e}", path.display())))?;
    let head: ManifestHead =
        serde_json::from_str(&text).map_err(|e| Failure::config(anyhow!("manifest {}: {e}", path.display())))?;
    Ok(head.config)
}

fn write_trace(dir: &Path, run: &SensitivityRun) -> Result<(), Failure> {
    let path = dir.join("cpe_trace.csv");
    let mut out = String::from("index,y,yhat,abs_err,cpe\n");
    for r in &run.base.rows {
        out.push_str(&format!("{},{},{},{},{}\n", r.index, num(r.y), num(r.yhat), num(r.abs_err), num(r.cpe)));
    }
    fs::write(&path, out).map_err(|e| io(e, &path))
}

fn write_curve(dir: &Path, run: &SensitivityRun) -> Result<(), Failure> {
    let path = dir.join("sensitivity.csv");
    let mut out = String::from("tau,cpe\n");
    for (t, c) in run.curve.taus.iter().zip(&run.curve.cpes) {
        out.push_str(&format!("{},{}\n", num(*t), num(*c)));
    }
    fs::write(&path, out).map_err(|e| io(e, &path))
}

/// Ingests, runs every configured method and writes one directory of CSVs
/// per method plus `manifest.json`.
pub fn execute(cfg: &RunConfig) -> Result<Manifest, Failure> {
    cfg.validate().map_err(Failure::config)?;
    let data = ingest_csv(&cfg.input, &cfg.column, cfg.max_rows).map_err(Failure::data)?;
    let y = &data.values;
    let harness = cfg.harness();
    let burn_in = burn_in_len(y.len(), harness.burnin_frac).map_err(|e| Failure::data(e.into()))?;
    let conformity = if cfg.methods.contains(&Method::Conf) {
        Some(resolve_conformity(&cfg.params.conformal, &y[..burn_in])?)
    } else {
        None
    };

    let runs = run_all(&cfg.methods, &cfg.params, y, &harness)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

    fs::create_dir_all(&cfg.output).map_err(|e| io(e, &cfg.output))?;
    let mut methods = Vec::with_capacity(runs.len());
    for run in &runs {
        let m = run.base.method;
        let dir = cfg.output.join(m.label());
        fs::create_dir_all(&dir).map_err(|e| io(e, &dir))?;
        write_trace(&dir, run)?;
        write_curve(&dir, run)?;
        methods.push(MethodSummary {
            method: m,
            label: m.label(),
            seed: method_seed(cfg.seed, m),
            noise_seeds: (1..run.curve.taus.len() as u64).map(|k| cfg.seed.wrapping_add(k)).collect(),
            cpe: run.base.cpe,
            sigma_rv: run.base.sigma_rv,
            taus: run.curve.taus.clone(),
            cpes: run.curve.cpes.clone(),
            clamped_low: run.base.diagnostics.clamped_low,
            clamped_high: run.base.diagnostics.clamped_high,
            perturbed_clamped_low: run.perturbed_diagnostics.clamped_low,
            perturbed_clamped_high: run.perturbed_diagnostics.clamped_high,
        });
    }

    let manifest = Manifest {
        version: streamcast::VERSION,
        config: cfg.clone(),
        input: InputSummary {
            rows_read: data.rows_read,
            truncated: data.truncated,
        },
        burn_in,
        conformity,
        methods,
        reference_runs: &REFERENCE_RUNS,
    };
    let path = cfg.output.join("manifest.json");
    let mut file = fs::File::create(&path).map_err(|e| io(e, &path))?;
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Failure::data(e.into()))?;
    writeln!(file, "{json}").map_err(|e| io(e, &path))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_kinds_map_to_exit_codes() {
        let wrapped = Error::Run {
            method: "GPPRB".into(),
            index: 9,
            source: Box::new(Error::Numerical("singular".into())),
        };
        assert_eq!(Failure::from(wrapped).kind.exit_code(), 3);
        assert_eq!(Failure::from(Error::Degenerate("x".into())).kind, Kind::Numeric);
        assert_eq!(Failure::from(Error::Parameter("x".into())).kind.exit_code(), 1);
        assert_eq!(Failure::from(Error::Sequencing { expected: 1, got: 3 }).kind.exit_code(), 2);
    }
}
