//! Versioned JSON records for suite runs. Complex numbers are written as
//! `{"re": …, "im": …}`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::identities::{CheckReport, Sample, SamplePlan};

pub const SCHEMA_VERSION: &str = "1.0";
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JsonComplex {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for JsonComplex {
    fn from(c: Complex64) -> Self {
        Self { re: c.re, im: c.im }
    }
}

impl From<JsonComplex> for Complex64 {
    fn from(c: JsonComplex) -> Self {
        Complex64::new(c.re, c.im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub index: usize,
    pub n: usize,
    pub tau: JsonComplex,
    pub hbar: JsonComplex,
    pub hbar2: JsonComplex,
    pub z: JsonComplex,
    pub w: JsonComplex,
    pub x: JsonComplex,
    pub gamma: [i64; 2],
    pub n_tilde: usize,
    pub momenta: Vec<JsonComplex>,
    pub coupling: JsonComplex,
    pub attempts: usize,
}

impl From<&Sample> for SampleRecord {
    fn from(s: &Sample) -> Self {
        Self {
            index: s.index,
            n: s.n,
            tau: s.tau.value().into(),
            hbar: s.hbar.into(),
            hbar2: s.hbar2.into(),
            z: s.z.into(),
            w: s.w.into(),
            x: s.x.into(),
            gamma: [s.gamma.0, s.gamma.1],
            n_tilde: s.n_tilde,
            momenta: s.momenta.iter().map(|&c| c.into()).collect(),
            coupling: s.coupling.into(),
            attempts: s.attempts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub id: String,
    pub anchor: String,
    pub samples_run: usize,
    pub samples_dropped: usize,
    pub ranks: Vec<usize>,
    pub max_residual: f64,
    pub mean_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub worst_sample: Option<SampleRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl From<&CheckReport> for CheckRecord {
    fn from(r: &CheckReport) -> Self {
        Self {
            id: r.id.clone(),
            anchor: r.anchor.clone(),
            samples_run: r.samples_run,
            samples_dropped: r.samples_dropped,
            ranks: r.ranks.clone(),
            max_residual: r.max_residual,
            mean_residual: r.mean_residual,
            tolerance: r.tolerance,
            pass: r.pass,
            worst_sample: r.worst_sample.as_ref().map(SampleRecord::from),
            note: r.note.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub seed: u64,
    pub sample_count: usize,
    pub n_list: Vec<usize>,
    pub tau_list: Vec<JsonComplex>,
    pub pole_guard: f64,
    pub ids: Option<Vec<String>>,
    pub tolerance_overrides: BTreeMap<String, f64>,
}

impl ConfigEcho {
    pub fn new(plan: &SamplePlan, ids: Option<&[String]>, overrides: &BTreeMap<String, f64>) -> Self {
        Self {
            seed: plan.seed,
            sample_count: plan.count,
            n_list: plan.n_list.clone(),
            tau_list: plan.tau_list.iter().map(|t| t.value().into()).collect(),
            pole_guard: plan.pole_guard,
            ids: ids.map(<[String]>::to_vec),
            tolerance_overrides: overrides.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub schema_version: String,
    pub toolkit_version: String,
    pub config: ConfigEcho,
    pub checks: Vec<CheckRecord>,
    pub pass: bool,
    pub wall_time_s: f64,
}

impl SuiteReport {
    pub fn new(config: ConfigEcho, reports: &[CheckReport], wall_time_s: f64) -> Self {
        let checks: Vec<CheckRecord> = reports.iter().map(CheckRecord::from).collect();
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            toolkit_version: TOOLKIT_VERSION.to_string(),
            config,
            pass: checks.iter().all(|c| c.pass),
            checks,
            wall_time_s,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(format!("serializing report: {e}")))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(format!("parsing report: {e}")))
    }

    /// JSON with the wall time zeroed, for reproducibility comparisons.
    pub fn to_json_without_wall_time(&self) -> Result<String> {
        Self {
            wall_time_s: 0.0,
            ..self.clone()
        }
        .to_json()
    }
}

/// Runs a suite and wraps it in a [`SuiteReport`].
pub fn run_suite_report(
    ids: Option<&[String]>,
    plan: &SamplePlan,
    overrides: &BTreeMap<String, f64>,
) -> Result<SuiteReport> {
    let start = std::time::Instant::now();
    let reports = crate::identities::run_suite(ids, plan, overrides)?;
    Ok(SuiteReport::new(
        ConfigEcho::new(plan, ids, overrides),
        &reports,
        start.elapsed().as_secs_f64(),
    ))
}
