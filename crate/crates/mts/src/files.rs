//! The `StateFile` JSON container shared by every artifact the CLI reads or writes.
//!
//! ```json
//! {
//!   "format_version": "1",
//!   "n": 2,
//!   "kind": "state",
//!   "data": [[1.0, 0.0], [0.0, 0.0], ...],
//!   "metadata": { "seed": 7, "tolerances": {...}, "provenance": "mts gen pure" }
//! }
//! ```
//!
//! States store the `n² × n²` matrix and vectors the `n²` amplitudes, both as
//! row-major `[re, im]` pairs with the tensor index `(i, k) ↦ i·n + k`.
//! Certificates, reports and traces store their structured form in `data`.
//! Numbers are written in shortest round-trip form and parsed exactly, so a
//! load/save cycle reproduces every `f64` bit for bit.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use mts_core::descent::{DescentTrace, HuntReport, TrialOutcome};
use mts_core::extremality::Certificate;
use mts_core::margstates::StateElement;
use mts_core::{Matrix, Tolerances, C64};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid state file: {0}")]
    Format(String),
    #[error("invalid contents: {0}")]
    Invalid(#[from] mts_core::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    State,
    Vector,
    Certificate,
    Report,
    Trace,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::State => "state",
            Kind::Vector => "vector",
            Kind::Certificate => "certificate",
            Kind::Report => "report",
            Kind::Trace => "trace",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub seed: Option<u64>,
    pub tolerances: Option<Tolerances>,
    pub provenance: String,
}

impl Metadata {
    pub fn new(provenance: impl Into<String>) -> Self {
        Metadata {
            provenance: provenance.into(),
            ..Default::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_tolerances(mut self, tols: Tolerances) -> Self {
        self.tolerances = Some(tols);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFile {
    pub format_version: String,
    pub n: usize,
    pub kind: Kind,
    pub data: Value,
    pub metadata: Metadata,
}

fn pairs(values: &[C64]) -> Value {
    Value::Array(
        values
            .iter()
            .map(|z| serde_json::json!([z.re, z.im]))
            .collect(),
    )
}

fn unpairs(data: &Value, len: usize) -> Result<Vec<C64>, FileError> {
    let arr = data
        .as_array()
        .ok_or_else(|| FileError::Format("data must be an array of [re, im] pairs".into()))?;
    if arr.len() != len {
        return Err(FileError::Format(format!(
            "expected {len} entries, found {}",
            arr.len()
        )));
    }
    arr.iter()
        .map(|pair| {
            let [re, im]: [f64; 2] = serde_json::from_value(pair.clone())
                .map_err(|_| FileError::Format("entries must be [re, im] number pairs".into()))?;
            Ok(C64::new(re, im))
        })
        .collect()
}

impl StateFile {
    fn build(n: usize, kind: Kind, data: Value, metadata: Metadata) -> Self {
        StateFile {
            format_version: FORMAT_VERSION.to_string(),
            n,
            kind,
            data,
            metadata,
        }
    }

    pub fn from_state(h: &StateElement, metadata: Metadata) -> Self {
        Self::build(h.n(), Kind::State, pairs(h.matrix().as_slice()), metadata)
    }

    pub fn from_vector(n: usize, xi: &[C64], metadata: Metadata) -> Self {
        Self::build(n, Kind::Vector, pairs(xi), metadata)
    }

    pub fn from_certificate(cert: &Certificate, metadata: Metadata) -> Result<Self, FileError> {
        Ok(Self::build(cert.n, Kind::Certificate, serde_json::to_value(cert)?, metadata))
    }

    pub fn from_report(report: &HuntReport, metadata: Metadata) -> Result<Self, FileError> {
        Ok(Self::build(report.n, Kind::Report, serde_json::to_value(report)?, metadata))
    }

    pub fn from_trace(trace: &DescentTrace, metadata: Metadata) -> Result<Self, FileError> {
        let n = trace.terminal.n();
        Ok(Self::build(n, Kind::Trace, serde_json::to_value(trace)?, metadata))
    }

    fn expect_kind(&self, kind: Kind) -> Result<(), FileError> {
        if self.kind != kind {
            return Err(FileError::Format(format!(
                "expected kind {}, found {}",
                kind.as_str(),
                self.kind.as_str()
            )));
        }
        Ok(())
    }

    /// Validated state; `rank_tol` controls the positivity check.
    pub fn to_state(&self, rank_tol: f64) -> Result<StateElement, FileError> {
        self.expect_kind(Kind::State)?;
        let m = self.n * self.n;
        let h = Matrix::from_vec(m, m, unpairs(&self.data, m * m)?)?;
        Ok(StateElement::new(self.n, h, rank_tol)?)
    }

    pub fn to_vector(&self) -> Result<Vec<C64>, FileError> {
        self.expect_kind(Kind::Vector)?;
        unpairs(&self.data, self.n * self.n)
    }

    pub fn to_certificate(&self) -> Result<Certificate, FileError> {
        self.expect_kind(Kind::Certificate)?;
        Ok(serde_json::from_value(self.data.clone())?)
    }

    pub fn to_report(&self) -> Result<HuntReport, FileError> {
        self.expect_kind(Kind::Report)?;
        let report: HuntReport = serde_json::from_value(self.data.clone())?;
        validate_report(&report).map_err(FileError::Format)?;
        Ok(report)
    }

    pub fn to_trace(&self) -> Result<DescentTrace, FileError> {
        self.expect_kind(Kind::Trace)?;
        Ok(serde_json::from_value(self.data.clone())?)
    }

    fn check_header(&self) -> Result<(), FileError> {
        if self.format_version != FORMAT_VERSION {
            return Err(FileError::Format(format!(
                "unsupported format_version {:?}",
                self.format_version
            )));
        }
        if self.n < 2 {
            return Err(FileError::Format("n must be at least 2".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, FileError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, FileError> {
        let file: StateFile = serde_json::from_str(text)?;
        file.check_header()?;
        Ok(file)
    }

    pub fn read(path: &Path) -> Result<Self, FileError> {
        let text = fs::read_to_string(path).map_err(|source| FileError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn write(&self, path: &Path) -> Result<(), FileError> {
        fs::write(path, self.to_json()?).map_err(|source| FileError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Consistency of the aggregate counts with the per-trial records.
pub fn validate_report(r: &HuntReport) -> Result<(), String> {
    if r.trial_records.len() != r.trials {
        return Err(format!(
            "{} trial records for {} trials",
            r.trial_records.len(),
            r.trials
        ));
    }
    if r.trial_records.iter().enumerate().any(|(i, t)| t.trial != i) {
        return Err("trial records are not ordered by index".into());
    }
    let count = |o: TrialOutcome| r.trial_records.iter().filter(|t| t.outcome == o).count();
    if count(TrialOutcome::Pure) != r.pure_count
        || count(TrialOutcome::Candidate) != r.candidate_count
        || count(TrialOutcome::Failure) != r.failure_count
    {
        return Err("outcome counts do not match trial records".into());
    }
    if r.pure_count + r.candidate_count + r.failure_count != r.trials {
        return Err("outcome counts do not sum to the number of trials".into());
    }
    if r.candidates.len() != r.candidate_count {
        return Err("candidate list does not match candidate_count".into());
    }
    let hist: usize = r.rank_histogram.values().sum();
    if hist != r.pure_count + r.candidate_count {
        return Err("rank histogram does not cover every extreme point".into());
    }
    if r.reverified_candidate_count != r.candidates.iter().filter(|c| c.reverified).count() {
        return Err("reverified count does not match candidates".into());
    }
    Ok(())
}
