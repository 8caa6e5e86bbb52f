//! Case ingestion: MATPOWER `.m` subset, canonical JSON, and partition files.
//!
//! Everything stored in a [`RawCase`] is already per-unit on `base_mva`
//! with angles in radians. The canonical JSON form is a direct mirror of
//! these structs, so it carries the converted values too.

mod matpower;
mod partition;
mod validate;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use matpower::{parse_matpower, parse_matpower_bytes};
pub use partition::{parse_partition, PartitionSpec};
pub use validate::validate_case;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum BusType {
    Ref,
    Pq,
    Pv,
}

impl fmt::Display for BusType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BusType::Ref => "REF",
            BusType::Pq => "PQ",
            BusType::Pv => "PV",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    On,
    Off,
}

impl Status {
    pub fn is_on(self) -> bool {
        self == Status::On
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BusRecord {
    pub id: usize,
    pub bus_type: BusType,
    /// Active load, p.u.
    pub p_load: f64,
    /// Reactive load, p.u.
    pub q_load: f64,
    /// Shunt conductance at 1 p.u. voltage, p.u.
    pub gs: f64,
    /// Shunt susceptance at 1 p.u. voltage, p.u.
    pub bs: f64,
    pub v_init: f64,
    /// Radians.
    pub theta_init: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchRecord {
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
    /// Total line charging susceptance, p.u.
    pub b_charge: f64,
    /// Off-nominal turns ratio; 0 means 1.0.
    pub tap: f64,
    /// Phase shift, radians.
    pub shift: f64,
    pub status: Status,
}

impl BranchRecord {
    pub fn ratio(&self) -> f64 {
        if self.tap == 0.0 {
            1.0
        } else {
            self.tap
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenRecord {
    pub bus: usize,
    /// p.u.
    pub p_gen: f64,
    /// p.u.
    pub q_gen: f64,
    pub v_set: f64,
    pub status: Status,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawCase {
    pub base_mva: f64,
    pub buses: Vec<BusRecord>,
    pub gens: Vec<GenRecord>,
    pub branches: Vec<BranchRecord>,
}

impl RawCase {
    pub fn n_bus(&self) -> usize {
        self.buses.len()
    }

    /// Position of a bus id in `buses`.
    pub fn bus_index(&self, id: usize) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn bus_ids(&self) -> Vec<usize> {
        self.buses.iter().map(|b| b.id).collect()
    }

    pub fn from_json(text: &str) -> Result<RawCase, CaseError> {
        let case: RawCase = serde_json::from_str(text)?;
        case.validated()
    }

    /// Passes the case through when [`validate_case`] finds nothing.
    pub fn validated(self) -> Result<RawCase, CaseError> {
        let diags = validate_case(&self);
        if diags.is_empty() {
            Ok(self)
        } else {
            Err(CaseError::Validation(diags))
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("RawCase serializes")
    }
}

/// Where a diagnostic points.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "at")]
pub enum Locus {
    Case,
    Bus(usize),
    /// Index into `RawCase::branches`.
    Branch(usize),
    /// Index into `RawCase::gens`.
    Gen(usize),
    Region(usize),
}

impl fmt::Display for Locus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Locus::Case => write!(f, "case"),
            Locus::Bus(id) => write!(f, "bus {id}"),
            Locus::Branch(i) => write!(f, "branch #{i}"),
            Locus::Gen(i) => write!(f, "gen #{i}"),
            Locus::Region(r) => write!(f, "region {r}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub rule: String,
    pub locus: Locus,
    pub message: String,
}

impl Diagnostic {
    pub(crate) fn new(rule: &str, locus: Locus, message: impl Into<String>) -> Self {
        Diagnostic {
            rule: rule.to_string(),
            locus,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", self.rule, self.locus, self.message)
    }
}

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("syntax error on line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing required section `{0}`")]
    MissingSection(&'static str),
    #[error("validation failed: {}", join_diagnostics(.0))]
    Validation(Vec<Diagnostic>),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

fn join_diagnostics(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

fn read_text(path: &Path) -> Result<String, CaseError> {
    std::fs::read_to_string(path).map_err(|source| CaseError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Loads a case file, choosing the format from the extension (`.json` is
/// canonical JSON, anything else is parsed as MATPOWER).
pub fn load_case(path: impl AsRef<Path>) -> Result<RawCase, CaseError> {
    let path = path.as_ref();
    let text = read_text(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => RawCase::from_json(&text),
        _ => parse_matpower(&text),
    }
}

pub fn load_partition(path: impl AsRef<Path>, case: &RawCase) -> Result<PartitionSpec, CaseError> {
    let text = read_text(path.as_ref())?;
    parse_partition(&text, case)
}
