//! Patient records: parsing, reference-range evaluation, consequence closure,
//! merging into the graph, and synthetic cohorts with planted ground truth.

mod augment;
mod evaluate;
pub mod synth;
mod tables;

use serde::{Deserialize, Serialize};

pub use augment::{augment_graph, evaluate_patient, AugmentReport, AugmentedGraph, EvaluatedPatient, GraphIndex};
pub use evaluate::{
    aggregate_levels, consequence_closure, evaluate_measurement, select_range, Consequence, EvaluatedFinding,
    NominalLevel,
};
pub use synth::{generate_synthetic_cohort, SynthConfig, SynthLedger, SynthOutput};
pub use tables::{parse_patient_tables, read_patient_tables};

use crate::graph::Sex;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{table}: missing column `{column}`")]
    MissingColumn { table: &'static str, column: &'static str },
    #[error("{table}: line {line}: `{value}` is not a finite number")]
    BadNumeric { table: &'static str, line: u64, value: String },
    #[error("{table}: line {line}: bad value `{value}` in column `{column}`")]
    BadValue {
        table: &'static str,
        line: u64,
        column: &'static str,
        value: String,
    },
    #[error("unit mismatch for `{parameter}`: measured in `{measured}`, range in `{expected}`")]
    UnitMismatch {
        parameter: String,
        measured: String,
        expected: String,
    },
    #[error("no reference range for `{parameter}` applies to a {sex} patient aged {age}")]
    NoApplicableRange { parameter: String, sex: &'static str, age: f64 },
    #[error("invalid synthetic cohort config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabMeasurement {
    pub loinc: String,
    pub value: f64,
    pub unit: String,
    pub timestamp: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub id: String,
    pub age: f64,
    pub sex: Sex,
    /// ICD-10 codes, kept as opaque strings.
    pub diagnoses: Vec<String>,
    pub measurements: Vec<LabMeasurement>,
}
