//! MIMIC-flavoured CSV subset:
//!
//! * `patients`: `subject_id, anchor_age, gender`
//! * `diagnoses`: `subject_id, icd_code`
//! * `labevents`: `subject_id, loinc_code, valuenum, valueuom` (+ optional `charttime`)
//!
//! Extra columns are ignored. Diagnosis and lab rows whose subject is not in
//! the patients table are dropped.

use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use super::{IngestError, LabMeasurement, PatientRecord};
use crate::graph::Sex;

struct Table<R: Read> {
    name: &'static str,
    reader: csv::Reader<R>,
    headers: csv::StringRecord,
}

impl<R: Read> Table<R> {
    fn open(name: &'static str, input: R) -> Result<Self, IngestError> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let headers = reader.headers()?.clone();
        Ok(Table { name, reader, headers })
    }

    fn column(&self, column: &'static str) -> Result<usize, IngestError> {
        self.headers
            .iter()
            .position(|h| h == column)
            .ok_or(IngestError::MissingColumn { table: self.name, column })
    }

    fn optional_column(&self, column: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == column)
    }
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn numeric(table: &'static str, rec: &csv::StringRecord, col: usize) -> Result<f64, IngestError> {
    let raw = rec.get(col).unwrap_or("");
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(IngestError::BadNumeric {
            table,
            line: line_of(rec),
            value: raw.to_string(),
        }),
    }
}

fn parse_sex(rec: &csv::StringRecord, col: usize) -> Result<Sex, IngestError> {
    let raw = rec.get(col).unwrap_or("");
    match raw.to_ascii_lowercase().as_str() {
        "m" | "male" => Ok(Sex::Male),
        "f" | "female" => Ok(Sex::Female),
        _ => Err(IngestError::BadValue {
            table: "patients",
            line: line_of(rec),
            column: "gender",
            value: raw.to_string(),
        }),
    }
}

/// Joins the three tables by `subject_id`; records come back in patients-table order.
pub fn parse_patient_tables(
    patients: impl Read,
    diagnoses: impl Read,
    labevents: impl Read,
) -> Result<Vec<PatientRecord>, IngestError> {
    let mut records: Vec<PatientRecord> = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();

    let mut t = Table::open("patients", patients)?;
    let (id_col, age_col, sex_col) = (t.column("subject_id")?, t.column("anchor_age")?, t.column("gender")?);
    for rec in t.reader.records() {
        let rec = rec?;
        let id = rec.get(id_col).unwrap_or("").to_string();
        let age = numeric("patients", &rec, age_col)?;
        if age < 0.0 {
            return Err(IngestError::BadValue {
                table: "patients",
                line: line_of(&rec),
                column: "anchor_age",
                value: age.to_string(),
            });
        }
        let sex = parse_sex(&rec, sex_col)?;
        if by_id.contains_key(&id) {
            continue;
        }
        by_id.insert(id.clone(), records.len());
        records.push(PatientRecord {
            id,
            age,
            sex,
            diagnoses: Vec::new(),
            measurements: Vec::new(),
        });
    }

    let mut t = Table::open("diagnoses", diagnoses)?;
    let (id_col, code_col) = (t.column("subject_id")?, t.column("icd_code")?);
    for rec in t.reader.records() {
        let rec = rec?;
        let Some(&ix) = rec.get(id_col).and_then(|id| by_id.get(id)) else {
            continue;
        };
        let code = rec.get(code_col).unwrap_or("");
        if code.is_empty() {
            return Err(IngestError::BadValue {
                table: "diagnoses",
                line: line_of(&rec),
                column: "icd_code",
                value: String::new(),
            });
        }
        let diagnoses = &mut records[ix].diagnoses;
        if !diagnoses.iter().any(|d| d == code) {
            diagnoses.push(code.to_string());
        }
    }

    let mut t = Table::open("labevents", labevents)?;
    let id_col = t.column("subject_id")?;
    let loinc_col = t.column("loinc_code")?;
    let value_col = t.column("valuenum")?;
    let unit_col = t.column("valueuom")?;
    let time_col = t.optional_column("charttime");
    for rec in t.reader.records() {
        let rec = rec?;
        let value = numeric("labevents", &rec, value_col)?;
        let Some(&ix) = rec.get(id_col).and_then(|id| by_id.get(id)) else {
            continue;
        };
        records[ix].measurements.push(LabMeasurement {
            loinc: rec.get(loinc_col).unwrap_or("").to_string(),
            value,
            unit: rec.get(unit_col).unwrap_or("").to_string(),
            timestamp: time_col
                .and_then(|c| rec.get(c))
                .filter(|s| !s.is_empty())
                .map(str::to_string),
        });
    }
    Ok(records)
}

pub fn read_patient_tables(
    patients: impl AsRef<Path>,
    diagnoses: impl AsRef<Path>,
    labevents: impl AsRef<Path>,
) -> Result<Vec<PatientRecord>, IngestError> {
    parse_patient_tables(File::open(patients)?, File::open(diagnoses)?, File::open(labevents)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PATIENTS: &str = "subject_id,anchor_age,gender\n1,54,M\n2,33,F\n";
    const DIAGNOSES: &str = "subject_id,icd_code\n1,K83.1\n3,E03.9\n";
    const LABS: &str = "subject_id,loinc_code,valuenum,valueuom\n1,1975-2,2.4,mg/dl\n1,6768-6,250,U/l\n";

    #[test]
    fn joins_by_subject() {
        let recs = parse_patient_tables(PATIENTS.as_bytes(), DIAGNOSES.as_bytes(), LABS.as_bytes()).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].id, "1");
        assert_eq!(recs[0].sex, Sex::Male);
        assert_eq!(recs[0].measurements.len(), 2);
        assert_eq!(recs[0].diagnoses, ["K83.1"]);
        assert!(recs[1].measurements.is_empty() && recs[1].diagnoses.is_empty());
        assert_eq!(recs[0].measurements[1].value, 250.0);
    }

    #[test]
    fn bad_numeric_reports_line() {
        let labs = "subject_id,loinc_code,valuenum,valueuom\n1,1975-2,2.4,mg/dl\n1,6768-6,high,U/l\n";
        match parse_patient_tables(PATIENTS.as_bytes(), DIAGNOSES.as_bytes(), labs.as_bytes()) {
            Err(IngestError::BadNumeric { table, line, value }) => {
                assert_eq!((table, line, value.as_str()), ("labevents", 3, "high"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_column() {
        let labs = "subject_id,loinc_code,valueuom\n";
        assert!(matches!(
            parse_patient_tables(PATIENTS.as_bytes(), DIAGNOSES.as_bytes(), labs.as_bytes()),
            Err(IngestError::MissingColumn { table: "labevents", column: "valuenum" })
        ));
    }

    #[test]
    fn non_finite_value_rejected() {
        let labs = "subject_id,loinc_code,valuenum,valueuom\n1,1975-2,NaN,mg/dl\n";
        assert!(matches!(
            parse_patient_tables(PATIENTS.as_bytes(), DIAGNOSES.as_bytes(), labs.as_bytes()),
            Err(IngestError::BadNumeric { .. })
        ));
    }
}
