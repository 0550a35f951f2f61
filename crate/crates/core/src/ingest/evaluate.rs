use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{IngestError, LabMeasurement};
use crate::graph::{ReferenceRange, Sex};

/// Three-point interpretation of a lab value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NominalLevel {
    Decreased,
    Normal,
    Increased,
}

impl NominalLevel {
    pub const ALL: [NominalLevel; 3] = [NominalLevel::Decreased, NominalLevel::Normal, NominalLevel::Increased];

    pub fn as_str(self) -> &'static str {
        match self {
            NominalLevel::Decreased => "decreased",
            NominalLevel::Normal => "normal",
            NominalLevel::Increased => "increased",
        }
    }

    pub fn negation(self) -> Consequence {
        match self {
            NominalLevel::Decreased => Consequence::NotDecreased,
            NominalLevel::Normal => Consequence::NotNormal,
            NominalLevel::Increased => Consequence::NotIncreased,
        }
    }

    pub fn is_abnormal(self) -> bool {
        self != NominalLevel::Normal
    }
}

impl fmt::Display for NominalLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Negated finding implied by an observed level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Consequence {
    NotDecreased,
    NotNormal,
    NotIncreased,
}

impl Consequence {
    pub fn as_str(self) -> &'static str {
        match self {
            Consequence::NotDecreased => "not_decreased",
            Consequence::NotNormal => "not_normal",
            Consequence::NotIncreased => "not_increased",
        }
    }
}

/// Every level implies "not" each of the other two levels.
pub fn consequence_closure(level: NominalLevel) -> BTreeSet<Consequence> {
    NominalLevel::ALL
        .into_iter()
        .filter(|&other| other != level)
        .map(NominalLevel::negation)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluatedFinding {
    pub parameter: String,
    pub level: NominalLevel,
    pub derived: BTreeSet<Consequence>,
}

impl EvaluatedFinding {
    pub fn new(parameter: impl Into<String>, level: NominalLevel) -> Self {
        EvaluatedFinding {
            parameter: parameter.into(),
            level,
            derived: consequence_closure(level),
        }
    }

    /// Node id of the asserted level, `<parameter>_<level>`.
    pub fn level_id(&self) -> String {
        format!("{}_{}", self.parameter, self.level.as_str())
    }

    pub fn consequence_ids(&self) -> impl Iterator<Item = (Consequence, String)> + '_ {
        self.derived
            .iter()
            .map(move |c| (*c, format!("{}_{}", self.parameter, c.as_str())))
    }
}

fn same_unit(a: &str, b: &str) -> bool {
    a.trim().eq_ignore_ascii_case(b.trim())
}

/// Bounds are inclusive: a value equal to a bound is normal.
pub fn evaluate_measurement(m: &LabMeasurement, range: &ReferenceRange) -> Result<NominalLevel, IngestError> {
    if !same_unit(&m.unit, &range.unit) {
        return Err(IngestError::UnitMismatch {
            parameter: range.parameter.clone(),
            measured: m.unit.clone(),
            expected: range.unit.clone(),
        });
    }
    Ok(classify(m.value, range))
}

fn classify(value: f64, range: &ReferenceRange) -> NominalLevel {
    if range.lower.is_some_and(|lo| value < lo) {
        NominalLevel::Decreased
    } else if range.upper.is_some_and(|hi| value > hi) {
        NominalLevel::Increased
    } else {
        NominalLevel::Normal
    }
}

/// First range in `ranges` applicable to the patient's sex and age.
pub fn select_range<'r>(
    ranges: &'r [ReferenceRange],
    parameter: &str,
    sex: Sex,
    age: f64,
) -> Result<&'r ReferenceRange, IngestError> {
    ranges
        .iter()
        .find(|r| r.applies_to(sex, age))
        .ok_or_else(|| IngestError::NoApplicableRange {
            parameter: parameter.to_string(),
            sex: sex.as_str(),
            age,
        })
}

/// How far outside the range a value lies, scaled by the range width
/// (or by the single bound for one-sided ranges). Zero when normal.
fn deviation(value: f64, range: &ReferenceRange) -> f64 {
    let scale = match (range.lower, range.upper) {
        (Some(lo), Some(hi)) => hi - lo,
        (Some(b), None) | (None, Some(b)) => b.abs(),
        (None, None) => 1.0,
    };
    let scale = if scale > 0.0 { scale } else { 1.0 };
    match classify(value, range) {
        NominalLevel::Decreased => (range.lower.unwrap_or(value) - value) / scale,
        NominalLevel::Increased => (value - range.upper.unwrap_or(value)) / scale,
        NominalLevel::Normal => 0.0,
    }
}

/// Collapses repeated measurements of one parameter: the most extreme
/// abnormal value wins, otherwise the last value. Returns `None` for no values.
pub fn aggregate_levels(values: &[f64], range: &ReferenceRange) -> Option<(f64, NominalLevel)> {
    let last = *values.last()?;
    let mut best: Option<(f64, f64)> = None;
    for &v in values {
        let d = deviation(v, range);
        if d > 0.0 && best.is_none_or(|(bd, _)| d > bd) {
            best = Some((d, v));
        }
    }
    let value = best.map_or(last, |(_, v)| v);
    Some((value, classify(value, range)))
}
