use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Closed set of node kinds in the medical graph.
///
/// `Patient` and `EvaluatedParameter` only appear after patient records have
/// been merged into a curated graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    Disease,
    Finding,
    Parameter,
    ImagingResult,
    PathologicalReferenceRange,
    PatientBaseData,
    ExaminationRule,
    LaboratoryRule,
    ImagingRule,
    ClassifierRule,
    CauseRule,
    Sample,
    ImagingProcedure,
    Organ,
    Source,
    Alternative,
    ExternalSystem,
    ReferenceRange,
    PathData,
    Patient,
    EvaluatedParameter,
}

impl NodeKind {
    pub const ALL: [NodeKind; 21] = [
        NodeKind::Disease,
        NodeKind::Finding,
        NodeKind::Parameter,
        NodeKind::ImagingResult,
        NodeKind::PathologicalReferenceRange,
        NodeKind::PatientBaseData,
        NodeKind::ExaminationRule,
        NodeKind::LaboratoryRule,
        NodeKind::ImagingRule,
        NodeKind::ClassifierRule,
        NodeKind::CauseRule,
        NodeKind::Sample,
        NodeKind::ImagingProcedure,
        NodeKind::Organ,
        NodeKind::Source,
        NodeKind::Alternative,
        NodeKind::ExternalSystem,
        NodeKind::ReferenceRange,
        NodeKind::PathData,
        NodeKind::Patient,
        NodeKind::EvaluatedParameter,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Disease => "Disease",
            NodeKind::Finding => "Finding",
            NodeKind::Parameter => "Parameter",
            NodeKind::ImagingResult => "ImagingResult",
            NodeKind::PathologicalReferenceRange => "PathologicalReferenceRange",
            NodeKind::PatientBaseData => "PatientBaseData",
            NodeKind::ExaminationRule => "ExaminationRule",
            NodeKind::LaboratoryRule => "LaboratoryRule",
            NodeKind::ImagingRule => "ImagingRule",
            NodeKind::ClassifierRule => "ClassifierRule",
            NodeKind::CauseRule => "CauseRule",
            NodeKind::Sample => "Sample",
            NodeKind::ImagingProcedure => "ImagingProcedure",
            NodeKind::Organ => "Organ",
            NodeKind::Source => "Source",
            NodeKind::Alternative => "Alternative",
            NodeKind::ExternalSystem => "ExternalSystem",
            NodeKind::ReferenceRange => "ReferenceRange",
            NodeKind::PathData => "PathData",
            NodeKind::Patient => "Patient",
            NodeKind::EvaluatedParameter => "EvaluatedParameter",
        }
    }

    /// Diagnostic decision steps (left column group of the graph statistics).
    pub fn is_rule(self) -> bool {
        matches!(
            self,
            NodeKind::ExaminationRule
                | NodeKind::LaboratoryRule
                | NodeKind::ImagingRule
                | NodeKind::ClassifierRule
                | NodeKind::CauseRule
        )
    }

    /// Kinds a rule may reference as evidence.
    pub fn is_risk_factor(self) -> bool {
        matches!(
            self,
            NodeKind::Finding
                | NodeKind::Disease
                | NodeKind::ImagingResult
                | NodeKind::Parameter
                | NodeKind::PathologicalReferenceRange
                | NodeKind::PatientBaseData
                | NodeKind::EvaluatedParameter
        )
    }

    /// Kinds that only exist once patient data has been merged in.
    pub fn is_augmentation_only(self) -> bool {
        matches!(self, NodeKind::Patient | NodeKind::EvaluatedParameter)
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown node kind `{0}`")]
pub struct UnknownKind(pub String);

impl FromStr for NodeKind {
    type Err = UnknownKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NodeKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| UnknownKind(s.to_string()))
    }
}
